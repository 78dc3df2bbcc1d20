//! Command-line front end.
//!
//! Settings resolve in the order: command-line flag, `--config` file,
//! environment (`DONATION_FORENSICS_DATA` for the data directory), built-in
//! default.

pub mod analysis;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benford::DEFAULT_MIN_SET_SIZE;
use crate::donation_model::{write_metadata, FitOptions, XiMaxRule};
use crate::ingest::{
    parse_donations, parse_outcomes, read_canonical, read_outcomes, verify_manifest,
    write_canonical, write_outcomes, CandidateOutcome, DonationRecord, IngestError, ManifestStatus,
    SchemaSet, CANONICAL_HEADER, OUTCOME_HEADER,
};
use crate::logit::write_diagnostics;
use crate::report::{
    emit, write_file, ReportError, ReportFormat, ReportKind, ReportRows, ReportSpec, SetKey,
};
use analysis::{
    analyze_races, analyze_sets, benford_sets, build_sets, describe_sets, fit_sets, office_matches,
    synthesize, AnalysisOptions, GroupKey, SyntheticOutput,
};

pub const DATA_ENV: &str = "DONATION_FORENSICS_DATA";
pub const DEFAULT_SEED: u64 = 2014;
pub const MANIFEST_NAME: &str = "md5sums.txt";
pub const RESULTS_NAME: &str = "results.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Csv,
    Markdown,
    Latex,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
            FormatArg::Latex => ReportFormat::Latex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum XiMaxArg {
    /// Upper log-bound at ln(max amount) + 1
    LogMaxPlusOne,
    /// Upper log-bound at max amount + 1
    Literal,
}

impl From<XiMaxArg> for XiMaxRule {
    fn from(a: XiMaxArg) -> Self {
        match a {
            XiMaxArg::LogMaxPlusOne => XiMaxRule::LogMaxPlusOne,
            XiMaxArg::Literal => XiMaxRule::Literal,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "donation-forensics",
    version,
    about = "Benford, donation-model and logit analysis of campaign donations"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Default, Args)]
struct GlobalArgs {
    /// TOML file supplying defaults for any of these flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding the raw exports
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Ingest schema (TOML); the bundled 2014 layout by default
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Output directory
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// Seed for the synthetic control sets (default 2014)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Smallest set size that gets a Benford test
    #[arg(long, global = true)]
    min_n: Option<usize>,
    /// Worker threads (0 = one per processor)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Grouping keys, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    by: Option<Vec<GroupKey>>,
    /// Table formats, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<FormatArg>>,
    /// Keep only offices containing this text (case-insensitive)
    #[arg(long, global = true)]
    office: Option<String>,
    #[arg(long, global = true, value_enum)]
    xi_max_rule: Option<XiMaxArg>,
    /// Suppress progress messages
    #[arg(long, short = 'q', global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check file digests against a manifest
    Verify {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Parse raw exports into canonical CSV
    Ingest,
    /// Descriptive statistics per set
    Stats {
        #[arg(long)]
        input: Vec<PathBuf>,
    },
    /// First-digit tests per set
    Benford {
        #[arg(long)]
        input: Vec<PathBuf>,
    },
    /// Fit the donation model per set
    FitModel {
        #[arg(long)]
        input: Vec<PathBuf>,
    },
    /// Draw Rand and Model control sets from fitted models
    Synth {
        #[arg(long)]
        input: Vec<PathBuf>,
    },
    /// Per-race logistic regression of election on donation share
    Logit {
        #[arg(long)]
        donations: Vec<PathBuf>,
        #[arg(long)]
        outcomes: Vec<PathBuf>,
    },
    /// Re-render tables from a saved results file
    Report {
        #[arg(long)]
        results: PathBuf,
    },
    /// Verify, ingest, analyze and emit every table
    Pipeline {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct ConfigFile {
    data: Option<PathBuf>,
    schema: Option<PathBuf>,
    output: Option<PathBuf>,
    manifest: Option<PathBuf>,
    seed: Option<u64>,
    min_n: Option<usize>,
    jobs: Option<usize>,
    by: Option<Vec<GroupKey>>,
    format: Option<Vec<FormatArg>>,
    office: Option<String>,
    xi_max_rule: Option<XiMaxRule>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.data,
            &mut cfg.schema,
            &mut cfg.output,
            &mut cfg.manifest,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub output: PathBuf,
    pub manifest: Option<PathBuf>,
    pub seed: u64,
    pub min_n: usize,
    pub jobs: usize,
    pub by: Vec<GroupKey>,
    pub formats: Vec<ReportFormat>,
    pub office: Option<String>,
    pub xi_max_rule: XiMaxRule,
    pub quiet: bool,
}

impl RunConfig {
    fn resolve(
        args: GlobalArgs,
        manifest: Option<PathBuf>,
        env_data: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let cfg = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let formats: Vec<ReportFormat> = args
            .format
            .or(cfg.format)
            .unwrap_or_else(|| vec![FormatArg::Csv])
            .into_iter()
            .map(Into::into)
            .collect();
        let min_n = args.min_n.or(cfg.min_n).unwrap_or(DEFAULT_MIN_SET_SIZE);
        if min_n == 0 {
            return Err(CliError::Usage("--min-n must be at least 1".into()));
        }
        Ok(Self {
            data: args.data.or(cfg.data).or(env_data),
            schema: args.schema.or(cfg.schema),
            output: args
                .output
                .or(cfg.output)
                .unwrap_or_else(|| PathBuf::from("out")),
            manifest: manifest.or(cfg.manifest),
            seed: args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
            min_n,
            jobs: args.jobs.or(cfg.jobs).unwrap_or(0),
            by: args
                .by
                .or(cfg.by)
                .unwrap_or_else(|| vec![GroupKey::Party, GroupKey::Category]),
            formats,
            office: args.office.or(cfg.office),
            xi_max_rule: args
                .xi_max_rule
                .map(Into::into)
                .or(cfg.xi_max_rule)
                .unwrap_or_default(),
            quiet: args.quiet,
        })
    }

    fn schemas(&self) -> Result<SchemaSet, CliError> {
        Ok(match &self.schema {
            Some(p) => SchemaSet::load(p)?,
            None => SchemaSet::tse2014(),
        })
    }

    fn data_dir(&self) -> Result<&Path, CliError> {
        let dir = self.data.as_deref().ok_or_else(|| {
            CliError::Usage(format!("no data directory: pass --data or set {DATA_ENV}"))
        })?;
        if !dir.is_dir() {
            return Err(CliError::Usage(format!(
                "data directory {} does not exist",
                dir.display()
            )));
        }
        Ok(dir)
    }

    fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            min_n: self.min_n,
            seed: self.seed,
            fit: FitOptions {
                xi_max_rule: self.xi_max_rule,
                ..FitOptions::default()
            },
        }
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let manifest = match &cli.command {
        Command::Verify { manifest } | Command::Pipeline { manifest } => manifest.clone(),
        _ => None,
    };
    let env_data = std::env::var_os(DATA_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let config = RunConfig::resolve(cli.global, manifest, env_data)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", config.jobs)))?;
    pool.install(|| match cli.command {
        Command::Verify { .. } => cmd_verify(&config),
        Command::Ingest => cmd_ingest(&config),
        Command::Stats { input } => cmd_stats(&config, &input),
        Command::Benford { input } => cmd_benford(&config, &input),
        Command::FitModel { input } => cmd_fit_model(&config, &input),
        Command::Synth { input } => cmd_synth(&config, &input),
        Command::Logit {
            donations,
            outcomes,
        } => cmd_logit(&config, &donations, &outcomes),
        Command::Report { results } => cmd_report(&config, &results),
        Command::Pipeline { .. } => cmd_pipeline(&config),
    })
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| IngestError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| IngestError::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn starts_with_header(path: &Path, header: &str) -> Result<bool, CliError> {
    let mut buf = vec![0u8; header.len()];
    let file = File::open(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let n = BufReader::new(file)
        .take(header.len() as u64)
        .read(&mut buf)
        .unwrap_or(0);
    Ok(n == header.len() && buf == header.as_bytes())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(path).map_err(|e| {
        IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        }
    })?))
}

fn load_donation_file(
    config: &RunConfig,
    schemas: &SchemaSet,
    path: &Path,
) -> Result<Vec<DonationRecord>, CliError> {
    if starts_with_header(path, CANONICAL_HEADER)? {
        return Ok(read_canonical(open(path)?, &path.display().to_string())?);
    }
    let name = file_name(path);
    let schema = schemas.donation_schema_for(&name).ok_or_else(|| {
        CliError::Usage(format!(
            "{}: no donation schema matches this file",
            path.display()
        ))
    })?;
    let (records, report) = parse_donations(path, schema)?;
    config.log(format!(
        "{name}: {} rows, {} accepted, {} malformed",
        report.data_rows,
        report.accepted,
        report.malformed.len()
    ));
    if report.exceeds_threshold() {
        let first = report
            .malformed
            .first()
            .map(|m| format!(" (row {}: {})", m.row, m.reason))
            .unwrap_or_default();
        return Err(CliError::Analysis(format!(
            "{}: {:.3}% of rows malformed{first}",
            path.display(),
            100.0 * report.malformed_fraction()
        )));
    }
    Ok(records)
}

fn load_outcome_file(
    config: &RunConfig,
    schemas: &SchemaSet,
    path: &Path,
) -> Result<Vec<CandidateOutcome>, CliError> {
    if starts_with_header(path, OUTCOME_HEADER)? {
        return Ok(read_outcomes(open(path)?, &path.display().to_string())?);
    }
    let name = file_name(path);
    let schema = match (
        schemas.outcome_schema_for(&name),
        schemas.outcomes.as_slice(),
    ) {
        (Some(s), _) => s,
        (None, [only]) => only,
        _ => {
            return Err(CliError::Usage(format!(
                "{}: no outcome schema matches this file",
                path.display()
            )))
        }
    };
    let (outcomes, report) = parse_outcomes(path, schema)?;
    config.log(format!(
        "{name}: {} rows, {} accepted, {} malformed",
        report.data_rows,
        report.accepted,
        report.malformed.len()
    ));
    if report.exceeds_threshold() {
        return Err(CliError::Analysis(format!(
            "{}: {:.3}% of rows malformed",
            path.display(),
            100.0 * report.malformed_fraction()
        )));
    }
    Ok(outcomes)
}

/// Donations from explicit inputs, or every matching file of the data directory.
fn load_donations(config: &RunConfig, inputs: &[PathBuf]) -> Result<Vec<DonationRecord>, CliError> {
    let schemas = config.schemas()?;
    let files = if inputs.is_empty() {
        let dir = config.data_dir()?;
        sorted_files(dir)?
            .into_iter()
            .filter(|p| schemas.donation_schema_for(&file_name(p)).is_some())
            .collect()
    } else {
        inputs.to_vec()
    };
    if files.is_empty() {
        return Err(CliError::Usage("no donation files to read".into()));
    }
    let mut records = Vec::new();
    for f in &files {
        records.extend(load_donation_file(config, &schemas, f)?);
    }
    records.retain(|r| office_matches(&r.office, config.office.as_deref()));
    Ok(records)
}

fn load_outcomes(
    config: &RunConfig,
    inputs: &[PathBuf],
) -> Result<Vec<CandidateOutcome>, CliError> {
    let schemas = config.schemas()?;
    let files = if inputs.is_empty() {
        match config.data.as_deref() {
            Some(dir) if dir.is_dir() => sorted_files(dir)?
                .into_iter()
                .filter(|p| schemas.outcome_schema_for(&file_name(p)).is_some())
                .collect(),
            _ => Vec::new(),
        }
    } else {
        inputs.to_vec()
    };
    let mut outcomes = Vec::new();
    for f in &files {
        outcomes.extend(load_outcome_file(config, &schemas, f)?);
    }
    Ok(outcomes)
}

fn emit_all(
    config: &RunConfig,
    name: &str,
    kind: ReportKind,
    rows: &ReportRows,
) -> Result<(), CliError> {
    for &format in &config.formats {
        let path = config.output.join(format!("{name}.{}", format.extension()));
        emit(
            &ReportSpec {
                kind,
                format,
                path: path.clone(),
            },
            rows,
        )?;
        config.log(format!("wrote {}", path.display()));
    }
    Ok(())
}

fn cmd_verify(config: &RunConfig) -> Result<(), CliError> {
    let dir = config.data_dir()?;
    let manifest = config
        .manifest
        .clone()
        .unwrap_or_else(|| dir.join(MANIFEST_NAME));
    if !manifest.is_file() {
        return Err(CliError::Usage(format!(
            "manifest {} not found",
            manifest.display()
        )));
    }
    verify(&manifest, dir, |line| println!("{line}"))
}

fn verify(manifest: &Path, dir: &Path, mut print: impl FnMut(String)) -> Result<(), CliError> {
    let results = verify_manifest(manifest, dir)?;
    let mut bad = Vec::new();
    for (entry, _, status) in &results {
        match status {
            ManifestStatus::Match => print(format!("OK        {}", entry.file_name)),
            ManifestStatus::Mismatch { actual } => {
                print(format!(
                    "MISMATCH  {} expected {} got {actual}",
                    entry.file_name, entry.digest
                ));
                bad.push(entry.file_name.clone());
            }
            ManifestStatus::Missing => {
                print(format!("MISSING   {}", entry.file_name));
                bad.push(entry.file_name.clone());
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Analysis(format!(
            "{} of {} files failed verification: {}",
            bad.len(),
            results.len(),
            bad.join(", ")
        )))
    }
}

fn cmd_ingest(config: &RunConfig) -> Result<(), CliError> {
    let donations = load_donations(config, &[])?;
    let outcomes = load_outcomes(config, &[])?;
    write_records(config, &donations, &outcomes)
}

fn write_records(
    config: &RunConfig,
    donations: &[DonationRecord],
    outcomes: &[CandidateOutcome],
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_canonical(&mut buf, donations).expect("in-memory write");
    let path = config.output.join("donations.csv");
    write_file(&path, &buf)?;
    config.log(format!(
        "wrote {} ({} donations)",
        path.display(),
        donations.len()
    ));
    if !outcomes.is_empty() {
        let mut buf = Vec::new();
        write_outcomes(&mut buf, outcomes).expect("in-memory write");
        let path = config.output.join("outcomes.csv");
        write_file(&path, &buf)?;
        config.log(format!(
            "wrote {} ({} candidates)",
            path.display(),
            outcomes.len()
        ));
    }
    Ok(())
}

fn cmd_stats(config: &RunConfig, input: &[PathBuf]) -> Result<(), CliError> {
    let sets = build_sets(&load_donations(config, input)?, &config.by);
    emit_all(
        config,
        "descriptive",
        ReportKind::DescriptiveTable,
        &ReportRows::Descriptive(describe_sets(&sets)),
    )
}

fn cmd_benford(config: &RunConfig, input: &[PathBuf]) -> Result<(), CliError> {
    let sets = build_sets(&load_donations(config, input)?, &config.by);
    let rows = benford_sets(&sets, config.min_n);
    config.log(format!(
        "{} of {} sets tested (min n {})",
        rows.len(),
        sets.len(),
        config.min_n
    ));
    emit_all(
        config,
        "benford",
        ReportKind::BenfordTable,
        &ReportRows::Benford(rows),
    )
}

fn fit_report(config: &RunConfig, fits: &[analysis::FitOutcome]) -> ReportRows {
    let analysis = analysis::SetAnalysis {
        fits: fits.to_vec(),
        ..Default::default()
    };
    for f in fits {
        if let Err(e) = &f.fit {
            config.log(format!("{}: no model fit ({e})", f.key.label()));
        }
    }
    ReportRows::FitParams(analysis.fit_rows())
}

fn cmd_fit_model(config: &RunConfig, input: &[PathBuf]) -> Result<(), CliError> {
    let sets = build_sets(&load_donations(config, input)?, &config.by);
    let fits = fit_sets(&sets, &config.analysis_options().fit);
    emit_all(
        config,
        "fit_params",
        ReportKind::FitParamsTable,
        &fit_report(config, &fits),
    )
}

fn write_synthetic(config: &RunConfig, synthetic: &[SyntheticOutput]) -> Result<(), CliError> {
    let dir = config.output.join("synthetic");
    for s in synthetic {
        let mut text = String::from("amount\n");
        for a in &s.set.amounts {
            text.push_str(&a.to_string());
            text.push('\n');
        }
        let slug = s.key.slug();
        write_file(&dir.join(format!("{slug}.csv")), text.as_bytes())?;
        let meta = dir.join(format!("{slug}.json"));
        write_metadata(&s.set, &meta).map_err(|source| ReportError::Io {
            path: meta.clone(),
            source,
        })?;
    }
    config.log(format!(
        "wrote {} synthetic sets to {}",
        synthetic.len(),
        dir.display()
    ));
    Ok(())
}

fn cmd_synth(config: &RunConfig, input: &[PathBuf]) -> Result<(), CliError> {
    let sets = build_sets(&load_donations(config, input)?, &config.by);
    let fits = fit_sets(&sets, &config.analysis_options().fit);
    write_synthetic(config, &synthesize(&sets, &fits, config.seed))
}

fn write_logit(
    config: &RunConfig,
    donations: &[DonationRecord],
    outcomes: &[CandidateOutcome],
) -> Result<ReportRows, CliError> {
    let (summaries, fitted) = analyze_races(donations, outcomes, config.office.as_deref());
    for s in &summaries {
        if let Err(marker) = &s.outcome {
            config.log(format!("race {} {}: {marker}", s.federal_unit, s.office));
        }
    }
    let dir = config.output.join("logit");
    for (race, fit) in &fitted {
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, race, fit).expect("in-memory write");
        let key = SetKey::new(
            format!("{} {}", race.federal_unit, race.office),
            crate::report::SetCategory::All,
            crate::report::SetSource::Real,
        );
        write_file(
            &dir.join(format!(
                "{}.csv",
                key.group.replace(|c: char| !c.is_ascii_alphanumeric(), "_")
            )),
            &buf,
        )?;
    }
    Ok(ReportRows::Logit(summaries))
}

fn cmd_logit(
    config: &RunConfig,
    donations: &[PathBuf],
    outcomes: &[PathBuf],
) -> Result<(), CliError> {
    if outcomes.is_empty() && config.data.is_none() {
        return Err(CliError::Usage(
            "logit needs --outcomes or a data directory".into(),
        ));
    }
    let records = load_donations(config, donations)?;
    let outcomes = load_outcomes(config, outcomes)?;
    if outcomes.is_empty() {
        return Err(CliError::Usage("no election outcomes found".into()));
    }
    let rows = write_logit(config, &records, &outcomes)?;
    emit_all(config, "logit", ReportKind::LogitTable, &rows)
}

/// Every table of a pipeline run, as saved for later re-rendering.
#[derive(Debug, Serialize, Deserialize)]
struct Results {
    seed: u64,
    min_n: usize,
    tables: BTreeMap<String, ReportRows>,
}

const TABLES: [(&str, ReportKind); 5] = [
    ("descriptive", ReportKind::DescriptiveTable),
    ("benford", ReportKind::BenfordTable),
    ("fit_params", ReportKind::FitParamsTable),
    ("logit", ReportKind::LogitTable),
    ("curves", ReportKind::CumulativeCurves),
];

fn emit_tables(config: &RunConfig, tables: &BTreeMap<String, ReportRows>) -> Result<(), CliError> {
    for (name, kind) in TABLES {
        let Some(rows) = tables.get(name) else {
            continue;
        };
        if kind == ReportKind::CumulativeCurves {
            let path = config.output.join(format!("{name}.csv"));
            emit(
                &ReportSpec {
                    kind,
                    format: ReportFormat::Csv,
                    path,
                },
                rows,
            )?;
        } else {
            emit_all(config, name, kind, rows)?;
        }
    }
    Ok(())
}

fn cmd_report(config: &RunConfig, results: &Path) -> Result<(), CliError> {
    let results: Results = serde_json::from_reader(open(results)?)
        .map_err(|e| CliError::Usage(format!("{}: not a results file ({e})", results.display())))?;
    emit_tables(config, &results.tables)
}

fn cmd_pipeline(config: &RunConfig) -> Result<(), CliError> {
    let dir = config.data_dir()?;
    let manifest = config
        .manifest
        .clone()
        .unwrap_or_else(|| dir.join(MANIFEST_NAME));
    if manifest.is_file() {
        verify(&manifest, dir, |line| config.log(line))?;
    } else {
        config.log(format!(
            "no manifest at {}; skipping digest check",
            manifest.display()
        ));
    }

    let donations = load_donations(config, &[])?;
    let outcomes = load_outcomes(config, &[])?;
    write_records(config, &donations, &outcomes)?;

    let mut sets = build_sets(&donations, &config.by);
    if config.by.iter().any(|k| *k != GroupKey::Category) {
        let overall: Vec<GroupKey> = config
            .by
            .iter()
            .copied()
            .filter(|k| *k == GroupKey::Category)
            .collect();
        sets.extend(build_sets(&donations, &overall));
        sets.sort_by(|a, b| a.key.cmp(&b.key));
    }
    let analysis = analyze_sets(&sets, &config.analysis_options());
    for w in &analysis.warnings {
        config.log(w);
    }
    write_synthetic(config, &analysis.synthetic)?;

    let mut tables = BTreeMap::new();
    tables.insert(
        "descriptive".to_string(),
        ReportRows::Descriptive(analysis.descriptive.clone()),
    );
    tables.insert(
        "benford".to_string(),
        ReportRows::Benford(analysis.benford.clone()),
    );
    tables.insert(
        "fit_params".to_string(),
        ReportRows::FitParams(analysis.fit_rows()),
    );
    tables.insert(
        "curves".to_string(),
        ReportRows::Curves(analysis.curves.clone()),
    );
    if outcomes.is_empty() {
        config.log("no election outcomes; skipping logit fits");
    } else {
        tables.insert(
            "logit".to_string(),
            write_logit(config, &donations, &outcomes)?,
        );
    }
    emit_tables(config, &tables)?;

    let results = Results {
        seed: config.seed,
        min_n: config.min_n,
        tables,
    };
    let json = serde_json::to_string_pretty(&results)
        .map_err(|e| CliError::Analysis(e.to_string()))?
        + "\n";
    write_file(&config.output.join(RESULTS_NAME), json.as_bytes())?;
    config.log(format!(
        "{} sets analyzed; results in {}",
        sets.len(),
        config.output.display()
    ));
    Ok(())
}
