//! Result tables as CSV, Markdown or LaTeX.
//!
//! Rows are sorted by group name, then category (All, CNPJ, CPF,
//! Non-original, Unknown), then real before Rand, with each group's Model
//! row last. Output is a pure function of the rows: LF line endings, fixed
//! decimal places per column.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benford::{benford_expected, BenfordTest};
use crate::donation_model::DonationModelFit;
use crate::ingest::DonorCategory;
use crate::logit::LogitSummary;
use crate::money::Cents;
use crate::stats::DescriptiveStats;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{kind:?} report cannot hold {rows} rows")]
    SchemaMismatch {
        kind: ReportKind,
        rows: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReportKind {
    DescriptiveTable,
    BenfordTable,
    LogitTable,
    FitParamsTable,
    CumulativeCurves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Latex,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
            ReportFormat::Latex => "tex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSpec {
    pub kind: ReportKind,
    pub format: ReportFormat,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SetCategory {
    All,
    Cnpj,
    Cpf,
    NonOriginal,
    Unknown,
}

impl SetCategory {
    pub fn display_name(self) -> &'static str {
        match self {
            SetCategory::All => "All",
            SetCategory::Cnpj => "CNPJ",
            SetCategory::Cpf => "CPF",
            SetCategory::NonOriginal => "Non-original",
            SetCategory::Unknown => "Unknown",
        }
    }
}

impl From<DonorCategory> for SetCategory {
    fn from(c: DonorCategory) -> Self {
        match c {
            DonorCategory::Cnpj => SetCategory::Cnpj,
            DonorCategory::Cpf => SetCategory::Cpf,
            DonorCategory::NonOriginal => SetCategory::NonOriginal,
            DonorCategory::Unknown => SetCategory::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SetSource {
    Real,
    Rand,
    Model,
}

/// Identifies one donation set within a report.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetKey {
    pub group: String,
    pub category: SetCategory,
    pub source: SetSource,
}

impl SetKey {
    pub fn new(group: impl Into<String>, category: SetCategory, source: SetSource) -> Self {
        Self {
            group: group.into(),
            category,
            source,
        }
    }

    /// Table label in the style "PSDB - CPF Rand" / "PSDB - Model".
    pub fn label(&self) -> String {
        let prefix = if self.group.is_empty() {
            String::new()
        } else {
            format!("{} - ", self.group)
        };
        match self.source {
            SetSource::Real => format!("{prefix}{}", self.category.display_name()),
            SetSource::Rand => format!("{prefix}{} Rand", self.category.display_name()),
            SetSource::Model => format!("{prefix}Model"),
        }
    }

    /// File-name friendly form of [`SetKey::label`].
    pub fn slug(&self) -> String {
        self.label()
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect::<String>()
            .replace("_-_", "__")
    }

    fn sort_key(&self) -> (&str, bool, SetCategory, SetSource) {
        (
            &self.group,
            self.source == SetSource::Model,
            self.category,
            self.source,
        )
    }
}

impl PartialOrd for SetKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SetKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub key: SetKey,
    pub stats: DescriptiveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenfordRow {
    pub key: SetKey,
    pub test: BenfordTest,
    pub stats: DescriptiveStats,
    /// Fit behind the set (its own fit for real sets, the source fit for Rand).
    pub fit: Option<DonationModelFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParamsRow {
    pub key: SetKey,
    pub max: Cents,
    pub fit: DonationModelFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub key: SetKey,
    /// `(ln amount, empirical fraction)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Fitted CDF at each abscissa, when a fit exists.
    pub fitted: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReportRows {
    Descriptive(Vec<DescriptiveRow>),
    Benford(Vec<BenfordRow>),
    Logit(Vec<LogitSummary>),
    FitParams(Vec<FitParamsRow>),
    Curves(Vec<CurveRow>),
}

impl ReportRows {
    fn name(&self) -> &'static str {
        match self {
            ReportRows::Descriptive(_) => "descriptive",
            ReportRows::Benford(_) => "Benford",
            ReportRows::Logit(_) => "logit",
            ReportRows::FitParams(_) => "fit-parameter",
            ReportRows::Curves(_) => "curve",
        }
    }

    fn kind(&self) -> ReportKind {
        match self {
            ReportRows::Descriptive(_) => ReportKind::DescriptiveTable,
            ReportRows::Benford(_) => ReportKind::BenfordTable,
            ReportRows::Logit(_) => ReportKind::LogitTable,
            ReportRows::FitParams(_) => ReportKind::FitParamsTable,
            ReportRows::Curves(_) => ReportKind::CumulativeCurves,
        }
    }
}

/// Header plus string cells, already ordered.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn opt_cents(c: Option<Cents>) -> String {
    c.map(|c| c.to_string()).unwrap_or_default()
}

fn opt_fixed(v: Option<f64>, places: usize) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.places$}"),
        _ => String::new(),
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn descriptive_table(rows: &[DescriptiveRow]) -> Table {
    let mut rows: Vec<&DescriptiveRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    Table {
        header: header(&["set", "min", "max", "average", "std", "n", "total"]),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.key.label(),
                    opt_cents(r.stats.min),
                    opt_cents(r.stats.max),
                    opt_fixed(r.stats.mean, 3),
                    opt_fixed(r.stats.std, 3),
                    r.stats.n.to_string(),
                    r.stats.total.to_string(),
                ]
            })
            .collect(),
    }
}

fn benford_table(rows: &[BenfordRow], exact_p: bool) -> Table {
    let mut rows: Vec<&BenfordRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    let mut cols = vec![
        "set", "1", "2", "3", "4", "5", "6", "7", "8", "9", "n", "chi2", "p_value",
    ];
    if exact_p {
        cols.push("p_value_exact");
    }
    cols.extend(["min", "max", "sum", "gamma", "xi0"]);

    let mut benford = vec!["Benford".to_string()];
    benford.extend(benford_expected().iter().map(|p| format!("{p:.3}")));
    benford.resize(cols.len(), String::new());

    let mut out = vec![benford];
    for r in rows {
        let mut cells = vec![r.key.label()];
        cells.extend(r.test.proportions.iter().map(|p| format!("{p:.3}")));
        cells.push(r.test.histogram.n().to_string());
        cells.push(format!("{:.3}", r.test.chi2));
        cells.push(format!("{:.3}", r.test.p_value));
        if exact_p {
            cells.push(format!("{:.6e}", r.test.p_value));
        }
        cells.push(opt_cents(r.stats.min));
        cells.push(opt_cents(r.stats.max));
        cells.push(r.stats.total.to_string());
        cells.push(opt_fixed(r.fit.map(|f| f.gamma), 4));
        cells.push(opt_fixed(r.fit.map(|f| f.xi0), 4));
        out.push(cells);
    }
    Table {
        header: header(&cols),
        rows: out,
    }
}

const LOGIT_COLUMNS: [&str; 14] = [
    "federal_unit",
    "office",
    "beta0",
    "sigma0",
    "wald_p0",
    "beta1",
    "sigma1",
    "wald_p1",
    "N",
    "n",
    "deviance",
    "deviance_p",
    "total_money",
    "status",
];

fn sorted_logit(rows: &[LogitSummary]) -> Vec<&LogitSummary> {
    let mut rows: Vec<&LogitSummary> = rows.iter().collect();
    rows.sort_by(|a, b| (&a.federal_unit, &a.office).cmp(&(&b.federal_unit, &b.office)));
    rows
}

fn logit_table(rows: &[LogitSummary]) -> Table {
    let rows = sorted_logit(rows)
        .into_iter()
        .map(|r| {
            let mut cells = vec![r.federal_unit.clone(), r.office.clone()];
            match &r.outcome {
                Ok(fit) => {
                    let se = fit.std_errors();
                    cells.extend([
                        format!("{:.6}", fit.beta0),
                        format!("{:.6}", se[0]),
                        format!("{:.6}", fit.wald_p[0]),
                        format!("{:.6}", fit.beta1),
                        format!("{:.6}", se[1]),
                        format!("{:.6}", fit.wald_p[1]),
                    ]);
                }
                Err(_) => cells.extend(std::iter::repeat_n(String::new(), 6)),
            }
            cells.push(r.n.to_string());
            cells.push(r.n_elected.to_string());
            match &r.outcome {
                Ok(fit) => cells.extend([
                    format!("{:.6}", fit.deviance),
                    format!("{:.6}", fit.deviance_p),
                ]),
                Err(_) => cells.extend([String::new(), String::new()]),
            }
            cells.push(r.total_money.to_string());
            cells.push(match &r.outcome {
                Ok(_) => "ok".to_string(),
                Err(marker) => marker.clone(),
            });
            cells
        })
        .collect();
    Table {
        header: header(&LOGIT_COLUMNS),
        rows,
    }
}

fn fit_params_table(rows: &[FitParamsRow]) -> Table {
    let mut rows: Vec<&FitParamsRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    Table {
        header: header(&[
            "set",
            "max",
            "n",
            "gamma",
            "exp_xi0",
            "xi0",
            "xi_max",
            "log_likelihood",
            "converged",
        ]),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.key.label(),
                    r.max.to_string(),
                    r.fit.n.to_string(),
                    format!("{:.6}", r.fit.gamma),
                    format!("{:.2}", r.fit.location_amount()),
                    format!("{:.6}", r.fit.xi0),
                    format!("{:.6}", r.fit.xi_max),
                    opt_fixed(Some(r.fit.log_likelihood), 6),
                    r.fit.converged.to_string(),
                ]
            })
            .collect(),
    }
}

fn curves_table(rows: &[CurveRow]) -> Table {
    let mut rows: Vec<&CurveRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    let mut out = Vec::new();
    for r in rows {
        for (i, (x, y)) in r.points.iter().enumerate() {
            let fitted = r.fitted.as_ref().and_then(|f| f.get(i).copied());
            out.push(vec![
                r.key.label(),
                format!("{x:.6}"),
                format!("{y:.6}"),
                opt_fixed(fitted, 6),
            ]);
        }
    }
    Table {
        header: header(&[
            "set",
            "log_amount",
            "cumulative_fraction",
            "fitted_fraction",
        ]),
        rows: out,
    }
}

fn render_csv(table: &Table) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.header).expect("in-memory write");
    for r in &table.rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
}

fn render_markdown(table: &Table) -> String {
    let mut s = String::new();
    let line = |cells: &[String]| {
        format!(
            "| {} |\n",
            cells
                .iter()
                .map(|c| c.replace('|', "\\|"))
                .collect::<Vec<_>>()
                .join(" | ")
        )
    };
    s.push_str(&line(&table.header));
    s.push_str(&format!("|{}\n", "---|".repeat(table.header.len())));
    for r in &table.rows {
        s.push_str(&line(r));
    }
    s
}

fn latex_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                out.push('\\');
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    out
}

fn render_latex(table: &Table) -> String {
    let mut s = format!(
        "\\begin{{tabular}}{{c|{}}}\n",
        "c".repeat(table.header.len().saturating_sub(1))
    );
    let line = |cells: &[String]| {
        format!(
            "{} \\\\\n",
            cells
                .iter()
                .map(|c| latex_escape(c))
                .collect::<Vec<_>>()
                .join(" & ")
        )
    };
    s.push_str(&line(&table.header));
    s.push_str("\\hline\n");
    for r in &table.rows {
        s.push_str(&line(r));
    }
    s.push_str("\\end{tabular}\n");
    s
}

/// Two lines per race, intercept above slope, as in a typeset results table.
fn render_logit_latex(rows: &[LogitSummary]) -> String {
    let mut s = String::from("\\begin{tabular}{c|cc|cccc|c}\n");
    s.push_str("UF & $\\beta\\pm\\sigma$ & p-value (Wald) & $N$ & $n$ & Deviance & p-value & Total Money \\\\\n\\hline\n");
    for r in sorted_logit(rows) {
        let uf = latex_escape(&format!("{} {}", r.federal_unit, r.office));
        match &r.outcome {
            Ok(fit) => {
                let se = fit.std_errors();
                let _ = writeln!(
                    s,
                    "{uf} & {:.6} $\\pm$ {:.6} & {:.6} & {} & {} & {:.6} & {:.6} & {} \\\\",
                    fit.beta0,
                    se[0],
                    fit.wald_p[0],
                    r.n,
                    r.n_elected,
                    fit.deviance,
                    fit.deviance_p,
                    r.total_money
                );
                let _ = writeln!(
                    s,
                    " & {:.6} $\\pm$ {:.6} & {:.6} & & & & & \\\\",
                    fit.beta1, se[1], fit.wald_p[1]
                );
            }
            Err(marker) => {
                let _ = writeln!(
                    s,
                    "{uf} & \\multicolumn{{2}}{{c|}}{{{}}} & {} & {} & & & {} \\\\",
                    latex_escape(marker),
                    r.n,
                    r.n_elected,
                    r.total_money
                );
            }
        }
        s.push_str("\\hline\n");
    }
    s.push_str("\\end{tabular}\n");
    s
}

/// Render rows of `kind` in `format`.
pub fn render(
    kind: ReportKind,
    format: ReportFormat,
    rows: &ReportRows,
) -> Result<String, ReportError> {
    if rows.kind() != kind {
        return Err(ReportError::SchemaMismatch {
            kind,
            rows: rows.name(),
        });
    }
    if let (ReportRows::Logit(r), ReportFormat::Latex) = (rows, format) {
        return Ok(render_logit_latex(r));
    }
    let table = match rows {
        ReportRows::Descriptive(r) => descriptive_table(r),
        ReportRows::Benford(r) => benford_table(r, format == ReportFormat::Csv),
        ReportRows::Logit(r) => logit_table(r),
        ReportRows::FitParams(r) => fit_params_table(r),
        ReportRows::Curves(r) => curves_table(r),
    };
    Ok(match format {
        ReportFormat::Csv => render_csv(&table),
        ReportFormat::Markdown => render_markdown(&table),
        ReportFormat::Latex => render_latex(&table),
    })
}

/// Render and write one report file, creating parent directories.
pub fn emit(spec: &ReportSpec, rows: &ReportRows) -> Result<(), ReportError> {
    let text = render(spec.kind, spec.format, rows)?;
    write_file(&spec.path, text.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}
