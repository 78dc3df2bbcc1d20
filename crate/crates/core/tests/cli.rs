use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use donation_forensics::cli::run;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tse_sample")
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn df(args: &[&str]) -> i32 {
    let mut argv = vec!["donation-forensics", "-q"];
    argv.extend_from_slice(args);
    run(argv)
}

fn pipeline(out: &Path, seed: &str, jobs: &str) -> i32 {
    df(&[
        "pipeline",
        "--data",
        fixture().to_str().unwrap(),
        "--seed",
        seed,
        "--jobs",
        jobs,
        "-o",
        out.to_str().unwrap(),
    ])
}

#[test]
fn pipeline_is_byte_deterministic() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    assert_eq!(pipeline(a.path(), "7", "1"), 0);
    assert_eq!(pipeline(b.path(), "7", "4"), 0);
    assert_eq!(pipeline(c.path(), "8", "2"), 0);
    let (ta, tb, tc) = (tree(a.path()), tree(b.path()), tree(c.path()));
    assert!(ta.len() > 10);
    assert_eq!(ta, tb);
    assert_ne!(
        ta.get(Path::new("benford.csv")),
        tc.get(Path::new("benford.csv"))
    );
    assert_eq!(
        ta.get(Path::new("descriptive.csv")),
        tc.get(Path::new("descriptive.csv"))
    );
}

#[test]
fn pipeline_tables_have_expected_rows() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(pipeline(out.path(), "7", "0"), 0);
    let benford = fs::read_to_string(out.path().join("benford.csv")).unwrap();
    let lines: Vec<&str> = benford.lines().collect();
    assert!(lines[1].starts_with("Benford,0.301,0.176,0.125,0.097,0.079,0.067,0.058,0.051,0.046"));
    for label in [
        "PSDB - All,",
        "PSDB - All Rand,",
        "PSDB - CPF Rand,",
        "PSDB - Model,",
        "PSTU - CPF,",
    ] {
        assert_eq!(
            lines.iter().filter(|l| l.starts_with(label)).count(),
            1,
            "{label}"
        );
    }
    // PSTU has a single category, so its Model set is its CPF Rand set
    let cells = |prefix: &str| {
        lines
            .iter()
            .find(|l| l.starts_with(prefix))
            .unwrap()
            .split(',')
            .skip(1)
            .take(12)
            .collect::<Vec<_>>()
    };
    assert_eq!(cells("PSTU - Model,"), cells("PSTU - CPF Rand,"));
    // Unknown sets are below the size threshold
    assert!(!benford.contains("PSDB - Unknown,"));

    let descriptive = fs::read_to_string(out.path().join("descriptive.csv")).unwrap();
    assert!(descriptive.contains("\nPSDB - Unknown,"));
    let logit = fs::read_to_string(out.path().join("logit.csv")).unwrap();
    assert_eq!(logit.lines().count(), 3);
    assert!(out.path().join("logit/RS_Deputado_Federal.csv").is_file());
    assert!(out.path().join("synthetic/PSDB__Model.json").is_file());
    assert!(out.path().join("results.json").is_file());
}

#[test]
fn subcommands_run_independently() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    let data = fixture();
    assert_eq!(
        df(&["ingest", "--data", data.to_str().unwrap(), "-o", o]),
        0
    );
    let donations = out.path().join("donations.csv");
    let outcomes = out.path().join("outcomes.csv");
    let d = donations.to_str().unwrap();

    let b = out.path().join("b");
    assert_eq!(
        df(&[
            "benford",
            "--input",
            d,
            "--by",
            "party,category",
            "--min-n",
            "21",
            "-o",
            b.to_str().unwrap()
        ]),
        0
    );
    assert!(fs::read_to_string(b.join("benford.csv"))
        .unwrap()
        .contains("\nPSDB - Non-original,"));

    let s = out.path().join("s");
    assert_eq!(
        df(&[
            "stats",
            "--input",
            d,
            "--by",
            "category",
            "--format",
            "csv,markdown",
            "-o",
            s.to_str().unwrap()
        ]),
        0
    );
    let stats = fs::read_to_string(s.join("descriptive.csv")).unwrap();
    assert_eq!(stats.lines().count(), 6);
    assert!(s.join("descriptive.md").is_file());

    let f = out.path().join("f");
    assert_eq!(
        df(&[
            "fit-model",
            "--input",
            d,
            "--by",
            "category",
            "-o",
            f.to_str().unwrap()
        ]),
        0
    );
    assert!(fs::read_to_string(f.join("fit_params.csv"))
        .unwrap()
        .contains("\nCNPJ,"));

    let y = out.path().join("y");
    assert_eq!(
        df(&[
            "synth",
            "--input",
            d,
            "--by",
            "category",
            "--seed",
            "3",
            "-o",
            y.to_str().unwrap()
        ]),
        0
    );
    assert!(y.join("synthetic/Model.csv").is_file());

    let l = out.path().join("l");
    let raw = data.join("receitas_candidatos_2014_RS.txt");
    for dons in [d, raw.to_str().unwrap()] {
        assert_eq!(
            df(&[
                "logit",
                "--donations",
                dons,
                "--outcomes",
                outcomes.to_str().unwrap(),
                "--office",
                "federal",
                "-o",
                l.to_str().unwrap()
            ]),
            0
        );
        let logit = fs::read_to_string(l.join("logit.csv")).unwrap();
        let rows: Vec<&str> = logit.lines().skip(1).collect();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].starts_with("RS,Deputado Federal,"));
    }
}

#[test]
fn config_file_supplies_flags() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "data = {:?}\noutput = \"o\"\nby = [\"category\"]\nformat = [\"latex\"]\nseed = 9\n",
            fixture()
        ),
    )
    .unwrap();
    assert_eq!(df(&["--config", cfg.to_str().unwrap(), "stats"]), 0);
    assert!(out.path().join("o/descriptive.tex").is_file());
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["receitas_candidatos_2014_BR.txt", "md5sums.txt"] {
        fs::copy(fixture().join(name), dir.path().join(name)).unwrap();
    }
    let d = dir.path().to_str().unwrap();
    // two files of the manifest are absent
    assert_eq!(df(&["verify", "--data", d]), 1);
    assert_eq!(df(&["verify", "--data", fixture().to_str().unwrap()]), 0);

    let copy = tempfile::tempdir().unwrap();
    for e in fs::read_dir(fixture()).unwrap() {
        let p = e.unwrap().path();
        fs::copy(&p, copy.path().join(p.file_name().unwrap())).unwrap();
    }
    let target = copy.path().join("receitas_comites_2014_BR.txt");
    let mut bytes = fs::read(&target).unwrap();
    bytes.push(b'\n');
    fs::write(&target, bytes).unwrap();
    let out = tempfile::tempdir().unwrap();
    assert_eq!(
        df(&[
            "pipeline",
            "--data",
            copy.path().to_str().unwrap(),
            "-o",
            out.path().to_str().unwrap()
        ]),
        1
    );
}

#[test]
fn report_rerenders_saved_results() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(pipeline(out.path(), "7", "2"), 0);
    let rep = out.path().join("rep");
    let results = out.path().join("results.json");
    assert_eq!(
        df(&[
            "report",
            "--results",
            results.to_str().unwrap(),
            "--format",
            "csv",
            "-o",
            rep.to_str().unwrap()
        ]),
        0
    );
    for name in [
        "benford.csv",
        "descriptive.csv",
        "fit_params.csv",
        "logit.csv",
        "curves.csv",
    ] {
        assert_eq!(
            fs::read(rep.join(name)).unwrap(),
            fs::read(out.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(df(&["benford", "--min-n", "lots"]), 2);
    assert_eq!(df(&["pipeline", "--data", "/nonexistent/dir"]), 2);
    assert_eq!(df(&["report", "--results", "/nonexistent.json"]), 1);
}
