use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phasesaddle::grid::{read_field, write_field};
use phasesaddle::{Field, Grid};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasesaddle"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary_value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim_start().strip_prefix('=')).map(str::trim))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

const GL_SMALL: &str = r#"
[model]
name = "gl"
n = [32]
kappa = 0.04
mass = 0.6

[method]
name = "imf-projected"
inner_iters = 20
max_cycles = 500

[init]
expr = "0.6 + 0.15*cos(2*pi*x) - 0.05*cos(4*pi*x)"
"#;

#[test]
fn run_writes_artifacts_and_verify_accepts_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gl.toml");
    fs::write(&cfg, GL_SMALL).unwrap();
    let out = dir.path().join("out");
    let r = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["phi_star.field", "v_star.field", "trace.csv", "summary.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "status"), "converged");
    assert_eq!(summary_value(&summary, "is_index1"), "true");
    assert!(summary_value(&summary, "lambda1").parse::<f64>().unwrap() < 0.0);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("cycle,inner_iters,residual_l2,energy,min_eig,wall_s\n"));

    let phi = out.join("phi_star.field");
    assert_eq!(read_field(&phi).unwrap().grid().len(), 32);
    let v = run(&["verify", "--field", s(&phi), "--config", s(&cfg)]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn verify_rejects_a_uniform_state_and_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gl.toml");
    fs::write(&cfg, GL_SMALL).unwrap();
    let uniform = dir.path().join("uniform.field");
    write_field(&Field::constant(Grid::new_1d(32, 1.0).unwrap(), 0.6), &uniform).unwrap();
    assert_eq!(run(&["verify", "--field", s(&uniform), "--config", s(&cfg)]).status.code(), Some(1));

    let text = fs::read_to_string(&uniform).unwrap();
    let truncated = dir.path().join("truncated.field");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(run(&["verify", "--field", s(&truncated), "--config", s(&cfg)]).status.code(), Some(2));

    let other = dir.path().join("other.field");
    write_field(&Field::constant(Grid::new_1d(16, 1.0).unwrap(), 0.6), &other).unwrap();
    assert_eq!(run(&["verify", "--field", s(&other), "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("odd.toml", GL_SMALL.replace("n = [32]", "n = [31]")),
        ("typo.toml", GL_SMALL.replace("kappa", "kapa")),
        ("mass.toml", GL_SMALL.replace("mass = 0.6", "mass = 0.5")),
        ("alpha.toml", GL_SMALL.replace("inner_iters = 20", "inner_iters = 20\nalpha = 0.5")),
    ];
    for (name, text) in cases {
        let cfg = dir.path().join(name);
        fs::write(&cfg, text).unwrap();
        let r = run(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
        assert_eq!(r.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!r.stderr.is_empty());
    }
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(&["run", "--config", s(&missing)]).status.code(), Some(2));
}

#[test]
fn unconverged_run_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(&cfg, GL_SMALL.replace("max_cycles = 500", "max_cycles = 2")).unwrap();
    let out = dir.path().join("out");
    let r = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "status"), "max-cycles");
}

#[test]
fn minmode_reports_both_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("gl1d_minmode_zero.toml");
    let q2 = (2.0 * std::f64::consts::PI).powi(2);
    let k2 = 0.04f64 * 0.04;
    for (metric, expected) in [("projected-l2", k2 * q2 - 1.0), ("h-1", 9.0 * q2 * (9.0 * k2 * q2 - 1.0))] {
        let out = dir.path().join(metric);
        let r = run(&["minmode", "--config", s(&cfg), "--metric", metric, "--out", s(&out)]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
        let text = fs::read_to_string(out.join("minmode.txt")).unwrap();
        let got: f64 = summary_value(&text, "eigenvalue").parse().unwrap();
        assert!((got - expected).abs() < 1e-6 * expected.abs().max(1.0), "{metric}: {got} vs {expected}");
        assert!(out.join("eigenvector.field").is_file());
    }
}

#[test]
fn bench_writes_tables_and_skips_zero_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    let text = format!("{GL_SMALL}\n[bench]\nbudgets = [0, 40]\ninner_iters = 20\nrepeats = 2\n");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let r = run(&["bench", "--config", s(&cfg), "--out", s(&out), "--jobs", "2"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let bench = fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(bench.lines().next(), Some("init,method,iterN,wall_s"));
    assert_eq!(bench.lines().count(), 5);
    let speed = fs::read_to_string(out.join("speedup.csv")).unwrap();
    let rows: Vec<&str> = speed.lines().collect();
    assert_eq!(rows[0], "init,iterN,wall_projected_s,wall_h1_s,speedup");
    assert_eq!(rows.len(), 2);
    assert!(rows[1].contains(",40,"));
}
