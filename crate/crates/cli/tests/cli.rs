use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn flagint(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flagint"));
    cmd.args(args).env_remove("FLAGINT_SEED");
    if let Some(s) = env_seed {
        cmd.env("FLAGINT_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn check_reports_h1_region() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = flagint(&["check", "--n", "1", "--m", "1", "--rho", "2", "--alpha", "9/10", "--beta", "3/10", "--q", "2", "--output", out], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("formula-two: SATISFIED"));
}

#[test]
fn beta_outside_range_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = flagint(&["check", "--n", "1", "--m", "1", "--rho", "2", "--alpha", "1/2", "--beta", "1", "--q", "2", "--output", out], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"experiment": "check", "n": 1, "m": 1, "alpha": "1/2", "beta": "1/2", "rho": "2", "q": "2", "gamma": 3}"#).unwrap();
    let o = flagint(&["--config", cfg.to_str().unwrap(), "run"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}

#[test]
fn counterexample_grows_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |out: &Path| {
        vec![
            "counterexample".to_string(),
            "--n=1".into(),
            "--m=1".into(),
            "--rho=2".into(),
            "--q=2".into(),
            "--radii=10,100,1000".into(),
            format!("--output={}", out.display()),
        ]
    };
    for out in [&a, &b] {
        let v = args(out);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        let o = flagint(&refs, None);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let f = csv_column(&a.join("counterexample-0.csv"), "value");
    assert_eq!(f.len(), 3);
    assert!(f.windows(2).all(|w| w[1] > w[0]), "{f:?}");
    assert_eq!(fs::read(a.join("counterexample-0.csv")).unwrap(), fs::read(b.join("counterexample-0.csv")).unwrap());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("counterexample-0.json")).unwrap()).unwrap();
    assert_eq!(meta["metadata"]["config"]["run"]["radii"], serde_json::json!(["10", "100", "1000"]));
}

#[test]
fn seed_precedence_file_env_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            r#"{{"experiment": "apply", "n": 1, "m": 1, "alpha": "1/2", "beta": "1/2", "rho": "2", "method": "monte-carlo", "samples": 512, "seed": 5, "x": [0.3], "y": [0.2], "output": {:?}}}"#,
            out.display()
        ),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let o = flagint(&["--config", c, "run"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(out.join("apply-5.csv").exists());
    let o = flagint(&["--config", c, "run"], Some("9"));
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("apply-9.csv").exists());
    let o = flagint(&["--config", c, "apply", "--seed", "11"], Some("9"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("apply-11.csv").exists());
    // different seeds, different Monte Carlo estimates; same seed, same bytes
    let five = fs::read(out.join("apply-5.csv")).unwrap();
    let nine = fs::read(out.join("apply-9.csv")).unwrap();
    assert_ne!(five, nine);
    flagint(&["--config", c, "run"], None);
    assert_eq!(five, fs::read(out.join("apply-5.csv")).unwrap());
}

#[test]
fn subcommand_must_match_config_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"experiment": "shells"}"#).unwrap();
    let o = flagint(&["--config", cfg.to_str().unwrap(), "check"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let o = flagint(&["--help"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("counterexample"));
}
