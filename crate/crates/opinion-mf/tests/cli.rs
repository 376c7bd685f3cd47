use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opinion-mf"))
        .args(args)
        .current_dir(dir)
        .env("OPINION_MF_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn canonical_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("two.csv"), "0, 1\n").unwrap();
    dir
}

#[test]
fn gap_canonical_json() {
    let dir = canonical_dir();
    let o = run(
        &["gap", "--model", "und", "--n", "2", "--p", "0.5", "--alpha", "const:0.5", "--x0", "file:two.csv", "--norm", "inf", "--exact"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((doc["gap"].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-12);
    assert_eq!(doc["ci"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["metadata"]["generator"], opinion_mf::core::rng::GENERATOR_ID);
}

#[test]
fn gap_rejects_rho_on_undirected() {
    let dir = canonical_dir();
    let o = run(&["gap", "--n", "4", "--p", "0.5", "--norm", "rho=2", "--exact"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("open question"));
    let ok = run(&["gap", "--model", "dir", "--n", "3", "--p", "0.5", "--norm", "rho=2", "--exact"], dir.path());
    assert!(ok.status.success());
}

#[test]
fn verify_default_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lemma,params,lhs,bound,margin,status"));
    assert!(lines.clone().count() > 10);
    assert!(lines.all(|l| !l.ends_with(",fail")));
}

#[test]
fn sweep_single_rung_exact() {
    let dir = canonical_dir();
    std::fs::write(
        dir.path().join("sweep.toml"),
        r#"
model = "und"
n_ladder = [2]
regime = { c = 1.0, a = 0.0 }
alpha_rule = "const:0.5"
x0_rule = "file:two.csv"
estimator = { exact = true }
output = "rows.csv"
"#,
    )
    .unwrap();
    let sub = dir.path().join("elsewhere");
    std::fs::create_dir(&sub).unwrap();
    // Paths inside the config resolve against the config's directory.
    let o = run(&["sweep", "--config", "../sweep.toml"], &sub);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "model,n,p,norm,rho,samples,master_seed,gap,ci,wall_ms");
    let gap: f64 = lines[1].split(',').nth(7).unwrap().parse().unwrap();
    assert!((gap - 1.0 / 12.0).abs() < 1e-12);
    assert!(dir.path().join("rows.csv.meta.json").exists());

    let asserted = run(&["sweep", "--config", "../sweep.toml", "--assert"], &sub);
    assert_eq!(asserted.status.code(), Some(2));
}

#[test]
fn sweep_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "model = \"und\"\nn_ladder = [4, 8]\nregime = { c = 3.0, a = 1.0 }\nalpha_rule = \"const:0.5\"\nx0_rule = \"uniform\"\ncolour = 1\n",
    )
    .unwrap();
    let o = run(&["sweep", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["gap", "--n", "2"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    let help = run(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    for sub in ["sample", "enumerate", "stable", "meanfield", "gap", "sweep", "verify", "optdemo"] {
        assert!(stdout(&help).contains(sub), "{sub}");
    }
}

#[test]
fn sample_then_stable_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--seed", "7", "--out", "g.txt", "sample", "--n", "6", "--p", "0.5"], dir.path());
    assert!(o.status.success());
    let again = run(&["--seed", "7", "sample", "--n", "6", "--p", "0.5"], dir.path());
    assert_eq!(std::fs::read_to_string(dir.path().join("g.txt")).unwrap(), stdout(&again));
    let st = run(&["stable", "--graph", "g.txt", "--x0", "ones", "--steps", "3"], dir.path());
    assert!(st.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&st)).unwrap();
    for v in doc["stable"].as_array().unwrap() {
        assert!((v.as_f64().unwrap() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn enumerate_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--format", "csv", "enumerate", "--model", "dir", "--n", "2", "--p", "0.25"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "index,edges,probability\n0,,0.5625\n1,0-1,0.1875\n2,1-0,0.1875\n3,0-1;1-0,0.0625\n");
}

#[test]
fn meanfield_and_optdemo() {
    let dir = canonical_dir();
    let o = run(&["meanfield", "--n", "2", "--p", "0.5", "--x0", "file:two.csv"], dir.path());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let x: Vec<f64> = doc["meanfield"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((x[0] - 0.25).abs() < 1e-12 && (x[1] - 0.75).abs() < 1e-12);

    let o = run(&["optdemo", "--n", "4", "--p", "0.5", "--alpha", "const:0.6", "--exact", "--trials", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for t in doc["trials"].as_array().unwrap() {
        assert_eq!(t["coincide"], true);
        assert_eq!(t["value_certified"], true);
    }
}
