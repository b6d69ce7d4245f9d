use std::process::Command;

fn mhit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mhit"))
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("mhit-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn generate_then_analyze() {
    let path = scratch("path3.json");
    let status = mhit()
        .args(["generate", "lazy_path", "--param", "n=3", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let out = mhit().arg("analyze").arg("--chain").arg(&path).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // Lazy walk on a 3-path: t_rel = 2 and t_H^pi = 2 from the end set.
    assert!((v["t_rel"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["t_h_pi"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!((v["rel_geom"].as_f64().unwrap() - (2.0 * std::f64::consts::E - 1.0)).abs() < 1e-5);

    let csv = mhit().args(["analyze", "--profiles", "--chain"]).arg(&path).output().unwrap();
    assert!(csv.status.success());
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("delta,spectral"));
}

#[test]
fn simulate_is_seeded() {
    let path = scratch("two_state.json");
    assert!(mhit()
        .args(["generate", "two_state", "--param", "p=0.3", "--param", "q=0.2", "--out"])
        .arg(&path)
        .status()
        .unwrap()
        .success());
    let run = |threads: &str| {
        mhit()
            .args(["simulate", "--trials", "5000", "--seed", "9", "--threads", threads, "--chain"])
            .arg(&path)
            .output()
            .unwrap()
            .stdout
    };
    let a = run("1");
    assert_eq!(a, run("2"));
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let est = &v["estimate"];
    let err = (est["mean"].as_f64().unwrap() - 1.0 / 0.3).abs();
    assert!(err <= 4.0 * est["stderr"].as_f64().unwrap());
}

#[test]
fn verify_writes_report_and_sets_exit_code() {
    let path = scratch("bd.json");
    let out = mhit().args(["verify", "birth_death", "--out"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let report = markov_hitting::harness::parse_report_json(&text).unwrap();
    assert!(report.all_pass());
    assert!(report.summary.total > 0);
}

#[test]
fn bad_arguments_fail() {
    assert!(!mhit().args(["verify", "nonexistent"]).status().unwrap().success());
    assert!(!mhit().args(["analyze"]).status().unwrap().success());
}
