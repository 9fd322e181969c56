use std::path::Path;
use std::process::{Command, Output};

fn okra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_okra")).args(args).output().expect("spawn okra")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn trace() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../evsim/data/synthetic_sessions.csv").display().to_string()
}

#[test]
fn ratio_prints_alpha() {
    let o = okra(&["ratio", "--family", "got", "--theta", "36"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["alpha"].as_f64().unwrap() - (1.0 + 36f64.ln())).abs() < 1e-10);

    let o = okra(&["ratio", "--family", "got-variant2", "--theta", "36", "--c", "2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["w_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn ratio_curve_is_csv() {
    let o = okra(&["ratio-curve", "--points", "5"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("theta,got,fomkp_aggregate,fomkp_separable"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn verify_exit_codes() {
    assert_eq!(code(&okra(&["verify", "--family", "got", "--thetas", "e,10,36"])), 0);
    assert_eq!(code(&okra(&["verify", "--family", "fomkp-separable", "--thetas", "10"])), 0);
    // understated ratio must be caught
    assert_eq!(code(&okra(&["verify", "--family", "got", "--alpha-scale", "0.95"])), 1);
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(code(&okra(&["ratio", "--theta", "abc"])), 2);
    assert_eq!(code(&okra(&["ratio", "--theta", "0.5"])), 2);
    assert_eq!(code(&okra(&["ratio", "--family", "nope", "--theta", "3"])), 2);
    assert_eq!(code(&okra(&["run", "--instance", "/definitely/not/here.json"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"setup\": 1}").unwrap();
    assert_eq!(code(&okra(&["offline", "--instance", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&okra(&["adversary", "--kind", "cnd", "--capacities", "1,1"])), 2);
}

#[test]
fn adversary_run_and_empirical_cr() {
    let dir = tempfile::tempdir().unwrap();
    let inst_dir = dir.path().join("cnd");
    let o = okra(&["adversary", "--kind", "cnd", "--p-points", "5", "--out", inst_dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(&inst_dir).unwrap().count(), 5);

    let one = inst_dir.join("instance_0004.json");
    let o = okra(&["run", "--instance", one.to_str().unwrap(), "--family", "got"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ratio = v["ratio"]["value"].as_f64().unwrap();
    assert!(ratio >= 1.0 && ratio <= v["alpha"].as_f64().unwrap() + 1e-9);

    let o = okra(&["empirical-cr", "--policy", "ota:got", "--instances", inst_dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("instance,offline_value,online_value,offline_gap,ratio,epsilon"));
    assert_eq!(text.lines().count(), 6);

    let r = dir.path().join("random.json");
    assert_eq!(code(&okra(&["--seed", "4", "adversary", "--kind", "random", "--capacities", "1,2", "--items", "4", "--out", r.to_str().unwrap()])), 0);
    let o = okra(&["offline", "--instance", r.to_str().unwrap(), "--brute-force", "10"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["brute_force"]["value"].as_f64().unwrap() <= v["dual_value"].as_f64().unwrap() * (1.0 + 1e-9));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = okra(&[
            "--seed", "3", "--out", out.to_str().unwrap(), "simulate", "--sessions", &trace(), "--trials", "2", "--adaptive",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["summary.json", "cdf.csv", "trials.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let o = okra(&["simulate", "--sessions", &trace(), "--policy-set", "ota,greedy"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn gen_sessions_reproduces_bundled_trace() {
    let o = okra(&["--seed", "7", "gen-sessions", "--count", "2000", "--days", "90"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), std::fs::read_to_string(trace()).unwrap());
}
