use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_afftop"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str], config: &PathBuf) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn column(csv_text: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let k = r.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    r.records().map(|rec| rec.unwrap()[k].parse().unwrap()).collect()
}

#[test]
fn every_bundled_scenario_verifies() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = run(&["verify"], &path);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(out.status.success(), "{}: {stdout}{}", path.display(), String::from_utf8_lossy(&out.stderr));
        assert!(!stdout.contains("FAIL"));
        count += 1;
    }
    assert!(count >= 5);
}

#[test]
fn simulate_is_deterministic() {
    let a = run(&["simulate"], &scenario("metrical_affine_minimal.json"));
    let b = run(&["simulate"], &scenario("metrical_affine_minimal.json"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let h = column(&String::from_utf8(a.stdout).unwrap(), "H");
    assert_eq!(h.len(), 101);
}

#[test]
fn random_initial_state_follows_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("random.json");
    std::fs::write(
        &cfg,
        r#"{"schema": "afftop-scenario/1", "n": 3, "model": {"variant": "AffineAffine"}, "params": {"A": 1.2, "B": 0.1},
            "initial": {"random": {}}, "integrator": {"t_end": 1.0, "sample_count": 3}}"#,
    )
    .unwrap();
    let first = |seed: &str| run(&["simulate", "--fields", "phi", "--seed", seed], &cfg).stdout;
    assert_eq!(first("7"), first("7"));
    assert_ne!(first("7"), first("8"));
}

#[test]
fn reduce_then_simulate_recovers_the_energy() {
    let dir = tempfile::tempdir().unwrap();
    let reduced = dir.path().join("reduced.json");
    let src = scenario("affine_metrical_equilibria.json");
    let out = bin().args(["reduce", "--config"]).arg(&src).arg("--scenario-out").arg(&reduced).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let original = column(&String::from_utf8(run(&["simulate", "--fields", "H"], &src).stdout).unwrap(), "H");
    let again = column(&String::from_utf8(run(&["simulate", "--fields", "H"], &reduced).stdout).unwrap(), "H");
    assert_eq!(original.len(), again.len());
    for (a, b) in original.iter().zip(&again) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn jsonl_rows_parse_and_keep_column_order() {
    let out = run(&["simulate", "--format", "jsonl"], &scenario("sutherland.json"));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 51);
    assert!(lines[0].starts_with("{\"t\":"));
    let last: serde_json::Value = serde_json::from_str(lines[50]).unwrap();
    assert!((last["t"].as_f64().unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn parallel_runs_write_one_file_per_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--jobs", "3", "--output"])
        .arg(dir.path())
        .arg("--config")
        .args(["sutherland.json", "metrical_affine_minimal.json", "affine_metrical_equilibria.json"].map(scenario))
        .output()
        .unwrap();
    assert!(out.status.success());
    for stem in ["sutherland", "metrical_affine_minimal", "affine_metrical_equilibria"] {
        let serial = run(&["simulate"], &scenario(&format!("{stem}.json"))).stdout;
        assert_eq!(std::fs::read(dir.path().join(format!("{stem}.csv"))).unwrap(), serial);
    }
}

#[test]
fn classify_reports_bounded_generator() {
    let out = run(&["classify"], &scenario("bounded_incompressible.json"));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("Bounded,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("100/100 preserved"));
}

#[test]
fn equilibria_table_marks_normal_generators() {
    let out = run(&["equilibria"], &scenario("affine_metrical_equilibria.json"));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    let flags: Vec<&str> = rows.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(flags, ["true", "false", "false", "true"]);
}

fn write_tmp(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("s.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn exit_codes_separate_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let base = r#"{"schema": "afftop-scenario/1", "n": 2, "model": {"variant": "AffineMetrical"}, "params": {"I": 2.0, "A": 0.5},
        "initial": {"full": {"phi": [[1.2, 0.1], [0.0, 0.9]], "phi_dot": [[0.1, 0.0], [0.2, -0.1]]}}"#;

    let unknown = write_tmp(&dir, &format!("{base}, \"extra\": 1}}"));
    let out = run(&["verify"], &unknown);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema error"));

    let singular = write_tmp(&dir, &base.replace("\"A\": 0.5", "\"A\": 2.0").replace("}}", "}}}"));
    let out = run(&["verify"], &singular);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SingularInertia"));

    let impossible = write_tmp(&dir, &format!("{base}, \"checks\": [{{\"kind\": \"bounded_spread\", \"factor\": 0.5}}]}}"));
    let out = run(&["verify"], &impossible);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL bounded_spread"));

    let starved = write_tmp(&dir, &format!("{base}, \"integrator\": {{\"t_end\": 50.0, \"max_steps\": 20}}}}"));
    let out = run(&["simulate"], &starved);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerical failure"));
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = bin().args(["simulate", "--config", "/nonexistent/scenario.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
