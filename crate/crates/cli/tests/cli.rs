use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn nlstokes(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlstokes")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SWIRL: &str = r#"{"domain":{"name":"unit-disk"},"kernel":{"profile":"quadratic"},"delta":0.2,"coupling":{"h":0.05},"case":"disk-swirl"}"#;

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn info_lists_names_and_is_stable() {
    let tmp = TempDir::new().unwrap();
    let a = nlstokes(&["info"], tmp.path());
    let b = nlstokes(&["info"], tmp.path());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    for name in ["disk-swirl", "quadratic", "cosine", "unit-disk", "direct", "krylov"] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn solve_writes_hashed_bundle_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "c.json", SWIRL);
    let run = nlstokes(&["solve", "--config", "c.json", "--out", "out"], tmp.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));

    let out = tmp.path().join("out");
    let m = manifest(&out);
    let files = m["files"].as_array().unwrap();
    assert!(files.len() >= 3);
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    let diag: Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["method"], "direct");
    assert!(diag["energy_gap"].as_f64().unwrap() <= 1e-8);
    assert!(diag["stability_ratio"].as_f64().unwrap() > 0.0);
    let first_csv = fs::read(out.join("solution.csv")).unwrap();
    let header = String::from_utf8_lossy(&first_csv).lines().next().unwrap().to_string();
    assert_eq!(header, "x1,x2,tag,u1,u2,p");

    let again = nlstokes(&["solve", "--config", "c.json", "--out", "out"], tmp.path());
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--force"));

    let forced = nlstokes(&["solve", "--config", "c.json", "--out", "out", "--force"], tmp.path());
    assert_eq!(code(&forced), 0);
    assert_eq!(fs::read(out.join("solution.csv")).unwrap(), first_csv);
    // Payload hashes match across runs; only run.json carries timings.
    let hash_of = |m: &Value, name: &str| m["files"].as_array().unwrap().iter().find(|f| f["path"] == name).unwrap()["sha256"].clone();
    let m2 = manifest(&out);
    for name in ["solution.csv", "diagnostics.json"] {
        assert_eq!(hash_of(&m, name), hash_of(&m2, name));
    }
}

#[test]
fn zero_forcing_gives_zero_solution() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "c.json", &SWIRL.replace("disk-swirl", "zero"));
    let run = nlstokes(&["solve", "--config", "c.json", "--out", "out"], tmp.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let csv = fs::read_to_string(tmp.path().join("out/solution.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        for v in &cols[3..] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{line}");
        }
    }
    let diag: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["energy_gap"].as_f64().unwrap(), 0.0);
}

#[test]
fn malformed_config_names_the_key() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "c.json", &SWIRL.replace(r#""delta":0.2"#, r#""delta":0.2,"horizon":3"#));
    let run = nlstokes(&["solve", "--config", "c.json", "--out", "out"], tmp.path());
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("horizon"), "{}", stderr(&run));

    write_config(
        tmp.path(),
        "d.json",
        &SWIRL.replace(r#""coupling":{"h":0.05}"#, r#""coupling":{"h":"small"}"#),
    );
    let run = nlstokes(&["solve", "--config", "d.json", "--out", "out"], tmp.path());
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("coupling.h"), "{}", stderr(&run));

    let run = nlstokes(&["solve", "--config", "missing.json", "--out", "out"], tmp.path());
    assert_eq!(code(&run), 2);
}

#[test]
fn study_writes_csv_json_and_plot() {
    let tmp = TempDir::new().unwrap();
    let body = SWIRL
        .replace(r#""delta":0.2"#, r#""delta":[0.4,0.3,0.2]"#)
        .replace(r#"{"h":0.05}"#, r#"{"rule":"delta/5"}"#);
    write_config(tmp.path(), "c.json", &body);
    let run = nlstokes(&["study", "--config", "c.json", "--out", "out"], tmp.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let csv = fs::read_to_string(tmp.path().join("out/study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("delta,h,"));
    assert_eq!(lines.iter().filter(|l| l.ends_with(",ok")).count(), 3);
    assert!(lines
        .iter()
        .any(|l| l.starts_with("# order,") && l[8..].starts_with(|c: char| c == '-' || c.is_ascii_digit())));
    let svg = fs::read_to_string(tmp.path().join("out/study.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3 + 2);
    let json: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/study.json")).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 3);
}

#[test]
fn study_needs_three_horizons() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "c.json", &SWIRL.replace(r#""delta":0.2"#, r#""delta":[0.4,0.2]"#));
    let run = nlstokes(&["study", "--config", "c.json", "--out", "out"], tmp.path());
    assert_eq!(code(&run), 2, "{}", stderr(&run));
}

#[test]
fn failing_solver_exits_3_and_partial_study_exits_4() {
    let tmp = TempDir::new().unwrap();
    let starved = SWIRL.replace(
        r#""case":"disk-swirl""#,
        r#""case":"disk-swirl","solver":{"method":"krylov","max_iter":1}"#,
    );
    write_config(tmp.path(), "s.json", &starved);
    let run = nlstokes(&["solve", "--config", "s.json", "--out", "s"], tmp.path());
    assert_eq!(code(&run), 3, "{}", stderr(&run));
    let diag: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("s/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["status"], "failed");
    assert!(!diag["residual_history"].as_array().unwrap().is_empty());

    let ladder = starved
        .replace(r#""delta":0.2"#, r#""delta":[0.4,0.3,0.2]"#)
        .replace(r#"{"h":0.05}"#, r#"{"rule":"delta/5"}"#);
    write_config(tmp.path(), "l.json", &ladder);
    let run = nlstokes(&["study", "--config", "l.json", "--out", "l"], tmp.path());
    assert_eq!(code(&run), 4, "{}", stderr(&run));
    assert!(tmp.path().join("l/manifest.json").exists());
}

#[test]
fn check_suites_pass_on_builtin_kernel() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "c.json", SWIRL);
    let run = nlstokes(
        &[
            "check",
            "--config",
            "c.json",
            "--out",
            "out",
            "--suite",
            "kernels",
            "--suite",
            "operators",
        ],
        tmp.path(),
    );
    assert_eq!(code(&run), 0, "{}{}", stdout(&run), stderr(&run));
    let text = stdout(&run);
    let norm = text.lines().find(|l| l.contains("normalization n=2")).unwrap();
    assert!(norm.starts_with("pass") && norm.contains("1.000000"), "{norm}");
    assert!(text.lines().any(|l| l.starts_with("pass") && l.contains("adjointness")));
    let csv = fs::read_to_string(tmp.path().join("out/checks.csv")).unwrap();
    assert!(csv.starts_with("suite,check,measured,comparison,threshold,status,note"));
}

#[test]
fn broken_kernel_table_fails_positivity_check() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("k.csv"), "r,R\n0,1\n0.5,-0.1\n1,0\n").unwrap();
    write_config(tmp.path(), "c.json", &SWIRL.replace(r#"{"profile":"quadratic"}"#, r#"{"table":"k.csv"}"#));
    let run = nlstokes(&["check", "--config", "c.json", "--out", "out", "--suite", "kernels"], tmp.path());
    assert_eq!(code(&run), 5);
    assert!(stderr(&run).contains("positivity"), "{}", stderr(&run));
}

#[test]
fn forcing_table_on_cloud_points_reproduces_case() {
    let tmp = TempDir::new().unwrap();
    // Swirl forcing sampled exactly at the lattice points of h = 0.05.
    let mut table = String::from("x1,x2,f1,f2\n");
    for i in -20..20 {
        for j in -20..20 {
            let (x, y) = ((i as f64 + 0.5) * 0.05, (j as f64 + 0.5) * 0.05);
            table.push_str(&format!("{x:e},{y:e},{:e},{:e}\n", -32.0 * y - 1.0, 32.0 * x));
        }
    }
    fs::write(tmp.path().join("f.csv"), table).unwrap();
    write_config(tmp.path(), "case.json", SWIRL);
    write_config(
        tmp.path(),
        "table.json",
        &SWIRL.replace(r#""disk-swirl""#, r#"{"forcing_table":"f.csv"}"#),
    );
    assert_eq!(code(&nlstokes(&["solve", "--config", "case.json", "--out", "a"], tmp.path())), 0);
    let run = nlstokes(&["solve", "--config", "table.json", "--out", "b"], tmp.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(
        fs::read(tmp.path().join("a/solution.csv")).unwrap(),
        fs::read(tmp.path().join("b/solution.csv")).unwrap()
    );
}

#[test]
fn thread_cap_is_validated() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "c.json", SWIRL);
    let run = Command::new(env!("CARGO_BIN_EXE_nlstokes"))
        .args(["check", "--config", "c.json", "--out", "out", "--suite", "kernels"])
        .env("NLSTOKES_THREADS", "many")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&run), 2);
    let run = Command::new(env!("CARGO_BIN_EXE_nlstokes"))
        .args(["check", "--config", "c.json", "--out", "out", "--suite", "kernels"])
        .env("NLSTOKES_THREADS", "1")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let meta: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/run.json")).unwrap()).unwrap();
    assert_eq!(meta["threads"], 1);
}
