// The `modcs` binary: exit codes, files and reports.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modcs")).args(args).output().unwrap()
}

fn cfg(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn generate_ladder_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seq.txt");
    let out_s = out.display().to_string();
    let o = bin(&["generate", &cfg("ladder.cfg"), "--out", &out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let xs = modcs::signal::seqfile::read_sequence(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(xs.len(), 5);
    assert!(xs.iter().all(|x| x.iter().filter(|v| **v != 0.0).count() == 8));

    // Same seed, same bytes.
    let again = dir.path().join("seq2.txt");
    bin(&["generate", &cfg("ladder.cfg"), "--out", &again.display().to_string()]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
    let other = dir.path().join("seq3.txt");
    bin(&["generate", &cfg("ladder.cfg"), "--seed", "99", "--out", &other.display().to_string()]);
    assert_ne!(std::fs::read(&out).unwrap(), std::fs::read(&other).unwrap());
}

#[test]
fn generate_errors() {
    let o = bin(&["generate", &cfg("ladder.cfg"), "--frames", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least one frame required"));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "frames = 3\n[model]\nkind = \"assumptions2\"\nS = 5\nS_a = 2\nd_min = 3\na_min = 1.0\nr_min = 1.0\nb = 3\nm = 50\n");
    assert_eq!(bin(&["generate", &bad]).status.code(), Some(2));
    assert_eq!(bin(&["generate", "/nonexistent.cfg"]).status.code(), Some(2));
    assert_eq!(bin(&["bogus"]).status.code(), Some(2));
    assert_eq!(bin(&[]).status.code(), Some(2));
}

#[test]
fn certify_verdicts() {
    let o = bin(&["certify", &cfg("certify_orthonormal.cfg"), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "PASS");

    let dir = tempfile::tempdir().unwrap();
    let dup = write(
        dir.path(),
        "dup.cfg",
        "theorem = \"3.2\"\n[[matrix]]\nkind = \"orthonormal\"\nn = 8\nm = 8\nduplicate = [0, 1]\n[params]\nS = 2\nS_a = 1\nepsilon = 0.01\nalpha = 0.075\n",
    );
    let o = bin(&["certify", &dup, "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "FAIL");
    let cond = v["conditions"].as_array().unwrap().iter().find(|c| c["id"] == "2").unwrap();
    assert!((cond["lhs"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    // Budget refusal is a runtime error with an explanation.
    let o = bin(&["certify", &cfg("certify_orthonormal.cfg"), "--budget", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));

    assert_eq!(bin(&["certify", &cfg("certify_orthonormal.cfg"), "--theorem", "9.9"]).status.code(), Some(2));
}

#[test]
fn certify_report_is_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(
        dir.path(),
        "g.cfg",
        "theorem = \"4.3\"\n[[matrix]]\nkind = \"gaussian\"\nn = 14\nm = 16\nseed = 5\n[params]\nS = 3\nS_a = 1\nepsilon = 0.001\nr = 1.0\nd = 3\nd0 = 2\n",
    );
    let o = bin(&["certify", &c, "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let mut all = true;
    for cond in v["conditions"].as_array().unwrap() {
        let (Some(l), Some(r)) = (cond["lhs"].as_f64(), cond["rhs"].as_f64()) else { continue };
        let holds = match cond["relation"].as_str().unwrap() {
            "<=" => l <= r,
            "<" => l < r,
            ">=" => l >= r,
            ">" => l > r,
            _ => (l - r).abs() <= 1e-9 * r.abs().max(1.0),
        };
        assert_eq!(cond["verdict"] == "PASS", holds, "{cond}");
        all &= holds;
    }
    assert_eq!(v["verdict"] == "PASS", all);
    assert_eq!(o.status.code(), Some(if all { 0 } else { 1 }));
}

#[test]
fn analyze_reports() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.txt").display().to_string();
    assert_eq!(bin(&["generate", &cfg("fig5.cfg"), "--frames", "80", "--out", &seq]).status.code(), Some(0));
    let o = bin(&["analyze", &seq, "--model", &cfg("fig5.cfg"), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["clauses"].as_array().unwrap().iter().all(|c| c["pass"] == true));

    // 2 S_a + 1 = 5 additions in one frame.
    let jump = write(dir.path(), "jump.txt", "m 200\nframes 2\n0 0 1\n1 0 1\n1 1 1\n1 2 1\n1 3 1\n1 4 1\n1 5 1\n");
    let o = bin(&["analyze", &jump, "--model", &cfg("fig5.cfg"), "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c = v["clauses"].as_array().unwrap().iter().find(|c| c["name"].as_str().unwrap().contains("S_a")).unwrap();
    assert_eq!(c["pass"], false);

    let single = write(dir.path(), "one.txt", "m 10\nframes 1\n0 3 2.5\n");
    let o = bin(&["analyze", &single, "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["max_support"], 1);
    assert!(v["removal_delay"].is_null() && v["initial_range"].is_null());

    let broken = write(dir.path(), "bad.txt", "m 10\nframes 1\n0 x 2.5\n");
    assert_eq!(bin(&["analyze", &broken]).status.code(), Some(2));
}

#[test]
fn run_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let c = std::fs::read_to_string(cfg("fig5.cfg")).unwrap().replace("frames = 200", "frames = 25");
    let c = write(dir.path(), "small.cfg", &c);
    let out = dir.path().join("out");
    let o = bin(&["run", &c, "--realizations", "1", "--out", &out.display().to_string(), "--svg", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["algorithms"].as_array().unwrap().len(), 3);
    let rows = modcs::harness::parse_csv(&std::fs::read_to_string(out.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 25 * 3);
    assert!(out.join("metrics.json").exists() && out.join("metrics.svg").exists());

    let empty = std::fs::read_to_string(&c).unwrap().replace("algorithms = [\"noisy-l1\", \"modcs\", \"modcs-add-ls-del\"]", "algorithms = []");
    let empty = write(dir.path(), "empty.cfg", &empty);
    assert_eq!(bin(&["run", &empty]).status.code(), Some(2));
    assert_eq!(bin(&["run", &c, "--realizations", "2", "--paper-scale"]).status.code(), Some(2));
}
