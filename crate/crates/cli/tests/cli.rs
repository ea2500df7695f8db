use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hzsvse"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("spawn hzsvse")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

fn scenario() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/four_sources_m1.json");
    p.to_str().unwrap().to_owned()
}

fn counts(v: &Value) -> (u64, u64, u64) {
    (v["ng"].as_u64().unwrap(), v["nb"].as_u64().unwrap(), v["nc"].as_u64().unwrap())
}

#[test]
fn m1_inverse_reports_exact_counts() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        &["approx", "--method", "m1", "--function", "inv", "--domain", "1,10", "--breakpoints", "5"],
        dir.path(),
    );
    let r = json(dir.path().join("report.json"));
    assert_eq!(counts(&r["exact_complexity"]), (10, 4, 7));
    assert_eq!(r["certified"], Value::Bool(true));
    assert!(stdout.contains("(10, 4, 7)"));
    for f in ["ioset.json", "sos.json", "spec.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn m1_sources_counts_triangles() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["approx", "--method", "m1", "--function", "sources", "--grid", "10x10"], dir.path());
    assert_eq!(json(dir.path().join("report.json"))["cells"], 162);
}

#[test]
fn m3_is_deterministic() {
    let args = [
        "approx",
        "--method",
        "m3",
        "--function",
        "inv",
        "--layers",
        "4",
        "--seed",
        "7",
        "--iterations",
        "200",
        "--allow-uncertified",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&args, a.path());
    ok(&args, b.path());
    for f in ["ioset.json", "network.json", "report.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn uncertified_approximation_needs_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["approx", "--method", "m3", "--function", "inv", "--layers", "3", "--iterations", "20"],
        dir.path(),
    );
    let report = dir.path().join("report.json");
    if o.status.success() {
        // Only allowed when the bound came out certified.
        assert_eq!(json(report)["certified"], Value::Bool(true));
    } else {
        assert_eq!(o.status.code(), Some(4));
        assert!(!report.exists());
    }
}

#[test]
fn bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(args, dir.path()).status.code();
    assert_eq!(code(&["approx", "--method", "m9", "--function", "inv"]), Some(4));
    assert_eq!(code(&["approx", "--function", "cosh"]), Some(4));
    assert_eq!(code(&["approx", "--function", "inv", "--domain", "1,2,3"]), Some(4));
    assert_eq!(code(&["approx", "--function", "sources", "--grid", "10"]), Some(4));
    assert_eq!(code(&["bounds", "/nonexistent/set.json"]), Some(4));
    assert_eq!(code(&["frobnicate"]), Some(4));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

fn write_set(dir: &Path, name: &str, value: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string(value).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn unit_square() -> Value {
    serde_json::json!({
        "n": 2, "ng": 2, "nb": 0, "nc": 0,
        "Gc": [[1.0, 0.0], [0.0, 1.0]],
        "Gb": [[], []],
        "c": [0.0, 0.0],
        "Ac": [],
        "Ab": [],
        "b": []
    })
}

#[test]
fn square_has_one_four_sided_leaf() {
    let dir = tempfile::tempdir().unwrap();
    let sq = write_set(dir.path(), "square.json", &unit_square());
    let o = run(&["leaves", &sq, "--angular-res", "90", "--svg"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let leaves = json(dir.path().join("leaves.json"));
    let list = leaves["leaves"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["vertices"].as_array().unwrap().len(), 4);
    let svg = fs::read_to_string(dir.path().join("leaves.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polygon"));
}

#[test]
fn bounds_and_contains_on_a_square() {
    let dir = tempfile::tempdir().unwrap();
    let sq = write_set(dir.path(), "square.json", &unit_square());
    ok(&["bounds", &sq, &sq], dir.path());
    let csv = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("k,lo1,hi1,lo2,hi2"));
    let vals: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(vals, vec![0.0, -1.0, 1.0, -1.0, 1.0]);

    assert_eq!(ok(&["contains", &sq, "--point", "0.5,-1"], dir.path()).trim(), "true");
    let v = json(dir.path().join("contains.json"));
    assert_eq!(v["contains"], Value::Bool(true));
    assert!(v["certificate"]["xi_c"].is_array());
    assert_eq!(ok(&["contains", &sq, "--point", "1.5,0"], dir.path()).trim(), "false");
    let o = run(&["contains", &sq, "--point", "1"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn estimate_four_sources() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["estimate", &scenario()], dir.path());
    assert!(stdout.contains("wall"));
    let summary = json(dir.path().join("summary.json"));
    assert_eq!(summary["all_contain_truth"], Value::Bool(true));
    assert_eq!(summary["steps"].as_array().unwrap().len(), 5);
    let csv = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    for k in 0..5 {
        for f in ["step", "prior", "posterior"] {
            assert!(dir.path().join(format!("{f}_{k}.json")).exists(), "{f}_{k}");
        }
    }
    let timing = json(dir.path().join("timing.json"));
    assert_eq!(timing["update_seconds"].as_array().unwrap().len(), 5);

    let post = dir.path().join("posterior_0.json");
    let q = tempfile::tempdir().unwrap();
    assert_eq!(ok(&["contains", post.to_str().unwrap(), "--point", "1,0"], q.path()).trim(), "true");
    // Leaf enumeration of a large posterior stops at the cap.
    let o = run(&["leaves", post.to_str().unwrap(), "--leaf-cap", "10"], q.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn estimate_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["estimate", &scenario(), "--horizon", "1"];
    ok(&args, a.path());
    ok(&args, b.path());
    let files = ["summary.json", "bounds.csv", "step_0.json", "step_1.json", "posterior_1.json", "prior_1.json"];
    for f in files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let summary = json(a.path().join("summary.json"));
    assert_eq!(summary["steps"].as_array().unwrap().len(), 2);
}

#[test]
fn horizon_zero_and_inconsistent_measurement() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["estimate", &scenario(), "--horizon", "0"], dir.path());
    assert!(dir.path().join("posterior_0.json").exists());
    assert!(!dir.path().join("posterior_1.json").exists());

    // A measurement far above the range of the map contradicts every state.
    let mut sc: Value = serde_json::from_str(&fs::read_to_string(scenario()).unwrap()).unwrap();
    sc["noise"] = serde_json::json!([[100.0]]);
    sc["horizon"] = serde_json::json!(0);
    let path = write_set(dir.path(), "bad.json", &sc);
    let o = run(&["estimate", &path], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
