use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bvfim::io::KEYS;

fn bvfim(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvfim"))
        .args(args)
        .env("BVFIM_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn toy_spec(a: f64, method: &str, init: f64, k: usize) -> String {
    let solver = match method {
        "bvfim" => String::new(),
        "rhg" => "T = 100\n".into(),
        "cg" => "T = 100\nJ = 20\n".into(),
        _ => unreachable!(),
    };
    format!(
        "schema_version = 1\n[problem]\nid = toy(a={a})\n[solver]\nmethod = {method}\n{solver}[run]\nK = {k}\nx0 = {init}\ny0 = {init}\nwall_clock = false\n"
    )
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_outputs_and_converges_on_toy() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "toy.ini", &toy_spec(0.0, "bvfim", 0.0, 500));
    let out = bvfim(&tmp.path().join("out"), &["run", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = Path::new(stdout(&out).trim()).to_path_buf();
    for f in ["trace.csv", "summary.json", "spec.ini"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["dist_x"].as_f64().unwrap() <= 0.05);
    assert_eq!(summary["second_order_calls"], 0);
    assert_eq!(dir.file_name().unwrap().to_str().unwrap(), summary["spec_hash"].as_str().unwrap());
}

#[test]
fn identical_specs_give_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "toy.ini", &toy_spec(2.0, "bvfim", 0.0, 20));
    let a = bvfim(&tmp.path().join("a"), &["run", spec.to_str().unwrap()]);
    let b = bvfim(&tmp.path().join("b"), &["run", spec.to_str().unwrap()]);
    let (da, db) = (stdout(&a), stdout(&b));
    let read = |d: &str| fs::read(Path::new(d.trim()).join("trace.csv")).unwrap();
    assert_eq!(read(&da), read(&db));
}

#[test]
fn zero_stages_give_header_only_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "toy.ini", &toy_spec(0.0, "bvfim", 0.0, 0));
    let out = bvfim(tmp.path(), &["run", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let trace = fs::read_to_string(Path::new(stdout(&out).trim()).join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
}

#[test]
fn unknown_problem_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "bad.ini", "schema_version = 1\n[problem]\nid = rosenbrock(n=2)\n");
    let out = bvfim(tmp.path(), &["run", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(diag["kind"], "config");
    assert!(diag["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn missing_spec_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bvfim(tmp.path(), &["run", tmp.path().join("nope.ini").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn huge_inner_step_is_a_divergence() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "div.ini",
        "schema_version = 1\n[problem]\nid = quadratic(n=4,m=2,seed=1)\n[solver]\ns1 = 1e6\n[run]\nK = 3\n",
    );
    let out = bvfim(&tmp.path().join("out"), &["run", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // partial outputs are kept
    let dir = Path::new(stdout(&out).trim()).to_path_buf();
    let summary = fs::read_to_string(dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"failed\""));
}

fn figure_grid(dir: &Path) {
    for a in [0.0, 2.0] {
        for method in ["rhg", "cg", "bvfim"] {
            for init in [0.0, 3.0] {
                let name = format!("a{a}_{method}_{init}.ini");
                write(dir, &name, &toy_spec(a, method, init, 30));
            }
        }
    }
}

#[test]
fn compare_merges_the_twelve_run_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let specs = tmp.path().join("specs");
    fs::create_dir(&specs).unwrap();
    figure_grid(&specs);
    let out = bvfim(&tmp.path().join("out"), &["compare", specs.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let merged = fs::read_to_string(stdout(&out).trim()).unwrap();
    let mut lines = merged.lines();
    assert_eq!(lines.next(), Some("spec,solver,init,step,metric,value"));
    let mut names: Vec<&str> = Vec::new();
    let mut metrics = std::collections::BTreeSet::new();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6, "{line}");
        if names.last() != Some(&cols[0]) {
            names.push(cols[0]);
        }
        metrics.insert(cols[4].to_string());
    }
    assert_eq!(names.len(), 12);
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for m in ["F", "f", "dist_x", "dist_y"] {
        assert!(metrics.contains(m), "{m}");
    }

    let serial = bvfim(&tmp.path().join("serial"), &["compare", specs.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(stdout(&serial).trim()).unwrap(), merged);
}

#[test]
fn compare_single_spec_is_degenerate() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "only.ini", &toy_spec(0.0, "bvfim", 3.0, 5));
    let out = bvfim(&tmp.path().join("out"), &["compare", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let merged = fs::read_to_string(stdout(&out).trim()).unwrap();
    assert_eq!(merged.lines().count(), 1 + 5 * 4);
    assert!(merged.lines().skip(1).all(|l| l.starts_with("only,bvfim,x=3 y=3,")));
}

#[test]
fn compare_rejects_mixed_problems() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "a.ini", &toy_spec(0.0, "bvfim", 0.0, 5));
    write(tmp.path(), "b.ini", "schema_version = 1\n[problem]\nid = quadratic(n=3,m=2,seed=0)\n");
    let out = bvfim(&tmp.path().join("out"), &["compare", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mixed problem families"));
}

#[test]
fn compare_failure_keeps_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let specs = tmp.path().join("specs");
    fs::create_dir(&specs).unwrap();
    write(&specs, "a.ini", "schema_version = 1\n[problem]\nid = quadratic(n=4,m=2,seed=1)\n[run]\nK = 3\n");
    write(&specs, "b.ini", "schema_version = 1\n[problem]\nid = quadratic(n=4,m=2,seed=1)\n[solver]\ns1 = 1e6\n[run]\nK = 3\n");
    let root = tmp.path().join("out");
    let out = bvfim(&root, &["compare", specs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let dirs: Vec<_> = fs::read_dir(&root).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    let compare = dirs.iter().find(|d| d.starts_with("compare-")).expect("merged output kept");
    let merged = fs::read_to_string(root.join(compare).join("compare.csv")).unwrap();
    assert!(merged.lines().skip(1).all(|l| l.starts_with("a,")));
    assert!(merged.lines().count() > 1);
    assert_eq!(dirs.len(), 3);
}

#[test]
fn verify_quick_passes_with_json_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bvfim(tmp.path(), &["verify", "--level", "quick"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["level"], "quick");
    assert_eq!(report["checks"].as_array().unwrap().len(), 6);
}

#[test]
fn verify_rejects_unknown_level() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bvfim(tmp.path(), &["verify", "--level", "medium"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_emits_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bvfim(
        tmp.path(),
        &["bench", "--dims", "20,40", "--steps", "30,60", "--reps", "1", "--warmup", "0"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("method,n,T,J,wall_us,"));
    // 2 dims x (2 bvfim budgets + 1 cg cell)
    assert_eq!(lines.count(), 6);
    assert!(String::from_utf8_lossy(&out.stderr).contains("second-order calls=0"));
}

#[test]
fn help_documents_every_key() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["run", "--help"][..]] {
        let text = stdout(&bvfim(tmp.path(), args));
        for k in KEYS {
            assert!(text.contains(&format!("  {} ", k.key)), "{} missing from {args:?}", k.key);
        }
    }
}

#[test]
fn help_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let text = stdout(&bvfim(tmp.path(), &["--help"]));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/help.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &text).unwrap();
    }
    assert_eq!(text, fs::read_to_string(golden).unwrap());
}
