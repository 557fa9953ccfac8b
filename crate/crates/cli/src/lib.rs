//! Subcommand implementations behind the `bvfim` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bvfim::bench::{run_bench, BenchConfig, BenchReport};
use bvfim::io::{
    execute, format_f64, parse_runspec, spec_hash, write_report_json, write_trace_csv, Executed, RunReport, RunSpec,
};
use bvfim::trace::Trace;
use bvfim::verify::{run_suite, Level, VerifyReport};
use bvfim::Error;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub const OUTPUT_ROOT_ENV: &str = "BVFIM_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "bvfim-out";
pub const COMPARE_HEADER: &str = "spec,solver,init,step,metric,value";

/// Process exit code for an error: 2 config, 3 divergence, 4 verification, 5 I/O.
pub fn exit_code(err: &Error) -> u8 {
    let root = err.root();
    match root {
        Error::Verification(_) => 4,
        Error::Io { .. } => 5,
        _ if root.is_divergence() => 3,
        _ => 2,
    }
}

pub fn error_kind(err: &Error) -> &'static str {
    match exit_code(err) {
        3 => "divergence",
        4 => "verification",
        5 => "io",
        _ => "config",
    }
}

/// One-line JSON diagnostic for stderr.
pub fn diagnostic(err: &Error) -> String {
    serde_json::json!({
        "code": exit_code(err),
        "kind": error_kind(err),
        "message": err.to_string(),
    })
    .to_string()
}

/// `BVFIM_OUTPUT_ROOT`, else the spec's `output_dir`, else `bvfim-out`.
pub fn output_root(spec: Option<&RunSpec>) -> PathBuf {
    if let Some(root) = std::env::var_os(OUTPUT_ROOT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(root);
    }
    spec.and_then(|s| s.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_spec(path: &Path) -> Result<(String, RunSpec), Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec = parse_runspec(&text).map_err(|e| match e {
        Error::Spec { line, column, message } => Error::Spec {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    Ok((text, spec))
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub spec: RunSpec,
    pub run: Executed,
    pub report: RunReport,
}

impl RunOutcome {
    /// The solver error, if the run stopped early.
    pub fn error(&self) -> Option<&Error> {
        self.run.error.as_ref()
    }
}

/// Executes a parsed spec and writes `trace.csv`, `summary.json` and
/// `spec.ini` under `root/<spec hash>`. Outputs are written even when the
/// solver fails.
pub fn run_spec(text: &str, spec: RunSpec, root: &Path) -> Result<RunOutcome, Error> {
    let dir = root.join(spec_hash(&spec));
    create_dir(&dir)?;
    write_file(&dir.join("spec.ini"), text)?;
    let run = execute(&spec);
    write_trace_csv(&run.trace, &dir.join("trace.csv"))?;
    let report = RunReport::new(&spec, &run);
    write_report_json(&report, &dir.join("summary.json"))?;
    Ok(RunOutcome { dir, spec, run, report })
}

pub fn cmd_run(path: &Path) -> Result<RunOutcome, Error> {
    let (text, spec) = read_spec(path)?;
    let root = output_root(Some(&spec));
    run_spec(&text, spec, &root)
}

/// Starting point label for the merged CSV.
pub fn init_label(spec: &RunSpec) -> String {
    let join = |v: &[f64]| v.iter().map(|a| format!("{a}")).collect::<Vec<_>>().join(";");
    match (&spec.x0, &spec.y0) {
        (None, None) => format!("seed={}", spec.seed),
        (x, y) => format!(
            "x={} y={}",
            x.as_deref().map_or("seed".into(), join),
            y.as_deref().map_or("seed".into(), join)
        ),
    }
}

/// Long-format rows `(step, metric, value)` of the four curve metrics.
pub fn curve_rows(trace: &Trace) -> Vec<(usize, &'static str, f64)> {
    let mut rows = Vec::new();
    for r in &trace.records {
        rows.push((r.step, "F", r.upper));
        rows.push((r.step, "f", r.lower));
        if let Some(d) = r.dist_x {
            rows.push((r.step, "dist_x", d));
        }
        match (r.dist_y, r.dist_ll) {
            (Some(d), _) => rows.push((r.step, "dist_y", d)),
            (None, Some(d)) => rows.push((r.step, "dist_ll", d)),
            _ => {}
        }
    }
    rows
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub dir: PathBuf,
    pub merged: PathBuf,
    pub members: Vec<(String, RunOutcome)>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_merged(path: &Path, members: &[(String, RunOutcome)]) -> Result<(), Error> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(out, "{COMPARE_HEADER}")?;
        for (name, m) in members {
            let init = init_label(&m.spec);
            for (step, metric, value) in curve_rows(&m.run.trace) {
                writeln!(
                    out,
                    "{},{},{},{step},{metric},{}",
                    csv_field(name),
                    m.spec.method.name(),
                    csv_field(&init),
                    format_f64(value)
                )?;
            }
        }
        out.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

/// Runs every `*.ini` in `dir` (ordered by file name, at most `jobs` at a
/// time) and merges their curves into `compare.csv`. All members must use
/// the same problem family. On a member failure the outputs of every run
/// and the merged CSV of the members before it are kept, and the first
/// failure in name order is returned.
pub fn cmd_compare(dir: &Path, jobs: usize) -> Result<CompareOutcome, Error> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ini"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidConfig(format!("no .ini specs in {}", dir.display())));
    }
    let mut specs = Vec::with_capacity(paths.len());
    for p in &paths {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let (text, spec) = read_spec(p)?;
        specs.push((name, text, spec));
    }
    let family = specs[0].2.problem.family();
    if let Some((name, _, s)) = specs.iter().find(|(_, _, s)| s.problem.family() != family) {
        return Err(Error::InvalidConfig(format!(
            "mixed problem families: {} uses {} but {} uses {}",
            specs[0].0,
            family,
            name,
            s.problem.family()
        )));
    }

    let mut hasher = Sha256::new();
    for (name, _, spec) in &specs {
        hasher.update(format!("{name}\t{}\n", spec_hash(spec)));
    }
    let root = output_root(Some(&specs[0].2));
    let out_dir = root.join(format!("compare-{}", hex::encode(hasher.finalize())));
    create_dir(&out_dir)?;
    let runs_root = root.clone();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<(String, Result<RunOutcome, Error>)> = pool.install(|| {
        specs
            .into_par_iter()
            .map(|(name, text, spec)| {
                let r = run_spec(&text, spec, &runs_root);
                (name, r)
            })
            .collect()
    });

    let mut members = Vec::new();
    let mut failure = None;
    for (name, r) in results {
        if failure.is_some() {
            continue;
        }
        match r {
            Ok(o) => match o.run.error.clone() {
                Some(e) => {
                    failure = Some(e);
                    drop(o);
                }
                None => members.push((name, o)),
            },
            Err(e) => failure = Some(e),
        }
    }
    let merged = out_dir.join("compare.csv");
    write_merged(&merged, &members)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(CompareOutcome { dir: out_dir, merged, members }),
    }
}

/// Runs the verification suite; a failed check becomes
/// [`Error::Verification`] carrying the failed ids.
pub fn cmd_verify(level: Level) -> (VerifyReport, Result<(), Error>) {
    let report = run_suite(level);
    let result = if report.passed() {
        Ok(())
    } else {
        Err(Error::Verification(format!("failed checks: {}", report.failed_ids().join(", "))))
    };
    (report, result)
}

pub fn cmd_bench(cfg: &BenchConfig) -> Result<BenchReport, Error> {
    run_bench(cfg)
}

/// Human summary of a bench report.
pub fn bench_summary(report: &BenchReport, dims: &[usize]) -> String {
    let mut s = String::new();
    for &n in dims {
        if let Some(r2) = report.bvfim_r_squared(n) {
            s.push_str(&format!("n={n} bvfim R2={r2:.4}\n"));
        }
    }
    for (n, ratio) in report.ratios() {
        s.push_str(&format!("n={n} bvfim/cg-fd ratio={ratio:.4}\n"));
    }
    s.push_str(&format!("bvfim second-order calls={}\n", report.bvfim_second_order_calls()));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_map() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::Dimension("x".into())), 2);
        assert_eq!(exit_code(&Error::MissingSecondOrder { method: "cg" }), 2);
        assert_eq!(exit_code(&Error::Spec { line: 1, column: 1, message: "x".into() }), 2);
        assert_eq!(exit_code(&Error::InfeasibleStart { gap: -1.0 }), 3);
        assert_eq!(exit_code(&Error::CgBreakdown { iteration: 0, curvature: 0.0 }), 3);
        assert_eq!(exit_code(&Error::Verification("x".into())), 4);
        assert_eq!(exit_code(&Error::Io { path: "p".into(), message: "m".into() }), 5);
    }

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("x=1 y=2"), "x=1 y=2");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }
}
