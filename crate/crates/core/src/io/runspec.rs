//! Sectioned `key = value` run configuration.
//!
//! ```text
//! schema_version = 1
//!
//! [problem]
//! id = toy(a=0)
//!
//! [solver]
//! method = bvfim
//!
//! [run]
//! K = 500
//! x0 = 3.0
//! y0 = 3.0
//! ```
//!
//! Lines starting with `#` or `;` are comments, as is anything after a `#`
//! or `;` preceded by whitespace. Every key belongs to a fixed schema
//! ([`KEYS`]); unknown keys, repeated keys and repeated sections are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::baselines::{Baseline, BaselineConfig, CurvaturePolicy, ImplicitConfig, ImplicitMethod, UnrollConfig};
use crate::bvfim::{AdamParams, OuterOptimizer, Schedule, ScheduleMode, SolverConfig};
use crate::error::{Error, Result};
use crate::problems::registry::ProblemId;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Bvfim,
    Rhg,
    Trhg,
    Cg,
    Neumann,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bvfim => "bvfim",
            Method::Rhg => "rhg",
            Method::Trhg => "trhg",
            Method::Cg => "cg",
            Method::Neumann => "neumann",
        }
    }

    pub fn needs_second_order(self) -> bool {
        self != Method::Bvfim
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "bvfim" => Method::Bvfim,
            "rhg" => Method::Rhg,
            "trhg" => Method::Trhg,
            "cg" => Method::Cg,
            "neumann" => Method::Neumann,
            _ => return Err("expected one of bvfim, rhg, trhg, cg, neumann".into()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: ProblemId,
    /// Serve Hessian/Jacobian-vector products by finite differences of the gradients.
    pub fd_second_order: bool,
    pub method: Method,
    /// BVFIM settings; `k`, `l`, `alpha`, `optimizer`, `record_every` and
    /// `wall_clock` also drive the baselines.
    pub solver: SolverConfig,
    pub unroll: UnrollConfig,
    pub implicit: ImplicitConfig,
    pub schedule: Schedule,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub precision: Precision,
}

impl RunSpec {
    /// Defaults for every optional key.
    pub fn with_defaults(problem: ProblemId) -> Self {
        Self {
            problem,
            fd_second_order: false,
            method: Method::Bvfim,
            solver: SolverConfig::default(),
            unroll: UnrollConfig::default(),
            implicit: ImplicitConfig::default(),
            schedule: Schedule::geometric(),
            seed: 0,
            x0: None,
            y0: None,
            output_dir: None,
            precision: Precision::F64,
        }
    }

    /// The baseline selected by `method`, if any.
    pub fn baseline(&self) -> Option<Baseline> {
        let implicit = |method| ImplicitConfig { method, ..self.implicit };
        match self.method {
            Method::Bvfim => None,
            Method::Rhg => Some(Baseline::Rhg(self.unroll)),
            Method::Trhg => Some(Baseline::Trhg(self.unroll)),
            Method::Cg => Some(Baseline::Cg(implicit(ImplicitMethod::Cg))),
            Method::Neumann => Some(Baseline::Neumann(implicit(ImplicitMethod::Neumann))),
        }
    }

    /// Outer-loop settings for a baseline run: `K` x-updates.
    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            k: self.solver.k,
            alpha: self.solver.alpha,
            optimizer: self.solver.optimizer,
            record_every: self.solver.record_every,
            wall_clock: self.solver.wall_clock,
        }
    }

    /// The document with every key spelled out, excluding `output_dir`.
    /// Parsing it yields `self` with `output_dir` cleared; its hash names the
    /// output directory.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let vec = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let _ = writeln!(out, "schema_version = {SCHEMA_VERSION}");
        let _ = writeln!(out, "\n[problem]");
        let _ = writeln!(out, "id = {}", self.problem);
        let _ = writeln!(out, "fd_second_order = {}", self.fd_second_order);
        let _ = writeln!(out, "\n[solver]");
        let _ = writeln!(out, "method = {}", self.method.name());
        let _ = writeln!(out, "T_z = {}", self.solver.t_z);
        let _ = writeln!(out, "T_y = {}", self.solver.t_y);
        let _ = writeln!(out, "s1 = {:?}", self.solver.s1);
        let _ = writeln!(out, "s2 = {:?}", self.solver.s2);
        let _ = writeln!(out, "alpha = {:?}", self.solver.alpha);
        let _ = writeln!(
            out,
            "optimizer = {}",
            match self.solver.optimizer {
                OuterOptimizer::Adam(_) => "adam",
                OuterOptimizer::Gd => "gd",
            }
        );
        if let OuterOptimizer::Adam(p) = self.solver.optimizer {
            let _ = writeln!(out, "beta1 = {:?}", p.beta1);
            let _ = writeln!(out, "beta2 = {:?}", p.beta2);
            let _ = writeln!(out, "eps = {:?}", p.eps);
        }
        let _ = writeln!(out, "warm_start_y = {}", self.solver.warm_start_y);
        let _ = writeln!(out, "barrier_floor = {:?}", self.solver.barrier_floor);
        let _ = writeln!(out, "backtrack_max = {}", self.solver.backtrack_max);
        let _ = writeln!(out, "T = {}", self.unroll.t);
        let _ = writeln!(out, "s = {:?}", self.unroll.s);
        if let Some(t) = self.unroll.truncate_at {
            let _ = writeln!(out, "truncate_at = {t}");
        }
        let _ = writeln!(out, "J = {}", self.implicit.j);
        let _ = writeln!(
            out,
            "curvature = {}",
            match self.implicit.curvature {
                CurvaturePolicy::Warn => "warn",
                CurvaturePolicy::Error => "error",
            }
        );
        let _ = writeln!(out, "\n[schedule]");
        let _ = writeln!(
            out,
            "mode = {}",
            match self.schedule.mode {
                ScheduleMode::Fixed => "fixed",
                ScheduleMode::Geometric => "geometric",
                ScheduleMode::AdaptiveMu2 => "adaptive-mu2",
            }
        );
        for (k, v) in [
            ("mu1", self.schedule.mu1),
            ("mu2", self.schedule.mu2),
            ("theta", self.schedule.theta),
            ("tau", self.schedule.tau),
            ("decay", self.schedule.decay),
            ("mu2_offset", self.schedule.mu2_offset),
            ("mu2_min", self.schedule.mu2_min),
        ] {
            let _ = writeln!(out, "{k} = {v:?}");
        }
        let _ = writeln!(out, "\n[run]");
        let _ = writeln!(out, "K = {}", self.solver.k);
        let _ = writeln!(out, "L = {}", self.solver.l);
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(x0) = &self.x0 {
            let _ = writeln!(out, "x0 = {}", vec(x0));
        }
        if let Some(y0) = &self.y0 {
            let _ = writeln!(out, "y0 = {}", vec(y0));
        }
        let _ = writeln!(out, "record_every = {}", self.solver.record_every);
        let _ = writeln!(out, "wall_clock = {}", self.solver.wall_clock);
        let _ = writeln!(
            out,
            "precision = {}",
            match self.precision {
                Precision::F32 => "f32",
                Precision::F64 => "f64",
            }
        );
        out
    }
}

/// One accepted configuration key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyDoc {
    /// Empty for top-level keys.
    pub section: &'static str,
    pub key: &'static str,
    pub kind: &'static str,
    /// `None` for required keys.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(
    section: &'static str,
    key: &'static str,
    kind: &'static str,
    default: Option<&'static str>,
    help: &'static str,
) -> KeyDoc {
    KeyDoc {
        section,
        key,
        kind,
        default,
        help,
    }
}

/// Every key accepted by [`parse_runspec`].
pub const KEYS: &[KeyDoc] = &[
    key("", "schema_version", "int", None, "configuration schema version; must be 1"),
    key("problem", "id", "problem id", None, "toy(a=..) | quadratic(n=..,m=..,seed=..) | hyperclean(d=..,classes=..,arch=..,seed=..,...)"),
    key("problem", "fd_second_order", "bool", Some("false"), "serve Hessian/Jacobian-vector products by finite differences"),
    key("solver", "method", "enum", Some("bvfim"), "bvfim | rhg | trhg | cg | neumann"),
    key("solver", "T_z", "int", Some("50"), "gradient steps on the regularized lower level"),
    key("solver", "T_y", "int", Some("25"), "gradient steps on the barrier problem"),
    key("solver", "s1", "float", Some("0.01"), "step size of the z iteration"),
    key("solver", "s2", "float", Some("0.01"), "initial step size of the y iteration"),
    key("solver", "alpha", "float", Some("0.01"), "outer step size on x"),
    key("solver", "optimizer", "enum", Some("adam"), "adam | gd"),
    key("solver", "beta1", "float", Some("0.9"), "Adam first-moment decay"),
    key("solver", "beta2", "float", Some("0.999"), "Adam second-moment decay"),
    key("solver", "eps", "float", Some("1e-8"), "Adam denominator offset"),
    key("solver", "warm_start_y", "bool", Some("false"), "start every y iteration from z"),
    key("solver", "barrier_floor", "float", Some("1e-12"), "smallest accepted barrier argument f_reg - f"),
    key("solver", "backtrack_max", "int", Some("30"), "step halvings allowed per y step"),
    key("solver", "T", "int", Some("100"), "lower-level steps of the baselines"),
    key("solver", "s", "float", Some("0.1"), "lower-level step size of the baselines"),
    key("solver", "truncate_at", "int", None, "first step of the reverse pass (trhg default T/2; optional)"),
    key("solver", "J", "int", Some("20"), "CG iterations or Neumann terms"),
    key("solver", "curvature", "enum", Some("warn"), "CG response to nonpositive curvature: warn | error"),
    key("schedule", "mode", "enum", Some("geometric"), "geometric | fixed | adaptive-mu2"),
    key("schedule", "mu1", "float", Some("1.0"), "initial mu1"),
    key("schedule", "mu2", "float", Some("1.0"), "initial mu2 (unused by adaptive-mu2)"),
    key("schedule", "theta", "float", Some("1.0"), "initial theta"),
    key("schedule", "tau", "float", Some("1.0"), "initial tau"),
    key("schedule", "decay", "float", Some("1.01"), "per-stage divisor of the geometric schedule"),
    key("schedule", "mu2_offset", "float", Some("1.0"), "adaptive-mu2: mu2 = f(x, y) + offset"),
    key("schedule", "mu2_min", "float", Some("1e-12"), "adaptive-mu2: lower clamp on mu2"),
    key("run", "K", "int", Some("500"), "outer stages (x-updates for baselines)"),
    key("run", "L", "int", Some("1"), "x-updates per stage"),
    key("run", "seed", "int", Some("0"), "seed of the suggested start point"),
    key("run", "x0", "floats", None, "comma-separated start x (optional)"),
    key("run", "y0", "floats", None, "comma-separated start y (optional)"),
    key("run", "record_every", "int", Some("1"), "record every n-th x-update (and the last)"),
    key("run", "output_dir", "path", None, "output root when BVFIM_OUTPUT_ROOT is unset (optional); runs go to <root>/<spec hash>"),
    key("run", "wall_clock", "bool", Some("true"), "record wall time; false writes 0 for byte-identical traces"),
    key("run", "precision", "enum", Some("f64"), "f64 | f32"),
];

/// Renders [`KEYS`] grouped by section.
pub fn keys_help() -> String {
    let mut out = String::new();
    let mut section = None;
    for k in KEYS {
        if section != Some(k.section) {
            section = Some(k.section);
            let title = if k.section.is_empty() { "(top level)".to_string() } else { format!("[{}]", k.section) };
            let _ = writeln!(out, "{title}");
        }
        let default = match k.default {
            Some(d) => format!("default {d}"),
            None if k.help.contains("optional") => "optional".to_string(),
            None => "required".to_string(),
        };
        let _ = writeln!(out, "  {:<16} {:<11} {:<16} {}", k.key, k.kind, default, k.help);
    }
    out
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    key_col: usize,
    value_col: usize,
}

fn spec_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Spec {
        line,
        column,
        message: message.into(),
    }
}

/// Byte offset where a trailing comment starts, if any.
fn comment_start(line: &str) -> Option<usize> {
    let bytes = line.as_bytes();
    (0..bytes.len()).find(|&i| (bytes[i] == b'#' || bytes[i] == b';') && (i == 0 || bytes[i - 1].is_ascii_whitespace()))
}

fn col(line: &str, byte: usize) -> usize {
    line[..byte].chars().count() + 1
}

fn lex(text: &str) -> Result<BTreeMap<(String, String), Entry>> {
    let mut entries: BTreeMap<(String, String), Entry> = BTreeMap::new();
    let mut sections: BTreeMap<String, usize> = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = &raw[..comment_start(raw).unwrap_or(raw.len())];
        let start = body.len() - body.trim_start().len();
        let content = body.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| spec_err(line_no, col(raw, start), "unterminated section header"))?
                .trim();
            if !KEYS.iter().any(|k| !k.section.is_empty() && k.section == name) {
                return Err(spec_err(
                    line_no,
                    col(raw, start),
                    format!("unknown section [{name}] (expected [problem], [solver], [schedule] or [run])"),
                ));
            }
            if let Some(first) = sections.insert(name.to_string(), line_no) {
                return Err(spec_err(
                    line_no,
                    col(raw, start),
                    format!("duplicate section [{name}] (first opened at line {first})"),
                ));
            }
            section = name.to_string();
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(spec_err(line_no, col(raw, start), "expected `key = value`"));
        };
        let key = body[..eq].trim();
        if key.is_empty() {
            return Err(spec_err(line_no, col(raw, start), "missing key before `=`"));
        }
        let value_part = &body[eq + 1..];
        let value_start = eq + 1 + (value_part.len() - value_part.trim_start().len());
        let value = value_part.trim();
        let value_col = if value.is_empty() { col(raw, eq) + 1 } else { col(raw, value_start) };
        if !KEYS.iter().any(|k| k.section == section && k.key == key) {
            let place = if section.is_empty() { "at top level".to_string() } else { format!("in [{section}]") };
            return Err(spec_err(line_no, col(raw, start), format!("unknown key `{key}` {place}")));
        }
        let entry = Entry {
            value: value.to_string(),
            line: line_no,
            key_col: col(raw, start),
            value_col,
        };
        if let Some(first) = entries.get(&(section.clone(), key.to_string())) {
            return Err(spec_err(
                line_no,
                entry.key_col,
                format!(
                    "duplicate key `{key}` at line {line_no}, column {} (first defined at line {}, column {})",
                    entry.key_col, first.line, first.key_col
                ),
            ));
        }
        entries.insert((section.clone(), key.to_string()), entry);
    }
    Ok(entries)
}

struct Fields {
    entries: BTreeMap<(String, String), Entry>,
    end_line: usize,
}

impl Fields {
    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn typed<T>(&self, section: &str, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .ok_or_else(|| spec_err(e.line, e.value_col, format!("`{key}` expects {what}, got `{}`", e.value))),
        }
    }

    fn int<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.typed(section, key, "a nonnegative integer", |v| v.parse().ok())
    }

    fn float(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.typed(section, key, "a finite number", |v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    fn boolean(&self, section: &str, key: &str) -> Result<Option<bool>> {
        self.typed(section, key, "true or false", |v| match v {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
    }

    fn choice<T: Copy>(&self, section: &str, key: &str, options: &[(&str, T)]) -> Result<Option<T>> {
        let names: Vec<&str> = options.iter().map(|o| o.0).collect();
        self.typed(section, key, &format!("one of {}", names.join(" | ")), |v| {
            options.iter().find(|o| o.0 == v).map(|o| o.1)
        })
    }

    fn floats(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.typed(section, key, "comma-separated finite numbers", |v| {
            let inner = v.strip_prefix('[').and_then(|r| r.strip_suffix(']')).unwrap_or(v);
            inner
                .split(',')
                .map(|p| p.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect()
        })
    }

    fn required(&self, section: &str, key: &str) -> Result<&Entry> {
        self.get(section, key).ok_or_else(|| {
            let place = if section.is_empty() { "at top level".to_string() } else { format!("in [{section}]") };
            spec_err(self.end_line, 1, format!("missing required key `{key}` {place}"))
        })
    }

    /// Error located at the value of `section.key`, or at the end of the document.
    fn err_at(&self, section: &str, key: &str, message: String) -> Error {
        match self.get(section, key) {
            Some(e) => spec_err(e.line, e.value_col, message),
            None => spec_err(self.end_line, 1, message),
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Parses and validates a run configuration.
pub fn parse_runspec(text: &str) -> Result<RunSpec> {
    let f = Fields {
        entries: lex(text)?,
        end_line: text.lines().count().max(1),
    };

    let version_entry = f.required("", "schema_version")?;
    let version: u32 = f.int("", "schema_version")?.expect("present");
    if version != SCHEMA_VERSION {
        return Err(spec_err(
            version_entry.line,
            version_entry.value_col,
            format!("unsupported schema_version {version} (this build reads {SCHEMA_VERSION})"),
        ));
    }

    let id_entry = f.required("problem", "id")?;
    let problem = ProblemId::parse(&id_entry.value)
        .map_err(|e| spec_err(id_entry.line, id_entry.value_col + e.column - 1, e.message))?;
    let mut spec = RunSpec::with_defaults(problem);
    set(&mut spec.fd_second_order, f.boolean("problem", "fd_second_order")?);

    set(
        &mut spec.method,
        f.typed("solver", "method", "one of bvfim | rhg | trhg | cg | neumann", |v| v.parse().ok())?,
    );
    let s = &mut spec.solver;
    set(&mut s.t_z, f.int("solver", "T_z")?);
    set(&mut s.t_y, f.int("solver", "T_y")?);
    set(&mut s.s1, f.float("solver", "s1")?);
    set(&mut s.s2, f.float("solver", "s2")?);
    set(&mut s.alpha, f.float("solver", "alpha")?);
    let mut adam = AdamParams::default();
    set(&mut adam.beta1, f.float("solver", "beta1")?);
    set(&mut adam.beta2, f.float("solver", "beta2")?);
    set(&mut adam.eps, f.float("solver", "eps")?);
    let use_adam = f.choice("solver", "optimizer", &[("adam", true), ("gd", false)])?.unwrap_or(true);
    s.optimizer = if use_adam { OuterOptimizer::Adam(adam) } else { OuterOptimizer::Gd };
    if !use_adam {
        for k in ["beta1", "beta2", "eps"] {
            if let Some(e) = f.get("solver", k) {
                return Err(spec_err(e.line, e.key_col, format!("`{k}` only applies to optimizer = adam")));
            }
        }
    }
    set(&mut s.warm_start_y, f.boolean("solver", "warm_start_y")?);
    set(&mut s.barrier_floor, f.float("solver", "barrier_floor")?);
    set(&mut s.backtrack_max, f.int("solver", "backtrack_max")?);
    set(&mut s.k, f.int("run", "K")?);
    set(&mut s.l, f.int("run", "L")?);
    set(&mut s.record_every, f.int("run", "record_every")?);
    set(&mut s.wall_clock, f.boolean("run", "wall_clock")?);

    let t = f.int("solver", "T")?;
    let step = f.float("solver", "s")?;
    set(&mut spec.unroll.t, t);
    set(&mut spec.unroll.s, step);
    spec.unroll.truncate_at = f.int("solver", "truncate_at")?;
    set(&mut spec.implicit.t, t);
    set(&mut spec.implicit.s, step);
    set(&mut spec.implicit.j, f.int("solver", "J")?);
    set(
        &mut spec.implicit.curvature,
        f.choice("solver", "curvature", &[("warn", CurvaturePolicy::Warn), ("error", CurvaturePolicy::Error)])?,
    );

    let sc = &mut spec.schedule;
    set(
        &mut sc.mode,
        f.choice(
            "schedule",
            "mode",
            &[
                ("geometric", ScheduleMode::Geometric),
                ("fixed", ScheduleMode::Fixed),
                ("adaptive-mu2", ScheduleMode::AdaptiveMu2),
            ],
        )?,
    );
    set(&mut sc.mu1, f.float("schedule", "mu1")?);
    set(&mut sc.mu2, f.float("schedule", "mu2")?);
    set(&mut sc.theta, f.float("schedule", "theta")?);
    set(&mut sc.tau, f.float("schedule", "tau")?);
    set(&mut sc.decay, f.float("schedule", "decay")?);
    set(&mut sc.mu2_offset, f.float("schedule", "mu2_offset")?);
    set(&mut sc.mu2_min, f.float("schedule", "mu2_min")?);

    set(&mut spec.seed, f.int("run", "seed")?);
    spec.x0 = f.floats("run", "x0")?;
    spec.y0 = f.floats("run", "y0")?;
    spec.output_dir = f.get("run", "output_dir").map(|e| PathBuf::from(e.value.trim_matches('"')));
    set(
        &mut spec.precision,
        f.choice("run", "precision", &[("f64", Precision::F64), ("f32", Precision::F32)])?,
    );

    // semantic validation, located at the offending key where possible
    if spec.solver.record_every == 0 {
        return Err(f.err_at("run", "record_every", "record_every must be at least 1".into()));
    }
    spec.solver
        .validate()
        .map_err(|e| f.err_at("solver", "method", e.to_string()))?;
    spec.schedule
        .validate()
        .map_err(|e| f.err_at("schedule", "mode", format!("invalid schedule: {e}")))?;
    match spec.baseline() {
        Some(Baseline::Rhg(c)) | Some(Baseline::Trhg(c)) => {
            c.validate().map_err(|e| f.err_at("solver", "T", e.to_string()))?
        }
        Some(Baseline::Cg(c)) | Some(Baseline::Neumann(c)) => {
            c.validate().map_err(|e| f.err_at("solver", "J", e.to_string()))?
        }
        None => {}
    }
    if spec.method.needs_second_order() && !spec.problem.has_second_order() && !spec.fd_second_order {
        return Err(f.err_at(
            "solver",
            "method",
            format!(
                "{} needs Hessian/Jacobian-vector products, which `{}` does not provide; set fd_second_order = true in [problem]",
                spec.method.name(),
                spec.problem
            ),
        ));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema_version = 1\n[problem]\nid = toy(a=0)\n";

    fn err(text: &str) -> (usize, usize, String) {
        match parse_runspec(text) {
            Err(Error::Spec { line, column, message }) => (line, column, message),
            other => panic!("expected a spec error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_spec_takes_defaults() {
        let spec = parse_runspec(MINIMAL).unwrap();
        assert_eq!(spec, RunSpec::with_defaults(ProblemId::Toy { a: 0.0 }));
        assert_eq!(spec.solver.t_z, 50);
        assert_eq!(spec.solver.t_y, 25);
        assert_eq!(spec.solver.l, 1);
        assert_eq!(spec.solver.s1, 0.01);
        assert!(matches!(spec.solver.optimizer, OuterOptimizer::Adam(_)));
    }

    #[test]
    fn canonical_round_trips() {
        let text = "schema_version = 1\n[problem]\nid = quadratic(n=3,m=2,seed=4)\n[solver]\nmethod = cg\nJ = 7\n\
                    optimizer = gd\ntruncate_at = 3\n[schedule]\nmode = adaptive-mu2\nmu2_offset = 0.5\n\
                    [run]\nK = 9\nx0 = 0.1, -2e-3\ny0 = [1, 2, 3]\nwall_clock = false\nprecision = f32\n";
        let spec = parse_runspec(text).unwrap();
        assert_eq!(spec.x0, Some(vec![0.1, -2e-3]));
        assert_eq!(parse_runspec(&spec.canonical()).unwrap(), spec);
        let d = RunSpec::with_defaults(ProblemId::Toy { a: 2.0 });
        assert_eq!(parse_runspec(&d.canonical()).unwrap(), d);
    }

    #[test]
    fn key_table_defaults_match() {
        let canon = RunSpec::with_defaults(ProblemId::Toy { a: 0.0 }).canonical();
        let spec = parse_runspec(&canon).unwrap();
        for k in KEYS.iter().filter(|k| k.default.is_some()) {
            let mut doc = MINIMAL.to_string();
            let section = if k.section == "problem" { String::new() } else { format!("[{}]\n", k.section) };
            doc.push_str(&format!("{section}{} = {}\n", k.key, k.default.unwrap()));
            assert_eq!(parse_runspec(&doc).unwrap(), spec, "default of {}", k.key);
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# run\nschema_version = 1 ; inline\n\n[problem]\n  id = toy(a=2)   # offset\n";
        assert_eq!(parse_runspec(text).unwrap().problem, ProblemId::Toy { a: 2.0 });
    }

    #[test]
    fn unknown_key_is_located() {
        let (line, column, msg) = err("schema_version = 1\n[problem]\nid = toy(a=0)\n[solver]\n  T_zz = 3\n");
        assert_eq!((line, column), (5, 3));
        assert!(msg.contains("T_zz"));
    }

    #[test]
    fn duplicate_key_names_both_locations() {
        let (line, _, msg) = err("schema_version = 1\n[problem]\nid = toy(a=0)\n[run]\nK = 3\nK = 4\n");
        assert_eq!(line, 6);
        assert!(msg.contains("line 6") && msg.contains("line 5"), "{msg}");
    }

    #[test]
    fn duplicate_section() {
        let (line, _, msg) = err("schema_version = 1\n[problem]\nid = toy(a=0)\n[run]\n[run]\n");
        assert_eq!(line, 5);
        assert!(msg.contains("line 4"));
    }

    #[test]
    fn type_mismatch_points_at_value() {
        let (line, column, msg) = err("schema_version = 1\n[problem]\nid = toy(a=0)\n[run]\nK =  many\n");
        assert_eq!((line, column), (5, 6));
        assert!(msg.contains("integer"));
        let (_, _, msg) = err("schema_version = 1\n[problem]\nid = toy(a=0)\n[schedule]\nmu1 = nan\n");
        assert!(msg.contains("finite"));
    }

    #[test]
    fn missing_required_keys() {
        assert!(err("[problem]\nid = toy(a=0)\n").2.contains("schema_version"));
        assert!(err("schema_version = 1\n").2.contains("`id`"));
        assert!(err("schema_version = 2\n[problem]\nid = toy(a=0)\n").2.contains("unsupported"));
    }

    #[test]
    fn problem_id_error_column_is_absolute() {
        let (line, column, _) = err("schema_version = 1\n[problem]\nid = toy(a=x)\n");
        assert_eq!((line, column), (3, 10));
    }

    #[test]
    fn capability_check_at_parse_time() {
        let base = "schema_version = 1\n[problem]\nid = hyperclean(d=4,classes=2)\n";
        let (line, _, msg) = err(&format!("{base}[solver]\nmethod = cg\n"));
        assert_eq!(line, 5);
        assert!(msg.contains("fd_second_order"));
        let ok = format!("{base}fd_second_order = true\n[solver]\nmethod = cg\n");
        assert_eq!(parse_runspec(&ok).unwrap().method, Method::Cg);
        assert!(parse_runspec(&format!("{base}[solver]\nmethod = bvfim\n")).is_ok());
    }

    #[test]
    fn semantic_errors() {
        assert!(err("schema_version = 1\n[problem]\nid = toy(a=0)\n[run]\nrecord_every = 0\n").2.contains("record_every"));
        assert!(parse_runspec("schema_version = 1\n[problem]\nid = toy(a=0)\n[run]\nK = 0\n").is_ok());
        assert!(err("schema_version = 1\n[problem]\nid = toy(a=0)\n[solver]\noptimizer = gd\nbeta1 = 0.5\n").2.contains("adam"));
        assert!(err("schema_version = 1\nid = toy(a=0)\n").2.contains("top level"));
        assert!(err("schema_version = 1\n[problem]\nid = toy(a=0)\n[extra]\n").2.contains("unknown section"));
    }

    #[test]
    fn help_lists_every_key() {
        let help = keys_help();
        for k in KEYS {
            assert!(help.contains(k.key), "{}", k.key);
        }
    }
}
