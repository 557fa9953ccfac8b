//! Built-in problems selected by string id, e.g. `toy(a=0)`,
//! `quadratic(n=20,m=5,seed=1)` or `hyperclean(d=20,classes=3,arch=two-layer-linear,seed=0)`.

use std::fmt;

use super::hyperclean::Reduction;
use super::{Architecture, FiniteDiffSecondOrder, HyperClean, HyperCleanSpec, Problem, Quadratic, ToySin};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parsed problem id.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemId {
    Toy { a: f64 },
    Quadratic { n: usize, m: usize, seed: u64 },
    HyperClean(HyperCleanSpec),
}

/// Syntax or value error inside a problem id; `column` is 1-based within the id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for IdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for IdError {}

fn err(column: usize, message: impl Into<String>) -> IdError {
    IdError {
        column,
        message: message.into(),
    }
}

struct Arg<'a> {
    key: &'a str,
    value: &'a str,
    column: usize,
    used: bool,
}

/// Splits `name(k=v,...)` into the name and its arguments.
fn split(id: &str) -> Result<(&str, Vec<Arg<'_>>), IdError> {
    let lead = id.len() - id.trim_start().len();
    let id_trim = id.trim();
    let (name, rest) = match id_trim.find('(') {
        Some(open) => {
            if !id_trim.ends_with(')') {
                return Err(err(lead + id_trim.len() + 1, "expected ')' at end of problem id"));
            }
            (&id_trim[..open], Some((open, &id_trim[open + 1..id_trim.len() - 1])))
        }
        None => (id_trim, None),
    };
    let name = name.trim();
    if name.is_empty() {
        return Err(err(lead + 1, "missing problem name"));
    }
    let mut args = Vec::new();
    if let Some((open, body)) = rest {
        let mut offset = lead + open + 1;
        if !body.trim().is_empty() {
            for part in body.split(',') {
                let column = offset + part.len() - part.trim_start().len() + 1;
                let Some((k, v)) = part.split_once('=') else {
                    return Err(err(column, format!("expected key=value, found '{}'", part.trim())));
                };
                let key = k.trim();
                if args.iter().any(|a: &Arg| a.key == key) {
                    return Err(err(column, format!("duplicate argument '{key}'")));
                }
                args.push(Arg {
                    key,
                    value: v.trim(),
                    column,
                    used: false,
                });
                offset += part.len() + 1;
            }
        }
    }
    Ok((name, args))
}

struct Args<'a> {
    args: Vec<Arg<'a>>,
    end: usize,
}

impl<'a> Args<'a> {
    fn take<V: std::str::FromStr>(&mut self, key: &str, default: Option<V>) -> Result<V, IdError> {
        match self.args.iter_mut().find(|a| a.key == key) {
            Some(a) => {
                a.used = true;
                a.value
                    .parse()
                    .map_err(|_| err(a.column, format!("invalid value '{}' for '{key}'", a.value)))
            }
            None => default.ok_or_else(|| err(self.end, format!("missing argument '{key}'"))),
        }
    }

    fn take_str(&mut self, key: &str) -> Option<(&'a str, usize)> {
        self.args.iter_mut().find(|a| a.key == key).map(|a| {
            a.used = true;
            (a.value, a.column)
        })
    }

    fn finish(self, allowed: &str) -> Result<(), IdError> {
        match self.args.iter().find(|a| !a.used) {
            Some(a) => Err(err(a.column, format!("unknown argument '{}' (allowed: {allowed})", a.key))),
            None => Ok(()),
        }
    }
}

impl ProblemId {
    pub fn parse(id: &str) -> Result<Self, IdError> {
        let (name, args) = split(id)?;
        let mut args = Args { args, end: id.len() };
        let parsed = match name {
            "toy" => {
                let a = args.take("a", Some(0.0))?;
                args.finish("a")?;
                ProblemId::Toy { a }
            }
            "quadratic" => {
                let n = args.take("n", None)?;
                let m = args.take("m", None)?;
                let seed = args.take("seed", Some(0))?;
                args.finish("n, m, seed")?;
                if n == 0 || m == 0 {
                    return Err(err(1, "quadratic dimensions must be positive"));
                }
                ProblemId::Quadratic { n, m, seed }
            }
            "hyperclean" => {
                let defaults = HyperCleanSpec::default();
                let d = args.take("d", Some(defaults.d))?;
                let classes = args.take("classes", Some(defaults.classes))?;
                let seed = args.take("seed", Some(defaults.seed))?;
                let n_tr = args.take("n_tr", Some(defaults.n_tr))?;
                let n_val = args.take("n_val", Some(defaults.n_val))?;
                let n_test = args.take("n_test", Some(defaults.n_test))?;
                let hidden = args.take("hidden", Some(16usize))?;
                let separation = args.take("separation", Some(defaults.separation))?;
                let arch = match args.take_str("arch") {
                    None | Some(("two-layer-linear", _)) => Architecture::TwoLayerLinear { hidden },
                    Some(("linear", _)) => Architecture::Linear,
                    Some((other, column)) => {
                        return Err(err(
                            column,
                            format!("unknown arch '{other}' (expected linear or two-layer-linear)"),
                        ))
                    }
                };
                let reduction = match args.take_str("loss") {
                    None | Some(("mean", _)) => Reduction::Mean,
                    Some(("sum", _)) => Reduction::Sum,
                    Some((other, column)) => {
                        return Err(err(column, format!("unknown loss '{other}' (expected mean or sum)")))
                    }
                };
                args.finish("d, classes, arch, seed, n_tr, n_val, n_test, hidden, separation, loss")?;
                ProblemId::HyperClean(HyperCleanSpec {
                    d,
                    classes,
                    n_tr,
                    n_val,
                    n_test,
                    arch,
                    separation,
                    reduction,
                    seed,
                })
            }
            other => {
                return Err(err(
                    1,
                    format!("unknown problem '{other}' (expected toy, quadratic or hyperclean)"),
                ))
            }
        };
        Ok(parsed)
    }

    /// `toy`, `quadratic` or `hyperclean`.
    pub fn family(&self) -> &'static str {
        match self {
            ProblemId::Toy { .. } => "toy",
            ProblemId::Quadratic { .. } => "quadratic",
            ProblemId::HyperClean(_) => "hyperclean",
        }
    }

    /// Whether the built problem carries analytic second-order oracles.
    pub fn has_second_order(&self) -> bool {
        !matches!(self, ProblemId::HyperClean(_))
    }

    pub fn build<T: Scalar>(&self) -> Result<Box<dyn Problem<T>>> {
        Ok(match self {
            ProblemId::Toy { a } => Box::new(ToySin::new(T::lit(*a))),
            ProblemId::Quadratic { n, m, seed } => Box::new(Quadratic::<T>::random(*n, *m, *seed)?),
            ProblemId::HyperClean(spec) => Box::new(HyperClean::<T>::generate(spec.clone())?),
        })
    }

    /// Like [`build`](Self::build), optionally wrapping the problem so that
    /// missing second-order oracles are filled in by finite differences.
    pub fn build_with_fd<T: Scalar>(&self, finite_diff: bool) -> Result<Box<dyn Problem<T>>> {
        let p = self.build::<T>()?;
        if finite_diff && !p.has_second_order() {
            Ok(Box::new(FiniteDiffSecondOrder::new(p)))
        } else {
            Ok(p)
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemId::Toy { a } => write!(f, "toy(a={a})"),
            ProblemId::Quadratic { n, m, seed } => write!(f, "quadratic(n={n},m={m},seed={seed})"),
            ProblemId::HyperClean(s) => {
                write!(f, "hyperclean(d={},classes={},arch={}", s.d, s.classes, s.arch)?;
                if let Architecture::TwoLayerLinear { hidden } = s.arch {
                    write!(f, ",hidden={hidden}")?;
                }
                write!(
                    f,
                    ",seed={},n_tr={},n_val={},n_test={},separation={}",
                    s.seed, s.n_tr, s.n_val, s.n_test, s.separation
                )?;
                if s.reduction == Reduction::Sum {
                    write!(f, ",loss=sum")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::parse(s).map_err(|e| Error::InvalidConfig(format!("problem id '{s}': {e}")))
    }
}
