//! JSON summaries with deterministic key order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::runspec::RunSpec;
use super::Executed;
use crate::counters::OracleCounters;
use crate::error::{Error, Result};
use crate::trace::X_HEAD;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn platform() -> String {
    format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS)
}

/// Hex SHA-256 of the canonical spec text.
pub fn spec_hash(spec: &RunSpec) -> String {
    hex::encode(Sha256::digest(spec.canonical().as_bytes()))
}

/// Serializes through `serde_json::Value`, whose maps are ordered by key.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::InvalidConfig(format!("report not serializable: {e}")))?;
    let mut text = serde_json::to_string_pretty(&v).expect("values always serialize");
    text.push('\n');
    Ok(text)
}

pub fn write_report_json<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    fs::write(path, to_sorted_json(report)?).map_err(|e| Error::io(path, e))
}

pub fn read_report_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Spec {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Summary written next to the trace of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub platform: String,
    pub spec_hash: String,
    pub problem: String,
    pub method: String,
    pub status: String,
    pub error: Option<String>,
    /// Full `x` when short, else its first coordinates.
    pub x: Vec<f64>,
    pub x_norm: f64,
    pub y_norm: f64,
    #[serde(rename = "F")]
    pub upper: Option<f64>,
    #[serde(rename = "f")]
    pub lower: Option<f64>,
    pub dist_x: Option<f64>,
    pub dist_y: Option<f64>,
    pub dist_ll: Option<f64>,
    pub steps: usize,
    pub records: usize,
    pub counters: OracleCounters,
    pub second_order_calls: u64,
    pub warnings: Vec<String>,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn new(spec: &RunSpec, run: &Executed) -> Self {
        let last = run.trace.last();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let keep = if run.x.len() > crate::trace::X_FULL_MAX { X_HEAD } else { run.x.len() };
        Self {
            version: VERSION.to_string(),
            platform: platform(),
            spec_hash: spec_hash(spec),
            problem: spec.problem.to_string(),
            method: spec.method.name().to_string(),
            status: if run.error.is_some() { "failed" } else { "ok" }.to_string(),
            error: run.error.as_ref().map(|e| e.to_string()),
            x: run.x[..keep].to_vec(),
            x_norm: norm(&run.x),
            y_norm: norm(&run.y),
            upper: run.upper,
            lower: run.lower,
            dist_x: run.dist_x,
            dist_y: run.dist_y,
            dist_ll: last.and_then(|r| r.dist_ll),
            steps: last.map_or(0, |r| r.step),
            records: run.trace.records.len(),
            counters: run.counters,
            second_order_calls: run.counters.second_order_total(),
            warnings: run.trace.warnings.clone(),
            wall_ms: last.map_or(0.0, |r| r.wall_ms),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn keys_come_out_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: BTreeMap<String, u8>,
            mid: u8,
        }
        let s = S {
            zeta: 1,
            alpha: BTreeMap::from([("b".into(), 1), ("a".into(), 2)]),
            mid: 3,
        };
        let text = to_sorted_json(&s).unwrap();
        let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("alpha") < pos("a") && pos("a") < pos("b") && pos("b") < pos("mid") && pos("mid") < pos("zeta"));
        assert_eq!(text, to_sorted_json(&s).unwrap());
    }

    #[test]
    fn platform_is_nonempty() {
        assert!(platform().contains('-'));
        assert!(!VERSION.is_empty());
    }
}
