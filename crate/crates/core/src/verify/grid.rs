use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest grid the brute-force oracles accept.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Regular grid on the box `[lo, hi]`, `points_per_dim` points per axis
/// (endpoints included), indexed row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
    points_per_dim: usize,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points_per_dim: usize) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Dimension(format!(
                "grid bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidConfig("grid needs finite hi > lo on every axis".into()));
        }
        if points_per_dim < 2 {
            return Err(Error::InvalidConfig("grid needs at least 2 points per axis".into()));
        }
        let total = (points_per_dim as f64).powi(lo.len() as i32);
        if total > MAX_GRID_POINTS as f64 {
            return Err(Error::InvalidConfig(format!(
                "grid of {total:.0} points exceeds the limit of {MAX_GRID_POINTS}"
            )));
        }
        Ok(Self { lo, hi, points_per_dim })
    }

    /// Same bounds on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, points_per_dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], points_per_dim)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.points_per_dim - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let mut rest = index;
        for axis in (0..self.dim()).rev() {
            let i = rest % self.points_per_dim;
            rest /= self.points_per_dim;
            out[axis] = self.lo[axis] + i as f64 * self.spacing(axis);
        }
        out
    }

    fn stride(&self, axis: usize) -> usize {
        self.points_per_dim.pow((self.dim() - 1 - axis) as u32)
    }

    fn coord(&self, index: usize, axis: usize) -> usize {
        (index / self.stride(axis)) % self.points_per_dim
    }

    /// Axis neighbours of `index`.
    pub fn neighbors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            let c = self.coord(index, axis);
            let s = self.stride(axis);
            let down = (c > 0).then(|| index - s);
            let up = (c + 1 < self.points_per_dim).then(|| index + s);
            down.into_iter().chain(up)
        })
    }

    /// `f` at every grid point, in index order. Evaluated in parallel.
    pub fn evaluate<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        (0..self.len()).into_par_iter().map(|i| f(&self.point(i))).collect()
    }

    /// Finite points no larger than any finite neighbour and strictly below at least one.
    /// Ascending index order.
    pub fn local_minima(&self, values: &[f64]) -> Vec<usize> {
        (0..values.len())
            .filter(|&i| {
                let v = values[i];
                if !v.is_finite() {
                    return false;
                }
                let mut strict = false;
                for j in self.neighbors(i) {
                    let w = values[j];
                    if w < v {
                        return false;
                    }
                    if w > v || !w.is_finite() {
                        strict = true;
                    }
                }
                strict
            })
            .collect()
    }

    /// Largest `|Δvalue| / spacing` between finite axis neighbours.
    pub fn max_slope(&self, values: &[f64]) -> f64 {
        let mut best = 0.0f64;
        for axis in 0..self.dim() {
            let s = self.stride(axis);
            let h = self.spacing(axis);
            for i in 0..values.len() {
                if self.coord(i, axis) + 1 < self.points_per_dim {
                    let (a, b) = (values[i], values[i + s]);
                    if a.is_finite() && b.is_finite() {
                        best = best.max((a - b).abs() / h);
                    }
                }
            }
        }
        best
    }
}

/// First index of the minimum finite value (ties resolved by lowest index).
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.map_or(true, |b| v < values[b]) {
            best = Some(i);
        }
    }
    best
}
