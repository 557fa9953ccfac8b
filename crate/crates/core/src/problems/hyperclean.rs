//! Synthetic data hyper-cleaning: learn per-sample weights `σ(x_i)` on a
//! training set with corrupted labels so that a classifier trained on the
//! weighted loss does well on a clean validation set.

use std::fmt;

use super::rng::SeededRng;
use super::Problem;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// `logits = W [u; 1]`, convex in the weights.
    Linear,
    /// `logits = W2 [W1 u; 1]`, non-convex in `(W1, W2)`.
    TwoLayerLinear { hidden: usize },
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Linear => write!(f, "linear"),
            Architecture::TwoLayerLinear { .. } => write!(f, "two-layer-linear"),
        }
    }
}

/// How per-sample losses are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    /// Divide by the split size; keeps gradient scale independent of the sample count.
    Mean,
}

/// Generation parameters. Defaults are the desk-scale configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCleanSpec {
    pub d: usize,
    pub classes: usize,
    pub n_tr: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub arch: Architecture,
    /// Distance between any two class means.
    pub separation: f64,
    pub reduction: Reduction,
    pub seed: u64,
}

impl Default for HyperCleanSpec {
    fn default() -> Self {
        Self {
            d: 20,
            classes: 3,
            n_tr: 300,
            n_val: 300,
            n_test: 600,
            arch: Architecture::TwoLayerLinear { hidden: 16 },
            separation: 3.0,
            reduction: Reduction::Mean,
            seed: 0,
        }
    }
}

/// Row-major features with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet<T> {
    pub d: usize,
    pub features: Vec<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> LabeledSet<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        &self.features[i * self.d..(i + 1) * self.d]
    }
}

/// `f(x, y) = Σ σ(x_i) CE(y, u_i, v_i)` over the training split and
/// `F(x, y) = Σ CE(y, u_i, v_i)` over validation, each divided by the split
/// size under [`Reduction::Mean`].
///
/// `x` has one entry per training sample; `y` packs the classifier weights
/// (for two-layer: `W1` (h×d) then `W2` (C×(h+1)); for linear: `W` (C×(d+1))).
#[derive(Debug, Clone)]
pub struct HyperClean<T> {
    spec: HyperCleanSpec,
    train: LabeledSet<T>,
    clean_train_labels: Vec<usize>,
    corrupted: Vec<bool>,
    val: LabeledSet<T>,
    test: LabeledSet<T>,
}

fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> HyperClean<T> {
    /// Generates the three splits from `spec.seed`.
    ///
    /// Class `c` has mean `(separation/√2) e_c`; samples are `mean + N(0, I)`.
    /// Split `s` assigns label `i mod C` to sample `i` (class balanced) and is
    /// drawn in the order train, validation, test. Exactly `⌊n_tr/2⌋` training
    /// labels, chosen by a shuffle, are replaced by a uniformly drawn different label.
    pub fn generate(spec: HyperCleanSpec) -> Result<Self> {
        if spec.classes < 2 {
            return Err(Error::InvalidConfig("hyper-cleaning needs at least 2 classes".into()));
        }
        if spec.d == 0 || spec.n_tr == 0 || spec.n_val == 0 || spec.n_test == 0 {
            return Err(Error::InvalidConfig("hyper-cleaning sizes must be positive".into()));
        }
        if spec.classes > spec.d {
            return Err(Error::InvalidConfig(format!(
                "classes ({}) must not exceed the feature dimension ({})",
                spec.classes, spec.d
            )));
        }
        if let Architecture::TwoLayerLinear { hidden: 0 } = spec.arch {
            return Err(Error::InvalidConfig("hidden width must be positive".into()));
        }
        let mut rng = SeededRng::new(spec.seed);
        let offset = spec.separation / std::f64::consts::SQRT_2;
        let mut draw = |n: usize| {
            let mut features = Vec::with_capacity(n * spec.d);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let label = i % spec.classes;
                for j in 0..spec.d {
                    let mean = if j == label { offset } else { 0.0 };
                    features.push(T::lit(mean + rng.normal()));
                }
                labels.push(label);
            }
            LabeledSet { d: spec.d, features, labels }
        };
        let mut train = draw(spec.n_tr);
        let val = draw(spec.n_val);
        let test = draw(spec.n_test);

        let clean_train_labels = train.labels.clone();
        let mut order: Vec<usize> = (0..spec.n_tr).collect();
        rng.shuffle(&mut order);
        let mut chosen = order[..spec.n_tr / 2].to_vec();
        chosen.sort_unstable();
        let mut corrupted = vec![false; spec.n_tr];
        for i in chosen {
            let shift = 1 + rng.below(spec.classes as u64 - 1) as usize;
            train.labels[i] = (train.labels[i] + shift) % spec.classes;
            corrupted[i] = true;
        }
        Ok(Self {
            spec,
            train,
            clean_train_labels,
            corrupted,
            val,
            test,
        })
    }

    pub fn spec(&self) -> &HyperCleanSpec {
        &self.spec
    }

    pub fn train(&self) -> &LabeledSet<T> {
        &self.train
    }

    pub fn validation(&self) -> &LabeledSet<T> {
        &self.val
    }

    pub fn test(&self) -> &LabeledSet<T> {
        &self.test
    }

    /// Ground-truth corruption mask; never read by the oracles.
    pub fn corruption_mask(&self) -> &[bool] {
        &self.corrupted
    }

    pub fn clean_train_labels(&self) -> &[usize] {
        &self.clean_train_labels
    }

    fn param_len(&self) -> usize {
        let (d, c) = (self.spec.d, self.spec.classes);
        match self.spec.arch {
            Architecture::Linear => c * (d + 1),
            Architecture::TwoLayerLinear { hidden } => hidden * d + c * (hidden + 1),
        }
    }

    pub fn logits(&self, y: &[T], u: &[T]) -> Vec<T> {
        let (d, c) = (self.spec.d, self.spec.classes);
        match self.spec.arch {
            Architecture::Linear => (0..c)
                .map(|k| {
                    let row = &y[k * (d + 1)..(k + 1) * (d + 1)];
                    row[..d].iter().zip(u).map(|(&w, &ui)| w * ui).sum::<T>() + row[d]
                })
                .collect(),
            Architecture::TwoLayerLinear { hidden } => {
                let h = self.hidden(y, u, hidden);
                let w2 = &y[hidden * d..];
                (0..c)
                    .map(|k| {
                        let row = &w2[k * (hidden + 1)..(k + 1) * (hidden + 1)];
                        row[..hidden].iter().zip(&h).map(|(&w, &hi)| w * hi).sum::<T>() + row[hidden]
                    })
                    .collect()
            }
        }
    }

    fn hidden(&self, y: &[T], u: &[T], hidden: usize) -> Vec<T> {
        let d = self.spec.d;
        (0..hidden)
            .map(|k| y[k * d..(k + 1) * d].iter().zip(u).map(|(&w, &ui)| w * ui).sum())
            .collect()
    }

    /// Cross-entropy of one sample; when `grad` is given, adds `weight * ∇_y CE` to it.
    fn cross_entropy(&self, y: &[T], u: &[T], label: usize, weight: T, grad: Option<&mut [T]>) -> T {
        let logits = self.logits(y, u);
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = logits.iter().map(|&l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        let ce = lse - logits[label];
        if let Some(grad) = grad {
            let (d, c) = (self.spec.d, self.spec.classes);
            let g: Vec<T> = logits
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    let p = (l - lse).exp();
                    weight * if k == label { p - T::one() } else { p }
                })
                .collect();
            match self.spec.arch {
                Architecture::Linear => {
                    for k in 0..c {
                        let row = &mut grad[k * (d + 1)..(k + 1) * (d + 1)];
                        for (r, &ui) in row[..d].iter_mut().zip(u) {
                            *r += g[k] * ui;
                        }
                        row[d] += g[k];
                    }
                }
                Architecture::TwoLayerLinear { hidden } => {
                    let h = self.hidden(y, u, hidden);
                    let w2 = &y[hidden * d..];
                    let (g1, g2) = grad.split_at_mut(hidden * d);
                    let mut dh = vec![T::zero(); hidden];
                    for k in 0..c {
                        let row = &mut g2[k * (hidden + 1)..(k + 1) * (hidden + 1)];
                        let w_row = &w2[k * (hidden + 1)..(k + 1) * (hidden + 1)];
                        for j in 0..hidden {
                            row[j] += g[k] * h[j];
                            dh[j] += w_row[j] * g[k];
                        }
                        row[hidden] += g[k];
                    }
                    for (j, &dhj) in dh.iter().enumerate() {
                        for (r, &ui) in g1[j * d..(j + 1) * d].iter_mut().zip(u) {
                            *r += dhj * ui;
                        }
                    }
                }
            }
        }
        ce
    }

    /// Per-sample training losses `CE(y, u_i, v_i)`.
    pub fn train_losses(&self, y: &[T]) -> Vec<T> {
        (0..self.train.len())
            .map(|i| self.cross_entropy(y, self.train.sample(i), self.train.labels[i], T::zero(), None))
            .collect()
    }

    /// Fraction of `set` classified correctly by weights `y`.
    pub fn accuracy(&self, y: &[T], set: &LabeledSet<T>) -> f64 {
        let correct = (0..set.len())
            .filter(|&i| {
                let logits = self.logits(y, set.sample(i));
                let mut best = 0;
                for (k, &l) in logits.iter().enumerate() {
                    if l > logits[best] {
                        best = k;
                    }
                }
                best == set.labels[i]
            })
            .count();
        correct as f64 / set.len() as f64
    }

    fn scale(&self, n: usize) -> T {
        match self.spec.reduction {
            Reduction::Sum => T::one(),
            Reduction::Mean => T::one() / T::lit(n as f64),
        }
    }

    fn mean_loss(&self, set: &LabeledSet<T>, y: &[T], weights: Option<&[T]>) -> T {
        let total: T = (0..set.len())
            .map(|i| {
                let w = weights.map_or(T::one(), |w| w[i]);
                w * self.cross_entropy(y, set.sample(i), set.labels[i], T::zero(), None)
            })
            .sum();
        total * self.scale(set.len())
    }

    fn mean_loss_grad(&self, set: &LabeledSet<T>, y: &[T], weights: Option<&[T]>) -> Vec<T> {
        let mut grad = vec![T::zero(); y.len()];
        let scale = self.scale(set.len());
        for i in 0..set.len() {
            let w = weights.map_or(T::one(), |w| w[i]) * scale;
            self.cross_entropy(y, set.sample(i), set.labels[i], w, Some(&mut grad));
        }
        grad
    }
}

impl<T: Scalar> Problem<T> for HyperClean<T> {
    fn name(&self) -> String {
        format!(
            "hyperclean(d={},classes={},arch={},seed={})",
            self.spec.d, self.spec.classes, self.spec.arch, self.spec.seed
        )
    }

    fn dim_x(&self) -> usize {
        self.spec.n_tr
    }

    fn dim_y(&self) -> usize {
        self.param_len()
    }

    fn upper(&self, _x: &[T], y: &[T]) -> T {
        self.mean_loss(&self.val, y, None)
    }

    fn lower(&self, x: &[T], y: &[T]) -> T {
        let w: Vec<T> = x.iter().map(|&v| sigmoid(v)).collect();
        self.mean_loss(&self.train, y, Some(&w))
    }

    fn upper_grad_x(&self, x: &[T], _y: &[T]) -> Vec<T> {
        vec![T::zero(); x.len()]
    }

    fn upper_grad_y(&self, _x: &[T], y: &[T]) -> Vec<T> {
        self.mean_loss_grad(&self.val, y, None)
    }

    /// `∂f/∂x_i = σ(x_i)(1 - σ(x_i)) CE_i`, times the reduction scale.
    fn lower_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
        let scale = self.scale(self.train.len());
        self.train_losses(y)
            .into_iter()
            .zip(x)
            .map(|(ce, &xi)| {
                let s = sigmoid(xi);
                s * (T::one() - s) * ce * scale
            })
            .collect()
    }

    fn lower_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
        let w: Vec<T> = x.iter().map(|&v| sigmoid(v)).collect();
        self.mean_loss_grad(&self.train, y, Some(&w))
    }

    /// Zero sample weights' logits; small random weights for the two-layer net
    /// (the all-zero point is a saddle there).
    fn suggested_start(&self, seed: u64) -> (Vec<T>, Vec<T>) {
        let x = vec![T::zero(); self.spec.n_tr];
        let y = match self.spec.arch {
            Architecture::Linear => vec![T::zero(); self.param_len()],
            Architecture::TwoLayerLinear { hidden } => {
                let mut rng = SeededRng::new(seed ^ 0x9e37_79b9_7f4a_7c15);
                let d = self.spec.d;
                let c = self.spec.classes;
                let s1 = 1.0 / (d as f64).sqrt();
                let s2 = 1.0 / ((hidden + 1) as f64).sqrt();
                let mut y: Vec<T> = (0..hidden * d).map(|_| T::lit(rng.normal() * s1)).collect();
                y.extend((0..c * (hidden + 1)).map(|_| T::lit(rng.normal() * s2)));
                y
            }
        };
        (x, y)
    }
}
