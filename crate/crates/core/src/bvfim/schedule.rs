/// How the regularization parameters evolve over outer stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Initial values at every stage.
    Fixed,
    /// `(μ1, μ2, θ, τ) = (μ1⁰, μ2⁰, θ⁰, τ⁰) / decay^k`.
    Geometric,
    /// `(μ1, θ, τ)` geometric, `μ2 = f(x, y) + offset` re-evaluated at every inner iteration.
    AdaptiveMu2,
}

/// Parameters in effect at one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageParams {
    pub mu1: f64,
    /// `None` in adaptive mode, where the solver evaluates it from the current iterate.
    pub mu2: Option<f64>,
    pub theta: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub mu1: f64,
    pub mu2: f64,
    pub theta: f64,
    pub tau: f64,
    pub decay: f64,
    /// Added to `f(x, y)` in adaptive mode.
    pub mu2_offset: f64,
    /// Lower clamp on the adaptive `μ2`, keeping the barrier domain nonempty.
    pub mu2_min: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::geometric()
    }
}

impl Schedule {
    /// `(1, 1, 1, 1) / 1.01^k`.
    pub fn geometric() -> Self {
        Self {
            mode: ScheduleMode::Geometric,
            mu1: 1.0,
            mu2: 1.0,
            theta: 1.0,
            tau: 1.0,
            decay: 1.01,
            mu2_offset: 1.0,
            mu2_min: 1e-12,
        }
    }

    /// `(μ1, θ, τ) = 1/1.01^k` with `μ2 = f(x, y) + offset`.
    pub fn adaptive(offset: f64) -> Self {
        Self {
            mode: ScheduleMode::AdaptiveMu2,
            mu2_offset: offset,
            ..Self::geometric()
        }
    }

    pub fn fixed(mu1: f64, mu2: f64, theta: f64, tau: f64) -> Self {
        Self {
            mode: ScheduleMode::Fixed,
            mu1,
            mu2,
            theta,
            tau,
            ..Self::geometric()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("mu1", self.mu1),
            ("theta", self.theta),
            ("mu2_min", self.mu2_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(format!("tau must be nonnegative and finite, got {}", self.tau));
        }
        if self.mode != ScheduleMode::AdaptiveMu2 && !(self.mu2 > 0.0 && self.mu2.is_finite()) {
            return Err(format!("mu2 must be positive and finite, got {}", self.mu2));
        }
        if self.mode == ScheduleMode::AdaptiveMu2 && !self.mu2_offset.is_finite() {
            return Err("mu2_offset must be finite".into());
        }
        if self.mode != ScheduleMode::Fixed && !(self.decay >= 1.0 && self.decay.is_finite()) {
            return Err(format!("decay must be at least 1, got {}", self.decay));
        }
        Ok(())
    }

    fn factor(&self, k: usize) -> f64 {
        match self.mode {
            ScheduleMode::Fixed => 1.0,
            _ => self.decay.powf(-(k as f64)),
        }
    }

    /// Parameters at stage `k`. Geometric values are floored at the smallest
    /// positive normal float so they stay strictly positive for every `k`.
    pub fn at(&self, k: usize) -> StageParams {
        let c = self.factor(k);
        let pos = |v: f64| if v > 0.0 { (v * c).max(f64::MIN_POSITIVE) } else { 0.0 };
        StageParams {
            mu1: pos(self.mu1),
            mu2: match self.mode {
                ScheduleMode::AdaptiveMu2 => None,
                _ => Some(pos(self.mu2)),
            },
            theta: pos(self.theta),
            tau: pos(self.tau),
        }
    }

    /// Adaptive `μ2` given the lower-level value at the current iterate.
    pub fn adaptive_mu2(&self, lower_value: f64) -> f64 {
        (lower_value + self.mu2_offset).max(self.mu2_min)
    }

    /// `|τ_k ln μ_{k,2}|`; `None` in adaptive mode.
    pub fn contract_residual(&self, k: usize) -> Option<f64> {
        let p = self.at(k);
        p.mu2.map(|mu2| (p.tau * mu2.ln()).abs())
    }
}
