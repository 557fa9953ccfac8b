use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamMoments<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            m: vec![T::zero(); dim],
            v: vec![T::zero(); dim],
        }
    }
}

/// Bias-corrected Adam: updates the moments with `g` and returns the step to
/// add to `x`. `t` is the 1-based update count.
pub fn adam_step<T: Scalar>(moments: &mut AdamMoments<T>, g: &[T], alpha: T, params: AdamParams, t: u64) -> Vec<T> {
    assert!(t >= 1, "Adam step count starts at 1");
    let b1 = T::lit(params.beta1);
    let b2 = T::lit(params.beta2);
    let eps = T::lit(params.eps);
    let tt = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = T::one() - b1.powi(tt);
    let c2 = T::one() - b2.powi(tt);
    moments
        .m
        .iter_mut()
        .zip(moments.v.iter_mut())
        .zip(g)
        .map(|((m, v), &gi)| {
            *m = b1 * *m + (T::one() - b1) * gi;
            *v = b2 * *v + (T::one() - b2) * gi * gi;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            -alpha * m_hat / (v_hat.sqrt() + eps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_gives_zero_step() {
        let mut mo = AdamMoments::<f64>::zeros(2);
        for t in 1..10 {
            assert_eq!(adam_step(&mut mo, &[0.0, 0.0], 0.1, AdamParams::default(), t), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn first_step_is_sign_times_alpha() {
        let mut mo = AdamMoments::<f64>::zeros(2);
        let d = adam_step(&mut mo, &[3.0, -0.5], 0.01, AdamParams::default(), 1);
        assert!((d[0] + 0.01).abs() < 1e-9);
        assert!((d[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn constant_gradient_step_tends_to_alpha() {
        let mut mo = AdamMoments::<f64>::zeros(1);
        let mut d = vec![];
        for t in 1..=100 {
            d = adam_step(&mut mo, &[0.7], 0.01, AdamParams::default(), t);
        }
        assert!((d[0] + 0.01).abs() < 1e-9);
    }
}
