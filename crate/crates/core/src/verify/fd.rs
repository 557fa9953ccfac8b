/// Central differences with step `h · max(1, |x_i|)` per coordinate.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            probe[i] = x[i] + step;
            let plus = f(&probe);
            probe[i] = x[i] - step;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖, 1e-12)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_square_norm() {
        let g = fd_gradient(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]), &[2.0, 0.0], 1e-6);
        assert!((g[0] - 2.0).abs() < 1e-8 && g[1].abs() < 1e-8);
    }

    #[test]
    fn constant() {
        assert_eq!(fd_gradient(|_| 3.0, &[1.0, -4.0, 0.5], 1e-5), vec![0.0; 3]);
    }
}
