use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Precision, recall and F1 of corrupted-sample detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores the rule "sample `i` is corrupted iff `x_i <= 0`" against `mask`.
///
/// An empty prediction set scores 0 unless there was nothing to find, in
/// which case all three scores are 1.
pub fn detection_f1<T: Scalar>(x: &[T], mask: &[bool]) -> Result<DetectionScores> {
    if x.len() != mask.len() {
        return Err(Error::Dimension(format!(
            "weights have length {} but mask has length {}",
            x.len(),
            mask.len()
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&xi, &dirty) in x.iter().zip(mask) {
        match (xi <= T::zero(), dirty) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp == 0 {
        let perfect = fneg == 0;
        let v = if perfect { 1.0 } else { 0.0 };
        return Ok(DetectionScores {
            precision: v,
            recall: v,
            f1: v,
        });
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = if tp + fneg == 0 { 1.0 } else { tp as f64 / (tp + fneg) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(DetectionScores { precision, recall, f1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_detection() {
        let mask = [true, false, true, false];
        let x: Vec<f64> = mask.iter().map(|&m| if m { -1.0 } else { 1.0 }).collect();
        let s = detection_f1(&x, &mask).unwrap();
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn nothing_predicted() {
        let s = detection_f1(&[1.0f64; 4], &[true, true, false, false]).unwrap();
        assert_eq!((s.recall, s.f1), (0.0, 0.0));
    }

    #[test]
    fn zero_counts_as_dirty() {
        let s = detection_f1(&[0.0f64, 1.0], &[true, false]).unwrap();
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(detection_f1(&[0.0f64], &[true, false]).is_err());
    }
}
