//! Placebo response classification rules.
//!
//! Every rule labels a participant a responder when the observed score is at
//! or above the threshold (`>=`). The same orientation is used by the
//! closed forms in [`crate::analytic`], so simulated and analytic
//! misclassification rates describe the same rule.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::trial_model::TrialDataset;

/// Which observed score a fixed threshold is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `y1 - y0 >= c`
    Change,
    /// `y1 >= c`
    Level,
}

/// A responder classification rule `C_R(y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierSpec {
    FixedChange {
        c: f64,
    },
    FixedLevel {
        c: f64,
    },
    /// Threshold at the empirical `p_r` quantile of the placebo-arm changes.
    QuantileChange {
        p_r: f64,
    },
    /// Reveals the latent class: `R = L`.
    Oracle,
}

impl ClassifierSpec {
    /// Short identifier used in tables and config files.
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::FixedChange { .. } => "fixed_change",
            ClassifierSpec::FixedLevel { .. } => "fixed_level",
            ClassifierSpec::QuantileChange { .. } => "quantile",
            ClassifierSpec::Oracle => "oracle",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassifierSpec::FixedChange { c } | ClassifierSpec::FixedLevel { c } => {
                if !c.is_finite() {
                    return Err(Error::InvalidParameter {
                        field: "c",
                        reason: "threshold must be finite",
                    });
                }
            }
            ClassifierSpec::QuantileChange { p_r } => {
                if !(p_r > 0.0 && p_r < 1.0) {
                    return Err(Error::InvalidParameter {
                        field: "p_r",
                        reason: "must lie strictly between 0 and 1",
                    });
                }
            }
            ClassifierSpec::Oracle => {}
        }
        Ok(())
    }

    /// Labels each placebo-arm participant given `(y0, y1, l)` triples.
    ///
    /// The quantile rule computes its threshold from the whole arm first.
    pub fn classify_arm(&self, arm: &[(f64, f64, bool)]) -> Result<Vec<bool>> {
        let labels = match *self {
            ClassifierSpec::FixedChange { c } => arm
                .iter()
                .map(|&(y0, y1, _)| classify_fixed(y0, y1, c, ThresholdMode::Change))
                .collect(),
            ClassifierSpec::FixedLevel { c } => arm
                .iter()
                .map(|&(y0, y1, _)| classify_fixed(y0, y1, c, ThresholdMode::Level))
                .collect(),
            ClassifierSpec::QuantileChange { p_r } => {
                let changes: Vec<f64> = arm.iter().map(|&(y0, y1, _)| y1 - y0).collect();
                let c = quantile_threshold(&changes, p_r)?;
                changes.iter().map(|&d| d >= c).collect()
            }
            ClassifierSpec::Oracle => arm.iter().map(|&(_, _, l)| oracle_classify(l)).collect(),
        };
        Ok(labels)
    }
}

pub fn classify_fixed(y0: f64, y1: f64, c: f64, mode: ThresholdMode) -> bool {
    match mode {
        ThresholdMode::Change => y1 - y0 >= c,
        ThresholdMode::Level => y1 >= c,
    }
}

/// Empirical `p_r` quantile by linear interpolation between order
/// statistics (Hyndman-Fan type 7, the R and NumPy default):
/// with sorted `x` and `h = (n - 1) p_r`, returns
/// `x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h])`.
pub fn quantile_threshold(placebo_changes: &[f64], p_r: f64) -> Result<f64> {
    if placebo_changes.is_empty() {
        return Err(Error::EmptyQuantileInput);
    }
    if !(0.0..=1.0).contains(&p_r) {
        return Err(Error::InvalidParameter {
            field: "p_r",
            reason: "must lie in [0, 1]",
        });
    }
    let mut sorted = placebo_changes.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p_r;
    let lo = libm::floor(h) as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => Ok(sorted[lo] + frac * (next - sorted[lo])),
        _ => Ok(sorted[lo]),
    }
}

pub fn oracle_classify(l: bool) -> bool {
    l
}

/// Share of classified placebo non-responders who are true non-responders,
/// `P(L = 0 | R = 0)`.
pub fn empirical_npv(dataset: &TrialDataset) -> Result<f64> {
    let (mut negatives, mut true_negatives) = (0usize, 0usize);
    for p in dataset.participants.iter().filter(|p| p.r == Some(false)) {
        negatives += 1;
        if !p.l {
            true_negatives += 1;
        }
    }
    if negatives == 0 {
        return Err(Error::NoNonResponders);
    }
    Ok(true_negatives as f64 / negatives as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn fixed_change_examples() {
        assert!(classify_fixed(0.0, 1.0, 0.5, ThresholdMode::Change));
        assert!(!classify_fixed(0.0, 0.4, 0.5, ThresholdMode::Change));
        assert!(classify_fixed(3.0, 3.5, 0.5, ThresholdMode::Change));
    }

    #[test]
    fn level_mode_ignores_baseline() {
        assert!(classify_fixed(100.0, 0.5, 0.5, ThresholdMode::Level));
        assert!(!classify_fixed(-100.0, 0.49, 0.5, ThresholdMode::Level));
    }

    #[test]
    fn boundary_is_inclusive_on_a_small_enumeration() {
        // Five changes on an exact binary grid so `y1 - y0` is exact; the
        // one sitting on the threshold must be labelled a responder.
        let c = 0.25;
        let arm = [
            (0.0, -0.5),
            (1.0, 1.0),
            (2.0, 2.25),
            (-1.0, -0.5),
            (0.5, 1.5),
        ];
        let labels: Vec<bool> = arm
            .iter()
            .map(|&(y0, y1)| classify_fixed(y0, y1, c, ThresholdMode::Change))
            .collect();
        let brute: Vec<bool> = arm.iter().map(|&(y0, y1)| !(y1 - y0 < c)).collect();
        assert_eq!(labels, brute);
        assert_eq!(labels, vec![false, false, true, true, true]);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile_threshold(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(quantile_threshold(&[5.0], 0.5).unwrap(), 5.0);
        for p in [0.1, 0.5, 0.9] {
            assert_eq!(quantile_threshold(&[0.0; 4], p).unwrap(), 0.0);
        }
        assert_eq!(quantile_threshold(&[4.0, 1.0, 3.0, 2.0], 0.0).unwrap(), 1.0);
        assert_eq!(quantile_threshold(&[4.0, 1.0, 3.0, 2.0], 1.0).unwrap(), 4.0);
        assert_eq!(quantile_threshold(&[], 0.5), Err(Error::EmptyQuantileInput));
    }

    /// Sort-and-interpolate written from the textbook definition: position
    /// `1 + (n - 1) p` in 1-based order statistics.
    fn naive_type7(xs: &[f64], p: f64) -> f64 {
        let mut s = xs.to_vec();
        for i in 0..s.len() {
            for j in 0..s.len() - 1 - i {
                if s[j] > s[j + 1] {
                    s.swap(j, j + 1);
                }
            }
        }
        let pos = 1.0 + (s.len() as f64 - 1.0) * p;
        let k = pos as usize; // 1-based lower order statistic
        if k >= s.len() {
            return s[s.len() - 1];
        }
        s[k - 1] + (pos - k as f64) * (s[k] - s[k - 1])
    }

    proptest::proptest! {
        #[test]
        fn quantile_matches_naive(xs in proptest::collection::vec(-50.0f64..50.0, 1..40),
                                  p in 0.0f64..=1.0) {
            let got = quantile_threshold(&xs, p).unwrap();
            let want = naive_type7(&xs, p);
            proptest::prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }

        #[test]
        fn raising_threshold_never_creates_responders(y0 in -10.0f64..10.0, y1 in -10.0f64..10.0,
                                                       c in -20.0f64..20.0, dc in 0.0f64..5.0) {
            let low = classify_fixed(y0, y1, c, ThresholdMode::Change);
            let high = classify_fixed(y0, y1, c + dc, ThresholdMode::Change);
            proptest::prop_assert!(low || !high);
        }
    }

    #[test]
    fn oracle_is_identity() {
        assert!(!oracle_classify(false));
        assert!(oracle_classify(true));
    }

    #[test]
    fn quantile_arm_classification_uses_ge() {
        let arm = [(0.0, 1.0, false), (0.0, 2.0, true), (0.0, 3.0, true)];
        let labels = ClassifierSpec::QuantileChange { p_r: 0.5 }
            .classify_arm(&arm)
            .unwrap();
        assert_eq!(labels, vec![false, true, true]);
    }
}
