//! The conventional SPCD estimators.

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::trial_model::TrialDataset;

/// Estimates and arm sizes for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSet {
    pub theta1: f64,
    pub theta2: f64,
    pub theta_w: f64,
    pub w: f64,
    /// Stage 1 active.
    pub n_a: usize,
    /// Stage 1 placebo.
    pub n_p: usize,
    /// Classified non-responders.
    pub n_nr: usize,
    /// Classified responders.
    pub n_pr: usize,
    /// Non-responders re-randomized to active.
    pub n_pa: usize,
    /// Non-responders re-randomized to placebo.
    pub n_pp: usize,
}

#[derive(Default)]
struct ArmMean {
    sum: CompensatedSum,
    count: usize,
}

impl ArmMean {
    fn push(&mut self, x: f64) {
        self.sum.add(x);
        self.count += 1;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum.value() / self.count as f64)
    }
}

/// Stage 1 difference in mean change `Y1 - Y0`, active minus placebo.
pub fn theta1(dataset: &TrialDataset) -> Result<f64> {
    let (mut active, mut placebo) = (ArmMean::default(), ArmMean::default());
    for p in &dataset.participants {
        if p.a1 {
            active.push(p.stage1_change());
        } else {
            placebo.push(p.stage1_change());
        }
    }
    let n = dataset.participants.len();
    let active = active.mean().ok_or(Error::EmptyArm { arm: "active", n })?;
    let placebo = placebo
        .mean()
        .ok_or(Error::EmptyArm { arm: "placebo", n })?;
    Ok(active - placebo)
}

/// Stage 2 difference in mean change `Y2 - Y1` among the re-randomized
/// classified non-responders, active minus placebo.
pub fn theta2(dataset: &TrialDataset) -> Result<f64> {
    let (mut active, mut placebo) = (ArmMean::default(), ArmMean::default());
    for p in dataset
        .participants
        .iter()
        .filter(|p| p.is_stage2_randomized())
    {
        if p.a2 {
            active.push(p.stage2_change());
        } else {
            placebo.push(p.stage2_change());
        }
    }
    let active = active
        .mean()
        .ok_or(Error::EmptyStage2Arm { arm: "active" })?;
    let placebo = placebo
        .mean()
        .ok_or(Error::EmptyStage2Arm { arm: "placebo" })?;
    Ok(active - placebo)
}

/// `w * theta1 + (1 - w) * theta2`
pub fn theta_weighted(theta1: f64, theta2: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::WeightOutOfRange(w));
    }
    Ok(w * theta1 + (1.0 - w) * theta2)
}

/// All three estimators plus the arm partition, using weight `w`.
pub fn estimate(dataset: &TrialDataset, w: f64) -> Result<EstimateSet> {
    let t1 = theta1(dataset)?;
    let t2 = theta2(dataset)?;
    let tw = theta_weighted(t1, t2, w)?;

    let mut set = EstimateSet {
        theta1: t1,
        theta2: t2,
        theta_w: tw,
        w,
        n_a: 0,
        n_p: 0,
        n_nr: 0,
        n_pr: 0,
        n_pa: 0,
        n_pp: 0,
    };
    for p in &dataset.participants {
        match (p.a1, p.r, p.a2) {
            (true, _, _) => set.n_a += 1,
            (false, Some(true), _) => {
                set.n_p += 1;
                set.n_pr += 1;
            }
            (false, _, a2) => {
                set.n_p += 1;
                set.n_nr += 1;
                if a2 {
                    set.n_pa += 1;
                } else {
                    set.n_pp += 1;
                }
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ClassifierSpec;
    use crate::trial_model::{Participant, TrialParams};
    use alloc::vec::Vec;

    fn row(a1: bool, y0: f64, y1: f64, r: Option<bool>, a2: bool, y2: f64) -> Participant {
        Participant {
            y0,
            l: false,
            a1,
            y1,
            r,
            a2,
            y2,
        }
    }

    fn dataset(participants: Vec<Participant>) -> TrialDataset {
        TrialDataset {
            params: TrialParams::default(),
            seed: 0,
            classifier: ClassifierSpec::Oracle,
            participants,
        }
    }

    #[test]
    fn theta1_four_rows() {
        let d = dataset(alloc::vec![
            row(true, 0.0, 1.0, None, true, 1.0),
            row(true, 1.0, 4.0, None, true, 4.0),
            row(false, 0.0, 0.0, Some(false), false, 0.0),
            row(false, 2.0, 3.0, Some(true), false, 3.0),
        ]);
        assert_eq!(theta1(&d).unwrap(), 1.5);
    }

    #[test]
    fn theta1_identical_changes_is_zero() {
        let d = dataset(alloc::vec![
            row(true, 0.0, 1.0, None, true, 1.0),
            row(false, 3.0, 4.0, Some(false), false, 4.0),
            row(false, -1.0, 0.0, Some(true), false, 0.0),
        ]);
        assert_eq!(theta1(&d).unwrap(), 0.0);
    }

    #[test]
    fn theta2_single_pair() {
        let d = dataset(alloc::vec![
            row(true, 0.0, 1.0, None, true, 1.0),
            row(false, 0.0, 0.0, Some(false), true, 1.0),
            row(false, 0.0, 0.5, Some(false), false, 0.5),
            // Classified responders never enter stage 2.
            row(false, 0.0, 9.0, Some(true), false, 20.0),
        ]);
        assert_eq!(theta2(&d).unwrap(), 1.0);
    }

    #[test]
    fn theta2_empty_arm_is_an_error() {
        let d = dataset(alloc::vec![
            row(true, 0.0, 1.0, None, true, 1.0),
            row(false, 0.0, 0.0, Some(false), false, 1.0),
        ]);
        assert_eq!(theta2(&d), Err(Error::EmptyStage2Arm { arm: "active" }));
    }

    #[test]
    fn theta1_empty_arm_is_an_error() {
        let d = dataset(alloc::vec![row(true, 0.0, 1.0, None, true, 1.0)]);
        assert!(matches!(
            theta1(&d),
            Err(Error::EmptyArm { arm: "placebo", .. })
        ));
    }

    #[test]
    fn weighted_examples() {
        assert_eq!(theta_weighted(2.0, 0.0, 0.5).unwrap(), 1.0);
        assert_eq!(theta_weighted(1.7, -3.2, 1.0).unwrap(), 1.7);
        assert_eq!(theta_weighted(1.7, -3.2, 0.0).unwrap(), -3.2);
        assert_eq!(
            theta_weighted(1.0, 1.0, -0.1),
            Err(Error::WeightOutOfRange(-0.1))
        );
        assert_eq!(
            theta_weighted(1.0, 1.0, 1.1),
            Err(Error::WeightOutOfRange(1.1))
        );
    }

    #[test]
    fn partition_counts_add_up() {
        let params = TrialParams::default();
        let d = crate::trial_model::simulate_trial(
            &params,
            4,
            ClassifierSpec::QuantileChange { p_r: 0.5 },
        )
        .unwrap();
        let e = estimate(&d, params.weight_w).unwrap();
        assert_eq!(e.n_a + e.n_p, params.n);
        assert_eq!(e.n_nr + e.n_pr, e.n_p);
        assert_eq!(e.n_pa + e.n_pp, e.n_nr);
        assert_eq!((e.n_a, e.n_p, e.n_nr, e.n_pa), (100, 200, 100, 50));
        assert!((e.theta_w - (0.5 * e.theta1 + 0.5 * e.theta2)).abs() <= 1e-12);
    }
}
