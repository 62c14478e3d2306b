//! Replicate loops and bias aggregation.
//!
//! A cell is one `(d_placebo, sigma_eps, classifier)` combination. Replicate
//! `r` of a cell uses seed `derive_seed(cell_seed, r)` and the cell seed is
//! `derive_seed(master_seed, k)` where `k` indexes the `(d_placebo,
//! sigma_eps)` coordinate. Classifiers at the same coordinate therefore see
//! the same simulated stage 1 data, which makes oracle and threshold
//! summaries paired comparisons.
//!
//! Replicates whose stage 2 arms come out empty are skipped and counted.
//! Aggregation runs over replicates in index order with compensated
//! summation, so any executor that returns outcomes in replicate order
//! reproduces [`run_cell`] bit for bit.

use alloc::vec::Vec;

use crate::analytic::{expected_estimates, AnalyticCell};
use crate::classify::{empirical_npv, ClassifierSpec};
use crate::error::{Error, Result};
use crate::estimators::estimate;
use crate::numeric::mean_and_se;
use crate::rng::derive_seed;
use crate::trial_model::{simulate_trial, TrialParams};

/// Share of skipped replicates above which a cell is flagged.
pub const SKIP_FLAG_FRACTION: f64 = 0.01;

/// Estimates from one replicate trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub theta1: f64,
    pub theta2: f64,
    pub theta_w: f64,
    pub npv: f64,
}

/// Simulates and estimates one replicate.
///
/// `Ok(None)` means the replicate is skipped because classification left a
/// stage 2 arm empty. Errors are parameter problems that would hit every
/// replicate alike.
pub fn run_replicate(
    params: &TrialParams,
    classifier: ClassifierSpec,
    seed: u64,
) -> Result<Option<ReplicateOutcome>> {
    let dataset = simulate_trial(params, seed, classifier)?;
    let npv = match empirical_npv(&dataset) {
        Ok(v) => v,
        Err(Error::NoNonResponders) => return Ok(None),
        Err(e) => return Err(e),
    };
    match estimate(&dataset, params.weight_w) {
        Ok(e) => Ok(Some(ReplicateOutcome {
            theta1: e.theta1,
            theta2: e.theta2,
            theta_w: e.theta_w,
            npv,
        })),
        Err(Error::EmptyStage2Arm { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn replicate_seed(cell_seed: u64, replicate: usize) -> u64 {
    derive_seed(cell_seed, replicate as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Estimator {
    Theta1,
    Theta2,
    ThetaW,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Theta1, Estimator::Theta2, Estimator::ThetaW];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Theta1 => "theta1",
            Estimator::Theta2 => "theta2",
            Estimator::ThetaW => "theta_w",
        }
    }

    fn pick(&self, o: &ReplicateOutcome) -> f64 {
        match self {
            Estimator::Theta1 => o.theta1,
            Estimator::Theta2 => o.theta2,
            Estimator::ThetaW => o.theta_w,
        }
    }
}

/// Monte Carlo mean of one estimator and its bias against both estimands.
/// Every field is `None` when no replicate was usable; `se` is also `None`
/// with a single usable replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSummary {
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub bias_all: Option<f64>,
    pub bias_nr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub delta_placebo: f64,
    pub sigma_eps: f64,
    pub classifier: ClassifierSpec,
    pub delta_all: f64,
    pub delta_nr: f64,
    pub n_reps: usize,
    pub skipped: usize,
    pub theta1: EstimatorSummary,
    pub theta2: EstimatorSummary,
    pub theta_w: EstimatorSummary,
    pub npv_mean: Option<f64>,
    pub npv_se: Option<f64>,
    /// Closed-form values, when the classifier has them.
    pub analytic: Option<AnalyticCell>,
}

impl CellSummary {
    pub fn used(&self) -> usize {
        self.n_reps - self.skipped
    }

    /// More than 1% of replicates skipped.
    pub fn flagged(&self) -> bool {
        self.skipped as f64 > SKIP_FLAG_FRACTION * self.n_reps as f64
    }

    pub fn estimator(&self, which: Estimator) -> &EstimatorSummary {
        match which {
            Estimator::Theta1 => &self.theta1,
            Estimator::Theta2 => &self.theta2,
            Estimator::ThetaW => &self.theta_w,
        }
    }

    pub fn analytic_expectation(&self, which: Estimator) -> Option<f64> {
        self.analytic.map(|a| match which {
            Estimator::Theta1 => a.e_theta1,
            Estimator::Theta2 => a.e_theta2,
            Estimator::ThetaW => a.e_theta_w,
        })
    }
}

/// Aggregates replicate outcomes, given in replicate order (`None` =
/// skipped).
pub fn summarize_cell(
    params: &TrialParams,
    classifier: ClassifierSpec,
    outcomes: &[Option<ReplicateOutcome>],
) -> CellSummary {
    let used: Vec<ReplicateOutcome> = outcomes.iter().flatten().copied().collect();
    let delta_all = params.delta_all();
    let delta_nr = params.delta_nr;
    let summarize = |which: Estimator| {
        let values: Vec<f64> = used.iter().map(|o| which.pick(o)).collect();
        let (mean, se) = mean_and_se(&values);
        EstimatorSummary {
            mean,
            se,
            bias_all: mean.map(|m| m - delta_all),
            bias_nr: mean.map(|m| m - delta_nr),
        }
    };
    let npvs: Vec<f64> = used.iter().map(|o| o.npv).collect();
    let (npv_mean, npv_se) = mean_and_se(&npvs);
    CellSummary {
        delta_placebo: params.delta_placebo,
        sigma_eps: params.sigma_eps,
        classifier,
        delta_all,
        delta_nr,
        n_reps: outcomes.len(),
        skipped: outcomes.len() - used.len(),
        theta1: summarize(Estimator::Theta1),
        theta2: summarize(Estimator::Theta2),
        theta_w: summarize(Estimator::ThetaW),
        npv_mean,
        npv_se,
        analytic: expected_estimates(params, classifier).ok(),
    }
}

/// Runs `n_reps` replicates of one cell sequentially.
pub fn run_cell(
    params: &TrialParams,
    classifier: ClassifierSpec,
    n_reps: usize,
    cell_seed: u64,
) -> Result<CellSummary> {
    if n_reps == 0 {
        return Err(Error::EmptyGrid("replicates"));
    }
    params.validate()?;
    classifier.validate()?;
    let outcomes = (0..n_reps)
        .map(|r| run_replicate(params, classifier, replicate_seed(cell_seed, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_cell(params, classifier, &outcomes))
}

/// A simulation grid over placebo effect and residual SD with the overall
/// effect held fixed; `d_NR = delta_all + p_L * d_placebo` in every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Supplies `n`, `p_L`, allocation fractions and `w`; its `delta_nr`,
    /// `delta_placebo` and `sigma_eps` are replaced per cell.
    pub base: TrialParams,
    pub delta_all: f64,
    pub delta_placebo_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub n_reps: usize,
    pub master_seed: u64,
    pub classifiers: Vec<ClassifierSpec>,
}

/// One cell ready to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTask {
    pub params: TrialParams,
    pub classifier: ClassifierSpec,
    pub cell_seed: u64,
    pub n_reps: usize,
}

impl GridSpec {
    /// Quantile and oracle classifiers at the base parameters' quantile.
    pub fn default_classifiers(base: &TrialParams) -> Vec<ClassifierSpec> {
        alloc::vec![
            ClassifierSpec::QuantileChange {
                p_r: base.responder_quantile
            },
            ClassifierSpec::Oracle,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::EmptyGrid("replicates"));
        }
        if self.delta_placebo_values.is_empty() {
            return Err(Error::EmptyGrid("delta_placebo values"));
        }
        if self.sigma_values.is_empty() {
            return Err(Error::EmptyGrid("sigma values"));
        }
        if self.classifiers.is_empty() {
            return Err(Error::EmptyGrid("classifiers"));
        }
        if !self.delta_all.is_finite() {
            return Err(Error::InvalidParameter {
                field: "delta_all",
                reason: "must be finite",
            });
        }
        for c in &self.classifiers {
            c.validate()?;
        }
        for task in self.coordinate_params() {
            task.1.validate()?;
        }
        Ok(())
    }

    fn coordinate_params(&self) -> impl Iterator<Item = (usize, TrialParams)> + '_ {
        self.delta_placebo_values
            .iter()
            .flat_map(move |&dp| self.sigma_values.iter().map(move |&s| (dp, s)))
            .enumerate()
            .map(move |(k, (dp, s))| {
                (
                    k,
                    TrialParams {
                        delta_placebo: dp,
                        sigma_eps: s,
                        delta_nr: self.delta_all + self.base.p_l * dp,
                        ..self.base
                    },
                )
            })
    }

    /// Every cell, sorted by `(d_placebo, sigma_eps, classifier name)`.
    pub fn cells(&self) -> Vec<CellTask> {
        let mut tasks: Vec<CellTask> = self
            .coordinate_params()
            .flat_map(|(k, params)| {
                let cell_seed = derive_seed(self.master_seed, k as u64);
                self.classifiers.iter().map(move |&classifier| CellTask {
                    params,
                    classifier,
                    cell_seed,
                    n_reps: self.n_reps,
                })
            })
            .collect();
        tasks.sort_by(|a, b| {
            a.params
                .delta_placebo
                .total_cmp(&b.params.delta_placebo)
                .then(a.params.sigma_eps.total_cmp(&b.params.sigma_eps))
                .then(a.classifier.name().cmp(b.classifier.name()))
        });
        tasks
    }
}

/// Runs every cell sequentially.
pub fn run_grid(spec: &GridSpec) -> Result<Vec<CellSummary>> {
    spec.validate()?;
    spec.cells()
        .iter()
        .map(|t| run_cell(&t.params, t.classifier, t.n_reps, t.cell_seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        let base = TrialParams {
            n: 60,
            ..TrialParams::default()
        };
        GridSpec {
            base,
            delta_all: 0.0,
            delta_placebo_values: alloc::vec![1.0, 0.0],
            sigma_values: alloc::vec![2.0, 0.1],
            n_reps: 5,
            master_seed: 99,
            classifiers: GridSpec::default_classifiers(&base),
        }
    }

    #[test]
    fn cells_are_sorted_and_complete() {
        let cells = spec().cells();
        assert_eq!(cells.len(), 8);
        let coords: Vec<(f64, f64, &str)> = cells
            .iter()
            .map(|c| {
                (
                    c.params.delta_placebo,
                    c.params.sigma_eps,
                    c.classifier.name(),
                )
            })
            .collect();
        assert_eq!(coords[0], (0.0, 0.1, "oracle"));
        assert_eq!(coords[1], (0.0, 0.1, "quantile"));
        assert_eq!(coords[7], (1.0, 2.0, "quantile"));
        for c in &cells {
            assert_eq!(c.params.delta_nr, 0.5 * c.params.delta_placebo);
        }
        // Classifiers at one coordinate share the cell seed.
        assert_eq!(cells[0].cell_seed, cells[1].cell_seed);
        assert_ne!(cells[1].cell_seed, cells[2].cell_seed);
    }

    #[test]
    fn single_replicate_has_no_se() {
        let p = TrialParams::default();
        let s = run_cell(&p, ClassifierSpec::Oracle, 1, 3).unwrap();
        assert!(s.theta1.mean.is_some());
        assert_eq!(s.theta1.se, None);
        assert_eq!(s.npv_se, None);
    }

    #[test]
    fn skipped_replicates_are_counted() {
        // Everyone is a responder under a hugely negative fixed threshold, so
        // no replicate reaches stage 2.
        let p = TrialParams::default();
        let s = run_cell(&p, ClassifierSpec::FixedChange { c: -1e9 }, 4, 1).unwrap();
        assert_eq!(s.skipped, 4);
        assert_eq!(s.used(), 0);
        assert!(s.flagged());
        assert_eq!(s.theta2.mean, None);
        assert_eq!(s.analytic.map(|a| a.q1), Some(0.0));
    }

    #[test]
    fn weighted_mean_is_affine_in_component_means() {
        let p = TrialParams::default();
        let s = run_cell(&p, ClassifierSpec::QuantileChange { p_r: 0.5 }, 50, 8).unwrap();
        let w = p.weight_w;
        let affine = w * s.theta1.mean.unwrap() + (1.0 - w) * s.theta2.mean.unwrap();
        assert!((s.theta_w.mean.unwrap() - affine).abs() < 1e-12);
        assert_eq!(s.skipped + s.used(), s.n_reps);
        assert!(s.theta1.se.unwrap() > 0.0);
    }

    #[test]
    fn aggregation_is_order_insensitive() {
        let p = TrialParams::default();
        let c = ClassifierSpec::QuantileChange { p_r: 0.5 };
        let mut outcomes: Vec<_> = (0..200)
            .map(|r| run_replicate(&p, c, replicate_seed(5, r)).unwrap())
            .collect();
        let a = summarize_cell(&p, c, &outcomes);
        outcomes.reverse();
        let b = summarize_cell(&p, c, &outcomes);
        for e in Estimator::ALL {
            let (x, y) = (a.estimator(e), b.estimator(e));
            assert!((x.mean.unwrap() - y.mean.unwrap()).abs() <= 1e-12);
            assert!((x.se.unwrap() - y.se.unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn grid_rejects_empty_lists() {
        let mut s = spec();
        s.sigma_values.clear();
        assert_eq!(run_grid(&s), Err(Error::EmptyGrid("sigma values")));
        let mut s = spec();
        s.n_reps = 0;
        assert_eq!(s.validate(), Err(Error::EmptyGrid("replicates")));
    }

    #[test]
    fn grid_runs_deterministically() {
        let a = run_grid(&spec()).unwrap();
        let b = run_grid(&spec()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
    }
}
