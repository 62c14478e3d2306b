//! Closed-form expectations under the linear-Gaussian trial generator.
//!
//! In the placebo arm the stage 1 change is `D = d_placebo * L + e1`, a
//! two-component normal mixture with CDF
//!
//! ```text
//! F_D(d) = (1 - p_L) Phi(d / s) + p_L Phi((d - d_placebo) / s)
//! ```
//!
//! A change-score threshold `c` labels `R = 0` when `D < c`, so
//!
//! ```text
//! q1 = P(L = 1 | R = 0) = p_L Phi((c - d_placebo) / s) / F_D(c)
//! E[theta1] = d_all
//! E[theta2] = d_NR - q1 d_placebo
//! E[theta_w] = d_NR - d_placebo (w p_L + (1 - w) q1)
//! ```
//!
//! The quantile classifier is analysed at the population quantile
//! `F_D^{-1}(p_r)`; simulated trials use the empirical quantile, whose gap to
//! the population value shrinks like `n^{-1/2}`.

use crate::classify::ClassifierSpec;
use crate::error::{Error, Result};
use crate::numeric::normal_cdf;
use crate::trial_model::TrialParams;

/// Residual target for the threshold root-finder.
pub const THRESHOLD_TOLERANCE: f64 = 1e-12;
const MAX_BISECTIONS: usize = 400;

/// CDF of the placebo-arm stage 1 change.
pub fn placebo_change_cdf(params: &TrialParams, d: f64) -> f64 {
    let s = params.sigma_eps;
    (1.0 - params.p_l) * normal_cdf(d / s) + params.p_l * normal_cdf((d - params.delta_placebo) / s)
}

/// Mean of the placebo-arm stage 1 change, `p_L * d_placebo`.
pub fn placebo_change_mean(params: &TrialParams) -> f64 {
    params.p_l * params.delta_placebo
}

/// Population `responder_quantile` quantile of the placebo-arm change.
///
/// Bisection on `[min(0, d_placebo) - 10 s, max(0, d_placebo) + 10 s]`,
/// widened until it brackets the root.
pub fn population_threshold(params: &TrialParams) -> Result<f64> {
    if !(params.sigma_eps > 0.0 && params.sigma_eps.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "sigma_eps",
            reason: "must be positive and finite",
        });
    }
    let p = params.responder_quantile;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter {
            field: "responder_quantile",
            reason: "must lie strictly between 0 and 1",
        });
    }
    let residual = |x: f64| placebo_change_cdf(params, x) - p;

    let width = 10.0 * params.sigma_eps;
    let mut lo = params.delta_placebo.min(0.0) - width;
    let mut hi = params.delta_placebo.max(0.0) + width;
    let mut step = width;
    while residual(lo) > 0.0 {
        lo -= step;
        step *= 2.0;
    }
    step = width;
    while residual(hi) < 0.0 {
        hi += step;
        step *= 2.0;
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        let r = residual(mid);
        if r.abs() <= THRESHOLD_TOLERANCE {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (best, r) = [lo, hi]
        .into_iter()
        .map(|x| (x, residual(x)))
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap_or((lo, f64::INFINITY));
    if r.abs() <= THRESHOLD_TOLERANCE {
        Ok(best)
    } else {
        Err(Error::ThresholdNotConverged { residual: r.abs() })
    }
}

/// Misclassification rates of a change-score threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Misclassification {
    /// `P(L = 1 | R = 0)`
    pub q1: f64,
    /// `P(L = 0 | R = 0)`
    pub npv: f64,
    pub threshold: f64,
}

/// Rates for the rule `R = 1 iff D >= c`.
pub fn misclass_at_threshold(params: &TrialParams, c: f64) -> Misclassification {
    let s = params.sigma_eps;
    let responder_below = params.p_l * normal_cdf((c - params.delta_placebo) / s);
    let below = placebo_change_cdf(params, c);
    // With no mass below the threshold nobody is a classified non-responder;
    // report zero contamination rather than 0/0.
    let q1 = if below > 0.0 {
        (responder_below / below).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Misclassification {
        q1,
        npv: 1.0 - q1,
        threshold: c,
    }
}

/// Rates for the population-quantile classifier.
pub fn misclass_q1(params: &TrialParams) -> Result<Misclassification> {
    let c = population_threshold(params)?;
    Ok(misclass_at_threshold(params, c))
}

/// Expected estimator values for one classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticCell {
    pub q1: f64,
    pub npv: f64,
    pub e_theta1: f64,
    pub e_theta2: f64,
    pub e_theta_w: f64,
    /// Change-score threshold; `None` for the oracle.
    pub threshold_c: Option<f64>,
}

impl AnalyticCell {
    fn from_q1(params: &TrialParams, q1: f64, threshold_c: Option<f64>) -> Self {
        let w = params.weight_w;
        let dp = params.delta_placebo;
        AnalyticCell {
            q1,
            npv: 1.0 - q1,
            e_theta1: params.delta_all(),
            e_theta2: params.delta_nr - q1 * dp,
            e_theta_w: params.delta_nr - dp * (w * params.p_l + (1.0 - w) * q1),
            threshold_c,
        }
    }
}

/// Closed-form expectations for the quantile, fixed change-score and oracle
/// classifiers. Level thresholds have no closed form here.
pub fn expected_estimates(
    params: &TrialParams,
    classifier: ClassifierSpec,
) -> Result<AnalyticCell> {
    classifier.validate()?;
    match classifier {
        ClassifierSpec::Oracle => Ok(AnalyticCell::from_q1(params, 0.0, None)),
        ClassifierSpec::QuantileChange { p_r } => {
            let at_quantile = TrialParams {
                responder_quantile: p_r,
                ..*params
            };
            let m = misclass_q1(&at_quantile)?;
            Ok(AnalyticCell::from_q1(params, m.q1, Some(m.threshold)))
        }
        ClassifierSpec::FixedChange { c } => {
            if !(params.sigma_eps > 0.0) {
                return Err(Error::InvalidParameter {
                    field: "sigma_eps",
                    reason: "must be positive and finite",
                });
            }
            let m = misclass_at_threshold(params, c);
            Ok(AnalyticCell::from_q1(params, m.q1, Some(c)))
        }
        ClassifierSpec::FixedLevel { .. } => Err(Error::UnsupportedClassifier(classifier.name())),
    }
}

/// Which estimand the weighted estimator is unbiased for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// The two estimands coincide and the estimator hits both.
    Both,
    All,
    NonResponders,
    Neither,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Both => "both",
            Target::All => "delta_all",
            Target::NonResponders => "delta_nr",
            Target::Neither => "neither",
        }
    }
}

/// Sufficient conditions for the weighted estimator to be unbiased.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnbiasednessReport {
    pub p_l_zero: bool,
    pub delta_placebo_zero: bool,
    /// Classified label independent of the latent class.
    pub r_independent_of_l: bool,
    pub w_one: bool,
    pub w_zero_and_q1_zero: bool,
    /// `None` when no closed form exists for the classifier.
    pub q1: Option<f64>,
    pub target: Target,
}

pub fn unbiasedness_conditions(
    params: &TrialParams,
    classifier: ClassifierSpec,
    w: f64,
) -> UnbiasednessReport {
    let p_l_zero = params.p_l == 0.0;
    let delta_placebo_zero = params.delta_placebo == 0.0;
    // Threshold rules see L only through d_placebo * L. The oracle copies L,
    // and with p_L = 1 it labels nobody a non-responder, so only p_L = 0
    // leaves its q1 equal to p_L.
    let r_independent_of_l = match classifier {
        ClassifierSpec::Oracle => p_l_zero,
        _ => p_l_zero || params.p_l == 1.0 || delta_placebo_zero,
    };
    let q1 = expected_estimates(
        &TrialParams {
            weight_w: w,
            ..*params
        },
        classifier,
    )
    .ok()
    .map(|cell| cell.q1);
    let w_one = w == 1.0;
    let w_zero_and_q1_zero = w == 0.0 && q1 == Some(0.0);

    let coincide = p_l_zero || delta_placebo_zero;
    let hits_all = coincide || r_independent_of_l || w_one;
    let hits_nr = coincide || w_zero_and_q1_zero;
    let target = match (hits_all, hits_nr) {
        (true, true) => Target::Both,
        (true, false) => Target::All,
        (false, true) => Target::NonResponders,
        (false, false) => Target::Neither,
    };
    UnbiasednessReport {
        p_l_zero,
        delta_placebo_zero,
        r_independent_of_l,
        w_one,
        w_zero_and_q1_zero,
        q1,
        target,
    }
}
