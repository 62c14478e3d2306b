//! Two-component, equal-variance normal mixture fitted by EM.
//!
//! Used to recover the placebo-arm latent class structure from stage 1
//! change scores: `p_hat` estimates the responder prevalence, `mu0` and
//! `mu1` the non-responder and responder means. The upper component is the
//! responder class (`mu0 <= mu1` after fitting).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, FRAC_1_SQRT_2PI};

/// Floor on the component SD; reaching it is reported as a collapse.
pub const SIGMA_FLOOR: f64 = 1e-8;
pub const MIN_OBSERVATIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Stop once the log-likelihood gains less than this in one iteration.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitSpec {
    /// Split the sorted data at the median: component means are the half
    /// means, `p = 0.5`, and the SD is the pooled within-half SD.
    #[default]
    MedianSplit,
    Explicit {
        p: f64,
        mu0: f64,
        mu1: f64,
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit {
    /// Weight of the upper (responder) component.
    pub p_hat: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub sigma_hat: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood at the starting values followed by one entry per
    /// iteration.
    pub loglik_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Params {
    p: f64,
    mu0: f64,
    mu1: f64,
    sigma: f64,
}

fn ln_normal(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    libm::log(FRAC_1_SQRT_2PI) - libm::log(sigma) - 0.5 * z * z
}

/// `(log density of x, P(upper | x))`
fn mixture_terms(x: f64, th: &Params) -> (f64, f64) {
    let a = if th.p > 0.0 {
        libm::log(th.p) + ln_normal(x, th.mu1, th.sigma)
    } else {
        f64::NEG_INFINITY
    };
    let b = if th.p < 1.0 {
        libm::log(1.0 - th.p) + ln_normal(x, th.mu0, th.sigma)
    } else {
        f64::NEG_INFINITY
    };
    let m = a.max(b);
    let ea = libm::exp(a - m);
    let eb = libm::exp(b - m);
    (m + libm::log(ea + eb), ea / (ea + eb))
}

fn loglik(data: &[f64], th: &Params) -> f64 {
    compensated_sum(data.iter().map(|&x| mixture_terms(x, th).0))
}

fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

fn median_split(data: &[f64]) -> Result<Params> {
    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let (lower, upper) = sorted.split_at(sorted.len() / 2);
    let (m0, m1) = (mean(lower), mean(upper));
    let within = compensated_sum(
        lower
            .iter()
            .map(|&x| (x - m0) * (x - m0))
            .chain(upper.iter().map(|&x| (x - m1) * (x - m1))),
    );
    let n = sorted.len() as f64;
    let mut sigma = libm::sqrt(within / (n - 2.0));
    if !(sigma >= SIGMA_FLOOR) {
        // Two tight clusters: fall back to the overall SD.
        let m = mean(&sorted);
        let total = compensated_sum(sorted.iter().map(|&x| (x - m) * (x - m)));
        sigma = libm::sqrt(total / (n - 1.0));
    }
    if !(sigma >= SIGMA_FLOOR) {
        return Err(Error::DegenerateFit { floor: SIGMA_FLOOR });
    }
    Ok(Params {
        p: 0.5,
        mu0: m0,
        mu1: m1,
        sigma,
    })
}

fn em_step(data: &[f64], th: &Params) -> Params {
    let resp: Vec<f64> = data.iter().map(|&x| mixture_terms(x, th).1).collect();
    let n = data.len() as f64;
    let w1 = compensated_sum(resp.iter().copied());
    let w0 = n - w1;
    let mu1 = if w1 > 0.0 {
        compensated_sum(resp.iter().zip(data).map(|(&g, &x)| g * x)) / w1
    } else {
        th.mu1
    };
    let mu0 = if w0 > 0.0 {
        compensated_sum(resp.iter().zip(data).map(|(&g, &x)| (1.0 - g) * x)) / w0
    } else {
        th.mu0
    };
    let ss = compensated_sum(
        resp.iter()
            .zip(data)
            .map(|(&g, &x)| g * (x - mu1) * (x - mu1) + (1.0 - g) * (x - mu0) * (x - mu0)),
    );
    Params {
        p: w1 / n,
        mu0,
        mu1,
        sigma: libm::sqrt(ss / n),
    }
}

/// Fits the mixture to `changes`.
///
/// Runs at least one M-step, so the returned weights and means satisfy
/// `p_hat * mu1 + (1 - p_hat) * mu0 == mean(changes)` up to rounding.
pub fn em_fit(changes: &[f64], init: InitSpec, options: EmOptions) -> Result<MixtureFit> {
    if changes.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData {
            needed: MIN_OBSERVATIONS,
            got: changes.len(),
        });
    }
    if !(options.tol > 0.0 && options.tol.is_finite()) {
        return Err(Error::InvalidTolerance);
    }
    let mut th = match init {
        InitSpec::MedianSplit => median_split(changes)?,
        InitSpec::Explicit { p, mu0, mu1, sigma } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter {
                    field: "p",
                    reason: "initial weight must lie in [0, 1]",
                });
            }
            if !(sigma >= SIGMA_FLOOR && sigma.is_finite()) {
                return Err(Error::InvalidParameter {
                    field: "sigma",
                    reason: "initial sd must be positive and finite",
                });
            }
            Params { p, mu0, mu1, sigma }
        }
    };

    let mut ll = loglik(changes, &th);
    let mut trace = alloc::vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter.max(1) {
        let next = em_step(changes, &th);
        iterations += 1;
        if !(next.sigma >= SIGMA_FLOOR) {
            return Err(Error::DegenerateFit { floor: SIGMA_FLOOR });
        }
        let next_ll = loglik(changes, &next);
        trace.push(next_ll);
        let gain = next_ll - ll;
        th = next;
        ll = next_ll;
        if gain < options.tol {
            converged = true;
            break;
        }
    }

    if th.mu0 > th.mu1 {
        th = Params {
            p: 1.0 - th.p,
            mu0: th.mu1,
            mu1: th.mu0,
            sigma: th.sigma,
        };
    }
    Ok(MixtureFit {
        p_hat: th.p,
        mu0: th.mu0,
        mu1: th.mu1,
        sigma_hat: th.sigma,
        loglik: ll,
        iterations,
        converged,
        loglik_trace: trace,
    })
}

/// Posterior probability of the responder component given a change `d`.
pub fn posterior_responsibility(fit: &MixtureFit, d: f64) -> f64 {
    let th = Params {
        p: fit.p_hat,
        mu0: fit.mu0,
        mu1: fit.mu1,
        sigma: fit.sigma_hat,
    };
    mixture_terms(d, &th).1
}

/// Separation below this many SDs counts as weakly identified. An
/// equal-weight, equal-variance mixture is unimodal up to a separation of 2.
pub const MIN_SEPARATION: f64 = 2.0;
/// Weights outside `[MIN_WEIGHT, 1 - MIN_WEIGHT]` count as weakly identified.
pub const MIN_WEIGHT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifiabilityReport {
    /// `(mu1 - mu0) / sigma_hat`
    pub separation: f64,
    /// `min(p_hat, 1 - p_hat)`
    pub boundary_distance: f64,
    pub weak: bool,
}

pub fn identifiability_diagnostics(fit: &MixtureFit) -> IdentifiabilityReport {
    let separation = (fit.mu1 - fit.mu0) / fit.sigma_hat;
    let boundary_distance = fit.p_hat.min(1.0 - fit.p_hat);
    IdentifiabilityReport {
        separation,
        boundary_distance,
        weak: !(separation >= MIN_SEPARATION) || boundary_distance < MIN_WEIGHT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_of(p_hat: f64, mu0: f64, mu1: f64, sigma_hat: f64) -> MixtureFit {
        MixtureFit {
            p_hat,
            mu0,
            mu1,
            sigma_hat,
            loglik: 0.0,
            iterations: 0,
            converged: true,
            loglik_trace: Vec::new(),
        }
    }

    #[test]
    fn too_few_points() {
        assert_eq!(
            em_fit(
                &[1.0, 2.0, 3.0],
                InitSpec::MedianSplit,
                EmOptions::default()
            ),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        );
    }

    #[test]
    fn constant_data_is_degenerate() {
        assert_eq!(
            em_fit(&[2.5; 50], InitSpec::MedianSplit, EmOptions::default()),
            Err(Error::DegenerateFit { floor: SIGMA_FLOOR })
        );
    }

    #[test]
    fn two_point_clusters_collapse() {
        let data: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { 0.0 } else { 1.0 })
            .collect();
        assert_eq!(
            em_fit(&data, InitSpec::MedianSplit, EmOptions::default()),
            Err(Error::DegenerateFit { floor: SIGMA_FLOOR })
        );
    }

    #[test]
    fn bad_tolerance() {
        let opts = EmOptions {
            tol: 0.0,
            max_iter: 10,
        };
        assert_eq!(
            em_fit(&[0.0, 1.0, 2.0, 3.0], InitSpec::MedianSplit, opts),
            Err(Error::InvalidTolerance)
        );
    }

    #[test]
    fn responsibility_symmetry_and_tails() {
        let f = fit_of(0.5, -1.0, 3.0, 0.8);
        assert!((posterior_responsibility(&f, 1.0) - 0.5).abs() < 1e-15);
        assert!(posterior_responsibility(&f, 1e6) > 1.0 - 1e-15);
        assert!(posterior_responsibility(&f, -1e6) < 1e-15);
    }

    #[test]
    fn responsibility_matches_density_ratio() {
        let f = fit_of(0.37, 0.02, 0.97, 0.26);
        let phi = |z: f64| libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI);
        for d in [-0.4, 0.0, 0.3, 0.5, 1.2] {
            let up = f.p_hat * phi((d - f.mu1) / f.sigma_hat);
            let down = (1.0 - f.p_hat) * phi((d - f.mu0) / f.sigma_hat);
            let want = up / (up + down);
            assert!((posterior_responsibility(&f, d) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn diagnostics_rule() {
        let r = identifiability_diagnostics(&fit_of(0.5, 0.0, 4.0, 1.0));
        assert_eq!(r.separation, 4.0);
        assert!(!r.weak);
        assert!(identifiability_diagnostics(&fit_of(0.5, 0.0, 0.2, 1.0)).weak);
        assert!(identifiability_diagnostics(&fit_of(0.5, 0.0, 1.4, 1.0)).weak);
        assert!(identifiability_diagnostics(&fit_of(0.02, 0.0, 4.0, 1.0)).weak);
        assert!(identifiability_diagnostics(&fit_of(0.97, 0.0, 4.0, 1.0)).weak);
    }
}
