//! Trial parameters, target estimands and the linear-Gaussian trial
//! generator.
//!
//! For participant `i` with baseline `Y0 ~ N(0, s^2)` and latent placebo
//! responder class `L ~ Bernoulli(p_L)`:
//!
//! ```text
//! Y1 = Y0 + d_NR * A1 + d_placebo * L * (1 - A1) + e1
//! Y2 = Y1 + d_NR * A2 + d_placebo * L * (1 - A2) + e2
//! ```
//!
//! with `e1, e2 ~ N(0, s^2)`. Stage 1 allocation is an exact-count random
//! split; stage 2 re-randomizes the placebo participants classified as
//! non-responders, while everyone else continues on their stage 1 arm.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::classify::ClassifierSpec;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Generative parameters of a simulated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    /// Treatment effect among placebo non-responders.
    pub delta_nr: f64,
    /// Mean placebo-arm outcome gap between latent responders and
    /// non-responders.
    pub delta_placebo: f64,
    /// Residual SD, shared by the baseline and both stage noises.
    pub sigma_eps: f64,
    /// Latent responder prevalence `P(L = 1)`.
    pub p_l: f64,
    pub n: usize,
    pub active_frac_stage1: f64,
    /// Share of classified non-responders re-randomized to active.
    pub active_frac_stage2: f64,
    pub responder_quantile: f64,
    pub weight_w: f64,
}

impl Default for TrialParams {
    /// One-third active in stage 1, half of the classified non-responders
    /// active in stage 2, median threshold, `w = 0.5`, `p_L = 0.5`, and a
    /// null overall effect with a unit placebo effect.
    fn default() -> Self {
        TrialParams {
            delta_nr: 0.5,
            delta_placebo: 1.0,
            sigma_eps: 1.0,
            p_l: 0.5,
            n: 300,
            active_frac_stage1: 1.0 / 3.0,
            active_frac_stage2: 0.5,
            responder_quantile: 0.5,
            weight_w: 0.5,
        }
    }
}

fn invalid(field: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { field, reason }
}

/// Smallest trial for which every arm can be non-empty.
pub const MIN_PARTICIPANTS: usize = 6;

impl TrialParams {
    pub fn validate(&self) -> Result<()> {
        if !self.delta_nr.is_finite() {
            return Err(invalid("delta_nr", "must be finite"));
        }
        if !self.delta_placebo.is_finite() {
            return Err(invalid("delta_placebo", "must be finite"));
        }
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(invalid("sigma_eps", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.p_l) {
            return Err(invalid("p_l", "must lie in [0, 1]"));
        }
        if self.n < MIN_PARTICIPANTS {
            return Err(invalid("n", "must be at least 6"));
        }
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.active_frac_stage1) {
            return Err(invalid(
                "active_frac_stage1",
                "must lie strictly between 0 and 1",
            ));
        }
        if !open_unit(self.active_frac_stage2) {
            return Err(invalid(
                "active_frac_stage2",
                "must lie strictly between 0 and 1",
            ));
        }
        if !open_unit(self.responder_quantile) {
            return Err(invalid(
                "responder_quantile",
                "must lie strictly between 0 and 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.weight_w) {
            return Err(invalid("weight_w", "must lie in [0, 1]"));
        }
        if !self.delta_all().is_finite() {
            return Err(invalid("delta_nr", "implied overall effect is not finite"));
        }
        Ok(())
    }

    /// Overall treatment effect `d_NR - p_L * d_placebo`.
    pub fn delta_all(&self) -> f64 {
        self.delta_nr - self.p_l * self.delta_placebo
    }

    /// Stage 1 active-arm size `floor(n * active_frac_stage1)`.
    pub fn n_active_stage1(&self) -> usize {
        allocation_count(self.n, self.active_frac_stage1)
    }
}

/// `floor(n * frac)`, with a `1e-9` allowance so fractions such as `1/3`
/// that are not exact in binary still give `n / 3` when `n` is a multiple
/// of three.
pub fn allocation_count(n: usize, frac: f64) -> usize {
    libm::floor(n as f64 * frac + 1e-9) as usize
}

/// The four target effects implied by a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimandSet {
    pub delta_all: f64,
    pub delta_nr: f64,
    /// Treatment effect among latent placebo responders.
    pub delta_pr: f64,
    pub delta_placebo: f64,
}

pub fn true_estimands(params: &TrialParams) -> EstimandSet {
    EstimandSet {
        delta_all: params.delta_all(),
        delta_nr: params.delta_nr,
        delta_pr: params.delta_nr - params.delta_placebo,
        delta_placebo: params.delta_placebo,
    }
}

/// One simulated participant, latent class included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participant {
    pub y0: f64,
    /// Latent placebo responder class.
    pub l: bool,
    pub a1: bool,
    pub y1: f64,
    /// Classified responder label; `None` for the stage 1 active arm.
    pub r: Option<bool>,
    pub a2: bool,
    pub y2: f64,
}

impl Participant {
    pub fn stage1_change(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn stage2_change(&self) -> f64 {
        self.y2 - self.y1
    }

    /// Placebo-arm participant classified as a non-responder.
    pub fn is_stage2_randomized(&self) -> bool {
        !self.a1 && self.r == Some(false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    pub params: TrialParams,
    pub seed: u64,
    pub classifier: ClassifierSpec,
    pub participants: Vec<Participant>,
}

/// Generates one trial. The output is a pure function of the inputs.
pub fn simulate_trial(
    params: &TrialParams,
    seed: u64,
    classifier: ClassifierSpec,
) -> Result<TrialDataset> {
    params.validate()?;
    classifier.validate()?;

    let n = params.n;
    let n_active = params.n_active_stage1();
    if n_active == 0 {
        return Err(Error::EmptyArm { arm: "active", n });
    }
    if n_active == n {
        return Err(Error::EmptyArm { arm: "placebo", n });
    }
    let sigma = params.sigma_eps;

    let mut rng = stream(seed, Stream::Baseline);
    let y0: Vec<f64> = (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut rng = stream(seed, Stream::Latent);
    let latent: Vec<bool> = (0..n).map(|_| rng.random_bool(params.p_l)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Stage1Allocation));
    let mut a1 = alloc::vec![false; n];
    for &i in &order[..n_active] {
        a1[i] = true;
    }

    let mut rng = stream(seed, Stream::Stage1Noise);
    let y1: Vec<f64> = (0..n)
        .map(|i| {
            let shift = if a1[i] {
                params.delta_nr
            } else if latent[i] {
                params.delta_placebo
            } else {
                0.0
            };
            y0[i] + shift + sigma * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();

    let placebo_idx: Vec<usize> = (0..n).filter(|&i| !a1[i]).collect();
    let arm: Vec<(f64, f64, bool)> = placebo_idx
        .iter()
        .map(|&i| (y0[i], y1[i], latent[i]))
        .collect();
    let labels = classifier.classify_arm(&arm)?;
    let mut r: Vec<Option<bool>> = alloc::vec![None; n];
    for (&i, &label) in placebo_idx.iter().zip(&labels) {
        r[i] = Some(label);
    }

    // Stage 1 active participants stay on active, classified responders stay
    // on placebo, classified non-responders are re-randomized.
    let mut a2 = a1.clone();
    let mut non_responders: Vec<usize> = (0..n).filter(|&i| r[i] == Some(false)).collect();
    let n_stage2_active = allocation_count(non_responders.len(), params.active_frac_stage2);
    non_responders.shuffle(&mut stream(seed, Stream::Stage2Allocation));
    for &i in &non_responders[..n_stage2_active] {
        a2[i] = true;
    }

    let mut rng = stream(seed, Stream::Stage2Noise);
    let participants = (0..n)
        .map(|i| {
            let shift = if a2[i] {
                params.delta_nr
            } else if latent[i] {
                params.delta_placebo
            } else {
                0.0
            };
            let y2 = y1[i] + shift + sigma * rng.sample::<f64, _>(StandardNormal);
            Participant {
                y0: y0[i],
                l: latent[i],
                a1: a1[i],
                y1: y1[i],
                r: r[i],
                a2: a2[i],
                y2,
            }
        })
        .collect();

    Ok(TrialDataset {
        params: *params,
        seed,
        classifier,
        participants,
    })
}
