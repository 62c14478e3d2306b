//! Simulation and analysis kernels for sequential parallel comparison design
//! (SPCD) trials.
//!
//! A two-stage trial randomizes everyone to active treatment or placebo in
//! stage 1, classifies the placebo arm into responders and non-responders,
//! and re-randomizes the classified non-responders in stage 2. Placebo
//! response is driven by a latent class `L` that the classifier can only
//! estimate, so the stage 2 and weighted estimators inherit a bias that
//! depends on how often true responders slip into the stage 2 population.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO:
//!
//! * [`trial_model`] holds the generative parameters, the target estimands
//!   and the seeded data generator.
//! * [`classify`] implements the responder classification rules.
//! * [`estimators`] computes the stage 1, stage 2 and weighted estimators.
//! * [`analytic`] gives closed-form expectations and misclassification
//!   rates under the linear-Gaussian generator.
//! * [`mixture_em`] fits the two-class placebo-arm mixture by EM.
//! * [`montecarlo`] runs replicate loops and aggregates bias summaries.
//!
//! IO, configuration and parallel execution live in the `spcd` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod classify;
pub mod error;
pub mod estimators;
pub mod mixture_em;
pub mod montecarlo;
pub mod numeric;
pub mod rng;
pub mod trial_model;

pub use analytic::{
    expected_estimates, misclass_q1, population_threshold, unbiasedness_conditions, AnalyticCell,
    Misclassification, Target, UnbiasednessReport,
};
pub use classify::{
    classify_fixed, empirical_npv, oracle_classify, quantile_threshold, ClassifierSpec,
    ThresholdMode,
};
pub use error::{Error, Result};
pub use estimators::{estimate, theta1, theta2, theta_weighted, EstimateSet};
pub use mixture_em::{
    em_fit, identifiability_diagnostics, posterior_responsibility, EmOptions,
    IdentifiabilityReport, InitSpec, MixtureFit,
};
pub use montecarlo::{
    run_cell, run_grid, run_replicate, summarize_cell, CellSummary, CellTask, EstimatorSummary,
    GridSpec, ReplicateOutcome,
};
pub use trial_model::{
    simulate_trial, true_estimands, EstimandSet, Participant, TrialDataset, TrialParams,
};
