//! Run configuration, read from TOML.
//!
//! Every section and key is optional; missing values take the defaults
//! below, which reproduce the desk-scale study. Unknown keys are rejected.
//!
//! ```toml
//! seed = 2024                # overridden by SPCD_SEED, then by --seed
//! parallelism = 0            # worker threads, 0 = one per core
//! out = "grid.csv"           # optional; stdout when absent
//!
//! [trial]
//! delta_nr = 0.5
//! delta_placebo = 1.0
//! sigma_eps = 1.0
//! p_l = 0.5
//! n = 300
//! active_frac_stage1 = 0.3333333333333333
//! active_frac_stage2 = 0.5
//! responder_quantile = 0.5
//! weight_w = 0.5
//!
//! [classifier]               # used by `simulate`
//! kind = "quantile"          # quantile | oracle | fixed_change | fixed_level
//! p_r = 0.5                  # quantile only; fixed_* take `c`
//!
//! [grid]                     # used by `grid`, `analytic`, `check`
//! delta_all = 0.0
//! delta_placebo_values = [0.0, 0.5, 1.0]
//! sigma_values = [0.1, 1.0, 2.0, 5.0]
//! n_reps = 2000
//! classifiers = [{ kind = "quantile", p_r = 0.5 }, { kind = "oracle" }]
//!
//! [check]
//! se_multiplier = 4.0
//! slack = 0.02
//! npv_tolerance = 0.02
//!
//! [emfit]
//! column = "change"
//! tol = 1e-8
//! max_iter = 500
//! ```
//!
//! In `grid`, the trial's `delta_placebo`, `sigma_eps` and `delta_nr` are
//! replaced per cell, with `delta_nr = delta_all + p_l * delta_placebo`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spcd_core::{ClassifierSpec, EmOptions, GridSpec, TrialParams};

use crate::error::{Result, SpcdError};

pub const DEFAULT_SEED: u64 = 2024;
pub const SEED_ENV: &str = "SPCD_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub parallelism: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub trial: TrialSection,
    pub classifier: ClassifierConfig,
    pub grid: GridSection,
    pub check: CheckSection,
    pub emfit: EmfitSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            parallelism: 0,
            out: None,
            trial: TrialSection::default(),
            classifier: ClassifierConfig::Quantile { p_r: 0.5 },
            grid: GridSection::default(),
            check: CheckSection::default(),
            emfit: EmfitSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSection {
    pub delta_nr: f64,
    pub delta_placebo: f64,
    pub sigma_eps: f64,
    pub p_l: f64,
    pub n: usize,
    pub active_frac_stage1: f64,
    pub active_frac_stage2: f64,
    pub responder_quantile: f64,
    pub weight_w: f64,
}

impl Default for TrialSection {
    fn default() -> Self {
        TrialSection::from(TrialParams::default())
    }
}

impl From<TrialParams> for TrialSection {
    fn from(p: TrialParams) -> Self {
        TrialSection {
            delta_nr: p.delta_nr,
            delta_placebo: p.delta_placebo,
            sigma_eps: p.sigma_eps,
            p_l: p.p_l,
            n: p.n,
            active_frac_stage1: p.active_frac_stage1,
            active_frac_stage2: p.active_frac_stage2,
            responder_quantile: p.responder_quantile,
            weight_w: p.weight_w,
        }
    }
}

impl From<TrialSection> for TrialParams {
    fn from(t: TrialSection) -> Self {
        TrialParams {
            delta_nr: t.delta_nr,
            delta_placebo: t.delta_placebo,
            sigma_eps: t.sigma_eps,
            p_l: t.p_l,
            n: t.n,
            active_frac_stage1: t.active_frac_stage1,
            active_frac_stage2: t.active_frac_stage2,
            responder_quantile: t.responder_quantile,
            weight_w: t.weight_w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierConfig {
    Quantile { p_r: f64 },
    Oracle,
    FixedChange { c: f64 },
    FixedLevel { c: f64 },
}

impl From<ClassifierConfig> for ClassifierSpec {
    fn from(c: ClassifierConfig) -> Self {
        match c {
            ClassifierConfig::Quantile { p_r } => ClassifierSpec::QuantileChange { p_r },
            ClassifierConfig::Oracle => ClassifierSpec::Oracle,
            ClassifierConfig::FixedChange { c } => ClassifierSpec::FixedChange { c },
            ClassifierConfig::FixedLevel { c } => ClassifierSpec::FixedLevel { c },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub delta_all: f64,
    pub delta_placebo_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub n_reps: usize,
    pub classifiers: Vec<ClassifierConfig>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            delta_all: 0.0,
            delta_placebo_values: vec![0.0, 0.5, 1.0],
            sigma_values: vec![0.1, 1.0, 2.0, 5.0],
            n_reps: 2000,
            classifiers: vec![
                ClassifierConfig::Quantile { p_r: 0.5 },
                ClassifierConfig::Oracle,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    /// Allowed |MC mean - closed form| is `se_multiplier * se + slack`.
    pub se_multiplier: f64,
    pub slack: f64,
    /// Allowed |mean NPV - closed-form NPV|.
    pub npv_tolerance: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            se_multiplier: 4.0,
            slack: 0.02,
            npv_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmfitSection {
    pub column: String,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmfitSection {
    fn default() -> Self {
        let d = EmOptions::default();
        EmfitSection {
            column: "change".to_owned(),
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub reps: Option<usize>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Applies overrides. The seed comes from `--seed`, else `SPCD_SEED`
    /// (passed in as `env_seed`), else the file.
    pub fn apply(&mut self, overrides: &Overrides, env_seed: Option<&str>) -> Result<()> {
        if let Some(raw) = env_seed {
            self.seed = raw.trim().parse().map_err(|_| {
                SpcdError::config(
                    SEED_ENV,
                    format!("`{raw}` is not an unsigned 64-bit integer"),
                )
            })?;
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.out = Some(out.clone());
        }
        if let Some(p) = overrides.parallelism {
            self.parallelism = p;
        }
        if let Some(reps) = overrides.reps {
            self.grid.n_reps = reps;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let params = TrialParams::from(self.trial);
        params.validate().map_err(|e| scoped("trial", e))?;
        validate_classifier("classifier", self.classifier)?;

        let g = &self.grid;
        if !g.delta_all.is_finite() {
            return Err(SpcdError::config("grid.delta_all", "must be finite"));
        }
        if g.delta_placebo_values.is_empty() {
            return Err(SpcdError::config(
                "grid.delta_placebo_values",
                "must not be empty",
            ));
        }
        if let Some(v) = g.delta_placebo_values.iter().find(|v| !v.is_finite()) {
            return Err(SpcdError::config(
                "grid.delta_placebo_values",
                format!("{v} is not finite"),
            ));
        }
        if g.sigma_values.is_empty() {
            return Err(SpcdError::config("grid.sigma_values", "must not be empty"));
        }
        if let Some(v) = g
            .sigma_values
            .iter()
            .find(|v| !(**v > 0.0 && v.is_finite()))
        {
            return Err(SpcdError::config(
                "grid.sigma_values",
                format!("{v} is not a positive finite sd"),
            ));
        }
        if g.n_reps == 0 {
            return Err(SpcdError::config("grid.n_reps", "must be at least 1"));
        }
        if g.classifiers.is_empty() {
            return Err(SpcdError::config("grid.classifiers", "must not be empty"));
        }
        for (i, c) in g.classifiers.iter().enumerate() {
            validate_classifier(&format!("grid.classifiers[{i}]"), *c)?;
        }

        let c = &self.check;
        for (key, v) in [
            ("check.se_multiplier", c.se_multiplier),
            ("check.slack", c.slack),
            ("check.npv_tolerance", c.npv_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SpcdError::config(
                    key,
                    "must be a non-negative finite number",
                ));
            }
        }

        if self.emfit.column.is_empty() {
            return Err(SpcdError::config("emfit.column", "must not be empty"));
        }
        if !(self.emfit.tol > 0.0 && self.emfit.tol.is_finite()) {
            return Err(SpcdError::config(
                "emfit.tol",
                "must be positive and finite",
            ));
        }
        if self.emfit.max_iter == 0 {
            return Err(SpcdError::config("emfit.max_iter", "must be at least 1"));
        }
        Ok(())
    }

    pub fn trial_params(&self) -> TrialParams {
        self.trial.into()
    }

    pub fn simulate_classifier(&self) -> ClassifierSpec {
        self.classifier.into()
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            base: self.trial_params(),
            delta_all: self.grid.delta_all,
            delta_placebo_values: self.grid.delta_placebo_values.clone(),
            sigma_values: self.grid.sigma_values.clone(),
            n_reps: self.grid.n_reps,
            master_seed: self.seed,
            classifiers: self.grid.classifiers.iter().map(|&c| c.into()).collect(),
        }
    }

    pub fn em_options(&self) -> EmOptions {
        EmOptions {
            tol: self.emfit.tol,
            max_iter: self.emfit.max_iter,
        }
    }
}

fn validate_classifier(key: &str, c: ClassifierConfig) -> Result<()> {
    ClassifierSpec::from(c)
        .validate()
        .map_err(|e| scoped(key, e))
}

fn scoped(section: &str, e: spcd_core::Error) -> SpcdError {
    match e {
        spcd_core::Error::InvalidParameter { field, reason } => {
            SpcdError::config(format!("{section}.{field}"), reason)
        }
        other => SpcdError::config(section, other.to_string()),
    }
}
