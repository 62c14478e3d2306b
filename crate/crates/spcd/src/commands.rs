//! Subcommand implementations. Each writes its table or report to `out`
//! and returns enough structure for the caller to pick an exit code.

use std::io::{Read, Write};

use spcd_core::montecarlo::Estimator;
use spcd_core::{
    em_fit, expected_estimates, identifiability_diagnostics, simulate_trial, AnalyticCell,
    CellSummary, ClassifierSpec, IdentifiabilityReport, InitSpec, MixtureFit, TrialParams,
};

use crate::config::RunConfig;
use crate::error::{Result, SpcdError};
use crate::parallel::run_grid_parallel;
use crate::table::{self, fmt_f64, fmt_opt};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const RUNTIME: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DEGENERATE: u8 = 3;
    pub const WEAK: u8 = 4;
    pub const NOT_CONVERGED: u8 = 5;
    pub const CHECK_FAILED: u8 = 6;
}

impl SpcdError {
    pub fn exit_code(&self) -> u8 {
        use spcd_core::Error as E;
        match self {
            SpcdError::Config { .. }
            | SpcdError::ConfigParse(_)
            | SpcdError::ConfigSerialize(_) => exit::USAGE,
            SpcdError::Core(E::DegenerateFit { .. } | E::InsufficientData { .. }) => {
                exit::DEGENERATE
            }
            SpcdError::Core(
                E::InvalidParameter { .. }
                | E::WeightOutOfRange(_)
                | E::UnsupportedClassifier(_)
                | E::InvalidTolerance
                | E::EmptyGrid(_),
            ) => exit::USAGE,
            _ => exit::RUNTIME,
        }
    }
}

pub fn simulate(config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dataset = simulate_trial(
        &config.trial_params(),
        config.seed,
        config.simulate_classifier(),
    )?;
    table::write_participants(out, &dataset)
}

pub fn run_grid(config: &RunConfig) -> Result<Vec<CellSummary>> {
    run_grid_parallel(&config.grid_spec(), config.parallelism)
}

pub fn grid(config: &RunConfig, out: &mut dyn Write) -> Result<Vec<CellSummary>> {
    let cells = run_grid(config)?;
    table::write_grid(out, &cells)?;
    Ok(cells)
}

/// Closed-form cells for every grid coordinate, in grid order. The
/// threshold rule is the grid's first quantile classifier, falling back to
/// `trial.responder_quantile`.
pub fn analytic_rows(config: &RunConfig) -> Result<Vec<(f64, f64, AnalyticCell)>> {
    let spec = config.grid_spec();
    let classifier = spec
        .classifiers
        .iter()
        .copied()
        .find(|c| matches!(c, ClassifierSpec::QuantileChange { .. }))
        .unwrap_or(ClassifierSpec::QuantileChange {
            p_r: spec.base.responder_quantile,
        });
    let mut coords: Vec<(f64, f64)> = spec
        .delta_placebo_values
        .iter()
        .flat_map(|&dp| spec.sigma_values.iter().map(move |&s| (dp, s)))
        .collect();
    coords.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    coords
        .into_iter()
        .map(|(dp, sigma)| {
            let params = TrialParams {
                delta_placebo: dp,
                sigma_eps: sigma,
                delta_nr: spec.delta_all + spec.base.p_l * dp,
                ..spec.base
            };
            Ok((dp, sigma, expected_estimates(&params, classifier)?))
        })
        .collect()
}

pub fn analytic(config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    table::write_analytic(out, &analytic_rows(config)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Ok,
    Weak,
    NotConverged,
}

impl FitStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            FitStatus::Ok => exit::OK,
            FitStatus::Weak => exit::WEAK,
            FitStatus::NotConverged => exit::NOT_CONVERGED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmfitOutcome {
    pub n: usize,
    pub fit: MixtureFit,
    pub diagnostics: IdentifiabilityReport,
    pub status: FitStatus,
}

/// Reads the change scores to fit.
///
/// Uses the named column when present. Otherwise, for participant files
/// written by `simulate`, takes `y1 - y0` over the stage 1 placebo arm
/// (`a1 == 0`), which is where the responder mixture lives.
pub fn read_changes<R: Read>(input: R, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);

    let parse = |record: &csv::StringRecord, idx: usize, row: usize| -> Result<f64> {
        let raw = record.get(idx).unwrap_or("").trim();
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| SpcdError::BadValue {
                row,
                column: headers[idx].to_owned(),
                value: raw.to_owned(),
            })
    };

    let mut values = Vec::new();
    if let Some(idx) = find(column) {
        for (i, record) in reader.records().enumerate() {
            values.push(parse(&record?, idx, i + 1)?);
        }
        return Ok(values);
    }
    let (Some(y0), Some(y1), Some(a1)) = (find("y0"), find("y1"), find("a1")) else {
        return Err(SpcdError::MissingColumn(column.to_owned()));
    };
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if parse(&record, a1, i + 1)? == 0.0 {
            values.push(parse(&record, y1, i + 1)? - parse(&record, y0, i + 1)?);
        }
    }
    Ok(values)
}

/// Fits the two-component mixture and prints a `key=value` report.
///
/// Weak identification takes precedence over non-convergence: a flat
/// likelihood is the usual reason EM runs out of iterations.
pub fn emfit<R: Read>(
    config: &RunConfig,
    input: R,
    column: Option<&str>,
    out: &mut dyn Write,
) -> Result<EmfitOutcome> {
    let changes = read_changes(input, column.unwrap_or(&config.emfit.column))?;
    let fit = em_fit(&changes, InitSpec::MedianSplit, config.em_options())?;
    let diagnostics = identifiability_diagnostics(&fit);
    let status = if diagnostics.weak {
        FitStatus::Weak
    } else if !fit.converged {
        FitStatus::NotConverged
    } else {
        FitStatus::Ok
    };
    writeln!(out, "n={}", changes.len())?;
    writeln!(out, "p_hat={}", fmt_f64(fit.p_hat))?;
    writeln!(out, "mu0={}", fmt_f64(fit.mu0))?;
    writeln!(out, "mu1={}", fmt_f64(fit.mu1))?;
    writeln!(out, "sigma_hat={}", fmt_f64(fit.sigma_hat))?;
    writeln!(out, "loglik={}", fmt_f64(fit.loglik))?;
    writeln!(out, "iterations={}", fit.iterations)?;
    writeln!(out, "converged={}", fit.converged)?;
    writeln!(out, "separation={}", fmt_f64(diagnostics.separation))?;
    writeln!(
        out,
        "boundary_distance={}",
        fmt_f64(diagnostics.boundary_distance)
    )?;
    writeln!(out, "weak={}", diagnostics.weak)?;
    Ok(EmfitOutcome {
        n: changes.len(),
        fit,
        diagnostics,
        status,
    })
}

/// One Monte Carlo vs closed-form comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub delta_placebo: f64,
    pub sigma_eps: f64,
    pub classifier: &'static str,
    /// An estimator name or `"npv"`.
    pub quantity: &'static str,
    /// `None` when the cell had no usable replicate.
    pub diff: Option<f64>,
    pub threshold: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.diff.is_some_and(|d| d <= self.threshold)
    }
}

/// Compares every grid cell that has closed forms against them: estimator
/// means within `se_multiplier * se + slack`, mean NPV within
/// `npv_tolerance`.
pub fn check_cells(config: &RunConfig, cells: &[CellSummary]) -> Vec<CheckLine> {
    let tol = config.check;
    let mut lines = Vec::new();
    for cell in cells {
        let Some(analytic) = cell.analytic else {
            continue;
        };
        for which in Estimator::ALL {
            let s = cell.estimator(which);
            let e = cell.analytic_expectation(which).unwrap_or(f64::NAN);
            lines.push(CheckLine {
                delta_placebo: cell.delta_placebo,
                sigma_eps: cell.sigma_eps,
                classifier: cell.classifier.name(),
                quantity: which.name(),
                diff: s.mean.map(|m| (m - e).abs()),
                threshold: tol.se_multiplier * s.se.unwrap_or(0.0) + tol.slack,
            });
        }
        lines.push(CheckLine {
            delta_placebo: cell.delta_placebo,
            sigma_eps: cell.sigma_eps,
            classifier: cell.classifier.name(),
            quantity: "npv",
            diff: cell.npv_mean.map(|m| (m - analytic.npv).abs()),
            threshold: tol.npv_tolerance,
        });
    }
    lines
}

/// Runs the grid and prints one PASS/FAIL line per comparison. Returns the
/// number of failures.
pub fn check(config: &RunConfig, out: &mut dyn Write) -> Result<usize> {
    let cells = run_grid(config)?;
    let lines = check_cells(config, &cells);
    let mut failures = 0;
    for line in &lines {
        let verdict = if line.passed() { "PASS" } else { "FAIL" };
        failures += usize::from(!line.passed());
        writeln!(
            out,
            "{verdict} delta_placebo={} sigma_eps={} classifier={} quantity={} diff={} threshold={}",
            fmt_f64(line.delta_placebo),
            fmt_f64(line.sigma_eps),
            line.classifier,
            line.quantity,
            fmt_opt(line.diff),
            fmt_f64(line.threshold),
        )?;
    }
    writeln!(
        out,
        "{} of {} checks passed",
        lines.len() - failures,
        lines.len()
    )?;
    Ok(failures)
}
