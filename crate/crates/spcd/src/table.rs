//! CSV emission.
//!
//! Floats are written in Rust's shortest round-trip form (`{:?}`), so every
//! value parses back to the identical `f64`; missing values are empty
//! fields. Output never depends on locale and rows end in `\n`.

use std::io::Write;

use spcd_core::montecarlo::Estimator;
use spcd_core::{AnalyticCell, CellSummary, ClassifierSpec, TrialDataset, TrialParams};

use crate::error::Result;

pub const SIMULATE_HEADER: [&str; 8] = ["id", "y0", "l", "a1", "y1", "r", "a2", "y2"];

pub const GRID_HEADER: [&str; 13] = [
    "delta_placebo",
    "sigma_eps",
    "classifier",
    "estimator",
    "mean",
    "se",
    "bias_all",
    "bias_nr",
    "npv_mean",
    "npv_se",
    "q1_analytic",
    "e_analytic",
    "skipped",
];

pub const ANALYTIC_HEADER: [&str; 8] = [
    "delta_placebo",
    "sigma_eps",
    "q1",
    "npv",
    "e_theta1",
    "e_theta2",
    "e_theta_w",
    "threshold_c",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn describe_classifier(c: &ClassifierSpec) -> String {
    match *c {
        ClassifierSpec::FixedChange { c: t } | ClassifierSpec::FixedLevel { c: t } => {
            format!("{}(c={})", c.name(), fmt_f64(t))
        }
        ClassifierSpec::QuantileChange { p_r } => format!("quantile(p_r={})", fmt_f64(p_r)),
        ClassifierSpec::Oracle => "oracle".to_owned(),
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// `# key=value ...` line describing how a participant file was generated.
pub fn simulate_comment(params: &TrialParams, seed: u64, classifier: &ClassifierSpec) -> String {
    format!(
        "# seed={seed} delta_nr={} delta_placebo={} sigma_eps={} p_l={} n={} \
         active_frac_stage1={} active_frac_stage2={} responder_quantile={} weight_w={} classifier={}",
        fmt_f64(params.delta_nr),
        fmt_f64(params.delta_placebo),
        fmt_f64(params.sigma_eps),
        fmt_f64(params.p_l),
        params.n,
        fmt_f64(params.active_frac_stage1),
        fmt_f64(params.active_frac_stage2),
        fmt_f64(params.responder_quantile),
        fmt_f64(params.weight_w),
        describe_classifier(classifier),
    )
}

pub fn write_participants<W: Write>(mut out: W, dataset: &TrialDataset) -> Result<()> {
    writeln!(
        out,
        "{}",
        simulate_comment(&dataset.params, dataset.seed, &dataset.classifier)
    )?;
    let mut w = writer(out);
    w.write_record(SIMULATE_HEADER)?;
    for (id, p) in dataset.participants.iter().enumerate() {
        w.write_record([
            id.to_string(),
            fmt_f64(p.y0),
            fmt_bool(p.l).to_owned(),
            fmt_bool(p.a1).to_owned(),
            fmt_f64(p.y1),
            p.r.map(|r| fmt_bool(r).to_owned()).unwrap_or_default(),
            fmt_bool(p.a2).to_owned(),
            fmt_f64(p.y2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Three rows per cell, one per estimator. `cells` must already be in grid
/// order; estimators follow in name order.
pub fn write_grid<W: Write>(out: W, cells: &[CellSummary]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(GRID_HEADER)?;
    for cell in cells {
        for which in Estimator::ALL {
            let s = cell.estimator(which);
            w.write_record([
                fmt_f64(cell.delta_placebo),
                fmt_f64(cell.sigma_eps),
                cell.classifier.name().to_owned(),
                which.name().to_owned(),
                fmt_opt(s.mean),
                fmt_opt(s.se),
                fmt_opt(s.bias_all),
                fmt_opt(s.bias_nr),
                fmt_opt(cell.npv_mean),
                fmt_opt(cell.npv_se),
                fmt_opt(cell.analytic.map(|a| a.q1)),
                fmt_opt(cell.analytic_expectation(which)),
                cell.skipped.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_analytic<W: Write>(out: W, rows: &[(f64, f64, AnalyticCell)]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(ANALYTIC_HEADER)?;
    for (dp, sigma, a) in rows {
        w.write_record([
            fmt_f64(*dp),
            fmt_f64(*sigma),
            fmt_f64(a.q1),
            fmt_f64(a.npv),
            fmt_f64(a.e_theta1),
            fmt_f64(a.e_theta2),
            fmt_f64(a.e_theta_w),
            fmt_opt(a.threshold_c),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [
            0.1 + 0.2,
            1.0,
            -0.0,
            1e-300,
            123456789.123,
            f64::MIN_POSITIVE,
            2.5e17,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn classifier_descriptions() {
        assert_eq!(describe_classifier(&ClassifierSpec::Oracle), "oracle");
        assert_eq!(
            describe_classifier(&ClassifierSpec::QuantileChange { p_r: 0.5 }),
            "quantile(p_r=0.5)"
        );
        assert_eq!(
            describe_classifier(&ClassifierSpec::FixedLevel { c: -1.0 }),
            "fixed_level(c=-1.0)"
        );
    }
}
