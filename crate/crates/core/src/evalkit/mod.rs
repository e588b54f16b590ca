//! Scoring predictors by the distribution of their risks over held-out domains.
//!
//! Test-domain quantiles use the unsmoothed order-statistic convention of
//! [`riskdist::icdf`](crate::riskdist::icdf) on an empirical model; kernel
//! smoothing is only used for plotted curves ([`risk_curve`]).

mod curve;
mod experiments;

pub use curve::{risk_curve, write_curve_csv, CurveGrid, CurvePoint};
pub use experiments::{
    coverage_experiment, fresh_report, frontier_experiment, qq_experiment, qq_gap, write_frontier_csv, write_qq_csv,
    CoverageResult, FrontierTable, QqRow, QqSettings,
};

use std::io::Write;

use crate::error::{domain, QrmError, Result};
use crate::numkit::{mean, sample_std, AlphaLevel};
use crate::riskdist::{cvar, icdf, RiskModel, RiskVector};
use crate::Scalar;

/// Quantile levels reported by default: best domain, quartiles, upper tail, worst domain.
pub const REPORT_LEVELS: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage<F> {
    pub alpha: F,
    pub predicted_q: F,
    pub fraction_below: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<F> {
    pub mean_risk: F,
    /// `(level, quantile)`, levels ascending.
    pub quantiles: Vec<(F, F)>,
    /// `(level, superquantile)` at the same levels.
    pub cvar: Vec<(F, F)>,
    pub coverage_at_alpha: Option<Coverage<F>>,
    /// Sample standard deviation of the test risks.
    pub invariance_residual: F,
}

impl<F: Scalar> EvalReport<F> {
    pub fn quantile(&self, level: F) -> Option<F> {
        self.quantiles.iter().find(|(l, _)| *l == level).map(|(_, q)| *q)
    }

    /// Attaches the fraction of `test_risks` at or below `predicted_q`.
    pub fn with_coverage(mut self, test_risks: &RiskVector<F>, alpha: F, predicted_q: F) -> Self {
        self.coverage_at_alpha =
            Some(Coverage { alpha, predicted_q, fraction_below: coverage(test_risks.as_slice(), predicted_q) });
        self
    }

    /// CSV `metric,level,value`; level is empty for scalar metrics.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| QrmError::Domain(format!("csv write failed: {e}"));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["metric", "level", "value"]).map_err(io)?;
        let mut put = |metric: &str, level: Option<F>, value: F| {
            w.write_record([metric.to_string(), level.map(|l| l.to_string()).unwrap_or_default(), value.to_string()])
        };
        put("mean_risk", None, self.mean_risk).map_err(io)?;
        for &(l, q) in &self.quantiles {
            put("quantile", Some(l), q).map_err(io)?;
        }
        for &(l, c) in &self.cvar {
            put("cvar", Some(l), c).map_err(io)?;
        }
        put("invariance_residual", None, self.invariance_residual).map_err(io)?;
        if let Some(c) = self.coverage_at_alpha {
            put("predicted_q", Some(c.alpha), c.predicted_q).map_err(io)?;
            put("coverage", Some(c.alpha), c.fraction_below).map_err(io)?;
        }
        w.flush().map_err(|e| QrmError::Domain(format!("csv flush failed: {e}")))
    }
}

/// Mean, quantiles and superquantiles of `test_risks` at `levels` (each in `[0, 1]`).
pub fn quantile_report<F: Scalar>(test_risks: &RiskVector<F>, levels: &[F]) -> Result<EvalReport<F>> {
    if let Some(bad) = levels.iter().find(|l| !(**l >= F::zero() && **l <= F::one())) {
        return domain(format!("report level {bad} outside [0, 1]"));
    }
    let mut levels = levels.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("checked finite"));
    levels.dedup();
    let r = test_risks.as_slice();
    let model = RiskModel::empirical(r.to_vec())?;
    let quantiles = levels.iter().map(|&l| icdf(&model, AlphaLevel::Prob(l)).map(|q| (l, q))).collect::<Result<_>>()?;
    let cvars = levels.iter().map(|&l| cvar(test_risks, l).map(|c| (l, c))).collect::<Result<_>>()?;
    Ok(EvalReport {
        mean_risk: mean(r),
        quantiles,
        cvar: cvars,
        coverage_at_alpha: None,
        invariance_residual: sample_std(r),
    })
}

/// Report at [`REPORT_LEVELS`].
pub fn default_report<F: Scalar>(test_risks: &RiskVector<F>) -> Result<EvalReport<F>> {
    let levels: Vec<F> = REPORT_LEVELS.iter().map(|&l| F::lit(l)).collect();
    quantile_report(test_risks, &levels)
}

/// Fraction of risks at or below `predicted_q`; zero for an empty slice.
pub fn coverage<F: Scalar>(test_risks: &[F], predicted_q: F) -> F {
    if test_risks.is_empty() {
        return F::zero();
    }
    let hits = test_risks.iter().filter(|&&r| r <= predicted_q).count();
    F::from_usize_lossy(hits) / F::from_usize_lossy(test_risks.len())
}
