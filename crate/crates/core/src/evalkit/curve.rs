use std::io::Write;

use crate::error::{domain, QrmError, Result};
use crate::riskdist::{cdf, fit, pdf, BandwidthRule, EstimatorKind, RiskVector};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveGrid<F> {
    pub t_min: F,
    pub t_max: F,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint<F> {
    pub t: F,
    pub pdf: F,
    pub cdf: F,
}

/// Density and distribution function of the fitted risk model on an evenly
/// spaced grid. Needs a model with a density (Gaussian or KDE with nonzero width).
pub fn risk_curve<F: Scalar>(
    risks: &RiskVector<F>,
    kind: EstimatorKind,
    rule: BandwidthRule<F>,
    grid: CurveGrid<F>,
) -> Result<Vec<CurvePoint<F>>> {
    if !(grid.t_min < grid.t_max) || !grid.t_min.is_finite() || !grid.t_max.is_finite() {
        return domain(format!("curve grid needs finite t_min < t_max, got [{}, {}]", grid.t_min, grid.t_max));
    }
    if grid.points < 2 {
        return domain("curve grid needs at least 2 points");
    }
    let model = fit(risks, kind, rule)?;
    let step = (grid.t_max - grid.t_min) / F::from_usize_lossy(grid.points - 1);
    (0..grid.points)
        .map(|i| {
            let t = if i + 1 == grid.points { grid.t_max } else { grid.t_min + step * F::from_usize_lossy(i) };
            Ok(CurvePoint { t, pdf: pdf(&model, t)?, cdf: cdf(&model, t) })
        })
        .collect()
}

/// CSV `t,pdf,cdf`.
pub fn write_curve_csv<F: Scalar, W: Write>(points: &[CurvePoint<F>], out: W) -> Result<()> {
    let io = |e: csv::Error| QrmError::Domain(format!("csv write failed: {e}"));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["t", "pdf", "cdf"]).map_err(io)?;
    for p in points {
        w.write_record([p.t.to_string(), p.pdf.to_string(), p.cdf.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| QrmError::Domain(format!("csv flush failed: {e}")))
}
