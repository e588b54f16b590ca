//! Estimating a predictor's risk distribution from its per-domain risks.
//!
//! [`fit`] turns a [`RiskVector`] into a [`RiskModel`]; [`cdf`] and [`icdf`]
//! evaluate it, and [`quantile_gradient`] gives `∂q/∂L_i`, the sensitivity of the
//! fitted α-quantile to each domain's risk. [`cvar`] is the empirical
//! superquantile.

mod bandwidth;
mod cvar;
mod gradient;
mod model;

pub use bandwidth::bandwidth;
pub(crate) use bandwidth::bandwidth_gradient;
pub use cvar::cvar;
pub use gradient::{quantile_and_gradient, quantile_gradient};
pub use model::{cdf, empirical_index, fit, icdf, pdf, BISECTION_STEPS};

use crate::error::{domain, Result};
use crate::Scalar;

/// Per-domain empirical risks of one predictor. At least two, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskVector<F>(Vec<F>);

impl<F: Scalar> RiskVector<F> {
    pub fn new(risks: Vec<F>) -> Result<Self> {
        if risks.len() < 2 {
            return domain(format!("need at least 2 domain risks, got {}", risks.len()));
        }
        if let Some(bad) = risks.iter().find(|r| !r.is_finite()) {
            return domain(format!("non-finite domain risk {bad}"));
        }
        Ok(Self(risks))
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<F> {
        self.0
    }
}

impl<F> AsRef<[F]> for RiskVector<F> {
    fn as_ref(&self) -> &[F] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EstimatorKind {
    Gaussian,
    #[default]
    Kde,
    Empirical,
}

/// Bandwidth selection for the kernel density estimator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BandwidthRule<F> {
    /// `(4 / 3m)^0.2 * σ̂`. Vanishes exactly when σ̂ does.
    #[default]
    GaussianOptimal,
    /// `m^-0.2 * min(σ̂, IQR / 1.34)`.
    Silverman,
    /// Median pairwise distance between risks. Tends to oversmooth small samples.
    MedianHeuristic,
    Fixed(F),
}

impl<F: Scalar> BandwidthRule<F> {
    pub fn fixed(h: F) -> Result<Self> {
        if !(h >= F::zero()) || !h.is_finite() {
            return domain(format!("fixed bandwidth must be finite and >= 0, got {h}"));
        }
        Ok(Self::Fixed(h))
    }
}

/// A fitted risk distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskModel<F> {
    Gaussian { mu: F, sigma: F },
    Kde { centers: Vec<F>, bandwidth: F },
    Empirical { sorted: Vec<F> },
}

impl<F: Scalar> RiskModel<F> {
    pub fn gaussian(mu: F, sigma: F) -> Result<Self> {
        if !(sigma >= F::zero()) || !mu.is_finite() || !sigma.is_finite() {
            return domain(format!("invalid gaussian parameters mu={mu}, sigma={sigma}"));
        }
        Ok(Self::Gaussian { mu, sigma })
    }

    pub fn kde(centers: Vec<F>, bandwidth: F) -> Result<Self> {
        if centers.is_empty() {
            return domain("kernel density estimate needs at least one center");
        }
        if !(bandwidth >= F::zero()) || !bandwidth.is_finite() {
            return domain(format!("bandwidth must be finite and >= 0, got {bandwidth}"));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return domain("non-finite kernel center");
        }
        Ok(Self::Kde { centers, bandwidth })
    }

    pub fn empirical(values: Vec<F>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return domain("empirical model needs at least one finite value");
        }
        Ok(Self::Empirical { sorted: crate::numkit::sorted_copy(&values) })
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            Self::Gaussian { .. } => EstimatorKind::Gaussian,
            Self::Kde { .. } => EstimatorKind::Kde,
            Self::Empirical { .. } => EstimatorKind::Empirical,
        }
    }
}
