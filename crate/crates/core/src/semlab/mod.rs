//! Synthetic multi-domain data with known causal structure.
//!
//! The linear structural model is
//!
//! ```text
//! X1 <- N1,   Y <- X1 + NY,   X2 <- Y + N2
//! ```
//!
//! with independent zero-mean Gaussian noises whose standard deviations are
//! given per domain by a [`DomainSpec`]. `X1` is the cause of `Y` and `X2` an
//! effect, so `(1, 0)` is the causal predictor and has the same risk `σY²` in
//! every domain. A domain may additionally intervene on one covariate.
//!
//! Also here: a two-binary-feature logistic analog of colored digits, the
//! excess-risk forms over raw moments, and a numerical check of whether the
//! causal predictor is the only minimal invariant-risk solution.

mod colorshape;
mod dataset;
mod moments;
mod scm;
mod verify;

pub use colorshape::{generate_color_shape, ColorShapeSpec};
pub use dataset::DomainDataset;
pub use moments::{excess_risk, Moments};
pub use scm::{
    analytic_risk, analytic_risk_gradient, generate_data, generate_data_with, sample_environments, EnvironmentFamily,
};
pub use verify::{verify_unique_invariant_minimum, VerifyOptions, VerifyResult};

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, QrmError, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Covariate {
    X1,
    X2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterventionKind {
    /// Replace the assignment by the constant `value`.
    Hard,
    /// Add `value` to the assignment.
    Shift,
    /// Multiply the covariate's own noise by `value`.
    NoiseScale,
    /// Multiply the whole assignment by `value`.
    Scale,
}

impl FromStr for Covariate {
    type Err = QrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x1" | "X1" => Ok(Self::X1),
            "x2" | "X2" => Ok(Self::X2),
            _ => domain(format!("unknown intervention target {s:?} (expected x1 or x2)")),
        }
    }
}

impl FromStr for InterventionKind {
    type Err = QrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(Self::Hard),
            "shift" => Ok(Self::Shift),
            "noise-scale" => Ok(Self::NoiseScale),
            "scale" => Ok(Self::Scale),
            _ => domain(format!("unknown intervention kind {s:?}")),
        }
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::X1 => "x1",
            Self::X2 => "x2",
        })
    }
}

impl fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hard => "hard",
            Self::Shift => "shift",
            Self::NoiseScale => "noise-scale",
            Self::Scale => "scale",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intervention<F> {
    pub target: Covariate,
    pub kind: InterventionKind,
    pub value: F,
}

/// Noise scales (standard deviations) of one domain, plus an optional intervention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec<F> {
    pub sigma1: F,
    pub sigma_y: F,
    pub sigma2: F,
    pub intervention: Option<Intervention<F>>,
}

/// Coefficients of the intervened model in the canonical form
/// `X1 = a1 + b1 N1`, `Y = X1 + NY`, `X2 = c + s (Y + k N2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Structural<F> {
    pub a1: F,
    pub b1: F,
    pub c: F,
    pub s: F,
    pub k: F,
}

impl<F: Scalar> DomainSpec<F> {
    pub fn new(sigma1: F, sigma_y: F, sigma2: F) -> Result<Self> {
        for (name, v) in [("sigma1", sigma1), ("sigma_y", sigma_y), ("sigma2", sigma2)] {
            if !(v >= F::zero()) || !v.is_finite() {
                return domain(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(Self { sigma1, sigma_y, sigma2, intervention: None })
    }

    pub fn with_intervention(mut self, target: Covariate, kind: InterventionKind, value: F) -> Result<Self> {
        if !value.is_finite() {
            return domain(format!("intervention value must be finite, got {value}"));
        }
        self.intervention = Some(Intervention { target, kind, value });
        Ok(self)
    }

    pub fn is_plain(&self) -> bool {
        self.intervention.is_none()
    }

    pub(crate) fn structural(&self) -> Structural<F> {
        let (one, zero) = (F::one(), F::zero());
        let mut st = Structural { a1: zero, b1: one, c: zero, s: one, k: one };
        if let Some(iv) = self.intervention {
            let v = iv.value;
            match (iv.target, iv.kind) {
                (Covariate::X1, InterventionKind::Hard) => {
                    st.a1 = v;
                    st.b1 = zero;
                }
                (Covariate::X1, InterventionKind::Shift) => st.a1 = v,
                // X1's assignment is its noise, so both scalings coincide
                (Covariate::X1, InterventionKind::NoiseScale | InterventionKind::Scale) => st.b1 = v,
                (Covariate::X2, InterventionKind::Hard) => {
                    st.c = v;
                    st.s = zero;
                }
                (Covariate::X2, InterventionKind::Shift) => st.c = v,
                (Covariate::X2, InterventionKind::NoiseScale) => st.k = v,
                (Covariate::X2, InterventionKind::Scale) => st.s = v,
            }
        }
        st
    }
}

/// A finite sample of domains.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSet<F> {
    pub domains: Vec<DomainSpec<F>>,
    pub meta_seed: u64,
}

impl<F: Scalar> EnvironmentSet<F> {
    pub fn new(domains: Vec<DomainSpec<F>>, meta_seed: u64) -> Result<Self> {
        if domains.is_empty() {
            return domain("environment set is empty");
        }
        Ok(Self { domains, meta_seed })
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn is_plain(&self) -> bool {
        self.domains.iter().all(DomainSpec::is_plain)
    }
}
