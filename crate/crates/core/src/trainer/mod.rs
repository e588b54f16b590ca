//! Gradient descent on per-domain risks.
//!
//! A [`Predictor`] is scored on each training domain, the resulting
//! [`RiskVector`](crate::riskdist::RiskVector) is collapsed by an [`Objective`],
//! and the parameter gradient is the chain rule
//! `Σ_i (∂objective/∂L_i) ∇θ L_i`. For [`Objective::Eqrm`] the first factor is
//! [`quantile_gradient`](crate::riskdist::quantile_gradient).

mod objective;
mod risk;
mod train;

pub use objective::{objective_gradient, objective_value, objective_weights};
pub use risk::{domain_risks, domain_risks_and_gradients, RiskMode, TrainingDomains};
pub use train::{train, train_on, write_trajectory_csv, TrainConfig, TrainOutcome, TrajectoryRow};

use crate::error::{domain, QrmError, Result};
use crate::numkit::AlphaLevel;
use crate::riskdist::{BandwidthRule, EstimatorKind};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Link {
    /// Real-valued output scored by squared error.
    #[default]
    Identity,
    /// Probability of label 1 scored by cross-entropy.
    Logistic,
}

/// Linear or logistic model `w·x (+ b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor<F> {
    pub weights: Vec<F>,
    pub bias: Option<F>,
    pub link: Link,
}

impl<F: Scalar> Predictor<F> {
    /// All-zero parameters.
    pub fn zeros(dim: usize, with_bias: bool, link: Link) -> Self {
        Self { weights: vec![F::zero(); dim], bias: with_bias.then(F::zero), link }
    }

    pub fn linear(weights: Vec<F>) -> Self {
        Self { weights, bias: None, link: Link::Identity }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Number of trainable parameters: weights, then the bias if present.
    pub fn num_params(&self) -> usize {
        self.weights.len() + usize::from(self.bias.is_some())
    }

    pub fn params(&self) -> Vec<F> {
        let mut p = self.weights.clone();
        p.extend(self.bias);
        p
    }

    pub fn set_params(&mut self, p: &[F]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(QrmError::Dimension { expected: self.num_params(), got: p.len() });
        }
        let d = self.weights.len();
        self.weights.copy_from_slice(&p[..d]);
        if let Some(b) = self.bias.as_mut() {
            *b = p[d];
        }
        Ok(())
    }

    /// `w·x + b` before the link.
    pub fn score(&self, x: &[F]) -> F {
        let s: F = self.weights.iter().zip(x).map(|(&w, &v)| w * v).sum();
        s + self.bias.unwrap_or(F::zero())
    }

    /// Prediction after the link: a real value or a probability.
    pub fn predict(&self, x: &[F]) -> F {
        match self.link {
            Link::Identity => self.score(x),
            Link::Logistic => sigmoid(self.score(x)),
        }
    }
}

pub(crate) fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// How per-domain risks are combined into one training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective<F> {
    /// α-quantile of the estimated risk distribution.
    Eqrm { alpha: AlphaLevel<F>, kind: EstimatorKind, rule: BandwidthRule<F>, h_stop_gradient: bool },
    /// Mean risk.
    Erm,
    /// `m · mean + penalty · sample variance`.
    Vrex { penalty: F },
    /// Maximum risk.
    WorstCase,
}

impl<F: Scalar> Objective<F> {
    pub fn eqrm(alpha: AlphaLevel<F>, kind: EstimatorKind) -> Self {
        Self::Eqrm { alpha, kind, rule: BandwidthRule::default(), h_stop_gradient: false }
    }

    pub fn vrex(penalty: F) -> Result<Self> {
        if !(penalty >= F::zero()) || !penalty.is_finite() {
            return domain(format!("variance penalty must be finite and >= 0, got {penalty}"));
        }
        Ok(Self::Vrex { penalty })
    }
}
