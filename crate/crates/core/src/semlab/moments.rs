use super::DomainSpec;
use crate::error::{domain, QrmError, Result};
use crate::Scalar;

/// Raw (uncentered) moments of one domain: `E[X Xᵀ]` and `E[N X]`, where `N`
/// is the noise of the label's structural equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<F> {
    dim: usize,
    second: Vec<F>,
    cross: Vec<F>,
}

impl<F: Scalar> Moments<F> {
    pub fn new(second: Vec<Vec<F>>, cross: Vec<F>) -> Result<Self> {
        let d = cross.len();
        if d == 0 {
            return domain("moments need at least one covariate");
        }
        if second.len() != d {
            return Err(QrmError::Dimension { expected: d, got: second.len() });
        }
        if let Some(row) = second.iter().find(|r| r.len() != d) {
            return Err(QrmError::Dimension { expected: d, got: row.len() });
        }
        let flat: Vec<F> = second.into_iter().flatten().collect();
        if flat.iter().chain(&cross).any(|v| !v.is_finite()) {
            return domain("moments contain non-finite values");
        }
        let scale = flat.iter().fold(F::zero(), |a, v| a.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (flat[i * d + j] - flat[j * d + i]).abs() > F::lit(1e-12) * scale {
                    return domain(format!("second moment matrix not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self { dim: d, second: flat, cross })
    }

    /// Moments of `(X1, X2)` for a domain of the built-in model, interventions included.
    pub fn from_spec(spec: &DomainSpec<F>) -> Self {
        let st = spec.structural();
        let (s1, sy, s2) = (spec.sigma1.powi(2), spec.sigma_y.powi(2), spec.sigma2.powi(2));
        let two = F::lit(2.0);
        let x1x1 = st.a1 * st.a1 + st.b1 * st.b1 * s1;
        let x1x2 = st.c * st.a1 + st.s * x1x1;
        let x2x2 = st.c * st.c + two * st.c * st.s * st.a1 + st.s * st.s * (x1x1 + sy + st.k * st.k * s2);
        Self { dim: 2, second: vec![x1x1, x1x2, x1x2, x2x2], cross: vec![F::zero(), st.s * sy] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn second(&self, i: usize, j: usize) -> F {
        self.second[i * self.dim + j]
    }

    pub fn cross(&self) -> &[F] {
        &self.cross
    }

    /// `xᵀ E[X Xᵀ] x`.
    pub fn quadratic(&self, x: &[F]) -> F {
        let d = self.dim;
        let mut acc = F::zero();
        for i in 0..d {
            let row: F = (0..d).map(|j| self.second[i * d + j] * x[j]).sum();
            acc = acc + x[i] * row;
        }
        acc
    }

    /// `xᵀ E[N X]`.
    pub fn linear(&self, x: &[F]) -> F {
        x.iter().zip(&self.cross).map(|(&a, &b)| a * b).sum()
    }

    /// Largest absolute entry over both moments.
    pub fn magnitude(&self) -> F {
        self.second.iter().chain(&self.cross).fold(F::zero(), |a, v| a.max(v.abs()))
    }

    pub(crate) fn second_norm(&self) -> F {
        self.second.iter().map(|v| *v * *v).sum::<F>().sqrt()
    }

    pub(crate) fn cross_norm(&self) -> F {
        self.cross.iter().map(|v| *v * *v).sum::<F>().sqrt()
    }
}

/// `δᵀ E[X Xᵀ] δ + 2 δᵀ E[N X]` per domain: the extra risk of the predictor
/// `β - δ` over the structural coefficients `β`.
pub fn excess_risk<F: Scalar>(delta: &[F], moments: &[Moments<F>]) -> Result<Vec<F>> {
    moments
        .iter()
        .map(|mo| {
            if mo.dim != delta.len() {
                return Err(QrmError::Dimension { expected: mo.dim, got: delta.len() });
            }
            Ok(mo.quadratic(delta) + F::lit(2.0) * mo.linear(delta))
        })
        .collect()
}
