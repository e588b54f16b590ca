use super::{DomainDataset, DomainSpec, EnvironmentSet};
use crate::error::{domain, QrmError, Result};
use crate::numkit::{cell_stream_id, RngStream};
use crate::Scalar;

/// Meta-distribution over plain domains: shared `σ1`, `σY`, and
/// `σ2 ~ LogNormal(sigma2_mu, sigma2_sigma)` (parameters of the underlying normal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentFamily<F> {
    pub sigma1: F,
    pub sigma_y: F,
    pub sigma2_mu: F,
    pub sigma2_sigma: F,
}

impl<F: Scalar> Default for EnvironmentFamily<F> {
    fn default() -> Self {
        Self { sigma1: F::one(), sigma_y: F::SQRT_2(), sigma2_mu: F::zero(), sigma2_sigma: F::lit(0.5) }
    }
}

impl<F: Scalar> EnvironmentFamily<F> {
    pub fn sample(&self, m: usize, seed: u64) -> Result<EnvironmentSet<F>> {
        sample_environments(m, self, seed)
    }
}

/// Draws `m >= 2` plain domains from `family`. Deterministic in `seed`.
pub fn sample_environments<F: Scalar>(m: usize, family: &EnvironmentFamily<F>, seed: u64) -> Result<EnvironmentSet<F>> {
    if m < 2 {
        return domain(format!("need at least 2 environments, got {m}"));
    }
    if !(family.sigma2_sigma >= F::zero()) || !family.sigma2_mu.is_finite() {
        return domain("sigma2 lognormal parameters must be finite with sigma >= 0");
    }
    let mut rng = RngStream::new(seed, cell_stream_id("semlab.environments", 0));
    let domains = (0..m)
        .map(|_| DomainSpec::new(family.sigma1, family.sigma_y, rng.lognormal(family.sigma2_mu, family.sigma2_sigma)))
        .collect::<Result<Vec<_>>>()?;
    EnvironmentSet::new(domains, seed)
}

/// `n` samples of `(X1, X2)` and `Y` from one domain. Deterministic in `seed`.
pub fn generate_data<F: Scalar>(spec: &DomainSpec<F>, n: usize, seed: u64) -> Result<DomainDataset<F>> {
    generate_data_with(spec, n, &mut RngStream::new(seed, cell_stream_id("semlab.data", 0)))
}

/// As [`generate_data`], drawing from a caller-owned stream.
pub fn generate_data_with<F: Scalar>(spec: &DomainSpec<F>, n: usize, rng: &mut RngStream) -> Result<DomainDataset<F>> {
    if n == 0 {
        return domain("dataset size must be >= 1");
    }
    let st = spec.structural();
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let n1 = rng.normal(F::zero(), spec.sigma1);
        let ny = rng.normal(F::zero(), spec.sigma_y);
        let n2 = rng.normal(F::zero(), spec.sigma2);
        let x1 = st.a1 + st.b1 * n1;
        let yv = x1 + ny;
        let x2 = st.c + st.s * (yv + st.k * n2);
        x.push(x1);
        x.push(x2);
        y.push(yv);
    }
    DomainDataset::new(vec!["x1".into(), "x2".into()], x, y)
}

fn check_plain<F: Scalar>(beta: &[F], spec: &DomainSpec<F>) -> Result<()> {
    if beta.len() != 2 {
        return Err(QrmError::Dimension { expected: 2, got: beta.len() });
    }
    if !spec.is_plain() {
        return Err(QrmError::Unsupported("closed-form risk of an intervened domain; use sampled risks".into()));
    }
    Ok(())
}

/// Population mean squared error of `Ŷ = β1 X1 + β2 X2` in a plain domain:
/// `(β1 + β2 - 1)² σ1² + (β2 - 1)² σY² + β2² σ2²`.
pub fn analytic_risk<F: Scalar>(beta: &[F], spec: &DomainSpec<F>) -> Result<F> {
    check_plain(beta, spec)?;
    let (b1, b2) = (beta[0], beta[1]);
    let a = b1 + b2 - F::one();
    let b = b2 - F::one();
    Ok(a * a * spec.sigma1.powi(2) + b * b * spec.sigma_y.powi(2) + b2 * b2 * spec.sigma2.powi(2))
}

pub fn analytic_risk_gradient<F: Scalar>(beta: &[F], spec: &DomainSpec<F>) -> Result<[F; 2]> {
    check_plain(beta, spec)?;
    let two = F::lit(2.0);
    let (b1, b2) = (beta[0], beta[1]);
    let g1 = two * (b1 + b2 - F::one()) * spec.sigma1.powi(2);
    let g2 = g1 + two * (b2 - F::one()) * spec.sigma_y.powi(2) + two * b2 * spec.sigma2.powi(2);
    Ok([g1, g2])
}
