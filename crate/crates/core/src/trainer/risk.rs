use super::{sigmoid, Link, Predictor};
use crate::error::{domain, QrmError, Result};
use crate::numkit::{cell_stream_id, RngStream};
use crate::riskdist::RiskVector;
use crate::semlab::{analytic_risk, analytic_risk_gradient, generate_data_with, DomainDataset, EnvironmentSet};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RiskMode {
    /// Closed-form population risk of the plain linear model.
    #[default]
    Analytic,
    /// Empirical risk on `n` samples drawn once per domain.
    Sampled { n: usize },
}

/// Training domains in the form risks are computed from.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingDomains<F> {
    Analytic(EnvironmentSet<F>),
    Sampled(Vec<DomainDataset<F>>),
}

impl<F: Scalar> TrainingDomains<F> {
    /// Draws datasets for `Sampled` mode, one derived stream per domain.
    pub fn prepare(envs: &EnvironmentSet<F>, mode: RiskMode, seed: u64) -> Result<Self> {
        match mode {
            RiskMode::Analytic => {
                if !envs.is_plain() {
                    return Err(QrmError::Unsupported("analytic risks with intervened domains".into()));
                }
                Ok(Self::Analytic(envs.clone()))
            }
            RiskMode::Sampled { n } => envs
                .domains
                .iter()
                .enumerate()
                .map(|(i, spec)| {
                    generate_data_with(spec, n, &mut RngStream::new(seed, cell_stream_id("trainer.sampled", i as u64)))
                })
                .collect::<Result<Vec<_>>>()
                .map(Self::Sampled),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Analytic(e) => e.len(),
            Self::Sampled(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn domain_risks<F: Scalar>(predictor: &Predictor<F>, domains: &TrainingDomains<F>) -> Result<RiskVector<F>> {
    let risks = match domains {
        TrainingDomains::Analytic(envs) => {
            check_analytic(predictor)?;
            let b2 = predictor.bias.map_or(F::zero(), |b| b * b);
            envs.domains
                .iter()
                .map(|s| analytic_risk(&predictor.weights, s).map(|r| r + b2))
                .collect::<Result<Vec<_>>>()?
        }
        TrainingDomains::Sampled(sets) => {
            sets.iter().map(|ds| sampled_risk(predictor, ds, false).map(|(r, _)| r)).collect::<Result<Vec<_>>>()?
        }
    };
    RiskVector::new(risks)
}

/// Per-domain risks and their parameter gradients (weights, then bias).
pub fn domain_risks_and_gradients<F: Scalar>(
    predictor: &Predictor<F>,
    domains: &TrainingDomains<F>,
) -> Result<(RiskVector<F>, Vec<Vec<F>>)> {
    let pairs: Vec<(F, Vec<F>)> = match domains {
        TrainingDomains::Analytic(envs) => {
            check_analytic(predictor)?;
            envs.domains
                .iter()
                .map(|s| {
                    let mut r = analytic_risk(&predictor.weights, s)?;
                    let mut g = analytic_risk_gradient(&predictor.weights, s)?.to_vec();
                    if let Some(b) = predictor.bias {
                        // zero-mean covariates and label: the bias adds b² and nothing else
                        r = r + b * b;
                        g.push(F::lit(2.0) * b);
                    }
                    Ok((r, g))
                })
                .collect::<Result<_>>()?
        }
        TrainingDomains::Sampled(sets) => {
            sets.iter().map(|ds| sampled_risk(predictor, ds, true)).collect::<Result<_>>()?
        }
    };
    let (risks, grads) = pairs.into_iter().unzip();
    Ok((RiskVector::new(risks)?, grads))
}

fn check_analytic<F: Scalar>(p: &Predictor<F>) -> Result<()> {
    if p.link != Link::Identity {
        return Err(QrmError::Unsupported("analytic risks need the identity link".into()));
    }
    if p.dim() != 2 {
        return Err(QrmError::Dimension { expected: 2, got: p.dim() });
    }
    Ok(())
}

fn sampled_risk<F: Scalar>(p: &Predictor<F>, ds: &DomainDataset<F>, with_grad: bool) -> Result<(F, Vec<F>)> {
    if ds.dim() != p.dim() {
        return Err(QrmError::Dimension { expected: p.dim(), got: ds.dim() });
    }
    if ds.is_empty() {
        return domain("empty training dataset");
    }
    let d = p.dim();
    let mut loss = F::zero();
    let mut grad = vec![F::zero(); if with_grad { p.num_params() } else { 0 }];
    for (x, y) in ds.rows() {
        let z = p.score(x);
        // dloss/dz
        let slope = match p.link {
            Link::Identity => {
                let r = z - y;
                loss = loss + r * r;
                F::lit(2.0) * r
            }
            Link::Logistic => {
                let softplus = z.max(F::zero()) + (-z.abs()).exp().ln_1p();
                loss = loss + softplus - y * z;
                sigmoid(z) - y
            }
        };
        if with_grad {
            for (g, &v) in grad[..d].iter_mut().zip(x) {
                *g = *g + slope * v;
            }
            if p.bias.is_some() {
                grad[d] = grad[d] + slope;
            }
        }
    }
    let n = F::from_usize_lossy(ds.len());
    Ok((loss / n, grad.into_iter().map(|g| g / n).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semlab::{generate_color_shape, ColorShapeSpec, DomainSpec};

    fn example_set() -> EnvironmentSet<f64> {
        let d = [0.5, 1.0, 2.0].map(|s2| DomainSpec::new(1.0, 2.0_f64.sqrt(), s2).unwrap());
        EnvironmentSet::new(d.to_vec(), 0).unwrap()
    }

    #[test]
    fn analytic_examples() {
        let dom = TrainingDomains::prepare(&example_set(), RiskMode::Analytic, 0).unwrap();
        let causal = domain_risks(&Predictor::linear(vec![1.0, 0.0]), &dom).unwrap();
        assert!(causal.as_slice().iter().all(|&r| (r - 2.0).abs() < 1e-12));
        let effect = domain_risks(&Predictor::linear(vec![0.0, 1.0]), &dom).unwrap();
        for (r, s) in effect.as_slice().iter().zip([0.25, 1.0, 4.0]) {
            assert!((r - s).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_risks_approach_analytic() {
        let envs = example_set();
        let an = TrainingDomains::prepare(&envs, RiskMode::Analytic, 0).unwrap();
        let sa = TrainingDomains::prepare(&envs, RiskMode::Sampled { n: 200_000 }, 3).unwrap();
        let p = Predictor::linear(vec![0.4, 0.6]);
        let a = domain_risks(&p, &an).unwrap();
        let s = domain_risks(&p, &sa).unwrap();
        for (x, y) in a.as_slice().iter().zip(s.as_slice()) {
            assert!((x - y).abs() <= 0.02 * x, "{x} vs {y}");
        }
    }

    fn fd_check(p: &Predictor<f64>, dom: &TrainingDomains<f64>) {
        let (_, grads) = domain_risks_and_gradients(p, dom).unwrap();
        let theta = p.params();
        for k in 0..theta.len() {
            let eps = 1e-6;
            let mut up = p.clone();
            let mut dn = p.clone();
            let mut t = theta.clone();
            t[k] += eps;
            up.set_params(&t).unwrap();
            t[k] -= 2.0 * eps;
            dn.set_params(&t).unwrap();
            let ru = domain_risks(&up, dom).unwrap();
            let rd = domain_risks(&dn, dom).unwrap();
            for (i, g) in grads.iter().enumerate() {
                let fd = (ru.as_slice()[i] - rd.as_slice()[i]) / (2.0 * eps);
                assert!((fd - g[k]).abs() <= 1e-6 * fd.abs().max(1.0), "param {k} domain {i}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let envs = example_set();
        let mut p = Predictor::zeros(2, true, Link::Identity);
        p.set_params(&[0.3, -0.7, 0.2]).unwrap();
        fd_check(&p, &TrainingDomains::prepare(&envs, RiskMode::Analytic, 0).unwrap());
        fd_check(&p, &TrainingDomains::prepare(&envs, RiskMode::Sampled { n: 500 }, 0).unwrap());

        let sets = [0.9, 0.8]
            .iter()
            .enumerate()
            .map(|(i, &pc)| generate_color_shape(&ColorShapeSpec::with_color(pc).unwrap(), 400, i as u64).unwrap())
            .collect();
        let mut q = Predictor::zeros(2, true, Link::Logistic);
        q.set_params(&[1.2, -0.4, 0.1]).unwrap();
        fd_check(&q, &TrainingDomains::Sampled(sets));
    }

    #[test]
    fn analytic_mode_rejects_logistic_and_interventions() {
        let dom = TrainingDomains::prepare(&example_set(), RiskMode::Analytic, 0).unwrap();
        assert!(domain_risks(&Predictor::zeros(2, false, Link::Logistic), &dom).is_err());
        let mut envs = example_set();
        envs.domains[0] = envs.domains[0]
            .with_intervention(crate::semlab::Covariate::X2, crate::semlab::InterventionKind::Shift, 1.0)
            .unwrap();
        assert!(matches!(TrainingDomains::prepare(&envs, RiskMode::Analytic, 0), Err(QrmError::Unsupported(_))));
    }

    #[test]
    fn cross_entropy_is_nonnegative() {
        let ds = generate_color_shape(&ColorShapeSpec::with_color(0.3).unwrap(), 100, 1).unwrap();
        let dom = TrainingDomains::Sampled(vec![ds.clone(), ds]);
        let mut p = Predictor::zeros(2, false, Link::Logistic);
        p.set_params(&[40.0, -35.0]).unwrap();
        assert!(domain_risks(&p, &dom).unwrap().as_slice().iter().all(|&r: &f64| r >= 0.0 && r.is_finite()));
    }
}
