use super::{domain_risks_and_gradients, Objective, Predictor, TrainingDomains};
use crate::error::Result;
use crate::numkit::{mean, sample_var};
use crate::riskdist::{fit, icdf, quantile_and_gradient, RiskVector};
use crate::Scalar;

pub fn objective_value<F: Scalar>(objective: &Objective<F>, risks: &RiskVector<F>) -> Result<F> {
    let r = risks.as_slice();
    match *objective {
        Objective::Erm => Ok(mean(r)),
        Objective::WorstCase => Ok(r.iter().copied().fold(F::neg_infinity(), F::max)),
        Objective::Vrex { penalty } => Ok(F::from_usize_lossy(r.len()) * mean(r) + penalty * sample_var(r)),
        Objective::Eqrm { alpha, kind, rule, .. } => icdf(&fit(risks, kind, rule)?, alpha),
    }
}

/// The objective and its partial derivatives with respect to each domain risk.
///
/// `WorstCase` returns the subgradient on the first maximal domain.
pub fn objective_weights<F: Scalar>(objective: &Objective<F>, risks: &RiskVector<F>) -> Result<(F, Vec<F>)> {
    let r = risks.as_slice();
    let m = r.len();
    match *objective {
        Objective::Erm => Ok((mean(r), vec![F::one() / F::from_usize_lossy(m); m])),
        Objective::WorstCase => {
            let (arg, max) =
                r.iter().copied().enumerate().fold((0, r[0]), |a, (i, v)| if v > a.1 { (i, v) } else { a });
            let mut w = vec![F::zero(); m];
            w[arg] = F::one();
            Ok((max, w))
        }
        Objective::Vrex { penalty } => {
            let mu = mean(r);
            let c = F::lit(2.0) * penalty / F::from_usize_lossy(m - 1);
            let value = F::from_usize_lossy(m) * mu + penalty * sample_var(r);
            Ok((value, r.iter().map(|&l| F::one() + c * (l - mu)).collect()))
        }
        Objective::Eqrm { alpha, kind, rule, h_stop_gradient } => {
            quantile_and_gradient(risks, alpha, kind, rule, h_stop_gradient)
        }
    }
}

/// Parameter gradient of the objective: `Σ_i (∂obj/∂L_i) ∇θ L_i`.
pub fn objective_gradient<F: Scalar>(
    objective: &Objective<F>,
    predictor: &Predictor<F>,
    domains: &TrainingDomains<F>,
) -> Result<Vec<F>> {
    evaluate(objective, predictor, domains).map(|e| e.gradient)
}

pub(crate) struct Evaluation<F> {
    pub value: F,
    pub risks: RiskVector<F>,
    pub gradient: Vec<F>,
}

pub(crate) fn evaluate<F: Scalar>(
    objective: &Objective<F>,
    predictor: &Predictor<F>,
    domains: &TrainingDomains<F>,
) -> Result<Evaluation<F>> {
    let (risks, grads) = domain_risks_and_gradients(predictor, domains)?;
    let (value, w) = objective_weights(objective, &risks)?;
    let mut gradient = vec![F::zero(); predictor.num_params()];
    for (wi, gi) in w.iter().zip(&grads) {
        for (g, &v) in gradient.iter_mut().zip(gi) {
            *g = *g + *wi * v;
        }
    }
    Ok(Evaluation { value, risks, gradient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{sample_std, std_normal_icdf, AlphaLevel};
    use crate::riskdist::{BandwidthRule, EstimatorKind};
    use crate::semlab::{DomainSpec, EnvironmentSet};
    use crate::trainer::{domain_risks, RiskMode};

    fn rv(v: &[f64]) -> RiskVector<f64> {
        RiskVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn constant_risks() {
        let r = rv(&[0.8; 5]);
        let g = Objective::eqrm(AlphaLevel::Prob(0.9), EstimatorKind::Gaussian);
        assert_eq!(objective_value(&Objective::Erm, &r).unwrap(), 0.8);
        assert_eq!(objective_value(&Objective::WorstCase, &r).unwrap(), 0.8);
        assert!((objective_value(&Objective::Vrex { penalty: 3.0 }, &r).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(objective_value(&g, &r).unwrap(), 0.8);
    }

    #[test]
    fn gaussian_median_is_mean() {
        let r = rv(&[0.3, 1.9, 0.4, 2.2]);
        let g = Objective::eqrm(AlphaLevel::Prob(0.5), EstimatorKind::Gaussian);
        assert_eq!(objective_value(&g, &r).unwrap(), objective_value(&Objective::Erm, &r).unwrap());
    }

    #[test]
    fn vrex_matches_gaussian_quantile() {
        let r = rv(&[0.31, 1.2, 0.77, 2.05, 1.61]);
        let m = 5.0;
        for alpha in [0.6, 0.9, 0.99] {
            let penalty = m * std_normal_icdf(AlphaLevel::Prob(alpha)).unwrap() / sample_std(r.as_slice());
            let v = objective_value(&Objective::Vrex { penalty }, &r).unwrap();
            let q = objective_value(&Objective::eqrm(AlphaLevel::Prob(alpha), EstimatorKind::Gaussian), &r).unwrap();
            assert!((v - m * q).abs() <= 1e-10 * v.abs(), "{v} vs {}", m * q);
        }
    }

    #[test]
    fn worst_case_ties_pick_lowest_index() {
        let (v, w) = objective_weights(&Objective::WorstCase, &rv(&[1.0, 3.0, 3.0, 2.0])).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(w, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let specs = [0.4, 0.9, 1.3, 2.2, 0.7].map(|s| DomainSpec::new(1.0, 2.0_f64.sqrt(), s).unwrap());
        let dom =
            TrainingDomains::prepare(&EnvironmentSet::new(specs.to_vec(), 0).unwrap(), RiskMode::Analytic, 0).unwrap();
        let objectives = [
            Objective::Erm,
            Objective::Vrex { penalty: 2.5 },
            Objective::eqrm(AlphaLevel::Prob(0.9), EstimatorKind::Gaussian),
            Objective::eqrm(AlphaLevel::Prob(0.9), EstimatorKind::Kde),
            Objective::Eqrm {
                alpha: AlphaLevel::Prob(0.75),
                kind: EstimatorKind::Kde,
                rule: BandwidthRule::Silverman,
                h_stop_gradient: false,
            },
        ];
        let p = Predictor::linear(vec![0.35, 0.42]);
        for obj in objectives {
            let g = objective_gradient(&obj, &p, &dom).unwrap();
            let f = |w: [f64; 2]| {
                objective_value(&obj, &domain_risks(&Predictor::linear(w.to_vec()), &dom).unwrap()).unwrap()
            };
            for k in 0..2 {
                let eps = 1e-6;
                let (mut up, mut dn) = ([0.35, 0.42], [0.35, 0.42]);
                up[k] += eps;
                dn[k] -= eps;
                let fd = (f(up) - f(dn)) / (2.0 * eps);
                assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-8), "{obj:?} k={k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn gaussian_median_gradient_equals_erm() {
        let specs = [0.4, 0.9, 1.3].map(|s| DomainSpec::new(1.0, 2.0_f64.sqrt(), s).unwrap());
        let dom =
            TrainingDomains::prepare(&EnvironmentSet::new(specs.to_vec(), 0).unwrap(), RiskMode::Analytic, 0).unwrap();
        let p = Predictor::linear(vec![0.2, 0.5]);
        let a = objective_gradient(&Objective::eqrm(AlphaLevel::Prob(0.5), EstimatorKind::Gaussian), &p, &dom).unwrap();
        let b = objective_gradient(&Objective::Erm, &p, &dom).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}
