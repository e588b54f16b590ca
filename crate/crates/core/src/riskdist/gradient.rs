use super::model::{asymptotic_log_tail, kernel_quantile, KdeTarget};
use super::{bandwidth_gradient, empirical_index, fit, icdf, BandwidthRule, EstimatorKind, RiskModel, RiskVector};
use crate::error::{QrmError, Result};
use crate::numkit::{sample_std, AlphaLevel};
use crate::Scalar;

/// Gradient of the fitted α-quantile with respect to each domain risk.
pub fn quantile_gradient<F: Scalar>(
    risks: &RiskVector<F>,
    a: AlphaLevel<F>,
    kind: EstimatorKind,
    rule: BandwidthRule<F>,
    h_stop_gradient: bool,
) -> Result<Vec<F>> {
    quantile_and_gradient(risks, a, kind, rule, h_stop_gradient).map(|(_, g)| g)
}

/// The fitted α-quantile together with `∂q/∂L_i`.
///
/// Constant risks give the uniform vector `1/m`. For the KDE the gradient comes
/// from the implicit function theorem on `F(q; L, h) = alpha`; unless
/// `h_stop_gradient` is set it also carries the dependence of a data-driven
/// bandwidth on the risks. The entries always sum to one.
pub fn quantile_and_gradient<F: Scalar>(
    risks: &RiskVector<F>,
    a: AlphaLevel<F>,
    kind: EstimatorKind,
    rule: BandwidthRule<F>,
    h_stop_gradient: bool,
) -> Result<(F, Vec<F>)> {
    if kind == EstimatorKind::Empirical {
        return Err(QrmError::Unsupported("gradient of the empirical quantile".into()));
    }
    let r = risks.as_slice();
    let m = r.len();
    let model = fit(risks, kind, rule)?;
    let q = icdf(&model, a)?;
    let sigma = sample_std(r);
    if sigma == F::zero() {
        return Ok((q, vec![F::one() / F::from_usize_lossy(m); m]));
    }
    let grad = match &model {
        RiskModel::Gaussian { mu, sigma } => {
            let z = kernel_quantile(&a)?;
            let mf = F::from_usize_lossy(m);
            let denom = F::from_usize_lossy(m - 1) * *sigma;
            r.iter().map(|&l| F::one() / mf + z * (l - *mu) / denom).collect()
        }
        RiskModel::Kde { centers, bandwidth } => {
            let h = *bandwidth;
            if h == F::zero() {
                // zero-width kernel with spread risks: subgradient of the order statistic
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&i, &j| r[i].partial_cmp(&r[j]).expect("finite risks"));
                let mut g = vec![F::zero(); m];
                g[order[empirical_index(a.alpha(), m)]] = F::one();
                g
            } else {
                kde_gradient(centers, h, q, &a, risks, rule, h_stop_gradient)
            }
        }
        RiskModel::Empirical { .. } => unreachable!("handled above"),
    };
    Ok((q, grad))
}

fn kde_gradient<F: Scalar>(
    centers: &[F],
    h: F,
    q: F,
    a: &AlphaLevel<F>,
    risks: &RiskVector<F>,
    rule: BandwidthRule<F>,
    h_stop_gradient: bool,
) -> Vec<F> {
    let z: Vec<F> = centers.iter().map(|&c| (q - c) / h).collect();
    // u_i is ∂(kernel tail)/∂z_i up to a common positive factor, in log space.
    let asymptotic = matches!(KdeTarget::for_level(a), KdeTarget::Asymptotic(_));
    let log_u: Vec<F> = z
        .iter()
        .map(|&zi| {
            if asymptotic {
                if zi > F::zero() {
                    asymptotic_log_tail(zi) + zi.ln()
                } else {
                    F::neg_infinity()
                }
            } else {
                -(zi * zi) * F::lit(0.5)
            }
        })
        .collect();
    let max = log_u.iter().copied().fold(F::neg_infinity(), F::max);
    let u: Vec<F> = log_u.iter().map(|&v| (v - max).exp()).collect();
    let total: F = u.iter().copied().sum();
    let mut grad: Vec<F> = u.iter().map(|&v| v / total).collect();
    if !h_stop_gradient && !matches!(rule, BandwidthRule::Fixed(_)) {
        // dq/dh = E_w[z] under the kernel weights w
        let dq_dh: F = grad.iter().zip(&z).map(|(&w, &zi)| w * zi).sum();
        for (g, dh) in grad.iter_mut().zip(bandwidth_gradient(risks, rule)) {
            *g = *g + dq_dh * dh;
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RiskVector<f64> {
        RiskVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gaussian_median_gradient_is_uniform() {
        let g = quantile_gradient(
            &rv(&[1.0, 2.0, 3.0]),
            AlphaLevel::Prob(0.5),
            EstimatorKind::Gaussian,
            BandwidthRule::GaussianOptimal,
            false,
        )
        .unwrap();
        for v in g {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn kde_fixed_h_weights_are_a_simplex() {
        let r = rv(&[0.2, 0.9, 1.4, 2.0]);
        for alpha in [0.05, 0.3, 0.5, 0.9, 0.999] {
            let g = quantile_gradient(
                &r,
                AlphaLevel::Prob(alpha),
                EstimatorKind::Kde,
                BandwidthRule::GaussianOptimal,
                true,
            )
            .unwrap();
            assert!(g.iter().all(|&v| v >= 0.0));
            assert!((g.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_risks_give_uniform_gradient() {
        let r = rv(&[0.4, 0.4, 0.4, 0.4]);
        for kind in [EstimatorKind::Gaussian, EstimatorKind::Kde] {
            let g = quantile_gradient(&r, AlphaLevel::LogTail(-1000.0), kind, BandwidthRule::GaussianOptimal, false)
                .unwrap();
            assert_eq!(g, vec![0.25; 4]);
        }
    }

    #[test]
    fn empirical_gradient_unsupported() {
        let err = quantile_gradient(
            &rv(&[1.0, 2.0]),
            AlphaLevel::Prob(0.5),
            EstimatorKind::Empirical,
            BandwidthRule::GaussianOptimal,
            false,
        );
        assert!(matches!(err, Err(QrmError::Unsupported(_))));
    }

    #[test]
    fn zero_fixed_bandwidth_gives_order_statistic_subgradient() {
        let g = quantile_gradient(
            &rv(&[3.0, 1.0, 2.0, 4.0]),
            AlphaLevel::Prob(0.5),
            EstimatorKind::Kde,
            BandwidthRule::Fixed(0.0),
            true,
        )
        .unwrap();
        assert_eq!(g, vec![0.0, 0.0, 1.0, 0.0]);
    }
}
