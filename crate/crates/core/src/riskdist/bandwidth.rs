use super::{BandwidthRule, RiskVector};
use crate::numkit::{iqr_sorted, mean, pairwise_distances, sample_std, sorted_copy, type7_position};
use crate::Scalar;

fn gaussian_optimal_factor<F: Scalar>(m: usize) -> F {
    (F::lit(4.0) / (F::lit(3.0) * F::from_usize_lossy(m))).powf(F::lit(0.2))
}

fn silverman_factor<F: Scalar>(m: usize) -> F {
    F::from_usize_lossy(m).powf(F::lit(-0.2))
}

pub fn bandwidth<F: Scalar>(risks: &RiskVector<F>, rule: BandwidthRule<F>) -> F {
    let r = risks.as_slice();
    let m = r.len();
    match rule {
        BandwidthRule::GaussianOptimal => gaussian_optimal_factor::<F>(m) * sample_std(r),
        BandwidthRule::Silverman => {
            let spread = sample_std(r).min(iqr_sorted(&sorted_copy(r)) / F::lit(1.34));
            silverman_factor::<F>(m) * spread
        }
        BandwidthRule::MedianHeuristic => crate::numkit::median_pairwise_distance(r),
        BandwidthRule::Fixed(h) => h,
    }
}

/// `∂σ̂/∂L_k`. Zero vector when σ̂ = 0.
pub(crate) fn std_gradient<F: Scalar>(r: &[F]) -> Vec<F> {
    let s = sample_std(r);
    if s == F::zero() {
        return vec![F::zero(); r.len()];
    }
    let mu = mean(r);
    let denom = F::from_usize_lossy(r.len() - 1) * s;
    r.iter().map(|&l| (l - mu) / denom).collect()
}

fn argsort<F: Scalar>(r: &[F]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..r.len()).collect();
    idx.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).expect("finite risks"));
    idx
}

/// Adds `sign * ∂Q_p/∂L` of the type-7 quantile at level `p` into `out`.
fn add_quantile_gradient<F: Scalar>(order: &[usize], p: F, sign: F, out: &mut [F]) {
    let (i, frac) = type7_position(order.len(), p);
    out[order[i]] = out[order[i]] + sign * (F::one() - frac);
    if i + 1 < order.len() {
        out[order[i + 1]] = out[order[i + 1]] + sign * frac;
    }
}

/// `∂h/∂L_k` for the data-driven rules (zero for `Fixed`). Piecewise: exact away
/// from ties in the order statistics the rule depends on.
pub(crate) fn bandwidth_gradient<F: Scalar>(risks: &RiskVector<F>, rule: BandwidthRule<F>) -> Vec<F> {
    let r = risks.as_slice();
    let m = r.len();
    match rule {
        BandwidthRule::GaussianOptimal => {
            let c = gaussian_optimal_factor::<F>(m);
            std_gradient(r).into_iter().map(|g| c * g).collect()
        }
        BandwidthRule::Silverman => {
            let c = silverman_factor::<F>(m);
            let s = sample_std(r);
            let order = argsort(r);
            let sorted: Vec<F> = order.iter().map(|&i| r[i]).collect();
            let iqr_term = iqr_sorted(&sorted) / F::lit(1.34);
            if s <= iqr_term {
                std_gradient(r).into_iter().map(|g| c * g).collect()
            } else {
                let mut g = vec![F::zero(); m];
                add_quantile_gradient(&order, F::lit(0.75), F::one(), &mut g);
                add_quantile_gradient(&order, F::lit(0.25), -F::one(), &mut g);
                g.into_iter().map(|v| c * v / F::lit(1.34)).collect()
            }
        }
        BandwidthRule::MedianHeuristic => {
            let mut pairs = Vec::with_capacity(m * (m - 1) / 2);
            for i in 0..m {
                for j in i + 1..m {
                    pairs.push((i, j));
                }
            }
            let dist = pairwise_distances(r);
            let order = argsort(&dist);
            let mut w = vec![F::zero(); dist.len()];
            add_quantile_gradient(&order, F::lit(0.5), F::one(), &mut w);
            let mut g = vec![F::zero(); m];
            for (k, &wk) in w.iter().enumerate() {
                if wk == F::zero() {
                    continue;
                }
                let (i, j) = pairs[k];
                let sign = if r[i] >= r[j] { F::one() } else { -F::one() };
                g[i] = g[i] + wk * sign;
                g[j] = g[j] - wk * sign;
            }
            g
        }
        BandwidthRule::Fixed(_) => vec![F::zero(); m],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RiskVector<f64> {
        RiskVector::new(v.to_vec()).unwrap()
    }

    /// Ten values with sample std exactly 1: ±sqrt(9/10) alternating.
    fn unit_std(m: usize) -> Vec<f64> {
        let a = ((m - 1) as f64 / m as f64).sqrt();
        (0..m).map(|i| if i % 2 == 0 { a } else { -a }).collect()
    }

    #[test]
    fn gaussian_optimal_example() {
        let h = bandwidth(&rv(&unit_std(10)), BandwidthRule::GaussianOptimal);
        // (4/30)^0.2 evaluated with 30-digit arithmetic: 0.668325061958268...
        let want = (4.0_f64 / 30.0).powf(0.2);
        assert!((want - 0.668_325_061_958_268_9).abs() < 1e-15);
        assert!((want - 0.66833).abs() < 1e-5);
        assert!((h - want).abs() < 1e-12);
    }

    #[test]
    fn silverman_example() {
        // std 1 and IQR 1.34 give min term 1; 32^-0.2 = 1/2
        let m = 32;
        let mut v = unit_std(m);
        // rescale symmetric pairs so IQR stays >= 1.34 while std = 1
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = rv(&v);
        let s = sample_std(r.as_slice());
        let iqr = iqr_sorted(r.as_slice());
        assert!((s - 1.0).abs() < 1e-12);
        assert!(iqr / 1.34 >= 1.0);
        let h = bandwidth(&r, BandwidthRule::Silverman);
        assert!((h - 0.5).abs() < 1e-12, "{h}");
    }

    #[test]
    fn constant_risks_give_zero_bandwidth() {
        let r = rv(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(bandwidth(&r, BandwidthRule::GaussianOptimal), 0.0);
        assert_eq!(bandwidth(&r, BandwidthRule::Silverman), 0.0);
        assert_eq!(bandwidth(&r, BandwidthRule::MedianHeuristic), 0.0);
        assert_eq!(bandwidth(&r, BandwidthRule::Fixed(0.3)), 0.3);
    }

    #[test]
    fn bandwidth_gradients_match_finite_differences() {
        let base = [0.31, 1.2, 0.77, 2.05, 1.61, 0.05, 0.93];
        for rule in [BandwidthRule::GaussianOptimal, BandwidthRule::Silverman, BandwidthRule::MedianHeuristic] {
            let g = bandwidth_gradient(&rv(&base), rule);
            for k in 0..base.len() {
                let step = 1e-6;
                let mut up = base;
                up[k] += step;
                let mut dn = base;
                dn[k] -= step;
                let fd = (bandwidth(&rv(&up), rule) - bandwidth(&rv(&dn), rule)) / (2.0 * step);
                assert!((fd - g[k]).abs() < 1e-7, "{rule:?} k={k}: {fd} vs {}", g[k]);
            }
            let total: f64 = g.iter().sum();
            assert!(total.abs() < 1e-12);
        }
    }
}
