use super::Moments;
use crate::error::{domain, QrmError, Result};
use crate::numkit::RngStream;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions<F> {
    /// Residuals below `tolerance × (largest moment magnitude)` count as solutions.
    pub tolerance: F,
    pub restarts: usize,
    pub seed: u64,
}

impl<F: Scalar> Default for VerifyOptions<F> {
    fn default() -> Self {
        Self { tolerance: F::lit(1e-8), restarts: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyResult<F> {
    pub unique: bool,
    /// A nonzero `x` with equal, nonpositive excess risks in every domain.
    pub witness: Option<Vec<F>>,
    /// Smallest residual found.
    pub residual: F,
    pub threshold: F,
    /// The search ended within a factor of ten above the threshold.
    pub inconclusive: bool,
}

/// Searches for `x ≠ 0` whose excess risks `xᵀ E[XXᵀ]_i x + 2 xᵀ E[NX]_i` are
/// equal across domains and nonpositive in the first, i.e. a predictor at
/// least as good as the structural one with the same risk everywhere.
///
/// Writing `x = u / s` with `‖u‖ = 1` and scaling the forms by `s²` gives
/// `h_i(s) = Q_i(u) + 2 s L_i(u)`. The residual
/// `max(h_1, 0) + Σ_{i<j} |h_i - h_j|` is then convex and piecewise linear in
/// `s`, so it is minimized exactly over its breakpoints, and only the
/// direction `u` is searched (Nelder–Mead from several starts). `s` is capped
/// so that `‖x‖` stays above a small multiple of the moments' natural length
/// scale `‖E[NX]‖ / ‖E[XXᵀ]‖`, keeping trivial solutions near zero out.
pub fn verify_unique_invariant_minimum<F: Scalar>(
    moments: &[Moments<F>],
    opts: VerifyOptions<F>,
) -> Result<VerifyResult<F>> {
    let Some(first) = moments.first() else {
        return domain("verifier needs at least one domain");
    };
    let d = first.dim();
    if let Some(bad) = moments.iter().find(|m| m.dim() != d) {
        return Err(QrmError::Dimension { expected: d, got: bad.dim() });
    }
    if opts.restarts == 0 || !(opts.tolerance > F::zero()) {
        return domain("verifier needs at least one restart and a positive tolerance");
    }
    let scale = moments.iter().fold(F::zero(), |a, m| a.max(m.magnitude()));
    let threshold = opts.tolerance * scale;
    let s_max = {
        let second = moments.iter().fold(F::zero(), |a, m| a.max(m.second_norm()));
        let cross = moments.iter().fold(F::zero(), |a, m| a.max(m.cross_norm()));
        if cross > F::zero() && second > F::zero() {
            F::one() / (F::lit(0.01) * cross / second)
        } else {
            F::one()
        }
    };
    let objective = |y: &[F]| -> (F, F) {
        let norm = y.iter().map(|v| *v * *v).sum::<F>().sqrt();
        if !(norm > F::zero()) {
            return (F::infinity(), F::one());
        }
        let u: Vec<F> = y.iter().map(|v| *v / norm).collect();
        profile(moments, &u, s_max)
    };

    let mut rng = RngStream::new(opts.seed, 0x7665_7269_6679);
    let mut best = (F::infinity(), Vec::new(), F::one());
    for start in 0..opts.restarts {
        let y0: Vec<F> = if start < 2 * d {
            let mut e = vec![F::zero(); d];
            e[start / 2] = if start % 2 == 0 { F::one() } else { -F::one() };
            e
        } else {
            (0..d).map(|_| rng.normal(F::zero(), F::one())).collect()
        };
        let y = nelder_mead(|y| objective(y).0, y0, F::lit(0.3), 300 * d);
        let (r, s) = objective(&y);
        if r < best.0 {
            best = (r, y, s);
        }
        if best.0 < threshold * F::lit(1e-3) {
            break;
        }
    }
    let (residual, y, s) = best;
    let unique = residual >= threshold;
    let witness = (!unique).then(|| {
        let norm = y.iter().map(|v| *v * *v).sum::<F>().sqrt();
        y.iter().map(|v| *v / norm / s).collect()
    });
    Ok(VerifyResult {
        unique,
        witness,
        residual,
        threshold,
        inconclusive: unique && residual < F::lit(10.0) * threshold,
    })
}

/// Minimum over `s ∈ (0, s_max]` of the scaled residual along direction `u`,
/// with the minimizing `s`.
fn profile<F: Scalar>(moments: &[Moments<F>], u: &[F], s_max: F) -> (F, F) {
    let q: Vec<F> = moments.iter().map(|m| m.quadratic(u)).collect();
    let l: Vec<F> = moments.iter().map(|m| m.linear(u)).collect();
    let two = F::lit(2.0);
    let residual = |s: F| -> F {
        let h: Vec<F> = q.iter().zip(&l).map(|(&qi, &li)| qi + two * s * li).collect();
        let mut r = h[0].max(F::zero());
        for i in 0..h.len() {
            for j in i + 1..h.len() {
                r = r + (h[i] - h[j]).abs();
            }
        }
        r
    };
    let mut candidates = vec![s_max, s_max * F::lit(1e-6)];
    if l[0] != F::zero() {
        candidates.push(-q[0] / (two * l[0]));
    }
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            let dl = l[i] - l[j];
            if dl != F::zero() {
                candidates.push(-(q[i] - q[j]) / (two * dl));
            }
        }
    }
    candidates
        .into_iter()
        .filter(|&s| s > F::zero() && s <= s_max)
        .map(|s| (residual(s), s))
        .fold((F::infinity(), s_max), |a, b| if b.0 < a.0 { b } else { a })
}

fn nelder_mead<F: Scalar>(f: impl Fn(&[F]) -> F, x0: Vec<F>, step: F, max_iter: usize) -> Vec<F> {
    let d = x0.len();
    let mut simplex: Vec<(Vec<F>, F)> = Vec::with_capacity(d + 1);
    simplex.push((x0.clone(), f(&x0)));
    for k in 0..d {
        let mut x = x0.clone();
        x[k] = x[k] + step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let half = F::lit(0.5);
    let lerp = |a: &[F], b: &[F], t: F| -> Vec<F> { a.iter().zip(b).map(|(&p, &q)| p + t * (q - p)).collect() };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (lo, hi) = (simplex[0].1, simplex[d].1);
        if (hi - lo).abs() <= F::epsilon() * lo.abs() || hi == lo {
            break;
        }
        let mut centroid = vec![F::zero(); d];
        for (x, _) in &simplex[..d] {
            for (c, &v) in centroid.iter_mut().zip(x) {
                *c = *c + v / F::from_usize_lossy(d);
            }
        }
        let worst = simplex[d].0.clone();
        let reflected = lerp(&centroid, &worst, -F::one());
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst, -F::lit(2.0));
            let fe = f(&expanded);
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let contracted =
                if fr < simplex[d].1 { lerp(&centroid, &reflected, half) } else { lerp(&centroid, &worst, half) };
            let fc = f(&contracted);
            if fc < fr.min(simplex[d].1) {
                simplex[d] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x = lerp(&best, &entry.0, half);
                    let fx = f(&x);
                    *entry = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex.swap_remove(0).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semlab::{excess_risk, Covariate, DomainSpec, InterventionKind};

    fn example(sigma2: f64) -> DomainSpec<f64> {
        DomainSpec::new(1.0, 2.0_f64.sqrt(), sigma2).unwrap()
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let x = nelder_mead(|x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2), vec![0.0, 0.0], 0.3, 2000);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn two_noise_levels_are_identifying() {
        let mo = [Moments::from_spec(&example(0.5)), Moments::from_spec(&example(2.0))];
        let res = verify_unique_invariant_minimum(&mo, VerifyOptions::default()).unwrap();
        assert!(res.unique && !res.inconclusive && res.witness.is_none(), "{res:?}");
    }

    #[test]
    fn one_full_rank_root_domain_is_identifying() {
        let mo = [Moments::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![0.0, 0.0]).unwrap()];
        assert!(verify_unique_invariant_minimum(&mo, VerifyOptions::default()).unwrap().unique);
    }

    #[test]
    fn hard_intervention_on_effect_is_identifying() {
        let base = example(1.0);
        let mo = [
            Moments::from_spec(&base),
            Moments::from_spec(&base.with_intervention(Covariate::X2, InterventionKind::Hard, 2.0).unwrap()),
        ];
        assert!(verify_unique_invariant_minimum(&mo, VerifyOptions::default()).unwrap().unique);
    }

    #[test]
    fn identical_domains_with_descendant_are_not() {
        let (rho, sy2, s32) = (0.4_f64, 1.0, 0.5);
        let vy = 2.0 + 2.0 * rho + sy2;
        let second = vec![vec![1.0, rho, 1.0 + rho], vec![rho, 1.0, 1.0 + rho], vec![1.0 + rho, 1.0 + rho, vy + s32]];
        let one = Moments::new(second, vec![0.0, 0.0, sy2]).unwrap();
        let mo = [one.clone(), one];
        let res = verify_unique_invariant_minimum(&mo, VerifyOptions::default()).unwrap();
        assert!(!res.unique, "{res:?}");
        let w = res.witness.unwrap();
        assert!(w.iter().any(|v| v.abs() > 1e-6));
        let ex = excess_risk(&w, &mo).unwrap();
        assert!(ex[0] <= 1e-8 && (ex[0] - ex[1]).abs() <= 1e-12);
    }
}
