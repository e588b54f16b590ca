use super::{bandwidth, BandwidthRule, EstimatorKind, RiskModel, RiskVector};
use crate::error::{domain, QrmError, Result};
use crate::numkit::{
    asymptotic_icdf, mean, norm_cdf, sample_std, sorted_copy, std_normal_icdf, std_normal_log_sf, std_normal_pdf,
    uses_asymptotic_branch, AlphaLevel,
};
use crate::Scalar;

/// Maximum number of interval halvings when inverting the KDE CDF.
pub const BISECTION_STEPS: usize = 32;

/// Tail mass below which KDE inversion compares log upper tails instead of probabilities.
const LOG_TAIL_SWITCH: f64 = 1e-4;

/// Beyond this many kernel widths a Gaussian kernel's CDF is 0 or 1 to double precision.
const KERNEL_CUTOFF: f64 = 9.0;

pub fn fit<F: Scalar>(risks: &RiskVector<F>, kind: EstimatorKind, rule: BandwidthRule<F>) -> Result<RiskModel<F>> {
    let r = risks.as_slice();
    match kind {
        EstimatorKind::Gaussian => RiskModel::gaussian(mean(r), sample_std(r)),
        EstimatorKind::Kde => RiskModel::kde(r.to_vec(), bandwidth(risks, rule)),
        EstimatorKind::Empirical => RiskModel::empirical(r.to_vec()),
    }
}

#[inline]
fn kernel_cdf<F: Scalar>(z: F) -> F {
    let cut = F::lit(KERNEL_CUTOFF);
    if z > cut {
        F::one()
    } else if z < -cut {
        F::zero()
    } else {
        norm_cdf(z)
    }
}

fn step_cdf<F: Scalar>(sorted: &[F], t: F) -> F {
    let count = sorted.partition_point(|&v| v <= t);
    F::from_usize_lossy(count) / F::from_usize_lossy(sorted.len())
}

pub fn cdf<F: Scalar>(model: &RiskModel<F>, t: F) -> F {
    match model {
        RiskModel::Gaussian { mu, sigma } => {
            if *sigma == F::zero() {
                if t >= *mu {
                    F::one()
                } else {
                    F::zero()
                }
            } else {
                norm_cdf((t - *mu) / *sigma)
            }
        }
        RiskModel::Kde { centers, bandwidth } => {
            if *bandwidth == F::zero() {
                step_cdf(&sorted_copy(centers), t)
            } else {
                let total: F = centers.iter().map(|&c| kernel_cdf((t - c) / *bandwidth)).sum();
                total / F::from_usize_lossy(centers.len())
            }
        }
        RiskModel::Empirical { sorted } => step_cdf(sorted, t),
    }
}

/// Density of the fitted model. Zero-width models have no density.
pub fn pdf<F: Scalar>(model: &RiskModel<F>, t: F) -> Result<F> {
    match model {
        RiskModel::Gaussian { mu, sigma } if *sigma > F::zero() => Ok(std_normal_pdf((t - *mu) / *sigma) / *sigma),
        RiskModel::Kde { centers, bandwidth } if *bandwidth > F::zero() => {
            let total: F = centers.iter().map(|&c| std_normal_pdf((t - c) / *bandwidth)).sum();
            Ok(total / (F::from_usize_lossy(centers.len()) * *bandwidth))
        }
        RiskModel::Empirical { .. } => Err(QrmError::Unsupported("density of an empirical step distribution".into())),
        _ => Err(QrmError::Unsupported("density of a zero-width risk model".into())),
    }
}

/// Order-statistic index (0-based) for level `alpha`: `ceil(alpha * m) - 1`, with
/// `alpha = 0` mapping to the minimum. Products within 1e-9 of an integer are
/// snapped to it so that e.g. `0.07 * 100` selects the 7th value.
pub fn empirical_index<F: Scalar>(alpha: F, m: usize) -> usize {
    let x = alpha * F::from_usize_lossy(m);
    let r = x.round();
    let k = if (x - r).abs() <= F::lit(1e-9) * x.abs().max(F::one()) { r } else { x.ceil() };
    k.to_usize().unwrap_or(0).clamp(1, m) - 1
}

fn empirical_icdf<F: Scalar>(sorted: &[F], a: AlphaLevel<F>) -> Result<F> {
    let alpha = a.alpha();
    if !(alpha >= F::zero() && alpha <= F::one()) {
        return domain(format!("empirical quantile level {alpha} outside [0, 1]"));
    }
    Ok(sorted[empirical_index(alpha, sorted.len())])
}

pub fn icdf<F: Scalar>(model: &RiskModel<F>, a: AlphaLevel<F>) -> Result<F> {
    match model {
        RiskModel::Gaussian { mu, sigma } => {
            if *sigma == F::zero() {
                return Ok(*mu);
            }
            Ok(*mu + *sigma * std_normal_icdf(a)?)
        }
        RiskModel::Kde { centers, bandwidth } => kde_icdf(centers, *bandwidth, a),
        RiskModel::Empirical { sorted } => empirical_icdf(sorted, a),
    }
}

/// How the KDE equation `F(q) = alpha` is compared at a trial point.
#[derive(Clone, Copy)]
pub(super) enum KdeTarget<F> {
    /// `mean Φ(z_i) - alpha`.
    Prob(F),
    /// `ln(1 - alpha) - ln mean Q(z_i)`, exact tails.
    LogTail(F),
    /// As `LogTail`, but with kernel tails `exp(-z^2/2)` so that the per-kernel
    /// inverse is the asymptotic `sqrt(-2 ln(1 - alpha))`.
    Asymptotic(F),
}

impl<F: Scalar> KdeTarget<F> {
    pub(super) fn for_level(a: &AlphaLevel<F>) -> Self {
        if uses_asymptotic_branch(a) {
            Self::Asymptotic(a.ln_tail())
        } else if a.ln_tail() < F::lit(LOG_TAIL_SWITCH.ln()) {
            Self::LogTail(a.ln_tail())
        } else {
            Self::Prob(a.alpha())
        }
    }

    /// Increasing in `x`; zero at the quantile.
    fn excess(&self, centers: &[F], h: F, x: F) -> F {
        let m = F::from_usize_lossy(centers.len());
        match *self {
            Self::Prob(alpha) => centers.iter().map(|&c| kernel_cdf((x - c) / h)).sum::<F>() / m - alpha,
            Self::LogTail(l) => l - (log_sum_exp(centers.iter().map(|&c| std_normal_log_sf((x - c) / h))) - m.ln()),
            Self::Asymptotic(l) => {
                l - (log_sum_exp(centers.iter().map(|&c| asymptotic_log_tail((x - c) / h))) - m.ln())
            }
        }
    }
}

/// Log upper tail of a kernel under the asymptotic model.
#[inline]
pub(super) fn asymptotic_log_tail<F: Scalar>(z: F) -> F {
    if z > F::zero() {
        -(z * z) * F::lit(0.5)
    } else {
        F::zero()
    }
}

pub(super) fn log_sum_exp<F: Scalar>(terms: impl Iterator<Item = F> + Clone) -> F {
    let max = terms.clone().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<F>().ln()
}

/// Per-kernel inverse CDF multiplier: `Φ^{-1}(alpha)`, asymptotic when the level calls for it.
pub(super) fn kernel_quantile<F: Scalar>(a: &AlphaLevel<F>) -> Result<F> {
    if uses_asymptotic_branch(a) {
        Ok(asymptotic_icdf(a.ln_tail()))
    } else {
        std_normal_icdf(*a)
    }
}

fn kde_icdf<F: Scalar>(centers: &[F], h: F, a: AlphaLevel<F>) -> Result<F> {
    if h == F::zero() {
        return empirical_icdf(&sorted_copy(centers), a);
    }
    let z = kernel_quantile(&a)?;
    let lo_center = centers.iter().copied().fold(F::infinity(), F::min);
    let hi_center = centers.iter().copied().fold(F::neg_infinity(), F::max);
    let lo = lo_center + h * z;
    let hi = hi_center + h * z;
    if lo == hi {
        return Ok(lo);
    }
    let target = KdeTarget::for_level(&a);
    bisect(|x| target.excess(centers, h, x), lo, hi)
}

/// Bisection for an increasing `g` on `[lo, hi]`, at most [`BISECTION_STEPS`]
/// halvings, finished with one secant step inside the final bracket.
fn bisect<F: Scalar>(g: impl Fn(F) -> F, mut lo: F, mut hi: F) -> Result<F> {
    let tol = F::lit(1e-8);
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    if g_lo > tol || g_hi < -tol || g_lo.is_nan() || g_hi.is_nan() {
        return Err(QrmError::Bracket { lo: lo.to_f64_lossy(), hi: hi.to_f64_lossy() });
    }
    if g_lo >= F::zero() {
        return Ok(lo);
    }
    if g_hi <= F::zero() {
        return Ok(hi);
    }
    for _ in 0..BISECTION_STEPS {
        let mid = (lo + hi) * F::lit(0.5);
        let g_mid = g(mid);
        if g_mid == F::zero() {
            return Ok(mid);
        }
        if g_mid < F::zero() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    let t = -g_lo / (g_hi - g_lo);
    Ok(lo + (hi - lo) * t.max(F::zero()).min(F::one()))
}
