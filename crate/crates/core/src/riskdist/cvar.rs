use super::{empirical_index, RiskVector};
use crate::error::{domain, Result};
use crate::numkit::sorted_copy;
use crate::Scalar;

/// Empirical superquantile: mean of the largest `m - floor(alpha * m)` risks,
/// i.e. the upper `1 - alpha` tail of the empirical distribution. `alpha = 1`
/// gives the maximum.
pub fn cvar<F: Scalar>(risks: &RiskVector<F>, alpha: F) -> Result<F> {
    if !(alpha >= F::zero() && alpha <= F::one()) {
        return domain(format!("cvar level {alpha} outside [0, 1]"));
    }
    let sorted = sorted_copy(risks.as_slice());
    let m = sorted.len();
    let skip = tail_start(alpha, m);
    if skip >= m {
        return Ok(sorted[m - 1]);
    }
    let tail = &sorted[skip..];
    Ok(tail.iter().copied().sum::<F>() / F::from_usize_lossy(tail.len()))
}

/// `floor(alpha * m)` with the same integer snapping as the quantile index.
fn tail_start<F: Scalar>(alpha: F, m: usize) -> usize {
    if alpha == F::zero() {
        return 0;
    }
    let x = alpha * F::from_usize_lossy(m);
    let r = x.round();
    if (x - r).abs() <= F::lit(1e-9) * x.abs().max(F::one()) {
        r.to_usize().unwrap_or(m)
    } else {
        // floor(x) == ceil(x) - 1 for non-integers
        empirical_index(alpha, m)
    }
}
