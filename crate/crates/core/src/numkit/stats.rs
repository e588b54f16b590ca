use crate::error::{domain, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats<F> {
    pub mean: F,
    /// `None` for a single value (m - 1 denominator).
    pub sample_std: Option<F>,
    pub median: F,
    pub iqr: F,
    pub median_pairwise_distance: F,
}

pub fn summary_stats<F: Scalar>(values: &[F]) -> Result<SummaryStats<F>> {
    if values.is_empty() {
        return domain("summary statistics of an empty sample");
    }
    let sorted = sorted_copy(values);
    Ok(SummaryStats {
        mean: mean(values),
        sample_std: (values.len() >= 2).then(|| sample_std(values)),
        median: quantile_sorted(&sorted, F::lit(0.5)),
        iqr: iqr_sorted(&sorted),
        median_pairwise_distance: median_pairwise_distance(values),
    })
}

/// Mean, accumulated relative to the first value so constant input is exact.
pub fn mean<F: Scalar>(values: &[F]) -> F {
    let first = values[0];
    first + values.iter().map(|&v| v - first).sum::<F>() / F::from_usize_lossy(values.len())
}

/// Sample standard deviation with the `m - 1` denominator. Requires `len >= 2`.
pub fn sample_std<F: Scalar>(values: &[F]) -> F {
    sample_var(values).sqrt()
}

pub fn sample_var<F: Scalar>(values: &[F]) -> F {
    let mu = mean(values);
    let ss: F = values.iter().map(|&v| (v - mu) * (v - mu)).sum();
    ss / F::from_usize_lossy(values.len() - 1)
}

pub fn sorted_copy<F: Scalar>(values: &[F]) -> Vec<F> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    v
}

/// Position of the type-7 (linear interpolation) quantile: `(lower index, fraction)`.
pub(crate) fn type7_position<F: Scalar>(n: usize, p: F) -> (usize, F) {
    let h = F::from_usize_lossy(n - 1) * p;
    let lo = h.floor();
    let idx = lo.to_usize().unwrap_or(0).min(n - 1);
    (idx, h - lo)
}

/// Type-7 quantile of a sorted sample.
pub fn quantile_sorted<F: Scalar>(sorted: &[F], p: F) -> F {
    let (i, frac) = type7_position(sorted.len(), p);
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn iqr_sorted<F: Scalar>(sorted: &[F]) -> F {
    quantile_sorted(sorted, F::lit(0.75)) - quantile_sorted(sorted, F::lit(0.25))
}

/// Median of `|x_i - x_j|` over all pairs `i < j`; zero for a single value.
pub fn median_pairwise_distance<F: Scalar>(values: &[F]) -> F {
    if values.len() < 2 {
        return F::zero();
    }
    let mut d = pairwise_distances(values);
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    quantile_sorted(&d, F::lit(0.5))
}

pub(crate) fn pairwise_distances<F: Scalar>(values: &[F]) -> Vec<F> {
    let mut d = Vec::with_capacity(values.len() * (values.len() - 1) / 2);
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i + 1..] {
            d.push((a - b).abs());
        }
    }
    d
}
