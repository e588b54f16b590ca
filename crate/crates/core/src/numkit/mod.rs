//! Scalar special functions and seeded sampling shared by the rest of the crate.

mod alpha;
mod normal;
mod rng;
mod stats;

pub use alpha::AlphaLevel;
pub(crate) use normal::asymptotic_icdf;
pub use normal::{
    erf, erfc, norm_cdf, std_normal_cdf, std_normal_icdf, std_normal_log_sf, std_normal_pdf, std_normal_sf,
    uses_asymptotic_branch, ASYMPTOTIC_LOG_TAIL,
};
pub use rng::{cell_stream_id, mix64, sample_bernoulli, sample_lognormal, sample_normal, RngStream};
pub use stats::{
    iqr_sorted, mean, median_pairwise_distance, quantile_sorted, sample_std, sample_var, sorted_copy, summary_stats,
    SummaryStats,
};
pub(crate) use stats::{pairwise_distances, type7_position};
