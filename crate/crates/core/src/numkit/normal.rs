//! Standard normal distribution: density, CDF, upper tail and inverse CDF.
//!
//! The upper tail `Q(x) = 1 - Φ(x)` is the primitive, taken from `erfc` in the
//! body. Beyond [`TAIL_LIMIT`] the Laplace continued fraction for the Mills
//! ratio `Q(x)/φ(x)` takes over, which keeps full relative precision deep into
//! the tail and lets the log-tail be evaluated without underflow.

use super::alpha::AlphaLevel;
use crate::error::{domain, Result};
use crate::Scalar;

/// `ln(1 - alpha)` at or below which the inverse CDF uses `sqrt(-2 ln(1 - alpha))`.
pub const ASYMPTOTIC_LOG_TAIL: f64 = -100.0;

const TAIL_LIMIT: f64 = 8.0;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn std_normal_pdf<F: Scalar>(x: F) -> F {
    (-(x * x) * F::lit(0.5)).exp() / F::lit(2.0 * std::f64::consts::PI).sqrt()
}

#[inline]
fn ln_pdf<F: Scalar>(x: F) -> F {
    -(x * x) * F::lit(0.5) - F::lit(LN_SQRT_2PI)
}

/// Mills ratio `Q(x) / φ(x)` for `x >= TAIL_LIMIT`, modified Lentz evaluation of
/// `1 / (x + 1/(x + 2/(x + 3/(x + ...))))`.
fn mills_ratio_cf<F: Scalar>(x: F) -> F {
    let tiny = F::min_positive_value() * F::lit(1e10);
    let mut f = x;
    let mut c = f;
    let mut d = F::zero();
    let mut j = F::zero();
    for _ in 0..1000 {
        j = j + F::one();
        d = x + j * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = d.recip();
        c = x + j / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f = f * delta;
        if (delta - F::one()).abs() <= F::epsilon() {
            break;
        }
    }
    f.recip()
}

/// Mills ratio `Q(x) / φ(x)` for `x >= 0`.
fn mills_ratio<F: Scalar>(x: F) -> F {
    if x >= F::lit(TAIL_LIMIT) {
        mills_ratio_cf(x)
    } else {
        std_normal_sf(x) / std_normal_pdf(x)
    }
}

/// Upper tail `Q(x) = 1 - Φ(x)`. Does not validate its input.
#[inline]
pub fn std_normal_sf<F: Scalar>(x: F) -> F {
    F::lit(0.5 * libm::erfc(x.to_f64_lossy() * std::f64::consts::FRAC_1_SQRT_2))
}

/// `ln Q(x)`, finite for every finite `x`.
pub fn std_normal_log_sf<F: Scalar>(x: F) -> F {
    if x >= F::lit(TAIL_LIMIT) {
        ln_pdf(x) + mills_ratio_cf(x).ln()
    } else if x > -F::lit(TAIL_LIMIT) {
        std_normal_sf(x).ln()
    } else {
        (-std_normal_sf(-x)).ln_1p()
    }
}

/// `Φ(x)` without input validation, for inner loops.
#[inline]
pub fn norm_cdf<F: Scalar>(x: F) -> F {
    std_normal_sf(-x)
}

/// Standard normal CDF. Non-finite input is a domain error.
pub fn std_normal_cdf<F: Scalar>(x: F) -> Result<F> {
    if !x.is_finite() {
        return domain(format!("normal cdf of non-finite value {x}"));
    }
    Ok(norm_cdf(x))
}

pub fn erfc<F: Scalar>(x: F) -> F {
    F::lit(libm::erfc(x.to_f64_lossy()))
}

pub fn erf<F: Scalar>(x: F) -> F {
    F::lit(libm::erf(x.to_f64_lossy()))
}

// Acklam's rational approximation, relative error about 1.15e-9.
#[allow(clippy::excessive_precision)]
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
const P_LOW: f64 = 0.02425;

fn horner<F: Scalar>(coeffs: &[f64], x: F) -> F {
    coeffs.iter().fold(F::zero(), |acc, &c| acc * x + F::lit(c))
}

/// Initial guess for the `x >= 0` solving `Q(x) = exp(ln_q)`, `ln_q <= ln(1/2)`.
fn upper_initial<F: Scalar>(ln_q: F) -> F {
    if ln_q < F::lit(P_LOW.ln()) {
        let r = (F::lit(-2.0) * ln_q).sqrt();
        -horner(&C, r) / (horner(&D, r) * r + F::one())
    } else {
        let u = F::lit(0.5) - ln_q.exp();
        let r = u * u;
        horner(&A, r) * u / (horner(&B, r) * r + F::one())
    }
}

/// Solves `Q(x) = exp(ln_q)` for `x >= 0`, with one Newton step on `ln Q`.
fn upper_quantile<F: Scalar>(ln_q: F) -> F {
    let x = upper_initial(ln_q);
    // d/dx ln Q(x) = -1 / mills_ratio(x)
    x + (std_normal_log_sf(x) - ln_q) * mills_ratio(x.max(F::zero()))
}

/// Standard normal inverse CDF.
///
/// The probability form requires `alpha` in `(0, 1)`. The log-tail form accepts
/// any `ln(1 - alpha) < 0`; at or below [`ASYMPTOTIC_LOG_TAIL`] it returns the
/// asymptotic `sqrt(-2 ln(1 - alpha))`.
pub fn std_normal_icdf<F: Scalar>(a: AlphaLevel<F>) -> Result<F> {
    match a {
        AlphaLevel::Prob(p) => {
            if !(p > F::zero() && p < F::one()) {
                return domain(format!(
                    "inverse normal cdf needs alpha in (0, 1), got {p}; use the log-tail form near 1"
                ));
            }
            if p > F::lit(0.5) {
                Ok(upper_quantile((-p).ln_1p()))
            } else {
                Ok(-upper_quantile(p.ln()))
            }
        }
        AlphaLevel::LogTail(l) => {
            if !(l < F::zero()) || l.is_infinite() {
                return domain(format!("inverse normal cdf needs finite ln(1 - alpha) < 0, got {l}"));
            }
            if l <= F::lit(ASYMPTOTIC_LOG_TAIL) {
                return Ok(asymptotic_icdf(l));
            }
            if l <= F::lit(0.5).ln() {
                Ok(upper_quantile(l))
            } else {
                // alpha < 1/2: the lower tail probability is alpha itself
                let p = -l.exp_m1();
                Ok(-upper_quantile(p.ln()))
            }
        }
    }
}

#[inline]
pub(crate) fn asymptotic_icdf<F: Scalar>(log_tail: F) -> F {
    (F::lit(-2.0) * log_tail).sqrt()
}

/// True when `std_normal_icdf` takes the asymptotic branch for this level.
pub fn uses_asymptotic_branch<F: Scalar>(a: &AlphaLevel<F>) -> bool {
    matches!(a, AlphaLevel::LogTail(l) if *l <= F::lit(ASYMPTOTIC_LOG_TAIL))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn icdf(p: f64) -> f64 {
        std_normal_icdf(AlphaLevel::Prob(p)).unwrap()
    }

    /// Composite Simpson integration of the density from 0 to x.
    fn simpson_cdf(x: f64) -> f64 {
        let n = 200_000;
        let h = x / n as f64;
        let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(0.0) + f(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0_f64).unwrap(), 0.5);
        let oracle = simpson_cdf(1.959964);
        assert!((oracle - 0.975).abs() < 1e-6);
        assert!((std_normal_cdf(1.959964_f64).unwrap() - oracle).abs() < 1e-12);
        for x in [0.3_f64, 1.7, 4.0] {
            let s = std_normal_cdf(-x).unwrap() + std_normal_cdf(x).unwrap();
            assert!((s - 1.0).abs() < 1e-15, "{x}: {s}");
        }
    }

    #[test]
    fn cdf_matches_quadrature_across_range() {
        for &x in &[0.1, 0.5, 1.0, 2.0, 2.9, 3.0, 3.1, 4.5, 6.0] {
            let got = std_normal_cdf(x).unwrap();
            assert!((got - simpson_cdf(x)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn tail_is_relatively_accurate() {
        // Q(10) = 7.619853024160526e-24, Q(20) = 2.753624118606233e-89
        let q10 = std_normal_sf(10.0_f64);
        assert!((q10 / 7.619853024160526e-24 - 1.0).abs() < 1e-12);
        let lq20 = std_normal_log_sf(20.0_f64);
        assert!((lq20 - 2.753624118606233e-89_f64.ln()).abs() < 1e-10);
        // ln Q(50) without underflow; the continued fraction tends to -x^2/2 - ln(x sqrt(2 pi))
        let lq50 = std_normal_log_sf(50.0_f64);
        let approx = -1250.0 - (50.0 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((lq50 - approx).abs() < 1e-3);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn icdf_examples() {
        assert_eq!(icdf(0.5), 0.0);
        let x = icdf(std_normal_cdf(1.3).unwrap());
        assert!((x - 1.3).abs() < 1e-8);
        let far = std_normal_icdf(AlphaLevel::LogTail(-1000.0_f64)).unwrap();
        assert!((far - 44.721_359_549_995_796).abs() < 1e-9);
        assert!(std_normal_icdf(AlphaLevel::Prob(0.0_f64)).is_err());
        assert!(std_normal_icdf(AlphaLevel::Prob(1.0_f64)).is_err());
        assert!(std_normal_icdf(AlphaLevel::LogTail(0.0_f64)).is_err());
    }

    #[test]
    fn icdf_known_values() {
        // reference values of the standard normal quantile function
        let cases = [
            (0.9, 1.2815515655446004),
            (0.975, 1.959963984540054),
            (0.999, 3.090232306167813),
            (1e-10, -6.361340902404056),
        ];
        for (p, want) in cases {
            let got = icdf(p);
            assert!(((got - want) / want).abs() < 1e-9, "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn icdf_inverse_consistency_grid() {
        let n = 20_000;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            // log-spaced toward both ends of [1e-6, 1 - 1e-6]
            let p = if t < 0.5 { 1e-6_f64.powf(1.0 - 2.0 * t) * 0.5 } else { 1.0 - 1e-6_f64.powf(2.0 * t - 1.0) * 0.5 };
            let p = p.clamp(1e-6, 1.0 - 1e-6);
            let back = std_normal_cdf(icdf(p)).unwrap();
            assert!((back - p).abs() <= 1e-8, "p={p}");
        }
    }

    #[test]
    fn log_tail_normal_branch_matches_probability_form() {
        for p in [0.6, 0.9, 0.999, 1.0 - 1e-12] {
            let a = icdf(p);
            let b = std_normal_icdf(AlphaLevel::LogTail((-p).ln_1p())).unwrap();
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
        // deep tail via logs: ln Q(x) must invert
        let x = std_normal_icdf(AlphaLevel::LogTail(-80.0_f64)).unwrap();
        assert!((std_normal_log_sf(x) + 80.0).abs() < 1e-9);
        // alpha below one half from the log form
        let x = std_normal_icdf(AlphaLevel::LogTail((0.7_f64).ln())).unwrap();
        assert!((x - icdf(0.3)).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_branch_continuity() {
        let exact = std_normal_icdf(AlphaLevel::LogTail(ASYMPTOTIC_LOG_TAIL + 1e-9)).unwrap();
        let asym = std_normal_icdf(AlphaLevel::LogTail(ASYMPTOTIC_LOG_TAIL)).unwrap();
        assert!(((asym - exact) / exact).abs() <= 0.02, "{asym} vs {exact}");
    }

    #[test]
    fn monotone_cdf_grid() {
        let mut prev = 0.0;
        for i in 0..10_000 {
            let x = -12.0 + 24.0 * i as f64 / 9_999.0;
            let v = std_normal_cdf(x).unwrap();
            assert!(v >= prev);
            assert!(v > 0.0 && v <= 1.0);
            prev = v;
        }
    }

    #[test]
    fn erf_values() {
        // erf(1) = 0.8427007929497149
        assert!((erf(1.0_f64) - 0.8427007929497149).abs() < 1e-14);
        assert!((erf(-0.2_f64) + 0.2227025892104785).abs() < 1e-14);
        assert!((erfc(2.0_f64) - 0.004677734981047266).abs() < 1e-16);
    }

    #[test]
    fn single_precision_instantiation() {
        let x: f32 = std_normal_icdf(AlphaLevel::Prob(0.975_f32)).unwrap();
        assert!((x - 1.959964).abs() < 1e-4);
        assert!((std_normal_cdf(x).unwrap() - 0.975).abs() < 1e-5);
    }
}
