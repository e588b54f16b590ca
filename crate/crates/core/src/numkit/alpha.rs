use crate::error::{domain, Result};
use crate::Scalar;

/// A quantile level, stored either as the probability itself or as `ln(1 - alpha)`.
///
/// The logarithmic form reaches levels like `1 - e^-1000` that have no
/// floating-point probability representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaLevel<F> {
    Prob(F),
    LogTail(F),
}

impl<F: Scalar> AlphaLevel<F> {
    pub fn prob(alpha: F) -> Result<Self> {
        if !(alpha >= F::zero() && alpha <= F::one()) {
            return domain(format!("alpha {alpha} outside [0, 1]"));
        }
        Ok(Self::Prob(alpha))
    }

    pub fn log_tail(log_one_minus_alpha: F) -> Result<Self> {
        if !(log_one_minus_alpha <= F::zero()) {
            return domain(format!("ln(1 - alpha) = {log_one_minus_alpha} must be <= 0"));
        }
        Ok(Self::LogTail(log_one_minus_alpha))
    }

    /// The level as a probability. Extreme log-tail levels round to 1.
    pub fn alpha(&self) -> F {
        match *self {
            Self::Prob(a) => a,
            Self::LogTail(l) => -l.exp_m1(),
        }
    }

    /// `1 - alpha`, exact for the log-tail form until it underflows.
    pub fn tail(&self) -> F {
        match *self {
            Self::Prob(a) => F::one() - a,
            Self::LogTail(l) => l.exp(),
        }
    }

    /// `ln(1 - alpha)`; `-inf` for `Prob(1)`.
    pub fn ln_tail(&self) -> F {
        match *self {
            Self::Prob(a) => (-a).ln_1p(),
            Self::LogTail(l) => l,
        }
    }

    pub fn as_log_tail(&self) -> Self {
        Self::LogTail(self.ln_tail())
    }
}

impl<F: Scalar> From<F> for AlphaLevel<F> {
    fn from(alpha: F) -> Self {
        Self::Prob(alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        let a = AlphaLevel::prob(0.9_f64).unwrap();
        assert!((a.ln_tail() - 0.1_f64.ln()).abs() < 1e-15);
        assert!((a.as_log_tail().alpha() - 0.9).abs() < 1e-15);
        let extreme = AlphaLevel::log_tail(-1000.0_f64).unwrap();
        assert_eq!(extreme.alpha(), 1.0);
        assert_eq!(extreme.tail(), 0.0);
        assert_eq!(extreme.ln_tail(), -1000.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(AlphaLevel::prob(1.5_f64).is_err());
        assert!(AlphaLevel::prob(f64::NAN).is_err());
        assert!(AlphaLevel::log_tail(0.1_f64).is_err());
    }
}
