use super::DomainDataset;
use crate::error::{domain, Result};
use crate::numkit::{cell_stream_id, RngStream};
use crate::Scalar;

/// Agreement rates of two ±1 features with a uniform binary label. `color` is
/// strongly predictive but its rate changes across domains; `shape` is
/// weaker but stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorShapeSpec<F> {
    pub p_color: F,
    pub p_shape: F,
}

impl<F: Scalar> ColorShapeSpec<F> {
    pub fn new(p_color: F, p_shape: F) -> Result<Self> {
        for (name, p) in [("p_color", p_color), ("p_shape", p_shape)] {
            if !(p >= F::zero() && p <= F::one()) {
                return domain(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(Self { p_color, p_shape })
    }

    pub fn with_color(p_color: F) -> Result<Self> {
        Self::new(p_color, F::lit(0.75))
    }
}

/// `n` rows of `(color, shape)` in `{-1, +1}` with labels in `{0, 1}`.
pub fn generate_color_shape<F: Scalar>(spec: &ColorShapeSpec<F>, n: usize, seed: u64) -> Result<DomainDataset<F>> {
    if n == 0 {
        return domain("dataset size must be >= 1");
    }
    let mut rng = RngStream::new(seed, cell_stream_id("semlab.color-shape", 0));
    let half = F::lit(0.5);
    let sign = |b: bool| if b { F::one() } else { -F::one() };
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.bernoulli(half);
        let color = label ^ !rng.bernoulli(spec.p_color);
        let shape = label ^ !rng.bernoulli(spec.p_shape);
        x.push(sign(color));
        x.push(sign(shape));
        y.push(if label { F::one() } else { F::zero() });
    }
    DomainDataset::new(vec!["color".into(), "shape".into()], x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agreement(ds: &DomainDataset<f64>, col: usize) -> f64 {
        let hits = ds.rows().filter(|(x, y)| (x[col] > 0.0) == (*y > 0.5)).count();
        hits as f64 / ds.len() as f64
    }

    #[test]
    fn noiseless_features_equal_label() {
        let ds = generate_color_shape(&ColorShapeSpec::new(1.0, 1.0).unwrap(), 500, 1).unwrap();
        for (x, y) in ds.rows() {
            let s = 2.0 * y - 1.0;
            assert_eq!(x, [s, s]);
        }
    }

    #[test]
    fn agreement_rates_concentrate() {
        let ds = generate_color_shape(&ColorShapeSpec::with_color(0.9).unwrap(), 100_000, 9).unwrap();
        let c = agreement(&ds, 0);
        assert!((0.895..=0.905).contains(&c), "{c}");
        let s = agreement(&ds, 1);
        assert!((s - 0.75).abs() < 0.005, "{s}");
        let pos = ds.labels().iter().sum::<f64>() / ds.len() as f64;
        assert!((pos - 0.5).abs() < 0.005);
    }

    #[test]
    fn shape_rate_is_stable_across_color_rates() {
        for (i, pc) in [0.1, 0.5, 0.8, 0.9].into_iter().enumerate() {
            let ds = generate_color_shape(&ColorShapeSpec::with_color(pc).unwrap(), 50_000, i as u64).unwrap();
            assert!((agreement(&ds, 1) - 0.75).abs() < 0.01);
        }
    }

    #[test]
    fn csv_header() {
        let ds = generate_color_shape(&ColorShapeSpec::with_color(0.5).unwrap(), 2, 0).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("color,shape,y\n"));
    }
}
