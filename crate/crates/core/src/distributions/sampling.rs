//! Exact gamma variates and rounding of continuous draws to counts.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest synthetic count; draws beyond it are clamped.
pub const COUNT_CEILING: u64 = i64::MAX as u64;

/// A rounded draw and whether it hit [`COUNT_CEILING`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Draw {
    pub count: u64,
    pub clamped: bool,
}

impl Draw {
    pub const ZERO: Draw = Draw {
        count: 0,
        clamped: false,
    };

    pub fn exact(count: u64) -> Self {
        Draw {
            count,
            clamped: false,
        }
    }
}

/// Round half up to a count, given `ln w`. Non-finite or huge values clamp.
pub fn round_ln_draw(ln_w: f64) -> Draw {
    if ln_w < -std::f64::consts::LN_2 {
        return Draw::ZERO;
    }
    round_draw(ln_w.exp())
}

/// Round half up to a count.
pub fn round_draw(w: f64) -> Draw {
    if w.is_nan() {
        return Draw::ZERO;
    }
    let r = (w + 0.5).floor();
    if r < 1.0 {
        Draw::ZERO
    } else if r >= COUNT_CEILING as f64 {
        Draw {
            count: COUNT_CEILING,
            clamped: true,
        }
    } else {
        Draw::exact(r as u64)
    }
}

/// Marsaglia–Tsang rejection sampler for `Gamma(shape, 1)`, shape >= 1.
fn marsaglia_tsang<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Natural log of a `Gamma(shape, 1)` variate.
///
/// For shape < 1 the boost `G(shape + 1) * U^(1/shape)` is applied in log space,
/// so very small shapes keep their tail instead of underflowing to zero.
pub fn sample_ln_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0 && shape.is_finite());
    if shape >= 1.0 {
        marsaglia_tsang(shape, rng).ln()
    } else {
        let g = marsaglia_tsang(shape + 1.0, rng);
        // U in (0, 1]
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

/// A `Gamma(shape, scale)` variate.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    (sample_ln_gamma(shape, rng) + scale.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::stream::CellStream;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_draw(0.49).count, 0);
        assert_eq!(round_draw(0.5).count, 1);
        assert_eq!(round_draw(7.2).count, 7);
        assert_eq!(round_draw(7.5).count, 8);
        assert_eq!(round_ln_draw(f64::NEG_INFINITY), Draw::ZERO);
        assert_eq!(round_ln_draw(0.5f64.ln() - 1e-12).count, 0);
        assert_eq!(round_ln_draw(3.0f64.ln()).count, 3);
    }

    #[test]
    fn huge_draws_clamp() {
        let d = round_draw(1e30);
        assert!(d.clamped);
        assert_eq!(d.count, COUNT_CEILING);
        assert!(round_ln_draw(f64::INFINITY).clamped);
        assert!(!round_draw(1e18).clamped);
    }

    #[test]
    fn gamma_moments() {
        for &(shape, scale) in &[(0.3f64, 2.0f64), (1.0, 1.0), (4.0, 0.5), (250.0, 0.04)] {
            let mut rng = CellStream::new(99, 0, shape.to_bits());
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| sample_gamma(shape, scale, &mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let true_mean = shape * scale;
            let true_var = shape * scale * scale;
            let se = (true_var / n as f64).sqrt();
            assert!((mean - true_mean).abs() < 4.0 * se, "shape {shape}: mean {mean}");
            // var of sample variance for gamma: (m4 - s^4)/n with m4 = 3 s^4 + 6 k θ^4
            let m4 = 3.0 * true_var * true_var + 6.0 * shape * scale.powi(4);
            let se_var = ((m4 - true_var * true_var) / n as f64).sqrt();
            assert!((var - true_var).abs() < 4.0 * se_var, "shape {shape}: var {var}");
        }
    }

    #[test]
    fn tiny_shape_keeps_its_tail() {
        // P(G > 1) for shape a, scale 1 is Q(a, 1) ~ a * E1(1) = a * 0.219384
        let shape = 1e-4;
        let mut rng = CellStream::new(5, 0, 0);
        let n = 2_000_000;
        let hits = (0..n).filter(|_| sample_ln_gamma(shape, &mut rng) > 0.0).count();
        let p = crate::distributions::special::gamma_q(shape, 1.0);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let rate = hits as f64 / n as f64;
        assert!((rate - p).abs() < 4.0 * se, "rate {rate}, expected {p}");
    }
}
