//! Reference computations shared by the integration tests. Nothing here
//! calls into the crate's special functions.
#![allow(dead_code)]

use countsynth::table::{gen_fixture, TableSchema, TargetHistogram, Variable};
use countsynth::ContingencyTable;

/// ln Gamma by upward recurrence and the Stirling series.
pub fn ref_ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0;
    let mut z = x;
    while z < 15.0 {
        shift -= z.ln();
        z += 1.0;
    }
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z2 * z2 * z) - 1.0 / (1680.0 * z2 * z2 * z2 * z)
        + 1.0 / (1188.0 * z2 * z2 * z2 * z2 * z);
    shift + (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration to absolute tolerance `tol`.
/// The interval with the largest error estimate is bisected until the
/// summed estimate drops below `tol` or the interval budget runs out.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let mut parts = vec![(a, b, gk15(f, a, b))];
    for _ in 0..5000 {
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= tol {
            break;
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(i);
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            parts.push((lo, hi, (gk15(f, lo, hi).0, 0.0)));
            continue;
        }
        parts.push((lo, m, gk15(f, lo, m)));
        parts.push((m, hi, gk15(f, m, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

/// Gamma density with the given shape and scale, evaluated in log space
/// relative to the mode so large shapes stay accurate.
pub struct RefGamma {
    pub shape: f64,
    pub scale: f64,
    ln_norm: f64,
}

impl RefGamma {
    pub fn new(shape: f64, scale: f64) -> Self {
        Self {
            shape,
            scale,
            ln_norm: -shape * scale.ln() - ref_ln_gamma(shape),
        }
    }

    /// `GAF(mu, sigma, nu)` as a gamma distribution.
    pub fn gaf(mu: f64, sigma: f64, nu: f64) -> Self {
        let shape = sigma.powi(-2) * mu.powf(2.0 - nu);
        Self::new(shape, mu / shape)
    }

    pub fn pdf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        ((self.shape - 1.0) * w.ln() - w / self.scale + self.ln_norm).exp()
    }

    /// `P(lo < W < hi)` by quadrature. Below the mode of a small-shape
    /// density the substitution `u = w^shape` removes the singularity at 0.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        if hi <= lo {
            return 0.0;
        }
        let a = self.shape;
        let tol = 1e-14;
        if a >= 1.0 {
            let sd = a.sqrt() * self.scale;
            let mean = a * self.scale;
            // split at points of rapid change so the adaptive rule sees the peak
            let mut cuts = vec![lo];
            for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
                let c = mean + k * sd;
                if c > lo && c < hi {
                    cuts.push(c);
                }
            }
            cuts.push(hi);
            return cuts.windows(2).map(|w| integrate(&|x| self.pdf(x), w[0], w[1], tol)).sum();
        }
        // w = u^(1/a): density times dw is exp(-w/scale) * norm / a du
        let norm = self.ln_norm.exp() / a;
        let g = |u: f64| norm * (-(u.powf(1.0 / a)) / self.scale).exp();
        let (ul, uh) = (lo.powf(a), hi.powf(a));
        integrate(&g, ul, uh, tol * 1e-3)
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }
}

/// Discretized mass at `y` by quadrature.
pub fn ref_rounded_mass(g: &RefGamma, y: u64) -> f64 {
    if y == 0 {
        g.mass(0.0, 0.5)
    } else {
        g.mass(y as f64 - 0.5, y as f64 + 0.5)
    }
}

/// Single-variable schema of `n` cells with a second binary variable when `n` is even.
pub fn flat_schema(n: usize) -> TableSchema {
    assert!(n.is_multiple_of(2));
    TableSchema::new(vec![
        Variable::new("CELL", (0..n / 2).map(|i| format!("c{i}"))),
        Variable::new("HALF", ["a", "b"]),
    ])
    .unwrap()
}

/// Table over `n` cells following the census-like size histogram.
pub fn census_like(n: usize, seed: u64) -> ContingencyTable {
    let target: TargetHistogram = countsynth::table::school_census_target(100.0);
    gen_fixture(&flat_schema(n), &target, seed).unwrap().table
}

/// Mean and unbiased variance.
pub fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    (mean, m2 / (n as f64 - 1.0), n)
}
