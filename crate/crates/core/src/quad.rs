//! Gauss–Legendre and Gauss–Kronrod quadrature.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Appends the nodes and weights of this rule mapped to `[a, b]`.
    pub fn push_mapped(&self, a: f64, b: f64, out_t: &mut Vec<f64>, out_w: &mut Vec<f64>) {
        let c = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out_t.push(c + hw * x);
            out_w.push(hw * w);
        }
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for k in 0..panels {
            let lo = a + h * k as f64;
            let c = lo + 0.5 * h;
            let mut ps = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                ps += w * f(c + 0.5 * h * x);
            }
            s += 0.5 * h * ps;
        }
        s
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
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
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration to absolute-or-relative tolerance `tol`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut stack: Vec<(f64, f64, u32)> = alloc::vec![(a, b, 0)];
    let mut total = 0.0;
    let (whole, _) = gk15(&mut f, a, b);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let len = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&mut f, lo, hi);
        let share = tol * scale.max(1e-300) * ((hi - lo).abs() / len);
        if err <= share || depth >= 40 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let g = GaussLegendre::new(20);
        let s: f64 = g.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let i = g.integrate(|x| x.powi(38), -1.0, 1.0, 1);
        assert!((i - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = integrate_adaptive(|x| 1.0 / (1.0 + 1e4 * x * x), -1.0, 1.0, 1e-13);
        let exact = 2.0 * (100.0f64).atan() / 100.0;
        assert!((v - exact).abs() < 1e-13 * exact);
    }
}
