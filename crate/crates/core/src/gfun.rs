//! The Laplace transform `G_s(eta) = E_eta[exp(s T)]` of the exit time of the
//! OU process `d eta = (h + 3/2) eta dt + sqrt(2 kappa2) dW` from `(-eta*, eta*)`.
//!
//! With `a = s / (h + 3/2)` and `b = (h + 3/2) / kappa2`,
//!
//! ```text
//! G_s(eta) = I(sqrt(b) eta) / I(sqrt(b) eta*),   I(w) = ∫_0^∞ t^{a-1} e^{-t²/2} cos(w t) dt.
//! ```
//!
//! The `t^{a-1}` singularity on `[0, 1]` is removed by substituting `w = t^a`;
//! the tail on `[1, t_max]` uses composite Gauss–Legendre with one panel per
//! oscillation period. Nodes and weights are built once per kernel.

use crate::quad::GaussLegendre;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use num_traits::Float;

/// `e^{-t_max^2/2} < 1e-18`.
const T_MAX: f64 = 9.11;
const GL_ORDER: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum GError {
    /// `s` must lie in `(0, h + 3/2)`.
    RateOutOfRange { s: f64, upper: f64 },
    BadParameter(&'static str),
}

impl fmt::Display for GError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GError::RateOutOfRange { s, upper } => {
                write!(f, "exit-time rate s = {s} must lie in (0, {upper})")
            }
            GError::BadParameter(m) => write!(f, "{m}"),
        }
    }
}

impl core::error::Error for GError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GValue {
    pub g: f64,
    pub dg: f64,
    pub d2g: f64,
}

#[derive(Debug, Clone)]
pub struct GKernel {
    s: f64,
    h: f64,
    kappa2: f64,
    eta_star: f64,
    omega: f64,
    t: Vec<f64>,
    w: Vec<f64>,
    den: f64,
}

impl GKernel {
    pub fn new(s: f64, h: f64, kappa2: f64, eta_star: f64) -> Result<Self, GError> {
        let c = h + 1.5;
        if !(s > 0.0 && s < c) {
            return Err(GError::RateOutOfRange { s, upper: c });
        }
        if !(kappa2 > 0.0) || !(eta_star > 0.0) {
            return Err(GError::BadParameter("kappa2 and eta* must be positive"));
        }
        let a = s / c;
        let omega = (c / kappa2).sqrt();
        let phase = omega * eta_star;
        let gl = GaussLegendre::new(GL_ORDER);
        let mut t = Vec::new();
        let mut w = Vec::new();

        // [0, 1] in the variable w = t^a; dt t^{a-1} = dw / a.
        let p0 = 8 + (phase / (a * 2.0 * PI)).ceil() as usize;
        let (mut wn, mut ww) = (Vec::new(), Vec::new());
        let hstep = 1.0 / p0 as f64;
        for k in 0..p0 {
            gl.push_mapped(k as f64 * hstep, (k + 1) as f64 * hstep, &mut wn, &mut ww);
        }
        for (x, wt) in wn.into_iter().zip(ww) {
            let tt = x.powf(1.0 / a);
            t.push(tt);
            w.push(wt / a * (-0.5 * tt * tt).exp());
        }

        // [1, T_MAX], one panel per period of cos(omega eta* t).
        let p1 = 4 + (phase * (T_MAX - 1.0) / (2.0 * PI)).ceil() as usize;
        let hstep = (T_MAX - 1.0) / p1 as f64;
        let (mut tn, mut tw) = (Vec::new(), Vec::new());
        for k in 0..p1 {
            gl.push_mapped(1.0 + k as f64 * hstep, 1.0 + (k + 1) as f64 * hstep, &mut tn, &mut tw);
        }
        for (tt, wt) in tn.into_iter().zip(tw) {
            t.push(tt);
            w.push(wt * tt.powf(a - 1.0) * (-0.5 * tt * tt).exp());
        }

        let mut k = GKernel { s, h, kappa2, eta_star, omega, t, w, den: 1.0 };
        k.den = k.raw(eta_star).0;
        Ok(k)
    }

    /// `(I, I', I'')` in the variable `eta` (chain rule through `omega`), unnormalised.
    fn raw(&self, eta: f64) -> (f64, f64, f64) {
        let x = self.omega * eta;
        let (mut c0, mut s1, mut c2) = (0.0, 0.0, 0.0);
        for (&t, &w) in self.t.iter().zip(&self.w) {
            let (sn, cs) = (x * t).sin_cos();
            c0 += w * cs;
            s1 += w * t * sn;
            c2 += w * t * t * cs;
        }
        (c0, -self.omega * s1, -self.omega * self.omega * c2)
    }

    /// `G`, `G'`, `G''` at `eta`. Values outside `[-eta*, eta*]` are the analytic continuation.
    pub fn eval(&self, eta: f64) -> GValue {
        if eta.abs() == self.eta_star {
            let (_, d1, d2) = self.raw(eta);
            return GValue { g: 1.0, dg: d1 / self.den, d2g: d2 / self.den };
        }
        let (g, d1, d2) = self.raw(eta);
        GValue { g: g / self.den, dg: d1 / self.den, d2g: d2 / self.den }
    }

    pub fn g(&self, eta: f64) -> f64 {
        self.eval(eta).g
    }

    /// Unnormalised denominator `I(sqrt(b) eta*)`; positive for every admissible `s`.
    pub fn denominator(&self) -> f64 {
        self.den
    }

    /// Residual of `kappa2 G'' + (h + 3/2) eta G' + s G = 0`, relative to the size of its terms.
    pub fn ode_residual(&self, eta: f64) -> f64 {
        let v = self.eval(eta);
        let terms = [self.kappa2 * v.d2g, (self.h + 1.5) * eta * v.dg, self.s * v.g];
        let sum: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|x| x.abs()).sum();
        sum.abs() / scale.max(f64::MIN_POSITIVE)
    }

    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn eta_star(&self) -> f64 {
        self.eta_star
    }
    pub fn nodes(&self) -> usize {
        self.t.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values_are_one() {
        let k = GKernel::new(0.4, 0.1, 1.0, 10.0).unwrap();
        assert_eq!(k.g(10.0), 1.0);
        assert_eq!(k.g(-10.0), 1.0);
    }

    #[test]
    fn rejects_rates_outside_range() {
        assert!(GKernel::new(1.6, 0.1, 1.0, 10.0).is_err());
        assert!(GKernel::new(0.0, 0.1, 1.0, 10.0).is_err());
    }

    #[test]
    fn reference_values() {
        // Closed form 2^{a/2-1} Gamma(a/2) 1F1(a/2; 1/2; -w²/2) at 30 digits.
        let k4 = GKernel::new(0.4, 0.1, 1.0, 10.0).unwrap();
        let k8 = GKernel::new(0.8, 0.1, 1.0, 10.0).unwrap();
        let cases = [
            (&k4, 0.0, 2.310_525_220_677_497),
            (&k4, 5.0, 1.192_909_433_643_095),
            (&k8, 0.0, 6.103_060_749_043_852),
            (&k4, 9.0, 1.026_931_294_687_133),
            (&k8, 2.5, 2.108_658_197_589_000),
            (&k8, 5.0, 1.424_899_712_188_513),
        ];
        for (k, eta, want) in cases {
            let got = k.g(eta);
            assert!((got - want).abs() < 1e-11 * want, "eta {eta}: {got} vs {want}");
        }
    }
}
