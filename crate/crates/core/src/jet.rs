//! Second-order forward-mode derivatives along three coordinate directions.
//!
//! A [`Jet`] carries a value, the three first partials and the three *pure*
//! second partials. Mixed partials are never needed by the operators in this
//! crate, and pure second partials compose exactly through the chain rule
//! because each direction is an independent univariate Taylor expansion.

use core::ops::{Add, Div, Mul, Neg, Sub};
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 3],
    pub dd: [f64; 3],
}

impl Jet {
    #[inline]
    pub const fn cst(v: f64) -> Jet {
        Jet { v, d: [0.0; 3], dd: [0.0; 3] }
    }

    /// The coordinate function `x_i` evaluated at `v`.
    #[inline]
    pub fn var(v: f64, i: usize) -> Jet {
        let mut d = [0.0; 3];
        d[i] = 1.0;
        Jet { v, d, dd: [0.0; 3] }
    }

    /// Seeds all three coordinates of a point.
    #[inline]
    pub fn point(x: [f64; 3]) -> [Jet; 3] {
        [Jet::var(x[0], 0), Jet::var(x[1], 1), Jet::var(x[2], 2)]
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    pub fn chain(self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut d = [0.0; 3];
        let mut dd = [0.0; 3];
        for i in 0..3 {
            d[i] = f1 * self.d[i];
            dd[i] = f2 * self.d[i] * self.d[i] + f1 * self.dd[i];
        }
        Jet { v: f0, d, dd }
    }

    pub fn powf(self, p: f64) -> Jet {
        if p == 0.0 {
            return Jet::cst(1.0);
        }
        let f0 = self.v.powf(p);
        let f1 = p * self.v.powf(p - 1.0);
        let f2 = p * (p - 1.0) * self.v.powf(p - 2.0);
        self.chain(f0, f1, f2)
    }

    pub fn sqrt(self) -> Jet {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn cbrt(self) -> Jet {
        let c = self.v.cbrt();
        let c2 = c * c;
        self.chain(c, 1.0 / (3.0 * c2), -2.0 / (9.0 * c2 * self.v))
    }

    pub fn exp(self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Jet {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn recip(self) -> Jet {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    /// `|x|`; the derivative at 0 is taken as 0.
    pub fn abs(self) -> Jet {
        let s = if self.v > 0.0 {
            1.0
        } else if self.v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.chain(self.v.abs(), s, 0.0)
    }

    pub fn sq(self) -> Jet {
        self * self
    }

    pub fn scale(self, k: f64) -> Jet {
        Jet { v: self.v * k, d: self.d.map(|x| x * k), dd: self.dd.map(|x| x * k) }
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(self, o: Jet) -> Jet {
        let mut r = self;
        r.v += o.v;
        for i in 0..3 {
            r.d[i] += o.d[i];
            r.dd[i] += o.dd[i];
        }
        r
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, o: Jet) -> Jet {
        let mut d = [0.0; 3];
        let mut dd = [0.0; 3];
        for i in 0..3 {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
            dd[i] = self.dd[i] * o.v + 2.0 * self.d[i] * o.d[i] + self.v * o.dd[i];
        }
        Jet { v: self.v * o.v, d, dd }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn add(self, c: f64) -> Jet {
        Jet { v: self.v + c, ..self }
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, c: f64) -> Jet {
        Jet { v: self.v - c, ..self }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    #[inline]
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, c: f64) -> Jet {
        self.scale(1.0 / c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_powers_match_hand_derivatives() {
        let [x, y, z] = Jet::point([2.0, 3.0, 0.5]);
        // f = x^3 y / z
        let f = x.powf(3.0) * y / z;
        assert!((f.v - 48.0).abs() < 1e-12);
        assert!((f.d[0] - 3.0 * 4.0 * 3.0 / 0.5).abs() < 1e-12);
        assert!((f.dd[0] - 6.0 * 2.0 * 3.0 / 0.5).abs() < 1e-12);
        assert!((f.d[1] - 16.0).abs() < 1e-12);
        assert_eq!(f.dd[1], 0.0);
        assert!((f.dd[2] - 2.0 * 8.0 * 3.0 / 0.125).abs() < 1e-9);
    }

    #[test]
    fn composition_through_radius() {
        // r = sqrt(u^2 + v^2): d_uu r = v^2 / r^3
        let [u, v, _] = Jet::point([3.0, 4.0, 1.0]);
        let r = (u * u + v * v).sqrt();
        assert!((r.v - 5.0).abs() < 1e-15);
        assert!((r.d[0] - 0.6).abs() < 1e-15);
        assert!((r.dd[0] - 16.0 / 125.0).abs() < 1e-15);
        assert!((r.dd[1] - 9.0 / 125.0).abs() < 1e-15);
    }

    #[test]
    fn abs_ln_exp_cbrt() {
        let [u, _, z] = Jet::point([-2.0, 0.0, 8.0]);
        let a = u.abs().powf(1.5);
        assert!((a.d[0] + 1.5 * 2f64.sqrt()).abs() < 1e-14);
        let c = z.cbrt();
        assert!((c.v - 2.0).abs() < 1e-15 && (c.d[2] - 1.0 / 12.0).abs() < 1e-15);
        assert!((c.dd[2] + 2.0 / (9.0 * 4.0 * 8.0)).abs() < 1e-15);
        let l = z.ln();
        assert!((l.dd[2] + 1.0 / 64.0).abs() < 1e-15);
        let e = (u * 0.5).exp();
        assert!((e.dd[0] - 0.25 * (-1f64).exp()).abs() < 1e-15);
    }
}
