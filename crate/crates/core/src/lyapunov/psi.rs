//! The averaging function of the inner region and the smooth cut-off.

use super::LyapunovParams;
use crate::jet::Jet;
use num_traits::Float;

fn bump(t: Jet) -> Jet {
    if t.v <= 0.0 {
        Jet::cst(0.0)
    } else {
        (-t.recip()).exp()
    }
}

/// Smooth monotone step: 0 for `x <= 1`, 1 for `x >= 2`.
pub fn lambda1(x: Jet) -> Jet {
    if x.v <= 1.0 {
        return Jet::cst(0.0);
    }
    if x.v >= 2.0 {
        return Jet::cst(1.0);
    }
    let a = bump(x - 1.0);
    let b = bump(-x + 2.0);
    a / (a + b)
}

/// `sup |lambda1'|`, attained at `x = 3/2`.
pub const LAMBDA1_D1_SUP: f64 = 2.0;
/// `sup |lambda1''|`, rounded up.
pub const LAMBDA1_D2_SUP: f64 = 9.85;

pub fn lambda1_value(x: f64) -> f64 {
    lambda1(Jet::cst(x)).v
}

/// `psi1`: quadratic cap inside `r² <= J`, logarithmic outside.
pub fn psi1(u: Jet, v: Jet, j: f64) -> Jet {
    let r2 = u * u + v * v;
    if r2.v <= j {
        Jet::cst(0.5 * j - 0.5 * j * j.ln()) - r2 * 0.5
    } else {
        r2.ln() * (-0.5 * j)
    }
}

/// `psi2 = -m (u / r²) lambda1(2 r² / J)`.
pub fn psi2(u: Jet, v: Jet, j: f64, m: f64) -> Jet {
    let r2 = u * u + v * v;
    if r2.v <= 0.5 * j {
        return Jet::cst(0.0);
    }
    -(u / r2) * lambda1(r2 * (2.0 / j)) * m
}

pub fn psi(x: [Jet; 3], lp: &LyapunovParams) -> Jet {
    psi1(x[0], x[1], lp.j()) + psi2(x[0], x[1], lp.j(), lp.m())
}

/// Value and gradient `(psi, d_u psi, d_v psi)`.
pub fn psi_grad(u: f64, v: f64, lp: &LyapunovParams) -> (f64, f64, f64) {
    let x = Jet::point([u, v, 1.0]);
    let p = psi(x, lp);
    (p.v, p.d[0], p.d[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_sups_bound_finite_differences() {
        // second differences of the value on a fine mesh, independent of the jet arithmetic
        let h = 1e-4;
        let (mut d1, mut d2) = (0.0f64, 0.0f64);
        let n = 200_000;
        for i in 1..n {
            let x = 1.0 + i as f64 / n as f64;
            let (a, b, c) = (lambda1_value(x - h), lambda1_value(x), lambda1_value(x + h));
            d1 = d1.max(((c - a) / (2.0 * h)).abs());
            d2 = d2.max(((c - 2.0 * b + a) / (h * h)).abs());
        }
        assert!(d1 <= LAMBDA1_D1_SUP + 1e-6 && d1 > LAMBDA1_D1_SUP - 1e-3, "{d1}");
        assert!(d2 <= LAMBDA1_D2_SUP && d2 > 0.99 * LAMBDA1_D2_SUP, "{d2}");
    }

    #[test]
    fn plateaus() {
        assert_eq!(lambda1_value(0.5), 0.0);
        assert_eq!(lambda1_value(1.0), 0.0);
        assert_eq!(lambda1_value(2.0), 1.0);
        assert!((lambda1_value(1.5) - 0.5).abs() < 1e-15);
    }
}
