//! The global function `Phi` on `(u, v, z)` and its pull-back `Psi` on `(x, y, z)`.

use super::local::phi_outer;
use super::params::Assembly;
use super::psi::{lambda1, psi};
use super::LyapunovParams;
use crate::jet::Jet;

/// `lambda1(r / r*) Phi_O`; identically zero for `r <= r*`.
pub fn outer_cut(x: [Jet; 3], lp: &LyapunovParams) -> Jet {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r.v <= lp.r_star() {
        return Jet::cst(0.0);
    }
    lambda1(r / lp.r_star()) * phi_outer(x, lp)
}

/// `lambda1(r/r*) Phi_O + D psi - (D alpha_h J / (1-h)) log z + A z`.
pub fn phi_total(x: [Jet; 3], lp: &LyapunovParams, a: &Assembly) -> Jet {
    let model = lp.model();
    let log_coef = a.d * model.alpha_h() * lp.j() / (1.0 - model.h());
    outer_cut(x, lp) + psi(x, lp) * a.d - x[2].ln() * log_coef + x[2] * a.a_coef
}

pub fn phi_value(s: [f64; 3], lp: &LyapunovParams, a: &Assembly) -> f64 {
    phi_total(s.map(Jet::cst), lp, a).v
}

/// `Psi(x, y, z) = Phi(x z^{-1/3}, y z^{-1/3}, z)` with derivatives in `(x, y, z)`.
pub fn psi_xyz(x: [Jet; 3], lp: &LyapunovParams, a: &Assembly) -> Jet {
    let k = x[2].cbrt().recip();
    phi_total([x[0] * k, x[1] * k, x[2]], lp, a)
}

pub fn psi_xyz_value(s: [f64; 3], lp: &LyapunovParams, a: &Assembly) -> f64 {
    psi_xyz(s.map(Jet::cst), lp, a).v
}
