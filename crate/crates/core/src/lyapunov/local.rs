//! The local functions of the outer region and their jets.

use super::params::{cone_integral, Branch, LyapunovParams};
use super::region::{outer_piece, Region};
use crate::gfun::GKernel;
use crate::jet::Jet;
use num_traits::Float;

fn radius(u: Jet, v: Jet) -> Jet {
    (u * u + v * v).sqrt()
}

fn zpow(z: Jet, q: f64) -> Jet {
    if q == 0.0 {
        Jet::cst(1.0)
    } else {
        z.powf(q)
    }
}

/// `r^p z^q`.
pub fn phi0(x: [Jet; 3], b: &Branch) -> Jet {
    radius(x[0], x[1]).powf(b.p) * zpow(x[2], b.q)
}

/// The integral `∫_w^{1/C} (t² + 1)^{(alpha-beta-1)/2} dt` as a jet in `w`.
fn cone_integral_jet(w: Jet, cone: f64, b: &Branch) -> Jet {
    let k = 0.5 * (b.alpha - b.beta - 1.0);
    let i0 = cone_integral(w.v, cone, b.alpha, b.beta);
    let base = w.v * w.v + 1.0;
    let i1 = -base.powf(k);
    let i2 = -2.0 * k * w.v * base.powf(k - 1.0);
    w.chain(i0, i1, i2)
}

/// `r^p z^q |r/v|^beta [ (C^{-2}+1)^{-beta/2} + c1 ∫_{u/|v|}^{1/C} (t²+1)^{(alpha-beta-1)/2} dt ]`.
pub fn phi1(x: [Jet; 3], b: &Branch, cone: f64) -> Jet {
    let [u, v, z] = x;
    assert!(v.v != 0.0, "phi1 needs v != 0");
    let r = radius(u, v);
    let av = v.abs();
    let w = u / av;
    let bracket = cone_integral_jet(w, cone, b) * b.c1 + b.k1;
    r.powf(b.p) * zpow(z, b.q) * (r / av).powf(b.beta) * bracket
}

/// `A2 |u|^p z^q |u/v|^beta + B2 |u|^p z^q |u/v|^alpha`.
pub fn phi2(x: [Jet; 3], b: &Branch) -> Jet {
    let [u, v, z] = x;
    assert!(v.v != 0.0 && u.v != 0.0, "phi2 needs u, v != 0");
    let au = u.abs();
    let ratio = au / v.abs();
    au.powf(b.p) * zpow(z, b.q) * (ratio.powf(b.beta) * b.a2 + ratio.powf(b.alpha) * b.b2)
}

fn g_jet(k: &GKernel, eta: Jet) -> Jet {
    let g = k.eval(eta.v);
    eta.chain(g.g, g.dg, g.d2g)
}

/// `phi3` in the coordinates `(u, eta, z)`, `eta = |u|^{1/2} v`.
pub fn phi3_ueta(x: [Jet; 3], b: &Branch, k: &[GKernel; 2]) -> Jet {
    let [u, eta, z] = x;
    let au = u.abs();
    let zq = zpow(z, b.q);
    let g = g_jet(&k[0], eta);
    let gt = g_jet(&k[1], eta);
    au.powf(b.p + 1.5 * b.beta) * zq * g * b.a3
        + au.powf(b.p + 1.5 * b.alpha) * zq * (gt * (b.b3 + b.cc3) - b.cc3)
}

/// `phi3` in `(u, v, z)`.
pub fn phi3(x: [Jet; 3], b: &Branch, k: &[GKernel; 2]) -> Jet {
    let [u, v, z] = x;
    assert!(u.v != 0.0, "phi3 needs u != 0");
    let eta = u.abs().sqrt() * v;
    phi3_ueta([u, eta, z], b, k)
}

/// Local function `j` of branch `i` at a point, in `(u, v, z)`.
pub fn local(region: Region, x: [Jet; 3], lp: &LyapunovParams, i: usize) -> Jet {
    let b = lp.branch(i);
    match region {
        Region::R0 => phi0(x, b),
        Region::R1 => phi1(x, b, lp.cone()),
        Region::R2 => phi2(x, b),
        Region::R3 => phi3(x, b, lp.kernels(i)),
        Region::Inner | Region::Core => panic!("no local function for {}", region.name()),
    }
}

/// Sum of both branches of the outer function, with the piece chosen from `(u, v)`.
pub fn phi_outer(x: [Jet; 3], lp: &LyapunovParams) -> Jet {
    let reg = outer_piece(x[0].v, x[1].v, lp.cone(), lp.eta_star());
    local(reg, x, lp, 0) + local(reg, x, lp, 1)
}

/// Plain value of a local function.
pub fn local_value(region: Region, s: [f64; 3], lp: &LyapunovParams, i: usize) -> f64 {
    local(region, s.map(Jet::cst), lp, i).v
}
