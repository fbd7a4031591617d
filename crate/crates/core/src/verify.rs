//! Grid certification of the drift, boundary and flux inequalities.
//!
//! Every check is a pointwise inequality `lhs <= rhs` evaluated on a
//! deterministic, seeded grid. The margin at a point is the normalised gap
//!
//! ```text
//! margin = (rhs - lhs) / (|rhs| + |lhs|)
//! ```
//!
//! which lies in `[-1, 1]` and is positive when the inequality holds. The
//! quantities involved span dozens of orders of magnitude across a grid, so an
//! absolute gap would be meaningless; a check passes when its worst margin is
//! at least `-MARGIN_TOL`. Flux checks (`a - b <= 0`) use `-(a - b)/(|a| + |b|)`.

use crate::jet::Jet;
use crate::lyapunov::assembled::{outer_cut, phi_total};
use crate::lyapunov::local::{local, local_value, phi3_ueta};
use crate::lyapunov::ops::{agreement, apply_fd, apply_jet, Operator};
use crate::lyapunov::params::{Assembly, LedgerChoices, LedgerError, LyapunovParams};
use crate::lyapunov::psi::{psi, psi1};
use crate::lyapunov::region::{contains_closed, Region};
use crate::model::ModelParams;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MARGIN_TOL: f64 = 1e-12;
/// Closed-form and finite-difference operators must agree to this relative level.
pub const FD_AGREEMENT_TOL: f64 = 1e-5;
/// Outer grids extend from `r*` to `R_SPAN * r*`.
pub const R_SPAN: f64 = 1e3;
pub const Z_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sampling {
    /// Logarithmic in the radial variable and in `z`.
    LogRadial,
    /// Uniform in every variable.
    Uniform,
    /// Points on an interface or on `{z = 1}`.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub samples: usize,
    pub sampling: Sampling,
    pub z_range: (f64, f64),
    pub seed: u64,
}

impl GridSpec {
    pub fn new(samples: usize, seed: u64) -> Self {
        GridSpec { samples, sampling: Sampling::LogRadial, z_range: (Z_FLOOR, 1.0), seed }
    }

    pub fn doubled(&self) -> Self {
        GridSpec { samples: 2 * self.samples, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Interface {
    R0R1,
    R1R2,
    R2R3,
}

impl Interface {
    pub const ALL: [Interface; 3] = [Interface::R0R1, Interface::R1R2, Interface::R2R3];

    pub fn name(self) -> &'static str {
        match self {
            Interface::R0R1 => "R0R1",
            Interface::R1R2 => "R1R2",
            Interface::R2R3 => "R2R3",
        }
    }

    fn sides(self) -> (Region, Region) {
        match self {
            Interface::R0R1 => (Region::R0, Region::R1),
            Interface::R1R2 => (Region::R1, Region::R2),
            Interface::R2R3 => (Region::R2, Region::R3),
        }
    }
}

/// Constants of the assembled drift bound
/// `L Phi <= -c1 z^{-2/3} (r^{p1+1} + r^{p2+1} z^{q2}) 1{r >= R*} - c2 z^{-2/3} + c3`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssembledConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub r_big: f64,
}

impl AssembledConstants {
    /// Derives the constants from the ledger and its measured assembly.
    pub fn derive(lp: &LyapunovParams, a: &Assembly) -> Self {
        let c = lp.cone();
        let h = lp.model().h();
        let mut c1 = f64::INFINITY;
        for i in 0..2 {
            let b = lp.branch(i);
            let k = (1.0 + 1.0 / (c * c)).powf(-(b.p + 1.0) / 2.0);
            let r0 = b.beta / (2.0 * (1.0 + c * c).sqrt());
            c1 = c1.min(r0).min(b.c1 / 2.0).min(b.c2 / 2.0 * k).min(b.c3 / 2.0 * k);
        }
        c1 *= 0.5;
        let p1 = lp.branch(0).p;
        let r_big = (2.0 * lp.r_star()).max(((1.0 - h) * a.a_coef / c1).powf(1.0 / p1));
        let c3 = a.d * a.d1 + (1.0 - h) * a.a_coef * r_big;
        AssembledConstants { c1, c2: a.c2, c3, r_big }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CheckId {
    /// Interior drift of branch `branch` (0 or 1) in an outer region.
    Drift { region: Region, branch: usize },
    /// Boundary operator of the branch sum on `{z = 1}`.
    BoundaryQ { region: Region },
    Flux { interface: Interface },
    /// `A psi - alpha_h J u <= -min{m alpha_h/2, (kappa1+kappa2)/4}` on the `(u, v)` plane.
    AveragingPsi,
    /// `L psi <= (alpha_h J u - gain) z^{-2/3} + D1`.
    InnerPsi,
    /// `Q psi <= D2` on `{z = 1}`.
    InnerPsiQ,
    /// The collected inequality before the `u z^{1/3}` term is absorbed:
    /// `L Phi <= -2 c1 z^{-2/3}(r^{p1+1} + r^{p2+1} z^{q2}) 1{r >= 2r*} - c2 z^{-2/3} + D D1 + (1-h) A u z^{1/3}`.
    AssembledCollected,
    /// The stated form with `(c1, c2, c3, R*)`, on a grid reaching past `R*`.
    Assembled,
    /// `Q Phi <= 0` on `{z = 1}`.
    AssembledQ,
}

impl CheckId {
    pub fn label(&self) -> String {
        match self {
            CheckId::Drift { region, branch } => format!("drift_{}_{}", region.name(), branch + 1),
            CheckId::BoundaryQ { region } => format!("boundary_q_{}", region.name()),
            CheckId::Flux { interface } => format!("flux_{}", interface.name()),
            CheckId::AveragingPsi => "averaging_psi".into(),
            CheckId::InnerPsi => "inner_psi".into(),
            CheckId::InnerPsiQ => "inner_psi_q".into(),
            CheckId::AssembledCollected => "assembled_drift_collected".into(),
            CheckId::Assembled => "assembled_drift".into(),
            CheckId::AssembledQ => "assembled_q".into(),
        }
    }

    /// The local checks of the outer region, in order of cost.
    pub fn outer_checks() -> Vec<CheckId> {
        let mut v = Vec::new();
        for interface in Interface::ALL {
            v.push(CheckId::Flux { interface });
        }
        for region in [Region::R0, Region::R1, Region::R2, Region::R3] {
            v.push(CheckId::BoundaryQ { region });
        }
        for region in [Region::R0, Region::R1, Region::R2, Region::R3] {
            for branch in 0..2 {
                v.push(CheckId::Drift { region, branch });
            }
        }
        v
    }

    /// Whether the check needs the measured assembly.
    pub fn needs_assembly(&self) -> bool {
        matches!(
            self,
            CheckId::InnerPsi | CheckId::InnerPsiQ | CheckId::AssembledCollected | CheckId::Assembled | CheckId::AssembledQ
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VerificationReport {
    pub check_id: String,
    pub worst_margin: f64,
    pub worst_point: [f64; 3],
    pub passed: bool,
    pub tolerance: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub grid_seed: u64,
    pub grid_samples: usize,
    pub ledger_hash: u64,
    pub ledger: LedgerChoices,
    /// Extra measured quantities, e.g. finite-difference agreement.
    pub notes: Vec<(String, f64)>,
}

/// Normalised gap of `lhs <= rhs`.
pub fn margin(lhs: f64, rhs: f64) -> f64 {
    let den = lhs.abs() + rhs.abs();
    if !(lhs.is_finite() && rhs.is_finite()) {
        return f64::NEG_INFINITY;
    }
    if den == 0.0 {
        0.0
    } else {
        (rhs - lhs) / den
    }
}

/// Normalised gap of `a - b <= 0`.
pub fn flux_margin(a: f64, b: f64) -> f64 {
    margin(a, b)
}

/// Maps a pointwise function over grid points; the std crate supplies a parallel one.
pub trait Executor {
    fn map(&self, pts: &[[f64; 3]], f: &(dyn Fn([f64; 3]) -> Option<f64> + Sync)) -> Vec<Option<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map(&self, pts: &[[f64; 3]], f: &(dyn Fn([f64; 3]) -> Option<f64> + Sync)) -> Vec<Option<f64>> {
        pts.iter().map(|&p| f(p)).collect()
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    n: usize,
    log: bool,
}

impl Axis {
    fn new(lo: f64, hi: f64, n: usize, log: bool) -> Self {
        Axis { lo, hi, n: n.max(2), log }
    }

    /// Node `k`, jittered inside its cell except at the two endpoints.
    fn at(&self, k: usize, rng: &mut ChaCha8Rng) -> f64 {
        let step = 1.0 / (self.n - 1) as f64;
        let mut t = k as f64 * step;
        if k > 0 && k + 1 < self.n {
            t += (rng.random::<f64>() - 0.5) * step;
        }
        if self.log {
            self.lo * (self.hi / self.lo).powf(t)
        } else {
            self.lo + (self.hi - self.lo) * t
        }
    }
}

fn side(samples: usize, dims: u32) -> usize {
    ((samples as f64).powf(1.0 / dims as f64).ceil() as usize).max(2)
}

fn z_axis(spec: &GridSpec, n: usize) -> Axis {
    let log = spec.sampling != Sampling::Uniform;
    Axis::new(spec.z_range.0, spec.z_range.1, n, log)
}

fn r_axis(spec: &GridSpec, lo: f64, hi: f64, n: usize) -> Axis {
    Axis::new(lo, hi, n, spec.sampling != Sampling::Uniform)
}

/// Points of the closed outer region, `(radial, angular, z)` tensor grid.
pub fn region_grid(region: Region, lp: &LyapunovParams, spec: &GridSpec, boundary_z: bool) -> Vec<[f64; 3]> {
    let dims = if boundary_z { 2 } else { 3 };
    let n = side(spec.samples, dims);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (c, rs, es) = (lp.cone(), lp.r_star(), lp.eta_star());
    let za = z_axis(spec, n);
    let zs: Vec<f64> = if boundary_z { alloc::vec![1.0] } else { (0..n).map(|k| za.at(k, &mut rng)).collect() };
    let mut out = Vec::with_capacity(n * n * zs.len());
    for a in 0..n {
        for b in 0..n {
            let mut uv: Vec<[f64; 2]> = Vec::with_capacity(2);
            match region {
                Region::R0 => {
                    let r = r_axis(spec, rs, R_SPAN * rs, n).at(a, &mut rng);
                    let th = Axis::new(-c.atan(), c.atan(), n, false).at(b, &mut rng);
                    uv.push([r * th.cos(), r * th.sin()]);
                }
                Region::R1 => {
                    let r = r_axis(spec, rs, R_SPAN * rs, n).at(a, &mut rng);
                    let th = Axis::new(c.atan(), PI - (1.0 / c).atan(), n, false).at(b, &mut rng);
                    let sgn = if b % 2 == 0 { 1.0 } else { -1.0 };
                    uv.push([r * th.cos(), sgn * r * th.sin()]);
                }
                Region::R2 => {
                    let au = r_axis(spec, rs / (1.0 + 1.0 / (c * c)).sqrt(), R_SPAN * rs, n).at(a, &mut rng);
                    let eta_hi = au * au.sqrt() / c;
                    if eta_hi <= es {
                        continue;
                    }
                    let eta = Axis::new(es, eta_hi, n, spec.sampling != Sampling::Uniform).at(b, &mut rng);
                    let sgn = if b % 2 == 0 { 1.0 } else { -1.0 };
                    uv.push([-au, sgn * eta / au.sqrt()]);
                }
                Region::R3 => {
                    let au = r_axis(spec, rs / (1.0 + 1.0 / (c * c)).sqrt(), R_SPAN * rs, n).at(a, &mut rng);
                    let eta = Axis::new(-es, es, n, false).at(b, &mut rng);
                    uv.push([-au, eta / au.sqrt()]);
                }
                Region::Inner | Region::Core => {}
            }
            for [u, v] in uv {
                for &z in &zs {
                    let s = [u, v, z];
                    if contains_closed(region, s, lp) {
                        out.push(s);
                    }
                }
            }
        }
    }
    out
}

/// Points on an interface, over radius and `z`, both signs of `v`.
pub fn interface_grid(interface: Interface, lp: &LyapunovParams, spec: &GridSpec) -> Vec<[f64; 3]> {
    let n = side(spec.samples / 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
    let (c, rs, es) = (lp.cone(), lp.r_star(), lp.eta_star());
    let za = z_axis(spec, n);
    let mut out = Vec::with_capacity(2 * n * n);
    for a in 0..n {
        let r = r_axis(spec, rs, R_SPAN * rs, n).at(a, &mut rng);
        for b in 0..n {
            let z = za.at(b, &mut rng);
            for sgn in [1.0, -1.0] {
                let s = match interface {
                    Interface::R0R1 => {
                        let u = r / (1.0 + c * c).sqrt();
                        [u, sgn * c * u, z]
                    }
                    Interface::R1R2 => {
                        let av = r / (1.0 + c * c).sqrt();
                        [-c * av, sgn * av, z]
                    }
                    Interface::R2R3 => [-r, sgn * es / r.sqrt(), z],
                };
                if s[0].hypot(s[1]) >= rs {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// `(u, v)` plane grid with `r` from 0 to `1e4 sqrt(J)` plus a dense band over the cut-off, optionally over `z`.
pub fn plane_grid(lp: &LyapunovParams, spec: &GridSpec, with_z: bool) -> Vec<[f64; 3]> {
    let dims = if with_z { 3 } else { 2 };
    let n = side(spec.samples, dims);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x1a2b);
    let sj = lp.j().sqrt();
    let ra = r_axis(spec, 1e-3 * sj, 1e4 * sj, n);
    let za = z_axis(spec, n);
    let zs: Vec<f64> = if with_z { (0..n).map(|k| za.at(k, &mut rng)).collect() } else { alloc::vec![1.0] };
    let mut out = Vec::with_capacity(2 * n * n * zs.len() + zs.len());
    for &z in &zs {
        out.push([0.0, 0.0, z]);
    }
    // the cut-off band J/2 <= r² <= J gets its own linear axis
    let band = Axis::new(0.99 * (0.5 * lp.j()).sqrt(), 1.01 * sj, n, false);
    for a in 0..2 * n {
        let r = if a < n { ra.at(a, &mut rng) } else { band.at(a - n, &mut rng) };
        for b in 0..n {
            let th = 2.0 * PI * (b as f64 + rng.random::<f64>()) / n as f64;
            for &z in &zs {
                out.push([r * th.cos(), r * th.sin(), z]);
            }
        }
    }
    out
}

/// Whole phase space: `r` from `1e-3` to `r_max`, all angles, `z` in range.
pub fn phase_grid(spec: &GridSpec, boundary_z: bool, r_max: f64) -> Vec<[f64; 3]> {
    let dims = if boundary_z { 2 } else { 3 };
    let n = side(spec.samples, dims);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x0b0b);
    let ra = r_axis(spec, 1e-3, r_max, n);
    let za = z_axis(spec, n);
    let zs: Vec<f64> = if boundary_z { alloc::vec![1.0] } else { (0..n).map(|k| za.at(k, &mut rng)).collect() };
    let mut out = Vec::with_capacity(n * n * zs.len());
    for a in 0..n {
        let r = ra.at(a, &mut rng);
        for b in 0..n {
            let th = 2.0 * PI * (b as f64 + rng.random::<f64>()) / n as f64;
            for &z in &zs {
                out.push([r * th.cos(), r * th.sin(), z]);
            }
        }
    }
    out
}

/// The annulus `r* <= r <= 2 r*` over all `z`.
pub fn annulus_grid(lp: &LyapunovParams, spec: &GridSpec, boundary_z: bool) -> Vec<[f64; 3]> {
    let dims = if boundary_z { 2 } else { 3 };
    let n = side(spec.samples, dims);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xa22);
    let ra = Axis::new(lp.r_star(), 2.0 * lp.r_star(), n, false);
    let za = z_axis(spec, n);
    let zs: Vec<f64> = if boundary_z { alloc::vec![1.0] } else { (0..n).map(|k| za.at(k, &mut rng)).collect() };
    let mut out = Vec::with_capacity(n * n * zs.len());
    for a in 0..n {
        let r = ra.at(a, &mut rng);
        for b in 0..n {
            let th = 2.0 * PI * (b as f64 + rng.random::<f64>()) / n as f64;
            for &z in &zs {
                out.push([r * th.cos(), r * th.sin(), z]);
            }
        }
    }
    out
}

impl CheckId {
    pub fn points(&self, lp: &LyapunovParams, spec: &GridSpec) -> Vec<[f64; 3]> {
        match *self {
            CheckId::Drift { region, .. } => region_grid(region, lp, spec, false),
            CheckId::BoundaryQ { region } => region_grid(region, lp, spec, true),
            CheckId::Flux { interface } => interface_grid(interface, lp, spec),
            CheckId::AveragingPsi | CheckId::InnerPsiQ => plane_grid(lp, spec, false),
            CheckId::InnerPsi => plane_grid(lp, spec, true),
            CheckId::AssembledCollected => phase_grid(spec, false, R_SPAN * lp.r_star()),
            CheckId::Assembled => {
                let r_max = match lp.assembly() {
                    Some(a) => 10.0 * AssembledConstants::derive(lp, a).r_big.max(R_SPAN * lp.r_star()),
                    None => R_SPAN * lp.r_star(),
                };
                phase_grid(spec, false, r_max)
            }
            CheckId::AssembledQ => phase_grid(spec, true, R_SPAN * lp.r_star()),
        }
    }

    /// Margin at one point; `None` when the point does not belong to the check.
    pub fn margin_at(&self, lp: &LyapunovParams, s: [f64; 3]) -> Option<f64> {
        let model = lp.model();
        let x = Jet::point(s);
        let [u, v, z] = s;
        let r = u.hypot(v);
        match *self {
            CheckId::Drift { region, branch } => {
                let b = lp.branch(branch);
                let f = local(region, x, lp, branch);
                let lhs = apply_jet(Operator::LUvz, f, s, model).value;
                let zq = z.powf(b.q - 2.0 / 3.0);
                let rhs = match region {
                    Region::R0 => {
                        let c = lp.cone();
                        -model.gamma() * b.p * r.powf(b.p) * z.powf(b.q)
                            - b.beta / (2.0 * (1.0 + c * c).sqrt()) * r.powf(b.p + 1.0) * zq
                    }
                    Region::R1 => -b.c1 / 2.0 * r.powf(b.p + 1.0) * zq * (r / v.abs()).powf(b.alpha),
                    Region::R2 => -b.c2 / 2.0 * u.abs().powf(b.p + 1.0) * zq * (u / v).abs().powf(b.alpha),
                    Region::R3 => -b.c3 / 2.0 * u.abs().powf(b.p + 1.0 + 1.5 * b.alpha) * zq,
                    _ => return None,
                };
                Some(margin(lhs, rhs))
            }
            CheckId::BoundaryQ { region } => {
                let f = local(region, x, lp, 0) + local(region, x, lp, 1);
                let lhs = apply_jet(Operator::QUvz, f, s, model).value;
                let b2 = lp.branch(1);
                let k = b2.q / 2.0 - b2.p / 6.0;
                let rhs = match region {
                    Region::R0 | Region::R1 => -k * r.powf(b2.p),
                    Region::R2 => -k * u.abs().powf(b2.p),
                    Region::R3 => {
                        -0.5 * (b2.q - b2.p / 3.0 - b2.alpha / 2.0) * b2.b3 * u.abs().powf(b2.p + 1.5 * b2.alpha)
                    }
                    _ => return None,
                };
                Some(margin(lhs, rhs))
            }
            CheckId::Flux { interface } => {
                let (lo, hi) = interface.sides();
                let mut worst = f64::INFINITY;
                for i in 0..2 {
                    let a = local(lo, x, lp, i);
                    let b = local(hi, x, lp, i);
                    let m = match interface {
                        Interface::R0R1 | Interface::R1R2 => flux_margin(a.d[0], b.d[0]),
                        Interface::R2R3 if v > 0.0 => flux_margin(a.d[1], b.d[1]),
                        Interface::R2R3 => flux_margin(b.d[1], a.d[1]),
                    };
                    worst = worst.min(m);
                }
                Some(worst)
            }
            CheckId::AveragingPsi => {
                let f = psi(x, lp);
                let lhs = apply_jet(Operator::A, f, s, model).value - model.alpha_h() * lp.j() * u;
                Some(margin(lhs, -lp.psi_gain()))
            }
            CheckId::InnerPsi => {
                let a = lp.assembly()?;
                let f = psi(x, lp);
                let lhs = apply_jet(Operator::LUvz, f, s, model).value;
                let rhs = (model.alpha_h() * lp.j() * u - lp.psi_gain()) * z.powf(-2.0 / 3.0) + a.d1;
                Some(margin(lhs, rhs))
            }
            CheckId::InnerPsiQ => {
                let a = lp.assembly()?;
                let lhs = apply_jet(Operator::QUvz, psi(x, lp), s, model).value;
                Some(margin(lhs, a.d2))
            }
            CheckId::AssembledCollected => {
                let a = lp.assembly()?;
                let k = AssembledConstants::derive(lp, a);
                let lhs = apply_jet(Operator::LUvz, phi_total(x, lp, a), s, model).value;
                let (b1, b2) = (lp.branch(0), lp.branch(1));
                let zm = z.powf(-2.0 / 3.0);
                let mut rhs = -k.c2 * zm + a.d * a.d1 + (1.0 - model.h()) * a.a_coef * u * z.cbrt();
                if r >= 2.0 * lp.r_star() {
                    rhs -= 2.0 * k.c1 * zm * (r.powf(b1.p + 1.0) + r.powf(b2.p + 1.0) * z.powf(b2.q));
                }
                Some(margin(lhs, rhs))
            }
            CheckId::Assembled => {
                let a = lp.assembly()?;
                let k = AssembledConstants::derive(lp, a);
                let lhs = apply_jet(Operator::LUvz, phi_total(x, lp, a), s, model).value;
                let (b1, b2) = (lp.branch(0), lp.branch(1));
                let zm = z.powf(-2.0 / 3.0);
                let mut rhs = -k.c2 * zm + k.c3;
                if r >= k.r_big {
                    rhs -= k.c1 * zm * (r.powf(b1.p + 1.0) + r.powf(b2.p + 1.0) * z.powf(b2.q));
                }
                Some(margin(lhs, rhs))
            }
            CheckId::AssembledQ => {
                let a = lp.assembly()?;
                let lhs = apply_jet(Operator::QUvz, phi_total(x, lp, a), s, model).value;
                Some(margin(lhs, 0.0))
            }
        }
    }
}

/// Runs one check on its grid.
pub fn run_check<E: Executor + ?Sized>(id: CheckId, lp: &LyapunovParams, spec: &GridSpec, exec: &E) -> VerificationReport {
    let pts = id.points(lp, spec);
    let f = |s: [f64; 3]| id.margin_at(lp, s);
    let margins = exec.map(&pts, &f);
    let mut worst = f64::INFINITY;
    let mut worst_point = [f64::NAN; 3];
    let (mut evaluated, mut skipped) = (0, 0);
    for (m, &p) in margins.iter().zip(&pts) {
        match m {
            Some(m) => {
                evaluated += 1;
                let m = if m.is_nan() { f64::NEG_INFINITY } else { *m };
                if m < worst {
                    worst = m;
                    worst_point = p;
                }
            }
            None => skipped += 1,
        }
    }
    let mut notes = Vec::new();
    let mut passed = evaluated > 0 && worst >= -MARGIN_TOL;
    if let CheckId::Drift { region: Region::R3, branch } = id {
        let agree = r3_fd_agreement(lp, branch, &pts, 97);
        notes.push(("fd_agreement".into(), agree));
        passed &= agree <= FD_AGREEMENT_TOL;
    }
    if let CheckId::Flux { interface: Interface::R2R3 } = id {
        let id_err = r2r3_identity_error(lp);
        notes.push(("endpoint_identity_error".into(), id_err));
        passed &= id_err <= 1e-12;
    }
    VerificationReport {
        check_id: id.label(),
        worst_margin: worst,
        worst_point,
        passed,
        tolerance: MARGIN_TOL,
        evaluated,
        skipped,
        grid_seed: spec.seed,
        grid_samples: spec.samples,
        ledger_hash: lp.ledger_hash(),
        ledger: *lp.choices(),
        notes,
    }
}

/// Largest closed-form vs finite-difference disagreement of `L phi_3` over every `stride`-th point.
///
/// Points whose stencil crosses into R2 are refused by the difference backend and skipped.
pub fn r3_fd_agreement(lp: &LyapunovParams, branch: usize, pts: &[[f64; 3]], stride: usize) -> f64 {
    let model = lp.model();
    let mut worst: f64 = 0.0;
    for &s in pts.iter().step_by(stride.max(1)) {
        let exact = apply_jet(Operator::LUvz, local(Region::R3, Jet::point(s), lp, branch), s, model);
        let f = |y: [f64; 3]| {
            let piece = u32::from(!contains_closed(Region::R3, y, lp) || y[2] > 1.0);
            (local_value(Region::R3, y, lp, branch), piece)
        };
        let scales = [s[0].abs(), lp.eta_star() / s[0].abs().sqrt(), s[2]];
        if let Ok(fd) = apply_fd(Operator::LUvz, f, s, scales, model) {
            worst = worst.max(agreement(exact, fd));
        }
    }
    worst
}

/// Relative error of the exact endpoint identity
/// `(alpha/eta*^alpha) B2 - (gamma~/(h+3/2)) (B3 + C3) = c2 / (2 (h+3/2) eta*^alpha)`.
pub fn r2r3_identity_error(lp: &LyapunovParams) -> f64 {
    let h = lp.model().h();
    let es = lp.eta_star();
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let b = lp.branch(i);
        let lhs = b.alpha / es.powf(b.alpha) * b.b2 - b.gamma_tilde / (h + 1.5) * (b.b3 + b.cc3);
        let rhs = b.c2 / (2.0 * (h + 1.5) * es.powf(b.alpha));
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
    }
    worst
}

/// Measures `D1`, `D2` and `c2` on grids and builds the assembled constants `D`, `A`.
///
/// Every measured maximum is doubled as a safety factor against the finite grid.
pub fn measure_assembly<E: Executor + ?Sized>(lp: &LyapunovParams, spec: &GridSpec, exec: &E) -> Assembly {
    let model = *lp.model();
    let gain = lp.psi_gain();
    let ahj = model.alpha_h() * lp.j();
    let gamma = model.gamma();
    let plane = plane_grid(lp, spec, false);
    // P + Gamma at z = 1, where P = A psi - alpha_h J u + gain is certified non-positive.
    let d1_f = |s: [f64; 3]| {
        let f = psi(Jet::point(s), lp);
        let a = apply_jet(Operator::A, f, s, &model).value;
        Some(a - ahj * s[0] + gain - gamma * (s[0] * f.d[0] + s[1] * f.d[1]))
    };
    let d1 = 2.0 * max_of(exec.map(&plane, &d1_f)).max(0.0);
    let d2_f = |s: [f64; 3]| Some(apply_jet(Operator::QUvz, psi(Jet::point(s), lp), s, &model).value);
    let d2 = 2.0 * max_of(exec.map(&plane, &d2_f)).max(0.0);

    let ring = annulus_grid(lp, spec, false);
    let m_f = |s: [f64; 3]| Some(apply_jet(Operator::M, outer_cut(Jet::point(s), lp), s, &model).value);
    let m_max = max_of(exec.map(&ring, &m_f));
    let ring_top = annulus_grid(lp, spec, true);
    let q_f = |s: [f64; 3]| Some(apply_jet(Operator::QUvz, outer_cut(Jet::point(s), lp), s, &model).value);
    let q_max = max_of(exec.map(&ring_top, &q_f));
    let c2 = 2.0 * m_max.max(q_max).max(f64::MIN_POSITIVE);

    let d = 2.0 * c2 / gain;
    let a_coef = d * ahj / (1.0 - model.h()) + d * d2 + c2;
    Assembly { d1, d2, c2, d, a_coef }
}

fn max_of(v: Vec<Option<f64>>) -> f64 {
    v.into_iter().flatten().fold(f64::NEG_INFINITY, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
}

/// A ledger with all checks run at one grid density.
#[derive(Debug, Clone)]
pub struct Certification {
    pub lp: LyapunovParams,
    pub reports: Vec<VerificationReport>,
}

impl Certification {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn first_failure(&self) -> Option<&VerificationReport> {
        self.reports.iter().find(|r| !r.passed)
    }
}

/// Runs the outer checks, the averaging check, measures the assembly, then the
/// inner and assembled checks. Stops at the first failure when `fail_fast`.
pub fn certify<E: Executor + ?Sized>(lp: &LyapunovParams, spec: &GridSpec, exec: &E, fail_fast: bool) -> Certification {
    let mut reports = Vec::new();
    let mut lp = lp.clone();
    let mut pre = CheckId::outer_checks();
    pre.push(CheckId::AveragingPsi);
    for id in pre {
        let rep = run_check(id, &lp, spec, exec);
        let ok = rep.passed;
        reports.push(rep);
        if fail_fast && !ok {
            return Certification { lp, reports };
        }
    }
    if lp.assembly().is_none() {
        let a = measure_assembly(&lp, spec, exec);
        lp = lp.with_assembly(a);
    }
    for id in [CheckId::InnerPsi, CheckId::InnerPsiQ, CheckId::AssembledCollected, CheckId::Assembled, CheckId::AssembledQ] {
        let rep = run_check(id, &lp, spec, exec);
        let ok = rep.passed;
        reports.push(rep);
        if fail_fast && !ok {
            break;
        }
    }
    Certification { lp, reports }
}

/// One tried ledger and the check that stopped it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchAttempt {
    pub cone: f64,
    pub r_star: f64,
    pub c_star: f64,
    pub blocking: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchFailure {
    pub attempts: Vec<SearchAttempt>,
}

impl core::fmt::Display for SearchFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "no admissible ledger found in sweep ({} candidates)", self.attempts.len())?;
        if let Some(a) = self.attempts.last() {
            if let Some(b) = &a.blocking {
                write!(f, "; last blocked by {b}")?;
            }
        }
        Ok(())
    }
}

impl core::error::Error for SearchFailure {}

pub const SEARCH_CONES: [f64; 5] = [4.0, 8.0, 16.0, 32.0, 64.0];
pub const SEARCH_R_STARS: [f64; 3] = [1e2, 1e3, 1e4];
pub const SEARCH_C_STARS: [f64; 9] = [0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 5e-4, 2e-4, 1e-4];

/// Sweeps `(c*, C, r*)` over the geometric grids and returns the first ledger
/// for which every check passes.
///
/// Candidates with `r* < 10 max{C, eta*, gamma}` or `|kappa1/kappa2 - 1| >= c*` are skipped.
pub fn search_admissible<E: Executor + ?Sized>(
    model: &ModelParams,
    base: LedgerChoices,
    spec: &GridSpec,
    exec: &E,
) -> Result<Certification, SearchFailure> {
    let mut attempts = Vec::new();
    let mismatch = (model.kappa1() / model.kappa2() - 1.0).abs();
    for &c_star in SEARCH_C_STARS.iter().filter(|&&c| mismatch < c) {
        for &cone in &SEARCH_CONES {
            for &r_star in &SEARCH_R_STARS {
                let eta_star = cone * model.kappa2().sqrt();
                if r_star < 10.0 * cone.max(eta_star).max(model.gamma()) {
                    continue;
                }
                let choices = LedgerChoices { cone, r_star, c_star, ..base };
                let lp = match LyapunovParams::new(choices, model) {
                    Ok(lp) => lp,
                    Err(LedgerError { violations }) => {
                        attempts.push(SearchAttempt { cone, r_star, c_star, blocking: violations.first().cloned() });
                        continue;
                    }
                };
                let cert = certify(&lp, spec, exec, true);
                if cert.passed() {
                    return Ok(cert);
                }
                let blocking = cert.first_failure().map(|r| format!("{} (margin {:.3e})", r.check_id, r.worst_margin));
                attempts.push(SearchAttempt { cone, r_star, c_star, blocking });
            }
        }
    }
    Err(SearchFailure { attempts })
}

// ---------------------------------------------------------------------------
// Structural diagnostics of the construction.

fn rng_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo * (hi / lo).powf(rng.random::<f64>())
}

/// Largest relative mismatch of the local functions across an interface, over
/// `n` random interface points and both branches.
pub fn interface_mismatch(lp: &LyapunovParams, interface: Interface, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, rs, es) = (lp.cone(), lp.r_star(), lp.eta_star());
    let (lo, hi) = interface.sides();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let r = rng_point(&mut rng, rs, R_SPAN * rs);
        let z = rng_point(&mut rng, Z_FLOOR, 1.0);
        let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
        let s = match interface {
            Interface::R0R1 => {
                let u = r / (1.0 + c * c).sqrt();
                [u, sgn * c * u, z]
            }
            Interface::R1R2 => {
                let av = r / (1.0 + c * c).sqrt();
                [-c * av, sgn * av, z]
            }
            Interface::R2R3 => [-r, sgn * es / r.sqrt(), z],
        };
        for i in 0..2 {
            let a = local_value(lo, s, lp, i);
            let b = local_value(hi, s, lp, i);
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
        }
    }
    worst
}

/// Random interior point of a closed outer region, or `None` after 100 rejections.
pub fn random_region_point(region: Region, lp: &LyapunovParams, rng: &mut ChaCha8Rng) -> Option<[f64; 3]> {
    let (c, rs, es) = (lp.cone(), lp.r_star(), lp.eta_star());
    for _ in 0..100 {
        let z = rng_point(rng, Z_FLOOR, 1.0);
        let s = match region {
            Region::R0 | Region::R1 => {
                let r = rng_point(rng, rs, R_SPAN * rs);
                let (a, b) = if region == Region::R0 { (-c.atan(), c.atan()) } else { (c.atan(), PI - (1.0 / c).atan()) };
                let th = a + (b - a) * rng.random::<f64>();
                let sgn = if rng.random::<bool>() { 1.0 } else { -1.0 };
                [r * th.cos(), sgn * r * th.sin(), z]
            }
            Region::R2 => {
                let au = rng_point(rng, rs, R_SPAN * rs);
                let hi = au * au.sqrt() / c;
                if hi <= es {
                    continue;
                }
                let eta = rng_point(rng, es, hi);
                let sgn = if rng.random::<bool>() { 1.0 } else { -1.0 };
                [-au, sgn * eta / au.sqrt(), z]
            }
            Region::R3 => {
                let au = rng_point(rng, rs, R_SPAN * rs);
                let eta = es * (2.0 * rng.random::<f64>() - 1.0);
                [-au, eta / au.sqrt(), z]
            }
            _ => return None,
        };
        if contains_closed(region, s, lp) {
            return Some(s);
        }
    }
    None
}

/// Largest relative residual of the defining first-order equations of the
/// local functions over `n` random points of the region:
/// `T1 phi1 + c1 r^{p+1} z^q |r/v|^alpha`, `T2 phi2 + c2 |u|^{p+1} z^q |u/v|^alpha`
/// and, in `(u, eta, z)`, `T3hat phi3 + c3 |u|^{p + 3 alpha/2} z^q`.
pub fn pde_residual(lp: &LyapunovParams, region: Region, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = lp.model();
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let Some(s) = random_region_point(region, lp, &mut rng) else { continue };
        let [u, v, z] = s;
        for i in 0..2 {
            let b = lp.branch(i);
            let (op, rhs) = match region {
                Region::R1 => {
                    let r = u.hypot(v);
                    let t = apply_jet(Operator::T1, local(region, Jet::point(s), lp, i), s, model);
                    (t, b.c1 * r.powf(b.p + 1.0) * z.powf(b.q) * (r / v.abs()).powf(b.alpha))
                }
                Region::R2 => {
                    let t = apply_jet(Operator::T2, local(region, Jet::point(s), lp, i), s, model);
                    (t, b.c2 * u.abs().powf(b.p + 1.0) * z.powf(b.q) * (u / v).abs().powf(b.alpha))
                }
                Region::R3 => {
                    let q = [u, u.abs().sqrt() * v, z];
                    let f = phi3_ueta(Jet::point(q), b, lp.kernels(i));
                    let t = apply_jet(Operator::T3Hat, f, q, model);
                    (t, b.c3 * u.abs().powf(b.p + 1.5 * b.alpha) * z.powf(b.q))
                }
                _ => return f64::NAN,
            };
            worst = worst.max((op.value + rhs).abs() / (op.scale + rhs.abs()));
        }
    }
    worst
}

/// Worst closed-form vs finite-difference disagreement over all operators,
/// applied to every local function at random interior points and to `psi`.
/// Points whose stencil crosses an interface are skipped.
pub fn operator_fd_agreement(lp: &LyapunovParams, n: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = lp.model();
    let mut worst: f64 = 0.0;
    let mut used = 0;
    let uvz_ops = [Operator::LUvz, Operator::QUvz, Operator::T1, Operator::T2, Operator::A, Operator::M];
    for region in [Region::R0, Region::R1, Region::R2, Region::R3] {
        for _ in 0..n {
            let Some(mut s) = random_region_point(region, lp, &mut rng) else { continue };
            s[2] = s[2].min(0.999);
            let [u, v, z] = s;
            let scales = match region {
                Region::R3 => [u.abs(), lp.eta_star() / u.abs().sqrt(), z],
                Region::R2 => [u.abs(), v.abs(), z],
                _ => [u.hypot(v), u.hypot(v), z],
            };
            for i in 0..2 {
                let exact = local(region, Jet::point(s), lp, i);
                let f = |y: [f64; 3]| (local_value(region, y, lp, i), u32::from(!contains_closed(region, y, lp)));
                for op in uvz_ops {
                    let a = apply_jet(op, exact, s, model);
                    match apply_fd(op, f, s, scales, model) {
                        Ok(b) => {
                            worst = worst.max(agreement(a, b));
                            used += 1;
                        }
                        Err(_) => continue,
                    }
                }
            }
        }
    }
    let sj = lp.j().sqrt();
    for _ in 0..n {
        let r = sj * rng_point(&mut rng, 1e-2, 1e2);
        let th = 2.0 * PI * rng.random::<f64>();
        let z = rng_point(&mut rng, 1e-3, 0.999);
        let s = [r * th.cos(), r * th.sin(), z];
        let piece = |y: [f64; 3]| {
            let r2 = y[0] * y[0] + y[1] * y[1];
            let j = lp.j();
            u32::from(r2 > j / 2.0) + u32::from(r2 > j) + u32::from(r2 > 2.0 * j)
        };
        let exact = psi(Jet::point(s), lp);
        let f = |y: [f64; 3]| (psi(y.map(Jet::cst), lp).v, piece(y));
        for op in uvz_ops {
            let a = apply_jet(op, exact, s, model);
            // psi varies on the scale sqrt(J); shorter steps only add roundoff from its constant part
            if let Ok(b) = apply_fd(op, f, s, [r.max(sj), r.max(sj), z], model) {
                worst = worst.max(agreement(a, b));
                used += 1;
            }
        }
    }
    (worst, used)
}

/// Value and gradient mismatch of the two pieces of `psi1` at `r² = J`.
pub fn psi_c1_mismatch(lp: &LyapunovParams, n: usize) -> f64 {
    let j = lp.j();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let th = 2.0 * PI * k as f64 / n as f64;
        let (u, v) = (j.sqrt() * th.cos(), j.sqrt() * th.sin());
        let x = Jet::point([u, v, 1.0]);
        let inner = Jet::cst(0.5 * j - 0.5 * j * j.ln()) - (x[0] * x[0] + x[1] * x[1]) * 0.5;
        let outer = psi1(x[0], x[1], j);
        let outer_log = (x[0] * x[0] + x[1] * x[1]).ln() * (-0.5 * j);
        worst = worst
            .max((inner.v - outer_log.v).abs())
            .max((inner.d[0] - outer_log.d[0]).abs())
            .max((inner.d[1] - outer_log.d[1]).abs())
            .max((inner.v - outer.v).abs());
    }
    worst
}

/// Largest relative ODE residual of every kernel of the ledger on `n` points of `[-eta*, eta*]`.
pub fn g_ode_residual(lp: &LyapunovParams, n: usize) -> f64 {
    let es = lp.eta_star();
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for k in lp.kernels(i) {
            for m in 0..n {
                let eta = -es + 2.0 * es * m as f64 / (n - 1) as f64;
                worst = worst.max(k.ode_residual(eta));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(h: f64, cone: f64, r_star: f64) -> LyapunovParams {
        let model = ModelParams::new(1.0, h, 1.0, 1.0).unwrap();
        let c = LedgerChoices { cone, r_star, ..LedgerChoices::default_for(h) };
        LyapunovParams::new(c, &model).unwrap()
    }

    #[test]
    fn margin_sign_and_range() {
        assert!(margin(-2.0, -1.0) > 0.0);
        assert!(margin(-1.0, -2.0) < 0.0);
        assert_eq!(margin(0.0, 0.0), 0.0);
        assert!(margin(1e300, -1e300) >= -1.0);
        assert_eq!(margin(f64::NAN, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn grids_stay_in_their_regions() {
        let lp = lp(0.5, 10.0, 1e3);
        let spec = GridSpec::new(2000, 3);
        for region in [Region::R0, Region::R1, Region::R2, Region::R3] {
            let pts = region_grid(region, &lp, &spec, false);
            assert!(pts.len() > 500, "{} {}", region.name(), pts.len());
            assert!(pts.iter().all(|&s| contains_closed(region, s, &lp)));
        }
    }

    #[test]
    fn structural_identities() {
        let lp = lp(0.1, 10.0, 1e3);
        for i in Interface::ALL {
            assert!(interface_mismatch(&lp, i, 200, 1) < 1e-9, "{}", i.name());
        }
        for region in [Region::R1, Region::R2, Region::R3] {
            let r = pde_residual(&lp, region, 200, 2);
            assert!(r < 1e-6, "{} {r}", region.name());
        }
        assert!(psi_c1_mismatch(&lp, 64) < 1e-12);
        assert!(r2r3_identity_error(&lp) < 1e-12);
    }

    #[test]
    fn small_r_star_fails_r0() {
        let model = ModelParams::new(1.0, 0.1, 1.0, 1.0).unwrap();
        let c = LedgerChoices { r_star: 5.0, cone: 10.0, ..LedgerChoices::default_for(0.1) };
        let lp = LyapunovParams::new_unchecked(c, &model).unwrap();
        let spec = GridSpec::new(2000, 1);
        let rep = run_check(CheckId::Drift { region: Region::R0, branch: 1 }, &lp, &spec, &Serial);
        assert!(!rep.passed);
        let again = CheckId::Drift { region: Region::R0, branch: 1 }.margin_at(&lp, rep.worst_point).unwrap();
        assert!((again - rep.worst_margin).abs() <= 1e-12);
    }
}
