//! Deterministic controls steering the reflected system to `(0, 0, 1/2)`.
//!
//! Bridges are C² piecewise quintic Hermite splines, so `x̃ = F'/(1-h)` is C¹
//! and the synthesized controls are continuously differentiable.

use crate::model::ModelParams;
use crate::quad::GaussLegendre;
use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;

pub const TARGET: [f64; 3] = [0.0, 0.0, 0.5];
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const REACH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Case {
    /// `z <= 3/4`: the path stays strictly inside, no local time.
    Low,
    /// `z >= 3/4`: the path is pushed onto `z = 1` and reflected.
    High,
}

impl Case {
    pub fn for_height(z: f64) -> Case {
        if z <= 0.75 {
            Case::Low
        } else {
            Case::High
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ControlError {
    WrongCase { case: Case, z: f64 },
    BadHorizon(f64),
    /// No first-piece length kept the bridge inside its corridor.
    Infeasible { x0: [f64; 3] },
    /// `z̃ <= 0` somewhere along the synthesized path.
    NonPositiveHeight { t: f64, z: f64 },
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlError::WrongCase { case, z } => write!(f, "{case:?} case does not apply at z = {z}"),
            ControlError::BadHorizon(t) => write!(f, "horizon must be positive, got {t}"),
            ControlError::Infeasible { x0 } => write!(f, "no admissible bridge from {x0:?}"),
            ControlError::NonPositiveHeight { t, z } => write!(f, "controlled height {z} <= 0 at t = {t}"),
        }
    }
}

impl core::error::Error for ControlError {}

/// Quintic on `[t0, t0 + len]` in the local variable `s = (t - t0)/len`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Piece {
    pub t0: f64,
    pub len: f64,
    pub c: [f64; 6],
}

impl Piece {
    /// Matches value, slope and curvature `a` at the left end and `b` at the right.
    pub fn hermite(t0: f64, len: f64, a: [f64; 3], b: [f64; 3]) -> Piece {
        let l = len;
        let (c0, c1, c2) = (a[0], a[1] * l, a[2] * l * l / 2.0);
        let b0 = b[0] - c0 - c1 - c2;
        let b1 = b[1] * l - c1 - 2.0 * c2;
        let b2 = b[2] * l * l - 2.0 * c2;
        Piece {
            t0,
            len,
            c: [
                c0,
                c1,
                c2,
                10.0 * b0 - 4.0 * b1 + 0.5 * b2,
                -15.0 * b0 + 7.0 * b1 - b2,
                6.0 * b0 - 3.0 * b1 + 0.5 * b2,
            ],
        }
    }

    /// Value and first two time derivatives.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let s = (t - self.t0) / self.len;
        let c = &self.c;
        let v = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
        let d = c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])));
        let dd = 2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]));
        [v, d / self.len, dd / (self.len * self.len)]
    }

    fn end(&self) -> f64 {
        self.t0 + self.len
    }

    /// Interior critical points, located by sign changes of the slope and bisection.
    fn critical_points(&self) -> Vec<f64> {
        const N: usize = 256;
        let mut out = Vec::new();
        let slope = |t: f64| self.eval(t)[1];
        let mut ta = self.t0;
        let mut sa = slope(ta);
        for i in 1..=N {
            let tb = self.t0 + self.len * i as f64 / N as f64;
            let sb = slope(tb);
            if sa == 0.0 && i > 1 {
                out.push(ta);
            } else if sa * sb < 0.0 {
                let (mut lo, mut hi) = (ta, tb);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if slope(lo) * slope(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            ta = tb;
            sa = sb;
        }
        out
    }
}

/// Piecewise quintic bridge `F` (Low) or `G` (High) on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BridgeFunction {
    pub case: Case,
    pub x0: [f64; 3],
    pub horizon: f64,
    pub h: f64,
    pub pieces: Vec<Piece>,
    /// Endpoints, knots and interior critical points with their values, in time order.
    pub extrema: Vec<(f64, f64)>,
}

impl BridgeFunction {
    fn new(case: Case, x0: [f64; 3], horizon: f64, h: f64, pieces: Vec<Piece>) -> Self {
        let mut extrema = alloc::vec![(0.0, pieces[0].eval(0.0)[0])];
        for p in &pieces {
            for t in p.critical_points() {
                extrema.push((t, p.eval(t)[0]));
            }
            extrema.push((p.end(), p.eval(p.end())[0]));
        }
        BridgeFunction { case, x0, horizon, h, pieces, extrema }
    }

    fn piece(&self, t: f64) -> &Piece {
        self.pieces.iter().find(|p| t <= p.end()).unwrap_or_else(|| self.pieces.last().unwrap())
    }

    /// `[F, F', F'']` at `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        self.piece(t).eval(t)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.extrema
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)))
    }

    /// `max_{s <= t} F_s`.
    pub fn running_max(&self, t: f64) -> f64 {
        self.extrema.iter().take_while(|e| e.0 <= t).fold(self.eval(t)[0], |m, e| m.max(e.1))
    }

    /// Absolute residuals of the defining conditions: the four endpoint
    /// conditions, then (High only) `max - 1/4` and `min + 1/4`.
    pub fn residuals(&self) -> Vec<f64> {
        let [x, _, z] = self.x0;
        let a = self.eval(0.0);
        let b = self.eval(self.horizon);
        let target = match self.case {
            Case::Low => 0.5 - z,
            Case::High => -0.25,
        };
        let mut r = alloc::vec![a[0].abs(), (a[1] - (1.0 - self.h) * x).abs(), (b[0] - target).abs(), b[1].abs()];
        if self.case == Case::High {
            let (lo, hi) = self.min_max();
            r.push((hi - 0.25).abs());
            r.push((lo + 0.25).abs());
        }
        r
    }

    /// Low: `1 - z > F > -z` throughout. High: `G` within `[-1/4, 1/4]`.
    pub fn corridor_ok(&self) -> bool {
        let z = self.x0[2];
        let (lo, hi) = self.min_max();
        match self.case {
            Case::Low => lo > -z && hi < 1.0 - z,
            Case::High => lo >= -0.25 - RESIDUAL_TOL && hi <= 0.25 + RESIDUAL_TOL,
        }
    }
}

const MAX_HALVINGS: usize = 60;

/// Builds the bridge for `case` from `x0 = (x, y, z)` over `[0, T]`.
///
/// Low first tries a single quintic; otherwise, and always for High, the first
/// piece turns the initial slope `(1-h)x` around and is halved in length until
/// the corridor holds.
pub fn build_bridge(case: Case, x0: [f64; 3], horizon: f64, p: &ModelParams) -> Result<BridgeFunction, ControlError> {
    let z = x0[2];
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ControlError::BadHorizon(horizon));
    }
    match case {
        Case::Low if !(z > 0.0 && z <= 0.75) => return Err(ControlError::WrongCase { case, z }),
        Case::High if !(z >= 0.75 && z <= 1.0) => return Err(ControlError::WrongCase { case, z }),
        _ => {}
    }
    let h = p.h();
    let m = (1.0 - h) * x0[0];
    let make = |pieces| BridgeFunction::new(case, x0, horizon, h, pieces);
    let (knot, end) = match case {
        Case::Low => {
            let single = make(alloc::vec![Piece::hermite(0.0, horizon, [0.0, m, 0.0], [0.5 - z, 0.0, 0.0])]);
            if single.corridor_ok() {
                return Ok(single);
            }
            (0.0, 0.5 - z)
        }
        Case::High => (0.25, -0.25),
    };
    let mut tau = horizon / 2.0;
    for _ in 0..MAX_HALVINGS {
        let b = make(alloc::vec![
            Piece::hermite(0.0, tau, [0.0, m, 0.0], [knot, 0.0, 0.0]),
            Piece::hermite(tau, horizon - tau, [knot, 0.0, 0.0], [end, 0.0, 0.0]),
        ]);
        if b.corridor_ok() {
            return Ok(b);
        }
        tau /= 2.0;
    }
    Err(ControlError::Infeasible { x0 })
}

/// Smooth `ỹ` from `y` to 0 with zero end slopes.
fn y_bridge(y: f64, t: f64, horizon: f64) -> [f64; 2] {
    let s = t / horizon;
    [y * (1.0 - 3.0 * s * s + 2.0 * s * s * s), y * (-6.0 * s + 6.0 * s * s) / horizon]
}

/// The controlled path at time `t`, and the control rates `dU/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub k: f64,
    pub du: [f64; 2],
}

/// Closed-form evaluation of `(x̃, ỹ, z̃, k̃)` and the control integrands.
pub fn path_point(b: &BridgeFunction, p: &ModelParams, t: f64) -> PathPoint {
    let [_, y0, z0] = b.x0;
    let h = p.h();
    let g = b.eval(t);
    let x = g[1] / (1.0 - h);
    let dx = g[2] / (1.0 - h);
    let [y, dy] = y_bridge(y0, t, b.horizon);
    let k = match b.case {
        Case::Low => 0.0,
        Case::High => (z0 + b.running_max(t) - 1.0).max(0.0),
    };
    let z = z0 + g[0] - k;
    let gm = p.gamma();
    PathPoint {
        x,
        y,
        z,
        k,
        du: [
            (dx + gm * x + (h * x * x - y * y) / z) / p.sigma1(),
            (dy + gm * y + (1.0 + h) * x * y / z) / p.sigma2(),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlledTrajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub k: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// Tabulates the controlled path on `nodes + 1` equally spaced times; the
/// controls are accumulated by Gauss–Legendre quadrature between nodes.
pub fn synthesize_controls(b: &BridgeFunction, p: &ModelParams, nodes: usize) -> Result<ControlledTrajectory, ControlError> {
    let nodes = nodes.max(1);
    let gl = GaussLegendre::new(8);
    let mut tr = ControlledTrajectory {
        times: Vec::with_capacity(nodes + 1),
        x: Vec::new(),
        y: Vec::new(),
        z: Vec::new(),
        k: Vec::new(),
        u1: Vec::new(),
        u2: Vec::new(),
    };
    let (mut u1, mut u2) = (0.0, 0.0);
    for i in 0..=nodes {
        let t = b.horizon * i as f64 / nodes as f64;
        if i > 0 {
            let a = b.horizon * (i - 1) as f64 / nodes as f64;
            u1 += gl.integrate(|s| path_point(b, p, s).du[0], a, t, 1);
            u2 += gl.integrate(|s| path_point(b, p, s).du[1], a, t, 1);
        }
        let q = path_point(b, p, t);
        if !(q.z > 0.0) {
            return Err(ControlError::NonPositiveHeight { t, z: q.z });
        }
        tr.times.push(t);
        tr.x.push(q.x);
        tr.y.push(q.y);
        tr.z.push(q.z);
        tr.k.push(q.k);
        tr.u1.push(u1);
        tr.u2.push(u2);
    }
    Ok(tr)
}

/// Forward RK4 solution of the controlled reflected system driven by `dU/dt`.
///
/// The unreflected height `w` is integrated alongside `(x, y)`; `k` is the
/// running maximum of `(w - 1)^+`, refined between nodes by the cubic Hermite
/// interpolant of `w` (whose slope `(1-h)x` is known).
pub fn integrate_controlled(b: &BridgeFunction, p: &ModelParams, steps: usize) -> Result<ForwardResult, ControlError> {
    let (gm, h) = (p.gamma(), p.h());
    let dt = b.horizon / steps as f64;
    let rhs = |t: f64, s: [f64; 3], k: f64| -> [f64; 3] {
        let q = path_point(b, p, t);
        let [x, y, w] = s;
        let z = w - k.max(w - 1.0);
        [
            -gm * x - (h * x * x - y * y) / z + p.sigma1() * q.du[0],
            -gm * y - (1.0 + h) * x * y / z + p.sigma2() * q.du[1],
            (1.0 - h) * x,
        ]
    };
    let mut s = [b.x0[0], b.x0[1], b.x0[2]];
    let mut k = 0.0f64;
    let mut zmin = f64::INFINITY;
    let mut zmax = f64::NEG_INFINITY;
    let mut k_increase_off_boundary = 0.0f64;
    for i in 0..steps {
        let t = i as f64 * dt;
        let k1 = rhs(t, s, k);
        let add = |a: [f64; 3], d: [f64; 3], c: f64| [a[0] + c * d[0], a[1] + c * d[1], a[2] + c * d[2]];
        let k2 = rhs(t + dt / 2.0, add(s, k1, dt / 2.0), k);
        let k3 = rhs(t + dt / 2.0, add(s, k2, dt / 2.0), k);
        let k4 = rhs(t + dt, add(s, k3, dt), k);
        let mut n = s;
        for j in 0..3 {
            n[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let (wa, wb) = (s[2], n[2]);
        let (da, db) = ((1.0 - h) * s[0] * dt, (1.0 - h) * n[0] * dt);
        let mut wmax = wa.max(wb);
        if da > 0.0 && db < 0.0 {
            // interior peak of the Hermite cubic on [0, 1]
            let (a3, a2, a1) = (2.0 * (wa - wb) + da + db, 3.0 * (wb - wa) - 2.0 * da - db, da);
            let (qa, qb, qc) = (3.0 * a3, 2.0 * a2, a1);
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            for r in [(-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa)] {
                if r > 0.0 && r < 1.0 && r.is_finite() {
                    wmax = wmax.max(wa + r * (a1 + r * (a2 + r * a3)));
                }
            }
        }
        let k_new = k.max(wmax - 1.0);
        let z_new = wb - k_new;
        if k_new > k {
            k_increase_off_boundary = k_increase_off_boundary.max(1.0 - (wmax - k_new));
        }
        k = k_new;
        s = n;
        zmin = zmin.min(z_new);
        zmax = zmax.max(z_new);
        if !(z_new > 0.0) || !s.iter().all(|v| v.is_finite()) {
            return Err(ControlError::NonPositiveHeight { t: t + dt, z: z_new });
        }
    }
    let end = [s[0], s[1], s[2] - k];
    let miss = ((end[0] - TARGET[0]).powi(2) + (end[1] - TARGET[1]).powi(2) + (end[2] - TARGET[2]).powi(2)).sqrt();
    Ok(ForwardResult { end, k_end: k, miss, z_min: zmin, z_max: zmax, complementarity: k_increase_off_boundary })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForwardResult {
    pub end: [f64; 3],
    pub k_end: f64,
    /// Distance of the terminal state from `(0, 0, 1/2)`.
    pub miss: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Largest gap between the height and 1 at steps where `k` increased.
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReachPoint {
    pub x0: [f64; 3],
    pub case: Case,
    pub result: ForwardResult,
    /// Terminal miss at half the step count.
    pub coarse_miss: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReachReport {
    pub horizon: f64,
    pub steps: usize,
    pub points: Vec<ReachPoint>,
    /// Points whose construction or integration failed.
    pub failures: Vec<([f64; 3], ControlError)>,
}

/// Misses below this are treated as converged when checking step halving.
pub const ROUNDOFF_FLOOR: f64 = 1e-10;

impl ReachReport {
    pub fn worst_miss(&self) -> f64 {
        self.points.iter().map(|p| p.result.miss).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
            && self.points.iter().all(|q| {
                let r = &q.result;
                r.miss <= REACH_TOL
                    && r.z_min > 0.0
                    && r.z_max <= 1.0 + 1e-12
                    && r.complementarity <= 1e-9
                    && q.residual <= RESIDUAL_TOL
                    && (q.case == Case::High || r.k_end == 0.0)
                    && (r.miss <= ROUNDOFF_FLOOR || 2.0 * r.miss <= q.coarse_miss)
            })
    }
}

/// `n³` points of `O_R`: `x, y` in `[-R/√2, R/√2]` (so `|(x, y)| <= R`) and
/// `z` in `[1/R, 3/4]` (Low) or `[3/4, 1]` (High).
pub fn reach_grid(r: f64, n: usize, case: Case) -> Vec<[f64; 3]> {
    let side = r / 2.0f64.sqrt() * (1.0 - 1e-9);
    let lin = |a: f64, b: f64, i: usize| if n == 1 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (n - 1) as f64 };
    let (za, zb) = match case {
        Case::Low => (1.0 / r, 0.75),
        Case::High => (0.75, 1.0),
    };
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push([lin(-side, side, i), lin(-side, side, j), lin(za, zb, k)]);
            }
        }
    }
    out
}

pub fn reach_point(x0: [f64; 3], case: Case, horizon: f64, steps: usize, p: &ModelParams) -> Result<ReachPoint, ControlError> {
    let b = build_bridge(case, x0, horizon, p)?;
    let residual = b.residuals().into_iter().fold(0.0, f64::max);
    let result = integrate_controlled(&b, p, steps)?;
    let coarse = integrate_controlled(&b, p, steps / 2)?;
    Ok(ReachPoint { x0, case, result, coarse_miss: coarse.miss, residual })
}

pub fn verify_reachability(points: &[[f64; 3]], case: Case, horizon: f64, steps: usize, p: &ModelParams) -> ReachReport {
    let mut rep = ReachReport { horizon, steps, points: Vec::new(), failures: Vec::new() };
    for &x0 in points {
        match reach_point(x0, case, horizon, steps, p) {
            Ok(q) => rep.points.push(q),
            Err(e) => rep.failures.push((x0, e)),
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn hermite_piece_conditions() {
        let q = Piece::hermite(1.0, 2.0, [0.3, -1.0, 2.0], [-0.5, 0.7, -3.0]);
        let a = q.eval(1.0);
        let b = q.eval(3.0);
        for (u, v) in a.iter().chain(b.iter()).zip([0.3, -1.0, 2.0, -0.5, 0.7, -3.0]) {
            assert!((u - v).abs() < 1e-13, "{u} vs {v}");
        }
    }

    #[test]
    fn stationary_bridge_is_zero() {
        let p = params();
        let b = build_bridge(Case::Low, [0.0, 0.0, 0.5], 5.0, &p).unwrap();
        assert_eq!(b.pieces.len(), 1);
        assert!(b.pieces[0].c.iter().all(|c| *c == 0.0));
        let tr = synthesize_controls(&b, &p, 50).unwrap();
        assert!(tr.u1.iter().chain(&tr.u2).all(|u| *u == 0.0));
        assert_eq!((tr.x[50], tr.y[50], tr.z[50]), (0.0, 0.0, 0.5));
    }

    #[test]
    fn low_bridge_from_moving_state() {
        let p = params();
        let b = build_bridge(Case::Low, [2.0, 1.0, 0.5], 5.0, &p).unwrap();
        assert!(b.residuals().iter().all(|r| *r <= RESIDUAL_TOL), "{:?}", b.residuals());
        assert!(b.corridor_ok());
    }

    #[test]
    fn high_bridge_hits_half() {
        let p = params();
        let b = build_bridge(Case::High, [0.0, 0.0, 1.0], 5.0, &p).unwrap();
        assert!(b.residuals().iter().all(|r| *r <= RESIDUAL_TOL), "{:?}", b.residuals());
        let tr = synthesize_controls(&b, &p, 2000).unwrap();
        let zmin = tr.z.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((zmin - 0.5).abs() < 1e-12);
        assert!((tr.z[2000] - 0.5).abs() < 1e-12);
        for w in tr.k.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for i in 1..tr.k.len() {
            if tr.k[i] > tr.k[i - 1] {
                assert!((tr.z[i] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn running_min_formula_matches_direct_evaluation() {
        // k̃_t = -min_{s<=t} ((1 - z - G_s) ∧ 0), evaluated by brute force
        let p = params();
        let b = build_bridge(Case::High, [3.0, -2.0, 0.9], 5.0, &p).unwrap();
        let n = 20_000;
        let mut m = 0.0f64;
        for i in 0..=n {
            let t = 5.0 * i as f64 / n as f64;
            m = m.min((1.0 - 0.9 - b.eval(t)[0]).min(0.0));
            assert!((path_point(&b, &p, t).k - (-m)).abs() < 1e-9);
        }
    }

    #[test]
    fn wrong_case_rejected() {
        let p = params();
        assert!(build_bridge(Case::Low, [0.0, 0.0, 0.9], 5.0, &p).is_err());
        assert!(build_bridge(Case::High, [0.0, 0.0, 0.5], 5.0, &p).is_err());
    }

    #[test]
    fn stationary_point_is_reached_exactly() {
        let p = params();
        let r = reach_point([0.0, 0.0, 0.5], Case::Low, 5.0, 1000, &p).unwrap();
        assert_eq!(r.result.miss, 0.0);
    }

    #[test]
    fn extreme_corner_reaches_target() {
        let p = params();
        for (x0, case) in [([-7.07, 7.07, 0.1], Case::Low), ([7.07, -7.07, 1.0], Case::High), ([-7.07, 0.0, 0.75], Case::High)] {
            let r = reach_point(x0, case, 5.0, 1 << 15, &p).unwrap();
            assert!(r.result.miss <= REACH_TOL, "{x0:?}: {r:?}");
        }
    }
}
