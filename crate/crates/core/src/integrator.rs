//! Reflected Euler–Maruyama stepping with the one-step Skorokhod map at `z = 1`.

use crate::model::{drift_aux, drift_eta, drift_uvz, drift_xyz, AuxState, ModelParams};
use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct StepConfig {
    pub dt_base: f64,
    pub adapt: bool,
    /// Steps shorter than this flag the path as explosion-scale.
    pub dt_min: f64,
    /// Explosion floor for `z`.
    pub z_min: f64,
    /// Radius of the truncated domain: `|(c1, c2)| < R` and `z > 1/R`.
    pub r_stop: f64,
    pub seed: u64,
    /// Bound on `|drift| dt` per step when adapting.
    pub max_displacement: f64,
    /// Scale the bound on the `(c1, c2)` move by `max(1, r)`; the `z` move stays absolute.
    /// Lets paths started at very large `r` relax in a few thousand steps.
    pub relative_displacement: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt_base: 1e-3,
            adapt: true,
            dt_min: 1e-12,
            z_min: 1e-12,
            r_stop: 1e9,
            seed: 0,
            max_displacement: 0.1,
            relative_displacement: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Invalid(&'static str),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Invalid(m) => write!(f, "{m}"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl StepConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt_base > 0.0 && self.dt_min > 0.0) {
            return Err(ConfigError::Invalid("dt_base and dt_min must be positive"));
        }
        if self.dt_min > self.dt_base {
            return Err(ConfigError::Invalid("dt_min must not exceed dt_base"));
        }
        if !(self.z_min > 0.0 && self.z_min < 1.0) {
            return Err(ConfigError::Invalid("z_min must lie in (0, 1)"));
        }
        if !(self.r_stop > 1.0) {
            return Err(ConfigError::Invalid("r_stop must exceed 1"));
        }
        if !(self.max_displacement > 0.0) {
            return Err(ConfigError::Invalid("max_displacement must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StopReason {
    TimeLimit,
    ExitedOR,
    ExplosionScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum System {
    /// Reflected `(x, y, z)`.
    Xyz,
    /// Reflected `(u, v, z)`.
    Uvz,
    /// Unreflected `(U, V, Z)`.
    Aux,
    /// One-dimensional `eta`, stored in the first slot.
    Eta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepError;

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "explosion-scale state")
    }
}

impl core::error::Error for StepError {}

/// `(min(z + dz, 1), max(z + dz - 1, 0))`.
#[inline]
pub fn skorokhod_step(z: f64, dz: f64) -> (f64, f64) {
    let pre = z + dz;
    if pre <= 1.0 {
        (pre, 0.0)
    } else {
        (1.0, pre - 1.0)
    }
}

/// One step of the reflected `(x, y, z)` system. Returns the new state and `dk`.
pub fn step_xyz(s: [f64; 3], p: &ModelParams, dt: f64, noise: [f64; 2]) -> Result<([f64; 3], f64), StepError> {
    let f = drift_xyz(s, p).map_err(|_| StepError)?;
    let x = s[0] + f[0] * dt + (2.0 * p.kappa1() * dt).sqrt() * noise[0];
    let y = s[1] + f[1] * dt + (2.0 * p.kappa2() * dt).sqrt() * noise[1];
    let (z, dk) = skorokhod_step(s[2], f[2] * dt);
    if !(x.is_finite() && y.is_finite()) || z <= 0.0 {
        return Err(StepError);
    }
    Ok(([x, y, z], dk))
}

/// One step of the reflected `(u, v, z)` system.
///
/// On reflection the boundary terms `u/(3z) dk` and `v/(3z) dk` are applied at
/// the projected state `z = 1`.
pub fn step_uvz(s: [f64; 3], p: &ModelParams, dt: f64, noise: [f64; 2]) -> Result<([f64; 3], f64), StepError> {
    let f = drift_uvz(s, p).map_err(|_| StepError)?;
    let zc = s[2].cbrt();
    let mut u = s[0] + f[0] * dt + (2.0 * p.kappa1() * dt).sqrt() / zc * noise[0];
    let mut v = s[1] + f[1] * dt + (2.0 * p.kappa2() * dt).sqrt() / zc * noise[1];
    let (z, dk) = skorokhod_step(s[2], f[2] * dt);
    if dk > 0.0 {
        u += u / (3.0 * z) * dk;
        v += v / (3.0 * z) * dk;
    }
    if !(u.is_finite() && v.is_finite()) || z <= 0.0 {
        return Err(StepError);
    }
    Ok(([u, v, z], dk))
}

/// One step of the auxiliary system; `Z` is advanced by its exact exponential factor.
pub fn step_aux(a: &AuxState, p: &ModelParams, dt: f64, noise: [f64; 2]) -> AuxState {
    let f = drift_aux(a, p);
    AuxState {
        u: a.u + f[0] * dt + (2.0 * p.kappa1() * dt).sqrt() * noise[0],
        v: a.v + f[1] * dt + (2.0 * p.kappa2() * dt).sqrt() * noise[1],
        z: a.z * ((1.0 - p.h()) * a.u * dt).exp(),
    }
}

pub fn step_eta(eta: f64, p: &ModelParams, dt: f64, noise: f64) -> f64 {
    eta + drift_eta(eta, p) * dt + (2.0 * p.kappa2() * dt).sqrt() * noise
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReflectedPath {
    pub system: System,
    pub times: Vec<f64>,
    pub states: Vec<[f64; 3]>,
    /// Cumulative boundary local time.
    pub k: Vec<f64>,
    pub stopped: StopReason,
    /// Time average of each coordinate over the whole run, every step weighted by its length.
    pub time_average: [f64; 3],
    pub steps: u64,
}

/// Per-path generator: the stream index separates paths sharing a seed.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
fn normal2<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

/// Step size for the state `s`: `dt_base`, scaled by `z^{2/3}` in the reflected
/// systems and cut so that `|drift| dt <= max_displacement`.
pub fn adaptive_dt(system: System, s: [f64; 3], p: &ModelParams, cfg: &StepConfig) -> f64 {
    if !cfg.adapt {
        return cfg.dt_base;
    }
    let f = match system {
        System::Xyz => drift_xyz(s, p).unwrap_or([f64::INFINITY; 3]),
        System::Uvz => drift_uvz(s, p).unwrap_or([f64::INFINITY; 3]),
        System::Aux => {
            let d = drift_aux(&AuxState { u: s[0], v: s[1], z: s[2] }, p);
            [d[0], d[1], 0.0]
        }
        System::Eta => [drift_eta(s[0], p), 0.0, 0.0],
    };
    let mut dt = cfg.dt_base;
    if matches!(system, System::Xyz | System::Uvz) {
        dt *= s[2].powf(2.0 / 3.0).min(1.0);
    }
    if cfg.relative_displacement {
        let lim = cfg.max_displacement * s[0].hypot(s[1]).max(1.0);
        let sp = f[0].hypot(f[1]);
        if sp * dt > lim {
            dt = lim / sp;
        }
        if f[2].abs() * dt > cfg.max_displacement {
            dt = cfg.max_displacement / f[2].abs();
        }
        return dt;
    }
    let speed = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
    if speed * dt > cfg.max_displacement {
        dt = cfg.max_displacement / speed;
    }
    dt
}

/// One accepted step, as seen by an observer of [`run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    /// Time at the end of the step.
    pub t: f64,
    pub dt: f64,
    /// State at the start of the step.
    pub prev: [f64; 3],
    pub state: [f64; 3],
    pub dk: f64,
    /// Cumulative local time after the step.
    pub k: f64,
}

fn one_step<R: Rng + ?Sized>(system: System, s: [f64; 3], p: &ModelParams, dt: f64, rng: &mut R) -> Result<([f64; 3], f64), StepError> {
    match system {
        System::Xyz => step_xyz(s, p, dt, normal2(rng)),
        System::Uvz => step_uvz(s, p, dt, normal2(rng)),
        System::Aux => {
            let a = step_aux(&AuxState { u: s[0], v: s[1], z: s[2] }, p, dt, normal2(rng));
            // Z may overflow or underflow on long runs; only (U, V) must stay finite
            if a.u.is_finite() && a.v.is_finite() {
                Ok(([a.u, a.v, a.z], 0.0))
            } else {
                Err(StepError)
            }
        }
        System::Eta => {
            let n: f64 = rng.sample(StandardNormal);
            let e = step_eta(s[0], p, dt, n);
            if e.is_finite() {
                Ok(([e, 0.0, 0.0], 0.0))
            } else {
                Err(StepError)
            }
        }
    }
}

/// Streams every accepted step to `observe` without storing the path.
///
/// Deterministic in `(cfg.seed, stream, s0, p)`. Stops at `t_end`, on leaving
/// the truncated domain, or when `z` falls to `z_min` or the step falls below
/// `dt_min`. Returns the stop reason, the final time and the step count.
pub fn run<F: FnMut(&StepEvent)>(
    system: System,
    s0: [f64; 3],
    p: &ModelParams,
    cfg: &StepConfig,
    t_end: f64,
    stream: u64,
    observe: F,
) -> (StopReason, f64, u64) {
    run_with_stops(system, s0, p, cfg, &[t_end], stream, observe, |_, _| {})
}

/// As [`run`], but steps are cut to land exactly on each of the increasing
/// times `stops` (the last one ends the run) and `at_stop(i, state)` is called there.
#[allow(clippy::too_many_arguments)]
pub fn run_with_stops<F: FnMut(&StepEvent), G: FnMut(usize, [f64; 3])>(
    system: System,
    s0: [f64; 3],
    p: &ModelParams,
    cfg: &StepConfig,
    stops: &[f64],
    stream: u64,
    mut observe: F,
    mut at_stop: G,
) -> (StopReason, f64, u64) {
    let mut rng = path_rng(cfg.seed, stream);
    let reflected = matches!(system, System::Xyz | System::Uvz);
    let (mut t, mut s, mut k, mut steps) = (0.0, s0, 0.0, 0u64);
    for (i, &stop) in stops.iter().enumerate() {
        while t < stop {
            let left = stop - t;
            let mut dt = adaptive_dt(system, s, p, cfg);
            if dt < cfg.dt_min && left > cfg.dt_min {
                return (StopReason::ExplosionScale, t, steps);
            }
            dt = dt.min(left);
            let (ns, dk) = match one_step(system, s, p, dt, &mut rng) {
                Ok(v) => v,
                Err(_) => return (StopReason::ExplosionScale, t, steps),
            };
            // the last step may be shortened to land on the stop exactly
            t = if dt == left { stop } else { t + dt };
            k += dk;
            steps += 1;
            observe(&StepEvent { t, dt, prev: s, state: ns, dk, k });
            s = ns;
            if reflected && s[2] <= cfg.z_min {
                return (StopReason::ExplosionScale, t, steps);
            }
            if s[0].hypot(s[1]) >= cfg.r_stop || (reflected && s[2] <= 1.0 / cfg.r_stop) {
                return (StopReason::ExitedOR, t, steps);
            }
        }
        at_stop(i, s);
    }
    (StopReason::TimeLimit, t, steps)
}

/// Records every `stride`-th step plus the initial and final states.
pub fn simulate(
    system: System,
    s0: [f64; 3],
    p: &ModelParams,
    cfg: &StepConfig,
    t_end: f64,
    stride: usize,
    stream: u64,
) -> ReflectedPath {
    let stride = stride.max(1) as u64;
    let mut path = ReflectedPath {
        system,
        times: alloc::vec![0.0],
        states: alloc::vec![s0],
        k: alloc::vec![0.0],
        stopped: StopReason::TimeLimit,
        time_average: s0,
        steps: 0,
    };
    let mut acc = [0.0; 3];
    let mut n = 0u64;
    let mut last = (0.0, s0, 0.0);
    let (stopped, t, steps) = run(system, s0, p, cfg, t_end, stream, |e| {
        for i in 0..3 {
            acc[i] += e.prev[i] * e.dt;
        }
        n += 1;
        if n % stride == 0 {
            path.times.push(e.t);
            path.states.push(e.state);
            path.k.push(e.k);
        } else {
            last = (e.t, e.state, e.k);
        }
    });
    if n % stride != 0 {
        path.times.push(last.0);
        path.states.push(last.1);
        path.k.push(last.2);
    }
    if t > 0.0 {
        path.time_average = acc.map(|a| a / t);
    }
    path.stopped = stopped;
    path.steps = steps;
    path
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExitError {
    /// The path was still inside after the time cap.
    TimeCap(f64),
    StartOutside,
}

impl fmt::Display for ExitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExitError::TimeCap(t) => write!(f, "no exit before the time cap {t}"),
            ExitError::StartOutside => write!(f, "|eta0| must not exceed eta*"),
        }
    }
}

impl core::error::Error for ExitError {}

/// First exit time of `eta` from `(-eta*, eta*)`.
///
/// Between two inside points `a`, `b` the path is taken to have crossed the
/// level `±eta*` with the Brownian-bridge probability
/// `exp(-2 (eta* ∓ a)(eta* ∓ b) / (2 kappa2 dt))`; without this the discrete
/// exit time is biased upwards.
pub fn sample_exit_time<R: Rng + ?Sized>(
    eta0: f64,
    p: &ModelParams,
    eta_star: f64,
    dt: f64,
    t_cap: f64,
    rng: &mut R,
) -> Result<f64, ExitError> {
    if eta0.abs() > eta_star {
        return Err(ExitError::StartOutside);
    }
    if eta0.abs() == eta_star {
        return Ok(0.0);
    }
    let var = 2.0 * p.kappa2() * dt;
    let (mut t, mut a) = (0.0, eta0);
    while t < t_cap {
        let b = step_eta(a, p, dt, rng.sample(StandardNormal));
        t += dt;
        if b.abs() >= eta_star {
            return Ok(t);
        }
        let up = (-2.0 * (eta_star - a) * (eta_star - b) / var).exp();
        let down = (-2.0 * (eta_star + a) * (eta_star + b) / var).exp();
        if rng.random::<f64>() < up + down {
            return Ok(t);
        }
        a = b;
    }
    Err(ExitError::TimeCap(t_cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn skorokhod_examples() {
        let (z, k) = skorokhod_step(0.9, 0.3);
        assert!((z - 1.0).abs() < 1e-15 && (k - 0.2).abs() < 1e-15);
        assert_eq!(skorokhod_step(0.9, -0.3), (0.6000000000000001, 0.0));
        assert_eq!(skorokhod_step(1.0, 0.0), (1.0, 0.0));
    }

    #[test]
    fn step_examples() {
        let p = params();
        let (s, k) = step_xyz([0.0, 0.0, 0.5], &p, 0.1, [0.0, 0.0]).unwrap();
        assert_eq!((s, k), ([0.0, 0.0, 0.5], 0.0));
        let (s, k) = step_xyz([1.0, 0.0, 1.0], &p, 0.1, [0.0, 0.0]).unwrap();
        assert_eq!(s[2], 1.0);
        assert!((k - 0.05).abs() < 1e-15);
    }

    #[test]
    fn uvz_boundary_kick() {
        // (3, 0, 1), h = 0.5: dz = (1-h) u dt = 0.05 at dt = 1/30
        let p = params();
        let dt = 0.05 / 1.5;
        let f = drift_uvz([3.0, 0.0, 1.0], &p).unwrap();
        let (s, k) = step_uvz([3.0, 0.0, 1.0], &p, dt, [0.0, 0.0]).unwrap();
        assert!((k - 0.05).abs() < 1e-15);
        let pre = 3.0 + f[0] * dt;
        assert!((s[0] - (pre + pre / 3.0 * k)).abs() < 1e-14);
    }

    #[test]
    fn zero_horizon_and_determinism() {
        let p = params();
        let cfg = StepConfig { seed: 42, ..StepConfig::default() };
        let path = simulate(System::Xyz, [0.3, 0.1, 0.7], &p, &cfg, 0.0, 1, 0);
        assert_eq!(path.states.len(), 1);
        let a = simulate(System::Uvz, [0.3, 0.1, 0.7], &p, &cfg, 2.0, 7, 3);
        let b = simulate(System::Uvz, [0.3, 0.1, 0.7], &p, &cfg, 2.0, 7, 3);
        assert_eq!(a, b);
        let c = simulate(System::Uvz, [0.3, 0.1, 0.7], &p, &cfg, 2.0, 7, 4);
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn exit_time_at_boundary_is_zero() {
        let p = ModelParams::new(1.0, 0.1, 1.0, 1.0).unwrap();
        let mut rng = path_rng(1, 0);
        assert_eq!(sample_exit_time(10.0, &p, 10.0, 1e-3, 100.0, &mut rng), Ok(0.0));
        assert_eq!(sample_exit_time(-10.0, &p, 10.0, 1e-3, 100.0, &mut rng), Ok(0.0));
        assert!(sample_exit_time(11.0, &p, 10.0, 1e-3, 100.0, &mut rng).is_err());
    }

    #[test]
    fn adaptive_step_respects_displacement() {
        let p = params();
        let cfg = StepConfig::default();
        for s in [[50.0, 3.0, 1e-3], [1.0, 1.0, 1.0], [-1e3, 10.0, 0.5]] {
            let dt = adaptive_dt(System::Xyz, s, &p, &cfg);
            let f = drift_xyz(s, &p).unwrap();
            let sp = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
            assert!(sp * dt <= cfg.max_displacement * (1.0 + 1e-12));
        }
    }

    #[test]
    fn relative_displacement_scales_with_radius() {
        let p = params();
        let cfg = StepConfig { relative_displacement: true, ..StepConfig::default() };
        let s = [1e6, 0.0, 1.0];
        let dt = adaptive_dt(System::Xyz, s, &p, &cfg);
        let f = drift_xyz(s, &p).unwrap();
        assert!(f[0].hypot(f[1]) * dt <= 0.1 * 1e6 * (1.0 + 1e-12));
        assert!(f[2].abs() * dt <= 0.1 * (1.0 + 1e-12));
        assert!(dt > adaptive_dt(System::Xyz, s, &p, &StepConfig::default()) * 100.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn skorokhod_complementarity(z in 1e-6f64..=1.0, dz in -0.5f64..0.5) {
            let (zn, dk) = skorokhod_step(z, dz);
            prop_assert!(zn <= 1.0);
            prop_assert!(dk >= 0.0);
            prop_assert_eq!(dk * (1.0 - zn), 0.0);
        }

        #[test]
        fn reflected_paths_stay_below_one(seed in 0u64..1000, x in -3.0f64..3.0, z in 0.05f64..=1.0, uvz in any::<bool>()) {
            let p = params();
            let cfg = StepConfig { seed, ..StepConfig::default() };
            let sys = if uvz { System::Uvz } else { System::Xyz };
            let path = simulate(sys, [x, 0.5, z], &p, &cfg, 1.0, 1, 0);
            for w in path.k.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            for (i, s) in path.states.iter().enumerate() {
                prop_assert!(s[2] <= 1.0);
                if i > 0 && path.k[i] > path.k[i - 1] {
                    prop_assert_eq!(s[2], 1.0);
                }
            }
        }
    }
}
