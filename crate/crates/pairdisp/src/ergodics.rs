//! Long-run statistics: the sign of `mu(U)`, tails, moments, exit-time Laplace
//! transforms and the geometric drift of `Psi`.

use crate::exec::ensemble;
use anyhow::{bail, Result};
use pairdisp_core::gfun::GKernel;
use pairdisp_core::integrator::{path_rng, run, run_with_stops, sample_exit_time, StepConfig, StopReason, System};
use pairdisp_core::lyapunov::{phi_value, psi_xyz_value, Assembly, LyapunovParams};
use pairdisp_core::stats::{batch_means_ci, hill, rank_regression, Interval, RunningStats, TailEstimate, TimeBatches};
use pairdisp_core::ModelParams;
use serde::Serialize;

/// Physical noise: `kappa2 = (1 + 2h) kappa1`.
pub fn physical(gamma: f64, h: f64, kappa1: f64) -> Result<ModelParams> {
    Ok(ModelParams::rough_physical(gamma, h, kappa1)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct MuEstimate {
    pub h: f64,
    /// Time average of `U` over the whole run, pooled over paths.
    pub time_average: f64,
    /// Batch-means interval after burn-in.
    pub ci: Interval,
    pub v_ci: Interval,
    /// `(t, running average of U)` at log-spaced checkpoints, pooled over paths.
    pub running: Vec<(f64, f64)>,
    pub last_decade_positive: bool,
    pub stopped: Vec<StopReason>,
    pub steps: u64,
}

impl MuEstimate {
    pub fn positive(&self) -> bool {
        self.ci.lo() > 0.0 && self.stopped.iter().all(|s| *s == StopReason::TimeLimit)
    }
}

/// Time average of `U` for the auxiliary `(U, V)` dynamics from the origin.
///
/// The first tenth of each path's batches is discarded for the interval.
pub fn estimate_mu_u(
    p: &ModelParams,
    t_end: f64,
    paths: usize,
    batches: usize,
    checkpoints: usize,
    cfg: &StepConfig,
) -> Result<MuEstimate> {
    if !(t_end >= 1e3) {
        bail!("the mu(U) estimate needs T >= 1e3");
    }
    let cps: Vec<f64> = (0..checkpoints.max(2))
        .map(|i| t_end.powf(i as f64 / (checkpoints.max(2) - 1) as f64))
        .collect();
    let width = t_end / batches as f64;
    let runs = ensemble(paths.max(1), |i| {
        let mut bu = TimeBatches::new(width);
        let mut bv = TimeBatches::new(width);
        let mut cum = 0.0;
        let mut run_avg = vec![f64::NAN; cps.len()];
        let mut next = 0;
        let (stop, t, steps) = run(System::Aux, [0.0, 0.0, 1.0], p, cfg, t_end, i, |e| {
            bu.push(e.prev[0], e.dt);
            bv.push(e.prev[1], e.dt);
            cum += e.prev[0] * e.dt;
            while next < cps.len() && e.t >= cps[next] {
                run_avg[next] = cum / e.t;
                next += 1;
            }
        });
        (bu, bv, cum / t, run_avg, stop, steps)
    });
    let skip = batches / 10;
    let mut mu = Vec::new();
    let mut mv = Vec::new();
    let mut avg = RunningStats::new();
    let mut running = vec![0.0; cps.len()];
    let mut stopped = Vec::new();
    let mut steps = 0;
    for (bu, bv, a, ra, stop, n) in &runs {
        mu.extend_from_slice(&bu.means()[skip.min(bu.means().len())..]);
        mv.extend_from_slice(&bv.means()[skip.min(bv.means().len())..]);
        avg.push(*a);
        for (r, v) in running.iter_mut().zip(ra) {
            *r += v / runs.len() as f64;
        }
        stopped.push(*stop);
        steps += n;
    }
    let running: Vec<(f64, f64)> = cps.iter().copied().zip(running).collect();
    let last_decade_positive = running.iter().filter(|(t, _)| *t >= t_end / 10.0).all(|(_, v)| *v > 0.0);
    Ok(MuEstimate {
        h: p.h(),
        time_average: avg.mean,
        ci: batch_means_ci(&mu),
        v_ci: batch_means_ci(&mv),
        running,
        last_decade_positive,
        stopped,
        steps,
    })
}

/// Lag at which the autocorrelation of an equally spaced series first drops below `1/e`.
pub fn decorrelation_lag(x: &[f64]) -> usize {
    let n = x.len();
    if n < 4 {
        return 1;
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if c0 == 0.0 {
        return 1;
    }
    for lag in 1..n / 2 {
        let c: f64 = (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum();
        if c / c0 < (-1.0f64).exp() {
            return lag;
        }
    }
    n / 2
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub h: f64,
    pub samples: usize,
    pub negative_samples: usize,
    /// Sampling interval in time units.
    pub interval: f64,
    pub hill: Option<TailEstimate>,
    pub rank: Option<TailEstimate>,
    /// `2/h + 1`.
    pub predicted_density_exponent: f64,
    /// Hill survival index plus one.
    pub density_exponent: f64,
    pub relative_error: f64,
    pub within_30_percent: bool,
    pub stopped: Vec<StopReason>,
}

/// Hill estimate of the left `x`-tail of the reflected system with physical noise.
///
/// A pilot run sets the sampling interval to the `1/e` decorrelation time of
/// `x`; each path is then long enough to deliver `min_samples` in total.
pub fn estimate_tail(
    p: &ModelParams,
    t_end: f64,
    paths: usize,
    burn_in: f64,
    min_samples: usize,
    cfg: &StepConfig,
) -> Result<TailReport> {
    let pilot_dt = 0.01;
    let pilot_t = 200.0;
    let pilot_stops: Vec<f64> = (1..=(pilot_t / pilot_dt) as usize).map(|i| i as f64 * pilot_dt).collect();
    let mut pilot = Vec::with_capacity(pilot_stops.len());
    run_with_stops(System::Xyz, [0.0, 0.0, 0.5], p, cfg, &pilot_stops, u64::MAX, |_| {}, |_, s| pilot.push(s[0]));
    let burn = pilot.len() / 10;
    let interval = decorrelation_lag(&pilot[burn..]) as f64 * pilot_dt;
    let paths = paths.max(1);
    let per_path = min_samples.div_ceil(paths) as f64;
    let t_path = t_end.max(per_path * interval / (1.0 - burn_in));
    let t0 = burn_in * t_path;
    let n_stops = ((t_path - t0) / interval).floor() as usize;
    let stops: Vec<f64> = (0..=n_stops).map(|i| t0 + i as f64 * interval).collect();
    let runs = ensemble(paths, |i| {
        let mut xs = Vec::with_capacity(stops.len());
        let (stop, _, _) = run_with_stops(System::Xyz, [0.0, 0.0, 0.5], p, cfg, &stops, i, |_| {}, |_, s| xs.push(s[0]));
        (xs, stop)
    });
    let mut left = Vec::new();
    let mut samples = 0;
    let mut stopped = Vec::new();
    for (xs, stop) in runs {
        samples += xs.len();
        left.extend(xs.iter().filter(|x| **x < 0.0).map(|x| -x));
        stopped.push(stop);
    }
    let hill_est = hill(&left).ok();
    let k = hill_est.map(|e| e.k_used).unwrap_or(0);
    let rank = rank_regression(&left, k.max(pairdisp_core::stats::MIN_K)).ok();
    let predicted = 2.0 / p.h() + 1.0;
    let density = hill_est.map(|e| e.density_exponent()).unwrap_or(f64::NAN);
    let rel = (density - predicted) / predicted;
    Ok(TailReport {
        h: p.h(),
        samples,
        negative_samples: left.len(),
        interval,
        hill: hill_est,
        rank,
        predicted_density_exponent: predicted,
        density_exponent: density,
        relative_error: rel,
        within_30_percent: rel.abs() <= 0.3,
        stopped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    /// `r^lambda`, or `z^{-2/3}` when `lambda` is `None`.
    pub lambda: Option<f64>,
    pub ci: Interval,
    /// Post-burn-in average over the first half of the window.
    pub first_half: f64,
    pub stabilized: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentsReport {
    pub h: f64,
    pub moments: Vec<MomentReport>,
    pub stopped: Vec<StopReason>,
}

/// Time-averaged `r^lambda` for each `lambda`, and `z^{-2/3}`, along reflected paths.
///
/// A moment counts as stabilized when the average over the first half of the
/// post-burn-in window differs from the full average by less than the width
/// of the 95% batch-means interval.
pub fn empirical_moments(
    p: &ModelParams,
    lambdas: &[f64],
    t_end: f64,
    paths: usize,
    batches: usize,
    burn_in: f64,
    cfg: &StepConfig,
) -> Result<MomentsReport> {
    if lambdas.iter().any(|l| !(*l >= 0.0)) {
        bail!("moment exponents must be non-negative");
    }
    let nf = lambdas.len() + 1;
    let t0 = burn_in * t_end;
    let width = (t_end - t0) / batches as f64;
    let runs = ensemble(paths.max(1), |i| {
        let mut b: Vec<TimeBatches> = (0..nf).map(|_| TimeBatches::new(width)).collect();
        let (stop, _, _) = run(System::Xyz, [0.0, 0.0, 0.5], p, cfg, t_end, i, |e| {
            let start = e.t - e.dt;
            if e.t <= t0 {
                return;
            }
            let dt = e.t - start.max(t0);
            let r = e.prev[0].hypot(e.prev[1]);
            for (j, l) in lambdas.iter().enumerate() {
                b[j].push(if *l == 0.0 { 1.0 } else { r.powf(*l) }, dt);
            }
            b[nf - 1].push(e.prev[2].powf(-2.0 / 3.0), dt);
        });
        (b, stop)
    });
    let mut moments = Vec::new();
    for j in 0..nf {
        let mut means = Vec::new();
        let mut first = RunningStats::new();
        for (b, _) in &runs {
            let m = b[j].means();
            means.extend_from_slice(m);
            for v in &m[..m.len() / 2] {
                first.push(*v);
            }
        }
        let ci = batch_means_ci(&means);
        let stabilized = (ci.mean - first.mean).abs() < 2.0 * ci.half_width;
        moments.push(MomentReport { lambda: lambdas.get(j).copied(), ci, first_half: first.mean, stabilized });
    }
    Ok(MomentsReport { h: p.h(), moments, stopped: runs.iter().map(|r| r.1).collect() })
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceRow {
    pub s: f64,
    pub eta0: f64,
    pub monte_carlo: f64,
    pub std_err: f64,
    pub quadrature: f64,
    /// `(MC - quadrature) / SE`; zero when both sides agree exactly.
    pub z_score: f64,
    pub agrees: bool,
    pub capped: usize,
}

/// Monte Carlo `E[e^{sT}]` of the bridge-corrected exit time against the quadrature `G_s`.
#[allow(clippy::too_many_arguments)]
pub fn laplace_crosscheck(
    h: f64,
    kappa2: f64,
    cone: f64,
    s_values: &[f64],
    eta_fractions: &[f64],
    paths: usize,
    dt: f64,
    t_cap: f64,
    seed: u64,
) -> Result<Vec<LaplaceRow>> {
    let p = ModelParams::new(1.0, h, 1.0, kappa2)?;
    let eta_star = cone * kappa2.sqrt();
    let kernels: Vec<GKernel> =
        s_values.iter().map(|&s| GKernel::new(s, h, kappa2, eta_star)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (j, frac) in eta_fractions.iter().enumerate() {
        let eta0 = (frac * eta_star).clamp(-eta_star, eta_star);
        let times = ensemble(paths, |i| {
            let mut rng = path_rng(seed ^ ((j as u64 + 1) << 40), i);
            sample_exit_time(eta0, &p, eta_star, dt, t_cap, &mut rng).ok()
        });
        let capped = times.iter().filter(|t| t.is_none()).count();
        for (s, g) in s_values.iter().zip(&kernels) {
            let st: RunningStats = times.iter().flatten().map(|t| (s * t).exp()).collect();
            let quad = g.g(eta0);
            let diff = st.mean - quad;
            let se = st.std_err();
            let z = if diff == 0.0 { 0.0 } else { diff / se };
            rows.push(LaplaceRow {
                s: *s,
                eta0,
                monte_carlo: st.mean,
                std_err: se,
                quadrature: quad,
                z_score: z,
                agrees: z.abs() <= 3.0 && capped == 0,
                capped,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftRow {
    pub s0: [f64; 3],
    /// Shifted `Psi(s0)`.
    pub psi0: f64,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub eps_hat: f64,
    pub d_hat: f64,
    pub bound_holds: bool,
    pub decreasing: bool,
    /// Paths that stopped before the last probe time.
    pub lost: usize,
}

impl DriftRow {
    pub fn passed(&self) -> bool {
        self.eps_hat < 1.0 && self.bound_holds && self.lost == 0 && self.d_hat < self.psi0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftProbe {
    /// Smallest `Phi` found on the search grid; `Psi - floor + 1` is reported.
    pub floor: f64,
    pub rows: Vec<DriftRow>,
}

/// Minimum of `Phi` over a log grid in `r` (`1e-3..1e12`), 32 angles and
/// `z` in `1e-8..1`, refined by a second grid around the best node.
pub fn phi_floor(lp: &LyapunovParams, a: &Assembly) -> f64 {
    let scan = |r_lo: f64, r_hi: f64, z_lo: f64, z_hi: f64, n: usize| {
        let best = ensemble(n, |i| {
            let r = r_lo * (r_hi / r_lo).powf(i as f64 / (n - 1) as f64);
            let mut best = (f64::INFINITY, r, 1.0);
            for k in 0..32 {
                let th = std::f64::consts::TAU * k as f64 / 32.0;
                for j in 0..40 {
                    let z = z_lo * (z_hi / z_lo).powf(j as f64 / 39.0);
                    let v = phi_value([r * th.cos(), r * th.sin(), z], lp, a);
                    if v < best.0 {
                        best = (v, r, z);
                    }
                }
            }
            best
        });
        best.into_iter().fold((f64::INFINITY, 1.0, 1.0), |b, c| if c.0 < b.0 { c } else { b })
    };
    let (v0, r0, z0) = scan(1e-3, 1e12, 1e-8, 1.0, 240);
    let (v1, _, _) = scan(r0 / 1.2, r0 * 1.2, (z0 / 2.0).max(1e-8), (z0 * 2.0).min(1.0), 60);
    v0.min(v1)
}

/// Fits `y_t <= y_0 eps^t + D` in the least-squares sense among the pairs that
/// satisfy the bound at every `t`; `eps` is scanned on a log grid in `(0, 1]`.
pub fn fit_geometric_bound(times: &[f64], y: &[f64], y0: f64) -> (f64, f64) {
    let mut best = (1.0, f64::INFINITY, f64::INFINITY);
    for i in 0..=4000 {
        // rate from 1e-4 to 1e2 per unit time
        let rate = 10f64.powf(-4.0 + 6.0 * i as f64 / 4000.0);
        let eps = (-rate).exp();
        let resid: Vec<f64> = times.iter().zip(y).map(|(t, v)| v - y0 * eps.powf(*t)).collect();
        let d_ls = resid.iter().sum::<f64>() / resid.len() as f64;
        let d = resid.iter().copied().fold(d_ls, f64::max);
        let sse: f64 = resid.iter().map(|r| (r - d) * (r - d)).sum();
        if sse < best.2 {
            best = (eps, d, sse);
        }
    }
    (best.0, best.1)
}

/// `E[Psi(x_t)]` from far-out states of the reflected system, with the fitted geometric bound.
///
/// `Psi` is shifted by the floor of `Phi` so that it is at least 1, and paths
/// use the relative displacement bound so that starts at large `r` are cheap.
pub fn geometric_drift_probe(
    lp: &LyapunovParams,
    initial: &[[f64; 3]],
    times: &[f64],
    paths: usize,
    cfg: &StepConfig,
) -> Result<DriftProbe> {
    let Some(a) = lp.assembly().copied() else { bail!("the drift probe needs an assembled ledger") };
    let p = *lp.model();
    let cfg = StepConfig { relative_displacement: true, ..*cfg };
    let floor = phi_floor(lp, &a);
    let psi = |s: [f64; 3]| psi_xyz_value(s, lp, &a) - floor + 1.0;
    let mut times: Vec<f64> = times.to_vec();
    times.sort_by(f64::total_cmp);
    let positive: Vec<f64> = times.iter().copied().filter(|t| *t > 0.0).collect();
    let mut rows = Vec::new();
    for (n, &s0) in initial.iter().enumerate() {
        let psi0 = psi(s0);
        let runs = ensemble(paths, |i| {
            let mut vals = Vec::with_capacity(positive.len());
            let (stop, _, _) = run_with_stops(System::Xyz, s0, &p, &cfg, &positive, ((n as u64) << 32) | i, |_| {}, |_, s| {
                vals.push(psi(s))
            });
            (vals, stop)
        });
        let lost = runs.iter().filter(|r| r.1 != StopReason::TimeLimit).count();
        let mut mean = Vec::new();
        let mut se = Vec::new();
        let mut k = 0;
        for &t in &times {
            if t == 0.0 {
                mean.push(psi0);
                se.push(0.0);
                continue;
            }
            let st: RunningStats = runs.iter().filter_map(|r| r.0.get(k).copied()).collect();
            mean.push(st.mean);
            se.push(st.std_err());
            k += 1;
        }
        let (eps_hat, d_hat) = fit_geometric_bound(&times, &mean, psi0);
        let bound_holds = times.iter().zip(&mean).all(|(t, m)| *m <= psi0 * eps_hat.powf(*t) + d_hat);
        let decreasing = mean.windows(2).all(|w| w[1] <= w[0]);
        rows.push(DriftRow { s0, psi0, times: times.clone(), mean, std_err: se, eps_hat, d_hat, bound_holds, decreasing, lost });
    }
    Ok(DriftProbe { floor, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decorrelation_of_ar1() {
        // x_{n+1} = 0.9 x_n + noise has autocorrelation 0.9^lag, below 1/e at lag 10
        let mut x = vec![0.0f64; 200_000];
        let mut state = 1u64;
        for i in 1..x.len() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            x[i] = 0.9 * x[i - 1] + u;
        }
        let lag = decorrelation_lag(&x[..20_000]);
        assert!((9..=11).contains(&lag), "{lag}");
    }

    #[test]
    fn geometric_fit_recovers_exact_curve() {
        let times = [0.0, 0.5, 1.0, 2.0, 4.0];
        let y: Vec<f64> = times.iter().map(|t| 100.0 * 0.5f64.powf(*t) + 3.0).collect();
        let (eps, d) = fit_geometric_bound(&times, &y, 100.0);
        assert!((eps - 0.5).abs() < 2e-3, "{eps}");
        assert!((d - 3.0).abs() < 0.2, "{d}");
    }
}
