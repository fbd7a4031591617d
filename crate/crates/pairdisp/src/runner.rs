//! One function per experiment. Each writes its artifacts under `out` and
//! returns named pass/fail outcomes.

use crate::config::ExperimentConfig;
use crate::ergodics::{
    empirical_moments, estimate_mu_u, estimate_tail, geometric_drift_probe, laplace_crosscheck, physical, DriftProbe, LaplaceRow,
    MomentsReport, MuEstimate, TailReport,
};
use crate::exec::{ensemble, Parallel};
use crate::io::{write_controlled, write_csv, write_json, write_path};
use anyhow::{anyhow, Result};
use pairdisp_core::control::{build_bridge, reach_grid, reach_point, synthesize_controls, Case, ReachReport};
use pairdisp_core::integrator::{path_rng, run, simulate, skorokhod_step, StepConfig, StopReason, System};
use pairdisp_core::lyapunov::{LedgerChoices, LyapunovParams, Region};
use pairdisp_core::stats::{hill, TailEstimate};
use pairdisp_core::verify::{
    certify, g_ode_residual, interface_mismatch, operator_fd_agreement, pde_residual, psi_c1_mismatch, search_admissible,
    AssembledConstants, Certification, GridSpec, Interface, FD_AGREEMENT_TOL,
};
use pairdisp_core::ModelParams;
use rand::Rng;
use serde::Serialize;
use std::path::Path;

pub type Outcomes = Vec<(String, bool)>;

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Default, Serialize)]
pub struct ReflectionAudit {
    pub paths: usize,
    pub steps: u64,
    pub max_z: f64,
    /// Steps at which `k` decreased.
    pub k_decreases: u64,
    /// `sum dk 1{z < 1 - 1e-12}` over all steps.
    pub off_boundary_push: f64,
    pub skorokhod_samples: usize,
    /// Largest `|dk (1 - z_new)|` over random one-step maps.
    pub skorokhod_complementarity: f64,
}

impl ReflectionAudit {
    pub fn passed(&self) -> bool {
        self.max_z <= 1.0 && self.k_decreases == 0 && self.off_boundary_push == 0.0 && self.skorokhod_complementarity == 0.0
    }
}

/// Reflected `(x, y, z)` paths from random starts, checked for the Skorokhod invariants.
pub fn reflection_audit(p: &ModelParams, cfg: &StepConfig, paths: usize, t_end: f64, seed: u64) -> ReflectionAudit {
    let cfg = StepConfig { seed, ..*cfg };
    let parts = ensemble(paths, |i| {
        let mut rng = path_rng(seed ^ 0x5eed, i);
        let s0 = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.01..=1.0)];
        let mut a = ReflectionAudit { paths: 1, ..Default::default() };
        let mut k_prev = 0.0;
        run(System::Xyz, s0, p, &cfg, t_end, i, |e| {
            a.steps += 1;
            a.max_z = a.max_z.max(e.state[2]);
            if e.k < k_prev || e.dk < 0.0 {
                a.k_decreases += 1;
            }
            k_prev = e.k;
            if e.state[2] < 1.0 - 1e-12 {
                a.off_boundary_push += e.dk;
            }
        });
        for _ in 0..100 {
            let z: f64 = rng.random_range(0.0..=1.0);
            let dz: f64 = rng.random_range(-2.0..2.0);
            let (zn, dk) = skorokhod_step(z, dz);
            a.skorokhod_complementarity = a.skorokhod_complementarity.max((dk * (1.0 - zn)).abs());
            a.max_z = a.max_z.max(zn);
            a.skorokhod_samples += 1;
        }
        a
    });
    parts.into_iter().fold(ReflectionAudit::default(), |mut acc, a| {
        acc.paths += a.paths;
        acc.steps += a.steps;
        acc.max_z = acc.max_z.max(a.max_z);
        acc.k_decreases += a.k_decreases;
        acc.off_boundary_push += a.off_boundary_push;
        acc.skorokhod_samples += a.skorokhod_samples;
        acc.skorokhod_complementarity = acc.skorokhod_complementarity.max(a.skorokhod_complementarity);
        acc
    })
}

pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcomes> {
    let p = cfg.model.params()?;
    let sc = &cfg.simulate;
    let step = StepConfig { seed: cfg.seed, ..cfg.step };
    let paths = ensemble(sc.paths, |i| simulate(sc.system, sc.initial, &p, &step, sc.t_end, sc.stride, i));
    let mut outcomes = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        write_path(&out.join(format!("simulate/path_{i}.csv")), path)?;
        outcomes.push((format!("simulate_path_{i}_reached_t_end"), path.stopped == StopReason::TimeLimit));
    }
    let audit = reflection_audit(&p, &cfg.step, sc.audit_paths, sc.audit_t_end, cfg.seed);
    write_json(&out.join("simulate/reflection_audit.json"), &audit)?;
    outcomes.push(("reflection_invariants".into(), audit.passed()));
    Ok(outcomes)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    pub interface: Vec<(String, f64)>,
    pub pde: Vec<(String, f64)>,
    pub g_ode: f64,
    pub psi_c1: f64,
    pub fd_agreement: f64,
    pub fd_samples: usize,
}

pub const INTERFACE_TOL: f64 = 1e-9;
pub const PDE_TOL: f64 = 1e-6;
pub const G_ODE_TOL: f64 = 1e-8;
pub const PSI_C1_TOL: f64 = 1e-12;

impl StructuralReport {
    pub fn outcomes(&self) -> Outcomes {
        let mut v: Outcomes = Vec::new();
        for (n, e) in &self.interface {
            v.push((format!("interface_{n}"), *e <= INTERFACE_TOL));
        }
        for (n, e) in &self.pde {
            v.push((format!("pde_{n}"), *e <= PDE_TOL));
        }
        v.push(("g_ode".into(), self.g_ode <= G_ODE_TOL));
        v.push(("psi_c1".into(), self.psi_c1 <= PSI_C1_TOL));
        v.push(("operator_fd".into(), self.fd_agreement <= FD_AGREEMENT_TOL && self.fd_samples > 0));
        v
    }

    pub fn passed(&self) -> bool {
        self.outcomes().iter().all(|o| o.1)
    }
}

pub fn structural_suite(lp: &LyapunovParams, seed: u64) -> StructuralReport {
    let interface = Interface::ALL.iter().map(|&i| (i.name().to_string(), interface_mismatch(lp, i, 1000, seed))).collect();
    let pde = [Region::R1, Region::R2, Region::R3]
        .iter()
        .map(|&r| (r.name().to_string(), pde_residual(lp, r, 10_000, seed)))
        .collect();
    let (fd_agreement, fd_samples) = operator_fd_agreement(lp, 200, seed);
    StructuralReport {
        interface,
        pde,
        g_ode: g_ode_residual(lp, 2001),
        psi_c1: psi_c1_mismatch(lp, 1000),
        fd_agreement,
        fd_samples,
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub certification: Certification,
    pub doubled: Option<Certification>,
    pub structural: StructuralReport,
}

impl VerifyOutcome {
    pub fn certified(&self) -> bool {
        self.certification.passed() && self.doubled.as_ref().map_or(true, |d| d.passed())
    }

    pub fn outcomes(&self) -> Outcomes {
        let mut v: Outcomes = vec![("certification".into(), self.certification.passed())];
        if let Some(d) = &self.doubled {
            v.push(("certification_doubled_grid".into(), d.passed()));
        }
        v.extend(self.structural.outcomes());
        v
    }
}

/// Certifies `choices` as given, or sweeps `(c*, C, r*)` from them when `search`.
pub fn certify_ledger(model: &ModelParams, choices: LedgerChoices, search: bool, spec: &GridSpec) -> Result<Certification> {
    if search {
        search_admissible(model, choices, spec, &Parallel).map_err(|e| anyhow!("{e}"))
    } else {
        let lp = LyapunovParams::new(choices, model).map_err(|e| anyhow!("invalid Lyapunov ledger: {}", e.violations.join("; ")))?;
        Ok(certify(&lp, spec, &Parallel, false))
    }
}

pub fn verify_ledger(model: &ModelParams, choices: LedgerChoices, search: bool, doubling: bool, spec: &GridSpec) -> Result<VerifyOutcome> {
    let certification = certify_ledger(model, choices, search, spec)?;
    let doubled = if doubling {
        // the assembly is re-measured on the finer grid
        let lp = LyapunovParams::new(*certification.lp.choices(), model).map_err(|e| anyhow!("{}", e.violations.join("; ")))?;
        Some(certify(&lp, &spec.doubled(), &Parallel, false))
    } else {
        None
    };
    let structural = structural_suite(&certification.lp, spec.seed);
    Ok(VerifyOutcome { certification, doubled, structural })
}

pub fn write_verify(out: &Path, v: &VerifyOutcome) -> Result<()> {
    let dir = out.join("verify");
    write_json(&dir.join("reports.json"), &v.certification.reports)?;
    write_json(&dir.join("ledger.json"), v.certification.lp.choices())?;
    if let Some(a) = v.certification.lp.assembly() {
        write_json(&dir.join("assembly.json"), a)?;
        write_json(&dir.join("assembled_constants.json"), &AssembledConstants::derive(&v.certification.lp, a))?;
    }
    if let Some(d) = &v.doubled {
        write_json(&dir.join("reports_doubled.json"), &d.reports)?;
    }
    write_json(&dir.join("structural.json"), &v.structural)?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["check_id", "worst_margin", "passed", "evaluated", "skipped"])?;
    for r in &v.certification.reports {
        w.write_record([r.check_id.clone(), r.worst_margin.to_string(), r.passed.to_string(), r.evaluated.to_string(), r.skipped.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_verify(cfg: &ExperimentConfig, out: &Path) -> Result<Outcomes> {
    let model = cfg.model.params()?;
    let spec = GridSpec::new(cfg.verify.samples, cfg.seed);
    let v = verify_ledger(&model, cfg.ledger_choices(), cfg.verify.search, cfg.verify.doubling, &spec)?;
    write_verify(out, &v)?;
    Ok(v.outcomes())
}

// ---------------------------------------------------------------------------
// figure1

pub fn run_figure1(cfg: &ExperimentConfig, out: &Path) -> Result<(Outcomes, Vec<MuEstimate>)> {
    let f = &cfg.figure1;
    let step = StepConfig { seed: cfg.seed, ..cfg.step };
    let mut outcomes = Vec::new();
    let mut all = Vec::new();
    for &h in &f.h_values {
        let p = physical(cfg.model.gamma, h, cfg.model.kappa1)?;
        let est = estimate_mu_u(&p, f.t_end, f.paths, f.batches, f.checkpoints, &step)?;
        write_csv(&out.join(format!("figure1/running_h{h}.csv")), &["t", "mean_u"], est.running.iter().map(|(t, m)| vec![*t, *m]))?;
        outcomes.push((format!("figure1_mu_u_positive_h{h}"), est.positive()));
        all.push(est);
    }
    write_json(&out.join("figure1/summary.json"), &all)?;
    write_csv(
        &out.join("figure1/summary.csv"),
        &["h", "time_average", "ci_lo", "ci_hi", "v_mean", "v_half_width"],
        all.iter().map(|e| vec![e.h, e.time_average, e.ci.lo(), e.ci.hi(), e.v_ci.mean, e.v_ci.half_width]),
    )?;
    Ok((outcomes, all))
}

// ---------------------------------------------------------------------------
// tails

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRow {
    /// Survival index of the synthetic Pareto sample.
    pub alpha: f64,
    pub n: usize,
    pub estimate: Option<TailEstimate>,
    pub relative_bias: f64,
}

pub const CALIBRATION_TOL: f64 = 0.05;

/// Hill estimator on exact Pareto samples, `P(X > x) = x^{-alpha}` for `x >= 1`.
pub fn hill_calibration(alphas: &[f64], n: usize, seed: u64) -> Vec<CalibrationRow> {
    alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let mut rng = path_rng(seed, i as u64);
            let xs: Vec<f64> = (0..n).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha)).collect();
            let estimate = hill(&xs).ok();
            let relative_bias = estimate.map_or(f64::NAN, |e| (e.exponent - alpha) / alpha);
            CalibrationRow { alpha, n, estimate, relative_bias }
        })
        .collect()
}

pub fn calibration_passed(rows: &[CalibrationRow]) -> bool {
    rows.iter().all(|r| r.relative_bias.abs() <= CALIBRATION_TOL && r.estimate.is_some_and(|e| !e.unstable))
}

/// The estimator is gated on synthetic data; the physical tail is reported only.
pub fn run_tails(cfg: &ExperimentConfig, out: &Path) -> Result<(Outcomes, Vec<TailReport>)> {
    let t = &cfg.tails;
    let step = StepConfig { seed: cfg.seed, ..cfg.step };
    let cal = hill_calibration(&[3.0, 2.0, 4.0, 8.0], 1_000_000, cfg.seed);
    write_json(&out.join("tails/calibration.json"), &cal)?;
    let mut reports = Vec::new();
    for &h in &t.h_values {
        let p = physical(cfg.model.gamma, h, cfg.model.kappa1)?;
        reports.push(estimate_tail(&p, t.t_end, t.paths, t.burn_in, t.min_samples, &step)?);
    }
    write_json(&out.join("tails/summary.json"), &reports)?;
    write_csv(
        &out.join("tails/summary.csv"),
        &["h", "samples", "negative_samples", "hill_density_exponent", "predicted", "relative_error"],
        reports.iter().map(|r| {
            vec![r.h, r.samples as f64, r.negative_samples as f64, r.density_exponent, r.predicted_density_exponent, r.relative_error]
        }),
    )?;
    Ok((vec![("hill_calibration".into(), calibration_passed(&cal))], reports))
}

// ---------------------------------------------------------------------------
// moments, laplace, drift probe

pub fn moment_lambdas(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.moments.lambdas.is_empty() {
        vec![1.0, 0.8 * 2.0 / cfg.moments.h]
    } else {
        cfg.moments.lambdas.clone()
    }
}

pub fn run_moments(cfg: &ExperimentConfig, out: &Path) -> Result<(Outcomes, MomentsReport)> {
    let m = &cfg.moments;
    let p = ModelParams::new(cfg.model.gamma, m.h, cfg.model.kappa1, cfg.model.kappa2)?;
    let step = StepConfig { seed: cfg.seed, ..cfg.step };
    let rep = empirical_moments(&p, &moment_lambdas(cfg), m.t_end, m.paths, m.batches, m.burn_in, &step)?;
    write_json(&out.join("moments/summary.json"), &rep)?;
    let mut outcomes: Outcomes = rep
        .moments
        .iter()
        .map(|r| match r.lambda {
            Some(l) => (format!("moment_r^{l}_stabilized"), r.stabilized),
            None => ("moment_z^-2/3_stabilized".into(), r.stabilized),
        })
        .collect();
    outcomes.push(("moments_paths_complete".into(), rep.stopped.iter().all(|s| *s == StopReason::TimeLimit)));
    Ok((outcomes, rep))
}

/// Both sides are exactly 1 at `|eta| = eta*`; elsewhere within three standard errors.
pub fn laplace_passed(rows: &[LaplaceRow], eta_star: f64) -> bool {
    rows.iter().all(|r| {
        if r.eta0.abs() == eta_star {
            r.monte_carlo == 1.0 && r.quadrature == 1.0
        } else {
            r.agrees
        }
    })
}

pub fn run_laplace(cfg: &ExperimentConfig, out: &Path) -> Result<(Outcomes, Vec<LaplaceRow>)> {
    let l = &cfg.laplace;
    let rows = laplace_crosscheck(l.h, l.kappa2, l.cone, &l.s_values, &l.eta_fractions, l.paths, l.dt, l.t_cap, cfg.seed)?;
    write_json(&out.join("laplace/summary.json"), &rows)?;
    write_csv(
        &out.join("laplace/summary.csv"),
        &["s", "eta0", "monte_carlo", "std_err", "quadrature", "z_score"],
        rows.iter().map(|r| vec![r.s, r.eta0, r.monte_carlo, r.std_err, r.quadrature, r.z_score]),
    )?;
    let eta_star = l.cone * l.kappa2.sqrt();
    Ok((vec![("laplace_crosscheck".into(), laplace_passed(&rows, eta_star))], rows))
}

/// Probes a certified ledger; `lp` must carry a measured assembly.
pub fn drift_probe_with(cfg: &ExperimentConfig, lp: &LyapunovParams, out: &Path) -> Result<(Outcomes, DriftProbe)> {
    let d = &cfg.drift_probe;
    let step = StepConfig { seed: cfg.seed, ..cfg.step };
    let probe = geometric_drift_probe(lp, &d.initial, &d.times, d.paths, &step)?;
    write_json(&out.join("drift_probe/summary.json"), &probe)?;
    let rows = &probe.rows;
    for (i, r) in rows.iter().enumerate() {
        write_csv(
            &out.join(format!("drift_probe/start_{i}.csv")),
            &["t", "mean_psi", "std_err", "bound"],
            r.times.iter().zip(&r.mean).zip(&r.std_err).map(|((t, m), s)| vec![*t, *m, *s, r.psi0 * r.eps_hat.powf(*t) + r.d_hat]),
        )?;
    }
    let mut outcomes: Outcomes = rows.iter().enumerate().map(|(i, r)| (format!("drift_probe_start_{i}"), r.passed())).collect();
    outcomes.push(("drift_probe_far_out".into(), rows.iter().all(|r| r.psi0 >= 1e3)));
    Ok((outcomes, probe))
}

pub fn run_drift_probe(cfg: &ExperimentConfig, out: &Path) -> Result<Outcomes> {
    let model = cfg.model.params()?;
    let spec = GridSpec::new(cfg.verify.samples, cfg.seed);
    let cert = certify_ledger(&model, cfg.ledger_choices(), cfg.verify.search, &spec)?;
    let mut outcomes = vec![("drift_probe_ledger_certified".to_string(), cert.passed())];
    outcomes.extend(drift_probe_with(cfg, &cert.lp, out)?.0);
    Ok(outcomes)
}

// ---------------------------------------------------------------------------
// control

/// Builds and integrates the controlled path from every grid point in parallel.
pub fn reachability(p: &ModelParams, radius: f64, n: usize, case: Case, horizon: f64, steps: usize) -> ReachReport {
    let pts = reach_grid(radius, n, case);
    let res = ensemble(pts.len(), |i| reach_point(pts[i as usize], case, horizon, steps, p));
    let mut rep = ReachReport { horizon, steps, points: Vec::new(), failures: Vec::new() };
    for (x0, r) in pts.iter().zip(res) {
        match r {
            Ok(q) => rep.points.push(q),
            Err(e) => rep.failures.push((*x0, e)),
        }
    }
    rep
}

pub fn run_control(cfg: &ExperimentConfig, out: &Path) -> Result<(Outcomes, Vec<ReachReport>)> {
    let c = &cfg.control;
    let p = cfg.model.params()?;
    let mut outcomes = Vec::new();
    let mut reps = Vec::new();
    for (case, name) in [(Case::Low, "low"), (Case::High, "high")] {
        let rep = reachability(&p, c.radius, c.n, case, c.horizon, c.steps);
        write_json(&out.join(format!("control/reach_{name}.json")), &rep)?;
        write_csv(
            &out.join(format!("control/reach_{name}.csv")),
            &["x0", "y0", "z0", "miss", "z_min", "z_max", "k_end", "complementarity"],
            rep.points.iter().map(|q| {
                let r = &q.result;
                vec![q.x0[0], q.x0[1], q.x0[2], r.miss, r.z_min, r.z_max, r.k_end, r.complementarity]
            }),
        )?;
        if let Some(q) = rep.points.first() {
            let b = build_bridge(case, q.x0, c.horizon, &p)?;
            write_controlled(&out.join(format!("control/trajectory_{name}.csv")), &synthesize_controls(&b, &p, 500)?)?;
        }
        outcomes.push((format!("control_reach_{name}"), rep.passed()));
        reps.push(rep);
    }
    Ok((outcomes, reps))
}
