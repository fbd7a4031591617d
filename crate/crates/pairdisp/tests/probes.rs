use pairdisp::ergodics::geometric_drift_probe;
use pairdisp::runner::{calibration_passed, hill_calibration};
use pairdisp_core::integrator::StepConfig;
use pairdisp_core::lyapunov::{psi_xyz_value, LedgerChoices, LyapunovParams};
use pairdisp_core::verify::{measure_assembly, GridSpec, Serial};
use pairdisp_core::ModelParams;

#[test]
fn drift_probe_starts_at_the_shifted_function() {
    let model = ModelParams::new(1.0, 0.1, 1.0, 1.0).unwrap();
    let c = LedgerChoices { cone: 64.0, r_star: 1e3, c_star: 5e-4, ..LedgerChoices::default_for(0.1) };
    let lp = LyapunovParams::new(c, &model).unwrap();
    let a = measure_assembly(&lp, &GridSpec::new(400, 2), &Serial);
    let lp = lp.with_assembly(a);
    let x0 = [[1e7, 0.0, 1.0], [3e6, 3e6, 0.9]];
    let cfg = StepConfig { seed: 9, ..StepConfig::default() };
    let probe = geometric_drift_probe(&lp, &x0, &[0.0, 0.01, 0.1], 8, &cfg).unwrap();
    for (row, s) in probe.rows.iter().zip(x0) {
        let exact = psi_xyz_value(s, &lp, &a) - probe.floor + 1.0;
        assert_eq!(row.psi0, exact);
        assert_eq!(row.mean[0], exact);
        assert_eq!(row.std_err[0], 0.0);
        assert!(row.passed(), "{row:?}");
    }
}

#[test]
fn hill_recovers_pareto_index() {
    let rows = hill_calibration(&[2.0, 4.0], 200_000, 3);
    assert!(calibration_passed(&rows), "{rows:?}");
}
