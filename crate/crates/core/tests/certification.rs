use pairdisp_core::lyapunov::{LedgerChoices, LyapunovParams};
use pairdisp_core::verify::{certify, margin, plane_grid, CheckId, GridSpec, Serial};
use pairdisp_core::ModelParams;

fn ledger(h: f64) -> LyapunovParams {
    let model = ModelParams::new(1.0, h, 1.0, 1.0).unwrap();
    let c = LedgerChoices { cone: 64.0, r_star: 1e3, c_star: 5e-4, ..LedgerChoices::default_for(h) };
    LyapunovParams::new(c, &model).unwrap()
}

#[test]
fn margin_is_normalised() {
    assert_eq!(margin(1.0, 3.0), 0.5);
    assert_eq!(margin(3.0, 1.0), -0.5);
    assert_eq!(margin(0.0, 0.0), 0.0);
    assert_eq!(margin(f64::NAN, 1.0), f64::NEG_INFINITY);
}

#[test]
fn plane_grid_resolves_the_cutoff_band() {
    let lp = ledger(0.1);
    let pts = plane_grid(&lp, &GridSpec::new(400, 3), false);
    let j = lp.j();
    let band = pts.iter().filter(|p| (0.5 * j..=j).contains(&(p[0] * p[0] + p[1] * p[1]))).count();
    assert!(band >= 300, "{band}");
}

#[test]
fn averaging_holds_across_the_cutoff_band() {
    for h in [0.1, 0.5] {
        let lp = ledger(h);
        let sj = lp.j().sqrt();
        for i in 0..200 {
            let r = sj * (0.6 + 0.5 * i as f64 / 200.0);
            for k in 0..200 {
                let th = std::f64::consts::TAU * k as f64 / 200.0;
                let m = CheckId::AveragingPsi.margin_at(&lp, [r * th.cos(), r * th.sin(), 1.0]).unwrap();
                assert!(m >= -1e-12, "h={h} r/sqrt(J)={} theta={th}: {m}", r / sj);
            }
        }
    }
}

#[test]
fn certification_is_deterministic() {
    let lp = ledger(0.5);
    let spec = GridSpec::new(300, 11);
    let a = certify(&lp, &spec, &Serial, false);
    let b = certify(&lp, &spec, &Serial, false);
    assert_eq!(a.reports, b.reports);
}
