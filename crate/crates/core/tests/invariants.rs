use pairdisp_core::integrator::{
    path_rng, sample_exit_time, simulate, skorokhod_step, step_aux, StepConfig, StopReason, System,
};
use pairdisp_core::model::{drift_uvz, drift_xyz, uvz_to_xyz, xyz_to_uvz};
use pairdisp_core::{AuxState, ModelParams, State};
use proptest::prelude::*;

fn model(h: f64) -> ModelParams {
    ModelParams::new(1.0, h, 1.0, 1.0).unwrap()
}

proptest! {
    #[test]
    fn chart_round_trip(x in -1e4f64..1e4, y in -1e4f64..1e4, z in 1e-9f64..=1.0) {
        let back = uvz_to_xyz(xyz_to_uvz([x, y, z]));
        prop_assert!((back[0] - x).abs() <= 1e-12 * x.abs().max(1.0));
        prop_assert!((back[1] - y).abs() <= 1e-12 * y.abs().max(1.0));
        prop_assert_eq!(back[2], z);
        let s = State::xyz(x, y, z).unwrap();
        let t = s.to_uvz().to_xyz();
        prop_assert!((t.c1() - x).abs() <= 1e-12 * x.abs().max(1.0));
    }

    // u = x z^{-1/3} and z carries no noise, so the chain rule has no Itô term.
    #[test]
    fn uvz_drift_is_the_pushforward(x in -50f64..50.0, y in -50f64..50.0, z in 1e-4f64..=1.0, h in 0.05f64..0.95) {
        let p = model(h);
        let f = drift_xyz([x, y, z], &p).unwrap();
        let g = drift_uvz(xyz_to_uvz([x, y, z]), &p).unwrap();
        let zc = z.cbrt();
        let du = f[0] / zc - x * f[2] / (3.0 * z * zc);
        let dv = f[1] / zc - y * f[2] / (3.0 * z * zc);
        let dz = f[2];
        for (a, b) in [(du, g[0]), (dv, g[1]), (dz, g[2])] {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn skorokhod_complementarity(z in 1e-6f64..=1.0, dz in -0.5f64..2.0) {
        let (zn, dk) = skorokhod_step(z, dz);
        prop_assert!(zn <= 1.0 && dk >= 0.0);
        prop_assert!(dk == 0.0 || zn == 1.0);
        prop_assert!((zn + dk - (z + dz)).abs() < 1e-14);
    }

    #[test]
    fn aux_log_height_integrates_u(u in -5f64..5.0, v in -5f64..5.0, lz in -20f64..5.0, dt in 1e-5f64..1e-2, h in 0.05f64..0.95) {
        let p = model(h);
        let a = AuxState::new(u, v, lz.exp()).unwrap();
        let b = step_aux(&a, &p, dt, [0.3, -0.7]);
        prop_assert!((b.z.ln() - lz - (1.0 - h) * u * dt).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reflected_height_stays_in_unit_interval(seed in 0u64..1_000, stream in 0u64..64) {
        let cfg = StepConfig { seed, ..StepConfig::default() };
        let path = simulate(System::Uvz, [0.5, -0.5, 0.9], &model(0.3), &cfg, 2.0, 1, stream);
        prop_assert_eq!(path.stopped, StopReason::TimeLimit);
        for w in path.k.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        for s in &path.states {
            prop_assert!(s[2] > 0.0 && s[2] <= 1.0);
        }
    }
}

#[test]
fn same_seed_same_path() {
    let cfg = StepConfig { seed: 42, ..StepConfig::default() };
    let a = simulate(System::Xyz, [1.0, 2.0, 0.5], &model(0.5), &cfg, 1.0, 7, 3);
    let b = simulate(System::Xyz, [1.0, 2.0, 0.5], &model(0.5), &cfg, 1.0, 7, 3);
    assert_eq!(a, b);
    let c = simulate(System::Xyz, [1.0, 2.0, 0.5], &model(0.5), &cfg, 1.0, 7, 4);
    assert_ne!(a.states, c.states);
}

// The eta drift is odd, so exits from eta0 and -eta0 share one law.
#[test]
fn exit_time_is_symmetric() {
    let p = model(0.5);
    let n = 4000;
    let mean = |eta0: f64, stream: u64| {
        let mut rng = path_rng(7, stream);
        let xs: Vec<f64> = (0..n).map(|_| sample_exit_time(eta0, &p, 2.0, 1e-3, 50.0, &mut rng).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        (m, var / n as f64)
    };
    let (a, va) = mean(0.4, 1);
    let (b, vb) = mean(-0.4, 2);
    assert!((a - b).abs() < 4.0 * (va + vb).sqrt(), "{a} vs {b}");
}
