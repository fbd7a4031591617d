//! Decomposition of the rescaled phase space.

use super::LyapunovParams;
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Region {
    R0,
    R1,
    R2,
    R3,
    Inner,
    Core,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::R0 => "R0",
            Region::R1 => "R1",
            Region::R2 => "R2",
            Region::R3 => "R3",
            Region::Inner => "inner",
            Region::Core => "core",
        }
    }
}

/// Which outer piece `(u, v)` belongs to, ignoring the radius condition.
///
/// The outer regions are closed; a point on an interface goes to the lower index.
pub fn outer_piece(u: f64, v: f64, cone: f64, eta_star: f64) -> Region {
    let av = v.abs();
    if cone * u >= av {
        Region::R0
    } else if u >= -cone * av {
        Region::R1
    } else if u.abs().sqrt() * av >= eta_star {
        Region::R2
    } else {
        Region::R3
    }
}

/// Total classification of an `(u, v, z)` point.
pub fn classify(s: [f64; 3], lp: &LyapunovParams) -> Region {
    let [u, v, z] = s;
    let r = u.hypot(v);
    if r >= lp.r_star() {
        outer_piece(u, v, lp.cone(), lp.eta_star())
    } else if r <= 2.0 * lp.r_star() && z < lp.eps0() {
        Region::Inner
    } else {
        Region::Core
    }
}

/// Membership of the closed outer region `region` (radius condition included).
pub fn contains_closed(region: Region, s: [f64; 3], lp: &LyapunovParams) -> bool {
    let [u, v, _] = s;
    if u.hypot(v) < lp.r_star() {
        return false;
    }
    let (c, av) = (lp.cone(), v.abs());
    let eta = u.abs().sqrt() * av;
    match region {
        Region::R0 => c * u >= av,
        Region::R1 => u >= -c * av && c * u <= av,
        Region::R2 => u <= -c * av && eta >= lp.eta_star(),
        Region::R3 => u <= -c * av && eta <= lp.eta_star(),
        Region::Inner | Region::Core => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::LedgerChoices;
    use crate::model::ModelParams;

    fn lp() -> LyapunovParams {
        let model = ModelParams::new(1.0, 0.5, 1.0, 1.0).unwrap();
        let mut c = LedgerChoices::default_for(0.5);
        c.cone = 10.0;
        c.r_star = 100.0;
        LyapunovParams::new(c, &model).unwrap()
    }

    #[test]
    fn classification_examples() {
        let lp = lp();
        assert_eq!(classify([200.0, 50.0, 0.5], &lp), Region::R0);
        assert_eq!(classify([-200.0, 50.0, 0.5], &lp), Region::R1);
        assert_eq!(classify([-400.0, 1.0, 0.5], &lp), Region::R2);
        assert_eq!(classify([-400.0, 0.1, 0.5], &lp), Region::R3);
        assert_eq!(classify([1.0, 1.0, 0.01], &lp), Region::Inner);
        assert_eq!(classify([1.0, 1.0, 0.5], &lp), Region::Core);
        assert_eq!(classify([150.0, 1.0, 0.01], &lp), Region::R0);
    }

    #[test]
    fn ties_go_to_the_lower_index() {
        let lp = lp();
        // Cu = |v| exactly
        assert_eq!(classify([100.0, 1000.0, 1.0], &lp), Region::R0);
        // u = -C|v|
        assert_eq!(classify([-1000.0, 100.0, 1.0], &lp), Region::R1);
        // |u|^{1/2}|v| = eta* = 10
        assert_eq!(classify([-400.0, 0.5, 1.0], &lp), Region::R2);
    }

    #[test]
    fn closed_regions_cover_the_outer_set() {
        let lp = lp();
        for k in 0..720 {
            let th = k as f64 * core::f64::consts::PI / 360.0;
            for r in [100.5, 1e3, 1e5] {
                let s = [r * th.cos(), r * th.sin(), 0.3];
                let n = [Region::R0, Region::R1, Region::R2, Region::R3]
                    .iter()
                    .filter(|&&g| contains_closed(g, s, &lp))
                    .count();
                assert!(n >= 1, "{s:?}");
                assert!(contains_closed(classify(s, &lp), s, &lp));
            }
        }
    }
}
