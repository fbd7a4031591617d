//! Parameters, phase-space states, chart changes and the drift fields of the
//! reflected system, its rescaled chart, the auxiliary system and the OU
//! process of the innermost cone.

use core::fmt;
use num_traits::Float;

/// Which coordinates a [`State`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Chart {
    /// Original coordinates `(x, y, z)`.
    Xyz,
    /// Rescaled coordinates `(u, v, z) = (x z^{-1/3}, y z^{-1/3}, z)`.
    Uvz,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A parameter is outside its admissible range; the message names it.
    InvalidParameter(&'static str),
    /// `kappa2 / kappa1` differs from `1 + 2h` although the rough-physical
    /// regime was requested.
    NotRoughPhysical { ratio: f64, expected: f64 },
    /// The height coordinate left `(0, 1]`.
    HeightOutOfRange(f64),
    /// A drift evaluation overflowed; the state is at explosion scale.
    ExplosionScale,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidParameter(msg) => write!(f, "invalid model parameter: {msg}"),
            ModelError::NotRoughPhysical { ratio, expected } => write!(
                f,
                "rough-physical regime requires kappa2/kappa1 = 1 + 2h = {expected}, got {ratio}"
            ),
            ModelError::HeightOutOfRange(z) => write!(f, "height z = {z} is outside (0, 1]"),
            ModelError::ExplosionScale => write!(f, "explosion-scale state (non-finite drift)"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Friction `gamma`, Hölder exponent `h` and the two noise intensities.
///
/// `alpha_h = 1/3 + 2h/3` is recomputed on every call and never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawParams", into = "RawParams"))]
pub struct ModelParams {
    gamma: f64,
    h: f64,
    kappa1: f64,
    kappa2: f64,
}

#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RawParams {
    pub gamma: f64,
    pub h: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub rough_physical: bool,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ModelError;
    fn try_from(r: RawParams) -> Result<Self, ModelError> {
        let p = ModelParams::new(r.gamma, r.h, r.kappa1, r.kappa2)?;
        if r.rough_physical {
            p.check_rough_physical()?;
        }
        Ok(p)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { gamma: p.gamma, h: p.h, kappa1: p.kappa1, kappa2: p.kappa2, rough_physical: false }
    }
}

impl ModelParams {
    pub fn new(gamma: f64, h: f64, kappa1: f64, kappa2: f64) -> Result<Self, ModelError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(ModelError::InvalidParameter("gamma must be positive"));
        }
        if !(h > 0.0 && h < 1.0) {
            return Err(ModelError::InvalidParameter("h must lie in (0, 1)"));
        }
        if !(kappa1 > 0.0 && kappa1.is_finite()) {
            return Err(ModelError::InvalidParameter("kappa1 must be positive"));
        }
        if !(kappa2 > 0.0 && kappa2.is_finite()) {
            return Err(ModelError::InvalidParameter("kappa2 must be positive"));
        }
        Ok(ModelParams { gamma, h, kappa1, kappa2 })
    }

    /// Noise in the physical regime: `kappa2 = (1 + 2h) kappa1`.
    pub fn rough_physical(gamma: f64, h: f64, kappa1: f64) -> Result<Self, ModelError> {
        Self::new(gamma, h, kappa1, (1.0 + 2.0 * h) * kappa1)
    }

    pub fn check_rough_physical(&self) -> Result<(), ModelError> {
        let ratio = self.kappa2 / self.kappa1;
        let expected = 1.0 + 2.0 * self.h;
        if (ratio - expected).abs() <= 1e-12 {
            Ok(())
        } else {
            Err(ModelError::NotRoughPhysical { ratio, expected })
        }
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }
    #[inline]
    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }
    #[inline]
    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }
    #[inline]
    pub fn alpha_h(&self) -> f64 {
        1.0 / 3.0 + 2.0 * self.h / 3.0
    }
    /// `sqrt(2 kappa1)`, the x/u noise amplitude at `z = 1`.
    #[inline]
    pub fn sigma1(&self) -> f64 {
        (2.0 * self.kappa1).sqrt()
    }
    #[inline]
    pub fn sigma2(&self) -> f64 {
        (2.0 * self.kappa2).sqrt()
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self, ModelError> {
        Self::new(gamma, self.h, self.kappa1, self.kappa2)
    }
}

/// A point of `R x R x (0, 1]` in one of the two charts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct State {
    chart: Chart,
    c1: f64,
    c2: f64,
    c3: f64,
}

impl State {
    pub fn new(chart: Chart, c1: f64, c2: f64, z: f64) -> Result<Self, ModelError> {
        if !(z > 0.0 && z <= 1.0) {
            return Err(ModelError::HeightOutOfRange(z));
        }
        Ok(State { chart, c1, c2, c3: z })
    }
    pub fn xyz(x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        Self::new(Chart::Xyz, x, y, z)
    }
    pub fn uvz(u: f64, v: f64, z: f64) -> Result<Self, ModelError> {
        Self::new(Chart::Uvz, u, v, z)
    }
    #[inline]
    pub fn chart(&self) -> Chart {
        self.chart
    }
    #[inline]
    pub fn c1(&self) -> f64 {
        self.c1
    }
    #[inline]
    pub fn c2(&self) -> f64 {
        self.c2
    }
    #[inline]
    pub fn z(&self) -> f64 {
        self.c3
    }
    #[inline]
    pub fn coords(&self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }

    /// Converts to the rescaled chart (identity if already there).
    pub fn to_uvz(&self) -> State {
        match self.chart {
            Chart::Uvz => *self,
            Chart::Xyz => {
                let [u, v, z] = xyz_to_uvz([self.c1, self.c2, self.c3]);
                State { chart: Chart::Uvz, c1: u, c2: v, c3: z }
            }
        }
    }

    pub fn to_xyz(&self) -> State {
        match self.chart {
            Chart::Xyz => *self,
            Chart::Uvz => {
                let [x, y, z] = uvz_to_xyz([self.c1, self.c2, self.c3]);
                State { chart: Chart::Xyz, c1: x, c2: y, c3: z }
            }
        }
    }
}

#[inline]
pub fn xyz_to_uvz(s: [f64; 3]) -> [f64; 3] {
    let k = s[2].cbrt().recip();
    [s[0] * k, s[1] * k, s[2]]
}

#[inline]
pub fn uvz_to_xyz(s: [f64; 3]) -> [f64; 3] {
    let k = s[2].cbrt();
    [s[0] * k, s[1] * k, s[2]]
}

/// State of the unreflected auxiliary system.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AuxState {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl AuxState {
    pub fn new(u: f64, v: f64, z: f64) -> Result<Self, ModelError> {
        if !(z > 0.0) {
            return Err(ModelError::InvalidParameter("auxiliary height Z must be positive"));
        }
        Ok(AuxState { u, v, z })
    }

    /// `|U|^{1/2} V`, the coordinate in which the innermost cone becomes an OU exit problem.
    pub fn eta(&self) -> f64 {
        self.u.abs().sqrt() * self.v
    }
}

fn finite3(d: [f64; 3]) -> Result<[f64; 3], ModelError> {
    if d.iter().all(|c| c.is_finite()) {
        Ok(d)
    } else {
        Err(ModelError::ExplosionScale)
    }
}

/// Drift of the reflected system in `(x, y, z)`; the `-dk` term is owned by the integrator.
pub fn drift_xyz(s: [f64; 3], p: &ModelParams) -> Result<[f64; 3], ModelError> {
    let [x, y, z] = s;
    let h = p.h;
    finite3([
        -p.gamma * x - (h * x * x - y * y) / z,
        -p.gamma * y - (1.0 + h) * x * y / z,
        (1.0 - h) * x,
    ])
}

/// Drift in the rescaled chart.
pub fn drift_uvz(s: [f64; 3], p: &ModelParams) -> Result<[f64; 3], ModelError> {
    let [u, v, z] = s;
    let a = p.alpha_h();
    let z13 = z.cbrt();
    let z23 = z13 * z13;
    finite3([
        -p.gamma * u - (a * u * u - v * v) / z23,
        -p.gamma * v - (a + 1.0) * u * v / z23,
        (1.0 - p.h) * u * z13,
    ])
}

/// Diffusion amplitudes in the rescaled chart, `sqrt(2 kappa_i) / z^{1/3}`.
pub fn diffusion_uvz(s: [f64; 3], p: &ModelParams) -> [f64; 2] {
    let k = s[2].cbrt().recip();
    [p.sigma1() * k, p.sigma2() * k]
}

/// Diffusion amplitudes in `(x, y, z)`; constant.
pub fn diffusion_xyz(p: &ModelParams) -> [f64; 2] {
    [p.sigma1(), p.sigma2()]
}

/// Drift of the auxiliary system. The noise amplitudes are `sigma1`, `sigma2`.
pub fn drift_aux(a: &AuxState, p: &ModelParams) -> [f64; 3] {
    let ah = p.alpha_h();
    [-(ah * a.u * a.u - a.v * a.v), -(ah + 1.0) * a.u * a.v, (1.0 - p.h) * a.u * a.z]
}

/// Drift of `eta = |u|^{1/2} v` in the innermost cone.
#[inline]
pub fn drift_eta(eta: f64, p: &ModelParams) -> f64 {
    (1.5 + p.h) * eta
}

/// The columns `X1`, `X2`, `[X1, X0]` of the Hörmander bracket matrix at an `(x, y, z)` point.
pub fn hormander_matrix(s: [f64; 3], p: &ModelParams) -> [[f64; 3]; 3] {
    let [x, y, z] = s;
    let s1 = p.sigma1();
    [
        [s1, 0.0, 0.0],
        [0.0, p.sigma2(), 0.0],
        [s1 * (-p.gamma - 2.0 * p.h * x / z), s1 * (-(1.0 + p.h) * y / z), s1 * (1.0 - p.h)],
    ]
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// `|det| = 2 sqrt(kappa1 kappa2) sqrt(2 kappa1) (1 - h)`, independent of the point.
pub fn hormander_det_closed(p: &ModelParams) -> f64 {
    2.0 * (p.kappa1 * p.kappa2).sqrt() * p.sigma1() * (1.0 - p.h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(gamma: f64, h: f64) -> ModelParams {
        ModelParams::new(gamma, h, 1.0, 1.0).unwrap()
    }

    #[test]
    fn xyz_drift_examples() {
        let q = p(1.0, 0.5);
        assert_eq!(drift_xyz([0.0, 0.0, 0.5], &q).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(drift_xyz([1.0, 0.0, 1.0], &q).unwrap(), [-1.5, 0.0, 0.5]);
        assert_eq!(drift_xyz([0.0, 1.0, 1.0], &q).unwrap(), [1.0, -1.0, 0.0]);
    }

    #[test]
    fn uvz_drift_examples() {
        let q = ModelParams::new(1.0, 0.5, 0.7, 1.3).unwrap();
        assert_eq!(drift_uvz([0.0, 0.0, 1.0], &q).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(diffusion_uvz([0.0, 0.0, 1.0], &q), [q.sigma1(), q.sigma2()]);
        let d = drift_uvz([1.0, 0.0, 1.0], &q).unwrap();
        assert!((d[0] + 5.0 / 3.0).abs() < 1e-15 && d[1] == 0.0 && d[2] == 0.5);
    }

    #[test]
    fn aux_and_eta_examples() {
        let q = p(1.0, 0.5);
        assert_eq!(drift_aux(&AuxState::new(0.0, 0.0, 1.0).unwrap(), &q), [0.0, 0.0, 0.0]);
        let d = drift_aux(&AuxState::new(1.0, 1.0, 1.0).unwrap(), &q);
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-15 && (d[1] + 5.0 / 3.0).abs() < 1e-15 && d[2] == 0.5);
        assert_eq!(drift_eta(0.0, &q), 0.0);
        assert_eq!(drift_eta(1.0, &q), 2.0);
        assert!((drift_eta(-2.0, &p(1.0, 0.1)) + 3.2).abs() < 1e-15);
    }

    #[test]
    fn chart_examples() {
        let s = State::xyz(8.0, -8.0, 0.125).unwrap().to_uvz();
        assert_eq!(s.coords(), [16.0, -16.0, 0.125]);
        let o = State::xyz(0.0, 0.0, 0.3).unwrap().to_uvz();
        assert_eq!(o.coords(), [0.0, 0.0, 0.3]);
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelParams::new(0.0, 0.5, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.5, -1.0, 1.0).is_err());
        assert!(State::xyz(0.0, 0.0, 1.5).is_err());
        assert!(State::xyz(0.0, 0.0, 0.0).is_err());
        let q = ModelParams::rough_physical(1.0, 0.3, 2.0).unwrap();
        assert!(q.check_rough_physical().is_ok());
        assert!(p(1.0, 0.3).check_rough_physical().is_err());
        assert_eq!(p(1.0, 0.25).alpha_h(), 1.0 / 3.0 + 2.0 * 0.25 / 3.0);
    }

    #[test]
    fn hormander_det_matches_closed_form() {
        let q = ModelParams::new(0.7, 0.3, 1.2, 0.8).unwrap();
        for s in [[0.1, 2.0, 0.3], [-5.0, 1.0, 1.0], [3.0, -4.0, 1e-3]] {
            let d = det3(&hormander_matrix(s, &q));
            assert!((d - hormander_det_closed(&q)).abs() < 1e-12 * d.abs());
        }
    }

    #[test]
    fn explosion_scale_signalled() {
        let q = p(1.0, 0.5);
        assert_eq!(drift_xyz([1e200, 1e200, 1e-200], &q), Err(ModelError::ExplosionScale));
    }
}
