//! Differential operators applied to second-order jets or by central differences.

use crate::jet::Jet;
use crate::model::{drift_xyz, drift_uvz, ModelParams};
use core::fmt;
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Operator {
    /// Interior generator in `(x, y, z)`.
    LXyz,
    /// Boundary operator `-∂z` in `(x, y, z)`.
    QXyz,
    LUvz,
    /// `u/(3z) ∂u + v/(3z) ∂v - ∂z`.
    QUvz,
    T1,
    T2,
    /// Acts on `(u, eta, z)`: `alpha_h u ∂u + (3/2 + h) eta ∂eta + kappa2 ∂eta² - (1-h) z ∂z`.
    T3Hat,
    A,
    /// `z^{2/3} L` in `(u, v, z)`.
    M,
}

impl Operator {
    pub const ALL: [Operator; 9] = [
        Operator::LXyz,
        Operator::QXyz,
        Operator::LUvz,
        Operator::QUvz,
        Operator::T1,
        Operator::T2,
        Operator::T3Hat,
        Operator::A,
        Operator::M,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::LXyz => "L_xyz",
            Operator::QXyz => "Q_xyz",
            Operator::LUvz => "L_uvz",
            Operator::QUvz => "Q_uvz",
            Operator::T1 => "T1",
            Operator::T2 => "T2",
            Operator::T3Hat => "T3hat",
            Operator::A => "A",
            Operator::M => "M",
        }
    }
}

/// An operator value together with the sum of the absolute values of its terms.
///
/// `scale` is the natural yardstick for relative comparisons, since the terms
/// can cancel to far below any one of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpValue {
    pub value: f64,
    pub scale: f64,
}

/// Partial derivatives of a scalar field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub grad: [f64; 3],
    /// Pure second partials.
    pub hess: [f64; 3],
}

impl From<Jet> for Derivs {
    fn from(j: Jet) -> Self {
        Derivs { grad: j.d, hess: j.dd }
    }
}

fn sum(terms: &[f64]) -> OpValue {
    let mut value = 0.0;
    let mut scale = 0.0;
    for t in terms {
        value += t;
        scale += t.abs();
    }
    OpValue { value, scale }
}

/// Applies `op` at `s` to a field with derivatives `d`, both in the chart of `op`.
pub fn apply(op: Operator, d: Derivs, s: [f64; 3], p: &ModelParams) -> OpValue {
    let [a, b, z] = s;
    let g = d.grad;
    let hh = d.hess;
    let ah = p.alpha_h();
    let (k1, k2, h) = (p.kappa1(), p.kappa2(), p.h());
    match op {
        Operator::LXyz => {
            let f = drift_xyz(s, p).unwrap_or([f64::NAN; 3]);
            sum(&[f[0] * g[0], f[1] * g[1], f[2] * g[2], k1 * hh[0], k2 * hh[1]])
        }
        Operator::QXyz => sum(&[-g[2]]),
        Operator::LUvz => {
            let f = drift_uvz(s, p).unwrap_or([f64::NAN; 3]);
            let zm = z.powf(-2.0 / 3.0);
            sum(&[f[0] * g[0], f[1] * g[1], f[2] * g[2], k1 * zm * hh[0], k2 * zm * hh[1]])
        }
        Operator::QUvz => sum(&[a / (3.0 * z) * g[0], b / (3.0 * z) * g[1], -g[2]]),
        Operator::T1 => sum(&[
            -(ah * a * a - b * b) * g[0],
            -(ah + 1.0) * a * b * g[1],
            (1.0 - h) * a * z * g[2],
        ]),
        Operator::T2 => sum(&[-ah * a * a * g[0], -(ah + 1.0) * a * b * g[1], (1.0 - h) * z * a * g[2]]),
        Operator::T3Hat => sum(&[
            ah * a * g[0],
            (1.5 + h) * b * g[1],
            k2 * hh[1],
            -(1.0 - h) * z * g[2],
        ]),
        Operator::A => sum(&[
            -(ah * a * a - b * b) * g[0],
            -(ah + 1.0) * a * b * g[1],
            k1 * hh[0],
            k2 * hh[1],
        ]),
        Operator::M => {
            let z23 = z.powf(2.0 / 3.0);
            sum(&[
                -p.gamma() * a * z23 * g[0],
                -(ah * a * a - b * b) * g[0],
                -p.gamma() * b * z23 * g[1],
                -(ah + 1.0) * a * b * g[1],
                (1.0 - h) * a * z * g[2],
                k1 * hh[0],
                k2 * hh[1],
            ])
        }
    }
}

/// Applies `op` to a jet seeded at `s`.
pub fn apply_jet(op: Operator, f: Jet, s: [f64; 3], p: &ModelParams) -> OpValue {
    apply(op, f.into(), s, p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdError {
    /// A stencil point fell in a different piece than the centre.
    InterfacePoint,
    /// A stencil point left the domain or produced a non-finite value.
    NonFinite,
}

impl fmt::Display for FdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FdError::InterfacePoint => write!(f, "interface point: stencil crosses a piece boundary"),
            FdError::NonFinite => write!(f, "finite-difference stencil produced a non-finite value"),
        }
    }
}

impl core::error::Error for FdError {}

/// Relative step for first differences.
pub const FD_STEP1: f64 = 1e-5;
/// Relative step for second differences.
pub const FD_STEP2: f64 = 1e-4;

/// Central-difference derivatives of `f`, which returns a value and a piece label.
///
/// `scales[i]` is the natural length scale of coordinate `i` at `s`. Steps are
/// `FD_STEP1 * scales[i]` and `FD_STEP2 * scales[i]`; directions with a zero
/// scale are skipped. Stencils in `z` are one-sided inwards near `z = 1`.
pub fn fd_derivs<F>(f: F, s: [f64; 3], scales: [f64; 3]) -> Result<Derivs, FdError>
where
    F: Fn([f64; 3]) -> (f64, u32),
{
    let (f0, piece) = f(s);
    if !f0.is_finite() {
        return Err(FdError::NonFinite);
    }
    let eval = |x: [f64; 3]| -> Result<f64, FdError> {
        let (v, pc) = f(x);
        if pc != piece {
            return Err(FdError::InterfacePoint);
        }
        if !v.is_finite() {
            return Err(FdError::NonFinite);
        }
        Ok(v)
    };
    let shifted = |i: usize, dx: f64| {
        let mut x = s;
        x[i] += dx;
        x
    };
    let mut grad = [0.0; 3];
    let mut hess = [0.0; 3];
    for i in 0..3 {
        if scales[i] == 0.0 {
            continue;
        }
        let h1 = FD_STEP1 * scales[i];
        let h2 = FD_STEP2 * scales[i];
        let near_top = i == 2 && s[2] + h2 > 1.0;
        if near_top {
            // one-sided second-order stencils from below
            let fm1 = eval(shifted(i, -h1))?;
            let fm2 = eval(shifted(i, -2.0 * h1))?;
            grad[i] = (3.0 * f0 - 4.0 * fm1 + fm2) / (2.0 * h1);
            let gm1 = eval(shifted(i, -h2))?;
            let gm2 = eval(shifted(i, -2.0 * h2))?;
            let gm3 = eval(shifted(i, -3.0 * h2))?;
            hess[i] = (2.0 * f0 - 5.0 * gm1 + 4.0 * gm2 - gm3) / (h2 * h2);
        } else {
            let fp = eval(shifted(i, h1))?;
            let fm = eval(shifted(i, -h1))?;
            grad[i] = (fp - fm) / (2.0 * h1);
            let gp = eval(shifted(i, h2))?;
            let gm = eval(shifted(i, -h2))?;
            hess[i] = (gp - 2.0 * f0 + gm) / (h2 * h2);
        }
    }
    Ok(Derivs { grad, hess })
}

/// Finite-difference application of `op`.
pub fn apply_fd<F>(op: Operator, f: F, s: [f64; 3], scales: [f64; 3], p: &ModelParams) -> Result<OpValue, FdError>
where
    F: Fn([f64; 3]) -> (f64, u32),
{
    Ok(apply(op, fd_derivs(f, s, scales)?, s, p))
}

/// `|a - b| / max(scale_a, scale_b)`.
pub fn agreement(a: OpValue, b: OpValue) -> f64 {
    let den = a.scale.max(b.scale);
    if den == 0.0 {
        (a.value - b.value).abs()
    } else {
        (a.value - b.value).abs() / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 0.5, 1.0, 2.0).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let p = params();
        let s = [0.3, -0.7, 0.4];
        for op in Operator::ALL {
            assert_eq!(apply_jet(op, Jet::cst(1.0), s, &p).value, 0.0, "{}", op.name());
        }
    }

    #[test]
    fn q_uvz_of_z_is_minus_one() {
        let p = params();
        let s = [2.0, 3.0, 1.0];
        let f = Jet::point(s)[2];
        assert_eq!(apply_jet(Operator::QUvz, f, s, &p).value, -1.0);
    }

    #[test]
    fn m_is_rescaled_l() {
        let p = params();
        let s = [0.8, -1.3, 0.27];
        let x = Jet::point(s);
        let f = x[0] * x[0] * x[1] + x[2].ln() * x[1] + x[0].exp();
        let l = apply_jet(Operator::LUvz, f, s, &p).value;
        let m = apply_jet(Operator::M, f, s, &p).value;
        assert!((m - s[2].powf(2.0 / 3.0) * l).abs() < 1e-13 * m.abs().max(1.0));
    }

    #[test]
    fn fd_matches_jets_on_smooth_field() {
        let p = params();
        let s = [0.8, -1.3, 0.6];
        let field = |x: [Jet; 3]| x[0].sq() * x[1] + x[2].ln() * x[1] + (x[0] * 0.3).exp() * x[2].sqrt();
        let exact = field(Jet::point(s));
        let fd = |y: [f64; 3]| (field(y.map(Jet::cst)).v, 0u32);
        for op in Operator::ALL {
            let a = apply_jet(op, exact, s, &p);
            let b = apply_fd(op, fd, s, [1.0, 1.0, 0.5], &p).unwrap();
            assert!(agreement(a, b) < 1e-6, "{}: {a:?} {b:?}", op.name());
        }
    }

    #[test]
    fn fd_one_sided_at_boundary() {
        let p = params();
        let s = [0.5, 0.5, 1.0];
        let field = |x: [Jet; 3]| x[2].powf(2.5) * x[0] + x[1];
        let exact = field(Jet::point(s));
        let fd = |y: [f64; 3]| (field(y.map(Jet::cst)).v, 0u32);
        let a = apply_jet(Operator::LUvz, exact, s, &p);
        let b = apply_fd(Operator::LUvz, fd, s, [1.0, 1.0, 1.0], &p).unwrap();
        assert!(agreement(a, b) < 1e-6);
    }

    #[test]
    fn fd_refuses_interface_points() {
        let p = params();
        let f = |y: [f64; 3]| (y[0].abs(), u32::from(y[0] > 0.0));
        let r = apply_fd(Operator::A, f, [1e-9, 1.0, 0.5], [1.0, 1.0, 1.0], &p);
        assert_eq!(r, Err(FdError::InterfacePoint));
    }
}
