//! The constant ledger of the piecewise Lyapunov function.

use crate::gfun::{GError, GKernel};
use crate::model::ModelParams;
use super::psi::{LAMBDA1_D1_SUP, LAMBDA1_D2_SUP};
use crate::quad::integrate_adaptive;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;

/// Free choices of the construction. Everything else is derived from these and the model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LedgerChoices {
    pub p1: f64,
    pub q1: f64,
    pub alpha1: f64,
    pub p2: f64,
    pub q2: f64,
    pub alpha2: f64,
    /// Cone parameter `C`.
    pub cone: f64,
    pub r_star: f64,
    /// Height below which the bounded part of phase space counts as the inner region.
    pub eps0: f64,
    pub c_star: f64,
}

impl LedgerChoices {
    /// Default exponents for a given Hölder exponent.
    ///
    /// Branch 1 is `(p, q, alpha) = (1, 0, 0.9)`. Branch 2 starts from
    /// `p2 = 2`, `alpha2 = 0.95`, `q2 = p2/3 + alpha2/2 + 0.1`. If that makes
    /// `beta2 <= 0` (small `h`), it switches to `alpha2 = 0.3`,
    /// `q2 = p2/3 + alpha2/2 + 0.05` with `p2` solved from `beta2 = alpha2/2`
    /// (but never below 2, in which case `q2` is solved from `beta2 = alpha2/2`).
    /// If it makes `beta2 >= alpha2` (large `h`), it keeps `p2 = 2` and raises
    /// `q2` until `beta2 = alpha2/2`.
    pub fn default_for(h: f64) -> Self {
        let ah = 1.0 / 3.0 + 2.0 * h / 3.0;
        let (mut p2, mut alpha2) = (2.0, 0.95);
        let mut q2 = p2 / 3.0 + alpha2 / 2.0 + 0.1;
        let beta2 = ah * p2 - (1.0 - h) * q2;
        if beta2 <= 0.0 {
            alpha2 = 0.3;
            let delta = 0.05;
            // beta2 = ah p2 - (1-h)(p2/3 + alpha2/2 + delta) = h p2 - (1-h)(alpha2/2 + delta)
            p2 = (alpha2 / 2.0 + (1.0 - h) * (alpha2 / 2.0 + delta)) / h;
            q2 = p2 / 3.0 + alpha2 / 2.0 + delta;
            if p2 < 2.0 {
                p2 = 2.0;
                q2 = (ah * p2 - alpha2 / 2.0) / (1.0 - h);
            }
        } else if beta2 >= alpha2 {
            q2 = (ah * p2 - alpha2 / 2.0) / (1.0 - h);
        }
        LedgerChoices {
            p1: 1.0,
            q1: 0.0,
            alpha1: 0.9,
            p2,
            q2,
            alpha2,
            cone: 10.0,
            r_star: 1e3,
            eps0: 0.05,
            c_star: 0.0005,
        }
    }
}

/// Derived constants of one branch `i` of the outer construction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Branch {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `c_{1,i} = beta / (2C)`.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub a2: f64,
    pub b2: f64,
    pub a3: f64,
    pub b3: f64,
    /// `C_{3,i} = c_{3,i} / gamma_tilde`.
    pub cc3: f64,
    pub gamma: f64,
    pub gamma_tilde: f64,
    /// `(C^{-2} + 1)^{-beta/2}`, the boundary value of the R1 bracket.
    pub k1: f64,
}

/// Constants measured on grids and fed into the assembled function.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Assembly {
    pub d1: f64,
    pub d2: f64,
    /// Bound on the positive part of the cut-off outer function in the transition annulus.
    pub c2: f64,
    pub d: f64,
    pub a_coef: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerError {
    pub violations: Vec<String>,
}

impl fmt::Display for LedgerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid Lyapunov ledger: ")?;
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl core::error::Error for LedgerError {}

impl From<GError> for LedgerError {
    fn from(e: GError) -> Self {
        LedgerError { violations: alloc::vec![alloc::format!("{e}")] }
    }
}

#[derive(Debug, Clone)]
pub struct LyapunovParams {
    choices: LedgerChoices,
    model: ModelParams,
    eta_star: f64,
    j: f64,
    m: f64,
    branches: [Branch; 2],
    kernels: [[GKernel; 2]; 2],
    assembly: Option<Assembly>,
}

/// `∫_{lo}^{1/C} (t² + 1)^{(alpha - beta - 1)/2} dt`.
pub fn cone_integral(lo: f64, cone: f64, alpha: f64, beta: f64) -> f64 {
    let k = 0.5 * (alpha - beta - 1.0);
    integrate_adaptive(|t| (t * t + 1.0).powf(k), lo, 1.0 / cone, 1e-14)
}

impl LyapunovParams {
    /// Validates every choice and derives the full ledger.
    pub fn new(choices: LedgerChoices, model: &ModelParams) -> Result<Self, LedgerError> {
        let v = validate(&choices, model);
        if !v.is_empty() {
            return Err(LedgerError { violations: v });
        }
        Self::new_unchecked(choices, model)
    }

    /// Derives the ledger without checking the admissibility conditions.
    ///
    /// Used to exercise the certification checks on deliberately bad choices;
    /// only the requirements for the formulas to be evaluable are enforced.
    pub fn new_unchecked(choices: LedgerChoices, model: &ModelParams) -> Result<Self, LedgerError> {
        let h = model.h();
        let ah = model.alpha_h();
        let cone = choices.cone;
        if !(cone > 0.0) {
            return Err(LedgerError { violations: alloc::vec!["the cone parameter C must be positive".into()] });
        }
        let eta_star = cone * model.kappa2().sqrt();
        let mk = |p: f64, q: f64, alpha: f64| -> Branch {
            let beta = ah * p - (1.0 - h) * q;
            let c1 = beta / (2.0 * cone);
            let c2 = 0.5 * c1;
            let c3 = c2 / (2.0 * eta_star.powf(alpha));
            let b2 = c2 / (alpha - beta);
            let ic = 1.0 + cone.powi(-2);
            let a2 = ic.powf(p / 2.0) + c1 * ic.powf((p + beta) / 2.0) * cone_integral(-cone, cone, alpha, beta)
                - b2 * cone.powf(alpha - beta);
            let gamma = (h + 1.5) * beta;
            let gamma_tilde = beta + (h + 0.5) * alpha;
            Branch {
                p,
                q,
                alpha,
                beta,
                c1,
                c2,
                c3,
                a2,
                b2,
                a3: a2 / eta_star.powf(beta),
                b3: b2 / eta_star.powf(alpha),
                cc3: c3 / gamma_tilde,
                gamma,
                gamma_tilde,
                k1: ic.powf(-beta / 2.0),
            }
        };
        let branches = [mk(choices.p1, choices.q1, choices.alpha1), mk(choices.p2, choices.q2, choices.alpha2)];
        let kern = |b: &Branch| -> Result<[GKernel; 2], GError> {
            Ok([
                GKernel::new(b.gamma, h, model.kappa2(), eta_star)?,
                GKernel::new(b.gamma_tilde, h, model.kappa2(), eta_star)?,
            ])
        };
        let kernels = [kern(&branches[0])?, kern(&branches[1])?];
        let (j, m) = j_and_m(choices.c_star, model);
        Ok(LyapunovParams { choices, model: *model, eta_star, j, m, branches, kernels, assembly: None })
    }

    pub fn with_assembly(mut self, a: Assembly) -> Self {
        self.assembly = Some(a);
        self
    }

    pub fn choices(&self) -> &LedgerChoices {
        &self.choices
    }
    pub fn model(&self) -> &ModelParams {
        &self.model
    }
    pub fn cone(&self) -> f64 {
        self.choices.cone
    }
    pub fn r_star(&self) -> f64 {
        self.choices.r_star
    }
    pub fn eta_star(&self) -> f64 {
        self.eta_star
    }
    pub fn eps0(&self) -> f64 {
        self.choices.eps0
    }
    pub fn c_star(&self) -> f64 {
        self.choices.c_star
    }
    pub fn j(&self) -> f64 {
        self.j
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    /// Branch `i` in `{0, 1}`: the slow branch then the fast one.
    pub fn branch(&self, i: usize) -> &Branch {
        &self.branches[i]
    }
    /// `[G_gamma, G_gamma_tilde]` for branch `i`.
    pub fn kernels(&self, i: usize) -> &[GKernel; 2] {
        &self.kernels[i]
    }
    pub fn assembly(&self) -> Option<&Assembly> {
        self.assembly.as_ref()
    }

    /// `min{m alpha_h / 2, (kappa1 + kappa2) / 4}`, the averaging gain of the inner function.
    pub fn psi_gain(&self) -> f64 {
        (self.m * self.model.alpha_h() / 2.0).min((self.model.kappa1() + self.model.kappa2()) / 4.0)
    }

    /// Stable digest of the choices and model, for report provenance.
    pub fn ledger_hash(&self) -> u64 {
        let c = &self.choices;
        let vals = [
            c.p1,
            c.q1,
            c.alpha1,
            c.p2,
            c.q2,
            c.alpha2,
            c.cone,
            c.r_star,
            c.eps0,
            c.c_star,
            self.model.gamma(),
            self.model.h(),
            self.model.kappa1(),
            self.model.kappa2(),
        ];
        let mut hsh: u64 = 0xcbf2_9ce4_8422_2325;
        for v in vals {
            for b in v.to_bits().to_le_bytes() {
                hsh ^= b as u64;
                hsh = hsh.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hsh
    }
}

/// Every violated admissibility condition, described in words.
pub fn validate(c: &LedgerChoices, model: &ModelParams) -> Vec<String> {
    let mut v: Vec<String> = Vec::new();
    let h = model.h();
    let ah = model.alpha_h();
    if c.q1 != 0.0 {
        v.push("q1 must be 0".into());
    }
    if !(c.p1 > 0.0 && c.p2 > 0.0) {
        v.push("p1 and p2 must be positive".into());
    }
    if !(c.q2 > 0.0) {
        v.push("q2 must be positive".into());
    }
    for (i, (p, q, a)) in [(c.p1, c.q1, c.alpha1), (c.p2, c.q2, c.alpha2)].into_iter().enumerate() {
        let beta = ah * p - (1.0 - h) * q;
        let n = i + 1;
        if !(beta > 0.0) {
            v.push(alloc::format!("beta{n} = alpha_h p{n} - (1-h) q{n} = {beta} must be positive"));
        }
        if !(beta < a) {
            v.push(alloc::format!("beta{n} = {beta} must be smaller than alpha{n} = {a}"));
        }
        if !(a < 1.0) {
            v.push(alloc::format!("alpha{n} must be smaller than 1"));
        }
    }
    if !(c.q2 > c.p2 / 3.0 + c.alpha2 / 2.0) {
        v.push("q2 must exceed p2/3 + alpha2/2".into());
    }
    if !(c.p2 > c.p1) {
        v.push("p2 must exceed p1".into());
    }
    if !(c.p2 + 1.5 * c.alpha2 > c.p1 + 1.5 * c.alpha1) {
        v.push("p2 + 3 alpha2/2 must exceed p1 + 3 alpha1/2".into());
    }
    if !(c.cone > 0.0) {
        v.push("the cone parameter C must be positive".into());
    }
    let eta_star = c.cone * model.kappa2().sqrt();
    let floor = 10.0 * c.cone.max(eta_star).max(model.gamma());
    if !(c.r_star >= floor) {
        v.push(alloc::format!("r* = {} must be at least 10 max{{C, eta*, gamma}} = {floor}", c.r_star));
    }
    if !(c.eps0 > 0.0 && c.eps0 < 1.0) {
        v.push("eps0 must lie in (0, 1)".into());
    }
    if !(c.c_star > 0.0 && c.c_star < 2.0 / 25.0) {
        v.push("c* must lie in (0, 2/25) so that m is positive".into());
    } else {
        let (lhs, rhs) = cutoff_condition(c.c_star, model);
        if !(lhs <= rhs) {
            v.push(alloc::format!("c* = {} is too large for the cut-off: m times the lambda1 bound is {lhs:.4e} > (kappa1+kappa2)/4 = {rhs:.4e}", c.c_star));
        }
    }
    v
}

/// `J = ((kappa1+kappa2)/(2 alpha_h))^{2/3}` and `m = kappa1 c* / (alpha_h (1/2 - 12 c*/(2 - c*)))`.
pub fn j_and_m(c_star: f64, model: &ModelParams) -> (f64, f64) {
    let ah = model.alpha_h();
    let j = ((model.kappa1() + model.kappa2()) / (2.0 * ah)).powf(2.0 / 3.0);
    let m = model.kappa1() * c_star / (ah * (0.5 - 12.0 * c_star / (2.0 - c_star)));
    (j, m)
}

/// Both sides of the bound on `A psi2` inside `r² <= J`:
/// `m (6 dk/J^{3/2} + 4 alpha_h |l'| + 12 dk |l'|/J^{3/2} + 16 (kappa1+kappa2) |l''|/J^{3/2}) <= (kappa1+kappa2)/4`
/// with `dk = |kappa2 - kappa1|` and the sups of the cut-off's derivatives.
pub fn cutoff_condition(c_star: f64, model: &ModelParams) -> (f64, f64) {
    let (j, m) = j_and_m(c_star, model);
    let ks = model.kappa1() + model.kappa2();
    let dk = (model.kappa2() - model.kappa1()).abs();
    let j32 = j.powf(1.5);
    let (l1, l2) = (LAMBDA1_D1_SUP, LAMBDA1_D2_SUP);
    let lhs = m * (6.0 * dk / j32 + 4.0 * model.alpha_h() * l1 + 12.0 * dk * l1 / j32 + 16.0 * ks * l2 / j32);
    (lhs, ks / 4.0)
}

/// Exponents of the moment-optimal variant: branch 3 has `q3 - p3/3 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AltLedger {
    pub p3: f64,
    pub q3: f64,
    pub alpha3: f64,
    pub p4: f64,
    pub q4: f64,
    pub alpha4: f64,
}

impl AltLedger {
    /// Branch 3 targeting the moment `r^lambda`, `lambda = p3 + 1`, which needs `1/h < lambda < 2/h`.
    pub fn for_moment(lambda: f64, h: f64) -> Self {
        let beta3 = h * lambda - 1.0;
        let p3 = (beta3 + 1.0 - h) / h;
        let q3 = (beta3 + 1.0 + 2.0 * h) / (3.0 * h);
        let alpha3 = 0.5 * (beta3 + 1.0);
        // Branch 4: q4 = p4/3 + alpha4/2 + 0.05 with beta4 = alpha4/2.
        let alpha4 = 0.3;
        let p4_min = (alpha4 / 2.0 + (1.0 - h) * (alpha4 / 2.0 + 0.05)) / h;
        let p4 = p4_min.max(p3 + 1.5 * (alpha3 - alpha4) + 1.0);
        // Re-solve q4 so beta4 stays alpha4/2 for the chosen p4.
        let ah = 1.0 / 3.0 + 2.0 * h / 3.0;
        let q4 = (ah * p4 - alpha4 / 2.0) / (1.0 - h);
        AltLedger { p3, q3, alpha3, p4, q4, alpha4 }
    }

    pub fn betas(&self, model: &ModelParams) -> [f64; 2] {
        let ah = model.alpha_h();
        let h = model.h();
        [ah * self.p3 - (1.0 - h) * self.q3, ah * self.p4 - (1.0 - h) * self.q4]
    }

    pub fn validate(&self, model: &ModelParams) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        let [b3, b4] = self.betas(model);
        if !(self.p3 > 0.0 && self.q3 > 0.0 && self.p4 > 0.0 && self.q4 > 0.0) {
            v.push("p3, q3, p4, q4 must be positive".into());
        }
        if !(b3 > 0.0 && b3 < self.alpha3 && self.alpha3 < 1.0) {
            v.push("0 < beta3 < alpha3 < 1 must hold".into());
        }
        if !(b4 > 0.0 && b4 < self.alpha4 && self.alpha4 < 1.0) {
            v.push("0 < beta4 < alpha4 < 1 must hold".into());
        }
        if !(self.q4 > self.p4 / 3.0 + self.alpha4 / 2.0) {
            v.push("q4 must exceed p4/3 + alpha4/2".into());
        }
        if !(self.p4 + 1.5 * self.alpha4 > self.p3 + 1.5 * self.alpha3) {
            v.push("p4 + 3 alpha4/2 must exceed p3 + 3 alpha3/2".into());
        }
        if !((self.q3 - self.p3 / 3.0 - 1.0).abs() < 1e-12) {
            v.push("q3 - p3/3 must equal 1".into());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(h: f64) -> ModelParams {
        ModelParams::new(1.0, h, 1.0, 1.0).unwrap()
    }

    #[test]
    fn defaults_are_admissible() {
        for h in [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8] {
            let c = LedgerChoices::default_for(h);
            let v = validate(&c, &model(h));
            assert!(v.is_empty(), "h = {h}: {v:?}");
        }
    }

    #[test]
    fn spec_default_kept_where_valid() {
        let c = LedgerChoices::default_for(0.5);
        assert_eq!((c.p2, c.alpha2), (2.0, 0.95));
        let c = LedgerChoices::default_for(0.1);
        assert_eq!(c.alpha2, 0.3);
    }

    #[test]
    fn cutoff_condition_limits_c_star() {
        for h in [0.1, 0.5] {
            let mut c = LedgerChoices::default_for(h);
            c.c_star = 0.005;
            let v = validate(&c, &model(h));
            assert!(v.iter().any(|s| s.contains("too large for the cut-off")), "{v:?}");
        }
        // kappa1 = kappa2: m (32 alpha_h |l''| + 8 alpha_h) <= 1/2 with m ~ 2 c*/alpha_h
        let bound = 0.5 / (2.0 * (32.0 * LAMBDA1_D2_SUP + 8.0));
        let (lhs, rhs) = cutoff_condition(0.99 * bound, &model(0.3));
        assert!(lhs < rhs);
        let (lhs, rhs) = cutoff_condition(1.01 * bound, &model(0.3));
        assert!(lhs > rhs);
    }

    #[test]
    fn q1_nonzero_is_named() {
        let mut c = LedgerChoices::default_for(0.5);
        c.q1 = 0.5;
        let e = LyapunovParams::new(c, &model(0.5)).unwrap_err();
        assert!(e.violations.iter().any(|s| s == "q1 must be 0"), "{e}");
    }

    #[test]
    fn derived_constants() {
        let lp = LyapunovParams::new(LedgerChoices::default_for(0.5), &model(0.5)).unwrap();
        let b = lp.branch(0);
        assert!((b.beta - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.c1 - b.beta / 20.0).abs() < 1e-15);
        assert!((b.c2 - b.c1 / 2.0).abs() < 1e-15);
        assert!((b.c3 - b.c2 / (2.0 * 10f64.powf(0.9))).abs() < 1e-15);
        assert!((b.gamma - 2.0 * b.beta).abs() < 1e-15);
        assert!(b.gamma < 2.0 && b.gamma_tilde < 2.0);
        assert_eq!(lp.eta_star(), 10.0);
        let j = (1.0f64 / (2.0 / 3.0)).powf(2.0 / 3.0);
        assert!((lp.j() - j).abs() < 1e-15);
    }

    #[test]
    fn a2_matches_independent_integral() {
        // h = 0.5, p = 1, q = 0, alpha = 0.9, C = 10: integral by composite Simpson on 2e5 panels.
        let lp = LyapunovParams::new(LedgerChoices::default_for(0.5), &model(0.5)).unwrap();
        let b = lp.branch(0);
        let k = 0.5 * (b.alpha - b.beta - 1.0);
        let (lo, hi, n) = (-10.0f64, 0.1f64, 200_000usize);
        let hstep = (hi - lo) / n as f64;
        let f = |t: f64| (t * t + 1.0).powf(k);
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let t = lo + hstep * i as f64;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        let integral = s * hstep / 3.0;
        let ic: f64 = 1.01;
        let want = ic.powf(0.5) + b.c1 * ic.powf((1.0 + b.beta) / 2.0) * integral - b.b2 * 10f64.powf(b.alpha - b.beta);
        assert!((b.a2 - want).abs() < 1e-12, "{} vs {}", b.a2, want);
    }

    #[test]
    fn alt_ledger_moment_relation() {
        let h = 0.1;
        let alt = AltLedger::for_moment(0.8 * 2.0 / h, h);
        assert!((alt.p3 + 1.0 - 16.0).abs() < 1e-12);
        assert!(alt.validate(&model(h)).is_empty(), "{:?}", alt.validate(&model(h)));
    }
}
