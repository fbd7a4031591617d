//! The piecewise Lyapunov construction on `(u, v, z)`.
//!
//! Outer local functions `phi_{j,i}` (regions R0 to R3, branches `i = 1, 2`),
//! the averaging function `psi` of the inner region, and the assembled
//! function `Phi` and its pull-back `Psi`. Every function is evaluated as a
//! [`Jet`](crate::jet::Jet) so that the operators in [`ops`] use closed-form
//! derivatives.

pub mod assembled;
pub mod local;
pub mod ops;
pub mod params;
pub mod psi;
pub mod region;

pub use assembled::{phi_total, phi_value, psi_xyz, psi_xyz_value};
pub use ops::{apply, apply_fd, apply_jet, Derivs, FdError, OpValue, Operator};
pub use params::{validate, AltLedger, Assembly, Branch, LedgerChoices, LedgerError, LyapunovParams};
pub use region::{classify, contains_closed, outer_piece, Region};
