//! Reflected Skorokhod dynamics for inertial particle pairs in rough flows.
//!
//! The crate is `no_std` (with `alloc`) and carries everything that is pure
//! computation: the four stochastic systems, the reflected Euler–Maruyama
//! integrator, the piecewise Lyapunov function with its differential operators,
//! grid certification of the drift and flux inequalities, the deterministic
//! control constructions and the statistical estimators.
//!
//! File formats, configuration and parallel drivers live in the `pairdisp`
//! companion crate.

#![no_std]
#![forbid(unsafe_code)]
// `num_traits::Float` supplies the math methods without std. Newer toolchains
// (and std under test) provide them inherently, which leaves the import unused.
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod control;
pub mod gfun;
pub mod integrator;
pub mod jet;
pub mod lyapunov;
pub mod model;
pub mod quad;
pub mod stats;
pub mod verify;

pub use model::{AuxState, Chart, ModelError, ModelParams, State};
