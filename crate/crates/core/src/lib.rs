//! Minimum-effort, field-of-view-constrained, impact-time-controlled guidance.
//!
//! The crate is `no_std` (it needs `alloc`). It contains everything that is
//! pure computation:
//!
//! * [`geometry`]: planar engagement kinematics and the lead-angle constraint algebra.
//! * [`pmp`]: Hamiltonian, costate dynamics and the stationarity system of the
//!   saturation-regularized problem.
//! * [`ode`]: an embedded Dormand–Prince 5(4) integrator with dense output.
//! * [`extremal`]: backward propagation of the parameterized extremal family.
//! * [`dataset`]: supervised samples `(r, sigma, t_go) -> u`.
//! * [`mlp`]: the 3-20-20-1 feedback network and its trainer.
//! * [`guidance`]: the feedback law (symmetry fold, time scaling, saturation) and a PN baseline.
//! * [`simulator`]: closed-loop engagements in physical units.
//!
//! File formats, the CLI and multi-threaded drivers live in the `fovguide` crate.
#![cfg_attr(not(test), no_std)]
// validation compares with negations so that NaN is rejected; kernels index several arrays in step
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod extremal;
pub mod geometry;
pub mod guidance;
pub mod math;
pub mod mlp;
pub mod ode;
pub mod pmp;
pub mod simulator;

pub use error::{Error, Result};
