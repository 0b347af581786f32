//! Numerical solver for the fractional Yamabe flow on a flat torus, written
//! in fast-diffusion form `d/dt u = -P(u^m)` with `P = (-Delta)^gamma + q_c`.
//!
//! The operator `P` is available spectrally ([`spectral`]) and through the
//! weighted extension problem ([`extension`]). Time stepping is implicit: each
//! step solves the convex resolvent problem of [`resolvent`]. The [`flow`]
//! module runs the un-rescaled and volume-preserving flows, and [`conformal`]
//! holds inequality and conformal-map diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod error;
pub mod extension;
pub mod flow;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod params;
pub mod profiles;
pub mod resolvent;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use params::FlowParams;
