//! Control barrier functions for input-output linearizable systems.
//!
//! Given a control-affine system, a smooth output `y` with a uniform
//! relative degree and a scalar constraint `ψ(y) ≥ 0`, the crate builds a
//! backstepped barrier function `h`, checks its hypotheses by sampling, and
//! runs the resulting safety filter in closed loop.
//!
//! Model code is written once against [`Scalar`] and evaluated at `f32`,
//! `f64` or nested dual numbers ([`Jet`]); all derivatives come from the
//! jets.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod filter;
pub mod jet;
pub mod lie;
pub mod linalg;
pub mod sampling;
pub mod scalar;
pub mod sim;
pub mod synthesis;
pub mod systems;

pub use autodiff::{ScalarMap, SharedFn, SmoothFn};
pub use error::{Error, Result};
pub use jet::{Direction, Jet};
pub use scalar::{Real, Scalar};

pub type Jet64 = Jet<f64>;
pub type Jet32 = Jet<f32>;
