//! Quasi self-similar solutions of semilinear heat equations `u_t = Δu + f(u)`.
// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod heat;
pub mod nonlinearity;
pub mod numerics;
pub mod profile;
pub mod quasi;
pub mod threshold;

pub use error::{Error, Result};
pub use nonlinearity::{Nonlinearity, NonlinearitySpec};
