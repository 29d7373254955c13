//! Spectral-Galerkin simulation of the Beris–Edwards Q-tensor model of nematic
//! liquid crystals, with energy accounting, the linearized fixed-point
//! machinery, and verification checks.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod linearized;
pub mod sim;
pub mod tensor;
pub mod verification;

pub use error::{Error, Result};
