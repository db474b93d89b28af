//! Numerical toolkit for the operator class `C_α` on the annulus
//! `r < |z| < 1`, where `α(t) = (1−t)(t−r²)`.
//!
//! Matrices stand in for operators: membership tests, defect operators,
//! limit gramians, the output transform into the weighted Hardy space of the
//! complement of the annulus, weighted-shift models, and K-spectral ratios
//! for rational functions.

pub mod alpha_class;
pub mod asymptotics;
pub mod catalog;
pub mod config;
pub mod error;
pub mod exec;
pub mod lifting;
pub mod linalg;
pub mod model_spaces;
pub mod sampling;
pub mod spectral_bounds;
pub mod verify;

pub use alpha_class::{Membership, OperatorInstance, Verdict};
pub use config::Tolerances;
pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::{CMatrix, CVector, C64};
