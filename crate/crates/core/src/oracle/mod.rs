//! Independent references: brute-force kernels, a parameter-count walk, and
//! the finite-difference gradient checker.

pub mod gradcheck;
mod naive;
pub mod suite;

pub use gradcheck::{GradCheckConfig, GradCheckReport, Offender, TensorCheck};
pub use naive::{naive_conv, param_count_oracle};
pub use suite::{layer_suite, model_suite, MODEL_BUDGET};
