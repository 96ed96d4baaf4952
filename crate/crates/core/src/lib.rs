//! Low-rank matrix recovery by iterative singular value thresholding with
//! the fraction penalty `P_a(X) = sum_i a sigma_i / (a sigma_i + 1)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`thresholding`]: the scalar and matrix prox of the penalty;
//! * [`operators`]: linear measurement maps and the gradient step;
//! * [`solvers`]: fixed, Scheme 2 and adaptive iterations;
//! * [`bench`]: synthetic and image experiments.
//!
//! Data-parallel kernels run on rayon when the `parallel` feature is on
//! (the default); [`Execution`] selects between the two at run time.

pub mod bench;
pub mod error;
pub mod matrix;
pub mod operators;
pub mod par;
pub mod rng;
pub mod solvers;
pub mod thresholding;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, Svd};
pub use operators::{
    completion_map, gradient_step, operator_norm_sq, CompletionMap, DenseMap, LinearMeasurement,
    SamplingMask, ScaledMap, StepSize,
};
pub use par::Execution;
pub use solvers::{
    aisvta, isvta_fixed, isvta_scheme2, solve, LambdaMode, SolverConfig, SolverResult,
};
pub use thresholding::{matrix_prox, Regime, SingularSpectrum, ThresholdParams};
