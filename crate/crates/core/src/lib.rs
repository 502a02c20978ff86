#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` rejects NaN on purpose.

//! Deformed Laguerre ensemble `H = (1/m) Σ^{1/2} A A* Σ^{1/2}`: sampling,
//! the limiting density, the finite-n saddle-point machinery behind the
//! correlation kernel, sine-kernel statistics and a Monte Carlo harness.
//!
//! The analytic layers are generic over [`scalar::Real`]; the aliases below
//! fix them to `f64`. Sampling and Monte Carlo work in `f64` only.

pub mod ensemble;
pub mod error;
pub mod kernel;
pub mod limit_density;
pub mod linalg;
pub mod mc_stats;
pub mod quadrature;
mod roots;
pub mod saddle_contour;
pub mod scalar;
pub mod sine_stats;
pub mod verify;

pub use error::{LabError, Result};

pub type Complex64 = scalar::Cx<f64>;
pub type Measure64 = limit_density::Measure<f64>;
pub type SaddleEquation64 = saddle_contour::SaddleEquation<f64>;
pub type SaddleBranch64 = saddle_contour::SaddleBranch<f64>;
pub type ContourPair64 = saddle_contour::ContourPair<f64>;
pub type PhaseFn64 = saddle_contour::PhaseFn<f64>;
pub type KernelEvaluator64 = kernel::KernelEvaluator<f64>;
pub type LocalKernelValue64 = kernel::LocalKernelValue<f64>;
pub type FredholmResult64 = sine_stats::FredholmResult<f64>;
