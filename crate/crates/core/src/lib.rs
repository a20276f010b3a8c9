//! Fast solvers for one-sided space-fractional diffusion equations with
//! variable coefficients.
//!
//! The spatial operator is the WSGD discretization of a left Riemann–Liouville
//! derivative of order `1 < alpha < 2`; time stepping is Crank–Nicolson. Each
//! step is solved by GMRES preconditioned with a mean-coefficient Toeplitz
//! matrix (1D, inverted through Gohberg–Semencul) or a two-level Toeplitz
//! matrix approximated by a multigrid V-cycle (2D).
//!
//! The structured core is generic over [`Scalar`] (`f32`, `f64`); the dense
//! spectral checks in [`analysis`] are `f64`.

pub mod analysis;
pub mod error;
pub mod kernel;
pub mod krylov;
pub mod problems;
mod scalar;
pub mod scheme1d;
pub mod scheme2d;
pub mod toeplitz;

pub use error::{OsfdeError, Result};
pub use kernel::{gl_weights, symbol, symbol_ratio_min, wsgd_weights, FractionalOrder, WsgdKernel};
pub use krylov::{gmres, GmresOptions, GmresResult, LinearOperator, ResidualBaseline};
pub use scalar::Scalar;
pub use scheme1d::{
    advance, assemble_galpha, convergence_rates, error_and_rates, Grid1D, InitialGuess, LinearSolver, Problem1D,
    Solution, SolveReport, SolverOptions, TimeGrid,
};
pub use scheme2d::{advance_2d, Grid2D, Precond2D, Problem2D, SolverOptions2D, StabilityWeight};
pub use toeplitz::{
    gs_apply, gs_build, CirculantOperator, GsInverse, SkewCirculantOperator, ToeplitzOperator,
};

pub type Toeplitz64 = ToeplitzOperator<f64>;
pub type Toeplitz32 = ToeplitzOperator<f32>;
pub type GsInverse64 = GsInverse<f64>;
pub type WsgdKernel64 = WsgdKernel<f64>;
pub type Problem1D64 = Problem1D<f64>;
pub type Problem2D64 = Problem2D<f64>;
pub type Grid1D64 = Grid1D<f64>;
pub type Grid2D64 = Grid2D<f64>;
