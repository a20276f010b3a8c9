//! Experiment harness behind the `osfde` binary: configuration, ladder runs
//! and table output.

pub mod config;
pub mod emit;
pub mod error;
pub mod harness;

pub use config::{ConfigBuilder, ExperimentConfig, Format, ProblemId, SolverKind};
pub use emit::{emit, format_g, ResultRow, ResultTable, SpectralRow, SpectralTable};
pub use error::{HarnessError, Result};
pub use harness::{run_convergence, run_precond_bench, run_spectral, solve_cell};
