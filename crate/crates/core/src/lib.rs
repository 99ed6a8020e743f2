//! Relevance-compression curves of the information bottleneck by alternating
//! Bregman projection.
//!
//! Given a source `p(x)` and a channel `s = p(y|x)`, [`solve_ri`] computes
//! R(I), the least I(T;X) over encoders `w = p(t|x)` with I(T;Y) ≥ I, and
//! [`solve_ir`] computes the inverse I(R). Each cycle solves a scalar dual
//! equation for the multiplier, applies the closed-form exponential-tilt
//! update to `w`, and then recomputes the bottleneck marginal and posterior,
//! so every iterate is a feasible point of the original problem.
//!
//! ```
//! use ib_abp::{oracles, solve_ri, SolverConfig};
//!
//! let problem = oracles::bernoulli_problem(0.15)?;
//! let report = solve_ri(&problem, 0.062566, &SolverConfig::new(2, 42))?;
//! assert!((report.value - 0.130812).abs() < 5e-4);
//! # Ok::<(), ib_abp::IbError>(())
//! ```
//!
//! The [`ba`] module holds the Blahut–Arimoto baseline, [`diagnostics`] the
//! descent decomposition and KKT residual, [`oracles`] closed-form curves for
//! the binary and Gaussian models, and [`ingest`] the sample-table binning
//! and problem file format.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ba;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod kernel;
pub mod oracles;
pub mod plot;
pub mod prob;
pub mod solver;

pub use ba::{ba_adaptive, ba_fixed, BaPoint, BaSearch};
pub use diagnostics::{descent_identity, kkt_residual, kkt_residual_ir, DescentBreakdown, DiagnosticsRecorder};
pub use error::{IbError, Result};
pub use kernel::{LambdaStatus, Metric, RootConfig};
pub use prob::{CondMatrix, IbProblem, ProbVector};
pub use solver::{
    hat_i, init_state, solve_ir, solve_ir_observed, solve_ri, solve_ri_observed, Mode, SolveReport,
    SolverConfig, SolverState, StopRule,
};
