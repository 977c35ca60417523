//! Inexact limited-memory bundle method for nonsmooth, nonconvex
//! minimization with noisy function values and subgradients.
//!
//! The core types are generic over the scalar (`f32` or `f64`); the aliases
//! at the crate root fix the double-precision instantiation most callers use.
//!
//! ```
//! use inexact_lmbm::{instantiate, minimize, ProblemId, SolverConfig};
//!
//! let (instance, mut problem) = instantiate::<f64>(ProblemId::F1, 5).unwrap();
//! let report = minimize(&mut problem, &instance.x_start, &SolverConfig::default()).unwrap();
//! assert!(report.f_final < 1e-3);
//! ```

// `!(a > b)` is used on purpose so that NaN fails the comparison, and small
// dense kernels read best with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aggregation;
pub mod bundle;
pub mod error;
pub mod linalg;
pub mod lmqn;
pub mod oracle;
pub mod problems;
pub mod scalar;
pub mod solver;

pub use aggregation::{
    aggregate, build_qp, solve_simplex_qp, solve_simplex_qp_with, AggregateState, SimplexQp, TieBreak,
};
pub use bundle::{linearization_error, make_bundle_element, BundleElement};
pub use error::{Error, Result};
pub use lmqn::{CorrectionStore, UpdateForm};
pub use oracle::{
    wrap_noise, FnOracle, NoiseDistribution, NoiseKind, NoiseSpec, NoisyOracle, Oracle, OracleResponse, Perturbation,
};
pub use problems::{instantiate, instantiate_by_name, NormReading, Problem, ProblemId, ProblemInstance};
pub use scalar::Scalar;
pub use solver::{
    crossing_stepsize, descent_test, minimize, minimize_with_callback, stopping_value, FailureReason, InvariantReport,
    IterationRecord, SolveReport, SolverConfig, StepKind, StepsizeRule, Termination,
};

pub type SolverConfig64 = SolverConfig<f64>;
pub type SolveReport64 = SolveReport<f64>;
pub type CorrectionStore64 = CorrectionStore<f64>;
pub type BundleElement64 = BundleElement<f64>;
pub type NoiseSpec64 = NoiseSpec<f64>;
pub type ProblemInstance64 = ProblemInstance<f64>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type SolveReport32 = SolveReport<f32>;
