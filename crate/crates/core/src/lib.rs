//! Asynchronous block-iterative primal-dual projective splitting.
//!
//! Solves coupled systems of monotone inclusions
//!
//! ```text
//! find x_i such that  z*_i ∈ A_i x_i + Σ_k L_kiᵀ B_k(Σ_j L_kj x_j − r_k)
//! ```
//!
//! by projecting onto half-spaces that contain the Kuhn-Tucker set. At each
//! iteration only some operators are activated, and they may read iterates
//! that are up to `D` iterations old.
//!
//! ```
//! use projsplit::{engine, fixtures, ControlSchedule, SolverConfig64, Status};
//!
//! let problem = fixtures::l1_quadratic_2d::<f64>().unwrap();
//! let schedule = ControlSchedule::random_admissible(1, 1, 2, 3, 7, 100).unwrap();
//! let config = SolverConfig64::fejer().with_max_iter(10_000);
//! let result = engine::run(&problem, config, &schedule, engine::zero_start(&problem)).unwrap();
//! assert_eq!(result.status, Status::Solved);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockspace;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod scalar;
pub mod schedule;
pub mod separator;

pub use blockspace::{BlockVector, CouplingMap, InnerProductSpace, PrimalDualPoint, Side, SpaceSignature};
pub use engine::{
    haugazeau_q, IterationRecord, Mode, ProxRule, Relaxation, RunResult, SeededPerturbation, Solver,
    SolverConfig, Status,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use operators::{
    GraphPoint, InexactCondition, InexactVerdict, InexactnessBudget, MonotoneOp, OperatorKind,
};
pub use scalar::Scalar;
pub use schedule::{Activation, Certification, ControlSchedule, LagPattern, Step};
pub use separator::{kt_residual, KtResidual, Problem, ProblemSpec, Separator, SubspaceSpec};

pub type BlockVector64 = BlockVector<f64>;
pub type PrimalDualPoint64 = PrimalDualPoint<f64>;
pub type CouplingMap64 = CouplingMap<f64>;
pub type Matrix64 = Matrix<f64>;
pub type MonotoneOp64 = MonotoneOp<f64>;
pub type Problem64 = Problem<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type RunResult64 = RunResult<f64>;

pub type BlockVector32 = BlockVector<f32>;
pub type PrimalDualPoint32 = PrimalDualPoint<f32>;
pub type Problem32 = Problem<f32>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type RunResult32 = RunResult<f32>;
