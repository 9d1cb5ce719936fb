//! Time-optimal control of the heat equation with mixed control-state
//! constraints and an L²-ball terminal constraint.
//!
//! The free-horizon problem is rescaled to `[0, 1]` with the horizon `T` as
//! a scalar unknown, discretized by piecewise constant (implicit Euler) time
//! stepping and P1 elements on a uniform triangulation of the unit square,
//! and solved by a bilevel method: for fixed `T` a box-constrained
//! distance-minimization yields the value function `δ(T)`, and a
//! safeguarded Newton iteration finds its root `T*`.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

pub mod error;
pub mod fem;
pub mod field;
pub mod functions;
pub mod inner;
pub mod linalg;
pub mod mesh;
pub mod outer;
pub mod parabolic;
pub mod problem;
pub mod scalar;
pub mod sparse;
pub mod study;
pub mod transform;

pub use error::{Error, Result};
pub use field::NodeScope;
pub use functions::{DataFunction, FunctionRegistry, Manufactured};
pub use scalar::Real;

pub type Mesh = mesh::Mesh<f64>;
pub type TimeGrid = mesh::TimeGrid<f64>;
pub type SparseSymMatrix = sparse::SparseSymMatrix<f64>;
pub type SpaceTimeField = field::SpaceTimeField<f64>;
pub type Discretization = parabolic::Discretization<f64>;
pub type StepOperator = parabolic::StepOperator<f64>;
pub type ProblemSpec = problem::ProblemSpec<f64>;
pub type InnerOptions = inner::InnerOptions<f64>;
pub type InnerSolveResult = inner::InnerSolveResult<f64>;
pub type OuterOptions = outer::OuterOptions<f64>;
pub type SolveReport = outer::SolveReport<f64>;
pub type KktBundle = outer::KktBundle<f64>;
pub type StudyConfig = study::StudyConfig<f64>;
pub type EocRow = study::EocRow<f64>;
