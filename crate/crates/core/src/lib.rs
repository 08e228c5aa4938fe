//! Combined economic and emission dispatch of thermal units.
//!
//! Fuel cost and per-gas emissions are folded into one objective with price
//! penalty factors, then minimized under the power balance and unit limits by
//! a particle swarm or a binary genetic algorithm. Two reference solvers
//! ([`oracle::lambda_solve`], [`oracle::grid_search`]) cover small lossless
//! instances for cross-checking.

pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod penalty;
pub mod repair;
pub mod solver;

pub use error::{DispatchError, Result};
pub use model::{DispatchProblem, DispatchSolution, Gas, GeneratorUnit, LossMatrix, Quadratic, Weights};
pub use penalty::{penalty_factors_all, PenaltyFactors};
pub use solver::{ConvergenceTrace, Solver, SolverParams, SolverRegistry, SolverRun};

/// The six-unit reference data set shipped with the crate.
pub const IEEE30_6UNIT: &str = include_str!("../fixtures/ieee30_6unit.json");
