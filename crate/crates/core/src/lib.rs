//! Exact planning models for mobile medical unit (MMU) services.
//!
//! The crate is `no_std` (with `alloc`). Everything that needs an operating
//! system, a file system or a concrete MILP solver lives in the companion
//! `mmu-planner` crate; the formulation modules here only talk to the
//! [`milp::MilpSolver`] trait.
//!
//! Module map:
//! - [`model`]: instances, plans, validation, session expansion, plan canonicalization
//! - [`milp`]: solver-agnostic linear model and backend contract
//! - [`maxflow`]: residual capacities, flow network, Dinic max-flow / min-cut
//! - [`deterministic`]: compact formulation
//! - [`benders`]: master problem, feasibility cuts, cut loop
//! - [`robust`]: interval and budgeted counterparts, separation, subset-sum reduction
//! - [`instgen`]: synthetic instance generator
//! - [`eval`]: realization sampling and the violations metric

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod benders;
pub mod deterministic;
pub mod eval;
pub mod fixtures;
mod formulation;
pub mod instgen;
pub mod maxflow;
pub mod milp;
pub mod model;
pub mod robust;

pub use benders::{IterationRecord, Separation, SeparationResult, SolveReport};
pub use milp::{MilpSolver, SolveConfig};
pub use model::{DemandMode, Facility, Instance, Plan, UncertaintyModel};

use thiserror::Error;

/// Failure modes shared by every solve entry point.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("instance is infeasible")]
    Infeasible,
    #[error("instance is robust infeasible")]
    RobustInfeasible,
    #[error("solver stopped at a limit before proving optimality (after {iterations} iterations)")]
    Limit { iterations: usize },
    #[error("unexpected solver status: {0}")]
    Unexpected(&'static str),
    #[error("invalid instance: {0}")]
    InvalidInstance(alloc::string::String),
    #[error(transparent)]
    Backend(#[from] milp::MilpError),
    #[error(transparent)]
    Flow(#[from] maxflow::FlowError),
    #[error(transparent)]
    Separation(#[from] robust::SeparationError),
}
