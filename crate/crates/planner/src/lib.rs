//! Solver backends, file formats and the command-line frontend for the
//! `mmu-core` planning models.

pub mod backend;
pub mod cli;
pub mod io;
pub mod report;
pub mod run;

pub use backend::{solver_for, solver_from_env, BackendKind, HighsSolver, MicrolpSolver};
