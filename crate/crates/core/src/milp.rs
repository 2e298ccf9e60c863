//! Solver-agnostic linear model and the backend contract.
//!
//! Formulation modules build a [`LinearModel`] and hand it to any
//! [`MilpSolver`]. Models are plain data, so adding a row and solving again
//! is the whole incremental story.

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub kind: VarKind,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, terms: Vec<(VarId, f64)>, sense: RowSense, rhs: f64) -> Self {
        Self { name: name.into(), terms, sense, rhs }
    }

    /// Row bounds as a `(lo, hi)` pair.
    pub fn bounds(&self) -> (f64, f64) {
        match self.sense {
            RowSense::Le => (f64::NEG_INFINITY, self.rhs),
            RowSense::Ge => (self.rhs, f64::INFINITY),
            RowSense::Eq => (self.rhs, self.rhs),
        }
    }
}

/// Variables, rows and a linear objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub sense: Sense,
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
}

impl LinearModel {
    pub fn new(sense: Sense) -> Self {
        Self { sense, vars: Vec::new(), rows: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lo: f64, hi: f64, objective: f64) -> VarId {
        let (lo, hi) = match kind {
            VarKind::Binary => (lo.max(0.0), hi.min(1.0)),
            _ => (lo, hi),
        };
        self.vars.push(Variable { name: name.into(), lo, hi, kind, objective });
        VarId(self.vars.len() - 1)
    }

    pub fn add_constraint(&mut self, row: Constraint) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn add_linear_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        self.add_constraint(Constraint::new(name, terms, sense, rhs))
    }

    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.kind != VarKind::Continuous)
    }

    /// Structural check: every row references declared variables and
    /// all bounds are ordered.
    pub fn check(&self) -> Result<(), MilpError> {
        for v in &self.vars {
            if !(v.lo <= v.hi) {
                return Err(MilpError::Malformed(alloc::format!("variable {} has lo > hi", v.name)));
            }
        }
        for r in &self.rows {
            if r.terms.iter().any(|(id, _)| id.0 >= self.vars.len()) {
                return Err(MilpError::Malformed(alloc::format!("row {} references an unknown variable", r.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub time_limit_secs: Option<f64>,
    pub threads: u32,
    pub mip_gap: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { time_limit_secs: None, threads: 1, mip_gap: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Time or node limit hit; `values` holds the incumbent if one exists.
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub gap: f64,
}

impl SolveOutcome {
    pub fn value(&self, id: VarId) -> f64 {
        self.values[id.0]
    }

    /// Nearest integer of a variable value.
    pub fn int_value(&self, id: VarId) -> i64 {
        libm::round(self.values[id.0]) as i64
    }

    pub fn flag(&self, id: VarId) -> bool {
        self.values[id.0] > 0.5
    }

    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// An exact MILP/LP backend.
pub trait MilpSolver {
    fn name(&self) -> &str;

    fn solve(&self, model: &LinearModel, config: &SolveConfig) -> Result<SolveOutcome, MilpError>;
}

/// Append a row and solve the grown model.
pub fn add_constraint_and_resolve(
    model: &mut LinearModel,
    row: Constraint,
    solver: &dyn MilpSolver,
    config: &SolveConfig,
) -> Result<SolveOutcome, MilpError> {
    model.add_constraint(row);
    solver.solve(model, config)
}
