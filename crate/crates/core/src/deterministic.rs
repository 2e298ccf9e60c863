//! Compact formulation: first-stage rows plus explicit steerable assignment
//! variables and capacity rows. Session-expanded instances give the
//! session-specific variant with no further changes.

use crate::benders::SolveReport;
use crate::formulation::{add_first_stage, read_first_stage, walkin_var, FirstStageVars};
use crate::milp::{LinearModel, MilpSolver, RowSense, Sense, SolveConfig, SolveStatus, VarId, VarKind};
use crate::model::{trim_steerable_assignment, Facility, Instance};
use crate::SolveError;
use alloc::format;
use alloc::vec::Vec;

/// Compact model and its variable maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactModel {
    pub model: LinearModel,
    pub first_stage: FirstStageVars,
    /// Per origin, aligned with its steerable targets.
    pub assign: Vec<Vec<VarId>>,
}

pub fn build_compact(inst: &Instance) -> CompactModel {
    let mut model = LinearModel::new(Sense::Minimize);
    let first_stage = add_first_stage(&mut model, inst);

    let mut assign = Vec::with_capacity(inst.origins.len());
    for o in &inst.origins {
        let row: Vec<VarId> = o
            .steerable_targets()
            .map(|k| model.add_var(format!("z_{}_{}", o.id, inst.facility_id(k)), VarKind::Integer, 0.0, f64::INFINITY, 0.0))
            .collect();
        model.add_linear_constraint(
            format!("demand_{}", o.id),
            row.iter().map(|&z| (z, 1.0)).collect(),
            RowSense::Ge,
            o.steerable as f64,
        );
        assign.push(row);
    }

    for k in inst.facilities() {
        let mut terms = Vec::new();
        for (v, o) in inst.origins.iter().enumerate() {
            if let Some(pos) = o.steerable_targets().position(|f| f == k) {
                terms.push((assign[v][pos], 1.0));
            }
            if let Some(w) = walkin_var(inst, &first_stage, v, k) {
                if o.walkin > 0 {
                    terms.push((w, o.walkin as f64));
                }
            }
        }
        let rhs = match k {
            Facility::Site(l) => {
                terms.push((first_stage.sessions[l], -(inst.session_capacity as f64)));
                0.0
            }
            Facility::Practice(p) => inst.practices[p].capacity as f64,
        };
        model.add_linear_constraint(format!("capacity_{}", inst.facility_id(k)), terms, RowSense::Le, rhs);
    }
    CompactModel { model, first_stage, assign }
}

/// Solve the compact model and canonicalize the plan.
pub fn solve_compact(inst: &Instance, solver: &dyn MilpSolver, config: &SolveConfig) -> Result<SolveReport, SolveError> {
    let cm = build_compact(inst);
    let out = solver.solve(&cm.model, config)?;
    let proven_optimal = match out.status {
        SolveStatus::Optimal => true,
        SolveStatus::Infeasible => return Err(SolveError::Infeasible),
        SolveStatus::Unbounded => return Err(SolveError::Unexpected("compact model unbounded")),
        SolveStatus::Limit if out.has_solution() => false,
        SolveStatus::Limit => return Err(SolveError::Limit { iterations: 1 }),
    };
    let fs = read_first_stage(&cm.first_stage, &out);
    let mut plan = fs.to_plan(inst);
    let z: Vec<Vec<u64>> = cm.assign.iter().map(|row| row.iter().map(|&v| out.int_value(v).max(0) as u64).collect()).collect();
    let demand: Vec<u64> = inst.origins.iter().map(|o| o.steerable).collect();
    plan.steerable_assign = Some(trim_steerable_assignment(&z, &demand));
    Ok(SolveReport {
        objective: fs.cost(inst),
        plan,
        iterations: 1,
        cuts: 0,
        proven_optimal,
        trace: Vec::new(),
    })
}
