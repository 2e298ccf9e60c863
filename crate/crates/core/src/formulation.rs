//! Rows shared by the compact model and every master problem: setup and
//! session variables, setup coupling, and closest-facility walk-in routing.

use crate::milp::{LinearModel, RowSense, SolveOutcome, VarId, VarKind};
use crate::model::{normalize_walkin_assignment, routes_from_matrix, Facility, Instance, Plan};
use alloc::format;
use alloc::vec::Vec;

/// Variable handles of the first-stage decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStageVars {
    /// Operating indicator per site: the setup variable, or the session
    /// variable itself on session-expanded instances.
    pub operate: Vec<VarId>,
    pub sessions: Vec<VarId>,
    /// Group setup variables (session-expanded instances only).
    pub groups: Vec<VarId>,
    /// Per origin, aligned with its consideration list.
    pub walkin: Vec<Vec<VarId>>,
}

/// First-stage values read from a solution (walk-in matrix not yet
/// normalized).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstStage {
    pub setup: Vec<bool>,
    pub sessions: Vec<u64>,
    pub groups: Vec<bool>,
    pub walkin: Vec<Vec<bool>>,
}

impl FirstStage {
    /// Formulation objective: setup charges of the chosen flags plus sessions.
    pub fn cost(&self, inst: &Instance) -> u64 {
        let sessions: u64 = self.sessions.iter().sum::<u64>() * inst.session_cost;
        let setup: u64 = if inst.is_session_expanded() {
            inst.setup_groups.iter().zip(&self.groups).filter(|(_, &o)| o).map(|(g, _)| g.setup_cost).sum()
        } else {
            inst.sites.iter().zip(&self.setup).filter(|(_, &y)| y).map(|(s, _)| s.setup_cost).sum()
        };
        setup + sessions
    }

    /// Plan with normalized walk-in routes and no steerable assignment.
    pub fn to_plan(&self, inst: &Instance) -> Plan {
        let w = normalize_walkin_assignment(&self.walkin);
        Plan {
            setup: self.setup.clone(),
            sessions: self.sessions.clone(),
            walkin_route: routes_from_matrix(inst, &w),
            steerable_assign: None,
        }
    }
}

pub fn add_first_stage(model: &mut LinearModel, inst: &Instance) -> FirstStageVars {
    let grouped = inst.is_session_expanded();
    let mut operate = Vec::with_capacity(inst.sites.len());
    let mut sessions = Vec::with_capacity(inst.sites.len());
    let mut groups = Vec::new();

    if grouped {
        for g in &inst.setup_groups {
            groups.push(model.add_var(format!("open_{}", g.id), VarKind::Binary, 0.0, 1.0, g.setup_cost as f64));
        }
        let site_group = inst.site_groups();
        for (i, s) in inst.sites.iter().enumerate() {
            let x = model.add_var(format!("x_{}", s.id), VarKind::Binary, 0.0, s.session_cap.min(1) as f64, inst.session_cost as f64);
            if let Some(g) = site_group[i] {
                model.add_linear_constraint(format!("group_{}", s.id), alloc::vec![(x, 1.0), (groups[g], -1.0)], RowSense::Le, 0.0);
            }
            operate.push(x);
            sessions.push(x);
        }
    } else {
        for s in &inst.sites {
            let y = model.add_var(format!("y_{}", s.id), VarKind::Binary, 0.0, 1.0, s.setup_cost as f64);
            let x = model.add_var(format!("x_{}", s.id), VarKind::Integer, 0.0, s.session_cap as f64, inst.session_cost as f64);
            model.add_linear_constraint(
                format!("setup_{}", s.id),
                alloc::vec![(x, 1.0), (y, -(s.session_cap as f64))],
                RowSense::Le,
                0.0,
            );
            operate.push(y);
            sessions.push(x);
        }
    }

    let mut walkin = Vec::with_capacity(inst.origins.len());
    for o in &inst.origins {
        let row: Vec<VarId> = o
            .consideration
            .iter()
            .map(|c| model.add_var(format!("w_{}_{}", o.id, inst.facility_id(c.facility)), VarKind::Binary, 0.0, 1.0, 0.0))
            .collect();
        if !row.is_empty() {
            model.add_linear_constraint(format!("route_{}", o.id), row.iter().map(|&w| (w, 1.0)).collect(), RowSense::Ge, 1.0);
        }
        for (i, c) in o.consideration.iter().enumerate() {
            let name = inst.facility_id(c.facility);
            let earlier = row[..i].iter().map(|&w| (w, 1.0));
            match c.facility {
                Facility::Site(l) => {
                    model.add_linear_constraint(
                        format!("open_only_{}_{}", o.id, name),
                        alloc::vec![(row[i], 1.0), (operate[l], -1.0)],
                        RowSense::Le,
                        0.0,
                    );
                    let mut terms = alloc::vec![(row[i], 1.0), (operate[l], -1.0)];
                    terms.extend(earlier);
                    model.add_linear_constraint(format!("closest_{}_{}", o.id, name), terms, RowSense::Ge, 0.0);
                }
                Facility::Practice(_) => {
                    let mut terms = alloc::vec![(row[i], 1.0)];
                    terms.extend(earlier);
                    model.add_linear_constraint(format!("closest_{}_{}", o.id, name), terms, RowSense::Ge, 1.0);
                }
            }
        }
        walkin.push(row);
    }
    FirstStageVars { operate, sessions, groups, walkin }
}

pub fn read_first_stage(vars: &FirstStageVars, out: &SolveOutcome) -> FirstStage {
    FirstStage {
        setup: vars.operate.iter().map(|&v| out.flag(v)).collect(),
        sessions: vars.sessions.iter().map(|&v| out.int_value(v).max(0) as u64).collect(),
        groups: vars.groups.iter().map(|&v| out.flag(v)).collect(),
        walkin: vars.walkin.iter().map(|row| row.iter().map(|&v| out.flag(v)).collect()).collect(),
    }
}

/// Walk-in variable of origin `v` for facility `k`, if `k` is in its list.
pub fn walkin_var(inst: &Instance, vars: &FirstStageVars, v: usize, k: Facility) -> Option<VarId> {
    inst.origins[v].consideration.iter().position(|c| c.facility == k).map(|i| vars.walkin[v][i])
}
