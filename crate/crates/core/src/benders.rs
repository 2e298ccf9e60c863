//! Benders master, feasibility cuts over origin subsets, min-cut and LP
//! separation, and the cut loop.

use crate::formulation::{add_first_stage, read_first_stage, walkin_var, FirstStageVars};
use crate::maxflow::{build_benders_network, max_flow, recover_assignment, residual_capacities, FlowError};
use crate::milp::{LinearModel, MilpSolver, RowSense, Sense, SolveConfig, SolveStatus, VarId, VarKind};
use crate::model::{DemandMode, Facility, Instance, Plan};
use crate::SolveError;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use crate::formulation::FirstStage;

/// Result of a solve entry point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub plan: Plan,
    /// Formulation objective of the returned first stage.
    pub objective: u64,
    /// Number of (master) solves.
    pub iterations: usize,
    /// Number of cuts or cut blocks added.
    pub cuts: usize,
    pub proven_optimal: bool,
    pub trace: Vec<IterationRecord>,
}

/// One round of a cut loop. `Display` gives the log line format.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: u64,
    /// Size of the separated subset, 0 when no violation was found.
    pub violated_set_size: usize,
    pub slack: i64,
    /// Separation objective (robust loops only).
    pub separation_value: Option<i64>,
    /// Master first stage of this round, walk-ins normalized.
    pub plan: Plan,
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} obj={} violated_U_size={} slack={}",
            self.iteration, self.objective, self.violated_set_size, self.slack
        )?;
        if let Some(s) = self.separation_value {
            write!(f, " sep_value={}", s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Separation {
    #[default]
    MinCut,
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialCuts {
    #[default]
    Empty,
    /// One cut per origin with positive steerable demand.
    Singletons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BendersOptions {
    pub separation: Separation,
    pub initial_cuts: InitialCuts,
    pub max_iterations: Option<usize>,
}

/// How walk-in demand is bounded by the Assumption-1 rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption1Mode {
    Deterministic,
    Interval,
    Budgeted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    None,
    /// Source side of the minimum cut (network node flags).
    CutSide(Vec<bool>),
    /// Optimal values of the separation LP.
    Lp { origins: Vec<f64>, facilities: Vec<f64>, objective: f64 },
    Mip(crate::robust::SeparationWitness),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    pub violated: bool,
    /// Sorted origin indices.
    pub subset: Vec<usize>,
    /// Cut slack; negative iff violated.
    pub violation: i64,
    pub witness: Witness,
}

impl SeparationResult {
    pub fn feasible(witness: Witness) -> Self {
        Self { violated: false, subset: Vec::new(), violation: 0, witness }
    }
}

pub fn subset_flags(n: usize, subset: &[usize]) -> Vec<bool> {
    let mut flags = vec![false; n];
    subset.iter().for_each(|&v| flags[v] = true);
    flags
}

pub fn subset_indices(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Master problem: first-stage rows, Assumption-1 rows and the cut pool.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterModel {
    pub model: LinearModel,
    pub vars: FirstStageVars,
    pub pool: BTreeSet<Vec<usize>>,
    pub dual_form: DualForm,
}

/// Master skeleton with the Assumption-1 rows of `mode`.
pub fn build_master(inst: &Instance, mode: Assumption1Mode) -> MasterModel {
    build_master_with(inst, mode, DualForm::default())
}

pub fn build_master_with(inst: &Instance, mode: Assumption1Mode, dual_form: DualForm) -> MasterModel {
    let mut model = LinearModel::new(Sense::Minimize);
    let vars = add_first_stage(&mut model, inst);
    let mut master = MasterModel { model, vars, pool: BTreeSet::new(), dual_form };
    enforce_assumption1(&mut master, inst, mode);
    master
}

fn capacity_terms(inst: &Instance, vars: &FirstStageVars, k: Facility) -> (Vec<(VarId, f64)>, f64) {
    match k {
        Facility::Site(l) => (vec![(vars.sessions[l], inst.session_capacity as f64)], 0.0),
        Facility::Practice(p) => (Vec::new(), inst.practices[p].capacity as f64),
    }
}

/// Shape of the walk-in dual blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualForm {
    /// One (ε, κ) pair and one row per origin.
    Full,
    /// Origins without a walk-in variable into the facility set are folded
    /// into the coefficient of ρ (each contributes −σ_v ρ at optimality).
    #[default]
    Reduced,
}

/// Dual variables bounding the worst-case walk-in load on a facility set:
/// Σ_v (τ_v ε_v − σ_v κ_v) + Γ2 ρ, with ε_v − κ_v + ρ ≥ Σ_{k∈set} w_vk.
/// Returns (ε, κ, ρ, row indices, objective terms); ε and κ are `None` for
/// origins folded away by [`DualForm::Reduced`].
#[allow(clippy::type_complexity)]
pub(crate) fn add_walkin_dual_block(
    model: &mut LinearModel,
    inst: &Instance,
    vars: &FirstStageVars,
    tag: &str,
    facilities: &[bool],
    form: DualForm,
) -> (Vec<Option<VarId>>, Vec<Option<VarId>>, VarId, Vec<usize>, Vec<(VarId, f64)>) {
    let gamma = match inst.uncertainty {
        crate::model::UncertaintyModel::Budgeted { gamma_walkin, .. } => gamma_walkin,
        _ => inst.origins.iter().map(|o| o.walkin_hi).sum(),
    };
    let n = inst.origins.len();
    let rho = model.add_var(format!("rho_{}", tag), VarKind::Continuous, 0.0, f64::INFINITY, 0.0);
    let mut eps = vec![None; n];
    let mut kappa = vec![None; n];
    let mut rows = Vec::new();
    let mut objective = Vec::new();
    let mut rho_coef = gamma as f64;
    for (v, o) in inst.origins.iter().enumerate() {
        let routed: Vec<VarId> = o
            .walkin_targets()
            .filter(|&k| facilities[inst.facility_index(k)])
            .filter_map(|k| walkin_var(inst, vars, v, k))
            .collect();
        if routed.is_empty() && form == DualForm::Reduced {
            rho_coef -= o.walkin_lo as f64;
            continue;
        }
        let e = model.add_var(format!("eps_{}_{}", tag, o.id), VarKind::Continuous, 0.0, f64::INFINITY, 0.0);
        let k = model.add_var(format!("kappa_{}_{}", tag, o.id), VarKind::Continuous, 0.0, f64::INFINITY, 0.0);
        let mut terms = vec![(e, 1.0), (k, -1.0), (rho, 1.0)];
        terms.extend(routed.iter().map(|&w| (w, -1.0)));
        rows.push(model.add_linear_constraint(format!("dual_{}_{}", tag, o.id), terms, RowSense::Ge, 0.0));
        objective.push((e, o.walkin_hi as f64));
        objective.push((k, -(o.walkin_lo as f64)));
        eps[v] = Some(e);
        kappa[v] = Some(k);
    }
    objective.push((rho, rho_coef));
    (eps, kappa, rho, rows, objective)
}

/// Add rows keeping every residual capacity nonnegative under the
/// worst-case walk-ins of `mode`.
pub fn enforce_assumption1(master: &mut MasterModel, inst: &Instance, mode: Assumption1Mode) {
    for k in inst.facilities() {
        let (mut cap, rhs) = capacity_terms(inst, &master.vars, k);
        let id = inst.facility_id(k);
        match mode {
            Assumption1Mode::Deterministic | Assumption1Mode::Interval => {
                let mut terms: Vec<(VarId, f64)> = Vec::new();
                for (v, o) in inst.origins.iter().enumerate() {
                    let load = if mode == Assumption1Mode::Interval { o.walkin_hi } else { o.walkin };
                    if load > 0 {
                        if let Some(w) = walkin_var(inst, &master.vars, v, k) {
                            terms.push((w, load as f64));
                        }
                    }
                }
                cap.iter_mut().for_each(|t| t.1 = -t.1);
                terms.extend(cap);
                master.model.add_linear_constraint(format!("walkin_cap_{}", id), terms, RowSense::Le, rhs);
            }
            Assumption1Mode::Budgeted => {
                let mut only = vec![false; inst.num_facilities()];
                only[inst.facility_index(k)] = true;
                let (_, _, _, _, mut terms) =
                    add_walkin_dual_block(&mut master.model, inst, &master.vars, &format!("a1_{}", id), &only, master.dual_form);
                terms.extend(cap.into_iter().map(|(v, c)| (v, -c)));
                master.model.add_linear_constraint(format!("walkin_cap_{}", id), terms, RowSense::Le, rhs);
            }
        }
    }
}

/// Append the feasibility cut of `subset` (nominal demands of `inst`).
/// Returns `false` if the subset is already registered.
pub fn add_feasibility_cut(master: &mut MasterModel, inst: &Instance, subset: &[usize]) -> bool {
    let mut key = subset.to_vec();
    key.sort_unstable();
    key.dedup();
    if !master.pool.insert(key.clone()) {
        return false;
    }
    let flags = subset_flags(inst.origins.len(), &key);
    let reach = inst.steerable_neighborhood(&flags);
    let mut terms = Vec::new();
    let mut rhs: f64 = key.iter().map(|&v| inst.origins[v].steerable as f64).sum();
    for k in inst.facilities() {
        if !reach[inst.facility_index(k)] {
            continue;
        }
        match k {
            Facility::Site(l) => terms.push((master.vars.sessions[l], inst.session_capacity as f64)),
            Facility::Practice(p) => rhs -= inst.practices[p].capacity as f64,
        }
        for (v, o) in inst.origins.iter().enumerate() {
            if o.walkin > 0 {
                if let Some(w) = walkin_var(inst, &master.vars, v, k) {
                    terms.push((w, -(o.walkin as f64)));
                }
            }
        }
    }
    let name = format!("cut_{}", master.pool.len());
    master.model.add_linear_constraint(name, terms, RowSense::Ge, rhs);
    true
}

/// Right-hand side minus left-hand side of the feasibility cut of `subset`.
pub fn evaluate_cut(
    inst: &Instance,
    subset: &[bool],
    sessions: &[u64],
    routes: &[Option<Facility>],
    mode: DemandMode<'_>,
) -> i64 {
    let reach = inst.steerable_neighborhood(subset);
    let capacity: i64 = inst
        .facilities()
        .filter(|&k| reach[inst.facility_index(k)])
        .map(|k| inst.capacity(k, sessions))
        .sum();
    let steerable: i64 = (0..inst.origins.len()).filter(|&v| subset[v]).map(|v| mode.steerable(inst, v) as i64).sum();
    let walkin: i64 = routes
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_some_and(|k| reach[inst.facility_index(k)]))
        .map(|(v, _)| mode.walkin(inst, v) as i64)
        .sum();
    capacity - steerable - walkin
}

/// Min-cut separation: U is the origin part of the minimum cut's source side.
pub fn separate_mincut(
    inst: &Instance,
    sessions: &[u64],
    routes: &[Option<Facility>],
    mode: DemandMode<'_>,
) -> Result<SeparationResult, FlowError> {
    let residuals = residual_capacities(inst, sessions, routes, mode);
    let net = build_benders_network(inst, &residuals, mode)?;
    let mf = max_flow(&net);
    if mf.value >= net.total_demand {
        return Ok(SeparationResult::feasible(Witness::CutSide(mf.source_side)));
    }
    let flags: Vec<bool> = (0..inst.origins.len()).map(|v| mf.source_side[1 + v]).collect();
    let violation = evaluate_cut(inst, &flags, sessions, routes, mode);
    debug_assert!(violation < 0);
    Ok(SeparationResult { violated: true, subset: subset_indices(&flags), violation, witness: Witness::CutSide(mf.source_side) })
}

/// LP separation: max Σ d_v o_v − Σ γ_k n_k over n_k ≥ o_v (k reachable
/// from v), all variables in [0, 1].
pub fn separate_lp(
    inst: &Instance,
    sessions: &[u64],
    routes: &[Option<Facility>],
    mode: DemandMode<'_>,
    solver: &dyn MilpSolver,
    config: &SolveConfig,
) -> Result<SeparationResult, SolveError> {
    let residuals = residual_capacities(inst, sessions, routes, mode);
    if let Some(&idx) = residuals.breaches().first() {
        return Err(FlowError::NegativeResidual { facility: inst.facility_at(idx), residual: residuals.values[idx] }.into());
    }
    let mut lp = LinearModel::new(Sense::Maximize);
    let o: Vec<VarId> = (0..inst.origins.len())
        .map(|v| lp.add_var(format!("o_{}", inst.origins[v].id), VarKind::Continuous, 0.0, 1.0, mode.steerable(inst, v) as f64))
        .collect();
    let n: Vec<VarId> = inst
        .facilities()
        .map(|k| lp.add_var(format!("n_{}", inst.facility_id(k)), VarKind::Continuous, 0.0, 1.0, -(residuals.get(inst, k) as f64)))
        .collect();
    for (v, origin) in inst.origins.iter().enumerate() {
        for k in origin.steerable_targets() {
            lp.add_linear_constraint(
                format!("reach_{}_{}", origin.id, inst.facility_id(k)),
                vec![(n[inst.facility_index(k)], 1.0), (o[v], -1.0)],
                RowSense::Ge,
                0.0,
            );
        }
    }
    let out = solver.solve(&lp, config)?;
    if out.status != SolveStatus::Optimal {
        return Err(SolveError::Unexpected("separation LP not solved to optimality"));
    }
    let witness = Witness::Lp {
        origins: o.iter().map(|&v| out.value(v)).collect(),
        facilities: n.iter().map(|&v| out.value(v)).collect(),
        objective: out.objective,
    };
    if out.objective <= 0.5 {
        return Ok(SeparationResult::feasible(witness));
    }
    let flags: Vec<bool> = o.iter().map(|&v| out.value(v) >= 0.5).collect();
    let violation = evaluate_cut(inst, &flags, sessions, routes, mode);
    if violation >= 0 {
        return Err(SolveError::Unexpected("separation LP subset does not violate its cut"));
    }
    Ok(SeparationResult { violated: true, subset: subset_indices(&flags), violation, witness })
}

/// Complete a first stage with a steerable assignment from a saturating flow.
pub fn complete_plan(inst: &Instance, mut plan: Plan, mode: DemandMode<'_>) -> Result<Plan, FlowError> {
    let residuals = residual_capacities(inst, &plan.sessions, &plan.walkin_route, mode);
    let net = build_benders_network(inst, &residuals, mode)?;
    let mf = max_flow(&net);
    plan.steerable_assign = Some(recover_assignment(&net, &mf)?);
    Ok(plan)
}

pub(crate) fn check_status(status: SolveStatus, iterations: usize, infeasible: SolveError) -> Result<(), SolveError> {
    match status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(infeasible),
        SolveStatus::Unbounded => Err(SolveError::Unexpected("master unbounded")),
        SolveStatus::Limit => Err(SolveError::Limit { iterations }),
    }
}

/// Cut loop: solve the master, separate, add one cut, repeat.
pub fn solve_benders(
    inst: &Instance,
    options: &BendersOptions,
    solver: &dyn MilpSolver,
    config: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    let mut master = build_master(inst, Assumption1Mode::Deterministic);
    if options.initial_cuts == InitialCuts::Singletons {
        for (v, o) in inst.origins.iter().enumerate() {
            if o.steerable > 0 {
                add_feasibility_cut(&mut master, inst, &[v]);
            }
        }
    }
    let mut trace = Vec::new();
    let mut iteration = 0;
    loop {
        iteration += 1;
        if options.max_iterations.is_some_and(|m| iteration > m) {
            return Err(SolveError::Limit { iterations: iteration - 1 });
        }
        let out = solver.solve(&master.model, config)?;
        check_status(out.status, iteration, SolveError::Infeasible)?;
        let fs = read_first_stage(&master.vars, &out);
        let plan = fs.to_plan(inst);
        let sep = match options.separation {
            Separation::MinCut => separate_mincut(inst, &plan.sessions, &plan.walkin_route, DemandMode::Nominal)?,
            Separation::Lp => separate_lp(inst, &plan.sessions, &plan.walkin_route, DemandMode::Nominal, solver, config)?,
        };
        let record = IterationRecord {
            iteration,
            objective: fs.cost(inst),
            violated_set_size: sep.subset.len(),
            slack: sep.violation,
            separation_value: None,
            plan: plan.clone(),
        };
        log::info!("{}", record);
        trace.push(record);
        if !sep.violated {
            let plan = complete_plan(inst, plan, DemandMode::Nominal)?;
            return Ok(SolveReport {
                plan,
                objective: fs.cost(inst),
                iterations: iteration,
                cuts: master.pool.len(),
                proven_optimal: true,
                trace,
            });
        }
        if !add_feasibility_cut(&mut master, inst, &sep.subset) {
            return Err(SolveError::Unexpected("separation returned an already registered subset"));
        }
    }
}

/// Human-readable subset, e.g. `{v1,v3}`.
pub fn describe_subset(inst: &Instance, subset: &[usize]) -> String {
    let ids: Vec<&str> = subset.iter().map(|&v| inst.origins[v].id.as_str()).collect();
    format!("{{{}}}", ids.join(","))
}
