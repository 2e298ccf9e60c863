//! Robust counterparts.
//!
//! Interval uncertainty reduces to the deterministic loop on the upper
//! bounds. Budgeted uncertainty bounds total steerable and walk-in demand
//! by Γ1 and Γ2; its master carries one block of walk-in dual variables per
//! registered origin subset, and separation is a small MIP.

use crate::benders::{
    add_walkin_dual_block, build_master_with, check_status, complete_plan, solve_benders, subset_flags, subset_indices,
    Assumption1Mode, BendersOptions, DualForm, IterationRecord, MasterModel, SeparationResult, SolveReport, Witness,
};
use crate::formulation::read_first_stage;
use crate::milp::{LinearModel, MilpSolver, RowSense, Sense, SolveConfig, SolveStatus, VarId, VarKind};
use crate::model::{
    validate_instance, Candidate, DemandMode, DemandOrigin, Facility, Instance, Plan, Practice, UncertaintyModel,
};
use crate::SolveError;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

/// Largest origin count the exhaustive separation accepts.
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeparationError {
    #[error("instance has no budgeted uncertainty")]
    NotBudgeted,
    #[error("exhaustive separation limited to {BRUTE_FORCE_LIMIT} origins, got {0}")]
    TooLarge(usize),
    #[error("subset {0} already registered")]
    DuplicateSubset(String),
}

fn budgets(inst: &Instance) -> Result<(i64, i64), SeparationError> {
    match inst.uncertainty {
        UncertaintyModel::Budgeted { gamma_steerable, gamma_walkin } => Ok((gamma_steerable as i64, gamma_walkin as i64)),
        _ => Err(SeparationError::NotBudgeted),
    }
}

/// max Σ_{v∈U} ξ_v over the budgeted steerable set:
/// min{Σ_U β_v, Γ1 − Σ_{V∖U} α_v}.
pub fn worst_case_steerable(inst: &Instance, subset: &[bool]) -> i64 {
    let (g1, _) = budgets(inst).unwrap_or((i64::MAX, 0));
    let mut inside = 0i64;
    let mut outside = 0i64;
    for (v, o) in inst.origins.iter().enumerate() {
        if subset[v] {
            inside += o.steerable_hi as i64;
        } else {
            outside += o.steerable_lo as i64;
        }
    }
    inside.min(g1.saturating_sub(outside))
}

/// max walk-ins landing in the steerable neighbourhood of `subset`:
/// min{Σ_{D} τ_v, Γ2 − Σ_{V∖D} σ_v} with D the origins routed into it.
pub fn worst_case_walkin(inst: &Instance, subset: &[bool], routes: &[Option<Facility>]) -> i64 {
    let reach = inst.steerable_neighborhood(subset);
    worst_case_walkin_into(inst, &reach, routes)
}

/// Same bound for an explicit facility set (flags over facility indices).
pub fn worst_case_walkin_into(inst: &Instance, facilities: &[bool], routes: &[Option<Facility>]) -> i64 {
    let (_, g2) = budgets(inst).unwrap_or((0, i64::MAX));
    let mut inside = 0i64;
    let mut outside = 0i64;
    for (v, o) in inst.origins.iter().enumerate() {
        if routes[v].is_some_and(|k| facilities[inst.facility_index(k)]) {
            inside += o.walkin_hi as i64;
        } else {
            outside += o.walkin_lo as i64;
        }
    }
    inside.min(g2.saturating_sub(outside))
}

/// Slack of the robust cut of `subset`: capacity of its neighbourhood
/// minus worst-case steerable and walk-in load.
pub fn robust_cut_slack(inst: &Instance, subset: &[bool], sessions: &[u64], routes: &[Option<Facility>]) -> i64 {
    let reach = inst.steerable_neighborhood(subset);
    let capacity: i64 = inst.facilities().filter(|&k| reach[inst.facility_index(k)]).map(|k| inst.capacity(k, sessions)).sum();
    capacity - worst_case_steerable(inst, subset) - worst_case_walkin_into(inst, &reach, routes)
}

/// Interval counterpart: the deterministic loop on upper-bound demands.
pub fn solve_interval(
    inst: &Instance,
    options: &BendersOptions,
    solver: &dyn MilpSolver,
    config: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    solve_benders(&inst.worst_case_copy(), options, solver, config).map_err(|e| match e {
        SolveError::Infeasible => SolveError::RobustInfeasible,
        other => other,
    })
}

/// Walk-in dual variables of one registered subset.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBlock {
    pub eps: Vec<Option<VarId>>,
    pub kappa: Vec<Option<VarId>>,
    pub rho: VarId,
    /// Row index of the capacity row followed by the per-origin rows.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedMaster {
    pub master: MasterModel,
    pub blocks: BTreeMap<Vec<usize>, DualBlock>,
}

/// First-stage rows plus budgeted Assumption-1 rows; no cut blocks yet.
pub fn build_budgeted_master(inst: &Instance) -> Result<BudgetedMaster, SeparationError> {
    build_budgeted_master_with(inst, DualForm::default())
}

pub fn build_budgeted_master_with(inst: &Instance, form: DualForm) -> Result<BudgetedMaster, SeparationError> {
    budgets(inst)?;
    Ok(BudgetedMaster { master: build_master_with(inst, Assumption1Mode::Budgeted, form), blocks: BTreeMap::new() })
}

/// Register `subset`: fresh dual block, the robust capacity row and one
/// row per origin.
pub fn add_cut_block(bm: &mut BudgetedMaster, inst: &Instance, subset: &[usize]) -> Result<(), SeparationError> {
    let mut key = subset.to_vec();
    key.sort_unstable();
    key.dedup();
    if bm.blocks.contains_key(&key) {
        return Err(SeparationError::DuplicateSubset(crate::benders::describe_subset(inst, &key)));
    }
    let flags = subset_flags(inst.origins.len(), &key);
    let reach = inst.steerable_neighborhood(&flags);
    let tag = format!("U{}", bm.blocks.len());
    let m = &mut bm.master;
    let (eps, kappa, rho, dual_rows, mut terms) = add_walkin_dual_block(&mut m.model, inst, &m.vars, &tag, &reach, m.dual_form);
    let mut rhs = -(worst_case_steerable(inst, &flags) as f64);
    for k in inst.facilities().filter(|&k| reach[inst.facility_index(k)]) {
        match k {
            Facility::Site(l) => terms.push((m.vars.sessions[l], -(inst.session_capacity as f64))),
            Facility::Practice(p) => rhs += inst.practices[p].capacity as f64,
        }
    }
    let row = m.model.add_linear_constraint(format!("robust_cut_{}", tag), terms, RowSense::Le, rhs);
    let mut rows = vec![row];
    rows.extend(dual_rows);
    m.pool.insert(key.clone());
    bm.blocks.insert(key, DualBlock { eps, kappa, rho, rows });
    Ok(())
}

/// Optimal values of the separation MIP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationWitness {
    pub o: Vec<bool>,
    pub r: Vec<bool>,
    pub n: Vec<bool>,
    pub d1: i64,
    pub d2: i64,
    pub objective: i64,
}

/// Build the separation MIP for fixed (x, w). Returns the model and the
/// handles of (o, r, n, d1, d2).
pub fn build_separation_mip(
    inst: &Instance,
    sessions: &[u64],
    routes: &[Option<Facility>],
) -> Result<(LinearModel, Vec<VarId>, Vec<VarId>, Vec<VarId>, VarId, VarId), SeparationError> {
    let (g1, g2) = budgets(inst)?;
    let mut m = LinearModel::new(Sense::Maximize);
    let o: Vec<VarId> = inst.origins.iter().map(|v| m.add_var(format!("o_{}", v.id), VarKind::Binary, 0.0, 1.0, 0.0)).collect();
    let r: Vec<VarId> = inst
        .origins
        .iter()
        .zip(routes)
        .map(|(v, route)| {
            let hi = if route.is_some() { 1.0 } else { 0.0 };
            m.add_var(format!("r_{}", v.id), VarKind::Binary, 0.0, hi, 0.0)
        })
        .collect();
    let n: Vec<VarId> = inst
        .facilities()
        .map(|k| m.add_var(format!("n_{}", inst.facility_id(k)), VarKind::Binary, 0.0, 1.0, -(inst.capacity(k, sessions) as f64)))
        .collect();
    let d1 = m.add_var("d1", VarKind::Continuous, 0.0, f64::INFINITY, 1.0);
    let d2 = m.add_var("d2", VarKind::Continuous, 0.0, f64::INFINITY, 1.0);

    for (v, origin) in inst.origins.iter().enumerate() {
        for k in origin.steerable_targets() {
            m.add_linear_constraint(
                format!("reach_{}_{}", origin.id, inst.facility_id(k)),
                vec![(n[inst.facility_index(k)], 1.0), (o[v], -1.0)],
                RowSense::Ge,
                0.0,
            );
        }
    }
    for (v, route) in routes.iter().enumerate() {
        if let Some(k) = route {
            let mut terms = vec![(r[v], 1.0)];
            for (w, other) in inst.origins.iter().enumerate() {
                if other.steerable_targets().any(|f| f == *k) {
                    terms.push((o[w], -1.0));
                }
            }
            m.add_linear_constraint(format!("routed_{}", inst.origins[v].id), terms, RowSense::Le, 0.0);
        }
    }
    let sum_lo1: f64 = inst.origins.iter().map(|v| v.steerable_lo as f64).sum();
    let sum_lo2: f64 = inst.origins.iter().map(|v| v.walkin_lo as f64).sum();
    let mut hi1 = vec![(d1, 1.0)];
    let mut lo1 = vec![(d1, 1.0)];
    let mut hi2 = vec![(d2, 1.0)];
    let mut lo2 = vec![(d2, 1.0)];
    for (v, origin) in inst.origins.iter().enumerate() {
        hi1.push((o[v], -(origin.steerable_hi as f64)));
        lo1.push((o[v], -(origin.steerable_lo as f64)));
        hi2.push((r[v], -(origin.walkin_hi as f64)));
        lo2.push((r[v], -(origin.walkin_lo as f64)));
    }
    m.add_linear_constraint("d1_upper", hi1, RowSense::Le, 0.0);
    m.add_linear_constraint("d1_budget", lo1, RowSense::Le, g1 as f64 - sum_lo1);
    m.add_linear_constraint("d2_upper", hi2, RowSense::Le, 0.0);
    m.add_linear_constraint("d2_budget", lo2, RowSense::Le, g2 as f64 - sum_lo2);
    Ok((m, o, r, n, d1, d2))
}

/// Separation for the budgeted master via the MIP.
pub fn separate_budgeted_mip(
    inst: &Instance,
    sessions: &[u64],
    routes: &[Option<Facility>],
    solver: &dyn MilpSolver,
    config: &SolveConfig,
) -> Result<SeparationResult, SolveError> {
    let (m, o, r, n, d1, d2) = build_separation_mip(inst, sessions, routes)?;
    let exact = SolveConfig { mip_gap: 0.0, ..*config };
    let out = solver.solve(&m, &exact)?;
    if out.status != SolveStatus::Optimal {
        return Err(SolveError::Unexpected("separation MIP not solved to optimality"));
    }
    let objective = libm::round(out.objective) as i64;
    let witness = SeparationWitness {
        o: o.iter().map(|&v| out.flag(v)).collect(),
        r: r.iter().map(|&v| out.flag(v)).collect(),
        n: n.iter().map(|&v| out.flag(v)).collect(),
        d1: out.int_value(d1),
        d2: out.int_value(d2),
        objective,
    };
    if objective <= 0 {
        return Ok(SeparationResult { violated: false, subset: Vec::new(), violation: -objective, witness: Witness::Mip(witness) });
    }
    let violation = robust_cut_slack(inst, &witness.o, sessions, routes);
    if violation >= 0 {
        return Err(SolveError::Unexpected("separation MIP subset does not violate its robust cut"));
    }
    Ok(SeparationResult { violated: true, subset: subset_indices(&witness.o), violation, witness: Witness::Mip(witness) })
}

/// Exhaustive separation over all 2^|V| subsets; the first subset of
/// maximum violation (in binary counting order) is returned.
pub fn separate_budgeted_bruteforce(
    inst: &Instance,
    sessions: &[u64],
    routes: &[Option<Facility>],
) -> Result<SeparationResult, SeparationError> {
    budgets(inst)?;
    let n = inst.origins.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(SeparationError::TooLarge(n));
    }
    let mut best = (0i64, 0u32);
    for mask in 0u32..(1u32 << n) {
        let flags: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
        let slack = robust_cut_slack(inst, &flags, sessions, routes);
        if slack < best.0 {
            best = (slack, mask);
        }
    }
    let flags: Vec<bool> = (0..n).map(|v| best.1 >> v & 1 == 1).collect();
    Ok(SeparationResult { violated: best.0 < 0, subset: subset_indices(&flags), violation: best.0, witness: Witness::None })
}

/// Constraint generation for budgeted uncertainty.
pub fn solve_budgeted(
    inst: &Instance,
    max_iterations: Option<usize>,
    solver: &dyn MilpSolver,
    config: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    solve_budgeted_with(inst, DualForm::default(), max_iterations, solver, config)
}

pub fn solve_budgeted_with(
    inst: &Instance,
    form: DualForm,
    max_iterations: Option<usize>,
    solver: &dyn MilpSolver,
    config: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    let problems = validate_instance(inst);
    if let Some(p) = problems.into_iter().find(|p| p.starts_with("empty uncertainty set")) {
        return Err(SolveError::InvalidInstance(p));
    }
    let mut bm = build_budgeted_master_with(inst, form)?;
    let mut trace = Vec::new();
    let mut iteration = 0;
    loop {
        iteration += 1;
        if max_iterations.is_some_and(|m| iteration > m) {
            return Err(SolveError::Limit { iterations: iteration - 1 });
        }
        let out = solver.solve(&bm.master.model, config)?;
        check_status(out.status, iteration, SolveError::RobustInfeasible)?;
        let fs = read_first_stage(&bm.master.vars, &out);
        let plan = fs.to_plan(inst);
        let sep = separate_budgeted_mip(inst, &plan.sessions, &plan.walkin_route, solver, config)?;
        let value = match &sep.witness {
            Witness::Mip(w) => w.objective,
            _ => 0,
        };
        let record = IterationRecord {
            iteration,
            objective: fs.cost(inst),
            violated_set_size: sep.subset.len(),
            slack: if sep.violated { sep.violation } else { 0 },
            separation_value: Some(value),
            plan: plan.clone(),
        };
        log::info!("{}", record);
        trace.push(record);
        if !sep.violated {
            let plan = complete_plan(inst, plan.clone(), DemandMode::Nominal).unwrap_or(plan);
            return Ok(SolveReport {
                plan,
                objective: fs.cost(inst),
                iterations: iteration,
                cuts: bm.blocks.len(),
                proven_optimal: true,
                trace,
            });
        }
        add_cut_block(&mut bm, inst, &sep.subset)?;
    }
}

/// Separation instance encoding subset sum (A, B): origin v may send up to
/// 2·a_v steerable patients to its own practice (capacity a_v) or to a
/// shared practice (capacity B − 1), with steerable budget 2B. Some subset
/// violates its robust cut iff some sub-multiset of A sums to B.
///
/// The budget is capped at Σ 2·a_v, which leaves every worst-case value
/// unchanged and keeps the instance within the validated budget range.
pub fn build_subsetsum_reduction(a: &[u64], b: u64) -> (Instance, Plan) {
    let n = a.len();
    let mut inst = Instance { session_cost: 1, session_capacity: 1, ..Instance::default() };
    for (v, &av) in a.iter().enumerate() {
        inst.practices.push(Practice { id: format!("p{}", v + n + 1), capacity: av, coord: Default::default() });
    }
    inst.practices.push(Practice { id: format!("p{}", 2 * n + 1), capacity: b.saturating_sub(1), coord: Default::default() });
    for (v, &av) in a.iter().enumerate() {
        let consideration = vec![
            Candidate { facility: Facility::Practice(v), distance_m: 1000 },
            Candidate { facility: Facility::Practice(n), distance_m: 2000 },
        ];
        inst.origins.push(DemandOrigin::new(format!("v{}", v + 1), 0, 0, consideration).with_bounds((0, 2 * av), (0, 0)));
    }
    let total: u64 = a.iter().map(|&x| 2 * x).sum();
    inst.uncertainty = UncertaintyModel::Budgeted { gamma_steerable: (2 * b).min(total), gamma_walkin: 0 };
    let plan = Plan::empty(&inst);
    (inst, plan)
}
