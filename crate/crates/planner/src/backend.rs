//! MILP backends: HiGHS (default) and microlp.

use std::collections::BTreeMap;
use std::time::Duration;

use highs::{HighsModelStatus, RowProblem};
use mmu_core::milp::{LinearModel, MilpError, MilpSolver, Sense, SolveConfig, SolveOutcome, SolveStatus, VarKind};

/// Environment variable selecting the backend (`highs` or `microlp`).
pub const BACKEND_ENV: &str = "MMU_BACKEND";

/// Sum duplicate variable references and drop zero coefficients.
fn merged_terms(terms: &[(mmu_core::milp::VarId, f64)]) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, c) in terms {
        *acc.entry(v.0).or_insert(0.0) += c;
    }
    acc.into_iter().filter(|(_, c)| *c != 0.0).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HighsSolver;

impl HighsSolver {
    fn run(model: &LinearModel, config: &SolveConfig, presolve: bool) -> Result<SolveOutcome, MilpError> {
        let mut pb = RowProblem::new();
        let cols: Vec<_> = model
            .vars
            .iter()
            .map(|v| match v.kind {
                VarKind::Continuous => pb.add_column(v.objective, v.lo..=v.hi),
                VarKind::Integer | VarKind::Binary => pb.add_integer_column(v.objective, v.lo..=v.hi),
            })
            .collect();
        for row in &model.rows {
            let (lo, hi) = row.bounds();
            let terms: Vec<_> = merged_terms(&row.terms).into_iter().map(|(i, c)| (cols[i], c)).collect();
            pb.add_row(lo..=hi, &terms);
        }
        let sense = match model.sense {
            Sense::Minimize => highs::Sense::Minimise,
            Sense::Maximize => highs::Sense::Maximise,
        };
        let mut m = pb.try_optimise(sense).map_err(|s| MilpError::Backend(format!("highs setup: {s:?}")))?;
        m.make_quiet();
        m.set_option("mip_rel_gap", config.mip_gap);
        m.set_option("threads", config.threads.max(1) as i32);
        if let Some(t) = config.time_limit_secs {
            m.set_option("time_limit", t);
        }
        if !presolve {
            m.set_option("presolve", "off");
        }
        let solved = m.try_solve().map_err(|s| MilpError::Backend(format!("highs solve: {s:?}")))?;
        let values = || solved.get_solution().columns().to_vec();
        let out = match solved.status() {
            HighsModelStatus::Optimal => {
                SolveOutcome { status: SolveStatus::Optimal, objective: solved.objective_value(), values: values(), gap: solved.mip_gap().max(0.0) }
            }
            HighsModelStatus::ModelEmpty => {
                SolveOutcome { status: SolveStatus::Optimal, objective: 0.0, values: vec![0.0; model.vars.len()], gap: 0.0 }
            }
            HighsModelStatus::Infeasible => SolveOutcome { status: SolveStatus::Infeasible, objective: f64::NAN, values: vec![], gap: f64::INFINITY },
            HighsModelStatus::Unbounded => SolveOutcome { status: SolveStatus::Unbounded, objective: f64::NAN, values: vec![], gap: f64::INFINITY },
            HighsModelStatus::UnboundedOrInfeasible if presolve => return Self::run(model, config, false),
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => {
                let feasible = solved.primal_solution_status() == highs::HighsSolutionStatus::Feasible;
                SolveOutcome {
                    status: SolveStatus::Limit,
                    objective: if feasible { solved.objective_value() } else { f64::NAN },
                    values: if feasible { values() } else { vec![] },
                    gap: solved.mip_gap(),
                }
            }
            other => return Err(MilpError::Backend(format!("highs status {other:?}"))),
        };
        Ok(out)
    }
}

impl MilpSolver for HighsSolver {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve(&self, model: &LinearModel, config: &SolveConfig) -> Result<SolveOutcome, MilpError> {
        model.check()?;
        let start = std::time::Instant::now();
        let out = Self::run(model, config, true);
        log::debug!(
            "highs: {} vars, {} rows, {:?} in {:.3}s",
            model.vars.len(),
            model.rows.len(),
            out.as_ref().map(|o| o.status),
            start.elapsed().as_secs_f64()
        );
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MicrolpSolver;

impl MilpSolver for MicrolpSolver {
    fn name(&self) -> &str {
        "microlp"
    }

    fn solve(&self, model: &LinearModel, config: &SolveConfig) -> Result<SolveOutcome, MilpError> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem};
        model.check()?;
        let dir = match model.sense {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        let mut pb = Problem::new(dir);
        let vars: Vec<_> = model
            .vars
            .iter()
            .map(|v| match v.kind {
                VarKind::Continuous => pb.add_var(v.objective, (v.lo, v.hi)),
                VarKind::Binary if v.lo <= 0.0 && v.hi >= 1.0 => pb.add_binary_var(v.objective),
                VarKind::Integer | VarKind::Binary => {
                    let clamp = |x: f64| if x.is_finite() { x.round().clamp(i32::MIN as f64, i32::MAX as f64) as i32 } else if x > 0.0 { i32::MAX } else { i32::MIN };
                    pb.add_integer_var(v.objective, (clamp(v.lo), clamp(v.hi)))
                }
            })
            .collect();
        for row in &model.rows {
            let terms: Vec<_> = merged_terms(&row.terms).into_iter().map(|(i, c)| (vars[i], c)).collect();
            let op = match row.sense {
                mmu_core::milp::RowSense::Le => ComparisonOp::Le,
                mmu_core::milp::RowSense::Ge => ComparisonOp::Ge,
                mmu_core::milp::RowSense::Eq => ComparisonOp::Eq,
            };
            pb.add_constraint(terms.into_iter().collect::<microlp::LinearExpr>(), op, row.rhs);
        }
        let mut options = microlp::SolveOptions::default();
        options.time_limit = config.time_limit_secs.map(Duration::from_secs_f64);
        options.mip_gap = config.mip_gap;
        match pb.solve_with(options) {
            Ok(microlp::SolveOutcome::Solution(sol)) => {
                let values = vars.iter().map(|&v| sol.var_value(v)).collect();
                let status = match sol.status() {
                    microlp::SolutionStatus::Optimal => SolveStatus::Optimal,
                    _ if sol.gap().is_some_and(|g| g <= config.mip_gap) => SolveStatus::Optimal,
                    _ => SolveStatus::Limit,
                };
                Ok(SolveOutcome { status, objective: sol.objective(), values, gap: sol.gap().unwrap_or(0.0) })
            }
            Ok(microlp::SolveOutcome::Interrupted(_)) => {
                Ok(SolveOutcome { status: SolveStatus::Limit, objective: f64::NAN, values: vec![], gap: f64::INFINITY })
            }
            Err(microlp::Error::Infeasible) => {
                Ok(SolveOutcome { status: SolveStatus::Infeasible, objective: f64::NAN, values: vec![], gap: f64::INFINITY })
            }
            Err(microlp::Error::Unbounded) => {
                Ok(SolveOutcome { status: SolveStatus::Unbounded, objective: f64::NAN, values: vec![], gap: f64::INFINITY })
            }
            Err(e) => Err(MilpError::Backend(format!("microlp: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Highs,
    Microlp,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "highs" => Ok(Self::Highs),
            "microlp" => Ok(Self::Microlp),
            other => Err(format!("unknown backend `{other}` (expected highs or microlp)")),
        }
    }
}

pub fn solver_for(kind: BackendKind) -> Box<dyn MilpSolver + Send + Sync> {
    match kind {
        BackendKind::Highs => Box::new(HighsSolver),
        BackendKind::Microlp => Box::new(MicrolpSolver),
    }
}

/// Backend named by `MMU_BACKEND`, HiGHS when unset.
pub fn solver_from_env() -> Result<Box<dyn MilpSolver + Send + Sync>, String> {
    match std::env::var(BACKEND_ENV) {
        Ok(s) if !s.trim().is_empty() => Ok(solver_for(s.parse()?)),
        _ => Ok(solver_for(BackendKind::Highs)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmu_core::milp::RowSense;

    fn knapsack() -> LinearModel {
        // max 5a + 4b + 3c, 2a + 3b + c <= 5, binaries
        let mut m = LinearModel::new(Sense::Maximize);
        let a = m.add_var("a", VarKind::Binary, 0.0, 1.0, 5.0);
        let b = m.add_var("b", VarKind::Binary, 0.0, 1.0, 4.0);
        let c = m.add_var("c", VarKind::Binary, 0.0, 1.0, 3.0);
        m.add_linear_constraint("cap", vec![(a, 2.0), (b, 3.0), (c, 1.0)], RowSense::Le, 5.0);
        m
    }

    #[test]
    fn both_backends_solve_knapsack() {
        for s in [solver_for(BackendKind::Highs), solver_for(BackendKind::Microlp)] {
            let out = s.solve(&knapsack(), &SolveConfig::default()).unwrap();
            assert_eq!(out.status, SolveStatus::Optimal, "{}", s.name());
            assert_eq!(out.objective.round() as i64, 9, "{}", s.name());
        }
    }

    #[test]
    fn infeasible_is_reported() {
        let mut m = LinearModel::new(Sense::Minimize);
        let x = m.add_var("x", VarKind::Integer, 0.0, 3.0, 1.0);
        m.add_linear_constraint("r", vec![(x, 1.0)], RowSense::Ge, 4.0);
        for s in [solver_for(BackendKind::Highs), solver_for(BackendKind::Microlp)] {
            assert_eq!(s.solve(&m, &SolveConfig::default()).unwrap().status, SolveStatus::Infeasible, "{}", s.name());
        }
    }

    #[test]
    fn duplicate_terms_are_merged() {
        let mut m = LinearModel::new(Sense::Minimize);
        let x = m.add_var("x", VarKind::Continuous, 0.0, 10.0, 1.0);
        m.add_linear_constraint("r", vec![(x, 1.0), (x, 1.0)], RowSense::Ge, 4.0);
        for s in [solver_for(BackendKind::Highs), solver_for(BackendKind::Microlp)] {
            let out = s.solve(&m, &SolveConfig::default()).unwrap();
            assert!((out.value(mmu_core::milp::VarId(0)) - 2.0).abs() < 1e-6, "{}", s.name());
        }
    }

    #[test]
    fn backend_names_parse() {
        assert_eq!("HiGHS".parse::<BackendKind>().unwrap(), BackendKind::Highs);
        assert!("cplex".parse::<BackendKind>().is_err());
    }
}
