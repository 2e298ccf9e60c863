//! Solve dispatch, parallel evaluation and parameter sweeps.

use std::str::FromStr;
use std::time::Instant;

use mmu_core::benders::{solve_benders, BendersOptions, Separation};
use mmu_core::deterministic::solve_compact;
use mmu_core::eval::{min_total_violations, EvaluationReport, Realization, ViolationRow};
use mmu_core::instgen::{generate_geometry, instance_from_history, simulate_weekly_demands, GeneratorConfig, GeneratorError};
use mmu_core::robust::{solve_budgeted, solve_interval};
use mmu_core::{Instance, MilpSolver, Plan, SolveConfig, SolveError, SolveReport};
use rayon::prelude::*;

use crate::report::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    DetCompact,
    DetBenders,
    Interval,
    Budgeted,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::DetCompact, ModelKind::DetBenders, ModelKind::Interval, ModelKind::Budgeted];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DetCompact => "det-compact",
            ModelKind::DetBenders => "det-benders",
            ModelKind::Interval => "interval",
            ModelKind::Budgeted => "budgeted",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| format!("unknown model `{s}` (expected det-compact, det-benders, interval or budgeted)"))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub separation: Separation,
    pub max_iterations: Option<usize>,
}

/// Solve one model on an instance.
pub fn solve_model(
    inst: &Instance,
    model: ModelKind,
    options: &RunOptions,
    solver: &dyn MilpSolver,
    config: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    let benders = BendersOptions { separation: options.separation, max_iterations: options.max_iterations, ..BendersOptions::default() };
    match model {
        ModelKind::DetCompact => solve_compact(inst, solver, config),
        ModelKind::DetBenders => solve_benders(inst, &benders, solver, config),
        ModelKind::Interval => solve_interval(inst, &benders, solver, config),
        ModelKind::Budgeted => solve_budgeted(inst, options.max_iterations, solver, config),
    }
}

/// Same rows as the sequential evaluator, realizations spread over the pool.
pub fn evaluate_parallel(inst: &Instance, plans: &[(String, Plan)], realizations: &[Realization]) -> EvaluationReport {
    let per_realization: Vec<Vec<u64>> = realizations
        .par_iter()
        .map(|r| plans.iter().map(|(_, p)| min_total_violations(inst, p, r)).collect())
        .collect();
    let mut rows = Vec::with_capacity(plans.len() * realizations.len());
    for (m, (name, _)) in plans.iter().enumerate() {
        for (r, v) in realizations.iter().zip(&per_realization) {
            rows.push(ViolationRow { model: name.clone(), realization_id: r.id, violations: v[m] });
        }
    }
    EvaluationReport::from_rows(inst, plans, rows)
}

/// Parse `a..b` (with a step) or a comma list.
pub fn parse_grid(spec: &str, step: f64) -> Result<Vec<f64>, String> {
    let bad = |s: &str| format!("cannot parse `{s}` as a number");
    if let Some((a, b)) = spec.split_once("..") {
        let a: f64 = a.trim().parse().map_err(|_| bad(a))?;
        let b: f64 = b.trim().parse().map_err(|_| bad(b))?;
        if !(step > 0.0) || b < a {
            return Err(format!("empty range `{spec}`"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        // round to the step's decimal grid so labels stay clean
        Ok((0..=n).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect())
    } else {
        spec.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse().map_err(|_| bad(s))).collect()
    }
}

/// Solve every model on every (Δ, ω) cell of a fixed geometry and history.
/// Cells run in the rayon pool; `make_solver` gives each cell its own backend.
pub fn sweep<F>(
    base: &GeneratorConfig,
    deltas: &[f64],
    omegas: &[f64],
    models: &[ModelKind],
    options: &RunOptions,
    config: &SolveConfig,
    make_solver: F,
) -> Result<Vec<SweepRow>, GeneratorError>
where
    F: Fn() -> Box<dyn MilpSolver + Send + Sync> + Sync,
{
    let geometry = generate_geometry(base)?;
    let history = simulate_weekly_demands(base, &geometry.cells);
    let mut cells = Vec::new();
    for &delta_km in deltas {
        for &omega in omegas {
            let cfg = GeneratorConfig { delta_km, omega, ..base.clone() };
            cells.push((delta_km, omega, instance_from_history(&cfg, &geometry, &history)?.instance));
        }
    }
    let rows = cells
        .par_iter()
        .flat_map_iter(|(delta_km, omega, inst)| {
            let solver = make_solver();
            models
                .iter()
                .map(|&m| {
                    let start = Instant::now();
                    let result = solve_model(inst, m, options, solver.as_ref(), config);
                    let seconds = start.elapsed().as_secs_f64();
                    match result {
                        Ok(rep) => SweepRow {
                            delta_km: *delta_km,
                            omega: *omega,
                            model: m.name().into(),
                            objective: Some(rep.objective),
                            proven_optimal: rep.proven_optimal,
                            sites_open: rep.plan.sessions.iter().filter(|&&x| x > 0).count(),
                            sessions: rep.plan.sessions.iter().sum(),
                            seconds,
                            iterations: rep.iterations,
                            cuts: rep.cuts,
                        },
                        Err(e) => {
                            log::warn!("delta={} omega={} model={}: {}", delta_km, omega, m, e);
                            SweepRow {
                                delta_km: *delta_km,
                                omega: *omega,
                                model: m.name().into(),
                                objective: None,
                                proven_optimal: false,
                                sites_open: 0,
                                sessions: 0,
                                seconds,
                                iterations: 0,
                                cuts: 0,
                            }
                        }
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(rows)
}
