//! Monte-Carlo plan evaluation.
//!
//! The metric is the minimum total capacity overage of a fixed plan under
//! one demand realization: walk-ins go to their closest operating facility,
//! steerable demand is spread to minimize overage. Every overage unit costs
//! the same, so the minimum splits into walk-in overload plus the steerable
//! demand a max-flow cannot place into the remaining capacity.

use crate::instgen::{negative_binomial, CellRecord};
use crate::maxflow::{build_flow_network, max_flow};
use crate::model::{closest_operating_facility, Instance, Plan};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SampledHistory,
    BudgetSet,
    IntervalBox,
    OutbreakPerturbed,
    Given,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::SampledHistory => "sampled-history",
            Provenance::BudgetSet => "budget-set",
            Provenance::IntervalBox => "interval-box",
            Provenance::OutbreakPerturbed => "outbreak-perturbed",
            Provenance::Given => "given",
        }
    }
}

/// Realized demands, per cell or per origin depending on context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    pub id: usize,
    pub steerable: Vec<u64>,
    pub walkin: Vec<u64>,
    pub provenance: Provenance,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("need at least one realization")]
    NoSamples,
    #[error("rejection sampling gave up after {attempts} draws (lower total {lower}, upper total {upper}, budget {budget})")]
    Rejection { attempts: usize, lower: u64, upper: u64, budget: u64 },
    #[error("instance has no budgeted uncertainty")]
    NotBudgeted,
}

/// Fresh weekly visits per cell, each visit a walk-in with probability ω.
pub fn sample_history(
    cells: &[CellRecord],
    dispersion: f64,
    omega: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<Realization>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = omega.clamp(0.0, 1.0);
    Ok((0..n)
        .map(|id| {
            let mut steerable = Vec::with_capacity(cells.len());
            let mut walkin = Vec::with_capacity(cells.len());
            for c in cells {
                let visits = negative_binomial(&mut rng, c.mean, dispersion);
                let walk = Binomial::new(visits, omega).map(|b| b.sample(&mut rng)).unwrap_or(0);
                steerable.push(visits - walk);
                walkin.push(walk);
            }
            Realization { id, steerable, walkin, provenance: Provenance::SampledHistory }
        })
        .collect())
}

/// Sum a per-cell realization onto origins.
pub fn aggregate_realization(cells: &[CellRecord], r: &Realization, n_origins: usize) -> Realization {
    let mut steerable = vec![0; n_origins];
    let mut walkin = vec![0; n_origins];
    for (c, cell) in cells.iter().enumerate() {
        if let Some(o) = cell.origin {
            steerable[o] += r.steerable[c];
            walkin[o] += r.walkin[c];
        }
    }
    Realization { id: r.id, steerable, walkin, provenance: r.provenance }
}

fn draw_box<R: Rng>(rng: &mut R, bounds: &[(u64, u64)]) -> Vec<u64> {
    bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
}

/// Largest DP table (origins × budget slack) the exact sampler will build.
const EXACT_TABLE_LIMIT: usize = 1 << 26;

/// Uniform sampler over the integer box intersected with `Σx ≤ budget`.
///
/// Holds suffix counts (each row scaled by its maximum) and draws
/// coordinates one after another. Falls back to box rejection when the
/// table would be too large.
struct BudgetSampler {
    bounds: Vec<(u64, u64)>,
    budget: u64,
    max_attempts: usize,
    slack: usize,
    rows: Option<Vec<Vec<f64>>>,
}

impl BudgetSampler {
    fn new(bounds: &[(u64, u64)], budget: u64, max_attempts: usize) -> Result<Self, SamplingError> {
        let lower: u64 = bounds.iter().map(|b| b.0).sum();
        let upper: u64 = bounds.iter().map(|b| b.1).sum();
        if lower > budget {
            return Err(SamplingError::Rejection { attempts: 0, lower, upper, budget });
        }
        let slack = (budget.min(upper) - lower) as usize;
        let rows = ((bounds.len() + 1).saturating_mul(slack + 1) <= EXACT_TABLE_LIMIT).then(|| {
            // rows[v][s]: relative number of completions of origins v.. using at most s
            let mut rows = vec![vec![1.0f64; slack + 1]; bounds.len() + 1];
            for v in (0..bounds.len()).rev() {
                let width = (bounds[v].1 - bounds[v].0) as usize;
                let next = &rows[v + 1];
                let mut prefix = Vec::with_capacity(slack + 2);
                prefix.push(0.0);
                for s in 0..=slack {
                    prefix.push(prefix[s] + next[s]);
                }
                let mut row: Vec<f64> = (0..=slack).map(|s| prefix[s + 1] - prefix[s - s.min(width)]).collect();
                let top = row.iter().cloned().fold(0.0, f64::max);
                if top > 0.0 {
                    row.iter_mut().for_each(|x| *x /= top);
                }
                rows[v] = row;
            }
            rows
        });
        Ok(Self { bounds: bounds.to_vec(), budget, max_attempts, slack, rows })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Result<Vec<u64>, SamplingError> {
        let Some(rows) = &self.rows else {
            for _ in 0..self.max_attempts {
                let x = draw_box(rng, &self.bounds);
                if x.iter().sum::<u64>() <= self.budget {
                    return Ok(x);
                }
            }
            return Err(SamplingError::Rejection {
                attempts: self.max_attempts,
                lower: self.bounds.iter().map(|b| b.0).sum(),
                upper: self.bounds.iter().map(|b| b.1).sum(),
                budget: self.budget,
            });
        };
        let mut left = self.slack;
        let mut x = Vec::with_capacity(self.bounds.len());
        for (v, &(lo, hi)) in self.bounds.iter().enumerate() {
            let width = ((hi - lo) as usize).min(left);
            let weights = (0..=width).map(|y| rows[v + 1][left - y]);
            let total: f64 = weights.clone().sum();
            let mut target = rng.random::<f64>() * total;
            let mut pick = width;
            for (y, w) in weights.enumerate() {
                if target < w {
                    pick = y;
                    break;
                }
                target -= w;
            }
            x.push(lo + pick as u64);
            left -= pick;
        }
        Ok(x)
    }
}

fn bounds(inst: &Instance) -> (Vec<(u64, u64)>, Vec<(u64, u64)>) {
    (
        inst.origins.iter().map(|o| (o.steerable_lo, o.steerable_hi)).collect(),
        inst.origins.iter().map(|o| (o.walkin_lo, o.walkin_hi)).collect(),
    )
}

/// Uniform draws from the budgeted sets. `max_attempts` bounds box
/// rejection, used only when the exact sampler's table is too large.
pub fn sample_budget_set(inst: &Instance, n: usize, seed: u64, max_attempts: usize) -> Result<Vec<Realization>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::NoSamples);
    }
    let (g1, g2) = match inst.uncertainty {
        crate::model::UncertaintyModel::Budgeted { gamma_steerable, gamma_walkin } => (gamma_steerable, gamma_walkin),
        _ => return Err(SamplingError::NotBudgeted),
    };
    let (b1, b2) = bounds(inst);
    let s1 = BudgetSampler::new(&b1, g1, max_attempts)?;
    let s2 = BudgetSampler::new(&b2, g2, max_attempts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|id| {
            let steerable = s1.draw(&mut rng)?;
            let walkin = s2.draw(&mut rng)?;
            Ok(Realization { id, steerable, walkin, provenance: Provenance::BudgetSet })
        })
        .collect()
}

/// Uniform draws from the interval boxes.
pub fn sample_interval_box(inst: &Instance, n: usize, seed: u64) -> Result<Vec<Realization>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::NoSamples);
    }
    let (b1, b2) = bounds(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|id| Realization {
            id,
            steerable: draw_box(&mut rng, &b1),
            walkin: draw_box(&mut rng, &b2),
            provenance: Provenance::IntervalBox,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutbreakParams {
    pub centers: usize,
    pub radius_km: f64,
    pub factor: u64,
}

impl Default for OutbreakParams {
    fn default() -> Self {
        Self { centers: 5, radius_km: 1.0, factor: 2 }
    }
}

/// Pick distinct random center cells one after another and multiply the
/// demand of every cell within the radius; overlapping zones compound.
/// Returns the perturbed realization and the chosen centers.
pub fn apply_outbreaks<R: Rng + ?Sized>(
    cells: &[CellRecord],
    r: &Realization,
    params: &OutbreakParams,
    rng: &mut R,
) -> (Realization, Vec<usize>) {
    let mut out = r.clone();
    let mut pool: Vec<usize> = (0..cells.len()).collect();
    let mut chosen = Vec::new();
    for _ in 0..params.centers.min(cells.len()) {
        let pick = pool.swap_remove(rng.random_range(0..pool.len()));
        chosen.push(pick);
        let center = cells[pick].coord;
        for (c, cell) in cells.iter().enumerate() {
            if cell.coord.distance(&center) <= params.radius_km {
                out.steerable[c] *= params.factor;
                out.walkin[c] *= params.factor;
            }
        }
    }
    if !chosen.is_empty() {
        out.provenance = Provenance::OutbreakPerturbed;
    }
    (out, chosen)
}

/// Minimum total violations of `plan` under an origin-level realization.
pub fn min_total_violations(inst: &Instance, plan: &Plan, r: &Realization) -> u64 {
    let n = inst.num_facilities();
    let mut load = vec![0i64; n];
    let mut stranded = 0u64;
    let mut steerable = r.steerable.clone();
    for v in 0..inst.origins.len() {
        match closest_operating_facility(inst, v, &plan.setup) {
            Some(k) => load[inst.facility_index(k)] += r.walkin[v] as i64,
            None => {
                stranded += r.steerable[v] + r.walkin[v];
                steerable[v] = 0;
            }
        }
    }
    let mut overload = 0u64;
    let residual: Vec<i64> = inst
        .facilities()
        .map(|k| {
            let gap = inst.capacity(k, &plan.sessions) - load[inst.facility_index(k)];
            overload += (-gap).max(0) as u64;
            gap.max(0)
        })
        .collect();
    let net = build_flow_network(inst, &residual, &steerable);
    let placed = max_flow(&net).value;
    overload + (net.total_demand - placed) as u64 + stranded
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationRow {
    pub model: String,
    pub realization_id: usize,
    pub violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub model: String,
    pub mean: f64,
    pub max: u64,
    pub p95: u64,
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<ViolationRow>,
    pub summaries: Vec<ModelSummary>,
}

/// Nearest-rank percentile of a sorted slice.
pub fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = libm::ceil(q * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl EvaluationReport {
    /// Assemble summaries from already computed rows (models in input order).
    pub fn from_rows(inst: &Instance, plans: &[(String, Plan)], rows: Vec<ViolationRow>) -> Self {
        let summaries = plans
            .iter()
            .map(|(name, plan)| {
                let mut v: Vec<u64> = rows.iter().filter(|r| &r.model == name).map(|r| r.violations).collect();
                v.sort_unstable();
                let mean = if v.is_empty() { 0.0 } else { v.iter().sum::<u64>() as f64 / v.len() as f64 };
                ModelSummary {
                    model: name.clone(),
                    mean,
                    max: v.last().copied().unwrap_or(0),
                    p95: percentile(&v, 0.95),
                    cost: crate::model::plan_cost(inst, plan),
                }
            })
            .collect();
        Self { rows, summaries }
    }

    /// Empirical CDF points `(violations, fraction ≤ violations)` of a model.
    pub fn cdf(&self, model: &str) -> Vec<(u64, f64)> {
        let mut v: Vec<u64> = self.rows.iter().filter(|r| r.model == model).map(|r| r.violations).collect();
        v.sort_unstable();
        let n = v.len() as f64;
        let mut out: Vec<(u64, f64)> = Vec::new();
        for (i, &x) in v.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = (i + 1) as f64 / n,
                _ => out.push((x, (i + 1) as f64 / n)),
            }
        }
        out
    }
}

/// Violations of every plan under every realization (origin level).
pub fn evaluate_models(inst: &Instance, plans: &[(String, Plan)], realizations: &[Realization]) -> EvaluationReport {
    let mut rows = Vec::with_capacity(plans.len() * realizations.len());
    for (name, plan) in plans {
        for r in realizations {
            rows.push(ViolationRow { model: name.clone(), realization_id: r.id, violations: min_total_violations(inst, plan, r) });
        }
    }
    EvaluationReport::from_rows(inst, plans, rows)
}
