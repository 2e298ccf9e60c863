//! Synthetic instance generator.
//!
//! Pipeline: jittered-grid population cells and random facilities, weekly
//! visit histories per cell (negative binomial via a gamma-Poisson
//! mixture), aggregation of cells with identical ordered consideration
//! sets, then nominal demands, bounds and budgets derived from the
//! aggregated histories.

use crate::model::{
    sort_consideration, validate_instance, Candidate, DemandOrigin, Facility, Instance, Point, Practice, Site,
    UncertaintyModel,
};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use thiserror::Error;

/// Stream of the generator RNG used for geometry.
const GEOMETRY_STREAM: u64 = 1;
/// Stream used for demand histories.
const HISTORY_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_cells: usize,
    pub n_sites: usize,
    pub n_practices: usize,
    /// Side length of the square region.
    pub extent_km: f64,
    /// Maximum driving distance of a consideration set.
    pub delta_km: f64,
    /// Walk-in share.
    pub omega: f64,
    pub weeks: usize,
    /// Mean weekly visits of an average cell.
    pub demand_mean: f64,
    /// Cell means are drawn uniformly from mean·[1 − spread, 1 + spread].
    pub demand_spread: f64,
    /// Negative-binomial shape; `f64::INFINITY` gives Poisson draws.
    pub dispersion: f64,
    pub road_detour_factor: f64,
    pub practice_capacity: (u64, u64),
    pub site_setup_cost: u64,
    pub site_session_cap: u64,
    pub session_cost: u64,
    pub session_capacity: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_cells: 400,
            n_sites: 28,
            n_practices: 16,
            extent_km: 20.0,
            delta_km: 8.0,
            omega: 0.2,
            weeks: 52,
            demand_mean: 10.0,
            demand_spread: 0.8,
            dispersion: 20.0,
            road_detour_factor: 1.3,
            practice_capacity: (206, 602),
            site_setup_cost: 2,
            site_session_cap: 10,
            session_cost: 1,
            session_capacity: 28,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("configuration has no facilities")]
    NoFacilities,
    #[error("generated instance is invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("nominal demand lies outside the derived uncertainty sets: {0}")]
    NominalOutsideSets(String),
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::Config(String::from(m)));
        if !(0.0..=1.0).contains(&self.omega) {
            return bad("omega must lie in [0, 1]");
        }
        if self.weeks == 0 {
            return bad("weeks must be at least 1");
        }
        if !(self.delta_km > 0.0) {
            return bad("delta_km must be positive");
        }
        if self.n_cells == 0 {
            return bad("n_cells must be positive");
        }
        if !(self.extent_km > 0.0) || !(self.road_detour_factor > 0.0) {
            return bad("extent and detour factor must be positive");
        }
        if !(self.demand_mean >= 0.0) || !(0.0..=1.0).contains(&self.demand_spread) || !(self.dispersion > 0.0) {
            return bad("demand parameters out of range");
        }
        if self.practice_capacity.0 > self.practice_capacity.1 {
            return bad("practice capacity range inverted");
        }
        if self.n_sites + self.n_practices == 0 {
            return Err(GeneratorError::NoFacilities);
        }
        Ok(())
    }
}

/// Population cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    pub coord: Point,
    /// Mean weekly visits.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub cells: Vec<Cell>,
    pub sites: Vec<Site>,
    pub practices: Vec<Practice>,
    /// `[cell][facility index]` driving distance in metres.
    pub distances: Vec<Vec<u64>>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn padded(prefix: &str, i: usize, n: usize) -> String {
    let width = format!("{}", n.max(1)).len();
    format!("{}{:0width$}", prefix, i + 1, width = width)
}

pub fn generate_geometry(cfg: &GeneratorConfig) -> Result<Geometry, GeneratorError> {
    cfg.check()?;
    let mut rng = rng_for(cfg.seed, GEOMETRY_STREAM);
    let side = libm::ceil(libm::sqrt(cfg.n_cells as f64)) as usize;
    let spacing = cfg.extent_km / side as f64;
    let mut cells = Vec::with_capacity(cfg.n_cells);
    for c in 0..cfg.n_cells {
        let (gx, gy) = ((c % side) as f64, (c / side) as f64);
        let jx = rng.random_range(-0.3..=0.3);
        let jy = rng.random_range(-0.3..=0.3);
        let coord = Point::new((gx + 0.5 + jx) * spacing, (gy + 0.5 + jy) * spacing);
        let factor = 1.0 + cfg.demand_spread * rng.random_range(-1.0..=1.0);
        cells.push(Cell { id: padded("c", c, cfg.n_cells), coord, mean: cfg.demand_mean * factor });
    }
    let sites = (0..cfg.n_sites)
        .map(|i| {
            let at = rng.random_range(0..cells.len());
            Site {
                id: padded("L", i, cfg.n_sites),
                setup_cost: cfg.site_setup_cost,
                session_cap: cfg.site_session_cap,
                coord: cells[at].coord,
            }
        })
        .collect::<Vec<_>>();
    let practices = (0..cfg.n_practices)
        .map(|j| Practice {
            id: padded("P", j, cfg.n_practices),
            capacity: rng.random_range(cfg.practice_capacity.0..=cfg.practice_capacity.1),
            coord: Point::new(rng.random_range(0.0..cfg.extent_km), rng.random_range(0.0..cfg.extent_km)),
        })
        .collect::<Vec<_>>();
    let coords: Vec<Point> = sites.iter().map(|s| s.coord).chain(practices.iter().map(|p| p.coord)).collect();
    let distances = cells
        .iter()
        .map(|c| {
            coords
                .iter()
                .map(|f| libm::round(c.coord.distance(f) * cfg.road_detour_factor * 1000.0) as u64)
                .collect()
        })
        .collect();
    Ok(Geometry { cells, sites, practices, distances })
}

/// Weekly visits per cell: `visits[cell][week]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandHistory {
    pub visits: Vec<Vec<u64>>,
}

impl DemandHistory {
    pub fn weeks(&self) -> usize {
        self.visits.first().map_or(0, Vec::len)
    }

    /// Total visits per week over all cells.
    pub fn weekly_totals(&self) -> Vec<u64> {
        let mut totals = vec![0; self.weeks()];
        for row in &self.visits {
            for (t, &g) in totals.iter_mut().zip(row) {
                *t += g;
            }
        }
        totals
    }
}

/// One negative-binomial draw with the given mean and shape.
pub fn negative_binomial<R: Rng + ?Sized>(rng: &mut R, mean: f64, dispersion: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let rate = if dispersion.is_finite() {
        match Gamma::new(dispersion, mean / dispersion) {
            Ok(g) => g.sample(rng),
            Err(_) => mean,
        }
    } else {
        mean
    };
    if !(rate > 0.0) {
        return 0;
    }
    match Poisson::new(rate) {
        Ok(p) => {
            let x: f64 = p.sample(rng);
            x as u64
        }
        Err(_) => 0,
    }
}

pub fn simulate_weekly_demands(cfg: &GeneratorConfig, cells: &[Cell]) -> DemandHistory {
    let mut rng = rng_for(cfg.seed, HISTORY_STREAM);
    let visits = cells
        .iter()
        .map(|c| (0..cfg.weeks).map(|_| negative_binomial(&mut rng, c.mean, cfg.dispersion)).collect())
        .collect();
    DemandHistory { visits }
}

/// Cells sharing one ordered consideration set.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedOrigin {
    /// Distances of the first member cell.
    pub consideration: Vec<Candidate>,
    pub cells: Vec<usize>,
}

/// Consideration set of every cell (facilities within `delta_km`, ordered
/// by distance then id); cells with identical ordered sets are merged.
pub fn aggregate_cells(geometry: &Geometry, delta_km: f64) -> Vec<AggregatedOrigin> {
    let probe = Instance { sites: geometry.sites.clone(), practices: geometry.practices.clone(), ..Instance::default() };
    let limit = libm::floor(delta_km * 1000.0) as u64;
    let mut by_key: BTreeMap<Vec<Facility>, usize> = BTreeMap::new();
    let mut out: Vec<AggregatedOrigin> = Vec::new();
    for (c, row) in geometry.distances.iter().enumerate() {
        let mut list: Vec<Candidate> = row
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= limit)
            .map(|(k, &d)| Candidate { facility: probe.facility_at(k), distance_m: d })
            .collect();
        sort_consideration(&probe, &mut list);
        let key: Vec<Facility> = list.iter().map(|c| c.facility).collect();
        match by_key.get(&key) {
            Some(&o) => out[o].cells.push(c),
            None => {
                by_key.insert(key, out.len());
                out.push(AggregatedOrigin { consideration: list, cells: vec![c] });
            }
        }
    }
    out
}

/// Paper rounding: ⌊x + 0.5⌋.
pub fn round_half_up(x: f64) -> u64 {
    libm::floor(x + 0.5).max(0.0) as u64
}

/// Nominal demands and bounds of one origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedDemands {
    pub steerable: u64,
    pub walkin: u64,
    pub steerable_lo: u64,
    pub steerable_hi: u64,
    pub walkin_lo: u64,
    pub walkin_hi: u64,
}

/// Split the rounded weekly average, minimum and maximum into walk-in
/// (share ω, rounded) and steerable (remainder) parts.
pub fn derive_demands(weekly: &[u64], omega: f64) -> DerivedDemands {
    let n = weekly.len().max(1) as u64;
    let sum: u64 = weekly.iter().sum();
    let avg = (2 * sum + n) / (2 * n);
    let min = weekly.iter().copied().min().unwrap_or(0);
    let max = weekly.iter().copied().max().unwrap_or(0);
    let walk = |x: u64| round_half_up(omega * x as f64).min(x);
    DerivedDemands {
        steerable: avg - walk(avg),
        walkin: walk(avg),
        steerable_lo: min - walk(min),
        steerable_hi: max - walk(max),
        walkin_lo: walk(min),
        walkin_hi: walk(max),
    }
}

/// (Γ1, Γ2) from the largest weekly total M: Γ2 = round(ω·M), Γ1 = M − Γ2.
pub fn derive_budgets(weekly_totals: &[u64], omega: f64) -> (u64, u64) {
    let m = weekly_totals.iter().copied().max().unwrap_or(0);
    let g2 = round_half_up(omega * m as f64).min(m);
    (m - g2, g2)
}

/// Population cell as kept next to a generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub id: String,
    pub coord: Point,
    pub mean: f64,
    /// Index of the origin the cell was merged into; `None` for cells
    /// without any recorded visit.
    pub origin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub instance: Instance,
    pub cells: Vec<CellRecord>,
    pub history: DemandHistory,
    pub dispersion: f64,
    pub omega: f64,
    /// Free-form notes on modeling choices.
    pub notes: Vec<String>,
}

/// Full pipeline. Origins whose history is all zeros, or that have no
/// facility within reach, are dropped.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<GeneratedInstance, GeneratorError> {
    let geometry = generate_geometry(cfg)?;
    let history = simulate_weekly_demands(cfg, &geometry.cells);
    instance_from_history(cfg, &geometry, &history)
}

/// Aggregate and derive an instance for a given geometry and history.
pub fn instance_from_history(
    cfg: &GeneratorConfig,
    geometry: &Geometry,
    history: &DemandHistory,
) -> Result<GeneratedInstance, GeneratorError> {
    cfg.check()?;
    let groups = aggregate_cells(geometry, cfg.delta_km);
    let mut inst = Instance {
        sites: geometry.sites.clone(),
        practices: geometry.practices.clone(),
        session_cost: cfg.session_cost,
        session_capacity: cfg.session_capacity,
        ..Instance::default()
    };
    let mut cells: Vec<CellRecord> = geometry
        .cells
        .iter()
        .map(|c| CellRecord { id: c.id.clone(), coord: c.coord, mean: c.mean, origin: None })
        .collect();
    let mut origin_weeks: Vec<Vec<u64>> = Vec::new();
    for g in &groups {
        let mut weekly = vec![0u64; history.weeks()];
        for &c in &g.cells {
            for (w, &x) in weekly.iter_mut().zip(&history.visits[c]) {
                *w += x;
            }
        }
        if g.consideration.is_empty() || weekly.iter().all(|&x| x == 0) {
            continue;
        }
        let d = derive_demands(&weekly, cfg.omega);
        let index = inst.origins.len();
        let (sx, sy) = g.cells.iter().fold((0.0, 0.0), |acc, &c| (acc.0 + geometry.cells[c].coord.x, acc.1 + geometry.cells[c].coord.y));
        let k = g.cells.len() as f64;
        inst.origins.push(DemandOrigin {
            id: format!("v{}", index + 1),
            steerable: d.steerable,
            walkin: d.walkin,
            steerable_lo: d.steerable_lo,
            steerable_hi: d.steerable_hi,
            walkin_lo: d.walkin_lo,
            walkin_hi: d.walkin_hi,
            consideration: g.consideration.clone(),
            steerable_consideration: None,
            coord: Point::new(sx / k, sy / k),
        });
        for &c in &g.cells {
            cells[c].origin = Some(index);
        }
        origin_weeks.push(weekly);
    }
    let mut totals = vec![0u64; history.weeks()];
    for w in &origin_weeks {
        for (t, &x) in totals.iter_mut().zip(w) {
            *t += x;
        }
    }
    let (g1, g2) = derive_budgets(&totals, cfg.omega);
    // per-origin rounding can leave a budget above the box total; the set is the same
    let hi1: u64 = inst.origins.iter().map(|o| o.steerable_hi).sum();
    let hi2: u64 = inst.origins.iter().map(|o| o.walkin_hi).sum();
    let (g1, g2) = (g1.min(hi1), g2.min(hi2));
    inst.uncertainty = UncertaintyModel::Budgeted { gamma_steerable: g1, gamma_walkin: g2 };

    let mut problems = validate_instance(&inst);
    if inst.origins.is_empty() {
        problems.push(String::from("no cell with recorded demand has a facility within delta_km"));
    }
    if !problems.is_empty() {
        return Err(GeneratorError::Invalid(problems));
    }
    let sum_d: u64 = inst.origins.iter().map(|o| o.steerable).sum();
    let sum_u: u64 = inst.origins.iter().map(|o| o.walkin).sum();
    if sum_d > g1 || sum_u > g2 {
        return Err(GeneratorError::NominalOutsideSets(format!(
            "steerable {} vs budget {}, walk-in {} vs budget {}",
            sum_d, g1, sum_u, g2
        )));
    }
    let notes = vec![
        String::from("spatial demand field: cell means uniform in demand_mean*[1-spread, 1+spread], independent across cells"),
        String::from("weekly visits: negative binomial (gamma-Poisson mixture), independent across cells and weeks"),
        String::from("driving distance: euclidean distance times road_detour_factor"),
        String::from("cells without any recorded visit are not turned into origins"),
        String::from("budgets above the sum of upper bounds are clamped to that sum"),
        String::from("cells with no facility within delta_km are left out of the instance"),
    ];
    Ok(GeneratedInstance { instance: inst, cells, history: history.clone(), dispersion: cfg.dispersion, omega: cfg.omega, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> GeneratorConfig {
        GeneratorConfig { n_cells: 36, n_sites: 4, n_practices: 2, extent_km: 6.0, delta_km: 4.0, demand_mean: 8.0, ..GeneratorConfig::default() }
    }

    #[test]
    fn geometry_is_deterministic_and_in_range() {
        let a = generate_geometry(&GeneratorConfig::default()).unwrap();
        let b = generate_geometry(&GeneratorConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.sites.len(), a.practices.len()), (28, 16));
        assert!(a.practices.iter().all(|p| (206..=602).contains(&p.capacity)));
        assert!(a.sites.iter().all(|s| s.session_cap == 10 && s.setup_cost == 2));
    }

    #[test]
    fn zero_facilities_rejected() {
        let cfg = GeneratorConfig { n_sites: 0, n_practices: 0, ..GeneratorConfig::default() };
        assert_eq!(generate_geometry(&cfg), Err(GeneratorError::NoFacilities));
    }

    #[test]
    fn derive_demand_examples() {
        let d = derive_demands(&[10; 52], 0.2);
        assert_eq!((d.steerable, d.walkin), (8, 2));
        assert_eq!((d.steerable_lo, d.steerable_hi, d.walkin_lo, d.walkin_hi), (8, 8, 2, 2));
        assert_eq!(derive_demands(&[9, 10], 0.0).steerable, 10);
        let d = derive_demands(&[4, 16, 10], 0.25);
        assert_eq!((d.walkin_lo, d.steerable_lo, d.walkin_hi, d.steerable_hi), (1, 3, 4, 12));
    }

    #[test]
    fn derive_budget_examples() {
        assert_eq!(derive_budgets(&[4000, 4041, 3900], 0.2), (3233, 808));
        assert_eq!(derive_budgets(&[4041], 0.45), (2223, 1818));
        assert_eq!(derive_budgets(&[4041], 0.0), (4041, 0));
    }

    #[test]
    fn poisson_limit_moments() {
        let mut rng = rng_for(11, 0);
        let draws: Vec<f64> = (0..10_000).map(|_| negative_binomial(&mut rng, 6.0, f64::INFINITY) as f64).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / draws.len() as f64;
        assert!((var / mean - 1.0).abs() < 0.15, "mean {} var {}", mean, var);
        assert_eq!(negative_binomial(&mut rng, 0.0, 3.0), 0);
    }

    #[test]
    fn aggregation_merges_identical_orderings() {
        let mut g = generate_geometry(&small()).unwrap();
        g.distances[1] = g.distances[0].clone();
        let origins = aggregate_cells(&g, 4.0);
        let home = origins.iter().find(|o| o.cells.contains(&0)).unwrap();
        assert!(home.cells.contains(&1));
        for o in &origins {
            assert!(o.consideration.iter().all(|c| c.distance_m <= 4000));
        }
        let none = aggregate_cells(&g, 0.001);
        assert!(none.iter().all(|o| o.consideration.is_empty() || o.consideration.iter().all(|c| c.distance_m <= 1)));
    }

    #[test]
    fn uncovered_cells_are_dropped() {
        let cfg = GeneratorConfig { delta_km: 0.001, ..small() };
        let gen = generate_instance(&cfg).unwrap();
        assert!(gen.instance.origins.iter().all(|o| !o.consideration.is_empty()));
        let geometry = generate_geometry(&cfg).unwrap();
        let silent = DemandHistory { visits: vec![vec![0; cfg.weeks]; geometry.cells.len()] };
        assert!(matches!(instance_from_history(&cfg, &geometry, &silent), Err(GeneratorError::Invalid(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generated_instances_hold_invariants(seed in 0u64..1000, omega in 0.0f64..=1.0) {
            let cfg = GeneratorConfig { seed, omega, ..small() };
            let gen = match generate_instance(&cfg) {
                Ok(g) => g,
                Err(GeneratorError::Invalid(_)) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(format!("{}", e))),
            };
            let inst = &gen.instance;
            let (g1, g2) = match inst.uncertainty { UncertaintyModel::Budgeted { gamma_steerable, gamma_walkin } => (gamma_steerable, gamma_walkin), _ => unreachable!() };
            for o in &inst.origins {
                prop_assert!(o.steerable_lo <= o.steerable && o.steerable <= o.steerable_hi);
                prop_assert!(o.walkin_lo <= o.walkin && o.walkin <= o.walkin_hi);
            }
            prop_assert!(inst.origins.iter().map(|o| o.steerable_lo).sum::<u64>() <= g1);
            prop_assert!(inst.origins.iter().map(|o| o.walkin_lo).sum::<u64>() <= g2);
            prop_assert!(inst.origins.iter().map(|o| o.steerable).sum::<u64>() <= g1);
            prop_assert!(inst.origins.iter().map(|o| o.walkin).sum::<u64>() <= g2);
            let geometry = generate_geometry(&cfg).unwrap();
            let cell_total: u64 = aggregate_cells(&geometry, cfg.delta_km)
                .iter()
                .filter(|g| !g.consideration.is_empty())
                .flat_map(|g| g.cells.iter())
                .map(|&c| gen.history.visits[c].iter().sum::<u64>())
                .sum();
            let mut origin_total = 0u64;
            for (c, rec) in gen.cells.iter().enumerate() {
                if rec.origin.is_some() {
                    origin_total += gen.history.visits[c].iter().sum::<u64>();
                }
            }
            prop_assert_eq!(cell_total, origin_total);
        }
    }
}
