//! JSON file formats: instances, plans, cell sidecars and generator configs.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use mmu_core::instgen::{CellRecord, GeneratorConfig};
use mmu_core::model::{
    validate_instance, Candidate, DemandOrigin, Facility, Instance, Plan, Point, Practice, SetupGroup, Site, UncertaintyModel,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
}

fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::File { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

type Extra = BTreeMap<String, Value>;

fn note_extra(extra: &Extra, context: &str, warnings: &mut Vec<String>) {
    for key in extra.keys() {
        warnings.push(format!("ignoring unknown field `{key}` in {context}"));
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct CoordJson {
    pub x: f64,
    pub y: f64,
}

impl From<Point> for CoordJson {
    fn from(p: Point) -> Self {
        Self { x: p.x, y: p.y }
    }
}

impl From<CoordJson> for Point {
    fn from(c: CoordJson) -> Self {
        Point::new(c.x, c.y)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteJson {
    pub id: String,
    pub setup_cost: u64,
    pub session_cap: u64,
    #[serde(default)]
    pub coord: CoordJson,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PracticeJson {
    pub id: String,
    pub capacity: u64,
    #[serde(default)]
    pub coord: CoordJson,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateJson {
    pub facility_id: String,
    pub distance_m: u64,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OriginJson {
    pub id: String,
    pub steerable: u64,
    pub walkin: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steerable_lo: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steerable_hi: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walkin_lo: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walkin_hi: Option<u64>,
    pub consideration: Vec<CandidateJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steerable_consideration: Option<Vec<String>>,
    #[serde(default)]
    pub coord: CoordJson,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintyJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_steerable: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_walkin: Option<u64>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Default for UncertaintyJson {
    fn default() -> Self {
        Self { kind: "deterministic".into(), gamma_steerable: None, gamma_walkin: None, extra: Extra::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetupGroupJson {
    pub id: String,
    pub setup_cost: u64,
    pub members: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceJson {
    pub sites: Vec<SiteJson>,
    pub practices: Vec<PracticeJson>,
    pub origins: Vec<OriginJson>,
    pub session_cost: u64,
    pub session_capacity: u64,
    #[serde(default)]
    pub uncertainty: UncertaintyJson,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub setup_groups: Vec<SetupGroupJson>,
    #[serde(flatten)]
    pub extra: Extra,
}

struct FacilityIds(HashMap<String, Facility>);

impl FacilityIds {
    fn new(sites: &[SiteJson], practices: &[PracticeJson]) -> Result<Self, IoError> {
        let mut map = HashMap::new();
        let all = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (&s.id, Facility::Site(i)))
            .chain(practices.iter().enumerate().map(|(i, p)| (&p.id, Facility::Practice(i))));
        for (id, f) in all {
            if map.insert(id.clone(), f).is_some() {
                return Err(IoError::Schema(format!("duplicate facility id `{id}`")));
            }
        }
        Ok(Self(map))
    }

    fn get(&self, id: &str, context: &str) -> Result<Facility, IoError> {
        self.0.get(id).copied().ok_or_else(|| IoError::Schema(format!("unknown facility `{id}` in {context}")))
    }
}

fn uncertainty_from_json(u: &UncertaintyJson) -> Result<UncertaintyModel, IoError> {
    match u.kind.as_str() {
        "deterministic" => Ok(UncertaintyModel::Deterministic),
        "interval" => Ok(UncertaintyModel::Interval),
        "budgeted" => match (u.gamma_steerable, u.gamma_walkin) {
            (Some(g1), Some(g2)) => Ok(UncertaintyModel::Budgeted { gamma_steerable: g1, gamma_walkin: g2 }),
            _ => Err(IoError::Schema("budgeted uncertainty needs gamma_steerable and gamma_walkin".into())),
        },
        other => Err(IoError::Schema(format!("unknown uncertainty kind `{other}`"))),
    }
}

fn uncertainty_to_json(u: UncertaintyModel) -> UncertaintyJson {
    match u {
        UncertaintyModel::Deterministic => UncertaintyJson::default(),
        UncertaintyModel::Interval => UncertaintyJson { kind: "interval".into(), ..UncertaintyJson::default() },
        UncertaintyModel::Budgeted { gamma_steerable, gamma_walkin } => UncertaintyJson {
            kind: "budgeted".into(),
            gamma_steerable: Some(gamma_steerable),
            gamma_walkin: Some(gamma_walkin),
            extra: Extra::new(),
        },
    }
}

impl InstanceJson {
    /// Resolve ids; returns the instance plus warnings for ignored fields.
    pub fn into_instance(self) -> Result<(Instance, Vec<String>), IoError> {
        let mut warnings = Vec::new();
        note_extra(&self.extra, "instance", &mut warnings);
        note_extra(&self.uncertainty.extra, "uncertainty", &mut warnings);
        let ids = FacilityIds::new(&self.sites, &self.practices)?;
        let sites = self
            .sites
            .iter()
            .map(|s| {
                note_extra(&s.extra, &format!("site {}", s.id), &mut warnings);
                Site { id: s.id.clone(), setup_cost: s.setup_cost, session_cap: s.session_cap, coord: s.coord.into() }
            })
            .collect();
        let practices = self
            .practices
            .iter()
            .map(|p| {
                note_extra(&p.extra, &format!("practice {}", p.id), &mut warnings);
                Practice { id: p.id.clone(), capacity: p.capacity, coord: p.coord.into() }
            })
            .collect();
        let mut origins = Vec::with_capacity(self.origins.len());
        for o in &self.origins {
            let context = format!("origin {}", o.id);
            note_extra(&o.extra, &context, &mut warnings);
            let mut consideration = Vec::with_capacity(o.consideration.len());
            for c in &o.consideration {
                note_extra(&c.extra, &context, &mut warnings);
                consideration.push(Candidate { facility: ids.get(&c.facility_id, &context)?, distance_m: c.distance_m });
            }
            let steerable_consideration = match &o.steerable_consideration {
                Some(list) => Some(list.iter().map(|id| ids.get(id, &context)).collect::<Result<Vec<_>, _>>()?),
                None => None,
            };
            origins.push(DemandOrigin {
                steerable_lo: o.steerable_lo.unwrap_or(o.steerable),
                steerable_hi: o.steerable_hi.unwrap_or(o.steerable),
                walkin_lo: o.walkin_lo.unwrap_or(o.walkin),
                walkin_hi: o.walkin_hi.unwrap_or(o.walkin),
                steerable_consideration,
                coord: o.coord.into(),
                ..DemandOrigin::new(o.id.clone(), o.steerable, o.walkin, consideration)
            });
        }
        let mut setup_groups = Vec::with_capacity(self.setup_groups.len());
        for g in &self.setup_groups {
            note_extra(&g.extra, &format!("setup group {}", g.id), &mut warnings);
            let members = g
                .members
                .iter()
                .map(|id| match ids.get(id, &format!("setup group {}", g.id))? {
                    Facility::Site(l) => Ok(l),
                    Facility::Practice(_) => Err(IoError::Schema(format!("setup group {} lists practice `{id}`", g.id))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            setup_groups.push(SetupGroup { id: g.id.clone(), setup_cost: g.setup_cost, members });
        }
        let inst = Instance {
            sites,
            practices,
            origins,
            session_cost: self.session_cost,
            session_capacity: self.session_capacity,
            uncertainty: uncertainty_from_json(&self.uncertainty)?,
            setup_groups,
        };
        Ok((inst, warnings))
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let fid = |f: Facility| inst.facility_id(f).to_string();
        let bound = |lo: u64, hi: u64, nominal: u64| if lo == nominal && hi == nominal { (None, None) } else { (Some(lo), Some(hi)) };
        Self {
            sites: inst
                .sites
                .iter()
                .map(|s| SiteJson { id: s.id.clone(), setup_cost: s.setup_cost, session_cap: s.session_cap, coord: s.coord.into(), extra: Extra::new() })
                .collect(),
            practices: inst
                .practices
                .iter()
                .map(|p| PracticeJson { id: p.id.clone(), capacity: p.capacity, coord: p.coord.into(), extra: Extra::new() })
                .collect(),
            origins: inst
                .origins
                .iter()
                .map(|o| {
                    let (slo, shi) = bound(o.steerable_lo, o.steerable_hi, o.steerable);
                    let (wlo, whi) = bound(o.walkin_lo, o.walkin_hi, o.walkin);
                    OriginJson {
                        id: o.id.clone(),
                        steerable: o.steerable,
                        walkin: o.walkin,
                        steerable_lo: slo,
                        steerable_hi: shi,
                        walkin_lo: wlo,
                        walkin_hi: whi,
                        consideration: o
                            .consideration
                            .iter()
                            .map(|c| CandidateJson { facility_id: fid(c.facility), distance_m: c.distance_m, extra: Extra::new() })
                            .collect(),
                        steerable_consideration: o.steerable_consideration.as_ref().map(|l| l.iter().map(|&f| fid(f)).collect()),
                        coord: o.coord.into(),
                        extra: Extra::new(),
                    }
                })
                .collect(),
            session_cost: inst.session_cost,
            session_capacity: inst.session_capacity,
            uncertainty: uncertainty_to_json(inst.uncertainty),
            setup_groups: inst
                .setup_groups
                .iter()
                .map(|g| SetupGroupJson {
                    id: g.id.clone(),
                    setup_cost: g.setup_cost,
                    members: g.members.iter().map(|&l| inst.sites[l].id.clone()).collect(),
                    extra: Extra::new(),
                })
                .collect(),
            extra: Extra::new(),
        }
    }
}

/// Parse and validate an instance; unknown fields come back as warnings.
pub fn parse_instance_str(text: &str) -> Result<(Instance, Vec<String>), IoError> {
    let raw: InstanceJson = serde_json::from_str(text)?;
    let (inst, warnings) = raw.into_instance()?;
    let problems = validate_instance(&inst);
    if !problems.is_empty() {
        return Err(IoError::Schema(problems.join("; ")));
    }
    Ok((inst, warnings))
}

pub fn instance_to_string(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceJson::from_instance(inst)).expect("instance serializes");
    s.push('\n');
    s
}

/// Read an instance, logging a warning per ignored field.
pub fn read_instance(path: &Path) -> Result<Instance, IoError> {
    let (inst, warnings) = parse_instance_str(&read_file(path)?)?;
    for w in warnings {
        log::warn!("{}: {}", path.display(), w);
    }
    Ok(inst)
}

pub fn write_instance(inst: &Instance, path: &Path) -> Result<(), IoError> {
    write_file(path, &instance_to_string(inst))
}

/// Plan with ids in place of indices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlanJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proven_optimal: Option<bool>,
    pub setup: BTreeMap<String, bool>,
    pub sessions: BTreeMap<String, u64>,
    pub walkin_route: BTreeMap<String, Option<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steerable_assign: Option<BTreeMap<String, BTreeMap<String, u64>>>,
}

impl PlanJson {
    pub fn from_plan(inst: &Instance, plan: &Plan) -> Self {
        let fid = |f: Facility| inst.facility_id(f).to_string();
        Self {
            model: None,
            objective: None,
            proven_optimal: None,
            setup: inst.sites.iter().zip(&plan.setup).map(|(s, &y)| (s.id.clone(), y)).collect(),
            sessions: inst.sites.iter().zip(&plan.sessions).map(|(s, &x)| (s.id.clone(), x)).collect(),
            walkin_route: inst.origins.iter().zip(&plan.walkin_route).map(|(o, r)| (o.id.clone(), r.map(fid))).collect(),
            steerable_assign: plan.steerable_assign.as_ref().map(|z| {
                inst.origins
                    .iter()
                    .zip(z)
                    .map(|(o, row)| (o.id.clone(), o.steerable_targets().zip(row).map(|(f, &a)| (fid(f), a)).collect()))
                    .collect()
            }),
        }
    }

    pub fn into_plan(&self, inst: &Instance) -> Result<Plan, IoError> {
        for id in self.setup.keys().chain(self.sessions.keys()) {
            if !inst.sites.iter().any(|s| &s.id == id) {
                return Err(IoError::Schema(format!("plan references unknown site `{id}`")));
            }
        }
        let facility = |id: &str| {
            inst.facilities()
                .find(|&f| inst.facility_id(f) == id)
                .ok_or_else(|| IoError::Schema(format!("plan references unknown facility `{id}`")))
        };
        let sessions: Vec<u64> = inst.sites.iter().map(|s| self.sessions.get(&s.id).copied().unwrap_or(0)).collect();
        let setup = inst
            .sites
            .iter()
            .zip(&sessions)
            .map(|(s, &x)| self.setup.get(&s.id).copied().unwrap_or(x > 0))
            .collect();
        let mut walkin_route = Vec::with_capacity(inst.origins.len());
        for o in &inst.origins {
            walkin_route.push(match self.walkin_route.get(&o.id) {
                Some(Some(id)) => Some(facility(id)?),
                _ => None,
            });
        }
        let steerable_assign = match &self.steerable_assign {
            None => None,
            Some(map) => {
                let mut z = Vec::with_capacity(inst.origins.len());
                for o in &inst.origins {
                    let row = map.get(&o.id);
                    if let Some(row) = row {
                        for id in row.keys() {
                            let f = facility(id)?;
                            if !o.steerable_targets().any(|t| t == f) {
                                return Err(IoError::Schema(format!("origin {} cannot be assigned to `{id}`", o.id)));
                            }
                        }
                    }
                    z.push(
                        o.steerable_targets()
                            .map(|f| row.and_then(|r| r.get(inst.facility_id(f))).copied().unwrap_or(0))
                            .collect(),
                    );
                }
                Some(z)
            }
        };
        Ok(Plan { setup, sessions, walkin_route, steerable_assign })
    }
}

pub fn read_plan(path: &Path, inst: &Instance) -> Result<(Plan, PlanJson), IoError> {
    let raw: PlanJson = serde_json::from_str(&read_file(path)?)?;
    Ok((raw.into_plan(inst)?, raw))
}

pub fn write_plan(plan: &PlanJson, path: &Path) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(plan)?;
    s.push('\n');
    write_file(path, &s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellJson {
    pub id: String,
    pub coord: CoordJson,
    pub mean: f64,
    pub origin: Option<String>,
}

/// Pre-aggregation cells kept next to a generated instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellsFile {
    pub dispersion: f64,
    pub omega: f64,
    pub cells: Vec<CellJson>,
}

impl CellsFile {
    pub fn new(inst: &Instance, cells: &[CellRecord], dispersion: f64, omega: f64) -> Self {
        Self {
            dispersion,
            omega,
            cells: cells
                .iter()
                .map(|c| CellJson { id: c.id.clone(), coord: c.coord.into(), mean: c.mean, origin: c.origin.map(|o| inst.origins[o].id.clone()) })
                .collect(),
        }
    }

    pub fn records(&self, inst: &Instance) -> Result<Vec<CellRecord>, IoError> {
        self.cells
            .iter()
            .map(|c| {
                let origin = match &c.origin {
                    None => None,
                    Some(id) => Some(
                        inst.origins
                            .iter()
                            .position(|o| &o.id == id)
                            .ok_or_else(|| IoError::Schema(format!("cell {} references unknown origin `{id}`", c.id)))?,
                    ),
                };
                Ok(CellRecord { id: c.id.clone(), coord: c.coord.into(), mean: c.mean, origin })
            })
            .collect()
    }
}

pub fn read_cells(path: &Path) -> Result<CellsFile, IoError> {
    Ok(serde_json::from_str(&read_file(path)?)?)
}

pub fn write_cells(cells: &CellsFile, path: &Path) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(cells)?;
    s.push('\n');
    write_file(path, &s)
}

/// JSON mirror of [`GeneratorConfig`]; missing keys take the defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfigJson {
    pub seed: u64,
    pub n_cells: usize,
    pub n_sites: usize,
    pub n_practices: usize,
    pub extent_km: f64,
    pub delta_km: f64,
    pub omega: f64,
    pub weeks: usize,
    pub demand_mean: f64,
    pub demand_spread: f64,
    pub dispersion: f64,
    pub road_detour_factor: f64,
    pub practice_capacity: [u64; 2],
    pub site_setup_cost: u64,
    pub site_session_cap: u64,
    pub session_cost: u64,
    pub session_capacity: u64,
}

impl Default for GeneratorConfigJson {
    fn default() -> Self {
        GeneratorConfig::default().into()
    }
}

impl From<GeneratorConfig> for GeneratorConfigJson {
    fn from(c: GeneratorConfig) -> Self {
        Self {
            seed: c.seed,
            n_cells: c.n_cells,
            n_sites: c.n_sites,
            n_practices: c.n_practices,
            extent_km: c.extent_km,
            delta_km: c.delta_km,
            omega: c.omega,
            weeks: c.weeks,
            demand_mean: c.demand_mean,
            demand_spread: c.demand_spread,
            dispersion: c.dispersion,
            road_detour_factor: c.road_detour_factor,
            practice_capacity: [c.practice_capacity.0, c.practice_capacity.1],
            site_setup_cost: c.site_setup_cost,
            site_session_cap: c.site_session_cap,
            session_cost: c.session_cost,
            session_capacity: c.session_capacity,
        }
    }
}

impl From<GeneratorConfigJson> for GeneratorConfig {
    fn from(c: GeneratorConfigJson) -> Self {
        Self {
            seed: c.seed,
            n_cells: c.n_cells,
            n_sites: c.n_sites,
            n_practices: c.n_practices,
            extent_km: c.extent_km,
            delta_km: c.delta_km,
            omega: c.omega,
            weeks: c.weeks,
            demand_mean: c.demand_mean,
            demand_spread: c.demand_spread,
            dispersion: c.dispersion,
            road_detour_factor: c.road_detour_factor,
            practice_capacity: (c.practice_capacity[0], c.practice_capacity[1]),
            site_setup_cost: c.site_setup_cost,
            site_session_cap: c.site_session_cap,
            session_cost: c.session_cost,
            session_capacity: c.session_capacity,
        }
    }
}

pub fn read_generator_config(path: &Path) -> Result<GeneratorConfig, IoError> {
    let raw: GeneratorConfigJson = serde_json::from_str(&read_file(path)?)?;
    Ok(raw.into())
}
