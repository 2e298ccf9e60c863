//! Instance and plan data model.
//!
//! Facilities are addressed by [`Facility`] (a site or practice index). Flat
//! per-facility vectors use [`Instance::facility_index`]: sites first, then
//! practices.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use thiserror::Error;

/// Reference to a treatment facility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Facility {
    Site(usize),
    Practice(usize),
}

impl Facility {
    pub fn is_site(self) -> bool {
        matches!(self, Facility::Site(_))
    }
}

/// Planar point in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Potential MMU operation site.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: String,
    pub setup_cost: u64,
    /// Maximum number of sessions per week.
    pub session_cap: u64,
    pub coord: Point,
}

/// Stationary practice with a fixed weekly treatment capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Practice {
    pub id: String,
    pub capacity: u64,
    pub coord: Point,
}

/// One entry of an origin's ordered consideration list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub facility: Facility,
    pub distance_m: u64,
}

/// Aggregated demand origin.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandOrigin {
    pub id: String,
    pub steerable: u64,
    pub walkin: u64,
    pub steerable_lo: u64,
    pub steerable_hi: u64,
    pub walkin_lo: u64,
    pub walkin_hi: u64,
    /// Ordered by (distance, facility id). Walk-ins use this list, and so
    /// does steerable demand unless `steerable_consideration` is set.
    pub consideration: Vec<Candidate>,
    /// Separate steerable targets (session-expanded instances).
    pub steerable_consideration: Option<Vec<Facility>>,
    pub coord: Point,
}

impl DemandOrigin {
    /// Origin whose bounds collapse onto the nominal demands.
    pub fn new(id: impl Into<String>, steerable: u64, walkin: u64, consideration: Vec<Candidate>) -> Self {
        Self {
            id: id.into(),
            steerable,
            walkin,
            steerable_lo: steerable,
            steerable_hi: steerable,
            walkin_lo: walkin,
            walkin_hi: walkin,
            consideration,
            steerable_consideration: None,
            coord: Point::default(),
        }
    }

    pub fn with_bounds(mut self, steerable: (u64, u64), walkin: (u64, u64)) -> Self {
        self.steerable_lo = steerable.0;
        self.steerable_hi = steerable.1;
        self.walkin_lo = walkin.0;
        self.walkin_hi = walkin.1;
        self
    }

    pub fn walkin_targets(&self) -> impl Iterator<Item = Facility> + '_ {
        self.consideration.iter().map(|c| c.facility)
    }

    pub fn steerable_targets(&self) -> impl Iterator<Item = Facility> + '_ {
        let (explicit, implicit) = match &self.steerable_consideration {
            Some(list) => (Some(list.iter().copied()), None),
            None => (None, Some(self.walkin_targets())),
        };
        explicit.into_iter().flatten().chain(implicit.into_iter().flatten())
    }

    pub fn steerable_len(&self) -> usize {
        match &self.steerable_consideration {
            Some(list) => list.len(),
            None => self.consideration.len(),
        }
    }

    /// Largest demand this origin can ever carry (nominal or upper bound).
    pub fn peak_demand(&self) -> u64 {
        self.steerable.max(self.steerable_hi) + self.walkin.max(self.walkin_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UncertaintyModel {
    #[default]
    Deterministic,
    Interval,
    Budgeted { gamma_steerable: u64, gamma_walkin: u64 },
}

/// Sites sharing one setup decision (session-expanded instances).
#[derive(Debug, Clone, PartialEq)]
pub struct SetupGroup {
    pub id: String,
    pub setup_cost: u64,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Instance {
    pub sites: Vec<Site>,
    pub practices: Vec<Practice>,
    pub origins: Vec<DemandOrigin>,
    /// Cost of one MMU session.
    pub session_cost: u64,
    /// Treatments per MMU session.
    pub session_capacity: u64,
    pub uncertainty: UncertaintyModel,
    /// Empty for ordinary instances. When non-empty every site belongs to
    /// exactly one group, carries at most one session, and a site counts
    /// as operating iff its session is run.
    pub setup_groups: Vec<SetupGroup>,
}

/// Which demand values a computation should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandMode<'a> {
    Nominal,
    /// Upper interval bounds (β, τ).
    WorstCase,
    Realized { steerable: &'a [u64], walkin: &'a [u64] },
}

impl DemandMode<'_> {
    pub fn steerable(&self, inst: &Instance, v: usize) -> u64 {
        match self {
            DemandMode::Nominal => inst.origins[v].steerable,
            DemandMode::WorstCase => inst.origins[v].steerable_hi,
            DemandMode::Realized { steerable, .. } => steerable[v],
        }
    }

    pub fn walkin(&self, inst: &Instance, v: usize) -> u64 {
        match self {
            DemandMode::Nominal => inst.origins[v].walkin,
            DemandMode::WorstCase => inst.origins[v].walkin_hi,
            DemandMode::Realized { walkin, .. } => walkin[v],
        }
    }
}

impl Instance {
    pub fn num_facilities(&self) -> usize {
        self.sites.len() + self.practices.len()
    }

    pub fn facility_index(&self, f: Facility) -> usize {
        match f {
            Facility::Site(i) => i,
            Facility::Practice(j) => self.sites.len() + j,
        }
    }

    pub fn facility_at(&self, idx: usize) -> Facility {
        if idx < self.sites.len() {
            Facility::Site(idx)
        } else {
            Facility::Practice(idx - self.sites.len())
        }
    }

    pub fn facilities(&self) -> impl Iterator<Item = Facility> + '_ {
        (0..self.num_facilities()).map(|i| self.facility_at(i))
    }

    pub fn facility_id(&self, f: Facility) -> &str {
        match f {
            Facility::Site(i) => &self.sites[i].id,
            Facility::Practice(j) => &self.practices[j].id,
        }
    }

    fn facility_exists(&self, f: Facility) -> bool {
        match f {
            Facility::Site(i) => i < self.sites.len(),
            Facility::Practice(j) => j < self.practices.len(),
        }
    }

    pub fn is_session_expanded(&self) -> bool {
        !self.setup_groups.is_empty()
    }

    /// Treatment capacity of a facility under the given session counts.
    pub fn capacity(&self, f: Facility, sessions: &[u64]) -> i64 {
        match f {
            Facility::Site(i) => (self.session_capacity * sessions[i]) as i64,
            Facility::Practice(j) => self.practices[j].capacity as i64,
        }
    }

    pub fn total_steerable(&self) -> u64 {
        self.origins.iter().map(|o| o.steerable).sum()
    }

    /// Facilities reachable by steerable demand of any origin in `subset`,
    /// as a flag vector over facility indices.
    pub fn steerable_neighborhood(&self, subset: &[bool]) -> Vec<bool> {
        let mut mark = vec![false; self.num_facilities()];
        for (v, o) in self.origins.iter().enumerate() {
            if subset[v] {
                for k in o.steerable_targets() {
                    mark[self.facility_index(k)] = true;
                }
            }
        }
        mark
    }

    /// Copy with nominal demands replaced by their upper bounds.
    pub fn worst_case_copy(&self) -> Instance {
        let mut copy = self.clone();
        for o in &mut copy.origins {
            o.steerable = o.steerable_hi;
            o.walkin = o.walkin_hi;
            o.steerable_lo = o.steerable_hi;
            o.walkin_lo = o.walkin_hi;
        }
        copy.uncertainty = UncertaintyModel::Deterministic;
        copy
    }

    /// Group index of every site (session-expanded instances only).
    pub fn site_groups(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.sites.len()];
        for (g, group) in self.setup_groups.iter().enumerate() {
            for &m in &group.members {
                if m < out.len() {
                    out[m] = Some(g);
                }
            }
        }
        out
    }
}

fn candidate_order(inst: &Instance, a: &Candidate, b: &Candidate) -> Ordering {
    a.distance_m
        .cmp(&b.distance_m)
        .then_with(|| inst.facility_id(a.facility).cmp(inst.facility_id(b.facility)))
}

/// Sort a consideration list into canonical (distance, facility id) order.
pub fn sort_consideration(inst: &Instance, list: &mut [Candidate]) {
    list.sort_by(|a, b| candidate_order(inst, a, b));
}

/// Check every instance invariant; an empty list means the instance is valid.
pub fn validate_instance(inst: &Instance) -> Vec<String> {
    let mut out = Vec::new();
    if inst.session_cost == 0 {
        out.push(String::from("session_cost must be positive"));
    }
    if inst.session_capacity == 0 {
        out.push(String::from("session_capacity must be positive"));
    }

    let mut ids: Vec<&str> = inst.sites.iter().map(|s| s.id.as_str()).collect();
    ids.extend(inst.practices.iter().map(|p| p.id.as_str()));
    ids.sort_unstable();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            out.push(format!("duplicate facility id {}", w[0]));
        }
    }
    let mut oids: Vec<&str> = inst.origins.iter().map(|o| o.id.as_str()).collect();
    oids.sort_unstable();
    for w in oids.windows(2) {
        if w[0] == w[1] {
            out.push(format!("duplicate origin id {}", w[0]));
        }
    }

    for o in &inst.origins {
        if o.steerable_lo > o.steerable_hi {
            out.push(format!("origin {}: steerable bounds inverted", o.id));
        }
        if o.walkin_lo > o.walkin_hi {
            out.push(format!("origin {}: walk-in bounds inverted", o.id));
        }
        let mut all_known = true;
        for c in &o.consideration {
            if !inst.facility_exists(c.facility) {
                out.push(format!("origin {} references unknown facility {:?}", o.id, c.facility));
                all_known = false;
            }
        }
        if let Some(list) = &o.steerable_consideration {
            for &f in list {
                if !inst.facility_exists(f) {
                    out.push(format!("origin {} references unknown steerable facility {:?}", o.id, f));
                    all_known = false;
                }
            }
            if o.steerable.max(o.steerable_hi) > 0 && list.is_empty() {
                out.push(format!("origin {} has steerable demand but no steerable targets", o.id));
            }
        }
        if o.consideration.is_empty() && o.peak_demand() > 0 {
            out.push(format!("origin {} has demand but an empty consideration set", o.id));
        }
        if all_known {
            for w in o.consideration.windows(2) {
                if candidate_order(inst, &w[0], &w[1]) != Ordering::Less {
                    out.push(format!(
                        "origin {}: consideration order violated at {} / {}",
                        o.id,
                        inst.facility_id(w[0].facility),
                        inst.facility_id(w[1].facility)
                    ));
                }
            }
        }
    }

    if let UncertaintyModel::Budgeted { gamma_steerable, gamma_walkin } = inst.uncertainty {
        let lo1: u64 = inst.origins.iter().map(|o| o.steerable_lo).sum();
        let hi1: u64 = inst.origins.iter().map(|o| o.steerable_hi).sum();
        let lo2: u64 = inst.origins.iter().map(|o| o.walkin_lo).sum();
        let hi2: u64 = inst.origins.iter().map(|o| o.walkin_hi).sum();
        if gamma_steerable < lo1 {
            out.push(format!("empty uncertainty set: steerable budget {} below lower-bound total {}", gamma_steerable, lo1));
        } else if gamma_steerable > hi1 {
            out.push(format!("steerable budget {} exceeds upper-bound total {}", gamma_steerable, hi1));
        }
        if gamma_walkin < lo2 {
            out.push(format!("empty uncertainty set: walk-in budget {} below lower-bound total {}", gamma_walkin, lo2));
        } else if gamma_walkin > hi2 {
            out.push(format!("walk-in budget {} exceeds upper-bound total {}", gamma_walkin, hi2));
        }
    }

    if inst.is_session_expanded() {
        let mut count = vec![0usize; inst.sites.len()];
        for g in &inst.setup_groups {
            for &m in &g.members {
                if m < count.len() {
                    count[m] += 1;
                } else {
                    out.push(format!("setup group {} references unknown site #{}", g.id, m));
                }
            }
        }
        for (i, &c) in count.iter().enumerate() {
            if c != 1 {
                out.push(format!("site {} belongs to {} setup groups", inst.sites[i].id, c));
            }
            if inst.sites[i].session_cap > 1 {
                out.push(format!("expanded site {} has session_cap above 1", inst.sites[i].id));
            }
        }
    }
    out
}

/// First facility of the origin's consideration list that operates:
/// any practice, or a site whose flag is set.
pub fn closest_operating_facility(inst: &Instance, origin: usize, setup: &[bool]) -> Option<Facility> {
    inst.origins[origin]
        .walkin_targets()
        .find(|&f| match f {
            Facility::Practice(_) => true,
            Facility::Site(i) => setup[i],
        })
}

/// Strategic operation plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    /// Per-site setup flag. For session-expanded instances this is the
    /// operated flag of the expanded site.
    pub setup: Vec<bool>,
    pub sessions: Vec<u64>,
    pub walkin_route: Vec<Option<Facility>>,
    /// Per origin, amounts aligned with its steerable targets.
    pub steerable_assign: Option<Vec<Vec<u64>>>,
}

impl Plan {
    pub fn empty(inst: &Instance) -> Self {
        Self::from_sessions(inst, vec![0; inst.sites.len()])
    }

    /// Plan that sets up exactly the sites with sessions and routes walk-ins
    /// to their closest operating facility.
    pub fn from_sessions(inst: &Instance, sessions: Vec<u64>) -> Self {
        let setup: Vec<bool> = sessions.iter().map(|&x| x > 0).collect();
        let walkin_route = (0..inst.origins.len())
            .map(|v| closest_operating_facility(inst, v, &setup))
            .collect();
        Self { setup, sessions, walkin_route, steerable_assign: None }
    }
}

/// Σ_{x_ℓ>0} c_ℓ + ĉ·Σ x_ℓ, charging each setup group once.
pub fn plan_cost(inst: &Instance, plan: &Plan) -> u64 {
    let sessions: u64 = plan.sessions.iter().sum();
    let setup: u64 = if inst.is_session_expanded() {
        inst.setup_groups
            .iter()
            .filter(|g| g.members.iter().any(|&m| plan.sessions[m] > 0))
            .map(|g| g.setup_cost)
            .sum()
    } else {
        inst.sites
            .iter()
            .zip(&plan.sessions)
            .filter(|(_, &x)| x > 0)
            .map(|(s, _)| s.setup_cost)
            .sum()
    };
    setup + inst.session_cost * sessions
}

/// Plan invariants: session bounds, routes inside consideration sets,
/// steerable assignment summing to nominal demand.
pub fn check_plan(inst: &Instance, plan: &Plan) -> Vec<String> {
    let mut out = Vec::new();
    if plan.sessions.len() != inst.sites.len() || plan.setup.len() != inst.sites.len() {
        out.push(String::from("plan site vectors have wrong length"));
        return out;
    }
    for (i, s) in inst.sites.iter().enumerate() {
        let cap = if plan.setup[i] { s.session_cap } else { 0 };
        if plan.sessions[i] > cap {
            out.push(format!("site {}: {} sessions exceed {}", s.id, plan.sessions[i], cap));
        }
    }
    for (v, o) in inst.origins.iter().enumerate() {
        match plan.walkin_route.get(v).copied().flatten() {
            Some(f) if !o.walkin_targets().any(|k| k == f) => {
                out.push(format!("origin {}: walk-in route outside consideration set", o.id));
            }
            _ => {}
        }
    }
    if let Some(z) = &plan.steerable_assign {
        for (v, o) in inst.origins.iter().enumerate() {
            let row = &z[v];
            if row.len() != o.steerable_len() {
                out.push(format!("origin {}: assignment length mismatch", o.id));
            } else if row.iter().sum::<u64>() != o.steerable {
                out.push(format!("origin {}: assignment does not sum to demand", o.id));
            }
        }
    }
    out
}

/// Keep only the first set entry of every row (rows aligned with the
/// origins' consideration lists).
pub fn normalize_walkin_assignment(w: &[Vec<bool>]) -> Vec<Vec<bool>> {
    w.iter()
        .map(|row| {
            let mut seen = false;
            row.iter()
                .map(|&b| {
                    let keep = b && !seen;
                    seen |= b;
                    keep
                })
                .collect()
        })
        .collect()
}

/// Routes read off a normalized walk-in matrix.
pub fn routes_from_matrix(inst: &Instance, w: &[Vec<bool>]) -> Vec<Option<Facility>> {
    inst.origins
        .iter()
        .zip(w)
        .map(|(o, row)| o.consideration.iter().zip(row).find(|(_, &b)| b).map(|(c, _)| c.facility))
        .collect()
}

/// Reduce an over-assignment so every origin receives exactly its demand,
/// removing surplus front to back along its steerable order.
pub fn trim_steerable_assignment(z: &[Vec<u64>], demand: &[u64]) -> Vec<Vec<u64>> {
    z.iter()
        .zip(demand)
        .map(|(row, &d)| {
            let total: u64 = row.iter().sum();
            let surplus = total.saturating_sub(d);
            let mut before = 0u64;
            row.iter()
                .map(|&amount| {
                    let cut = amount.min(surplus.saturating_sub(before));
                    before += amount;
                    amount - cut
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExpandError {
    #[error("session label list is empty")]
    NoSessions,
    #[error("instance is already session-expanded")]
    AlreadyExpanded,
    #[error("practice capacity table has wrong shape")]
    CapacityShape,
}

/// Which expanded facilities steerable demand of (v, t) may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteerableScope {
    /// Every session of every facility in the base consideration set.
    #[default]
    AllSessions,
    SameSession,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionSpec {
    pub labels: Vec<String>,
    /// `[practice][session]`; `None` splits each capacity evenly.
    pub practice_caps: Option<Vec<Vec<u64>>>,
    pub scope: SteerableScope,
}

/// Session-expanded instance plus the maps back to the base instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedInstance {
    pub instance: Instance,
    pub labels: Vec<String>,
}

impl ExpandedInstance {
    pub fn sessions(&self) -> usize {
        self.labels.len()
    }

    /// Base facility and session index of an expanded facility.
    pub fn flatten(&self, f: Facility) -> (Facility, usize) {
        let t = self.sessions();
        match f {
            Facility::Site(i) => (Facility::Site(i / t), i % t),
            Facility::Practice(j) => (Facility::Practice(j / t), j % t),
        }
    }

    pub fn expand(&self, base: Facility, session: usize) -> Facility {
        expand_ref(base, session, self.sessions())
    }

    pub fn origin_of(&self, expanded_origin: usize) -> (usize, usize) {
        (expanded_origin / self.sessions(), expanded_origin % self.sessions())
    }
}

fn expand_ref(base: Facility, session: usize, t: usize) -> Facility {
    match base {
        Facility::Site(i) => Facility::Site(i * t + session),
        Facility::Practice(j) => Facility::Practice(j * t + session),
    }
}

/// Split `value` into `parts` near-equal integers, remainder to the front.
pub fn split_evenly(value: u64, parts: usize) -> Vec<u64> {
    let n = parts as u64;
    (0..n).map(|i| value / n + u64::from(i < value % n)).collect()
}

/// Expand every site, practice and origin into one copy per session.
pub fn expand_sessions(inst: &Instance, spec: &SessionSpec) -> Result<ExpandedInstance, ExpandError> {
    let t = spec.labels.len();
    if t == 0 {
        return Err(ExpandError::NoSessions);
    }
    if inst.is_session_expanded() {
        return Err(ExpandError::AlreadyExpanded);
    }
    if let Some(caps) = &spec.practice_caps {
        if caps.len() != inst.practices.len() || caps.iter().any(|r| r.len() != t) {
            return Err(ExpandError::CapacityShape);
        }
    }

    let mut out = Instance {
        session_cost: inst.session_cost,
        session_capacity: inst.session_capacity,
        uncertainty: inst.uncertainty,
        ..Instance::default()
    };
    for s in &inst.sites {
        let members = (0..t).map(|k| out.sites.len() + k).collect();
        for label in &spec.labels {
            out.sites.push(Site {
                id: format!("{}@{}", s.id, label),
                setup_cost: 0,
                session_cap: s.session_cap.min(1),
                coord: s.coord,
            });
        }
        out.setup_groups.push(SetupGroup { id: s.id.clone(), setup_cost: s.setup_cost, members });
    }
    for (j, p) in inst.practices.iter().enumerate() {
        let caps = match &spec.practice_caps {
            Some(c) => c[j].clone(),
            None => split_evenly(p.capacity, t),
        };
        for (label, cap) in spec.labels.iter().zip(caps) {
            out.practices.push(Practice { id: format!("{}@{}", p.id, label), capacity: cap, coord: p.coord });
        }
    }
    for o in &inst.origins {
        let d = split_evenly(o.steerable, t);
        let u = split_evenly(o.walkin, t);
        let (alo, ahi) = (split_evenly(o.steerable_lo, t), split_evenly(o.steerable_hi, t));
        let (slo, shi) = (split_evenly(o.walkin_lo, t), split_evenly(o.walkin_hi, t));
        for (k, label) in spec.labels.iter().enumerate() {
            let consideration = o
                .consideration
                .iter()
                .map(|c| Candidate { facility: expand_ref(c.facility, k, t), distance_m: c.distance_m })
                .collect();
            let steerable_consideration = match spec.scope {
                SteerableScope::SameSession => None,
                SteerableScope::AllSessions => Some(Vec::new()),
            };
            out.origins.push(DemandOrigin {
                id: format!("{}@{}", o.id, label),
                steerable: d[k],
                walkin: u[k],
                steerable_lo: alo[k],
                steerable_hi: ahi[k],
                walkin_lo: slo[k],
                walkin_hi: shi[k],
                consideration,
                steerable_consideration,
                coord: o.coord,
            });
        }
    }
    // Ordering needs the expanded ids, so sort once everything exists.
    for v in 0..out.origins.len() {
        let base = &inst.origins[v / t];
        let mut walk = core::mem::take(&mut out.origins[v].consideration);
        sort_consideration(&out, &mut walk);
        out.origins[v].consideration = walk;
        if out.origins[v].steerable_consideration.is_some() {
            let mut all: Vec<Candidate> = base
                .consideration
                .iter()
                .flat_map(|c| (0..t).map(move |k| Candidate { facility: expand_ref(c.facility, k, t), distance_m: c.distance_m }))
                .collect();
            sort_consideration(&out, &mut all);
            out.origins[v].steerable_consideration = Some(all.into_iter().map(|c| c.facility).collect());
        }
    }
    Ok(ExpandedInstance { instance: out, labels: spec.labels.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny1;
    use proptest::prelude::*;

    #[test]
    fn tiny1_is_valid() {
        assert!(validate_instance(&tiny1()).is_empty());
    }

    #[test]
    fn unknown_facility_is_reported_once() {
        let mut inst = tiny1();
        inst.origins[0].consideration.push(Candidate { facility: Facility::Site(7), distance_m: 9000 });
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("v1") && v[0].contains("Site(7)"));
    }

    #[test]
    fn budget_below_lower_bounds_is_empty_set() {
        let mut inst = tiny1();
        inst.origins[0] = inst.origins[0].clone().with_bounds((25, 35), (2, 5));
        inst.uncertainty = UncertaintyModel::Budgeted { gamma_steerable: 20, gamma_walkin: 5 };
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("empty uncertainty set"));
    }

    #[test]
    fn closest_operating_facility_examples() {
        let inst = tiny1();
        assert_eq!(closest_operating_facility(&inst, 0, &[false]), Some(Facility::Practice(0)));
        assert_eq!(closest_operating_facility(&inst, 0, &[true]), Some(Facility::Practice(0)));
        let mut only_site = inst.clone();
        only_site.origins[0].consideration.remove(0);
        assert_eq!(closest_operating_facility(&only_site, 0, &[false]), None);
        assert_eq!(closest_operating_facility(&only_site, 0, &[true]), Some(Facility::Site(0)));
    }

    #[test]
    fn plan_cost_examples() {
        let inst = tiny1();
        assert_eq!(plan_cost(&inst, &Plan::from_sessions(&inst, vec![2])), 4);
        assert_eq!(plan_cost(&inst, &Plan::empty(&inst)), 0);
        let spec = SessionSpec { labels: vec!["MO".into(), "TU".into()], ..SessionSpec::default() };
        let ex = expand_sessions(&inst, &spec).unwrap();
        let plan = Plan::from_sessions(&ex.instance, vec![1, 1]);
        assert_eq!(plan_cost(&ex.instance, &plan), 4);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_walkin_assignment(&[vec![true, true]]), vec![vec![true, false]]);
        let w = vec![vec![false, true, false]];
        assert_eq!(normalize_walkin_assignment(&w), w);
    }

    #[test]
    fn trim_examples() {
        assert_eq!(trim_steerable_assignment(&[vec![2, 3]], &[3]), vec![vec![0, 3]]);
        assert_eq!(trim_steerable_assignment(&[vec![1, 2]], &[3]), vec![vec![1, 2]]);
        assert_eq!(trim_steerable_assignment(&[vec![1]], &[0]), vec![vec![0]]);
    }

    #[test]
    fn expansion_shapes() {
        let inst = tiny1();
        assert_eq!(expand_sessions(&inst, &SessionSpec::default()), Err(ExpandError::NoSessions));
        let spec = SessionSpec {
            labels: vec!["MO".into(), "WE_PM".into()],
            practice_caps: Some(vec![vec![4, 0]]),
            scope: SteerableScope::AllSessions,
        };
        let ex = expand_sessions(&inst, &spec).unwrap();
        let e = &ex.instance;
        assert!(validate_instance(e).is_empty(), "{:?}", validate_instance(e));
        assert_eq!(e.sites.len(), 2);
        assert_eq!(e.setup_groups.len(), 1);
        assert_eq!(e.setup_groups[0].members, vec![0, 1]);
        assert_eq!(e.practices[1].capacity, 0);
        assert_eq!(e.origins[0].steerable + e.origins[1].steerable, 30);
        for (v, o) in e.origins.iter().enumerate() {
            let (_, t) = ex.origin_of(v);
            assert!(o.walkin_targets().all(|f| ex.flatten(f).1 == t));
            assert_eq!(o.steerable_len(), 4);
        }
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_keeps_first(rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 0..6), 0..6)) {
            let once = normalize_walkin_assignment(&rows);
            prop_assert_eq!(normalize_walkin_assignment(&once), once.clone());
            for (r, n) in rows.iter().zip(&once) {
                let first = r.iter().position(|&b| b);
                let kept: Vec<usize> = n.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
                prop_assert_eq!(kept, first.into_iter().collect::<Vec<_>>());
            }
        }

        #[test]
        fn trim_hits_demand_and_never_grows(row in prop::collection::vec(0u64..20, 1..6), frac in 0.0f64..1.0) {
            let total: u64 = row.iter().sum();
            let d = (total as f64 * frac) as u64;
            let out = trim_steerable_assignment(&[row.clone()], &[d]);
            prop_assert_eq!(out[0].iter().sum::<u64>(), d);
            prop_assert!(out[0].iter().zip(&row).all(|(a, b)| a <= b));
        }

        #[test]
        fn plan_cost_is_monotone(xs in prop::collection::vec(0u64..5, 3), bump in 0usize..3) {
            let mut inst = tiny1();
            for i in 1..3 {
                inst.sites.push(Site { id: format!("l{}", i + 1), setup_cost: 3, session_cap: 10, coord: Point::default() });
            }
            let base = Plan::from_sessions(&inst, xs.clone());
            let mut more = xs.clone();
            more[bump] += 1;
            prop_assert!(plan_cost(&inst, &Plan::from_sessions(&inst, more)) >= plan_cost(&inst, &base));
        }

        #[test]
        fn expansion_flatten_is_bijective(t in 1usize..5) {
            let inst = tiny1();
            let labels = (0..t).map(|k| format!("S{}", k)).collect();
            let ex = expand_sessions(&inst, &SessionSpec { labels, ..SessionSpec::default() }).unwrap();
            let mut seen = alloc::collections::BTreeSet::new();
            for f in ex.instance.facilities() {
                let (b, s) = ex.flatten(f);
                prop_assert_eq!(ex.expand(b, s), f);
                prop_assert!(seen.insert((b, s)));
            }
            prop_assert_eq!(seen.len(), inst.num_facilities() * t);
        }
    }
}
