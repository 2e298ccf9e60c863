//! Random small instances and independent oracles shared by the
//! integration tests. Nothing here calls into the solver modules; flows use
//! Edmonds-Karp on a dense matrix and worst cases are found by enumeration.
#![allow(dead_code)]

use std::collections::VecDeque;

use mmu_core::milp::{LinearModel, MilpSolver, RowSense, Sense, SolveConfig, SolveStatus, VarKind};
use mmu_core::model::{sort_consideration, validate_instance, Candidate, DemandOrigin, Facility, Instance, Practice, Site};
use mmu_core::UncertaintyModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Upper limits for [`random_instance`]; actual counts are drawn below them.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub origins: usize,
    pub sites: usize,
    pub practices: usize,
    pub max_sessions: u64,
    pub max_steerable: u64,
    pub max_walkin: u64,
}

impl Shape {
    pub const fn new(origins: usize, sites: usize, practices: usize, max_sessions: u64) -> Self {
        Self { origins, sites, practices, max_sessions, max_steerable: 8, max_walkin: 3 }
    }
}

/// Valid random instance with budgeted uncertainty whose budgets keep the
/// nominal demands inside the sets.
pub fn random_instance(seed: u64, shape: Shape) -> Instance {
    let mut r = rng(seed);
    let n_sites = r.random_range(1..=shape.sites.max(1));
    let n_practices = r.random_range(0..=shape.practices);
    let n_origins = r.random_range(2.max(shape.origins / 2)..=shape.origins.max(2));
    let mut inst = Instance {
        session_cost: r.random_range(1..=3),
        session_capacity: r.random_range(6..=12),
        ..Instance::default()
    };
    for i in 0..n_sites {
        inst.sites.push(Site {
            id: format!("l{}", i + 1),
            setup_cost: r.random_range(0..=4),
            session_cap: r.random_range(shape.max_sessions.div_ceil(2).max(1)..=shape.max_sessions.max(1)),
            coord: Default::default(),
        });
    }
    for j in 0..n_practices {
        inst.practices.push(Practice { id: format!("p{}", j + 1), capacity: r.random_range(6..=20), coord: Default::default() });
    }
    let facilities: Vec<Facility> = inst.facilities().collect();
    for v in 0..n_origins {
        let len = r.random_range(1..=facilities.len().min(4));
        let mut pool = facilities.clone();
        let mut list = Vec::new();
        for _ in 0..len {
            let f = pool.swap_remove(r.random_range(0..pool.len()));
            list.push(Candidate { facility: f, distance_m: 100 * r.random_range(1..=12) });
        }
        sort_consideration(&inst, &mut list);
        let d = r.random_range(0..=shape.max_steerable);
        let u = r.random_range(0..=shape.max_walkin);
        let (dlo, dhi) = (d - r.random_range(0..=d), d + r.random_range(0..=3));
        let (ulo, uhi) = (u - r.random_range(0..=u), u + r.random_range(0..=2));
        inst.origins.push(DemandOrigin::new(format!("v{}", v + 1), d, u, list).with_bounds((dlo, dhi), (ulo, uhi)));
    }
    let sum = |f: fn(&DemandOrigin) -> u64| -> u64 { inst.origins.iter().map(f).sum() };
    let (d, dhi) = (sum(|o| o.steerable), sum(|o| o.steerable_hi));
    let (u, uhi) = (sum(|o| o.walkin), sum(|o| o.walkin_hi));
    let g1 = r.random_range(d..=dhi);
    let g2 = r.random_range(u..=uhi);
    inst.uncertainty = UncertaintyModel::Budgeted { gamma_steerable: g1, gamma_walkin: g2 };
    let problems = validate_instance(&inst);
    assert!(problems.is_empty(), "generator produced an invalid instance: {problems:?}");
    inst
}

/// Max-flow value by shortest augmenting paths on a capacity matrix.
pub fn edmonds_karp(mut cap: Vec<Vec<i64>>, s: usize, t: usize) -> i64 {
    let n = cap.len();
    let mut total = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(a) = queue.pop_front() {
            for b in 0..n {
                if prev[b] == usize::MAX && cap[a][b] > 0 {
                    prev[b] = a;
                    queue.push_back(b);
                }
            }
        }
        if prev[t] == usize::MAX {
            return total;
        }
        let mut push = i64::MAX;
        let mut b = t;
        while b != s {
            push = push.min(cap[prev[b]][b]);
            b = prev[b];
        }
        let mut b = t;
        while b != s {
            cap[prev[b]][b] -= push;
            cap[b][prev[b]] += push;
            b = prev[b];
        }
        total += push;
    }
}

fn position(inst: &Instance, f: Facility) -> usize {
    match f {
        Facility::Site(i) => i,
        Facility::Practice(j) => inst.sites.len() + j,
    }
}

fn capacity_of(inst: &Instance, f: Facility, sessions: &[u64]) -> i64 {
    match f {
        Facility::Site(i) => (sessions[i] * inst.session_capacity) as i64,
        Facility::Practice(j) => inst.practices[j].capacity as i64,
    }
}

/// First operating facility along the origin's list.
pub fn walkin_target(inst: &Instance, v: usize, operating: &[bool]) -> Option<Facility> {
    inst.origins[v].consideration.iter().map(|c| c.facility).find(|f| match f {
        Facility::Site(i) => operating[*i],
        Facility::Practice(_) => true,
    })
}

pub fn walkin_routes(inst: &Instance, operating: &[bool]) -> Vec<Option<Facility>> {
    (0..inst.origins.len()).map(|v| walkin_target(inst, v, operating)).collect()
}

/// Largest amount of `demand` the steerable arcs can place into `room`.
pub fn placeable(inst: &Instance, room: &[i64], demand: &[u64]) -> i64 {
    let nv = inst.origins.len();
    let nf = room.len();
    let (s, t) = (0, 1 + nv + nf);
    let mut cap = vec![vec![0i64; t + 1]; t + 1];
    for (v, o) in inst.origins.iter().enumerate() {
        cap[s][1 + v] = demand[v] as i64;
        for f in o.steerable_targets() {
            cap[1 + v][1 + nv + position(inst, f)] = i64::MAX / 4;
        }
    }
    for (k, &r) in room.iter().enumerate() {
        cap[1 + nv + k][t] = r.max(0);
    }
    edmonds_karp(cap, s, t)
}

/// Whether steerable demand fits next to walk-ins fixed on `routes`;
/// `None` when the walk-ins alone overload some facility.
pub fn steerable_fits(inst: &Instance, sessions: &[u64], routes: &[Option<Facility>], steerable: &[u64], walkin: &[u64]) -> Option<bool> {
    let mut room: Vec<i64> = inst.facilities().map(|f| capacity_of(inst, f, sessions)).collect();
    for (v, r) in routes.iter().enumerate() {
        if let Some(f) = r {
            room[position(inst, *f)] -= walkin[v] as i64;
        }
    }
    if room.iter().any(|&r| r < 0) {
        return None;
    }
    Some(placeable(inst, &room, steerable) == steerable.iter().sum::<u64>() as i64)
}

/// Whether (operating flags, sessions) serves the given demands: every
/// origin with a list reaches an operating facility, walk-ins fit where they
/// land, and the steerable demand can be placed in what is left.
pub fn serves(inst: &Instance, operating: &[bool], sessions: &[u64], steerable: &[u64], walkin: &[u64]) -> bool {
    let routes = walkin_routes(inst, operating);
    let stranded = inst.origins.iter().zip(&routes).any(|(o, r)| !o.consideration.is_empty() && r.is_none());
    !stranded && steerable_fits(inst, sessions, &routes, steerable, walkin) == Some(true)
}

pub fn nominal(inst: &Instance) -> (Vec<u64>, Vec<u64>) {
    (inst.origins.iter().map(|o| o.steerable).collect(), inst.origins.iter().map(|o| o.walkin).collect())
}

/// Cheapest serving (y, x) over every x ≤ b·y, or `None` if none serves.
pub fn brute_force_optimum(inst: &Instance) -> Option<u64> {
    let (d, u) = nominal(inst);
    let n = inst.sites.len();
    let mut best: Option<u64> = None;
    for ymask in 0u32..(1 << n) {
        let y: Vec<bool> = (0..n).map(|i| ymask >> i & 1 == 1).collect();
        let limits: Vec<u64> = (0..n).map(|i| if y[i] { inst.sites[i].session_cap } else { 0 }).collect();
        let mut x = vec![0u64; n];
        loop {
            let cost = (0..n).filter(|&i| y[i]).map(|i| inst.sites[i].setup_cost).sum::<u64>()
                + inst.session_cost * x.iter().sum::<u64>();
            if best.is_none_or(|b| cost < b) && serves(inst, &y, &x, &d, &u) {
                best = Some(cost);
            }
            // odometer step
            let mut i = 0;
            while i < n && x[i] == limits[i] {
                x[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            x[i] += 1;
        }
    }
    best
}

/// Cheapest serving binary session vector of a session-expanded instance;
/// a group is charged once if any of its members runs.
pub fn brute_force_expanded(inst: &Instance) -> Option<u64> {
    let (d, u) = nominal(inst);
    let n = inst.sites.len();
    assert!(n <= 16);
    let mut best: Option<u64> = None;
    for mask in 0u32..(1 << n) {
        let on: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        if (0..n).any(|i| on[i] && inst.sites[i].session_cap == 0) {
            continue;
        }
        let x: Vec<u64> = on.iter().map(|&b| u64::from(b)).collect();
        let setup: u64 = inst.setup_groups.iter().filter(|g| g.members.iter().any(|&m| on[m])).map(|g| g.setup_cost).sum();
        let cost = setup + inst.session_cost * x.iter().sum::<u64>();
        if best.is_none_or(|b| cost < b) && serves(inst, &on, &x, &d, &u) {
            best = Some(cost);
        }
    }
    best
}

/// Every integer vector with lo ≤ e ≤ hi and Σe ≤ budget.
pub fn budget_set_points(lo: &[u64], hi: &[u64], budget: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = lo.to_vec();
    let base: u64 = lo.iter().sum();
    if base > budget {
        return out;
    }
    fn rec(i: usize, cur: &mut Vec<u64>, hi: &[u64], left: u64, out: &mut Vec<Vec<u64>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        let start = cur[i];
        for extra in 0..=(hi[i] - start).min(left) {
            cur[i] = start + extra;
            rec(i + 1, cur, hi, left - extra, out);
        }
        cur[i] = start;
    }
    rec(0, &mut cur, hi, budget - base, &mut out);
    out
}

/// max over the budgeted set of Σ_{v∈mask} e_v, found by enumeration.
pub fn enumerated_worst_case(points: &[Vec<u64>], mask: &[bool]) -> i64 {
    points
        .iter()
        .map(|p| p.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| *x as i64).sum::<i64>())
        .max()
        .unwrap_or(i64::MIN)
}

/// Largest total over the origins in `mask` that a budgeted set allows:
/// every origin starts at its lower bound, then the remaining budget is
/// spent on masked origins up to their upper bounds.
pub fn greedy_load(lo: &[u64], hi: &[u64], budget: u64, mask: &[bool]) -> i64 {
    let mut left = budget as i64 - lo.iter().map(|&x| x as i64).sum::<i64>();
    let mut load = 0;
    for v in 0..lo.len() {
        if mask[v] {
            let extra = ((hi[v] - lo[v]) as i64).min(left.max(0));
            left -= extra;
            load += lo[v] as i64 + extra;
        }
    }
    load
}

pub fn budgets(inst: &Instance) -> (u64, u64) {
    match inst.uncertainty {
        UncertaintyModel::Budgeted { gamma_steerable, gamma_walkin } => (gamma_steerable, gamma_walkin),
        _ => (u64::MAX / 4, u64::MAX / 4),
    }
}

pub fn steerable_bounds(inst: &Instance) -> (Vec<u64>, Vec<u64>) {
    (inst.origins.iter().map(|o| o.steerable_lo).collect(), inst.origins.iter().map(|o| o.steerable_hi).collect())
}

pub fn walkin_bounds(inst: &Instance) -> (Vec<u64>, Vec<u64>) {
    (inst.origins.iter().map(|o| o.walkin_lo).collect(), inst.origins.iter().map(|o| o.walkin_hi).collect())
}

/// Facilities steerable demand of `subset` can reach, by flat index.
pub fn reach_of(inst: &Instance, subset: &[bool]) -> Vec<bool> {
    let mut out = vec![false; inst.num_facilities()];
    for (v, o) in inst.origins.iter().enumerate() {
        if subset[v] {
            for f in o.steerable_targets() {
                out[position(inst, f)] = true;
            }
        }
    }
    out
}

/// Most negative robust slack over all origin subsets (0 if none is
/// negative), with worst cases from [`greedy_load`].
pub fn enumerated_robust_violation(inst: &Instance, sessions: &[u64], routes: &[Option<Facility>]) -> i64 {
    let n = inst.origins.len();
    let (g1, g2) = budgets(inst);
    let (slo, shi) = steerable_bounds(inst);
    let (wlo, whi) = walkin_bounds(inst);
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let subset: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
        let reach = reach_of(inst, &subset);
        let capacity: i64 = inst.facilities().filter(|&f| reach[position(inst, f)]).map(|f| capacity_of(inst, f, sessions)).sum();
        let routed: Vec<bool> = routes.iter().map(|r| r.is_some_and(|f| reach[position(inst, f)])).collect();
        let slack = capacity - greedy_load(&slo, &shi, g1, &subset) - greedy_load(&wlo, &whi, g2, &routed);
        best = best.min(slack);
    }
    best
}

/// Minimum total overage from a transportation MILP: integer steerable
/// shipments along each origin's targets, one overage variable per
/// facility, walk-ins fixed at their closest operating facility, and the
/// whole demand of origins without such a facility counted directly.
pub fn overage_milp(
    inst: &Instance,
    operating: &[bool],
    sessions: &[u64],
    steerable: &[u64],
    walkin: &[u64],
    solver: &dyn MilpSolver,
) -> u64 {
    let mut m = LinearModel::new(Sense::Minimize);
    let mut stranded = 0u64;
    let mut walk_load = vec![0i64; inst.num_facilities()];
    let mut inflow: Vec<Vec<(mmu_core::milp::VarId, f64)>> = vec![Vec::new(); inst.num_facilities()];
    for (v, o) in inst.origins.iter().enumerate() {
        match walkin_target(inst, v, operating) {
            Some(f) => walk_load[position(inst, f)] += walkin[v] as i64,
            None => {
                stranded += steerable[v] + walkin[v];
                continue;
            }
        }
        let ship: Vec<_> = o
            .steerable_targets()
            .map(|f| {
                let z = m.add_var(format!("z_{v}_{}", position(inst, f)), VarKind::Integer, 0.0, f64::INFINITY, 0.0);
                inflow[position(inst, f)].push((z, 1.0));
                z
            })
            .collect();
        m.add_linear_constraint(format!("ship_{v}"), ship.iter().map(|&z| (z, 1.0)).collect(), RowSense::Eq, steerable[v] as f64);
    }
    for f in inst.facilities() {
        let k = position(inst, f);
        let over = m.add_var(format!("over_{k}"), VarKind::Integer, 0.0, f64::INFINITY, 1.0);
        let mut terms = inflow[k].clone();
        terms.push((over, -1.0));
        m.add_linear_constraint(format!("cap_{k}"), terms, RowSense::Le, (capacity_of(inst, f, sessions) - walk_load[k]) as f64);
    }
    let out = solver.solve(&m, &SolveConfig { mip_gap: 0.0, ..SolveConfig::default() }).expect("overage MILP");
    assert_eq!(out.status, SolveStatus::Optimal);
    out.objective.round() as u64 + stranded
}

/// Some sub-multiset of `a` sums to `b`.
pub fn subset_sum(a: &[u64], b: u64) -> bool {
    (0u32..(1 << a.len())).any(|mask| a.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).sum::<u64>() == b)
}
