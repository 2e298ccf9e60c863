//! Residual capacities, the steerable-assignment flow network and an exact
//! integral max-flow (Dinic).
//!
//! Node layout of networks built from an instance: source `0`, origins
//! `1..=|V|`, facilities next (sites then practices), sink last.

use crate::model::{DemandMode, Facility, Instance};
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("negative residual capacity {residual} at {facility:?}")]
    NegativeResidual { facility: Facility, residual: i64 },
    #[error("infeasible plan: flow {value} below demand {demand}")]
    InfeasiblePlan { value: i64, demand: i64 },
}

/// Treatment capacity left per facility after routing walk-ins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualCapacities {
    /// Indexed by [`Instance::facility_index`].
    pub values: Vec<i64>,
}

impl ResidualCapacities {
    pub fn get(&self, inst: &Instance, f: Facility) -> i64 {
        self.values[inst.facility_index(f)]
    }

    /// Facility indices with negative residual (Assumption-1 breaches).
    pub fn breaches(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, &g)| g < 0).map(|(i, _)| i).collect()
    }

    pub fn clamped(&self) -> Vec<i64> {
        self.values.iter().map(|&g| g.max(0)).collect()
    }
}

/// γ_k = capacity(k) − walk-ins routed to k.
pub fn residual_capacities(
    inst: &Instance,
    sessions: &[u64],
    routes: &[Option<Facility>],
    mode: DemandMode<'_>,
) -> ResidualCapacities {
    let mut values: Vec<i64> = inst.facilities().map(|f| inst.capacity(f, sessions)).collect();
    for (v, route) in routes.iter().enumerate() {
        if let Some(f) = route {
            values[inst.facility_index(*f)] -= mode.walkin(inst, v) as i64;
        }
    }
    ResidualCapacities { values }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    pub node_count: usize,
    pub source: usize,
    pub sink: usize,
    pub arcs: Vec<Arc>,
    /// Sum of source arc capacities (D).
    pub total_demand: i64,
    /// Per origin, arc indices aligned with its steerable targets.
    pub assignment_arcs: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(node_count: usize, source: usize, sink: usize) -> Self {
        Self { node_count, source, sink, arcs: Vec::new(), total_demand: 0, assignment_arcs: Vec::new() }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: i64) -> usize {
        assert!(capacity >= 0, "arc capacities must be nonnegative");
        self.arcs.push(Arc { from, to, capacity });
        self.arcs.len() - 1
    }

    pub fn origin_node(v: usize) -> usize {
        1 + v
    }

    pub fn facility_node(inst: &Instance, f: Facility) -> usize {
        1 + inst.origins.len() + inst.facility_index(f)
    }
}

/// Network with source arcs `steerable[v]`, facility arcs `capacity[k]` and
/// assignment arcs of capacity D along every origin's steerable targets.
pub fn build_flow_network(inst: &Instance, capacity: &[i64], steerable: &[u64]) -> FlowNetwork {
    let n = inst.origins.len() + inst.num_facilities() + 2;
    let mut net = FlowNetwork::new(n, 0, n - 1);
    let total: i64 = steerable.iter().map(|&d| d as i64).sum();
    for (v, &d) in steerable.iter().enumerate() {
        net.add_arc(0, FlowNetwork::origin_node(v), d as i64);
    }
    for (v, o) in inst.origins.iter().enumerate() {
        let arcs = o
            .steerable_targets()
            .map(|k| net.add_arc(FlowNetwork::origin_node(v), FlowNetwork::facility_node(inst, k), total))
            .collect();
        net.assignment_arcs.push(arcs);
    }
    for (idx, &cap) in capacity.iter().enumerate() {
        net.add_arc(FlowNetwork::facility_node(inst, inst.facility_at(idx)), n - 1, cap);
    }
    net.total_demand = total;
    net
}

/// Network for the steerable subproblem; rejects negative residuals.
pub fn build_benders_network(
    inst: &Instance,
    residuals: &ResidualCapacities,
    mode: DemandMode<'_>,
) -> Result<FlowNetwork, FlowError> {
    if let Some(&idx) = residuals.breaches().first() {
        return Err(FlowError::NegativeResidual { facility: inst.facility_at(idx), residual: residuals.values[idx] });
    }
    let steerable: Vec<u64> = (0..inst.origins.len()).map(|v| mode.steerable(inst, v)).collect();
    Ok(build_flow_network(inst, &residuals.values, &steerable))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxFlow {
    pub value: i64,
    /// Flow per arc of the input network.
    pub flow: Vec<i64>,
    /// Nodes reachable from the source in the final residual graph.
    pub source_side: Vec<bool>,
}

struct Dinic {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    level: Vec<i32>,
    next: Vec<usize>,
}

impl Dinic {
    fn new(net: &FlowNetwork) -> Self {
        let mut d = Dinic {
            adj: vec![Vec::new(); net.node_count],
            to: Vec::with_capacity(2 * net.arcs.len()),
            cap: Vec::with_capacity(2 * net.arcs.len()),
            level: vec![0; net.node_count],
            next: vec![0; net.node_count],
        };
        for a in &net.arcs {
            d.adj[a.from].push(d.to.len());
            d.to.push(a.to);
            d.cap.push(a.capacity);
            d.adj[a.to].push(d.to.len());
            d.to.push(a.from);
            d.cap.push(0);
        }
        d
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let w = self.to[e];
                if self.cap[e] > 0 && self.level[w] < 0 {
                    self.level[w] = self.level[u] + 1;
                    queue.push_back(w);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, limit: i64) -> i64 {
        if u == t {
            return limit;
        }
        while self.next[u] < self.adj[u].len() {
            let e = self.adj[u][self.next[u]];
            let w = self.to[e];
            if self.cap[e] > 0 && self.level[w] == self.level[u] + 1 {
                let pushed = self.dfs(w, t, limit.min(self.cap[e]));
                if pushed > 0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            self.next[u] += 1;
        }
        0
    }

    fn run(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        if s == t {
            return 0;
        }
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.next.iter_mut().for_each(|n| *n = 0);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }
}

/// Exact maximum flow with the residual-reachable source side.
pub fn max_flow(net: &FlowNetwork) -> MaxFlow {
    let mut d = Dinic::new(net);
    let value = d.run(net.source, net.sink);
    d.bfs(net.source);
    let source_side = d.level.iter().map(|&l| l >= 0).collect();
    let flow = net.arcs.iter().enumerate().map(|(i, a)| a.capacity - d.cap[2 * i]).collect();
    MaxFlow { value, flow, source_side }
}

/// Inclusion-minimal source side of a minimum cut.
pub fn min_cut(net: &FlowNetwork) -> Vec<bool> {
    max_flow(net).source_side
}

/// Capacity of the arcs leaving `side`.
pub fn cut_capacity(net: &FlowNetwork, side: &[bool]) -> i64 {
    net.arcs.iter().filter(|a| side[a.from] && !side[a.to]).map(|a| a.capacity).sum()
}

/// Steerable assignment read off a saturating flow.
pub fn recover_assignment(net: &FlowNetwork, flow: &MaxFlow) -> Result<Vec<Vec<u64>>, FlowError> {
    if flow.value < net.total_demand {
        return Err(FlowError::InfeasiblePlan { value: flow.value, demand: net.total_demand });
    }
    Ok(net
        .assignment_arcs
        .iter()
        .map(|arcs| arcs.iter().map(|&a| flow.flow[a] as u64).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny1;
    use crate::model::Plan;
    use proptest::prelude::*;

    fn tiny_residuals(x: u64) -> (Instance, ResidualCapacities) {
        let inst = tiny1();
        let plan = Plan::from_sessions(&inst, vec![x]);
        let r = residual_capacities(&inst, &plan.sessions, &plan.walkin_route, DemandMode::Nominal);
        (inst, r)
    }

    #[test]
    fn residual_examples() {
        let (inst, r) = tiny_residuals(2);
        assert_eq!(r.get(&inst, Facility::Practice(0)), 1);
        assert_eq!(r.get(&inst, Facility::Site(0)), 56);
        let none = residual_capacities(&inst, &[0], &[None], DemandMode::Nominal);
        assert_eq!(none.values, vec![0, 4]);
        let mut unc = inst.clone();
        unc.origins[0].walkin_hi = 5;
        let w = residual_capacities(&unc, &[2], &[Some(Facility::Practice(0))], DemandMode::WorstCase);
        assert_eq!(w.get(&unc, Facility::Practice(0)), -1);
        assert_eq!(w.breaches(), vec![1]);
    }

    #[test]
    fn tiny1_network_shape() {
        let (inst, r) = tiny_residuals(2);
        let net = build_benders_network(&inst, &r, DemandMode::Nominal).unwrap();
        assert_eq!(net.node_count, 5);
        let arcs: Vec<(usize, usize, i64)> = net.arcs.iter().map(|a| (a.from, a.to, a.capacity)).collect();
        // s=0, v1=1, l1=2, p1=3, t=4
        assert_eq!(arcs, vec![(0, 1, 30), (1, 3, 30), (1, 2, 30), (2, 4, 56), (3, 4, 1)]);
    }

    #[test]
    fn tiny1_cut_and_flow() {
        let (inst, r) = tiny_residuals(1);
        let net = build_benders_network(&inst, &r, DemandMode::Nominal).unwrap();
        let mf = max_flow(&net);
        assert_eq!(mf.value, 29);
        assert_eq!(mf.source_side, vec![true, true, true, true, false]);
        assert_eq!(cut_capacity(&net, &mf.source_side), 29);
        assert!(recover_assignment(&net, &mf).is_err());

        let (inst, r) = tiny_residuals(2);
        let net = build_benders_network(&inst, &r, DemandMode::Nominal).unwrap();
        let mf = max_flow(&net);
        assert_eq!(mf.value, 30);
        let z = recover_assignment(&net, &mf).unwrap();
        assert_eq!(z[0].iter().sum::<u64>(), 30);
        assert!(z[0][0] <= 1);
    }

    #[test]
    fn negative_residual_is_rejected() {
        let inst = tiny1();
        let r = ResidualCapacities { values: vec![0, -1] };
        assert_eq!(
            build_benders_network(&inst, &r, DemandMode::Nominal),
            Err(FlowError::NegativeResidual { facility: Facility::Practice(0), residual: -1 })
        );
    }

    #[test]
    fn empty_network() {
        let inst = Instance::default();
        let net = build_flow_network(&inst, &[], &[]);
        assert_eq!(net.node_count, 2);
        assert_eq!(max_flow(&net).value, 0);
        assert_eq!(recover_assignment(&net, &max_flow(&net)).unwrap(), Vec::<Vec<u64>>::new());
    }

    fn brute_min_cut(net: &FlowNetwork) -> i64 {
        let inner = net.node_count - 2;
        (0u32..1 << inner)
            .map(|mask| {
                let side: Vec<bool> = (0..net.node_count)
                    .map(|n| n == net.source || (n != net.sink && mask >> (n - 1) & 1 == 1))
                    .collect();
                cut_capacity(net, &side)
            })
            .min()
            .unwrap()
    }

    proptest! {
        #[test]
        fn max_flow_equals_min_cut(
            n in 2usize..7,
            raw in prop::collection::vec((0usize..7, 0usize..7, 0i64..9), 0..20),
        ) {
            let mut net = FlowNetwork::new(n, 0, n - 1);
            for (a, b, c) in raw {
                let (a, b) = (a % n, b % n);
                if a != b {
                    net.add_arc(a, b, c);
                }
            }
            let mf = max_flow(&net);
            prop_assert_eq!(mf.value, cut_capacity(&net, &mf.source_side));
            prop_assert_eq!(mf.value, brute_min_cut(&net));
            prop_assert!(mf.flow.iter().zip(&net.arcs).all(|(f, a)| *f >= 0 && *f <= a.capacity));
            for node in 0..n {
                if node == net.source || node == net.sink {
                    continue;
                }
                let inflow: i64 = net.arcs.iter().zip(&mf.flow).filter(|(a, _)| a.to == node).map(|(_, f)| f).sum();
                let outflow: i64 = net.arcs.iter().zip(&mf.flow).filter(|(a, _)| a.from == node).map(|(_, f)| f).sum();
                prop_assert_eq!(inflow, outflow);
            }
        }
    }
}
