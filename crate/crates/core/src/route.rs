//! Last-mile road graph and candidate-route generation.
//!
//! Routes are simple paths found by Dijkstra under either nominal link
//! costs or penalized costs `cost + theta * disruption`, where the
//! disruption values come from the adversary's last solve. Equal-cost ties
//! resolve to the lexicographically smallest node sequence, so route
//! generation is deterministic. The pool only ever grows; a per-pair cap
//! bounds it and cap hits are recorded.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

/// Default cap on pooled routes per origin-destination pair.
pub const DEFAULT_POOL_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    /// Nominal traversal cost, minutes.
    pub cost_min: f64,
    /// Accumulated per-unit cost increase from the adversary (dimensionless
    /// effort-to-impact output; multiplied by theta when penalizing).
    pub disruption: f64,
}

/// Directed road graph. Parallel links between the same ordered node pair
/// are disallowed; model them with distinct intermediate nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoadNetwork {
    links: BTreeMap<(String, String), Link>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostModel {
    Nominal,
    Penalized { theta_milli: u64 },
}

impl CostModel {
    pub fn penalized(theta: f64) -> Self {
        // Stored in fixed point purely so the enum stays Eq/hashable for
        // callers; converted back when pricing.
        CostModel::Penalized { theta_milli: (theta * 1000.0) as u64 }
    }

    fn theta(&self) -> f64 {
        match self {
            CostModel::Nominal => 0.0,
            CostModel::Penalized { theta_milli } => *theta_milli as f64 / 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Route {
    pub origin: String,
    pub dest: String,
    /// Node sequence from origin to destination inclusive.
    pub nodes: Vec<String>,
}

impl Route {
    /// Stable identifier: the node sequence itself.
    pub fn id(&self) -> String {
        self.nodes.join("->")
    }

    pub fn links(&self) -> impl Iterator<Item = (&String, &String)> {
        self.nodes.iter().zip(self.nodes.iter().skip(1))
    }

    pub fn contains_link(&self, from: &str, to: &str) -> bool {
        self.links().any(|(a, b)| a == from && b == to)
    }

    pub fn nominal_length(&self, net: &RoadNetwork) -> f64 {
        self.length_with(net, 0.0)
    }

    pub fn current_length(&self, net: &RoadNetwork, theta: f64) -> f64 {
        self.length_with(net, theta)
    }

    fn length_with(&self, net: &RoadNetwork, theta: f64) -> f64 {
        self.links()
            .map(|(a, b)| {
                net.link(a, b)
                    .map(|l| l.cost_min + theta * l.disruption)
                    .unwrap_or(f64::INFINITY)
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub enum RouteError {
    BadLink(String),
    UnknownNode(String),
    SameNode(String),
    Unreachable { origin: String, dest: String },
}

impl fmt::Display for RouteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteError::BadLink(msg) => write!(f, "bad link: {msg}"),
            RouteError::UnknownNode(n) => write!(f, "unknown node {n:?}"),
            RouteError::SameNode(n) => write!(f, "origin equals destination {n:?}"),
            RouteError::Unreachable { origin, dest } => {
                write!(f, "no route from {origin} to {dest}")
            }
        }
    }
}

impl core::error::Error for RouteError {}

impl RoadNetwork {
    pub fn new(links: impl IntoIterator<Item = (String, String, f64)>) -> Result<Self, RouteError> {
        let mut net = RoadNetwork::default();
        for (from, to, cost_min) in links {
            if cost_min <= 0.0 || !cost_min.is_finite() {
                return Err(RouteError::BadLink(format!(
                    "({from}, {to}) must have positive finite cost, got {cost_min}"
                )));
            }
            if from == to {
                return Err(RouteError::BadLink(format!("({from}, {to}) is a self-loop")));
            }
            if net
                .links
                .insert((from.clone(), to.clone()), Link { cost_min, disruption: 0.0 })
                .is_some()
            {
                return Err(RouteError::BadLink(format!("parallel link ({from}, {to})")));
            }
        }
        Ok(net)
    }

    pub fn nodes(&self) -> BTreeSet<String> {
        self.links
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect()
    }

    pub fn links(&self) -> &BTreeMap<(String, String), Link> {
        &self.links
    }

    pub fn link(&self, from: &str, to: &str) -> Option<&Link> {
        self.links.get(&(from.into(), to.into()))
    }

    pub fn has_node(&self, node: &str) -> bool {
        self.links.keys().any(|(a, b)| a == node || b == node)
    }

    /// Overwrites per-link disruption values; links not mentioned keep
    /// their current value. Negative values are rejected.
    pub fn set_disruption(
        &mut self,
        values: &BTreeMap<(String, String), f64>,
    ) -> Result<(), RouteError> {
        for (key, &z) in values {
            if z < 0.0 || !z.is_finite() {
                return Err(RouteError::BadLink(format!(
                    "({}, {}) disruption must be nonnegative, got {z}",
                    key.0, key.1
                )));
            }
            if let Some(link) = self.links.get_mut(key) {
                link.disruption = z;
            }
        }
        Ok(())
    }

    fn neighbors<'a>(&'a self, node: &'a str) -> impl Iterator<Item = (&'a String, &'a Link)> {
        self.links
            .range((node.to_string(), String::new())..)
            .take_while(move |((a, _), _)| a == node)
            .map(|((_, b), l)| (b, l))
    }
}

/// Wrapper giving f64 costs a total order for the priority queue.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Minimum-cost simple path under the selected cost model. Among equal-cost
/// paths the lexicographically smallest node sequence wins.
pub fn shortest_route(
    net: &RoadNetwork,
    origin: &str,
    dest: &str,
    cost: CostModel,
) -> Result<Route, RouteError> {
    if origin == dest {
        return Err(RouteError::SameNode(origin.into()));
    }
    for node in [origin, dest] {
        if !net.has_node(node) {
            return Err(RouteError::UnknownNode(node.into()));
        }
    }
    let theta = cost.theta();
    let mut heap: BinaryHeap<Reverse<(Cost, Vec<String>)>> = BinaryHeap::new();
    let mut settled: BTreeSet<String> = BTreeSet::new();
    heap.push(Reverse((Cost(0.0), alloc::vec![origin.to_string()])));
    while let Some(Reverse((Cost(c), path))) = heap.pop() {
        let node = path.last().expect("nonempty path").clone();
        if node == dest {
            return Ok(Route { origin: origin.into(), dest: dest.into(), nodes: path });
        }
        if !settled.insert(node.clone()) {
            continue;
        }
        for (next, link) in net.neighbors(&node) {
            if settled.contains(next) || path.contains(next) {
                continue;
            }
            let mut extended = path.clone();
            extended.push(next.clone());
            heap.push(Reverse((Cost(c + link.cost_min + theta * link.disruption), extended)));
        }
    }
    Err(RouteError::Unreachable { origin: origin.into(), dest: dest.into() })
}

/// Candidate routes per origin-destination pair. Routes are never removed;
/// identical link sequences are deduplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePool {
    pub per_pair: BTreeMap<(String, String), Vec<Route>>,
    pub cap_per_pair: usize,
    /// Pairs whose cap refused at least one new route.
    pub cap_hits: BTreeSet<(String, String)>,
}

impl RoutePool {
    pub fn new(cap_per_pair: usize) -> Self {
        RoutePool {
            per_pair: BTreeMap::new(),
            cap_per_pair,
            cap_hits: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.per_pair.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn routes(&self, origin: &str, dest: &str) -> &[Route] {
        self.per_pair
            .get(&(origin.into(), dest.into()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all_routes(&self) -> impl Iterator<Item = &Route> {
        self.per_pair.values().flatten()
    }

    /// Adds a route unless an identical node sequence is already pooled or
    /// the pair is at its cap. Returns whether the pool grew.
    pub fn insert(&mut self, route: Route) -> bool {
        let key = (route.origin.clone(), route.dest.clone());
        let routes = self.per_pair.entry(key.clone()).or_default();
        if routes.iter().any(|r| r.nodes == route.nodes) {
            return false;
        }
        if routes.len() >= self.cap_per_pair {
            self.cap_hits.insert(key);
            return false;
        }
        routes.push(route);
        true
    }
}

/// Outcome of one pool-extension pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtendOutcome {
    /// Ids of routes added this pass, in pair order.
    pub added: Vec<String>,
    /// Pairs skipped because the destination is unreachable.
    pub unreachable: Vec<(String, String)>,
}

/// Builds the initial pool from nominal shortest paths.
pub fn initial_pool(
    net: &RoadNetwork,
    pairs: &[(String, String)],
    cap_per_pair: usize,
) -> (RoutePool, ExtendOutcome) {
    let mut pool = RoutePool::new(cap_per_pair);
    let outcome = extend_with(&mut pool, net, pairs, CostModel::Nominal);
    (pool, outcome)
}

/// Recomputes the penalized shortest path for every pair and pools any path
/// not already present. The pool only grows.
pub fn extend_pool(
    pool: &mut RoutePool,
    net: &RoadNetwork,
    pairs: &[(String, String)],
    theta: f64,
) -> ExtendOutcome {
    extend_with(pool, net, pairs, CostModel::penalized(theta))
}

fn extend_with(
    pool: &mut RoutePool,
    net: &RoadNetwork,
    pairs: &[(String, String)],
    cost: CostModel,
) -> ExtendOutcome {
    let mut outcome = ExtendOutcome::default();
    for (origin, dest) in pairs {
        match shortest_route(net, origin, dest, cost) {
            Ok(route) => {
                let id = route.id();
                if pool.insert(route) {
                    outcome.added.push(id);
                }
            }
            Err(RouteError::Unreachable { .. }) => {
                outcome.unreachable.push((origin.clone(), dest.clone()));
            }
            Err(_) => outcome.unreachable.push((origin.clone(), dest.clone())),
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn l(a: &str, b: &str, c: f64) -> (String, String, f64) {
        (a.to_string(), b.to_string(), c)
    }

    /// Two parallel three-link corridors between d and t; the western
    /// detour costs 6 minutes more end to end.
    pub(crate) fn two_corridor_net() -> RoadNetwork {
        RoadNetwork::new([
            l("d", "m1", 80.0),
            l("m1", "m2", 80.0),
            l("m2", "t", 80.0),
            l("d", "w1", 82.0),
            l("w1", "w2", 82.0),
            l("w2", "t", 82.0),
        ])
        .unwrap()
    }

    #[test]
    fn single_link_route() {
        let net = RoadNetwork::new([l("a", "b", 7.0)]).unwrap();
        let r = shortest_route(&net, "a", "b", CostModel::Nominal).unwrap();
        assert_eq!(r.nodes, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(r.nominal_length(&net), 7.0);
    }

    #[test]
    fn triangle_prefers_two_leg_path() {
        let net = RoadNetwork::new([l("a", "b", 10.0), l("a", "c", 4.0), l("c", "b", 4.0)]).unwrap();
        let r = shortest_route(&net, "a", "b", CostModel::Nominal).unwrap();
        assert_eq!(r.nodes, vec!["a".to_string(), "c".to_string(), "b".to_string()]);
        assert_eq!(r.nominal_length(&net), 8.0);
    }

    #[test]
    fn equal_cost_tie_breaks_lexicographically() {
        let net = RoadNetwork::new([
            l("a", "x", 5.0),
            l("x", "b", 5.0),
            l("a", "m", 5.0),
            l("m", "b", 5.0),
        ])
        .unwrap();
        let r = shortest_route(&net, "a", "b", CostModel::Nominal).unwrap();
        assert_eq!(r.nodes[1], "m");
    }

    #[test]
    fn unreachable_destination_errors() {
        let net = RoadNetwork::new([l("a", "b", 1.0), l("c", "d", 1.0)]).unwrap();
        assert!(matches!(
            shortest_route(&net, "a", "d", CostModel::Nominal),
            Err(RouteError::Unreachable { .. })
        ));
    }

    #[test]
    fn parallel_links_rejected() {
        assert!(matches!(
            RoadNetwork::new([l("a", "b", 1.0), l("a", "b", 2.0)]),
            Err(RouteError::BadLink(_))
        ));
    }

    #[test]
    fn zero_penalties_leave_pool_at_fixpoint() {
        let net = two_corridor_net();
        let pairs = vec![("d".to_string(), "t".to_string())];
        let (mut pool, _) = initial_pool(&net, &pairs, DEFAULT_POOL_CAP);
        assert_eq!(pool.len(), 1);
        let outcome = extend_pool(&mut pool, &net, &pairs, 500.0);
        assert!(outcome.added.is_empty());
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn penalty_above_detour_margin_discovers_detour() {
        let mut net = two_corridor_net();
        let pairs = vec![("d".to_string(), "t".to_string())];
        let (mut pool, _) = initial_pool(&net, &pairs, DEFAULT_POOL_CAP);
        // Surcharge of 10 minutes (theta 10 * disruption 1) on one central
        // link exceeds the 6-minute detour margin.
        net.set_disruption(
            &[(("m1".to_string(), "m2".to_string()), 1.0)].into_iter().collect(),
        )
        .unwrap();
        let outcome = extend_pool(&mut pool, &net, &pairs, 10.0);
        assert_eq!(outcome.added.len(), 1);
        assert_eq!(pool.len(), 2);
        assert!(pool.routes("d", "t").iter().any(|r| r.nodes[1] == "w1"));
    }

    #[test]
    fn penalty_below_detour_margin_keeps_pool() {
        let mut net = two_corridor_net();
        let pairs = vec![("d".to_string(), "t".to_string())];
        let (mut pool, _) = initial_pool(&net, &pairs, DEFAULT_POOL_CAP);
        net.set_disruption(
            &[(("m1".to_string(), "m2".to_string()), 1.0)].into_iter().collect(),
        )
        .unwrap();
        let outcome = extend_pool(&mut pool, &net, &pairs, 3.0);
        assert!(outcome.added.is_empty());
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn pool_cap_records_hits() {
        let net = two_corridor_net();
        let pairs = vec![("d".to_string(), "t".to_string())];
        let (mut pool, _) = initial_pool(&net, &pairs, 1);
        let mut penalized = net.clone();
        penalized
            .set_disruption(&[(("m1".to_string(), "m2".to_string()), 1.0)].into_iter().collect())
            .unwrap();
        let outcome = extend_pool(&mut pool, &penalized, &pairs, 100.0);
        assert!(outcome.added.is_empty());
        assert!(pool.cap_hits.contains(&("d".to_string(), "t".to_string())));
    }

    #[test]
    fn disruption_changes_lengths_not_topology() {
        let mut net = two_corridor_net();
        let r = shortest_route(&net, "d", "t", CostModel::Nominal).unwrap();
        let before = r.nominal_length(&net);
        net.set_disruption(
            &[(("m1".to_string(), "m2".to_string()), 0.5)].into_iter().collect(),
        )
        .unwrap();
        assert_eq!(r.nominal_length(&net), before);
        assert_eq!(r.current_length(&net, 10.0), before + 5.0);
        assert!(r.links().count() == r.nodes.len() - 1);
    }
}
