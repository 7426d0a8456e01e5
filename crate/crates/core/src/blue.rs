//! Route-based last-mile planning MIP over discrete time periods.
//!
//! Individual vehicles depart their introduction location at most once,
//! follow a pooled route to a destination, and carry cargo limited by
//! weight and volume knapsacks. Inventory, met demand, and unmet demand
//! evolve per period; unmet demand is penalized every period it remains
//! outstanding, which is what pushes deliveries early. Exposure `A` is
//! bounded below by each event's impact-weighted vehicle count and priced
//! at `theta` in the objective.
//!
//! Constraint families: vehicle stock balance, commodity stock balance,
//! demand recursion, optional deliver-all, weight and volume knapsacks,
//! single trip per vehicle, and attack exposure. An optional per-location
//! departure cap (a parameter the formulation names but never uses in a
//! constraint) can be enabled explicitly and is off by default.

use crate::num;
use crate::opt::{solve_mip, LinearModel, Relation, SolveError, SolveStatus};
use crate::route::{RoadNetwork, RoutePool};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub type LinkKey = (String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct Introduction {
    pub location: String,
    pub period: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleClass {
    pub id: String,
    pub weight_cap: f64,
    pub volume_cap: f64,
    /// Turnaround periods at a location after arrival.
    pub turnaround_default: u32,
    pub turnaround_overrides: BTreeMap<String, u32>,
    /// Scales route minutes into trip cost.
    pub cost_per_minute: f64,
    pub introductions: Vec<Introduction>,
}

impl VehicleClass {
    fn turnaround(&self, location: &str) -> u32 {
        self.turnaround_overrides
            .get(location)
            .copied()
            .unwrap_or(self.turnaround_default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Commodity {
    pub id: String,
    pub unit_weight: f64,
    pub unit_volume: f64,
    /// Penalty per unit-period of outstanding unmet demand.
    pub unmet_penalty: f64,
}

/// A disruption event: a set of (origin, destination, route id) members
/// sharing one impact coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: String,
    pub members: BTreeSet<(String, String, String)>,
    pub coeff: f64,
}

/// Everything the last-mile planner needs besides the route pool.
#[derive(Debug, Clone, PartialEq)]
pub struct LastMileInstance {
    pub network: RoadNetwork,
    pub vehicle_classes: Vec<VehicleClass>,
    pub commodities: Vec<Commodity>,
    /// (commodity, location, period) -> units demanded at period start.
    pub demands: BTreeMap<(String, String, u32), f64>,
    /// (commodity, location, period) -> units released at period start.
    pub supplies: BTreeMap<(String, String, u32), f64>,
    pub period_minutes: u32,
    /// Periods are 1..=horizon.
    pub horizon: u32,
    /// Latest allowed departure period; defaults to the horizon.
    pub max_departure_period: Option<u32>,
    pub hard_demand: bool,
    /// Optional per-location departure cap per period; off when `None`.
    pub departure_caps: Option<BTreeMap<String, f64>>,
    /// Named link sets tracked by the concentration metrics.
    pub corridors: BTreeMap<String, Vec<LinkKey>>,
}

impl LastMileInstance {
    pub fn validate(&self) -> Result<(), BlueError> {
        if self.horizon == 0 || self.period_minutes == 0 {
            return Err(BlueError::BadInstance("horizon and period_minutes must be positive".into()));
        }
        let mut commodity_ids = BTreeSet::new();
        for c in &self.commodities {
            if !commodity_ids.insert(c.id.clone()) {
                return Err(BlueError::BadInstance(format!("duplicate commodity {:?}", c.id)));
            }
            if c.unit_weight < 0.0 || c.unit_volume < 0.0 || c.unmet_penalty < 0.0 {
                return Err(BlueError::BadInstance(format!(
                    "commodity {:?} has negative physical data or penalty",
                    c.id
                )));
            }
        }
        for v in &self.vehicle_classes {
            if v.weight_cap <= 0.0 || v.volume_cap <= 0.0 {
                return Err(BlueError::BadInstance(format!(
                    "vehicle class {:?} must have positive capacities",
                    v.id
                )));
            }
            for intro in &v.introductions {
                if intro.period == 0 || intro.period > self.horizon {
                    return Err(BlueError::BadInstance(format!(
                        "vehicle class {:?} introduced outside the horizon",
                        v.id
                    )));
                }
                if !self.network.has_node(&intro.location) {
                    return Err(BlueError::BadInstance(format!(
                        "vehicle class {:?} introduced at unknown node {:?}",
                        v.id, intro.location
                    )));
                }
            }
        }
        for ((c, node, period), &units) in self.demands.iter().chain(self.supplies.iter()) {
            if units < 0.0 {
                return Err(BlueError::BadInstance(format!(
                    "negative quantity for ({c}, {node}, {period})"
                )));
            }
            if !commodity_ids.contains(c) {
                return Err(BlueError::BadInstance(format!("unknown commodity {c:?}")));
            }
            if !self.network.has_node(node) {
                return Err(BlueError::BadInstance(format!("unknown node {node:?}")));
            }
            if *period == 0 || *period > self.horizon {
                return Err(BlueError::BadInstance(format!(
                    "period {period} outside 1..={}",
                    self.horizon
                )));
            }
        }
        for (name, links) in &self.corridors {
            for (a, b) in links {
                if self.network.link(a, b).is_none() {
                    return Err(BlueError::BadInstance(format!(
                        "corridor {name:?} references unknown link ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Origin-destination pairs that need routes: supply nodes to demand
    /// nodes, per commodity presence.
    pub fn od_pairs(&self) -> Vec<(String, String)> {
        let mut supply_nodes: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for ((c, node, _), &units) in &self.supplies {
            if units > 0.0 {
                supply_nodes.entry(c).or_default().insert(node);
            }
        }
        let mut pairs = BTreeSet::new();
        for ((c, node, _), &units) in &self.demands {
            if units <= 0.0 {
                continue;
            }
            if let Some(origins) = supply_nodes.get(c.as_str()) {
                for origin in origins {
                    if *origin != node {
                        pairs.insert((origin.to_string(), node.clone()));
                    }
                }
            }
        }
        pairs.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjectiveBreakdown {
    pub exposure_cost: f64,
    pub vehicle_cost: f64,
    pub unmet_cost: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.exposure_cost + self.vehicle_cost + self.unmet_cost
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub vehicle: String,
    pub class_id: String,
    pub origin: String,
    pub dest: String,
    pub route_id: String,
    pub depart_period: u32,
    pub travel_periods: u32,
    pub cost: f64,
    /// commodity -> units on board.
    pub cargo: BTreeMap<String, f64>,
}

impl TripRecord {
    /// Minute at which the cargo becomes available at the destination.
    pub fn arrival_minute(&self, period_minutes: u32) -> u32 {
        (self.depart_period + self.travel_periods) * period_minutes
    }
}

/// A solved last-mile plan with its full per-period state.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedPlan {
    pub trips: Vec<TripRecord>,
    /// (vehicle, location, period) -> idle count.
    pub idle: BTreeMap<(String, String, u32), f64>,
    /// (commodity, location, period) -> inventory at period end.
    pub inventory: BTreeMap<(String, String, u32), f64>,
    /// (commodity, location, period) -> demand satisfied that period.
    pub met: BTreeMap<(String, String, u32), f64>,
    /// (commodity, location, period) -> unmet demand outstanding.
    pub unmet: BTreeMap<(String, String, u32), f64>,
    pub exposure: f64,
    pub objective: ObjectiveBreakdown,
    /// Trucks traversing each directed link, all vehicles and times.
    pub link_loads: BTreeMap<LinkKey, u32>,
    pub network_links: BTreeSet<LinkKey>,
    pub period_minutes: u32,
    pub horizon: u32,
    pub total_demand: f64,
    pub delivered: f64,
}

impl RoutedPlan {
    /// Aggregate per-link truck counts as floats, the adversary's input.
    pub fn link_flows(&self) -> BTreeMap<LinkKey, f64> {
        self.link_loads.iter().map(|(k, &v)| (k.clone(), v as f64)).collect()
    }

    /// Unmet demand still outstanding at the end of the horizon.
    pub fn unmet_at_horizon(&self) -> BTreeMap<(String, String), f64> {
        let mut out = BTreeMap::new();
        for ((c, node, period), &v) in &self.unmet {
            if *period == self.horizon {
                out.insert((c.clone(), node.clone()), v);
            }
        }
        out
    }
}

/// Cumulative delivery step curve: (minute, fraction of delivered units
/// that have arrived), weighted by trip cargo at trip arrival minutes.
pub fn delivery_curve(plan: &RoutedPlan) -> Vec<(f64, f64)> {
    let mut arrivals: BTreeMap<u32, f64> = BTreeMap::new();
    let mut total = 0.0;
    for trip in &plan.trips {
        let units: f64 = trip.cargo.values().sum();
        if units <= 0.0 {
            continue;
        }
        *arrivals.entry(trip.arrival_minute(plan.period_minutes)).or_insert(0.0) += units;
        total += units;
    }
    if total <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(arrivals.len());
    let mut cum = 0.0;
    for (minute, units) in arrivals {
        cum += units;
        out.push((minute as f64, cum / total));
    }
    out
}

#[derive(Debug, Clone)]
pub enum BlueError {
    BadInstance(String),
    /// No eligible trip can reach a demanded destination inside the horizon.
    StructuralInfeasible(String),
    Infeasible,
    Unbounded,
    Solver(SolveError),
}

impl fmt::Display for BlueError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlueError::BadInstance(msg) => write!(f, "bad last-mile instance: {msg}"),
            BlueError::StructuralInfeasible(msg) => write!(f, "structurally infeasible: {msg}"),
            BlueError::Infeasible => write!(f, "last-mile model infeasible"),
            BlueError::Unbounded => write!(f, "last-mile model unbounded"),
            BlueError::Solver(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl core::error::Error for BlueError {}

impl From<SolveError> for BlueError {
    fn from(e: SolveError) -> Self {
        BlueError::Solver(e)
    }
}

struct Vehicle {
    uid: String,
    class: usize,
    intro_location: String,
    intro_period: u32,
}

struct Trip {
    vehicle: usize,
    origin: String,
    dest: String,
    route_id: String,
    depart: u32,
    travel_periods: u32,
    cost: f64,
    n_var: usize,
    cargo_vars: BTreeMap<String, usize>,
}

/// A built model plus the index needed to decode its solution.
pub struct BlueModel {
    pub model: LinearModel,
    instance_horizon: u32,
    period_minutes: u32,
    theta: f64,
    trips: Vec<Trip>,
    vehicles: Vec<Vehicle>,
    idle_vars: BTreeMap<(usize, String, u32), usize>,
    inventory_vars: BTreeMap<(String, String, u32), usize>,
    met_vars: BTreeMap<(String, String, u32), usize>,
    unmet_vars: BTreeMap<(String, String, u32), usize>,
    unmet_penalty: BTreeMap<String, f64>,
    exposure_var: usize,
    network_links: BTreeSet<LinkKey>,
    route_links: BTreeMap<String, Vec<LinkKey>>,
    total_demand: f64,
    class_ids: Vec<String>,
}

/// Builds the MIP for `instance` over the pooled routes, pricing exposure
/// at `theta` against `events`.
pub fn build_blue_model(
    instance: &LastMileInstance,
    pool: &RoutePool,
    theta: f64,
    events: &[Event],
) -> Result<BlueModel, BlueError> {
    instance.validate()?;
    if pool.is_empty() {
        return Err(BlueError::BadInstance("route pool is empty".into()));
    }
    let horizon = instance.horizon;
    let max_departure = instance.max_departure_period.unwrap_or(horizon).min(horizon);

    // Expand classes into individual vehicles.
    let mut vehicles: Vec<Vehicle> = Vec::new();
    for (ci, class) in instance.vehicle_classes.iter().enumerate() {
        let mut seq = 0;
        for intro in &class.introductions {
            for _ in 0..intro.count {
                vehicles.push(Vehicle {
                    uid: format!("{}#{seq}", class.id),
                    class: ci,
                    intro_location: intro.location.clone(),
                    intro_period: intro.period,
                });
                seq += 1;
            }
        }
    }

    let mut model = LinearModel::new("lastmile");
    let exposure_var = model.add_var("A", 0.0, f64::INFINITY, false);
    model.add_objective_term(exposure_var, theta);

    // Trips: vehicle x pooled route from its introduction location x
    // departure period whose arrival fits inside the horizon.
    let mut trips: Vec<Trip> = Vec::new();
    let mut route_links: BTreeMap<String, Vec<LinkKey>> = BTreeMap::new();
    for (vi, vehicle) in vehicles.iter().enumerate() {
        let class = &instance.vehicle_classes[vehicle.class];
        for ((origin, dest), routes) in &pool.per_pair {
            if *origin != vehicle.intro_location {
                continue;
            }
            for route in routes {
                let minutes = route.nominal_length(&instance.network);
                let travel_periods =
                    (num::ceil(minutes / instance.period_minutes as f64) as u32).max(1);
                route_links.entry(route.id()).or_insert_with(|| {
                    route.links().map(|(a, b)| (a.clone(), b.clone())).collect()
                });
                let first = vehicle.intro_period.max(1);
                if horizon < travel_periods + 1 {
                    continue;
                }
                let last = max_departure.min(horizon - travel_periods - 1 + 1);
                for depart in first..=last {
                    // Cargo arrives into inventory at depart + travel + 1;
                    // drop departures whose arrival falls past the horizon.
                    if depart + travel_periods + 1 > horizon {
                        continue;
                    }
                    let n_var = model.add_var(
                        format!("N[{}|{}|{depart}]", vehicle.uid, route.id()),
                        0.0,
                        1.0,
                        true,
                    );
                    let cost = minutes * class.cost_per_minute;
                    model.add_objective_term(n_var, cost);
                    let mut cargo_vars = BTreeMap::new();
                    for commodity in &instance.commodities {
                        let x = model.add_var(
                            format!("X[{}|{}|{}|{depart}]", commodity.id, vehicle.uid, route.id()),
                            0.0,
                            f64::INFINITY,
                            false,
                        );
                        cargo_vars.insert(commodity.id.clone(), x);
                    }
                    trips.push(Trip {
                        vehicle: vi,
                        origin: origin.clone(),
                        dest: dest.clone(),
                        route_id: route.id(),
                        depart,
                        travel_periods,
                        cost,
                        n_var,
                        cargo_vars,
                    });
                }
            }
        }
    }

    structural_check(instance, pool, &trips)?;

    // Location sets: vehicles idle at their introduction location for the
    // whole horizon, and at trip destinations only from the first period a
    // trip can arrive and finish turnaround there. Periods before that are
    // identically zero and carry no rows.
    let mut vehicle_locs: Vec<BTreeMap<String, u32>> = vehicles
        .iter()
        .map(|v| [(v.intro_location.clone(), 1u32)].into_iter().collect::<BTreeMap<_, _>>())
        .collect();
    for trip in &trips {
        let vehicle = &vehicles[trip.vehicle];
        let class = &instance.vehicle_classes[vehicle.class];
        let idle_from = trip.depart + trip.travel_periods + class.turnaround(&trip.dest) + 1;
        if idle_from > horizon {
            continue;
        }
        vehicle_locs[trip.vehicle]
            .entry(trip.dest.clone())
            .and_modify(|t| *t = (*t).min(idle_from))
            .or_insert(idle_from);
    }
    let mut commodity_locs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for commodity in &instance.commodities {
        commodity_locs.insert(commodity.id.clone(), BTreeSet::new());
    }
    for ((c, node, _), &units) in instance.supplies.iter().chain(instance.demands.iter()) {
        if units > 0.0 {
            commodity_locs.get_mut(c).expect("validated commodity").insert(node.clone());
        }
    }
    for trip in &trips {
        for locs in commodity_locs.values_mut() {
            locs.insert(trip.origin.clone());
            locs.insert(trip.dest.clone());
        }
    }
    let mut demand_nodes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for ((c, node, _), &units) in &instance.demands {
        if units > 0.0 {
            demand_nodes.entry(c.clone()).or_default().insert(node.clone());
        }
    }

    let mut idle_vars: BTreeMap<(usize, String, u32), usize> = BTreeMap::new();
    for (vi, locs) in vehicle_locs.iter().enumerate() {
        for (loc, &from) in locs {
            for t in from..=horizon {
                let var = model.add_var(
                    format!("Nbar[{}|{loc}|{t}]", vehicles[vi].uid),
                    0.0,
                    f64::INFINITY,
                    false,
                );
                idle_vars.insert((vi, loc.clone(), t), var);
            }
        }
    }
    let mut inventory_vars: BTreeMap<(String, String, u32), usize> = BTreeMap::new();
    let mut met_vars: BTreeMap<(String, String, u32), usize> = BTreeMap::new();
    let mut unmet_vars: BTreeMap<(String, String, u32), usize> = BTreeMap::new();
    let mut unmet_penalty: BTreeMap<String, f64> = BTreeMap::new();
    for commodity in &instance.commodities {
        unmet_penalty.insert(commodity.id.clone(), commodity.unmet_penalty);
        for loc in &commodity_locs[&commodity.id] {
            for t in 1..=horizon {
                let var = model.add_var(
                    format!("I[{}|{loc}|{t}]", commodity.id),
                    0.0,
                    f64::INFINITY,
                    false,
                );
                inventory_vars.insert((commodity.id.clone(), loc.clone(), t), var);
            }
        }
        for loc in demand_nodes.get(&commodity.id).into_iter().flatten() {
            for t in 1..=horizon {
                let met = model.add_var(
                    format!("D[{}|{loc}|{t}]", commodity.id),
                    0.0,
                    f64::INFINITY,
                    false,
                );
                met_vars.insert((commodity.id.clone(), loc.clone(), t), met);
                let unmet = model.add_var(
                    format!("Dbar[{}|{loc}|{t}]", commodity.id),
                    0.0,
                    f64::INFINITY,
                    false,
                );
                model.add_objective_term(unmet, commodity.unmet_penalty);
                unmet_vars.insert((commodity.id.clone(), loc.clone(), t), unmet);
            }
        }
    }

    // Vehicle stock balance.
    for (vi, vehicle) in vehicles.iter().enumerate() {
        let class = &instance.vehicle_classes[vehicle.class];
        for (loc, &from) in &vehicle_locs[vi] {
            for t in from..=horizon {
                let mut terms: Vec<(usize, f64)> = Vec::new();
                terms.push((idle_vars[&(vi, loc.clone(), t)], 1.0));
                if t > from {
                    terms.push((idle_vars[&(vi, loc.clone(), t - 1)], -1.0));
                }
                for trip in trips.iter().filter(|tr| tr.vehicle == vi) {
                    if trip.origin == *loc && trip.depart == t {
                        terms.push((trip.n_var, 1.0));
                    }
                    if trip.dest == *loc {
                        let turnaround = class.turnaround(loc);
                        // Arrives idle at depart + travel + turnaround + 1.
                        if trip.depart + trip.travel_periods + turnaround + 1 == t {
                            terms.push((trip.n_var, -1.0));
                        }
                    }
                }
                let introduced = if vehicle.intro_location == *loc && vehicle.intro_period == t {
                    1.0
                } else {
                    0.0
                };
                model.add_constraint(
                    format!("vehicle_stock[{}|{loc}|{t}]", vehicle.uid),
                    terms,
                    Relation::Eq,
                    introduced,
                );
            }
        }
    }

    // Commodity stock balance.
    for commodity in &instance.commodities {
        let c = &commodity.id;
        for loc in &commodity_locs[c] {
            let is_demand_node =
                demand_nodes.get(c).map_or(false, |nodes| nodes.contains(loc));
            for t in 1..=horizon {
                let mut terms: Vec<(usize, f64)> = Vec::new();
                terms.push((inventory_vars[&(c.clone(), loc.clone(), t)], 1.0));
                if t > 1 {
                    terms.push((inventory_vars[&(c.clone(), loc.clone(), t - 1)], -1.0));
                }
                for trip in &trips {
                    if trip.origin == *loc && trip.depart == t {
                        terms.push((trip.cargo_vars[c], 1.0));
                    }
                    if trip.dest == *loc && trip.depart + trip.travel_periods + 1 == t {
                        terms.push((trip.cargo_vars[c], -1.0));
                    }
                }
                if is_demand_node {
                    terms.push((unmet_vars[&(c.clone(), loc.clone(), t)], -1.0));
                    if t > 1 {
                        terms.push((unmet_vars[&(c.clone(), loc.clone(), t - 1)], 1.0));
                    }
                }
                let supplied = instance
                    .supplies
                    .get(&(c.clone(), loc.clone(), t))
                    .copied()
                    .unwrap_or(0.0);
                let demanded = instance
                    .demands
                    .get(&(c.clone(), loc.clone(), t))
                    .copied()
                    .unwrap_or(0.0);
                model.add_constraint(
                    format!("commodity_stock[{c}|{loc}|{t}]"),
                    terms,
                    Relation::Eq,
                    supplied - demanded,
                );
            }
        }
    }

    // Demand recursion: unmet grows only by newly issued demand.
    for commodity in &instance.commodities {
        let c = &commodity.id;
        for loc in demand_nodes.get(c).into_iter().flatten() {
            for t in 1..=horizon {
                let mut terms: Vec<(usize, f64)> = Vec::new();
                terms.push((unmet_vars[&(c.clone(), loc.clone(), t)], 1.0));
                if t > 1 {
                    terms.push((unmet_vars[&(c.clone(), loc.clone(), t - 1)], -1.0));
                }
                terms.push((met_vars[&(c.clone(), loc.clone(), t)], 1.0));
                let demanded = instance
                    .demands
                    .get(&(c.clone(), loc.clone(), t))
                    .copied()
                    .unwrap_or(0.0);
                model.add_constraint(
                    format!("demand_recursion[{c}|{loc}|{t}]"),
                    terms,
                    Relation::Eq,
                    demanded,
                );
            }
        }
    }

    // Deliver all demand (per commodity), only when demanded hard.
    let mut total_demand = 0.0;
    for (_, &units) in &instance.demands {
        total_demand += units;
    }
    if instance.hard_demand {
        for commodity in &instance.commodities {
            let c = &commodity.id;
            let demanded: f64 = instance
                .demands
                .iter()
                .filter(|((cc, _, _), _)| cc == c)
                .map(|(_, &u)| u)
                .sum();
            let terms: Vec<(usize, f64)> =
                trips.iter().map(|trip| (trip.cargo_vars[c], 1.0)).collect();
            if terms.is_empty() && demanded > 0.0 {
                return Err(BlueError::StructuralInfeasible(format!(
                    "no trips can carry commodity {c:?} but deliver-all is enabled"
                )));
            }
            model.add_constraint(
                format!("deliver_all[{c}]"),
                terms,
                Relation::Ge,
                demanded,
            );
        }
    }

    // Weight and volume knapsacks per trip.
    for (ti, trip) in trips.iter().enumerate() {
        let class = &instance.vehicle_classes[vehicles[trip.vehicle].class];
        let mut weight_terms: Vec<(usize, f64)> = Vec::new();
        let mut volume_terms: Vec<(usize, f64)> = Vec::new();
        for commodity in &instance.commodities {
            let x = trip.cargo_vars[&commodity.id];
            weight_terms.push((x, commodity.unit_weight));
            volume_terms.push((x, commodity.unit_volume));
        }
        weight_terms.push((trip.n_var, -class.weight_cap));
        volume_terms.push((trip.n_var, -class.volume_cap));
        model.add_constraint(format!("weight[{ti}]"), weight_terms, Relation::Le, 0.0);
        model.add_constraint(format!("volume[{ti}]"), volume_terms, Relation::Le, 0.0);
    }

    // Single trip per vehicle.
    for (vi, vehicle) in vehicles.iter().enumerate() {
        let terms: Vec<(usize, f64)> = trips
            .iter()
            .filter(|t| t.vehicle == vi)
            .map(|t| (t.n_var, 1.0))
            .collect();
        if !terms.is_empty() {
            model.add_constraint(
                format!("single_trip[{}]", vehicle.uid),
                terms,
                Relation::Le,
                1.0,
            );
        }
    }

    // Attack exposure per event.
    for event in events {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for trip in &trips {
            if event
                .members
                .contains(&(trip.origin.clone(), trip.dest.clone(), trip.route_id.clone()))
            {
                terms.push((trip.n_var, event.coeff));
            }
        }
        terms.push((exposure_var, -1.0));
        model.add_constraint(format!("exposure[{}]", event.id), terms, Relation::Le, 0.0);
    }

    // Optional departure cap.
    if let Some(caps) = &instance.departure_caps {
        for (loc, &cap) in caps {
            for t in 1..=horizon {
                let terms: Vec<(usize, f64)> = trips
                    .iter()
                    .filter(|trip| trip.origin == *loc && trip.depart == t)
                    .map(|trip| (trip.n_var, 1.0))
                    .collect();
                if !terms.is_empty() {
                    model.add_constraint(
                        format!("departure_cap[{loc}|{t}]"),
                        terms,
                        Relation::Le,
                        cap,
                    );
                }
            }
        }
    }

    Ok(BlueModel {
        model,
        instance_horizon: horizon,
        period_minutes: instance.period_minutes,
        theta,
        trips,
        class_ids: instance.vehicle_classes.iter().map(|c| c.id.clone()).collect(),
        vehicles,
        idle_vars,
        inventory_vars,
        met_vars,
        unmet_vars,
        unmet_penalty,
        exposure_var,
        network_links: instance.network.links().keys().cloned().collect(),
        route_links,
        total_demand,
    })
}

fn structural_check(
    instance: &LastMileInstance,
    pool: &RoutePool,
    trips: &[Trip],
) -> Result<(), BlueError> {
    for (origin, dest) in instance.od_pairs() {
        if pool.routes(&origin, &dest).is_empty() {
            continue;
        }
        let reachable = trips.iter().any(|t| t.origin == origin && t.dest == dest);
        if !reachable {
            return Err(BlueError::StructuralInfeasible(format!(
                "horizon too short: no departure from {origin} reaches {dest} in time"
            )));
        }
    }
    Ok(())
}

/// Solves a built model and decodes the full plan.
pub fn solve_blue(blue: &BlueModel) -> Result<RoutedPlan, BlueError> {
    let sol = solve_mip(&blue.model, 0.0)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(BlueError::Infeasible),
        SolveStatus::Unbounded => return Err(BlueError::Unbounded),
    }
    let value = |idx: usize| sol.value(&blue.model.variables()[idx].id);

    let mut trips_out = Vec::new();
    let mut link_loads: BTreeMap<LinkKey, u32> = BTreeMap::new();
    let mut vehicle_cost = 0.0;
    for trip in &blue.trips {
        if value(trip.n_var) < 0.5 {
            continue;
        }
        let mut cargo = BTreeMap::new();
        for (c, &x_var) in &trip.cargo_vars {
            let units = value(x_var);
            if units > 1e-9 {
                cargo.insert(c.clone(), units);
            }
        }
        vehicle_cost += trip.cost;
        for link in &blue.route_links[&trip.route_id] {
            *link_loads.entry(link.clone()).or_insert(0) += 1;
        }
        trips_out.push(TripRecord {
            vehicle: blue.vehicles[trip.vehicle].uid.clone(),
            class_id: blue.class_ids[blue.vehicles[trip.vehicle].class].clone(),
            origin: trip.origin.clone(),
            dest: trip.dest.clone(),
            route_id: trip.route_id.clone(),
            depart_period: trip.depart,
            travel_periods: trip.travel_periods,
            cost: trip.cost,
            cargo,
        });
    }

    let grab = |vars: &BTreeMap<(String, String, u32), usize>| {
        vars.iter()
            .map(|(k, &v)| (k.clone(), value(v)))
            .filter(|(_, x)| *x > 1e-9)
            .collect::<BTreeMap<_, _>>()
    };
    let idle = blue
        .idle_vars
        .iter()
        .map(|((vi, loc, t), &var)| {
            ((blue.vehicles[*vi].uid.clone(), loc.clone(), *t), value(var))
        })
        .filter(|(_, x)| *x > 1e-9)
        .collect();
    let met = grab(&blue.met_vars);
    let unmet = grab(&blue.unmet_vars);
    let inventory = grab(&blue.inventory_vars);

    let delivered: f64 = met.values().sum();
    let unmet_cost: f64 = blue
        .unmet_vars
        .iter()
        .map(|((c, _, _), &var)| blue.unmet_penalty[c] * value(var))
        .sum();
    let exposure = value(blue.exposure_var);

    Ok(RoutedPlan {
        trips: trips_out,
        idle,
        inventory,
        met,
        unmet,
        exposure,
        objective: ObjectiveBreakdown {
            exposure_cost: blue.theta * exposure,
            vehicle_cost,
            unmet_cost,
        },
        link_loads,
        network_links: blue.network_links.clone(),
        period_minutes: blue.period_minutes,
        horizon: blue.instance_horizon,
        total_demand: blue.total_demand,
        delivered,
    })
}

/// Convenience wrapper: build and solve in one call.
pub fn solve_lastmile(
    instance: &LastMileInstance,
    pool: &RoutePool,
    theta: f64,
    events: &[Event],
) -> Result<RoutedPlan, BlueError> {
    let blue = build_blue_model(instance, pool, theta, events)?;
    solve_blue(&blue)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::route::{initial_pool, RoadNetwork};
    use alloc::string::ToString;
    use alloc::vec;

    pub(crate) fn water(unmet_penalty: f64) -> Commodity {
        Commodity {
            id: "water".into(),
            unit_weight: 1.0,
            unit_volume: 1.0,
            unmet_penalty,
        }
    }

    pub(crate) fn truck_class(id: &str, count: u32, at: &str) -> VehicleClass {
        VehicleClass {
            id: id.into(),
            weight_cap: 1.0,
            volume_cap: 1.0,
            turnaround_default: 1,
            turnaround_overrides: BTreeMap::new(),
            cost_per_minute: 1.0,
            introductions: vec![Introduction { location: at.into(), period: 1, count }],
        }
    }

    fn single_route_instance(demand_units: f64, trucks: u32) -> (LastMileInstance, RoutePool) {
        let network = RoadNetwork::new([("depot".to_string(), "town".to_string(), 50.0)]).unwrap();
        let instance = LastMileInstance {
            network,
            vehicle_classes: vec![truck_class("truck", trucks, "depot")],
            commodities: vec![water(100.0)],
            demands: [(("water".to_string(), "town".to_string(), 1), demand_units)]
                .into_iter()
                .collect(),
            supplies: [(("water".to_string(), "depot".to_string(), 1), demand_units.max(1.0))]
                .into_iter()
                .collect(),
            period_minutes: 10,
            horizon: 8,
            max_departure_period: Some(1),
            hard_demand: false,
            departure_caps: None,
            corridors: BTreeMap::new(),
        };
        let pairs = instance.od_pairs();
        let (pool, _) = initial_pool(&instance.network, &pairs, 8);
        (instance, pool)
    }

    #[test]
    fn forced_single_dispatch() {
        let (instance, pool) = single_route_instance(1.0, 1);
        let blue = build_blue_model(&instance, &pool, 0.0, &[]).unwrap();
        // one binary: one vehicle, one route, one departure period
        let binaries = blue
            .model
            .variables()
            .iter()
            .filter(|v| v.integral)
            .count();
        assert_eq!(binaries, 1);
        let plan = solve_blue(&blue).unwrap();
        assert_eq!(plan.trips.len(), 1);
        assert_eq!(plan.trips[0].cargo["water"], 1.0);
        assert_eq!(plan.delivered, 1.0);
        assert!(plan.unmet_at_horizon().values().all(|&v| v <= 1e-9));
    }

    #[test]
    fn hard_demand_beyond_fleet_capacity_is_infeasible() {
        let (mut instance, pool) = single_route_instance(3.0, 1);
        instance.hard_demand = true;
        let blue = build_blue_model(&instance, &pool, 0.0, &[]).unwrap();
        assert!(matches!(solve_blue(&blue), Err(BlueError::Infeasible)));
    }

    #[test]
    fn soft_demand_beyond_capacity_reports_unmet() {
        let (instance, pool) = single_route_instance(3.0, 1);
        let plan = solve_lastmile(&instance, &pool, 0.0, &[]).unwrap();
        assert_eq!(plan.delivered, 1.0);
        let shortfall: f64 = plan.unmet_at_horizon().values().sum();
        assert!((shortfall - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn exposure_counts_trucks_on_event_routes() {
        // Two parallel one-link roads, event on the short one.
        let network = RoadNetwork::new([
            ("depot".to_string(), "town".to_string(), 50.0),
            ("depot".to_string(), "alt".to_string(), 30.0),
            ("alt".to_string(), "town".to_string(), 30.0),
        ])
        .unwrap();
        let instance = LastMileInstance {
            network,
            vehicle_classes: vec![truck_class("truck", 3, "depot")],
            commodities: vec![water(1000.0)],
            demands: [(("water".to_string(), "town".to_string(), 1), 3.0)].into_iter().collect(),
            supplies: [(("water".to_string(), "depot".to_string(), 1), 3.0)]
                .into_iter()
                .collect(),
            period_minutes: 10,
            horizon: 10,
            max_departure_period: Some(1),
            hard_demand: false,
            departure_caps: None,
            corridors: BTreeMap::new(),
        };
        let pairs = instance.od_pairs();
        let (mut pool, _) = initial_pool(&instance.network, &pairs, 8);
        // add the longer detour route by hand
        use crate::route::{shortest_route, CostModel};
        let mut penalized = instance.network.clone();
        penalized
            .set_disruption(
                &[(("depot".to_string(), "town".to_string()), 10.0)].into_iter().collect(),
            )
            .unwrap();
        let detour = shortest_route(&penalized, "depot", "town", CostModel::penalized(10.0)).unwrap();
        pool.insert(detour);

        let direct_route = "depot->town".to_string();
        let event = Event {
            id: "hit-direct".into(),
            members: [("depot".to_string(), "town".to_string(), direct_route)]
                .into_iter()
                .collect(),
            coeff: 1.0,
        };
        // theta zero: events are unpriced, everyone takes the direct road.
        let plan = solve_lastmile(&instance, &pool, 0.0, &[event.clone()]).unwrap();
        assert!(plan.trips.iter().all(|t| t.route_id == "depot->town"));
        // theta small enough not to divert: exposure sits tight on the
        // three direct trucks.
        let plan = solve_lastmile(&instance, &pool, 0.001, &[event.clone()]).unwrap();
        assert_eq!(plan.exposure, 3.0);
        assert!(plan.trips.iter().all(|t| t.route_id == "depot->town"));
        // theta dominant: all three move to the clean detour even though it
        // adds a period of outstanding demand.
        let plan = solve_lastmile(&instance, &pool, 100_000.0, &[event]).unwrap();
        assert_eq!(plan.exposure, 0.0);
        assert!(plan.trips.iter().all(|t| t.route_id == "depot->alt->town"));
    }

    #[test]
    fn delivery_curve_single_arrival() {
        let (instance, pool) = single_route_instance(1.0, 1);
        let plan = solve_lastmile(&instance, &pool, 0.0, &[]).unwrap();
        // 50-minute route at 10-minute periods: depart 1, arrive minute 60.
        assert_eq!(delivery_curve(&plan), vec![(60.0, 1.0)]);
    }

    #[test]
    fn delivery_curve_two_equal_shipments() {
        let network = RoadNetwork::new([
            ("depot".to_string(), "near".to_string(), 20.0),
            ("depot".to_string(), "far".to_string(), 80.0),
        ])
        .unwrap();
        let instance = LastMileInstance {
            network,
            vehicle_classes: vec![truck_class("truck", 2, "depot")],
            commodities: vec![water(100.0)],
            demands: [
                (("water".to_string(), "near".to_string(), 1), 1.0),
                (("water".to_string(), "far".to_string(), 1), 1.0),
            ]
            .into_iter()
            .collect(),
            supplies: [(("water".to_string(), "depot".to_string(), 1), 2.0)]
                .into_iter()
                .collect(),
            period_minutes: 10,
            horizon: 11,
            max_departure_period: Some(1),
            hard_demand: false,
            departure_caps: None,
            corridors: BTreeMap::new(),
        };
        let pairs = instance.od_pairs();
        let (pool, _) = initial_pool(&instance.network, &pairs, 8);
        let plan = solve_lastmile(&instance, &pool, 0.0, &[]).unwrap();
        assert_eq!(delivery_curve(&plan), vec![(30.0, 0.5), (90.0, 1.0)]);
    }

    #[test]
    fn horizon_too_short_is_structural() {
        let (mut instance, pool) = single_route_instance(1.0, 1);
        instance.horizon = 3; // 50-minute route needs arrival at period 7
        assert!(matches!(
            build_blue_model(&instance, &pool, 0.0, &[]),
            Err(BlueError::StructuralInfeasible(_))
        ));
    }

    #[test]
    fn objective_decomposition_sums() {
        let (instance, pool) = single_route_instance(2.0, 2);
        let plan = solve_lastmile(&instance, &pool, 0.0, &[]).unwrap();
        assert!(
            (plan.objective.total()
                - (plan.objective.exposure_cost
                    + plan.objective.vehicle_cost
                    + plan.objective.unmet_cost))
                .abs()
                <= 1e-9
        );
        assert_eq!(plan.objective.vehicle_cost, 100.0);
    }
}
