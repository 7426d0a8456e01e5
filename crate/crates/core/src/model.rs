//! Shared domain types: locations, supply types, demand tables, travel-time
//! matrices, and the forecast tree, plus instance validation and probability
//! normalization.
//!
//! All types are immutable after construction and safe to share across
//! threads. Collections are ordered (`BTreeMap`/`BTreeSet`) so that every
//! iteration order, and therefore every downstream artifact, is
//! deterministic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Tolerance for probability rows in hand-authored input files.
pub const INPUT_WEIGHT_TOL: f64 = 1e-6;
/// Tolerance for probability rows after normalization.
pub const NORMALIZED_WEIGHT_TOL: f64 = 1e-9;

/// A candidate pre-stage site and/or demand location.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub prestage_candidate: bool,
    /// Site capacity per supply type, in units. Missing key means zero.
    pub capacity_by_supply: BTreeMap<String, f64>,
    /// Probability that the site becomes inaccessible under the event.
    pub destruction_prob: f64,
}

/// A relief commodity with its risk, timing, and physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyType {
    pub id: String,
    /// Weight on the site-loss risk term in the pre-staging objective.
    pub alpha: f64,
    /// Weight on expected closing time in the dispatch-timing objective.
    pub time_weight: f64,
    /// Weight on expected unmet demand in the dispatch-timing objective.
    pub demand_weight: f64,
    /// Hours required to move this supply from the source to the sites.
    pub lead_time: f64,
    /// Additional dispatch-delay buffer, in hours.
    pub delay_buffer: f64,
    /// Mass per unit, used by the last-mile vehicle knapsacks.
    pub unit_weight: f64,
    /// Volume per unit, used by the last-mile vehicle knapsacks.
    pub unit_volume: f64,
}

/// Demand replacement applied when a specific landfall outcome realizes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutcomeOverride {
    /// Full replacement demand table (not a delta).
    pub entries: BTreeMap<(String, String), f64>,
    /// Pre-stage sites whose inventory is inaccessible under this outcome.
    pub destroyed_sites: BTreeSet<String>,
}

/// Planning demand plus per-outcome replacement tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemandTable {
    /// Units demanded, keyed by (demand location, supply type).
    pub entries: BTreeMap<(String, String), f64>,
    pub outcome_overrides: BTreeMap<String, OutcomeOverride>,
}

impl DemandTable {
    /// Demand in force under `outcome`: the override when one exists,
    /// otherwise the planning table.
    pub fn for_outcome(&self, outcome: &str) -> &BTreeMap<(String, String), f64> {
        self.outcome_overrides
            .get(outcome)
            .map(|o| &o.entries)
            .unwrap_or(&self.entries)
    }

    pub fn destroyed_sites(&self, outcome: &str) -> Option<&BTreeSet<String>> {
        self.outcome_overrides.get(outcome).map(|o| &o.destroyed_sites)
    }
}

/// Travel times keyed by (origin, destination, mode). A missing arc means
/// the mode is unavailable between those locations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeMatrix {
    pub travel_time: BTreeMap<(String, String, String), f64>,
}

impl ModeMatrix {
    /// Arcs out of `origin`, as (destination, mode, hours).
    pub fn arcs_from<'a>(
        &'a self,
        origin: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a str, f64)> + 'a {
        self.travel_time
            .iter()
            .filter(move |((i, _, _), _)| i == origin)
            .map(|((_, j, m), &tau)| (j.as_str(), m.as_str(), tau))
    }
}

/// Discretized forecast structure: landfall outcomes, intermediate storm
/// positions, forecast scenarios, and candidate dispatch times, with the
/// conditional weights tying them together.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTree {
    pub outcomes: Vec<String>,
    pub scenarios: Vec<String>,
    pub intermediate_locations: Vec<String>,
    /// Hours before landfall, strictly descending.
    pub dispatch_times: Vec<f64>,
    /// Probability of an outcome conditional on (position, scenario),
    /// keyed by (outcome, position, scenario). Each (position, scenario)
    /// row sums to one.
    pub outcome_weights: BTreeMap<(String, String, String), f64>,
    /// Probability that the storm occupies a position conditional on a
    /// dispatch time, keyed by (position, time index). Each time row sums
    /// to one.
    pub location_weights: BTreeMap<(String, usize), f64>,
}

impl ForecastTree {
    pub fn outcome_weight(&self, outcome: &str, position: &str, scenario: &str) -> f64 {
        self.outcome_weights
            .get(&(outcome.into(), position.into(), scenario.into()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn location_weight(&self, position: &str, time_idx: usize) -> f64 {
        self.location_weights
            .get(&(position.into(), time_idx))
            .copied()
            .unwrap_or(0.0)
    }

    /// Rescales every (position, scenario) outcome row and every time row
    /// to sum to one. Fails on all-zero rows.
    pub fn normalized(&self) -> Result<ForecastTree, ValidationError> {
        let mut tree = self.clone();
        for position in &self.intermediate_locations {
            for scenario in &self.scenarios {
                let row: Vec<(String, f64)> = self
                    .outcomes
                    .iter()
                    .map(|o| (o.clone(), self.outcome_weight(o, position, scenario)))
                    .collect();
                let sum: f64 = row.iter().map(|(_, w)| w).sum();
                if sum <= 0.0 {
                    return Err(ValidationError::new(format!(
                        "outcome_weights row for (position {position}, scenario {scenario}) is all zero"
                    )));
                }
                for (outcome, w) in row {
                    tree.outcome_weights
                        .insert((outcome, position.clone(), scenario.clone()), w / sum);
                }
            }
        }
        for t in 0..self.dispatch_times.len() {
            let row: Vec<(String, f64)> = self
                .intermediate_locations
                .iter()
                .map(|l| (l.clone(), self.location_weight(l, t)))
                .collect();
            let sum: f64 = row.iter().map(|(_, w)| w).sum();
            if sum <= 0.0 {
                return Err(ValidationError::new(format!(
                    "location_weights row for time index {t} is all zero"
                )));
            }
            for (position, w) in row {
                tree.location_weights.insert((position, t), w / sum);
            }
        }
        Ok(tree)
    }
}

/// Immutable bundle of everything the planning pipeline consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub locations: Vec<Location>,
    pub supply_types: Vec<SupplyType>,
    pub demand: DemandTable,
    pub modes: ModeMatrix,
    pub forecast: ForecastTree,
    /// Penalty per unit of unmet demand; `None` selects the instance-relative
    /// default `10 * (max travel + max alpha * destruction_prob)`.
    pub unmet_penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    message: String,
}

impl ValidationError {
    pub fn new(message: String) -> Self {
        ValidationError { message }
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl core::error::Error for ValidationError {}

impl ProblemInstance {
    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    pub fn supply(&self, id: &str) -> Option<&SupplyType> {
        self.supply_types.iter().find(|s| s.id == id)
    }

    /// Effective unmet-demand penalty: the configured value, or the
    /// instance-relative default when unspecified.
    pub fn effective_unmet_penalty(&self) -> f64 {
        if let Some(rho) = self.unmet_penalty {
            return rho;
        }
        let max_tau = self
            .modes
            .travel_time
            .values()
            .fold(0.0_f64, |acc, &t| acc.max(t));
        let max_p = self
            .locations
            .iter()
            .map(|l| l.destruction_prob)
            .fold(0.0_f64, f64::max);
        let max_alpha = self
            .supply_types
            .iter()
            .map(|s| s.alpha)
            .fold(0.0_f64, f64::max);
        10.0 * (max_tau + max_alpha * max_p)
    }

    /// Checks every structural invariant: id uniqueness, bounds, dangling
    /// references, and probability-row sums at the post-normalization
    /// tolerance. Run [`ProblemInstance::check_weight_rows`] first if the
    /// input has not been normalized.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut location_ids = BTreeSet::new();
        for loc in &self.locations {
            if !location_ids.insert(loc.id.clone()) {
                return Err(ValidationError::new(format!(
                    "locations: duplicate id {:?}",
                    loc.id
                )));
            }
            if !(0.0..=1.0).contains(&loc.destruction_prob) {
                return Err(ValidationError::new(format!(
                    "locations[{}].destruction_prob out of range: {}",
                    loc.id, loc.destruction_prob
                )));
            }
            for (supply, &cap) in &loc.capacity_by_supply {
                if cap < 0.0 {
                    return Err(ValidationError::new(format!(
                        "locations[{}].capacity_by_supply[{supply}] is negative",
                        loc.id
                    )));
                }
            }
        }

        let mut supply_ids = BTreeSet::new();
        for s in &self.supply_types {
            if !supply_ids.insert(s.id.clone()) {
                return Err(ValidationError::new(format!(
                    "supply_types: duplicate id {:?}",
                    s.id
                )));
            }
            for (name, value) in [
                ("alpha", s.alpha),
                ("time_weight", s.time_weight),
                ("demand_weight", s.demand_weight),
                ("delay_buffer", s.delay_buffer),
                ("unit_weight", s.unit_weight),
                ("unit_volume", s.unit_volume),
            ] {
                if value < 0.0 {
                    return Err(ValidationError::new(format!(
                        "supply_types[{}].{name} is negative",
                        s.id
                    )));
                }
            }
            if s.lead_time <= 0.0 {
                return Err(ValidationError::new(format!(
                    "supply_types[{}].lead_time must be positive",
                    s.id
                )));
            }
        }

        for loc in &self.locations {
            for supply in loc.capacity_by_supply.keys() {
                if !supply_ids.contains(supply) {
                    return Err(ValidationError::new(format!(
                        "locations[{}].capacity_by_supply references unknown supply {supply:?}",
                        loc.id
                    )));
                }
            }
        }

        self.check_demand_map("demands.entries", &self.demand.entries, &location_ids, &supply_ids)?;
        for (outcome, over) in &self.demand.outcome_overrides {
            if !self.forecast.outcomes.contains(outcome) {
                return Err(ValidationError::new(format!(
                    "demands.outcome_overrides references unknown outcome {outcome:?}"
                )));
            }
            self.check_demand_map(
                &format!("demands.outcome_overrides[{outcome}]"),
                &over.entries,
                &location_ids,
                &supply_ids,
            )?;
            for site in &over.destroyed_sites {
                if !location_ids.contains(site) {
                    return Err(ValidationError::new(format!(
                        "demands.outcome_overrides[{outcome}].destroyed_sites references unknown location {site:?}"
                    )));
                }
            }
        }

        for ((i, j, m), &tau) in &self.modes.travel_time {
            if !location_ids.contains(i) || !location_ids.contains(j) {
                return Err(ValidationError::new(format!(
                    "modes.travel_time arc ({i}, {j}, {m}) references an unknown location"
                )));
            }
            if tau <= 0.0 {
                return Err(ValidationError::new(format!(
                    "modes.travel_time arc ({i}, {j}, {m}) must be positive, got {tau}"
                )));
            }
        }

        self.validate_forecast()?;
        self.check_weight_rows(NORMALIZED_WEIGHT_TOL)?;

        if let Some(rho) = self.unmet_penalty {
            if rho < 0.0 {
                return Err(ValidationError::new("penalties.unmet_penalty is negative".into()));
            }
        }
        Ok(())
    }

    fn check_demand_map(
        &self,
        context: &str,
        entries: &BTreeMap<(String, String), f64>,
        location_ids: &BTreeSet<String>,
        supply_ids: &BTreeSet<String>,
    ) -> Result<(), ValidationError> {
        for ((j, k), &d) in entries {
            if !location_ids.contains(j) {
                return Err(ValidationError::new(format!(
                    "{context} references unknown location {j:?}"
                )));
            }
            if !supply_ids.contains(k) {
                return Err(ValidationError::new(format!(
                    "{context} references unknown supply {k:?}"
                )));
            }
            if d < 0.0 {
                return Err(ValidationError::new(format!(
                    "{context} entry ({j}, {k}) is negative"
                )));
            }
        }
        Ok(())
    }

    fn validate_forecast(&self) -> Result<(), ValidationError> {
        let f = &self.forecast;
        for (name, ids) in [
            ("forecast.outcomes", &f.outcomes),
            ("forecast.scenarios", &f.scenarios),
            ("forecast.intermediate_locations", &f.intermediate_locations),
        ] {
            let mut seen = BTreeSet::new();
            if ids.is_empty() {
                return Err(ValidationError::new(format!("{name} is empty")));
            }
            for id in ids {
                if !seen.insert(id) {
                    return Err(ValidationError::new(format!("{name}: duplicate id {id:?}")));
                }
            }
        }
        if f.dispatch_times.is_empty() {
            return Err(ValidationError::new("forecast.dispatch_times is empty".into()));
        }
        for w in f.dispatch_times.windows(2) {
            if w[1] >= w[0] {
                return Err(ValidationError::new(
                    "forecast.dispatch_times must be strictly descending (hours before landfall)"
                        .into(),
                ));
            }
        }
        for ((o, l, s), &w) in &f.outcome_weights {
            if !f.outcomes.contains(o) || !f.intermediate_locations.contains(l) || !f.scenarios.contains(s) {
                return Err(ValidationError::new(format!(
                    "forecast.outcome_weights key ({o}, {l}, {s}) references an undeclared id"
                )));
            }
            if w < 0.0 {
                return Err(ValidationError::new(format!(
                    "forecast.outcome_weights[({o}, {l}, {s})] is negative"
                )));
            }
        }
        for ((l, t), &w) in &f.location_weights {
            if !f.intermediate_locations.contains(l) {
                return Err(ValidationError::new(format!(
                    "forecast.location_weights references unknown position {l:?}"
                )));
            }
            if *t >= f.dispatch_times.len() {
                return Err(ValidationError::new(format!(
                    "forecast.location_weights time index {t} out of range"
                )));
            }
            if w < 0.0 {
                return Err(ValidationError::new(format!(
                    "forecast.location_weights[({l}, {t})] is negative"
                )));
            }
        }
        Ok(())
    }

    /// Checks that every outcome row and every dispatch-time row sums to one
    /// within `tol`. Callers that accept unnormalized input run this with
    /// [`INPUT_WEIGHT_TOL`] and normalize on failure only when asked to.
    pub fn check_weight_rows(&self, tol: f64) -> Result<(), ValidationError> {
        let f = &self.forecast;
        for l in &f.intermediate_locations {
            for s in &f.scenarios {
                let sum: f64 = f.outcomes.iter().map(|o| f.outcome_weight(o, l, s)).sum();
                if (sum - 1.0).abs() > tol {
                    return Err(ValidationError::new(format!(
                        "forecast.outcome_weights row (position {l}, scenario {s}) sums to {sum}, expected 1"
                    )));
                }
            }
        }
        for t in 0..f.dispatch_times.len() {
            let sum: f64 = f
                .intermediate_locations
                .iter()
                .map(|l| f.location_weight(l, t))
                .sum();
            if (sum - 1.0).abs() > tol {
                return Err(ValidationError::new(format!(
                    "forecast.location_weights row for time index {t} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Rescales a nonnegative weight map so it sums to one, preserving
/// proportions. Errors when every entry is zero.
pub fn normalize_weights<K: Ord + Clone>(
    raw: &BTreeMap<K, f64>,
) -> Result<BTreeMap<K, f64>, ValidationError> {
    let mut sum = 0.0;
    for &w in raw.values() {
        if w < 0.0 {
            return Err(ValidationError::new("normalize_weights: negative entry".into()));
        }
        sum += w;
    }
    if sum <= 0.0 {
        return Err(ValidationError::new(
            "normalize_weights: all entries are zero".into(),
        ));
    }
    Ok(raw.iter().map(|(k, &w)| (k.clone(), w / sum)).collect())
}
