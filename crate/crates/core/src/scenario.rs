//! Post-processing of a fixed pre-staging plan: re-solve the distribution
//! LP for every (outcome, scenario) cell with the staged stock held fixed,
//! then fold closing times and unmet-demand fractions through the forecast
//! tree into per-position and per-dispatch-time expectations.
//!
//! Closing time uses the parallel-dispatch convention: it is the maximum
//! travel time over arcs carrying positive flow, i.e. all deliveries start
//! simultaneously and the last arrival closes the operation. A plan that
//! delivers nothing has closing time zero by convention.
//!
//! The forecast stores one outcome distribution per (position, scenario)
//! row. When folding over scenarios the rows are averaged with equal
//! weight: the tree carries no scenario prior of its own, so scenarios are
//! treated as equally likely given the position.

use crate::model::{ForecastTree, ProblemInstance};
use crate::prestage::{solve_distribution, PrestageError, PrestagePlan, FLOW_TOL};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Closing time and unmet fraction for every (supply, outcome, scenario).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutcomePerformance {
    pub closing_time: BTreeMap<(String, String, String), f64>,
    pub unmet_fraction: BTreeMap<(String, String, String), f64>,
}

impl OutcomePerformance {
    pub fn supplies(&self) -> BTreeSet<String> {
        self.closing_time.keys().map(|(k, _, _)| k.clone()).collect()
    }
}

/// Expectations conditioned on intermediate storm positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocationExpectation {
    /// (supply, position) -> expected closing time, hours.
    pub exp_closing: BTreeMap<(String, String), f64>,
    /// (supply, position) -> expected unmet fraction in [0, 1].
    pub exp_unmet: BTreeMap<(String, String), f64>,
}

/// Expectations conditioned on candidate dispatch times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DispatchExpectation {
    /// Hours before landfall, same order as the forecast tree.
    pub times: Vec<f64>,
    /// (supply, time index) -> expected closing time, hours.
    pub exp_closing: BTreeMap<(String, usize), f64>,
    /// (supply, time index) -> expected unmet fraction in [0, 1].
    pub exp_unmet: BTreeMap<(String, usize), f64>,
}

#[derive(Debug, Clone)]
pub enum ScenarioError {
    UnknownOutcome(String),
    UnknownScenario(String),
    /// A weight is positive but the performance grid has no cell for it.
    MissingCell { supply: String, outcome: String, scenario: String },
    MissingLocation { supply: String, position: String },
    Prestage(PrestageError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::UnknownOutcome(o) => write!(f, "unknown outcome {o:?}"),
            ScenarioError::UnknownScenario(s) => write!(f, "unknown scenario {s:?}"),
            ScenarioError::MissingCell { supply, outcome, scenario } => write!(
                f,
                "performance grid has no cell for ({supply}, {outcome}, {scenario}) but its weight is positive"
            ),
            ScenarioError::MissingLocation { supply, position } => write!(
                f,
                "location expectations missing ({supply}, {position}) but its weight is positive"
            ),
            ScenarioError::Prestage(e) => write!(f, "distribution re-solve failed: {e}"),
        }
    }
}

impl core::error::Error for ScenarioError {}

impl From<PrestageError> for ScenarioError {
    fn from(e: PrestageError) -> Self {
        ScenarioError::Prestage(e)
    }
}

/// Re-solves the distribution problem for one (outcome, scenario) cell with
/// the plan's per-site stock fixed. Stock at sites destroyed under the
/// outcome is removed before the solve; the remaining stock may be
/// reassigned freely across demand locations and modes. Returns per-supply
/// closing time and unmet fraction.
///
/// The LP itself does not depend on the scenario index: scenarios enter
/// only through the forecast weights. The index is accepted (and validated)
/// so the grid is keyed the same way the weights are.
pub fn evaluate_outcome(
    plan: &PrestagePlan,
    instance: &ProblemInstance,
    outcome: &str,
    scenario: &str,
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>), ScenarioError> {
    if !instance.forecast.outcomes.iter().any(|o| o == outcome) {
        return Err(ScenarioError::UnknownOutcome(outcome.into()));
    }
    if !instance.forecast.scenarios.iter().any(|s| s == scenario) {
        return Err(ScenarioError::UnknownScenario(scenario.into()));
    }

    let mut stock = plan.stock_by_site();
    if let Some(destroyed) = instance.demand.destroyed_sites(outcome) {
        stock.retain(|(site, _), _| !destroyed.contains(site));
    }
    let demand = instance.demand.for_outcome(outcome);
    let resolved = solve_distribution(instance, demand, &stock)?;

    let mut closing: BTreeMap<String, f64> = BTreeMap::new();
    let mut unmet: BTreeMap<String, f64> = BTreeMap::new();
    for supply in &instance.supply_types {
        let k = &supply.id;
        let mut max_tau = 0.0_f64;
        for ((i, j, kk, m), &x) in &resolved.allocations {
            if kk == k && x > FLOW_TOL {
                let tau = instance
                    .modes
                    .travel_time
                    .get(&(i.clone(), j.clone(), m.clone()))
                    .copied()
                    .unwrap_or(0.0);
                max_tau = max_tau.max(tau);
            }
        }
        let total_demand: f64 = demand
            .iter()
            .filter(|((_, kk), _)| kk == k)
            .map(|(_, &d)| d)
            .sum();
        let total_unmet: f64 = resolved
            .unmet
            .iter()
            .filter(|((_, kk), _)| kk == k)
            .map(|(_, &d)| d)
            .sum();
        closing.insert(k.clone(), max_tau);
        unmet.insert(
            k.clone(),
            if total_demand > 0.0 { (total_unmet / total_demand).clamp(0.0, 1.0) } else { 0.0 },
        );
    }
    Ok((closing, unmet))
}

/// Evaluates the full (outcome, scenario) grid sequentially.
pub fn evaluate_grid(
    plan: &PrestagePlan,
    instance: &ProblemInstance,
) -> Result<OutcomePerformance, ScenarioError> {
    let mut perf = OutcomePerformance::default();
    for outcome in &instance.forecast.outcomes {
        for scenario in &instance.forecast.scenarios {
            let (closing, unmet) = evaluate_outcome(plan, instance, outcome, scenario)?;
            for (k, c) in closing {
                perf.closing_time.insert((k, outcome.clone(), scenario.clone()), c);
            }
            for (k, d) in unmet {
                perf.unmet_fraction.insert((k, outcome.clone(), scenario.clone()), d);
            }
        }
    }
    Ok(perf)
}

/// Folds the performance grid into per-position expectations: for each
/// supply and position, the outcome rows of every scenario are weighted by
/// the conditional outcome probabilities and averaged over scenarios.
pub fn location_expectations(
    perf: &OutcomePerformance,
    tree: &ForecastTree,
) -> Result<LocationExpectation, ScenarioError> {
    let supplies = perf.supplies();
    let scenario_weight = 1.0 / tree.scenarios.len() as f64;
    let mut out = LocationExpectation::default();
    for k in &supplies {
        for position in &tree.intermediate_locations {
            let mut e = 0.0;
            let mut d = 0.0;
            for scenario in &tree.scenarios {
                for outcome in &tree.outcomes {
                    let w = tree.outcome_weight(outcome, position, scenario);
                    if w == 0.0 {
                        continue;
                    }
                    let key = (k.clone(), outcome.clone(), scenario.clone());
                    let missing = || ScenarioError::MissingCell {
                        supply: k.clone(),
                        outcome: outcome.clone(),
                        scenario: scenario.clone(),
                    };
                    let c = perf.closing_time.get(&key).ok_or_else(missing)?;
                    let u = perf.unmet_fraction.get(&key).ok_or_else(missing)?;
                    e += scenario_weight * w * c;
                    d += scenario_weight * w * u;
                }
            }
            out.exp_closing.insert((k.clone(), position.clone()), e);
            out.exp_unmet.insert((k.clone(), position.clone()), d);
        }
    }
    Ok(out)
}

/// Folds per-position expectations into per-dispatch-time expectations
/// using the storm-position weights.
pub fn dispatch_expectations(
    locexp: &LocationExpectation,
    tree: &ForecastTree,
) -> Result<DispatchExpectation, ScenarioError> {
    let supplies: BTreeSet<String> = locexp.exp_closing.keys().map(|(k, _)| k.clone()).collect();
    let mut out = DispatchExpectation {
        times: tree.dispatch_times.clone(),
        ..DispatchExpectation::default()
    };
    for k in &supplies {
        for t in 0..tree.dispatch_times.len() {
            let mut e = 0.0;
            let mut d = 0.0;
            for position in &tree.intermediate_locations {
                let w = tree.location_weight(position, t);
                if w == 0.0 {
                    continue;
                }
                let key = (k.clone(), position.clone());
                let missing = || ScenarioError::MissingLocation {
                    supply: k.clone(),
                    position: position.clone(),
                };
                let ec = locexp.exp_closing.get(&key).ok_or_else(missing)?;
                let eu = locexp.exp_unmet.get(&key).ok_or_else(missing)?;
                e += w * ec;
                d += w * eu;
            }
            out.exp_closing.insert((k.clone(), t), e);
            out.exp_unmet.insert((k.clone(), t), d);
        }
    }
    Ok(out)
}
