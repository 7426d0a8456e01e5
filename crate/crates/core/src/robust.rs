//! Iterative planner/adversary loop: solve the last-mile MIP, let the
//! adversary concentrate disruption on the loaded links, convert its output
//! into link surcharges and exposure events, extend the route pool under
//! the penalized costs, and re-solve. The first iteration runs on the
//! untouched network and pool, so its plan is the risk-unaware baseline;
//! the last iteration's plan is the robust alternative.
//!
//! Disruption accumulates across iterations by taking the per-link maximum
//! of the adversary's cost increases, which keeps repeated targeting of the
//! same link from escalating without bound. Each heavy link (cost increase
//! at or above `z_min`) becomes one event whose members are all pooled
//! routes containing it and whose coefficient is the accumulated increase.

use crate::blue::{solve_lastmile, BlueError, Event, LastMileInstance, ObjectiveBreakdown, RoutedPlan};
use crate::blue::delivery_curve;
use crate::num;
use crate::red::{solve_red, RedBudget, RedError};
use crate::route::{extend_pool, initial_pool, RouteError, RoutePool};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type LinkKey = (String, String);

/// Hard cap on iterations under the adaptive stop rule.
pub const ADAPTIVE_ITERATION_CAP: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Run exactly `iterations` iterations.
    FixedIterations,
    /// Stop as soon as an iteration adds no routes and repeats the plan.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    /// Exposure price, also the surcharge multiplier during route generation.
    pub theta: f64,
    pub iterations: u32,
    /// Cost-increase threshold above which a link counts as heavy.
    pub z_min: f64,
    pub budget: RedBudget,
    pub stop: StopRule,
    pub pool_cap: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            theta: 0.0,
            iterations: 3,
            z_min: 0.05,
            budget: RedBudget::default(),
            stop: StopRule::FixedIterations,
            pool_cap: crate::route::DEFAULT_POOL_CAP,
        }
    }
}

/// One loop iteration's observable state.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: u32,
    pub pool_size: usize,
    pub new_routes: Vec<String>,
    pub link_flows: BTreeMap<LinkKey, f64>,
    pub red_effort: BTreeMap<LinkKey, f64>,
    pub red_impact: BTreeMap<LinkKey, f64>,
    pub exposure: f64,
    pub objective: ObjectiveBreakdown,
    pub delivered: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopResult {
    /// The first iteration's plan: no surcharges, no events.
    pub baseline: RoutedPlan,
    /// The final robust plan.
    pub final_plan: RoutedPlan,
    pub trace: Vec<IterationRecord>,
    pub pool: RoutePool,
    /// Set when the adaptive rule hit its cap without converging; the final
    /// plan is then the lowest-exposure iterate.
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
pub enum RobustError {
    Blue(BlueError),
    Red(RedError),
    Route(RouteError),
    UnknownCorridorLink { corridor: String, from: String, to: String },
    MismatchedInstances,
}

impl fmt::Display for RobustError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RobustError::Blue(e) => write!(f, "planner failed: {e}"),
            RobustError::Red(e) => write!(f, "adversary failed: {e}"),
            RobustError::Route(e) => write!(f, "route generation failed: {e}"),
            RobustError::UnknownCorridorLink { corridor, from, to } => {
                write!(f, "corridor {corridor:?} references unknown link ({from}, {to})")
            }
            RobustError::MismatchedInstances => {
                write!(f, "plans were solved on different networks")
            }
        }
    }
}

impl core::error::Error for RobustError {}

impl From<BlueError> for RobustError {
    fn from(e: BlueError) -> Self {
        RobustError::Blue(e)
    }
}

impl From<RedError> for RobustError {
    fn from(e: RedError) -> Self {
        RobustError::Red(e)
    }
}

impl From<RouteError> for RobustError {
    fn from(e: RouteError) -> Self {
        RobustError::Route(e)
    }
}

/// One event per heavy link: members are every pooled route containing the
/// link, the coefficient is the accumulated cost increase.
fn build_events(pool: &RoutePool, z_acc: &BTreeMap<LinkKey, f64>, z_min: f64) -> Vec<Event> {
    let mut events = Vec::new();
    for ((from, to), &z) in z_acc {
        if z < z_min {
            continue;
        }
        let mut members = alloc::collections::BTreeSet::new();
        for ((origin, dest), routes) in &pool.per_pair {
            for route in routes {
                if route.contains_link(from, to) {
                    members.insert((origin.clone(), dest.clone(), route.id()));
                }
            }
        }
        if members.is_empty() {
            continue;
        }
        events.push(Event { id: format!("evt[{from}->{to}]"), members, coeff: z });
    }
    events
}

/// Runs the loop from a fresh nominal-shortest-path pool.
pub fn run_loop(instance: &LastMileInstance, config: &LoopConfig) -> Result<LoopResult, RobustError> {
    let pairs = instance.od_pairs();
    let (pool, _) = initial_pool(&instance.network, &pairs, config.pool_cap);
    run_loop_from(instance, pool, config)
}

/// Runs the loop from a caller-provided initial pool.
pub fn run_loop_from(
    instance: &LastMileInstance,
    mut pool: RoutePool,
    config: &LoopConfig,
) -> Result<LoopResult, RobustError> {
    let pairs = instance.od_pairs();
    let max_iterations = match config.stop {
        StopRule::FixedIterations => config.iterations.max(1),
        StopRule::Adaptive => ADAPTIVE_ITERATION_CAP,
    };

    let mut z_acc: BTreeMap<LinkKey, f64> = BTreeMap::new();
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut baseline: Option<RoutedPlan> = None;
    let mut previous: Option<RoutedPlan> = None;
    let mut best_exposure: Option<(f64, RoutedPlan)> = None;
    let mut final_plan: Option<RoutedPlan> = None;
    let mut converged = false;

    for iteration in 1..=max_iterations {
        let mut new_routes = Vec::new();
        if iteration > 1 {
            let mut penalized = instance.network.clone();
            penalized.set_disruption(&z_acc)?;
            let outcome = extend_pool(&mut pool, &penalized, &pairs, config.theta);
            new_routes = outcome.added;
        }
        let events = build_events(&pool, &z_acc, config.z_min);
        let plan = solve_lastmile(instance, &pool, config.theta, &events)?;

        let flows = plan.link_flows();
        let profile = solve_red(&flows, &config.budget)?;
        for (link, &z) in &profile.cost_increase {
            let slot = z_acc.entry(link.clone()).or_insert(0.0);
            *slot = slot.max(z);
        }

        trace.push(IterationRecord {
            iteration,
            pool_size: pool.len(),
            new_routes: new_routes.clone(),
            link_flows: flows,
            red_effort: profile.effort.clone(),
            red_impact: profile.cost_increase.clone(),
            exposure: plan.exposure,
            objective: plan.objective,
            delivered: plan.delivered,
        });

        if baseline.is_none() {
            baseline = Some(plan.clone());
        }
        if best_exposure
            .as_ref()
            .map_or(true, |(a, _)| plan.exposure < *a)
        {
            best_exposure = Some((plan.exposure, plan.clone()));
        }

        let unchanged = previous.as_ref().map_or(false, |p: &RoutedPlan| p.trips == plan.trips);
        if config.stop == StopRule::Adaptive && iteration > 1 && new_routes.is_empty() && unchanged
        {
            final_plan = Some(plan);
            converged = true;
            break;
        }
        previous = Some(plan.clone());
        final_plan = Some(plan);
    }

    let mut warning = None;
    let final_plan = if config.stop == StopRule::Adaptive && !converged {
        warning = Some(format!(
            "adaptive stop did not converge within {ADAPTIVE_ITERATION_CAP} iterations; returning the lowest-exposure plan"
        ));
        best_exposure.expect("at least one iteration ran").1
    } else {
        final_plan.expect("at least one iteration ran")
    };

    Ok(LoopResult {
        baseline: baseline.expect("at least one iteration ran"),
        final_plan,
        trace,
        pool,
        warning,
    })
}

/// Load-concentration metrics over a plan's own most-utilized links.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConcentrationReport {
    pub peak: u32,
    pub top3: u32,
    pub top5: u32,
    pub corridor_totals: BTreeMap<String, u32>,
    pub loads: BTreeMap<LinkKey, u32>,
}

pub fn concentration_report(
    plan: &RoutedPlan,
    corridors: &BTreeMap<String, Vec<LinkKey>>,
) -> Result<ConcentrationReport, RobustError> {
    for (corridor, links) in corridors {
        for (from, to) in links {
            if !plan.network_links.contains(&(from.clone(), to.clone())) {
                return Err(RobustError::UnknownCorridorLink {
                    corridor: corridor.clone(),
                    from: from.clone(),
                    to: to.clone(),
                });
            }
        }
    }
    let mut sorted: Vec<u32> = plan.link_loads.values().copied().collect();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let top = |k: usize| sorted.iter().take(k).sum::<u32>();
    let mut corridor_totals = BTreeMap::new();
    for (corridor, links) in corridors {
        let total = links
            .iter()
            .map(|link| plan.link_loads.get(link).copied().unwrap_or(0))
            .sum();
        corridor_totals.insert(corridor.clone(), total);
    }
    Ok(ConcentrationReport {
        peak: sorted.first().copied().unwrap_or(0),
        top3: top(3),
        top5: top(5),
        corridor_totals,
        loads: plan.link_loads.clone(),
    })
}

/// Baseline-vs-robust value for one metric, with the percent change rounded
/// to an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricDelta {
    pub r_minus: f64,
    pub r_plus: f64,
    pub change_pct: i32,
}

impl MetricDelta {
    fn new(r_minus: f64, r_plus: f64) -> Self {
        let change_pct = if r_minus == 0.0 {
            if r_plus == 0.0 {
                0
            } else {
                100
            }
        } else {
            num::round((r_plus - r_minus) / r_minus * 100.0) as i32
        };
        MetricDelta { r_minus, r_plus, change_pct }
    }
}

/// Full baseline-vs-robust comparison: concentration metrics, corridor
/// totals, and delivery-curve divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanComparison {
    pub peak: MetricDelta,
    pub top3: MetricDelta,
    pub top5: MetricDelta,
    pub corridors: BTreeMap<String, MetricDelta>,
    /// Minute each plan reaches 90% of its deliveries, when it does.
    pub t90_minus: Option<f64>,
    pub t90_plus: Option<f64>,
    /// Largest horizontal gap between the two delivery curves, minutes.
    pub max_horizontal_gap: f64,
    /// Increase in the nominal objective terms (vehicle + unmet costs).
    pub price_of_robustness: f64,
    pub delivered_minus: f64,
    pub delivered_plus: f64,
}

/// Minute at which the step curve first reaches `fraction`.
pub fn time_at_fraction(curve: &[(f64, f64)], fraction: f64) -> Option<f64> {
    curve
        .iter()
        .find(|(_, f)| *f >= fraction - 1e-9)
        .map(|(minute, _)| *minute)
}

pub fn compare_plans(
    r_minus: &RoutedPlan,
    r_plus: &RoutedPlan,
    corridors: &BTreeMap<String, Vec<LinkKey>>,
) -> Result<PlanComparison, RobustError> {
    if r_minus.network_links != r_plus.network_links {
        return Err(RobustError::MismatchedInstances);
    }
    let minus = concentration_report(r_minus, corridors)?;
    let plus = concentration_report(r_plus, corridors)?;
    let mut corridor_deltas = BTreeMap::new();
    for name in corridors.keys() {
        corridor_deltas.insert(
            name.clone(),
            MetricDelta::new(
                minus.corridor_totals[name] as f64,
                plus.corridor_totals[name] as f64,
            ),
        );
    }

    let curve_minus = delivery_curve(r_minus);
    let curve_plus = delivery_curve(r_plus);
    let mut max_gap = 0.0_f64;
    for &(_, fraction) in curve_minus.iter().chain(curve_plus.iter()) {
        if let (Some(a), Some(b)) =
            (time_at_fraction(&curve_minus, fraction), time_at_fraction(&curve_plus, fraction))
        {
            max_gap = max_gap.max((b - a).abs());
        }
    }

    Ok(PlanComparison {
        peak: MetricDelta::new(minus.peak as f64, plus.peak as f64),
        top3: MetricDelta::new(minus.top3 as f64, plus.top3 as f64),
        top5: MetricDelta::new(minus.top5 as f64, plus.top5 as f64),
        corridors: corridor_deltas,
        t90_minus: time_at_fraction(&curve_minus, 0.9),
        t90_plus: time_at_fraction(&curve_plus, 0.9),
        max_horizontal_gap: max_gap,
        price_of_robustness: (r_plus.objective.vehicle_cost + r_plus.objective.unmet_cost)
            - (r_minus.objective.vehicle_cost + r_minus.objective.unmet_cost),
        delivered_minus: r_minus.delivered,
        delivered_plus: r_plus.delivered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::string::ToString;
    use alloc::vec;

    fn plan_with_loads(loads: &[(&str, &str, u32)]) -> RoutedPlan {
        let link_loads: BTreeMap<LinkKey, u32> = loads
            .iter()
            .map(|(a, b, n)| ((a.to_string(), b.to_string()), *n))
            .collect();
        let network_links: BTreeSet<LinkKey> = link_loads.keys().cloned().collect();
        RoutedPlan {
            trips: Vec::new(),
            idle: BTreeMap::new(),
            inventory: BTreeMap::new(),
            met: BTreeMap::new(),
            unmet: BTreeMap::new(),
            exposure: 0.0,
            objective: ObjectiveBreakdown::default(),
            link_loads,
            network_links,
            period_minutes: 10,
            horizon: 10,
            total_demand: 0.0,
            delivered: 0.0,
        }
    }

    #[test]
    fn published_baseline_aggregates() {
        let plan = plan_with_loads(&[
            ("manila", "bocaue", 31),
            ("bocaue", "malolos", 31),
            ("malolos", "san_fernando", 26),
            ("san_fernando", "angeles", 20),
            ("quezon_city", "norzagaray", 18),
        ]);
        let report = concentration_report(&plan, &BTreeMap::new()).unwrap();
        assert_eq!(report.peak, 31);
        assert_eq!(report.top3, 88);
        assert_eq!(report.top5, 126);
    }

    #[test]
    fn published_robust_aggregates() {
        let plan = plan_with_loads(&[
            ("norzagaray", "baliwag", 22),
            ("manila", "quezon_city", 20),
            ("manila", "bocaue", 17),
            ("bocaue", "malolos", 14),
            ("manila", "floridablanca", 12),
        ]);
        let report = concentration_report(&plan, &BTreeMap::new()).unwrap();
        assert_eq!(report.peak, 22);
        assert_eq!(report.top3, 59);
        assert_eq!(report.top5, 85);
    }

    #[test]
    fn empty_plan_reports_zeroes() {
        let plan = plan_with_loads(&[]);
        let report = concentration_report(&plan, &BTreeMap::new()).unwrap();
        assert_eq!((report.peak, report.top3, report.top5), (0, 0, 0));
    }

    #[test]
    fn published_percent_changes() {
        assert_eq!(MetricDelta::new(31.0, 22.0).change_pct, -29);
        assert_eq!(MetricDelta::new(88.0, 59.0).change_pct, -33);
        assert_eq!(MetricDelta::new(126.0, 85.0).change_pct, -33);
        assert_eq!(MetricDelta::new(109.0, 38.0).change_pct, -65);
    }

    #[test]
    fn identical_plans_have_zero_deltas() {
        let a = plan_with_loads(&[("x", "y", 5), ("y", "z", 3)]);
        let cmp = compare_plans(&a, &a, &BTreeMap::new()).unwrap();
        assert_eq!(cmp.peak.change_pct, 0);
        assert_eq!(cmp.top3.change_pct, 0);
        assert_eq!(cmp.max_horizontal_gap, 0.0);
        assert_eq!(cmp.price_of_robustness, 0.0);
    }

    #[test]
    fn corridor_totals_and_unknown_links() {
        let plan = plan_with_loads(&[("a", "b", 4), ("b", "c", 6)]);
        let corridors: BTreeMap<String, Vec<LinkKey>> = [(
            "central".to_string(),
            vec![("a".to_string(), "b".to_string()), ("b".to_string(), "c".to_string())],
        )]
        .into_iter()
        .collect();
        let report = concentration_report(&plan, &corridors).unwrap();
        assert_eq!(report.corridor_totals["central"], 10);

        let bad: BTreeMap<String, Vec<LinkKey>> =
            [("ghost".to_string(), vec![("a".to_string(), "zzz".to_string())])]
                .into_iter()
                .collect();
        assert!(matches!(
            concentration_report(&plan, &bad),
            Err(RobustError::UnknownCorridorLink { .. })
        ));
    }

    #[test]
    fn mismatched_networks_rejected() {
        let a = plan_with_loads(&[("a", "b", 1)]);
        let b = plan_with_loads(&[("a", "c", 1)]);
        assert!(matches!(
            compare_plans(&a, &b, &BTreeMap::new()),
            Err(RobustError::MismatchedInstances)
        ));
    }

    #[test]
    fn time_at_fraction_reads_step_curve() {
        let curve = vec![(30.0, 0.5), (90.0, 1.0)];
        assert_eq!(time_at_fraction(&curve, 0.5), Some(30.0));
        assert_eq!(time_at_fraction(&curve, 0.9), Some(90.0));
        assert_eq!(time_at_fraction(&curve, 1.0), Some(90.0));
        assert_eq!(time_at_fraction(&[], 0.9), None);
    }
}
