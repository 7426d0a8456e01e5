//! Exhaustive enumeration oracle for the last-mile MIP: fix every binary
//! assignment, solve the continuous remainder, and compare against
//! branch-and-bound. Also post-hoc structural checks on solved plans.

mod common;

use common::{perturbed_fleet, two_corridor_instance, water};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use stormstage_core::blue::{
    build_blue_model, solve_blue, solve_lastmile, Event, LastMileInstance, RoutedPlan,
};
use stormstage_core::opt::{solve_lp, SolveStatus};
use stormstage_core::route::{extend_pool, initial_pool, RoadNetwork, RoutePool};

/// Enumerates all 0/1 assignments of the model's integral variables,
/// solving the continuous remainder for each, and returns the best
/// objective found.
fn enumeration_optimum(model: &stormstage_core::opt::LinearModel) -> Option<f64> {
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integral)
        .map(|(j, _)| j)
        .collect();
    assert!(binaries.len() <= 16, "enumeration oracle capped at 16 binaries");
    let mut best: Option<f64> = None;
    for mask in 0u64..(1 << binaries.len()) {
        let mut relaxed = model.clone();
        for (pos, &j) in binaries.iter().enumerate() {
            let v = ((mask >> pos) & 1) as f64;
            relaxed.set_bounds(j, v, v);
            relaxed.variables_mut()[j].integral = false;
        }
        for &j in &binaries {
            // keep other flags cleared too
            relaxed.variables_mut()[j].integral = false;
        }
        let sol = solve_lp(&relaxed).unwrap();
        if sol.status == SolveStatus::Optimal {
            best = Some(best.map_or(sol.objective_value, |b: f64| b.min(sol.objective_value)));
        }
    }
    best
}

fn two_corridor_pool(instance: &LastMileInstance) -> RoutePool {
    let pairs = instance.od_pairs();
    let (mut pool, _) = initial_pool(&instance.network, &pairs, 8);
    let mut penalized = instance.network.clone();
    penalized
        .set_disruption(
            &[(("m1".to_string(), "m2".to_string()), 1.0)].into_iter().collect(),
        )
        .unwrap();
    extend_pool(&mut pool, &penalized, &pairs, 100.0);
    assert_eq!(pool.len(), 2, "western detour should be pooled");
    pool
}

fn central_route_members() -> Event {
    Event {
        id: "hit-central".into(),
        members: [("d".to_string(), "t".to_string(), "d->m1->m2->t".to_string())]
            .into_iter()
            .collect(),
        coeff: 0.4,
    }
}

/// Post-hoc invariants on a solved plan: vehicle conservation, knapsacks,
/// and exposure tightness.
fn check_plan_invariants(plan: &RoutedPlan, instance: &LastMileInstance, events: &[Event], theta: f64) {
    // Vehicle conservation: all introduced vehicles are idle somewhere at
    // the horizon or still en route (arrival past the horizon).
    let introduced: u32 = instance
        .vehicle_classes
        .iter()
        .flat_map(|c| c.introductions.iter())
        .map(|i| i.count)
        .sum();
    let idle_at_end: f64 = plan
        .idle
        .iter()
        .filter(|((_, _, t), _)| *t == plan.horizon)
        .map(|(_, &v)| v)
        .sum();
    let en_route = plan
        .trips
        .iter()
        .filter(|t| {
            let class = instance
                .vehicle_classes
                .iter()
                .find(|c| c.id == t.class_id)
                .expect("class exists");
            let turnaround = class
                .turnaround_overrides
                .get(&t.dest)
                .copied()
                .unwrap_or(class.turnaround_default);
            t.depart_period + t.travel_periods + turnaround + 1 > plan.horizon
        })
        .count() as f64;
    assert!(
        (introduced as f64 - idle_at_end - en_route).abs() <= 1e-6,
        "vehicle conservation: introduced {introduced}, idle {idle_at_end}, en route {en_route}"
    );

    // Knapsacks hold on every trip.
    for trip in &plan.trips {
        let class = instance.vehicle_classes.iter().find(|c| c.id == trip.class_id).unwrap();
        let mut weight = 0.0;
        let mut volume = 0.0;
        for (c, units) in &trip.cargo {
            let commodity = instance.commodities.iter().find(|cc| cc.id == *c).unwrap();
            weight += commodity.unit_weight * units;
            volume += commodity.unit_volume * units;
        }
        assert!(weight <= class.weight_cap + 1e-7);
        assert!(volume <= class.volume_cap + 1e-7);
    }

    // Exposure equals the worst event load exactly when it is priced.
    if !events.is_empty() {
        let mut worst = 0.0_f64;
        for event in events {
            let count = plan
                .trips
                .iter()
                .filter(|t| {
                    event.members.contains(&(t.origin.clone(), t.dest.clone(), t.route_id.clone()))
                })
                .count() as f64;
            worst = worst.max(event.coeff * count);
        }
        assert!(plan.exposure >= worst - 1e-7);
        if theta > 0.0 {
            assert!(
                (plan.exposure - worst).abs() <= 1e-7,
                "exposure {} not tight against worst event load {worst}",
                plan.exposure
            );
        }
    }
}

#[test]
fn two_corridor_fixture_matches_enumeration() {
    let instance = two_corridor_instance();
    let pool = two_corridor_pool(&instance);
    let events = vec![central_route_members()];
    for theta in [0.0, 100.0, 500.0, 5000.0] {
        let blue = build_blue_model(&instance, &pool, theta, &events).unwrap();
        let plan = solve_blue(&blue).unwrap();
        let oracle = enumeration_optimum(&blue.model).expect("feasible assignment exists");
        assert!(
            (plan.objective.total() - oracle).abs() <= 1e-6,
            "theta {theta}: solver {} vs enumeration {oracle}",
            plan.objective.total()
        );
        check_plan_invariants(&plan, &instance, &events, theta);
    }
}

#[test]
fn random_small_instances_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for trial in 0..100 {
        // 2-5 vehicles x 1-2 routes x 1 departure period, <= 10 binaries.
        let trucks = rng.gen_range(2..=5u32);
        let two_roads = rng.gen_bool(0.6);
        let mut links = vec![
            ("d".to_string(), "t".to_string(), rng.gen_range(30..90) as f64),
        ];
        if two_roads {
            links.push(("d".to_string(), "alt".to_string(), rng.gen_range(20..70) as f64));
            links.push(("alt".to_string(), "t".to_string(), rng.gen_range(20..70) as f64));
        }
        let network = RoadNetwork::new(links).unwrap();
        let demand = rng.gen_range(1..=trucks) as f64;
        let instance = LastMileInstance {
            network,
            vehicle_classes: perturbed_fleet(trucks, "d"),
            commodities: vec![water(rng.gen_range(20..200) as f64)],
            demands: [(("water".to_string(), "t".to_string(), 1), demand)]
                .into_iter()
                .collect(),
            supplies: [(("water".to_string(), "d".to_string(), 1), demand)]
                .into_iter()
                .collect(),
            period_minutes: 30,
            horizon: 8,
            max_departure_period: Some(1),
            hard_demand: false,
            departure_caps: None,
            corridors: BTreeMap::new(),
        };
        let pairs = instance.od_pairs();
        let (pool, _) = initial_pool(&instance.network, &pairs, 8);
        let mut pool = pool;
        if two_roads {
            let mut penalized = instance.network.clone();
            penalized
                .set_disruption(
                    &[(("d".to_string(), "t".to_string()), 5.0)].into_iter().collect(),
                )
                .unwrap();
            extend_pool(&mut pool, &penalized, &pairs, 50.0);
        }
        let events = if rng.gen_bool(0.5) {
            vec![Event {
                id: "e0".into(),
                members: [("d".to_string(), "t".to_string(), "d->t".to_string())]
                    .into_iter()
                    .collect(),
                coeff: rng.gen_range(0.1..1.5),
            }]
        } else {
            Vec::new()
        };
        let theta = [0.0, 10.0, 300.0][rng.gen_range(0..3)];
        let blue = build_blue_model(&instance, &pool, theta, &events).unwrap();
        let binaries = blue.model.variables().iter().filter(|v| v.integral).count();
        assert!(binaries <= 10, "trial {trial} has {binaries} binaries");
        let plan = solve_blue(&blue).unwrap();
        let oracle = enumeration_optimum(&blue.model).expect("feasible");
        assert!(
            (plan.objective.total() - oracle).abs() <= 1e-6,
            "trial {trial}: solver {} vs enumeration {oracle}",
            plan.objective.total()
        );
    }
}

#[test]
fn theta_zero_reduces_to_nominal_objective() {
    // Removing events at theta zero leaves vehicle cost + unmet penalties.
    let instance = two_corridor_instance();
    let pool = two_corridor_pool(&instance);
    let with_events = solve_lastmile(&instance, &pool, 0.0, &[central_route_members()]).unwrap();
    let without_events = solve_lastmile(&instance, &pool, 0.0, &[]).unwrap();
    assert!(
        (with_events.objective.total() - without_events.objective.total()).abs() <= 1e-9
    );
    assert_eq!(with_events.objective.exposure_cost, 0.0);
    assert_eq!(
        without_events.objective.total(),
        without_events.objective.vehicle_cost + without_events.objective.unmet_cost
    );
}
