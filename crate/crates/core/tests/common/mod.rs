//! Shared last-mile fixtures for the integration suites.

use std::collections::BTreeMap;
use stormstage_core::blue::{Commodity, Introduction, LastMileInstance, VehicleClass};
use stormstage_core::route::RoadNetwork;

pub fn water(unmet_penalty: f64) -> Commodity {
    Commodity {
        id: "water".into(),
        unit_weight: 1.0,
        unit_volume: 1.0,
        unmet_penalty,
    }
}

/// One truck class per vehicle with a tiny cost spread so optima are unique
/// and branch-and-bound never wanders over symmetric fleets.
pub fn perturbed_fleet(count: u32, at: &str) -> Vec<VehicleClass> {
    (0..count)
        .map(|i| VehicleClass {
            id: format!("truck{i:02}"),
            weight_cap: 1.0,
            volume_cap: 1.0,
            turnaround_default: 1,
            turnaround_overrides: BTreeMap::new(),
            cost_per_minute: 1.0 + 0.0001 * i as f64,
            introductions: vec![Introduction { location: at.into(), period: 1, count: 1 }],
        })
        .collect()
}

/// Six-node network with two node-disjoint corridors from `d` to `t`:
/// central 220 minutes, western detour 236 (a sixteen-minute margin; both
/// four periods at hour-long periods, so the detour costs money but not
/// delivery delay). Six trucks, six units of demand at `t`. The unmet
/// penalty is set high enough that skipping deliveries never pays.
pub fn two_corridor_instance() -> LastMileInstance {
    let network = RoadNetwork::new([
        ("d".to_string(), "m1".to_string(), 74.0),
        ("m1".to_string(), "m2".to_string(), 73.0),
        ("m2".to_string(), "t".to_string(), 73.0),
        ("d".to_string(), "w1".to_string(), 79.0),
        ("w1".to_string(), "w2".to_string(), 79.0),
        ("w2".to_string(), "t".to_string(), 78.0),
    ])
    .unwrap();
    let corridors: BTreeMap<String, Vec<(String, String)>> = [
        (
            "central".to_string(),
            vec![
                ("d".to_string(), "m1".to_string()),
                ("m1".to_string(), "m2".to_string()),
                ("m2".to_string(), "t".to_string()),
            ],
        ),
        (
            "western".to_string(),
            vec![
                ("d".to_string(), "w1".to_string()),
                ("w1".to_string(), "w2".to_string()),
                ("w2".to_string(), "t".to_string()),
            ],
        ),
    ]
    .into_iter()
    .collect();
    LastMileInstance {
        network,
        vehicle_classes: perturbed_fleet(6, "d"),
        commodities: vec![water(200.0)],
        demands: [(("water".to_string(), "t".to_string(), 1), 6.0)].into_iter().collect(),
        supplies: [(("water".to_string(), "d".to_string(), 1), 6.0)].into_iter().collect(),
        period_minutes: 60,
        horizon: 7,
        max_departure_period: Some(1),
        hard_demand: false,
        departure_caps: None,
        corridors,
    }
}

/// A single corridor with no alternative: `d -> a -> t`.
pub fn single_path_instance() -> LastMileInstance {
    let network = RoadNetwork::new([
        ("d".to_string(), "a".to_string(), 90.0),
        ("a".to_string(), "t".to_string(), 90.0),
    ])
    .unwrap();
    LastMileInstance {
        network,
        vehicle_classes: perturbed_fleet(4, "d"),
        commodities: vec![water(200.0)],
        demands: [(("water".to_string(), "t".to_string(), 1), 4.0)].into_iter().collect(),
        supplies: [(("water".to_string(), "d".to_string(), 1), 4.0)].into_iter().collect(),
        period_minutes: 60,
        horizon: 6,
        max_departure_period: Some(1),
        hard_demand: false,
        departure_caps: None,
        corridors: BTreeMap::new(),
    }
}
