mod support;

use cdr_filter::geo::Circle;
use cdr_filter::model::{
    load_coverage_plan, load_events, load_gps, write_coverage_plan, write_events, write_gps, Cell,
    GpsFix, LocationEvent,
};
use cdr_filter::{CoveragePlan, Trajectory};
use proptest::prelude::*;
use support::{at, id, pt};

fn cell_name() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_-]{1,12}"
}

fn plan_strategy() -> impl Strategy<Value = CoveragePlan> {
    prop::collection::btree_map(
        cell_name(),
        (-89.9..89.9f64, -179.9..179.9f64, 1.0..50_000.0f64),
        0..30,
    )
    .prop_map(|cells| {
        let mut plan = CoveragePlan::new();
        for (name, (lat, lon, r)) in cells {
            plan.insert(Cell {
                id: id(&name),
                coverage: Circle::new(pt(lat, lon), r).unwrap(),
            })
            .unwrap();
        }
        plan
    })
}

proptest! {
    #[test]
    fn plan_round_trips(plan in plan_strategy()) {
        let mut first = Vec::new();
        write_coverage_plan(&plan, &mut first).unwrap();
        let back = load_coverage_plan(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_coverage_plan(&back, &mut second).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(back.len(), plan.len());
        for (a, b) in plan.iter().zip(back.iter()) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn events_round_trip(steps in prop::collection::vec((0i64..100_000, 0i64..1000, cell_name()), 0..50)) {
        let traj: Trajectory = steps
            .iter()
            .map(|(s, ms, name)| {
                LocationEvent::new(at(*s) + chrono::Duration::milliseconds(*ms), id(name))
            })
            .collect();
        let mut first = Vec::new();
        write_events(traj.events(), &mut first).unwrap();
        let back = load_events(first.as_slice()).unwrap();
        prop_assert_eq!(&back, &traj);
        let mut second = Vec::new();
        write_events(back.events(), &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn gps_round_trips(fixes in prop::collection::vec((0i64..100_000, -90.0..=90.0f64, -180.0..=180.0f64), 0..50)) {
        let mut fixes: Vec<GpsFix> = fixes
            .into_iter()
            .map(|(s, lat, lon)| GpsFix { timestamp: at(s), position: pt(lat, lon) })
            .collect();
        fixes.sort_by_key(|f| f.timestamp);
        let mut first = Vec::new();
        write_gps(&fixes, &mut first).unwrap();
        let back = load_gps(first.as_slice()).unwrap();
        prop_assert_eq!(&back, &fixes);
        let mut second = Vec::new();
        write_gps(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}
