//! GPS ground truth and cell-level precision/recall.
//!
//! Every event is paired with the GPS fix closest in time. An event belongs to
//! the ground truth when its cell is in the plan and the fix lies within
//! `radius_factor * r` of the cell centroid. Precision and recall are then
//! computed over unique cell ids, not over events.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::great_circle_distance;
use crate::model::{seconds_between, CellId, CoveragePlan, GpsFix, LocationEvent, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthConfig {
    pub radius_factor: f64,
    pub max_association_gap_s: f64,
}

impl GroundTruthConfig {
    /// Fix must fall inside the nominal radius.
    pub fn strict() -> Self {
        Self {
            radius_factor: 1.0,
            max_association_gap_s: 300.0,
        }
    }

    /// Allows 20% coverage fluctuation beyond the nominal radius.
    pub fn relaxed() -> Self {
        Self {
            radius_factor: 1.2,
            ..Self::strict()
        }
    }

    pub fn validate(&self) -> Result<(), GroundTruthConfigError> {
        if !self.radius_factor.is_finite() || self.radius_factor < 1.0 {
            return Err(GroundTruthConfigError::RadiusFactor(self.radius_factor));
        }
        if !self.max_association_gap_s.is_finite() || self.max_association_gap_s <= 0.0 {
            return Err(GroundTruthConfigError::Gap(self.max_association_gap_s));
        }
        Ok(())
    }
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self::strict()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundTruthConfigError {
    #[error("radius factor must be at least 1, got {0}")]
    RadiusFactor(f64),
    #[error("maximum association gap must be positive, got {0}")]
    Gap(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub event: LocationEvent,
    pub fix: Option<GpsFix>,
    /// Filled in by [`build_ground_truth`].
    pub centroid_distance: Option<f64>,
    /// Filled in by [`build_ground_truth`].
    pub in_truth: bool,
}

/// Pairs each event with the nearest GPS fix in time. Equidistant fixes
/// resolve to the earlier one; fixes further than the configured gap are
/// dropped.
pub fn associate(events: &Trajectory, gps: &[GpsFix], cfg: &GroundTruthConfig) -> Vec<Association> {
    events
        .events()
        .iter()
        .map(|event| {
            let fix = nearest_fix(gps, event)
                .filter(|f| {
                    seconds_between(&event.timestamp, &f.timestamp).abs()
                        <= cfg.max_association_gap_s
                })
                .cloned();
            Association {
                event: event.clone(),
                fix,
                centroid_distance: None,
                in_truth: false,
            }
        })
        .collect()
}

fn nearest_fix<'a>(gps: &'a [GpsFix], event: &LocationEvent) -> Option<&'a GpsFix> {
    let after = gps.partition_point(|f| f.timestamp < event.timestamp);
    let later = gps.get(after);
    let earlier = after.checked_sub(1).and_then(|i| gps.get(i));
    match (earlier, later) {
        (Some(e), Some(l)) => {
            let de = seconds_between(&e.timestamp, &event.timestamp);
            let dl = seconds_between(&event.timestamp, &l.timestamp);
            Some(if dl < de { l } else { e })
        }
        (e, l) => e.or(l),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub associations: Vec<Association>,
    pub cells: BTreeSet<CellId>,
}

impl GroundTruth {
    /// Number of events labelled as ground truth.
    pub fn event_count(&self) -> usize {
        self.associations.iter().filter(|a| a.in_truth).count()
    }
}

pub fn build_ground_truth(
    associations: Vec<Association>,
    plan: &CoveragePlan,
    cfg: &GroundTruthConfig,
) -> GroundTruth {
    let mut cells = BTreeSet::new();
    let associations = associations
        .into_iter()
        .map(|mut a| {
            let cell = plan.get(&a.event.cell_id);
            a.centroid_distance = match (cell, &a.fix) {
                (Some(c), Some(f)) => Some(great_circle_distance(c.coverage.center(), f.position)),
                _ => None,
            };
            a.in_truth = match (cell, a.centroid_distance) {
                (Some(c), Some(d)) => d <= cfg.radius_factor * c.coverage.radius(),
                _ => false,
            };
            if a.in_truth {
                cells.insert(a.event.cell_id.clone());
            }
            a
        })
        .collect();
    GroundTruth {
        associations,
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub truth_cells: BTreeSet<CellId>,
    pub filter_cells: BTreeSet<CellId>,
    pub matching: BTreeSet<CellId>,
    pub not_in_truth: BTreeSet<CellId>,
    pub not_in_filter: BTreeSet<CellId>,
    /// 0 when undefined; see `precision_defined`.
    pub precision: f64,
    pub recall: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

pub fn evaluate(truth: &BTreeSet<CellId>, filtered: &BTreeSet<CellId>) -> EvaluationReport {
    let matching: BTreeSet<CellId> = truth.intersection(filtered).cloned().collect();
    let not_in_truth = filtered.difference(truth).cloned().collect();
    let not_in_filter = truth.difference(filtered).cloned().collect();
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (0.0, false)
        } else {
            (num as f64 / den as f64, true)
        }
    };
    let (precision, precision_defined) = ratio(matching.len(), filtered.len());
    let (recall, recall_defined) = ratio(matching.len(), truth.len());
    EvaluationReport {
        truth_cells: truth.clone(),
        filter_cells: filtered.clone(),
        matching,
        not_in_truth,
        not_in_filter,
        precision,
        recall,
        precision_defined,
        recall_defined,
    }
}

pub fn unique_cells(trajectory: &Trajectory) -> BTreeSet<CellId> {
    trajectory
        .events()
        .iter()
        .map(|e| e.cell_id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub event: LocationEvent,
    pub centroid_distance: Option<f64>,
    pub radius: Option<f64>,
}

/// One row per event that has an associated fix. Events whose cell has no
/// coverage information carry neither a distance nor a radius.
pub fn distance_profile(associations: &[Association], plan: &CoveragePlan) -> Vec<ProfileRow> {
    associations
        .iter()
        .filter_map(|a| {
            let fix = a.fix.as_ref()?;
            let cell = plan.get(&a.event.cell_id);
            Some(ProfileRow {
                event: a.event.clone(),
                centroid_distance: cell
                    .map(|c| great_circle_distance(c.coverage.center(), fix.position)),
                radius: cell.map(|c| c.coverage.radius()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Circle, GeoPoint, EARTH_RADIUS_M};
    use crate::model::{parse_timestamp, Cell, Timestamp};

    fn at(t: i64) -> Timestamp {
        parse_timestamp("2021-06-01T08:00:00Z").unwrap() + chrono::Duration::seconds(t)
    }

    fn event(t: i64, id: &str) -> LocationEvent {
        LocationEvent::new(at(t), CellId::new(id).unwrap())
    }

    fn fix(t: i64, lat: f64, lon: f64) -> GpsFix {
        GpsFix {
            timestamp: at(t),
            position: GeoPoint::new(lat, lon).unwrap(),
        }
    }

    fn ids(names: &[&str]) -> BTreeSet<CellId> {
        names.iter().map(|n| CellId::new(*n).unwrap()).collect()
    }

    /// Plan with cell "A" at (58, 26), radius 1000 m.
    fn plan_a() -> CoveragePlan {
        let mut plan = CoveragePlan::new();
        plan.insert(Cell {
            id: CellId::new("A").unwrap(),
            coverage: Circle::new(GeoPoint::new(58.0, 26.0).unwrap(), 1000.0).unwrap(),
        })
        .unwrap();
        plan
    }

    fn north_of_a(meters: f64) -> f64 {
        58.0 + (meters / EARTH_RADIUS_M).to_degrees()
    }

    #[test]
    fn nearest_in_time() {
        let t = Trajectory::new(vec![event(100, "A")]);
        let gps = [fix(90, 58.0, 26.0), fix(130, 58.1, 26.0)];
        let a = associate(&t, &gps, &GroundTruthConfig::strict());
        assert_eq!(a[0].fix.as_ref().unwrap().timestamp, at(90));
    }

    #[test]
    fn distant_fix_is_dropped() {
        let t = Trajectory::new(vec![event(100, "A")]);
        let gps = [fix(1000, 58.0, 26.0)];
        let a = associate(&t, &gps, &GroundTruthConfig::strict());
        assert!(a[0].fix.is_none());
        assert!(!a[0].in_truth);
    }

    #[test]
    fn equidistant_fixes_prefer_earlier() {
        let t = Trajectory::new(vec![event(100, "A")]);
        let gps = [fix(90, 58.0, 26.0), fix(110, 58.1, 26.0)];
        let a = associate(&t, &gps, &GroundTruthConfig::strict());
        assert_eq!(a[0].fix.as_ref().unwrap().timestamp, at(90));
    }

    #[test]
    fn fixes_only_on_one_side() {
        let t = Trajectory::new(vec![event(0, "A"), event(500, "A")]);
        let gps = [fix(100, 58.0, 26.0), fix(400, 58.0, 26.0)];
        let a = associate(&t, &gps, &GroundTruthConfig::strict());
        assert_eq!(a[0].fix.as_ref().unwrap().timestamp, at(100));
        assert_eq!(a[1].fix.as_ref().unwrap().timestamp, at(400));
    }

    #[test]
    fn no_gps_means_no_fixes() {
        let t = Trajectory::new(vec![event(0, "A"), event(10, "B")]);
        let a = associate(&t, &[], &GroundTruthConfig::strict());
        assert!(a.iter().all(|x| x.fix.is_none()));
    }

    #[test]
    fn membership_by_radius_factor() {
        let plan = plan_a();
        let t = Trajectory::new(vec![event(0, "A"), event(100, "A"), event(200, "A")]);
        let gps = [
            fix(0, 58.0, 26.0),
            fix(100, north_of_a(1100.0), 26.0),
            fix(200, north_of_a(1300.0), 26.0),
        ];
        let strict = build_ground_truth(
            associate(&t, &gps, &GroundTruthConfig::strict()),
            &plan,
            &GroundTruthConfig::strict(),
        );
        let relaxed = build_ground_truth(
            associate(&t, &gps, &GroundTruthConfig::relaxed()),
            &plan,
            &GroundTruthConfig::relaxed(),
        );
        let flags = |g: &GroundTruth| {
            g.associations
                .iter()
                .map(|a| a.in_truth)
                .collect::<Vec<_>>()
        };
        assert_eq!(flags(&strict), [true, false, false]);
        assert_eq!(flags(&relaxed), [true, true, false]);
        assert_eq!(strict.associations[0].centroid_distance, Some(0.0));
        assert_eq!(relaxed.event_count(), 2);
    }

    #[test]
    fn cells_outside_plan_never_in_truth() {
        let plan = plan_a();
        let t = Trajectory::new(vec![event(0, "Z")]);
        let gps = [fix(0, 58.0, 26.0)];
        let g = build_ground_truth(
            associate(&t, &gps, &GroundTruthConfig::relaxed()),
            &plan,
            &GroundTruthConfig::relaxed(),
        );
        assert!(!g.associations[0].in_truth);
        assert!(g.cells.is_empty());
    }

    #[test]
    fn set_arithmetic() {
        let r = evaluate(&ids(&["a", "b", "c"]), &ids(&["b", "c", "d", "e"]));
        assert_eq!(r.matching, ids(&["b", "c"]));
        assert_eq!(r.not_in_truth, ids(&["d", "e"]));
        assert_eq!(r.not_in_filter, ids(&["a"]));
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 2.0 / 3.0);
    }

    #[test]
    fn empty_sets_flag_undefined_ratios() {
        let r = evaluate(&ids(&["a"]), &BTreeSet::new());
        assert_eq!((r.precision, r.precision_defined), (0.0, false));
        assert_eq!((r.recall, r.recall_defined), (0.0, true));
        let r = evaluate(&BTreeSet::new(), &ids(&["a"]));
        assert_eq!((r.recall, r.recall_defined), (0.0, false));
        assert!(r.precision_defined);
    }

    #[test]
    fn profile_rows() {
        let plan = plan_a();
        let t = Trajectory::new(vec![event(0, "A"), event(50, "Z"), event(5000, "A")]);
        let gps = [fix(0, 58.0, 26.0), fix(50, 58.0, 26.0)];
        let assoc = associate(&t, &gps, &GroundTruthConfig::strict());
        let rows = distance_profile(&assoc, &plan);
        assert_eq!(rows.len(), 2);
        assert_eq!(
            (rows[0].centroid_distance, rows[0].radius),
            (Some(0.0), Some(1000.0))
        );
        assert_eq!(rows[1].event.cell_id.as_str(), "Z");
        assert_eq!((rows[1].centroid_distance, rows[1].radius), (None, None));
    }

    #[test]
    fn config_validation() {
        assert!(GroundTruthConfig::strict().validate().is_ok());
        assert!(GroundTruthConfig {
            radius_factor: 0.9,
            ..GroundTruthConfig::strict()
        }
        .validate()
        .is_err());
        assert!(GroundTruthConfig {
            max_association_gap_s: 0.0,
            ..GroundTruthConfig::strict()
        }
        .validate()
        .is_err());
    }
}
