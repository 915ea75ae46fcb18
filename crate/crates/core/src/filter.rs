//! Eight-anchor filter for ping-pong handovers and hops.
//!
//! The filter walks a trajectory in time order and keeps a *source*: the last
//! accepted event. Every following *destination* event is run through the
//! anchors below in order until one of them reaches a verdict.
//!
//! 1. same cell as the source: accept
//! 2. cell missing from the coverage plan: discard
//! 3. time gap at or above `time_threshold_s`: accept
//! 4. edge-to-edge gap over centroid distance at or above
//!    `distance_threshold`: discard
//! 5. implied centroid-to-centroid speed at or above `speed_threshold_mps`:
//!    discard
//! 6. coverage IoU at or above `similarity_threshold`: discard
//! 7. either cell more than `covered_threshold` inside the other: discard
//! 8. next event returns to the source cell within `time_threshold_s`
//!    (an A,B,A bounce): discard, otherwise accept
//!
//! A discard leaves the source unchanged; an accept makes the destination the
//! new source. The very first event is accepted unless its cell is missing
//! from the plan, in which case the next event is tried as the first.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{self, Circle};
use crate::model::{seconds_between, CoveragePlan, LocationEvent, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Anchors 3 and 8, seconds.
    pub time_threshold_s: f64,
    /// Anchor 4, ratio.
    pub distance_threshold: f64,
    /// Anchor 5, meters per second.
    pub speed_threshold_mps: f64,
    /// Anchor 6, ratio.
    pub similarity_threshold: f64,
    /// Anchor 7, ratio.
    pub covered_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            time_threshold_s: 600.0,
            distance_threshold: 0.20,
            speed_threshold_mps: 25.0,
            similarity_threshold: 0.50,
            covered_threshold: 0.80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} must be finite and positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must lie in (0, 1], got {value}")]
    NotRatio { name: &'static str, value: f64 },
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("time_threshold_s", self.time_threshold_s),
            ("speed_threshold_mps", self.speed_threshold_mps),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ConfigError::NotPositive { name, value });
            }
        }
        for (name, value) in [
            ("distance_threshold", self.distance_threshold),
            ("similarity_threshold", self.similarity_threshold),
            ("covered_threshold", self.covered_threshold),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ConfigError::NotRatio { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accepted,
    Discarded,
}

/// Where a verdict was reached: the first-event rule or one of the anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    FirstEvent,
    Anchor(u8),
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::FirstEvent => f.write_str("first"),
            Stage::Anchor(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    FirstEvent,
    SameCell,
    NotInPlan,
    TimeGapAccept,
    HopDistance,
    SpeedExceeded,
    CoverageSimilarity,
    CoverageContainment,
    AbaPingPong,
    AbaPass,
}

impl Reason {
    pub fn code(self) -> &'static str {
        match self {
            Reason::FirstEvent => "first-event",
            Reason::SameCell => "same-cell",
            Reason::NotInPlan => "not-in-plan",
            Reason::TimeGapAccept => "time-gap-accept",
            Reason::HopDistance => "hop-distance",
            Reason::SpeedExceeded => "speed-exceeded",
            Reason::CoverageSimilarity => "coverage-similarity",
            Reason::CoverageContainment => "coverage-containment",
            Reason::AbaPingPong => "aba-ping-pong",
            Reason::AbaPass => "aba-pass",
        }
    }

    pub fn verdict(self) -> Verdict {
        match self {
            Reason::FirstEvent | Reason::SameCell | Reason::TimeGapAccept | Reason::AbaPass => {
                Verdict::Accepted
            }
            Reason::NotInPlan
            | Reason::HopDistance
            | Reason::SpeedExceeded
            | Reason::CoverageSimilarity
            | Reason::CoverageContainment
            | Reason::AbaPingPong => Verdict::Discarded,
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Position of the event in the input trajectory.
    pub index: usize,
    pub event: LocationEvent,
    pub stage: Stage,
    pub reason: Reason,
}

impl Decision {
    pub fn verdict(&self) -> Verdict {
        self.reason.verdict()
    }

    pub fn is_accepted(&self) -> bool {
        self.verdict() == Verdict::Accepted
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub accepted: usize,
    pub discarded: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.accepted + self.discarded
    }
}

/// Accept/discard counts per stage: the first-event rule plus anchors 1–8.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnchorTally {
    pub first_event: Counts,
    pub anchors: [Counts; 8],
}

impl AnchorTally {
    fn record(&mut self, stage: Stage, verdict: Verdict) {
        let slot = match stage {
            Stage::FirstEvent => &mut self.first_event,
            Stage::Anchor(n) => &mut self.anchors[usize::from(n) - 1],
        };
        match verdict {
            Verdict::Accepted => slot.accepted += 1,
            Verdict::Discarded => slot.discarded += 1,
        }
    }

    pub fn get(&self, stage: Stage) -> Counts {
        match stage {
            Stage::FirstEvent => self.first_event,
            Stage::Anchor(n) => self.anchors[usize::from(n) - 1],
        }
    }

    /// Rows in report order.
    pub fn rows(&self) -> impl Iterator<Item = (Stage, Counts)> + '_ {
        std::iter::once((Stage::FirstEvent, self.first_event)).chain(
            self.anchors
                .iter()
                .enumerate()
                .map(|(i, c)| (Stage::Anchor(i as u8 + 1), *c)),
        )
    }

    pub fn accepted(&self) -> usize {
        self.rows().map(|(_, c)| c.accepted).sum()
    }

    pub fn discarded(&self) -> usize {
        self.rows().map(|(_, c)| c.discarded).sum()
    }

    pub fn total(&self) -> usize {
        self.accepted() + self.discarded()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub decisions: Vec<Decision>,
    pub tally: AnchorTally,
    pub filtered: Trajectory,
}

/// Runs the anchor pipeline over `trajectory`.
pub fn filter_trajectory(
    trajectory: &Trajectory,
    plan: &CoveragePlan,
    cfg: &FilterConfig,
) -> FilterReport {
    let events = trajectory.events();
    let mut decisions = Vec::with_capacity(events.len());
    let mut tally = AnchorTally::default();
    let mut kept = Vec::new();
    let mut source: Option<usize> = None;

    for (index, event) in events.iter().enumerate() {
        let (stage, reason) = match source {
            None if plan.contains(&event.cell_id) => (Stage::FirstEvent, Reason::FirstEvent),
            None => (Stage::FirstEvent, Reason::NotInPlan),
            Some(s) => evaluate(&events[s], event, events.get(index + 1), plan, cfg),
        };
        let verdict = reason.verdict();
        tally.record(stage, verdict);
        if verdict == Verdict::Accepted {
            source = Some(index);
            kept.push(event.clone());
        }
        decisions.push(Decision {
            index,
            event: event.clone(),
            stage,
            reason,
        });
    }

    FilterReport {
        decisions,
        tally,
        filtered: Trajectory::new(kept),
    }
}

fn coverage_of<'a>(plan: &'a CoveragePlan, event: &LocationEvent) -> Option<&'a Circle> {
    plan.get(&event.cell_id).map(|c| &c.coverage)
}

/// Decides a destination event against its source.
// `!(x < t)` rather than `x >= t` so that NaN fails every threshold.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn evaluate(
    source: &LocationEvent,
    dest: &LocationEvent,
    next: Option<&LocationEvent>,
    plan: &CoveragePlan,
    cfg: &FilterConfig,
) -> (Stage, Reason) {
    // 1
    if dest.cell_id == source.cell_id {
        return (Stage::Anchor(1), Reason::SameCell);
    }

    // 2
    let Some(dest_cov) = coverage_of(plan, dest) else {
        return (Stage::Anchor(2), Reason::NotInPlan);
    };
    // Sources are always accepted events, and only in-plan cells are accepted.
    let src_cov = coverage_of(plan, source).expect("accepted source cell is in the plan");

    // 3
    let dt = seconds_between(&source.timestamp, &dest.timestamp);
    if !(dt < cfg.time_threshold_s) {
        return (Stage::Anchor(3), Reason::TimeGapAccept);
    }

    // 4
    let d = geo::great_circle_distance(src_cov.center(), dest_cov.center());
    if !(hop_ratio(d, src_cov.radius(), dest_cov.radius()) < cfg.distance_threshold) {
        return (Stage::Anchor(4), Reason::HopDistance);
    }

    // 5
    if !(implied_speed(d, dt) < cfg.speed_threshold_mps) {
        return (Stage::Anchor(5), Reason::SpeedExceeded);
    }

    // 6: pairs too far apart for a shared local plane cannot overlap in
    // practice and are treated as disjoint.
    let similarity = geo::iou(src_cov, dest_cov).unwrap_or(0.0);
    if !(similarity < cfg.similarity_threshold) {
        return (Stage::Anchor(6), Reason::CoverageSimilarity);
    }

    // 7
    let src_inside = geo::coverage_fraction(src_cov, dest_cov).unwrap_or(0.0);
    let dest_inside = geo::coverage_fraction(dest_cov, src_cov).unwrap_or(0.0);
    if src_inside > cfg.covered_threshold || dest_inside > cfg.covered_threshold {
        return (Stage::Anchor(7), Reason::CoverageContainment);
    }

    // 8
    if let Some(next) = next {
        if next.cell_id == source.cell_id
            && seconds_between(&dest.timestamp, &next.timestamp) < cfg.time_threshold_s
        {
            return (Stage::Anchor(8), Reason::AbaPingPong);
        }
    }
    (Stage::Anchor(8), Reason::AbaPass)
}

/// Edge-to-edge gap between two coverage circles divided by their centroid
/// distance. Coincident centroids give 0.
pub fn hop_ratio(centroid_distance: f64, r_source: f64, r_dest: f64) -> f64 {
    if centroid_distance <= 0.0 {
        return 0.0;
    }
    let gap = (centroid_distance - r_source - r_dest).max(0.0);
    gap / centroid_distance
}

/// Average speed in m/s to cover `distance` in `dt` seconds. A zero time gap
/// gives infinity unless the distance is also zero.
pub fn implied_speed(distance: f64, dt: f64) -> f64 {
    if dt > 0.0 {
        distance / dt
    } else if distance > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}
