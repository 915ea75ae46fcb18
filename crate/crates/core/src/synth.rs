//! Seeded synthetic scenarios with known ground truth.
//!
//! An agent travels a waypoint polyline at constant speed. Cells sit in a
//! staggered double row along the path, so every position is covered by at
//! least two cells, plus two rows of remote cells far off to either side that
//! serve as hop targets. Clean events use the nearest covering cell that makes
//! an ordinary handover from the previous one (see `pick_serving`); noise is
//! injected as A,B,A ping-pong triples or as hops to a remote cell.

use std::io::{Read, Write};

use chrono::Duration;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::FilterConfig;
use crate::geo::{self, Circle, GeoPoint};
use crate::model::{
    format_timestamp, parse_timestamp, seconds_between, Cell, CellId, CoveragePlan, GpsFix,
    LoadError, LocationEvent, RecordError, Timestamp, Trajectory,
};

pub const LABELS_HEADER: [&str; 3] = ["timestamp", "cell_id", "label"];

/// Perpendicular offset of each path-cell row, as a fraction of the spacing.
const ROW_OFFSET_FRACTION: f64 = 0.2;
/// Along-path spacing of remote cells, as a multiple of the cell spacing.
const REMOTE_SPACING_FACTOR: f64 = 5.0;
/// Ping-pong timing as fractions of the event interval: B follows A after
/// the first, the return to A follows B after the second. The triple is
/// kept early in the interval so the next clean handover is not mistaken for
/// a speed violation.
const PINGPONG_OUT: f64 = 1.0 / 3.0;
const PINGPONG_BACK: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub waypoints: Vec<GeoPoint>,
    pub agent_speed_mps: f64,
    pub gps_interval_s: f64,
    pub event_interval_s: f64,
    /// Along-path distance between cells of the same row.
    pub cell_spacing_m: f64,
    pub cell_radius_min_m: f64,
    pub cell_radius_max_m: f64,
    pub pingpong_rate: f64,
    pub hop_rate: f64,
    pub hop_min_distance_m: f64,
    #[serde(with = "timestamp_serde")]
    pub start: Timestamp,
}

mod timestamp_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_timestamp(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let raw = String::deserialize(d)?;
        parse_timestamp(&raw).map_err(serde::de::Error::custom)
    }
}

impl Default for ScenarioConfig {
    /// A straight 10 km drive north out of Tartu with no noise.
    fn default() -> Self {
        let start = GeoPoint::new(58.38, 26.72).expect("valid");
        let end = geo::destination_point(start, 0.0, 10_000.0);
        Self {
            seed: 1,
            waypoints: vec![start, end],
            agent_speed_mps: 8.0,
            gps_interval_s: 30.0,
            event_interval_s: 180.0,
            cell_spacing_m: 2000.0,
            cell_radius_min_m: 1500.0,
            cell_radius_max_m: 1500.0,
            pingpong_rate: 0.0,
            hop_rate: 0.0,
            hop_min_distance_m: 20_000.0,
            start: parse_timestamp("2021-06-01T08:00:00Z").expect("valid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error("no cell covers the agent at ({lat:.6}, {lon:.6}) at {time}; increase plan density", lat = position.lat(), lon = position.lon())]
    NoCoverage { position: GeoPoint, time: String },
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Config(msg));
        if self.waypoints.len() < 2 {
            return bad("at least two waypoints are required".into());
        }
        for (name, v) in [
            ("agent_speed_mps", self.agent_speed_mps),
            ("gps_interval_s", self.gps_interval_s),
            ("event_interval_s", self.event_interval_s),
            ("cell_spacing_m", self.cell_spacing_m),
            ("cell_radius_min_m", self.cell_radius_min_m),
            ("cell_radius_max_m", self.cell_radius_max_m),
            ("hop_min_distance_m", self.hop_min_distance_m),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.cell_radius_max_m < self.cell_radius_min_m {
            return bad("cell_radius_max_m is below cell_radius_min_m".into());
        }
        for (name, v) in [
            ("pingpong_rate", self.pingpong_rate),
            ("hop_rate", self.hop_rate),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.pingpong_rate + self.hop_rate >= 1.0 {
            return bad("pingpong_rate + hop_rate must be below 1".into());
        }
        let time_threshold = FilterConfig::default().time_threshold_s;
        if self.pingpong_rate > 0.0 && self.event_interval_s * PINGPONG_OUT >= time_threshold {
            return bad(format!(
                "event_interval_s {} too long for ping-pong gaps under {time_threshold} s",
                self.event_interval_s
            ));
        }
        if self.path_length() <= 0.0 {
            return bad("waypoint path has zero length".into());
        }
        Ok(())
    }

    fn path_length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| geo::great_circle_distance(w[0], w[1]))
            .sum()
    }
}

/// The agent's route, parameterised by distance travelled.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPath {
    waypoints: Vec<GeoPoint>,
    /// Cumulative distance at each waypoint.
    offsets: Vec<f64>,
    speed: f64,
    start: Timestamp,
}

impl AgentPath {
    fn new(waypoints: &[GeoPoint], speed: f64, start: Timestamp) -> Self {
        let mut offsets = vec![0.0];
        for w in waypoints.windows(2) {
            let last = *offsets.last().expect("non-empty");
            offsets.push(last + geo::great_circle_distance(w[0], w[1]));
        }
        Self {
            waypoints: waypoints.to_vec(),
            offsets,
            speed,
            start,
        }
    }

    pub fn length(&self) -> f64 {
        *self.offsets.last().expect("non-empty")
    }

    pub fn duration_s(&self) -> f64 {
        self.length() / self.speed
    }

    /// Position and heading (degrees) after travelling `s` meters.
    fn locate(&self, s: f64) -> (GeoPoint, f64) {
        let s = s.clamp(0.0, self.length());
        let seg = match self.offsets.partition_point(|&o| o <= s) {
            0 => 0,
            i => (i - 1).min(self.waypoints.len() - 2),
        };
        let (from, to) = (self.waypoints[seg], self.waypoints[seg + 1]);
        let bearing = geo::initial_bearing(from, to);
        let p = geo::destination_point(from, bearing, s - self.offsets[seg]);
        let heading = if geo::great_circle_distance(p, to) > 1e-6 {
            geo::initial_bearing(p, to)
        } else {
            bearing
        };
        (p, heading)
    }

    pub fn position_at(&self, ts: &Timestamp) -> GeoPoint {
        let t = seconds_between(&self.start, ts);
        self.locate(t * self.speed).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Clean,
    Pingpong,
    Hop,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Clean => "clean",
            Label::Pingpong => "pingpong",
            Label::Hop => "hop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clean" => Some(Label::Clean),
            "pingpong" => Some(Label::Pingpong),
            "hop" => Some(Label::Hop),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plan: CoveragePlan,
    pub gps: Vec<GpsFix>,
    pub events: Trajectory,
    /// One label per event, aligned with `events`.
    pub labels: Vec<Label>,
    pub path: AgentPath,
}

impl Scenario {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

fn at_offset(start: &Timestamp, seconds: f64) -> Timestamp {
    *start + Duration::milliseconds((seconds * 1000.0).round() as i64)
}

fn build_plan(cfg: &ScenarioConfig, path: &AgentPath, rng: &mut ChaCha8Rng) -> CoveragePlan {
    let mut plan = CoveragePlan::new();
    let radius = |rng: &mut ChaCha8Rng| {
        if cfg.cell_radius_max_m > cfg.cell_radius_min_m {
            rng.gen_range(cfg.cell_radius_min_m..=cfg.cell_radius_max_m)
        } else {
            cfg.cell_radius_min_m
        }
    };
    let add = |plan: &mut CoveragePlan, id: String, center: GeoPoint, r: f64| {
        let cell = Cell {
            id: CellId::new(id).expect("generated ids are well formed"),
            coverage: Circle::new(center, r).expect("radius is positive"),
        };
        plan.insert(cell).expect("generated ids are unique");
    };

    let step = cfg.cell_spacing_m / 2.0;
    let row_offset = cfg.cell_spacing_m * ROW_OFFSET_FRACTION;
    let n = (path.length() / step).ceil() as usize;
    for k in 0..=n {
        let (p, heading) = path.locate(k as f64 * step);
        let side = if k % 2 == 0 { 90.0 } else { -90.0 };
        let center = geo::destination_point(p, heading + side, row_offset);
        let r = radius(rng);
        add(&mut plan, format!("P{k:05}"), center, r);
    }

    let remote_step = cfg.cell_spacing_m * REMOTE_SPACING_FACTOR;
    let remote_offset = cfg.hop_min_distance_m + 2.0 * cfg.cell_radius_max_m + cfg.cell_spacing_m;
    let m = (path.length() / remote_step).floor() as usize;
    for j in 0..=m {
        let (p, heading) = path.locate(j as f64 * remote_step);
        for (tag, side) in [("L", -90.0), ("R", 90.0)] {
            let center = geo::destination_point(p, heading + side, remote_offset);
            let r = radius(rng);
            add(&mut plan, format!("R{tag}{j:04}"), center, r);
        }
    }
    plan
}

fn covers(cell: &Cell, p: GeoPoint) -> bool {
    geo::great_circle_distance(cell.coverage.center(), p) <= cell.coverage.radius()
}

/// Whether a move from `a` to `b` after `dt` seconds gets past anchors 4 to 7
/// under the default filter thresholds. Ping-pong partners must satisfy this
/// so that only anchor 8 catches them; clean handovers prefer it.
fn quiet_move(a: &Cell, b: &Cell, dt: f64, filter: &FilterConfig) -> bool {
    let d = geo::great_circle_distance(a.coverage.center(), b.coverage.center());
    if d >= a.coverage.radius() + b.coverage.radius() || d / dt >= filter.speed_threshold_mps {
        return false;
    }
    let (Ok(iou), Ok(ab), Ok(ba)) = (
        geo::iou(&a.coverage, &b.coverage),
        geo::coverage_fraction(&a.coverage, &b.coverage),
        geo::coverage_fraction(&b.coverage, &a.coverage),
    ) else {
        return false;
    };
    iou < filter.similarity_threshold
        && ab <= filter.covered_threshold
        && ba <= filter.covered_threshold
}

/// Serving cell at `pos`: the nearest covering cell the filter accepts from
/// the current cell without returning to the one served before it. Failing
/// that, the current cell if it still covers the agent, then any accepted
/// cell, then simply the nearest.
fn pick_serving<'a>(
    cells: &[&'a Cell],
    pos: GeoPoint,
    t: f64,
    last: Option<(&Cell, f64)>,
    before_last: Option<&Cell>,
    filter: &FilterConfig,
) -> Option<&'a Cell> {
    let mut covering: Vec<&'a Cell> = cells.iter().copied().filter(|c| covers(c, pos)).collect();
    covering.sort_by(|a, b| {
        let da = geo::great_circle_distance(a.coverage.center(), pos);
        let db = geo::great_circle_distance(b.coverage.center(), pos);
        da.total_cmp(&db)
    });
    let Some((prev, prev_t)) = last else {
        return covering.first().copied();
    };
    let quiet = |c: &&&Cell| c.id == prev.id || quiet_move(prev, c, t - prev_t, filter);
    let fresh = |c: &&&Cell| before_last.is_none_or(|b| b.id != c.id);
    covering
        .iter()
        .find(|c| quiet(c) && fresh(c))
        .or_else(|| covering.iter().find(|c| c.id == prev.id))
        .or_else(|| covering.iter().find(quiet))
        .or_else(|| covering.first())
        .copied()
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let path = AgentPath::new(&cfg.waypoints, cfg.agent_speed_mps, cfg.start);
    let plan = build_plan(cfg, &path, &mut rng);
    let cells: Vec<&Cell> = plan.iter().collect();
    let filter = FilterConfig::default();
    let duration = path.duration_s();

    let gps: Vec<GpsFix> = (0..)
        .map(|k| k as f64 * cfg.gps_interval_s)
        .take_while(|&t| t <= duration)
        .map(|t| GpsFix {
            timestamp: at_offset(&cfg.start, t),
            position: path.locate(t * cfg.agent_speed_mps).0,
        })
        .collect();

    let mut events = Vec::new();
    let mut labels = Vec::new();
    let mut push = |t: f64, cell: &Cell, label: Label| {
        events.push(LocationEvent::new(
            at_offset(&cfg.start, t),
            cell.id.clone(),
        ));
        labels.push(label);
    };

    // Partners must differ from recently emitted cells, otherwise X,A,B=X
    // reads as a bounce around A instead of around B.
    let mut recent: Vec<CellId> = Vec::new();
    // Last clean cell with its time, and the distinct cell served before it.
    let mut last_clean: Option<(&Cell, f64)> = None;
    let mut before_last: Option<&Cell> = None;
    let out_dt = cfg.event_interval_s * PINGPONG_OUT;
    let back_dt = cfg.event_interval_s * PINGPONG_BACK;
    for k in 0.. {
        let t = k as f64 * cfg.event_interval_s;
        if t > duration {
            break;
        }
        let pos = path.locate(t * cfg.agent_speed_mps).0;
        let serving =
            pick_serving(&cells, pos, t, last_clean, before_last, &filter).ok_or_else(|| {
                ScenarioError::NoCoverage {
                    position: pos,
                    time: format_timestamp(&at_offset(&cfg.start, t)),
                }
            })?;
        if last_clean.is_some_and(|(c, _)| c.id != serving.id) {
            before_last = last_clean.map(|(c, _)| c);
        }

        // The first event is accepted unconditionally by the filter, so it
        // is always left clean.
        let draw: f64 = if k == 0 { 1.0 } else { rng.gen() };

        if draw < cfg.pingpong_rate {
            let partners: Vec<&Cell> = cells
                .iter()
                .copied()
                .filter(|b| b.id != serving.id && !recent.contains(&b.id) && covers(b, pos))
                .filter(|b| quiet_move(serving, b, out_dt, &filter))
                .collect();
            if let Some(b) = partners.choose(&mut rng) {
                recent = vec![serving.id.clone(), b.id.clone()];
                push(t, serving, Label::Clean);
                push(t + out_dt, b, Label::Pingpong);
                push(t + out_dt + back_dt, serving, Label::Clean);
                last_clean = Some((serving, t + out_dt + back_dt));
                continue;
            }
        } else if draw < cfg.pingpong_rate + cfg.hop_rate {
            let remote: Vec<&Cell> = cells
                .iter()
                .copied()
                .filter(|c| {
                    geo::great_circle_distance(c.coverage.center(), pos) >= cfg.hop_min_distance_m
                })
                .collect();
            if let Some(h) = remote.choose(&mut rng) {
                recent.push(h.id.clone());
                push(t, h, Label::Hop);
                continue;
            }
        }
        recent = vec![serving.id.clone()];
        push(t, serving, Label::Clean);
        last_clean = Some((serving, t));
    }

    Ok(Scenario {
        plan,
        gps,
        events: Trajectory::new(events),
        labels,
        path,
    })
}

pub fn write_labels<W: Write>(
    events: &Trajectory,
    labels: &[Label],
    mut sink: W,
) -> std::io::Result<()> {
    writeln!(sink, "{}", LABELS_HEADER.join(","))?;
    for (e, l) in events.events().iter().zip(labels) {
        writeln!(
            sink,
            "{},{},{}",
            format_timestamp(&e.timestamp),
            e.cell_id,
            l.as_str()
        )?;
    }
    Ok(())
}

/// Reads a labels file in file order.
pub fn load_labels<R: Read>(source: R) -> Result<Vec<(LocationEvent, Label)>, LoadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let err = |kind| LoadError::Record { line, kind };
        if rec.len() != LABELS_HEADER.len() {
            return Err(err(RecordError::FieldCount {
                expected: LABELS_HEADER.len(),
                found: rec.len(),
            }));
        }
        let ts = parse_timestamp(&rec[0]).map_err(err)?;
        let id = CellId::new(&rec[1]).map_err(err)?;
        let label = Label::parse(&rec[2]).ok_or_else(|| {
            err(RecordError::Number {
                field: "label",
                value: rec[2].to_string(),
            })
        })?;
        out.push((LocationEvent::new(ts, id), label));
    }
    Ok(out)
}
