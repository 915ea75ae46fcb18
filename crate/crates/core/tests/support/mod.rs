#![allow(dead_code)]

use std::collections::BTreeSet;

use cdr_filter::geo::{GeoPoint, EARTH_RADIUS_M};
use cdr_filter::model::{parse_timestamp, Cell, CellId, LocationEvent, Timestamp};
use cdr_filter::synth::{Label, ScenarioConfig};
use cdr_filter::{Circle, CoveragePlan, Trajectory};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

pub const BASE_LAT: f64 = 58.0;
pub const BASE_LON: f64 = 26.0;

/// Point `meters` due east of the fixture origin.
pub fn east(meters: f64) -> GeoPoint {
    let dlon = (meters / (EARTH_RADIUS_M * BASE_LAT.to_radians().cos())).to_degrees();
    pt(BASE_LAT, BASE_LON + dlon)
}

pub fn t0() -> Timestamp {
    parse_timestamp("2021-06-01T08:00:00Z").unwrap()
}

pub fn at(seconds: i64) -> Timestamp {
    t0() + chrono::Duration::seconds(seconds)
}

pub fn id(s: &str) -> CellId {
    CellId::new(s).unwrap()
}

/// Plan of `(id, meters east of origin, radius)` cells.
pub fn line_plan(cells: &[(&str, f64, f64)]) -> CoveragePlan {
    let mut plan = CoveragePlan::new();
    for &(name, x, r) in cells {
        plan.insert(Cell {
            id: id(name),
            coverage: Circle::new(east(x), r).unwrap(),
        })
        .unwrap();
    }
    plan
}

pub fn events(seq: &[(i64, &str)]) -> Trajectory {
    seq.iter()
        .map(|&(t, c)| LocationEvent::new(at(t), id(c)))
        .collect()
}

/// Loop through Tartu, Narva, Tallinn, Pärnu, Riga and Valmiera (~890 km),
/// long enough for 500+ clean events at the default cadence.
pub fn recovery_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        waypoints: vec![
            pt(58.38, 26.72),
            pt(59.38, 28.19),
            pt(59.44, 24.75),
            pt(58.39, 24.50),
            pt(56.95, 24.11),
            pt(57.54, 25.43),
            pt(58.38, 26.72),
        ],
        cell_radius_min_m: 1500.0,
        cell_radius_max_m: 1800.0,
        pingpong_rate: 0.1,
        hop_rate: 0.05,
        hop_min_distance_m: 20_000.0,
        ..ScenarioConfig::default()
    }
}

/// A small scenario with every knob drawn from `seed`: a 15–40 km
/// two-leg path, varied speed, cadence and radii, and noise rates up to 0.15.
pub fn random_scenario(seed: u64, noisy: bool) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let start = pt(rng.gen_range(40.0..65.0), rng.gen_range(-10.0..40.0));
    let leg1 = cdr_filter::geo::destination_point(
        start,
        rng.gen_range(0.0..360.0),
        rng.gen_range(8_000.0..20_000.0),
    );
    let leg2 = cdr_filter::geo::destination_point(
        leg1,
        rng.gen_range(0.0..360.0),
        rng.gen_range(7_000.0..20_000.0),
    );
    let r_min = rng.gen_range(1400.0..1600.0);
    let speed = rng.gen_range(5.0..10.0);
    ScenarioConfig {
        seed,
        waypoints: vec![start, leg1, leg2],
        agent_speed_mps: speed,
        gps_interval_s: rng.gen_range(10.0..90.0),
        // At most 1.8 km between events, so clean handovers stay between
        // overlapping cells.
        event_interval_s: rng.gen_range(150.0..300.0f64).min(1800.0 / speed),
        cell_spacing_m: 2000.0,
        cell_radius_min_m: r_min,
        cell_radius_max_m: r_min + rng.gen_range(0.0..300.0),
        pingpong_rate: if noisy { rng.gen_range(0.0..0.15) } else { 0.0 },
        hop_rate: if noisy { rng.gen_range(0.0..0.1) } else { 0.0 },
        hop_min_distance_m: 20_000.0,
        start: t0(),
    }
}

/// Per-label (kept, total) counts after filtering.
pub fn retention(labels: &[Label], kept: &[bool], label: Label) -> (usize, usize) {
    let total = labels.iter().filter(|&&l| l == label).count();
    let k = labels
        .iter()
        .zip(kept)
        .filter(|(&l, &k)| l == label && k)
        .count();
    (k, total)
}

/// Monte-Carlo estimates for two planar discs: radius `r1` at the origin and
/// `r2` at `(d, 0)`. Uses rejection sampling over axis-aligned boxes that
/// enclose the region being measured.
pub struct MonteCarlo {
    rng: ChaCha8Rng,
    pub samples: usize,
}

impl MonteCarlo {
    pub fn new(seed: u64, samples: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            samples,
        }
    }

    fn estimate(&mut self, x: (f64, f64), y: (f64, f64), inside: impl Fn(f64, f64) -> bool) -> f64 {
        if x.1 <= x.0 || y.1 <= y.0 {
            return 0.0;
        }
        let mut hits = 0usize;
        for _ in 0..self.samples {
            let px = self.rng.gen_range(x.0..x.1);
            let py = self.rng.gen_range(y.0..y.1);
            if inside(px, py) {
                hits += 1;
            }
        }
        (x.1 - x.0) * (y.1 - y.0) * hits as f64 / self.samples as f64
    }

    pub fn intersection(&mut self, r1: f64, r2: f64, d: f64) -> f64 {
        let x = ((-r1).max(d - r2), r1.min(d + r2));
        // Tightest half-height of the overlap, found by scanning x.
        let steps = 4096;
        let mut h: f64 = 0.0;
        for i in 0..=steps {
            let px = x.0 + (x.1 - x.0) * i as f64 / steps as f64;
            let a = (r1 * r1 - px * px).max(0.0).sqrt();
            let b = (r2 * r2 - (px - d) * (px - d)).max(0.0).sqrt();
            h = h.max(a.min(b));
        }
        let h = (h * 1.001).min(r1.min(r2));
        self.estimate(x, (-h, h), |px, py| {
            px * px + py * py <= r1 * r1 && (px - d) * (px - d) + py * py <= r2 * r2
        })
    }

    pub fn union(&mut self, r1: f64, r2: f64, d: f64) -> f64 {
        let x = ((-r1).min(d - r2), r1.max(d + r2));
        let h = r1.max(r2);
        self.estimate(x, (-h, h), |px, py| {
            px * px + py * py <= r1 * r1 || (px - d) * (px - d) + py * py <= r2 * r2
        })
    }
}

/// 1% relative agreement with a 1 m² absolute floor.
pub fn mc_agrees(analytic: f64, estimate: f64) -> bool {
    (analytic - estimate).abs() <= (0.01 * estimate.abs()).max(1.0)
}

/// Equal-radius lens area fraction of one disc, in closed form.
pub fn equal_lens_fraction(r: f64, d: f64) -> f64 {
    let x = d / (2.0 * r);
    if x >= 1.0 {
        return 0.0;
    }
    (2.0 / std::f64::consts::PI) * (x.acos() - x * (1.0 - x * x).sqrt())
}

/// Seeded random circle pair: radii 50 m–5 km, centre separation up to
/// 1.3 times the radius sum, anywhere between 60°S and 60°N.
pub fn random_circle_pair(rng: &mut ChaCha8Rng) -> (Circle, Circle) {
    let a = pt(rng.gen_range(-60.0..60.0), rng.gen_range(-179.0..179.0));
    let r1 = rng.gen_range(50.0..5000.0);
    let r2 = rng.gen_range(50.0..5000.0);
    let d = rng.gen_range(0.0..1.3 * (r1 + r2));
    let b = cdr_filter::geo::destination_point(a, rng.gen_range(0.0..360.0), d);
    (Circle::new(a, r1).unwrap(), Circle::new(b, r2).unwrap())
}

/// Checks analytic intersection and union areas of one pair against the
/// Monte-Carlo oracle. Returns a description of the first disagreement.
pub fn check_pair_against_oracle(
    a: &Circle,
    b: &Circle,
    mc: &mut MonteCarlo,
) -> Result<(), String> {
    use cdr_filter::geo;
    let d = geo::planar_distance(a.center(), b.center()).map_err(|e| e.to_string())?;
    let inter = geo::circle_intersection_area(a, b).map_err(|e| e.to_string())?;
    let union = geo::union_area(a, b).map_err(|e| e.to_string())?;
    let mc_inter = mc.intersection(a.radius(), b.radius(), d);
    let mc_union = mc.union(a.radius(), b.radius(), d);
    if !mc_agrees(inter, mc_inter) {
        return Err(format!(
            "intersection r1={} r2={} d={d}: analytic {inter} vs MC {mc_inter}",
            a.radius(),
            b.radius()
        ));
    }
    if !mc_agrees(union, mc_union) {
        return Err(format!(
            "union r1={} r2={} d={d}: analytic {union} vs MC {mc_union}",
            a.radius(),
            b.radius()
        ));
    }
    Ok(())
}

/// Reference cell counts and expected ratios for the four evaluation
/// columns: (truth, filter, matching, precision, recall).
pub const REFERENCE_COLUMNS: [(usize, usize, usize, f64, f64); 4] = [
    (115, 131, 95, 0.725, 0.826),
    (128, 131, 106, 0.809, 0.828),
    (54, 54, 41, 0.759, 0.759),
    (58, 54, 43, 0.796, 0.741),
];

/// Truth and filter cell sets with the given sizes and overlap.
pub fn cell_sets(
    truth: usize,
    filter: usize,
    matching: usize,
) -> (BTreeSet<CellId>, BTreeSet<CellId>) {
    let shared = (0..matching).map(|i| id(&format!("M{i}")));
    let t: BTreeSet<CellId> = shared
        .clone()
        .chain((0..truth - matching).map(|i| id(&format!("T{i}"))))
        .collect();
    let f: BTreeSet<CellId> = shared
        .chain((0..filter - matching).map(|i| id(&format!("F{i}"))))
        .collect();
    (t, f)
}

/// Runs the command-line binary with `args`.
pub fn run_cli<I, S>(args: I) -> std::process::Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    std::process::Command::new(env!("CARGO_BIN_EXE_cdr-filter"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics with its stderr unless it succeeds.
pub fn run_cli_ok<I, S>(args: I) -> std::process::Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = run_cli(args);
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Parsed `key=value` records file.
pub fn read_records(path: &std::path::Path) -> std::collections::BTreeMap<String, String> {
    cdr_filter::report::parse_records(&std::fs::read_to_string(path).unwrap())
}

/// Writes plan, events and GPS for a scenario under `dir`.
pub fn write_scenario(dir: &std::path::Path, s: &cdr_filter::synth::Scenario) {
    use cdr_filter::model::{write_coverage_plan, write_events, write_gps};
    use std::fs::File;
    write_coverage_plan(&s.plan, File::create(dir.join("plan.csv")).unwrap()).unwrap();
    write_events(
        s.events.events(),
        File::create(dir.join("events.csv")).unwrap(),
    )
    .unwrap();
    write_gps(&s.gps, File::create(dir.join("gps.csv")).unwrap()).unwrap();
}
