//! Coverage plans, cell-event trajectories and GPS traces, plus their CSV
//! readers and writers.
//!
//! All three formats are comma separated with a single header line:
//!
//! | file      | columns                      |
//! |-----------|------------------------------|
//! | plan      | `cell_id,lat,lon,radius_m`   |
//! | events    | `timestamp,cell_id`          |
//! | gps       | `timestamp,lat,lon`          |
//!
//! Timestamps are RFC 3339 / ISO-8601 with an explicit offset or `Z`.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, SecondsFormat};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Circle, GeoError, GeoPoint};

pub type Timestamp = DateTime<FixedOffset>;

pub const PLAN_HEADER: [&str; 4] = ["cell_id", "lat", "lon", "radius_m"];
pub const EVENTS_HEADER: [&str; 2] = ["timestamp", "cell_id"];
pub const GPS_HEADER: [&str; 3] = ["timestamp", "lat", "lon"];

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {line}: {kind}")]
    Record { line: u64, kind: RecordError },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl LoadError {
    pub fn line(&self) -> Option<u64> {
        match self {
            LoadError::Record { line, .. } => Some(*line),
            LoadError::Csv(e) => e.position().map(|p| p.line()),
            LoadError::Io(_) => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("invalid cell id {0:?}: must match [A-Za-z0-9_-]+")]
    CellId(String),
    #[error("duplicate cell id {id:?} (first defined on line {first_line})")]
    DuplicateId { id: String, first_line: u64 },
    #[error("cannot parse {field} {value:?}")]
    Number { field: &'static str, value: String },
    #[error("cannot parse timestamp {value:?}: {reason}")]
    Timestamp { value: String, reason: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Cell identifier restricted to `[A-Za-z0-9_-]+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CellId(String);

impl CellId {
    pub fn new(id: impl Into<String>) -> Result<Self, RecordError> {
        let id = id.into();
        let valid = !id.is_empty()
            && id
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        if valid {
            Ok(Self(id))
        } else {
            Err(RecordError::CellId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CellId {
    type Error = RecordError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        CellId::new(value)
    }
}

impl From<CellId> for String {
    fn from(id: CellId) -> Self {
        id.0
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub coverage: Circle,
}

/// Cells indexed by id, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoveragePlan {
    cells: IndexMap<CellId, Cell>,
}

impl CoveragePlan {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a cell, handing it back if the id is already taken.
    pub fn insert(&mut self, cell: Cell) -> Result<(), Cell> {
        if self.cells.contains_key(&cell.id) {
            return Err(cell);
        }
        self.cells.insert(cell.id.clone(), cell);
        Ok(())
    }

    pub fn get(&self, id: &CellId) -> Option<&Cell> {
        self.cells.get(id)
    }

    pub fn contains(&self, id: &CellId) -> bool {
        self.cells.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationEvent {
    pub timestamp: Timestamp,
    pub cell_id: CellId,
}

impl LocationEvent {
    pub fn new(timestamp: Timestamp, cell_id: CellId) -> Self {
        Self { timestamp, cell_id }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpsFix {
    pub timestamp: Timestamp,
    pub position: GeoPoint,
}

/// Time-ordered sequence of location events. Equal timestamps keep the order
/// in which they were supplied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    events: Vec<LocationEvent>,
}

impl Trajectory {
    /// Stable-sorts `events` by timestamp.
    pub fn new(mut events: Vec<LocationEvent>) -> Self {
        events.sort_by_key(|e| e.timestamp);
        Self { events }
    }

    pub fn events(&self) -> &[LocationEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<LocationEvent> {
        self.events
    }
}

impl FromIterator<LocationEvent> for Trajectory {
    fn from_iter<I: IntoIterator<Item = LocationEvent>>(iter: I) -> Self {
        Trajectory::new(iter.into_iter().collect())
    }
}

/// Seconds from `a` to `b`, at microsecond resolution.
pub fn seconds_between(a: &Timestamp, b: &Timestamp) -> f64 {
    let delta = b.signed_duration_since(*a);
    match delta.num_microseconds() {
        Some(us) => us as f64 / 1e6,
        None => delta.num_milliseconds() as f64 / 1e3,
    }
}

pub fn parse_timestamp(value: &str) -> Result<Timestamp, RecordError> {
    DateTime::parse_from_rfc3339(value).map_err(|e| RecordError::Timestamp {
        value: value.to_string(),
        reason: e.to_string(),
    })
}

/// Canonical textual form: RFC 3339, `Z` for UTC, fractional seconds only
/// when present.
pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_f64(field: &'static str, value: &str) -> Result<f64, RecordError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| RecordError::Number {
            field,
            value: value.to_string(),
        })
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Iterates data records with their 1-based line numbers, checking the field
/// count of each (and of the header).
fn records<R: Read>(
    source: R,
    expected: usize,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord), LoadError>> {
    let mut rdr = reader(source);
    let header_error = match rdr.headers() {
        Ok(h) if h.is_empty() || h.len() == expected => None,
        Ok(h) => Some(LoadError::Record {
            line: 1,
            kind: RecordError::FieldCount {
                expected,
                found: h.len(),
            },
        }),
        Err(e) => Some(LoadError::Csv(e)),
    };
    let body = rdr.into_records().map(move |rec| {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != expected {
            return Err(LoadError::Record {
                line,
                kind: RecordError::FieldCount {
                    expected,
                    found: rec.len(),
                },
            });
        }
        Ok((line, rec))
    });
    header_error.map(Err).into_iter().chain(body)
}

fn at_line<T>(line: u64, r: Result<T, RecordError>) -> Result<T, LoadError> {
    r.map_err(|kind| LoadError::Record { line, kind })
}

pub fn load_coverage_plan<R: Read>(source: R) -> Result<CoveragePlan, LoadError> {
    let mut plan = CoveragePlan::new();
    let mut first_seen: HashMap<CellId, u64> = HashMap::new();
    for rec in records(source, PLAN_HEADER.len()) {
        let (line, rec) = rec?;
        let id = at_line(line, CellId::new(&rec[0]))?;
        if let Some(&first_line) = first_seen.get(&id) {
            return Err(LoadError::Record {
                line,
                kind: RecordError::DuplicateId {
                    id: id.to_string(),
                    first_line,
                },
            });
        }
        let lat = at_line(line, parse_f64("lat", &rec[1]))?;
        let lon = at_line(line, parse_f64("lon", &rec[2]))?;
        let radius = at_line(line, parse_f64("radius_m", &rec[3]))?;
        let center = at_line(line, GeoPoint::new(lat, lon).map_err(RecordError::from))?;
        let coverage = at_line(line, Circle::new(center, radius).map_err(RecordError::from))?;
        first_seen.insert(id.clone(), line);
        plan.insert(Cell { id, coverage })
            .expect("duplicate ids are rejected above");
    }
    Ok(plan)
}

pub fn load_events<R: Read>(source: R) -> Result<Trajectory, LoadError> {
    let mut events = Vec::new();
    for rec in records(source, EVENTS_HEADER.len()) {
        let (line, rec) = rec?;
        let timestamp = at_line(line, parse_timestamp(&rec[0]))?;
        let cell_id = at_line(line, CellId::new(&rec[1]))?;
        events.push(LocationEvent { timestamp, cell_id });
    }
    Ok(Trajectory::new(events))
}

pub fn load_gps<R: Read>(source: R) -> Result<Vec<GpsFix>, LoadError> {
    let mut fixes = Vec::new();
    for rec in records(source, GPS_HEADER.len()) {
        let (line, rec) = rec?;
        let timestamp = at_line(line, parse_timestamp(&rec[0]))?;
        let lat = at_line(line, parse_f64("lat", &rec[1]))?;
        let lon = at_line(line, parse_f64("lon", &rec[2]))?;
        let position = at_line(line, GeoPoint::new(lat, lon).map_err(RecordError::from))?;
        fixes.push(GpsFix {
            timestamp,
            position,
        });
    }
    fixes.sort_by_key(|f| f.timestamp);
    Ok(fixes)
}

pub fn write_coverage_plan<W: Write>(plan: &CoveragePlan, mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "{}", PLAN_HEADER.join(","))?;
    for cell in plan.iter() {
        let c = cell.coverage.center();
        writeln!(
            sink,
            "{},{},{},{}",
            cell.id,
            c.lat(),
            c.lon(),
            cell.coverage.radius()
        )?;
    }
    Ok(())
}

pub fn write_events<'a, W, I>(events: I, mut sink: W) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a LocationEvent>,
{
    writeln!(sink, "{}", EVENTS_HEADER.join(","))?;
    for e in events {
        writeln!(sink, "{},{}", format_timestamp(&e.timestamp), e.cell_id)?;
    }
    Ok(())
}

pub fn write_gps<W: Write>(fixes: &[GpsFix], mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "{}", GPS_HEADER.join(","))?;
    for f in fixes {
        writeln!(
            sink,
            "{},{},{}",
            format_timestamp(&f.timestamp),
            f.position.lat(),
            f.position.lon()
        )?;
    }
    Ok(())
}
