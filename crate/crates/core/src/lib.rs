//! Filtering of ping-pong handovers and hops out of cell-event trajectories.
//!
//! - [`geo`]: haversine distance and circle overlap areas
//! - [`model`]: coverage plans, events, GPS fixes and their CSV formats
//! - [`filter`]: the eight-anchor accept/discard pipeline
//! - [`eval`]: GPS ground truth and cell-level precision/recall
//! - [`synth`]: seeded scenarios with labelled noise
//! - [`report`], [`geojson`], [`cli`]: output formats and the command line

pub mod cli;
pub mod eval;
pub mod filter;
pub mod geo;
pub mod geojson;
pub mod model;
pub mod report;
pub mod synth;

pub use filter::{filter_trajectory, Decision, FilterConfig, FilterReport, Reason, Stage, Verdict};
pub use geo::{Circle, GeoPoint};
pub use model::{CellId, CoveragePlan, GpsFix, LocationEvent, Trajectory};
