//! `cdr-filter` subcommands: `filter`, `evaluate`, `synth` and
//! `export-geojson`.
//!
//! Each command writes its outputs into `--out-dir` together with a
//! `manifest.json` that echoes the inputs, the effective configuration and
//! the list of files written. Exit codes: 0 success, 1 input error, 2 usage
//! or configuration error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::eval::{self, GroundTruthConfig};
use crate::filter::{filter_trajectory, FilterConfig};
use crate::geo::GeoPoint;
use crate::geojson;
use crate::model::{self, format_timestamp, CoveragePlan, GpsFix, Trajectory};
use crate::report::{self, EvaluationContext};
use crate::synth::{self, ScenarioConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "cdr-filter",
    version,
    about = "Remove ping-pong handovers and hops from cell-event trajectories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the anchor filter over an event stream
    Filter(FilterArgs),
    /// Score filtered events against GPS ground truth
    Evaluate(EvaluateArgs),
    /// Generate a synthetic scenario with labelled noise
    Synth(SynthArgs),
    /// Write GPS fixes and visited cells as GeoJSON
    ExportGeojson(ExportArgs),
}

#[derive(Debug, Args)]
pub struct Thresholds {
    #[arg(long, default_value_t = 600.0)]
    pub time_threshold_s: f64,
    #[arg(long, default_value_t = 0.20)]
    pub distance_threshold: f64,
    #[arg(long, default_value_t = 90.0)]
    pub speed_threshold_kmh: f64,
    #[arg(long, default_value_t = 0.50)]
    pub similarity_threshold: f64,
    #[arg(long, default_value_t = 0.80)]
    pub covered_threshold: f64,
}

impl Thresholds {
    pub fn to_config(&self) -> FilterConfig {
        FilterConfig {
            time_threshold_s: self.time_threshold_s,
            distance_threshold: self.distance_threshold,
            speed_threshold_mps: self.speed_threshold_kmh / 3.6,
            similarity_threshold: self.similarity_threshold,
            covered_threshold: self.covered_threshold,
        }
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub plan: PathBuf,
    /// Original, unfiltered events
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub filtered: PathBuf,
    #[arg(long)]
    pub gps: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub radius_factor: f64,
    #[arg(long, default_value_t = 300.0)]
    pub max_association_gap_s: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Semicolon-separated `lat,lon` pairs; defaults to a straight 10 km path
    #[arg(long, value_parser = parse_waypoints)]
    pub waypoints: Option<Waypoints>,
    #[arg(long)]
    pub speed_mps: Option<f64>,
    #[arg(long)]
    pub gps_interval_s: Option<f64>,
    #[arg(long)]
    pub event_interval_s: Option<f64>,
    #[arg(long)]
    pub cell_spacing_m: Option<f64>,
    #[arg(long)]
    pub radius_min_m: Option<f64>,
    #[arg(long)]
    pub radius_max_m: Option<f64>,
    #[arg(long)]
    pub pingpong_rate: Option<f64>,
    #[arg(long)]
    pub hop_rate: Option<f64>,
    #[arg(long)]
    pub hop_min_distance_m: Option<f64>,
    /// RFC 3339 start time of the scenario
    #[arg(long, value_parser = parse_start)]
    pub start: Option<model::Timestamp>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Waypoints(pub Vec<GeoPoint>);

fn parse_waypoints(s: &str) -> Result<Waypoints, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (lat, lon) = pair
                .split_once(',')
                .ok_or_else(|| format!("waypoint {pair:?} is not `lat,lon`"))?;
            let lat: f64 = lat
                .trim()
                .parse()
                .map_err(|_| format!("bad latitude {lat:?}"))?;
            let lon: f64 = lon
                .trim()
                .parse()
                .map_err(|_| format!("bad longitude {lon:?}"))?;
            GeoPoint::new(lat, lon).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Waypoints)
}

fn parse_start(s: &str) -> Result<model::Timestamp, String> {
    model::parse_timestamp(s).map_err(|e| e.to_string())
}

impl SynthArgs {
    pub fn to_config(&self) -> ScenarioConfig {
        let d = ScenarioConfig::default();
        ScenarioConfig {
            seed: self.seed,
            waypoints: self.waypoints.clone().map(|w| w.0).unwrap_or(d.waypoints),
            agent_speed_mps: self.speed_mps.unwrap_or(d.agent_speed_mps),
            gps_interval_s: self.gps_interval_s.unwrap_or(d.gps_interval_s),
            event_interval_s: self.event_interval_s.unwrap_or(d.event_interval_s),
            cell_spacing_m: self.cell_spacing_m.unwrap_or(d.cell_spacing_m),
            cell_radius_min_m: self.radius_min_m.unwrap_or(d.cell_radius_min_m),
            cell_radius_max_m: self.radius_max_m.unwrap_or(d.cell_radius_max_m),
            pingpong_rate: self.pingpong_rate.unwrap_or(d.pingpong_rate),
            hop_rate: self.hop_rate.unwrap_or(d.hop_rate),
            hop_min_distance_m: self.hop_min_distance_m.unwrap_or(d.hop_min_distance_m),
            start: self.start.unwrap_or(d.start),
        }
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub gps: PathBuf,
    #[arg(long)]
    pub filtered: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => 1,
            CliError::Usage(_) => 2,
        }
    }
}

fn input_err(path: &Path, e: impl ToString) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| input_err(path, e))
}

fn read_plan(path: &Path) -> Result<CoveragePlan, CliError> {
    model::load_coverage_plan(open(path)?).map_err(|e| input_err(path, e))
}

fn read_events(path: &Path) -> Result<Trajectory, CliError> {
    model::load_events(open(path)?).map_err(|e| input_err(path, e))
}

fn read_gps(path: &Path) -> Result<Vec<GpsFix>, CliError> {
    model::load_gps(open(path)?).map_err(|e| input_err(path, e))
}

/// Run metadata written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Value,
    pub config: Value,
    pub outputs: Vec<String>,
}

/// Collects output files for one command run.
struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| input_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| input_err(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| input_err(&path, e))?;
        self.written.push(path.display().to_string());
        Ok(())
    }

    fn finish(
        mut self,
        command: &'static str,
        inputs: Value,
        config: Value,
    ) -> Result<Vec<String>, CliError> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            config,
            outputs: self.written.clone(),
        };
        self.write(MANIFEST_FILE, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)
        })?;
        Ok(self.written)
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Human-readable summary printed on success.
pub struct Outcome {
    pub summary: String,
    pub outputs: Vec<String>,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Filter(a) => cmd_filter(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::ExportGeojson(a) => cmd_export_geojson(&a),
    }
}

pub fn cmd_filter(args: &FilterArgs) -> Result<Outcome, CliError> {
    let cfg = args.thresholds.to_config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let plan = read_plan(&args.plan)?;
    let events = read_events(&args.events)?;

    let result = filter_trajectory(&events, &plan, &cfg);
    let original = report::trajectory_stats(&events);
    let filtered = report::trajectory_stats(&result.filtered);
    let text = report::filter_text(&original, &filtered, &result.tally);
    let records = report::filter_records(&original, &filtered, &result.tally);

    let mut out = OutDir::create(&args.out_dir)?;
    out.write("filtered_events.csv", |w| {
        model::write_events(result.filtered.events(), w)
    })?;
    out.write("decisions.csv", |w| {
        writeln!(w, "index,timestamp,cell_id,stage,verdict,reason")?;
        for d in &result.decisions {
            let verdict = if d.is_accepted() {
                "accepted"
            } else {
                "discarded"
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                d.index,
                format_timestamp(&d.event.timestamp),
                d.event.cell_id,
                d.stage,
                verdict,
                d.reason
            )?;
        }
        Ok(())
    })?;
    out.write("filter_report.txt", |w| w.write_all(text.as_bytes()))?;
    out.write("filter_report.records", |w| {
        w.write_all(records.render().as_bytes())
    })?;

    let config = json!({
        "time_threshold_s": cfg.time_threshold_s,
        "distance_threshold": cfg.distance_threshold,
        "speed_threshold_kmh": args.thresholds.speed_threshold_kmh,
        "speed_threshold_mps": cfg.speed_threshold_mps,
        "similarity_threshold": cfg.similarity_threshold,
        "covered_threshold": cfg.covered_threshold,
    });
    let inputs = json!({ "plan": path_str(&args.plan), "events": path_str(&args.events) });
    let outputs = out.finish("filter", inputs, config)?;
    Ok(Outcome {
        summary: text,
        outputs,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<Outcome, CliError> {
    let cfg = GroundTruthConfig {
        radius_factor: args.radius_factor,
        max_association_gap_s: args.max_association_gap_s,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let plan = read_plan(&args.plan)?;
    let events = read_events(&args.events)?;
    let filtered = read_events(&args.filtered)?;
    let gps = read_gps(&args.gps)?;

    let associations = eval::associate(&events, &gps, &cfg);
    let profile = eval::distance_profile(&associations, &plan);
    let truth = eval::build_ground_truth(associations, &plan, &cfg);
    let result = eval::evaluate(&truth.cells, &eval::unique_cells(&filtered));
    let ctx = EvaluationContext {
        radius_factor: cfg.radius_factor,
        truth_events: truth.event_count(),
        filter_events: filtered.len(),
    };
    let text = report::evaluation_text(&ctx, &result);
    let records = report::evaluation_records(&ctx, &result);

    let mut out = OutDir::create(&args.out_dir)?;
    out.write("evaluation_report.txt", |w| w.write_all(text.as_bytes()))?;
    out.write("evaluation_report.records", |w| {
        w.write_all(records.render().as_bytes())
    })?;
    out.write("distance_profile.csv", |w| {
        writeln!(w, "timestamp,cell_id,centroid_distance_m,radius_m")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &profile {
            writeln!(
                w,
                "{},{},{},{}",
                format_timestamp(&row.event.timestamp),
                row.event.cell_id,
                opt(row.centroid_distance),
                opt(row.radius)
            )?;
        }
        Ok(())
    })?;

    let inputs = json!({
        "plan": path_str(&args.plan),
        "events": path_str(&args.events),
        "filtered": path_str(&args.filtered),
        "gps": path_str(&args.gps),
    });
    let config = serde_json::to_value(cfg).expect("plain struct");
    let outputs = out.finish("evaluate", inputs, config)?;
    Ok(Outcome {
        summary: text,
        outputs,
    })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Outcome, CliError> {
    let cfg = args.to_config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let scenario = synth::generate(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut out = OutDir::create(&args.out_dir)?;
    out.write("plan.csv", |w| {
        model::write_coverage_plan(&scenario.plan, w)
    })?;
    out.write("events.csv", |w| {
        model::write_events(scenario.events.events(), w)
    })?;
    out.write("gps.csv", |w| model::write_gps(&scenario.gps, w))?;
    out.write("labels.csv", |w| {
        synth::write_labels(&scenario.events, &scenario.labels, w)
    })?;

    let summary = format!(
        "cells={} events={} gps={} clean={} pingpong={} hop={}\n",
        scenario.plan.len(),
        scenario.events.len(),
        scenario.gps.len(),
        scenario.count(synth::Label::Clean),
        scenario.count(synth::Label::Pingpong),
        scenario.count(synth::Label::Hop),
    );
    let config = serde_json::to_value(&cfg).expect("plain struct");
    let outputs = out.finish("synth", json!({}), config)?;
    Ok(Outcome { summary, outputs })
}

pub fn cmd_export_geojson(args: &ExportArgs) -> Result<Outcome, CliError> {
    let plan = read_plan(&args.plan)?;
    let events = read_events(&args.events)?;
    let gps = read_gps(&args.gps)?;
    let filtered = read_events(&args.filtered)?;

    let doc = geojson::export(&plan, &events, &gps, &filtered);
    let features = doc["features"].as_array().map_or(0, Vec::len);

    let mut out = OutDir::create(&args.out_dir)?;
    out.write("map.geojson", |w| {
        serde_json::to_writer(&mut *w, &doc)?;
        writeln!(w)
    })?;
    let inputs = json!({
        "plan": path_str(&args.plan),
        "events": path_str(&args.events),
        "gps": path_str(&args.gps),
        "filtered": path_str(&args.filtered),
    });
    let config = json!({ "circle_segments": geojson::CIRCLE_SEGMENTS });
    let outputs = out.finish("export-geojson", inputs, config)?;
    Ok(Outcome {
        summary: format!("features={features}\n"),
        outputs,
    })
}
