//! The mapping run: inputs in, map, trajectory, metrics and summary out.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use forestmap_core::mapper::{Clock, MapperError, MapperState, NullClock, ScanStatus};
use forestmap_core::penalties::{estimate_heading_offset, interpolate_attitude, interpolate_fix, PenaltyError};
use forestmap_core::registration::PointCloud;
use forestmap_core::{RigidTransform, Vec3};
use thiserror::Error;

use crate::config::{render_scenario, ConfigError, InputSource, RunConfig};
use crate::inputs::{
    load_inputs, read_trajectory_csv, write_scan_index, write_trajectory_to, write_world_to, InputError, Inputs,
};
use crate::metrics::{crispness, loop_closure_error, nearest_neighbor_spacing, write_metrics_to, write_plot_data_to, RunMetrics};
use crate::output::write_atomic;
use crate::ply::{read_ply, write_ply, PlyError};
use crate::sensors::{write_gnss_csv, write_imu_csv};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Input(#[from] InputError),
    #[error("mapper: {0}")]
    Mapper(#[from] MapperError),
    #[error("heading calibration: {0}")]
    Calibration(PenaltyError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Ply { path: PathBuf, source: PlyError },
}

impl PipelineError {
    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn write_err(path: &Path) -> impl Fn(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Write {
        path: path.to_path_buf(),
        source,
    }
}

/// Milliseconds since construction.
#[derive(Clone, Copy, Debug)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        WallClock::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// Where the magnetometer offset came from.
#[derive(Clone, Debug, PartialEq)]
pub enum HeadingSource {
    Configured,
    Calibrated,
    /// Calibration failed; zero offset used.
    Fallback(String),
}

/// Magnetometer offset from the initial straight stretch of the track.
pub fn calibrate_heading(inputs: &Inputs, min_distance: f64) -> Result<f64, PenaltyError> {
    let headings: Vec<(f64, f64)> = inputs.attitudes.iter().map(|a| (a.time, a.raw_magnetic_heading)).collect();
    estimate_heading_offset(&inputs.fixes, &headings, min_distance)
}

/// A finished mapping run.
#[derive(Clone, Debug)]
pub struct MappingRun {
    pub state: MapperState,
    pub heading_offset: f64,
    pub heading_source: HeadingSource,
}

impl MappingRun {
    /// ENU position of the map frame origin.
    pub fn anchor(&self) -> Vec3 {
        self.state.anchor().unwrap_or(Vec3::ZERO)
    }

    /// Scan poses in ENU.
    pub fn enu_trajectory(&self) -> Vec<(f64, RigidTransform)> {
        let shift = RigidTransform::from_translation(self.anchor());
        self.state.trajectory().iter().map(|(t, p)| (*t, shift * *p)).collect()
    }

    /// The map in ENU.
    pub fn enu_map(&self) -> PointCloud {
        self.state.map().transformed(&RigidTransform::from_translation(self.anchor()))
    }
}

/// Runs the mapper over `inputs` with an explicit clock.
pub fn run_mapping_with<C: Clock>(cfg: &RunConfig, inputs: &Inputs, clock: &C) -> Result<MappingRun, PipelineError> {
    let (heading_offset, heading_source) = match cfg.heading_offset {
        Some(h) => (h, HeadingSource::Configured),
        None => match calibrate_heading(inputs, cfg.calibration_distance) {
            Ok(h) => (h, HeadingSource::Calibrated),
            Err(e) => {
                log::warn!("heading calibration failed ({e}); using a zero magnetometer offset");
                (0.0, HeadingSource::Fallback(e.to_string()))
            }
        },
    };
    let mut state = MapperState::new(cfg.effective_mapper(), heading_offset)?;
    for (t, scan) in &inputs.scans {
        let fix = interpolate_fix(&inputs.fixes, *t);
        let att = interpolate_attitude(&inputs.attitudes, *t);
        state.process_scan_timed(*t, scan, fix.as_ref(), att.as_ref(), clock);
    }
    for e in state.events() {
        log::info!("{e}");
    }
    Ok(MappingRun {
        state,
        heading_offset,
        heading_source,
    })
}

/// Runs the mapper, timing with the wall clock only when `cfg.timing`.
pub fn run_mapping(cfg: &RunConfig, inputs: &Inputs) -> Result<MappingRun, PipelineError> {
    if cfg.timing {
        run_mapping_with(cfg, inputs, &WallClock::new())
    } else {
        run_mapping_with(cfg, inputs, &NullClock)
    }
}

/// Accuracy metrics of an ENU trajectory and map against whatever ground
/// truth `inputs` carries; `None` without any.
pub fn evaluate(trajectory: &[(f64, RigidTransform)], map: &[Vec3], inputs: &Inputs) -> Option<RunMetrics> {
    if inputs.truth.is_none() && inputs.world.is_none() {
        return None;
    }
    Some(RunMetrics {
        loop_closure_error_m: inputs.truth.as_deref().and_then(|g| loop_closure_error(trajectory, g)),
        crispness_m: inputs.world.as_ref().and_then(|w| crispness(map, w)),
    })
}

/// Key facts of a run, written as `key = value` lines.
#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub lines: Vec<(String, String)>,
}

impl RunSummary {
    fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn summarize(cfg: &RunConfig, inputs: &Inputs, run: &MappingRun, metrics: Option<&RunMetrics>, map: &[Vec3]) -> RunSummary {
    let mut s = RunSummary::default();
    let stats = run.state.stats();
    let count = |status: ScanStatus| stats.iter().filter(|d| d.status == status).count();
    s.push("mode", cfg.mode.as_str());
    s.push("seed", cfg.seed);
    s.push("scans", stats.len());
    s.push("registered", count(ScanStatus::Registered));
    s.push("bootstrap", count(ScanStatus::Bootstrap));
    s.push("prior_only", count(ScanStatus::PriorOnly));
    s.push("skipped", count(ScanStatus::Skipped));
    s.push("map_points", run.state.map().len());
    let anchor = run.anchor();
    s.push("anchor_e", anchor.x);
    s.push("anchor_n", anchor.y);
    s.push("anchor_u", anchor.z);
    let source = match &run.heading_source {
        HeadingSource::Configured => "configured".to_string(),
        HeadingSource::Calibrated => "calibrated".to_string(),
        HeadingSource::Fallback(why) => format!("fallback ({why})"),
    };
    s.push("heading_offset_source", source);
    s.push("heading_offset_deg", run.heading_offset.to_degrees());
    s.push("heading_offset_final_deg", run.state.heading_offset().to_degrees());
    s.push("sensor_warnings", inputs.warnings);
    s.push("events", run.state.events().len());
    if let Some(m) = metrics {
        if let Some(v) = m.loop_closure_error_m {
            s.push("loop_closure_error_m", v);
        }
        if let Some(v) = m.crispness_m {
            s.push("crispness_m", v);
        }
    } else if let Some(v) = nearest_neighbor_spacing(map) {
        s.push("nn_spacing_m", v);
    }
    s
}

pub const MAP_FILE: &str = "map.ply";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PLOT_FILE: &str = "reference_size.dat";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const EVENTS_FILE: &str = "events.csv";

/// Loads inputs, maps, and writes map, trajectory, metrics, plot data,
/// events and summary into `cfg.out`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let inputs = load_inputs(cfg)?;
    let run = run_mapping(cfg, &inputs)?;
    write_run(cfg, &inputs, &run)
}

/// Writes the outputs of a finished run.
pub fn write_run(cfg: &RunConfig, inputs: &Inputs, run: &MappingRun) -> Result<RunSummary, PipelineError> {
    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(write_err(out))?;
    let trajectory = run.enu_trajectory();
    let map = run.enu_map();
    let metrics = evaluate(&trajectory, map.points(), inputs);
    let stats = run.state.stats();

    let path = out.join(MAP_FILE);
    write_ply(&map, &path, cfg.ply_ascii).map_err(|source| PipelineError::Ply { path, source })?;

    let path = out.join(TRAJECTORY_FILE);
    let status: Vec<&str> = stats.iter().map(|d| d.status.as_str()).collect();
    write_atomic(&path, |w| write_trajectory_to(&trajectory, Some(&status), w)).map_err(write_err(&path))?;

    let path = out.join(METRICS_FILE);
    write_atomic(&path, |w| write_metrics_to(stats, metrics.as_ref(), w)).map_err(write_err(&path))?;

    let path = out.join(PLOT_FILE);
    write_atomic(&path, |w| write_plot_data_to(stats, w)).map_err(write_err(&path))?;

    let path = out.join(EVENTS_FILE);
    write_atomic(&path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["scan_id", "time_s", "event"])?;
        for e in run.state.events() {
            csv.write_record([e.scan_id.to_string(), e.time.to_string(), e.kind.to_string()])?;
        }
        csv.flush()
    })
    .map_err(write_err(&path))?;

    let summary = summarize(cfg, inputs, run, metrics.as_ref(), map.points());
    let path = out.join(SUMMARY_FILE);
    write_atomic(&path, |w| w.write_all(summary.render().as_bytes())).map_err(write_err(&path))?;
    Ok(summary)
}

/// Re-evaluates the outputs in `dir` against the ground truth of `cfg`.
pub fn evaluate_outputs(cfg: &RunConfig, dir: &Path) -> Result<RunSummary, PipelineError> {
    let map_path = dir.join(MAP_FILE);
    let map = read_ply(&map_path).map_err(|source| PipelineError::Ply { path: map_path, source })?;
    let trajectory = read_trajectory_csv(&dir.join(TRAJECTORY_FILE))?;
    let inputs = load_inputs(cfg)?;
    let mut s = RunSummary::default();
    s.push("map_points", map.len());
    s.push("scans", trajectory.len());
    match evaluate(&trajectory, map.points(), &inputs) {
        Some(m) => {
            if let Some(v) = m.loop_closure_error_m {
                s.push("loop_closure_error_m", v);
            }
            if let Some(v) = m.crispness_m {
                s.push("crispness_m", v);
            }
        }
        None => {
            if let Some(v) = nearest_neighbor_spacing(map.points()) {
                s.push("nn_spacing_m", v);
            }
        }
    }
    let path = dir.join("eval.txt");
    write_atomic(&path, |w| w.write_all(s.render().as_bytes())).map_err(write_err(&path))?;
    Ok(s)
}

/// Generates the synthetic scenario of `cfg` and writes it as recorded
/// inputs into `dir`, with a `run.cfg` that maps them.
pub fn write_synthetic(cfg: &RunConfig, dir: &Path) -> Result<RunSummary, PipelineError> {
    let InputSource::Synthetic(scenario) = &cfg.input else {
        return Err(ConfigError::Invalid("synth needs a config with 'scenario'".to_string()).into());
    };
    let inputs = load_inputs(cfg)?;
    let scan_dir = dir.join("scans");
    std::fs::create_dir_all(&scan_dir).map_err(write_err(&scan_dir))?;

    let mut index = Vec::with_capacity(inputs.scans.len());
    for (i, (t, scan)) in inputs.scans.iter().enumerate() {
        let name = format!("scan_{i:06}.ply");
        let path = scan_dir.join(&name);
        write_ply(scan, &path, false).map_err(|source| PipelineError::Ply { path, source })?;
        index.push((*t, format!("scans/{name}")));
    }
    let path = dir.join("scans.csv");
    write_scan_index(&index, &path).map_err(write_err(&path))?;
    let path = dir.join("gnss.csv");
    write_gnss_csv(&inputs.fixes, &path).map_err(write_err(&path))?;
    let path = dir.join("imu.csv");
    write_imu_csv(&inputs.attitudes, &path).map_err(write_err(&path))?;
    let truth = inputs.truth.as_deref().unwrap_or_default();
    let path = dir.join("truth.csv");
    write_atomic(&path, |w| write_trajectory_to(truth, None, w)).map_err(write_err(&path))?;
    if let Some(world) = &inputs.world {
        let path = dir.join("world.csv");
        write_atomic(&path, |w| write_world_to(world, w)).map_err(write_err(&path))?;
    }

    let mut text = String::from("# generated from the scenario below\n");
    for line in render_scenario(scenario).lines() {
        let _ = writeln!(text, "#   {line}");
    }
    text.push_str("scans = scans.csv\ngnss = gnss.csv\nimu = imu.csv\ntruth = truth.csv\nworld = world.csv\n");
    text.push_str(&cfg.render_mapper_keys());
    let path = dir.join("run.cfg");
    write_atomic(&path, |w| w.write_all(text.as_bytes())).map_err(write_err(&path))?;

    let mut s = RunSummary::default();
    s.push("scans", inputs.scans.len());
    s.push("fixes", inputs.fixes.len());
    s.push("attitudes", inputs.attitudes.len());
    s.push("trees", inputs.world.as_ref().map_or(0, |w| w.trees().len()));
    Ok(s)
}
