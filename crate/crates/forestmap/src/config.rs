//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Keys may appear once. Paths
//! are resolved relative to the directory of the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use forestmap_core::mapper::{MapperConfig, PenaltyMode};
use forestmap_core::registration::OutlierFilter;
use forestmap_core::synth::{Scenario, TrajectoryKind};
use forestmap_core::SymMat3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' already set on line {first}")]
    DuplicateKey { line: usize, key: String, first: usize },
    #[error("line {line}: invalid value '{value}' for '{key}' (expected {expected})")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("line {line}: '{key}' refers to missing file {path}")]
    MissingFile { line: usize, key: String, path: PathBuf },
    #[error("{0}")]
    Invalid(String),
}

/// One `key = value` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits config text into entries, rejecting malformed and repeated keys.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                reason: format!("expected 'key = value', got '{content}'"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                line,
                reason: format!("invalid key '{key}'"),
            });
        }
        if let Some(first) = entries.iter().find(|e| e.key == key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
                first: first.line,
            });
        }
        entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(entries)
}

/// The three mapping configurations compared in the evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// No ICP; scans are inserted at the GNSS/IMU prior.
    Prior,
    /// ICP without penalties.
    Baseline,
    /// ICP with penalties (`penalty_mode`, three-point by default).
    Penalty,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "prior" => Some(Mode::Prior),
            "baseline" => Some(Mode::Baseline),
            "penalty" => Some(Mode::Penalty),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Prior => "prior",
            Mode::Baseline => "baseline",
            Mode::Penalty => "penalty",
        }
    }
}

/// Files of a recorded (or previously synthesized) run.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordedInputs {
    /// CSV with columns `time, file`; files are PLY scans in the sensor frame.
    pub scans: PathBuf,
    pub gnss: PathBuf,
    pub imu: PathBuf,
    /// Ground-truth trajectory CSV, optional.
    pub truth: Option<PathBuf>,
    /// Ground-truth world CSV, optional.
    pub world: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    Synthetic(Box<Scenario>),
    Recorded(RecordedInputs),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub input: InputSource,
    /// Mapper settings; `penalty_mode` is the one used in `Mode::Penalty`.
    pub mapper: MapperConfig,
    pub mode: Mode,
    pub seed: u64,
    pub out: PathBuf,
    /// Straight-line distance used to calibrate the magnetometer offset.
    pub calibration_distance: f64,
    /// A known offset (radians) skips calibration.
    pub heading_offset: Option<f64>,
    /// Roll and pitch standard deviation assumed for recorded IMU rows.
    pub imu_attitude_sigma: f64,
    pub ply_ascii: bool,
    /// Record wall-clock registration and insertion times. Off keeps
    /// outputs byte-identical across runs.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: InputSource::Synthetic(Box::new(Scenario::new(TrajectoryKind::Straight, 20.0, 1.0))),
            mapper: MapperConfig::default(),
            mode: Mode::Penalty,
            seed: 0,
            out: PathBuf::from("out"),
            calibration_distance: forestmap_core::penalties::DEFAULT_CALIBRATION_DISTANCE,
            heading_offset: None,
            imu_attitude_sigma: 0.2f64.to_radians(),
            ply_ascii: false,
            timing: false,
        }
    }
}

struct Value<'a>(&'a Entry);

impl Value<'_> {
    fn invalid(&self, expected: &'static str) -> ConfigError {
        ConfigError::InvalidValue {
            line: self.0.line,
            key: self.0.key.clone(),
            value: self.0.value.clone(),
            expected,
        }
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        self.0
            .value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.invalid("a finite number"))
    }

    fn positive(&self) -> Result<f64, ConfigError> {
        let v = self.f64()?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid("a positive number"))
        }
    }

    fn non_negative(&self) -> Result<f64, ConfigError> {
        let v = self.f64()?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.invalid("a non-negative number"))
        }
    }

    fn degrees(&self) -> Result<f64, ConfigError> {
        Ok(self.f64()?.to_radians())
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        self.0.value.parse().map_err(|_| self.invalid("a non-negative integer"))
    }

    fn u64(&self) -> Result<u64, ConfigError> {
        self.0.value.parse().map_err(|_| self.invalid("a non-negative integer"))
    }

    fn bool(&self) -> Result<bool, ConfigError> {
        match self.0.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.invalid("true or false")),
        }
    }
}

#[derive(Default)]
struct Recorded {
    scans: Option<PathBuf>,
    gnss: Option<PathBuf>,
    imu: Option<PathBuf>,
    truth: Option<PathBuf>,
    world: Option<PathBuf>,
}

/// Horizontal and vertical standard deviations of a diagonal GNSS covariance.
fn sigmas(c: &SymMat3) -> (f64, f64) {
    (c.xx.sqrt(), c.zz.sqrt())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        RunConfig::parse(&text, base)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
        let entries = parse_entries(text)?;
        let mut cfg = RunConfig::default();
        let mut scenario: Option<Scenario> = None;
        let mut synthetic_keys: Vec<&Entry> = Vec::new();
        let mut recorded = Recorded::default();
        let mut recorded_line = None;

        // the preset is the base the other mapper keys modify, wherever it appears
        if let Some(e) = entries.iter().find(|e| e.key == "preset") {
            cfg.mapper = match e.value.as_str() {
                "default" => MapperConfig::default(),
                "long_run" => MapperConfig::long_run(),
                _ => return Err(Value(e).invalid("default or long_run")),
            };
        }
        for e in &entries {
            let v = Value(e);
            let path = || base.join(&e.value);
            let m = &mut cfg.mapper;
            match e.key.as_str() {
                "scenario" => {
                    let kind = TrajectoryKind::parse(&e.value).ok_or_else(|| v.invalid("straight, loop or rough"))?;
                    scenario = Some(Scenario::new(kind, 20.0, 1.0));
                }
                "scans" | "gnss" | "imu" | "truth" | "world" => {
                    recorded_line.get_or_insert(e.line);
                    let p = path();
                    if !p.exists() {
                        return Err(ConfigError::MissingFile {
                            line: e.line,
                            key: e.key.clone(),
                            path: p,
                        });
                    }
                    let slot = match e.key.as_str() {
                        "scans" => &mut recorded.scans,
                        "gnss" => &mut recorded.gnss,
                        "imu" => &mut recorded.imu,
                        "truth" => &mut recorded.truth,
                        _ => &mut recorded.world,
                    };
                    *slot = Some(p);
                }
                "preset" => {}
                "mode" => cfg.mode = Mode::parse(&e.value).ok_or_else(|| v.invalid("prior, baseline or penalty"))?,
                "seed" => cfg.seed = v.u64()?,
                "out" => cfg.out = path(),
                "calibration_distance" => cfg.calibration_distance = v.positive()?,
                "heading_offset_deg" => cfg.heading_offset = Some(v.degrees()?),
                "imu_attitude_sigma_deg" => cfg.imu_attitude_sigma = v.degrees()?.max(0.0),
                "ply_ascii" => cfg.ply_ascii = v.bool()?,
                "timing" => cfg.timing = v.bool()?,
                "epsilon" => m.epsilon = v.positive()?,
                "r_max" => {
                    m.r_max = if e.value == "none" { None } else { Some(v.positive()?) };
                }
                "penalty_mode" => {
                    m.penalty_mode =
                        PenaltyMode::parse(&e.value).ok_or_else(|| v.invalid("none, gnss_only or three_point"))?
                }
                "normal_k" => m.normal_k = v.usize()?,
                "arm_length" => m.arm_length = v.positive()?,
                "aux_cov_scale" => m.aux_cov_scale = v.positive()?,
                "course_speed_threshold" => m.course_speed_threshold = v.non_negative()?,
                "course_baseline" => m.course_baseline = v.positive()?,
                "icp_max_iterations" => m.icp.max_iterations = v.usize()?,
                "icp_translation_epsilon" => m.icp.translation_epsilon = v.positive()?,
                "icp_rotation_epsilon" => m.icp.rotation_epsilon = v.positive()?,
                "sensor_sigma" => {
                    let s = v.positive()?;
                    m.icp.scale_s = 1.0 / (s * s);
                }
                "outlier_filter" => {
                    m.icp.outlier_filter = match e.value.split_once(':') {
                        Some(("trimmed", r)) => OutlierFilter::Trimmed {
                            ratio: r.trim().parse().map_err(|_| v.invalid("trimmed:<ratio>"))?,
                        },
                        Some(("cauchy", s)) => OutlierFilter::Cauchy {
                            scale: s.trim().parse().map_err(|_| v.invalid("cauchy:<scale>"))?,
                        },
                        None if e.value == "none" => OutlierFilter::None,
                        _ => return Err(v.invalid("trimmed:<ratio>, cauchy:<scale> or none")),
                    }
                }
                _ => synthetic_keys.push(e),
            }
        }

        if let Some(mut sc) = scenario {
            if let Some(line) = recorded_line {
                return Err(ConfigError::Syntax {
                    line,
                    reason: "recorded input files cannot be combined with 'scenario'".to_string(),
                });
            }
            for e in synthetic_keys {
                apply_scenario_key(&mut sc, e)?;
            }
            sc.seed = cfg.seed;
            cfg.input = InputSource::Synthetic(Box::new(sc));
        } else {
            if let Some(e) = synthetic_keys.first() {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    key: e.key.clone(),
                });
            }
            let (Some(scans), Some(gnss), Some(imu)) = (recorded.scans, recorded.gnss, recorded.imu) else {
                return Err(ConfigError::Invalid(
                    "config needs either 'scenario' or all of 'scans', 'gnss' and 'imu'".to_string(),
                ));
            };
            cfg.input = InputSource::Recorded(RecordedInputs {
                scans,
                gnss,
                imu,
                truth: recorded.truth,
                world: recorded.world,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets the seed, also for a synthetic scenario.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let InputSource::Synthetic(sc) = &mut self.input {
            sc.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let InputSource::Synthetic(sc) = &self.input {
            sc.validate().map_err(|e| ConfigError::Invalid(format!("scenario: {e}")))?;
        }
        self.mapper
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("mapper: {e}")))
    }

    /// Mapper settings for the selected mode.
    pub fn effective_mapper(&self) -> MapperConfig {
        let mut m = self.mapper;
        match self.mode {
            Mode::Prior => {
                m.register = false;
                m.penalty_mode = PenaltyMode::None;
            }
            Mode::Baseline => m.penalty_mode = PenaltyMode::None,
            Mode::Penalty => {}
        }
        m
    }

    /// Mapper and run keys as config text, for configs written next to
    /// synthesized inputs.
    pub fn render_mapper_keys(&self) -> String {
        let m = &self.mapper;
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", self.mode.as_str());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "calibration_distance = {}", self.calibration_distance);
        if let Some(h) = self.heading_offset {
            let _ = writeln!(s, "heading_offset_deg = {}", h.to_degrees());
        }
        let _ = writeln!(s, "imu_attitude_sigma_deg = {}", self.imu_attitude_sigma.to_degrees());
        let _ = writeln!(s, "epsilon = {}", m.epsilon);
        match m.r_max {
            Some(r) => {
                let _ = writeln!(s, "r_max = {r}");
            }
            None => s.push_str("r_max = none\n"),
        }
        let _ = writeln!(s, "penalty_mode = {}", m.penalty_mode.as_str());
        let _ = writeln!(s, "normal_k = {}", m.normal_k);
        let _ = writeln!(s, "arm_length = {}", m.arm_length);
        let _ = writeln!(s, "aux_cov_scale = {}", m.aux_cov_scale);
        let _ = writeln!(s, "course_speed_threshold = {}", m.course_speed_threshold);
        let _ = writeln!(s, "course_baseline = {}", m.course_baseline);
        let _ = writeln!(s, "icp_max_iterations = {}", m.icp.max_iterations);
        let _ = writeln!(s, "icp_translation_epsilon = {}", m.icp.translation_epsilon);
        let _ = writeln!(s, "icp_rotation_epsilon = {}", m.icp.rotation_epsilon);
        let _ = writeln!(s, "sensor_sigma = {}", 1.0 / m.icp.scale_s.sqrt());
        let filter = match m.icp.outlier_filter {
            OutlierFilter::Trimmed { ratio } => format!("trimmed:{ratio}"),
            OutlierFilter::Cauchy { scale } => format!("cauchy:{scale}"),
            OutlierFilter::None => "none".to_string(),
        };
        let _ = writeln!(s, "outlier_filter = {filter}");
        let _ = writeln!(s, "ply_ascii = {}", self.ply_ascii);
        let _ = writeln!(s, "timing = {}", self.timing);
        s
    }
}

fn apply_scenario_key(sc: &mut Scenario, e: &Entry) -> Result<(), ConfigError> {
    let v = Value(e);
    let t = &mut sc.trajectory;
    let l = &mut sc.lidar;
    let n = &mut sc.noise;
    match e.key.as_str() {
        "length" => t.length = v.non_negative()?,
        "step" => t.step = v.positive()?,
        "speed" => t.speed = v.positive()?,
        "height" => t.height = v.f64()?,
        "rough_amplitude_deg" => t.rough_amplitude = v.degrees()?,
        "rough_wavelength" => t.rough_wavelength = v.positive()?,
        "tree_density" => sc.tree_density = v.non_negative()?,
        "tree_radius_min" => sc.tree_shape.radius.0 = v.positive()?,
        "tree_radius_max" => sc.tree_shape.radius.1 = v.positive()?,
        "tree_height_min" => sc.tree_shape.height.0 = v.positive()?,
        "tree_height_max" => sc.tree_shape.height.1 = v.positive()?,
        "tree_min_gap" => sc.tree_shape.min_gap = v.non_negative()?,
        "path_clearance" => sc.path_clearance = v.non_negative()?,
        "world_margin" => sc.world_margin = v.non_negative()?,
        "lidar_range" => l.max_range = v.positive()?,
        "lidar_min_range" => l.min_range = v.non_negative()?,
        "lidar_beams" => l.beams = v.usize()?,
        "lidar_min_elevation_deg" => l.min_elevation = v.degrees()?,
        "lidar_max_elevation_deg" => l.max_elevation = v.degrees()?,
        "lidar_azimuth_steps" => l.azimuth_steps = v.usize()?,
        "lidar_tilt_deg" => l.tilt = v.degrees()?,
        "lidar_range_noise" => l.range_noise_sigma = v.non_negative()?,
        "lidar_elevation_bias_deg" => sc.elevation_bias_sigma = v.non_negative()?.to_radians(),
        "gnss_sigma_open_h" | "gnss_sigma_open_v" | "gnss_sigma_canopy_h" | "gnss_sigma_canopy_v" => {
            let s = v.non_negative()?;
            let canopy = e.key.contains("canopy");
            let cov = if canopy { &mut n.gnss_cov_canopy } else { &mut n.gnss_cov_open };
            let (mut h, mut vert) = sigmas(cov);
            if e.key.ends_with("_h") {
                h = s;
            } else {
                vert = s;
            }
            *cov = SymMat3::diag(h * h, h * h, vert * vert);
        }
        "canopy_start" => sc.canopy.0 = v.non_negative()?,
        "canopy_end" => sc.canopy.1 = v.non_negative()?,
        "mag_bias_deg" => n.mag_heading_bias = v.degrees()?,
        "attitude_noise_deg" => n.attitude_noise_sigma = v.non_negative()?.to_radians(),
        "scan_every" => sc.scan_every = v.usize()?,
        _ => {
            return Err(ConfigError::UnknownKey {
                line: e.line,
                key: e.key.clone(),
            })
        }
    }
    Ok(())
}

/// Scenario keys as config text, the inverse of parsing them.
pub fn render_scenario(sc: &Scenario) -> String {
    let t = &sc.trajectory;
    let l = &sc.lidar;
    let n = &sc.noise;
    let (oh, ov) = sigmas(&n.gnss_cov_open);
    let (ch, cv) = sigmas(&n.gnss_cov_canopy);
    let lines = [
        ("scenario", t.kind.as_str().to_string()),
        ("length", t.length.to_string()),
        ("step", t.step.to_string()),
        ("speed", t.speed.to_string()),
        ("height", t.height.to_string()),
        ("rough_amplitude_deg", t.rough_amplitude.to_degrees().to_string()),
        ("rough_wavelength", t.rough_wavelength.to_string()),
        ("tree_density", sc.tree_density.to_string()),
        ("tree_radius_min", sc.tree_shape.radius.0.to_string()),
        ("tree_radius_max", sc.tree_shape.radius.1.to_string()),
        ("tree_height_min", sc.tree_shape.height.0.to_string()),
        ("tree_height_max", sc.tree_shape.height.1.to_string()),
        ("tree_min_gap", sc.tree_shape.min_gap.to_string()),
        ("path_clearance", sc.path_clearance.to_string()),
        ("world_margin", sc.world_margin.to_string()),
        ("lidar_range", l.max_range.to_string()),
        ("lidar_min_range", l.min_range.to_string()),
        ("lidar_beams", l.beams.to_string()),
        ("lidar_min_elevation_deg", l.min_elevation.to_degrees().to_string()),
        ("lidar_max_elevation_deg", l.max_elevation.to_degrees().to_string()),
        ("lidar_azimuth_steps", l.azimuth_steps.to_string()),
        ("lidar_tilt_deg", l.tilt.to_degrees().to_string()),
        ("lidar_range_noise", l.range_noise_sigma.to_string()),
        ("lidar_elevation_bias_deg", sc.elevation_bias_sigma.to_degrees().to_string()),
        ("gnss_sigma_open_h", oh.to_string()),
        ("gnss_sigma_open_v", ov.to_string()),
        ("gnss_sigma_canopy_h", ch.to_string()),
        ("gnss_sigma_canopy_v", cv.to_string()),
        ("canopy_start", sc.canopy.0.to_string()),
        ("canopy_end", sc.canopy.1.to_string()),
        ("mag_bias_deg", n.mag_heading_bias.to_degrees().to_string()),
        ("attitude_noise_deg", n.attitude_noise_sigma.to_degrees().to_string()),
        ("scan_every", sc.scan_every.to_string()),
    ];
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new(""))
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = parse("# header\n\nscenario = loop # inline\nlength = 50\nmode = baseline\n").unwrap();
        let InputSource::Synthetic(sc) = &cfg.input else { panic!() };
        assert_eq!(sc.trajectory.kind, TrajectoryKind::Loop);
        assert_eq!(sc.trajectory.length, 50.0);
        assert_eq!(cfg.mode, Mode::Baseline);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("scenario = loop\n\nlength 50\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 3, .. }), "{err}");
        let err = parse("scenario = loop\nepsilon = -1\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { line: 2, .. }), "{err}");
        let err = parse("scenario = loop\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 2, .. }), "{err}");
        let err = parse("scenario = loop\nstep = 1\nstep = 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 3, first: 2, .. }), "{err}");
        assert!(err.to_string().starts_with("line 3:"));
    }

    #[test]
    fn missing_recorded_file() {
        let err = parse("scans = /definitely/not/here.csv\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingFile { line: 1, .. }));
        assert!(matches!(parse("seed = 3\n"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn modes_map_to_mapper_settings() {
        let mut cfg = parse("scenario = straight\npenalty_mode = gnss_only\n").unwrap();
        assert_eq!(cfg.effective_mapper().penalty_mode, PenaltyMode::GnssOnly);
        cfg.mode = Mode::Baseline;
        assert_eq!(cfg.effective_mapper().penalty_mode, PenaltyMode::None);
        assert!(cfg.effective_mapper().register);
        cfg.mode = Mode::Prior;
        assert!(!cfg.effective_mapper().register);
    }

    #[test]
    fn scenario_keys_round_trip() {
        let text = "scenario = rough\nlength = 42\nlidar_tilt_deg = 10\ngnss_sigma_canopy_v = 0.5\nr_max = none\n\
                    outlier_filter = cauchy:0.2\nseed = 9\n";
        let cfg = parse(text).unwrap();
        let InputSource::Synthetic(sc) = &cfg.input else { panic!() };
        assert_eq!(sc.seed, 9);
        assert_eq!(cfg.mapper.r_max, None);
        let again = parse(&(render_scenario(sc) + &cfg.render_mapper_keys())).unwrap();
        assert_eq!(again, cfg);
    }
}
