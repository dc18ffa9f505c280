//! Run inputs: scan index, trajectories and ground-truth worlds on disk,
//! or a synthetic scenario generated in memory.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use forestmap_core::penalties::{GnssFix, ImuAttitude};
use forestmap_core::registration::PointCloud;
use forestmap_core::synth::{generate, SynthError, Tree, World};
use forestmap_core::{Quaternion, RigidTransform, Vec3};
use thiserror::Error;

use crate::config::{InputSource, RunConfig};
use crate::output::write_atomic;
use crate::ply::{read_ply, PlyError};
use crate::sensors::{read_gnss_csv, read_imu_csv, SensorCsvError};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Ply { path: PathBuf, source: PlyError },
    #[error("{path}: {source}")]
    Sensors { path: PathBuf, source: SensorCsvError },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Table { path: PathBuf, reason: String },
    #[error("synthetic scenario: {0}")]
    Synth(#[from] SynthError),
}

/// Everything the mapper consumes, plus ground truth when known.
#[derive(Clone, Debug)]
pub struct Inputs {
    /// `(time, scan)` in the sensor frame, sorted by time.
    pub scans: Vec<(f64, PointCloud)>,
    pub fixes: Vec<GnssFix>,
    pub attitudes: Vec<ImuAttitude>,
    /// True sensor poses (ENU) at scan times.
    pub truth: Option<Vec<(f64, RigidTransform)>>,
    pub world: Option<World>,
    /// Sensor rows dropped with a warning.
    pub warnings: usize,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, InputError> {
    match &cfg.input {
        InputSource::Synthetic(sc) => {
            let log = generate(sc)?;
            let truth = log.scan_truth(sc.scan_every);
            Ok(Inputs {
                scans: log.scans,
                fixes: log.fixes,
                attitudes: log.attitudes,
                truth: Some(truth),
                world: Some(log.world),
                warnings: 0,
            })
        }
        InputSource::Recorded(rec) => {
            let gnss = read_gnss_csv(&rec.gnss).map_err(|source| InputError::Sensors {
                path: rec.gnss.clone(),
                source,
            })?;
            let imu = read_imu_csv(&rec.imu, cfg.imu_attitude_sigma.powi(2)).map_err(|source| InputError::Sensors {
                path: rec.imu.clone(),
                source,
            })?;
            let scans = read_scan_index(&rec.scans)?;
            let truth = rec.truth.as_deref().map(read_trajectory_csv).transpose()?;
            let world = rec.world.as_deref().map(read_world_csv).transpose()?;
            Ok(Inputs {
                scans,
                fixes: gnss.rows,
                attitudes: imu.rows,
                truth,
                world,
                warnings: gnss.warnings + imu.warnings,
            })
        }
    }
}

fn table_err(path: &Path, reason: impl Into<String>) -> InputError {
    InputError::Table {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> InputError + '_ {
    move |source| InputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// A small CSV table read by column name.
struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, InputError> {
        let file = std::fs::File::open(path).map_err(|e| table_err(path, e.to_string()))?;
        Table::from_reader(file, path)
    }

    fn from_reader<R: Read>(input: R, path: &Path) -> Result<Table, InputError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
        let rows = rdr.records().collect::<Result<Vec<_>, _>>().map_err(csv_err(path))?;
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str, path: &Path) -> Result<usize, InputError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| table_err(path, format!("missing column '{name}'")))
    }

    fn number(&self, row: usize, col: usize, path: &Path) -> Result<f64, InputError> {
        let text = self.rows[row].get(col).unwrap_or("");
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| table_err(path, format!("row {}: not a finite number: '{text}'", row + 1)))
    }
}

/// Scan index with columns `time, file`; files resolve against the index's
/// directory. Times must increase.
pub fn read_scan_index(path: &Path) -> Result<Vec<(f64, PointCloud)>, InputError> {
    let table = Table::read(path)?;
    let (tc, fc) = (table.column("time", path)?, table.column("file", path)?);
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut scans: Vec<(f64, PointCloud)> = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        let time = table.number(i, tc, path)?;
        if scans.last().is_some_and(|(t, _)| time <= *t) {
            return Err(table_err(path, format!("row {}: time {time} does not increase", i + 1)));
        }
        let file = dir.join(table.rows[i].get(fc).unwrap_or(""));
        let cloud = read_ply(&file).map_err(|source| InputError::Ply { path: file, source })?;
        scans.push((time, cloud));
    }
    Ok(scans)
}

pub fn write_scan_index(entries: &[(f64, String)], path: &Path) -> io::Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "file"])?;
        for (t, f) in entries {
            out.write_record([t.to_string(), f.clone()])?;
        }
        out.flush()
    })
}

pub const TRAJECTORY_COLUMNS: [&str; 8] = ["time_s", "e", "n", "u", "qw", "qx", "qy", "qz"];

/// Poses from a trajectory CSV (`time_s, e, n, u, qw, qx, qy, qz`; other
/// columns are ignored).
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<(f64, RigidTransform)>, InputError> {
    let table = Table::read(path)?;
    let cols = TRAJECTORY_COLUMNS
        .iter()
        .map(|c| table.column(c, path))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        let v = cols
            .iter()
            .map(|&c| table.number(i, c, path))
            .collect::<Result<Vec<_>, _>>()?;
        let q = Quaternion::new(v[4], v[5], v[6], v[7]);
        if !(q.norm() > 1e-9) {
            return Err(table_err(path, format!("row {}: zero quaternion", i + 1)));
        }
        let pose = RigidTransform::from_quaternion(q.normalized(), Vec3::new(v[1], v[2], v[3]))
            .map_err(|e| table_err(path, format!("row {}: {e}", i + 1)))?;
        out.push((v[0], pose));
    }
    Ok(out)
}

/// Writes `scan_id, time_s, e, n, u, qw, qx, qy, qz` and, when given, a
/// `status` column.
pub fn write_trajectory_to(
    poses: &[(f64, RigidTransform)],
    status: Option<&[&str]>,
    w: &mut dyn Write,
) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["scan_id"];
    header.extend(TRAJECTORY_COLUMNS);
    if status.is_some() {
        header.push("status");
    }
    out.write_record(&header)?;
    for (i, (t, pose)) in poses.iter().enumerate() {
        let p = pose.translation();
        let q = pose.quaternion();
        let mut row = vec![i.to_string()];
        row.extend([*t, p.x, p.y, p.z, q.w, q.x, q.y, q.z].iter().map(f64::to_string));
        if let Some(s) = status {
            row.push(s[i].to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()
}

/// World geometry: rows `kind, x, y, z, radius, height` with one `ground`
/// row (its `z` is the ground height) and one `tree` row per trunk.
pub fn read_world_csv(path: &Path) -> Result<World, InputError> {
    let table = Table::read(path)?;
    let kind = table.column("kind", path)?;
    let cols = ["x", "y", "z", "radius", "height"]
        .iter()
        .map(|c| table.column(c, path))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ground = None;
    let mut trees = Vec::new();
    for i in 0..table.rows.len() {
        let v = cols
            .iter()
            .map(|&c| table.number(i, c, path))
            .collect::<Result<Vec<_>, _>>()?;
        match table.rows[i].get(kind) {
            Some("ground") => ground = Some(v[2]),
            Some("tree") => trees.push(Tree {
                center: Vec3::new(v[0], v[1], v[2]),
                radius: v[3],
                height: v[4],
            }),
            other => return Err(table_err(path, format!("row {}: unknown kind {other:?}", i + 1))),
        }
    }
    let ground = ground.ok_or_else(|| table_err(path, "no ground row"))?;
    World::new(ground, trees, 0).map_err(|e| table_err(path, e.to_string()))
}

pub fn write_world_to(world: &World, w: &mut dyn Write) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "x", "y", "z", "radius", "height"])?;
    let g = world.ground_height();
    out.write_record(["ground".to_string(), "0".into(), "0".into(), g.to_string(), "0".into(), "0".into()])?;
    for t in world.trees() {
        let nums = [t.center.x, t.center.y, g, t.radius, t.height];
        let mut row = vec!["tree".to_string()];
        row.extend(nums.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()
}
