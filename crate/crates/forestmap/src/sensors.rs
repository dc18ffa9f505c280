//! GNSS and IMU CSV streams.
//!
//! GNSS columns: `time, e, n, u, cov_ee, cov_nn, cov_uu, cov_en, cov_eu,
//! cov_nu, status`. IMU columns: `time, qw, qx, qy, qz, mag_heading`. Angles
//! are radians, positions meters in a local ENU frame. Columns are matched
//! by name, so extra columns and any order are accepted.

use std::io::{self, Read, Write};
use std::path::Path;

use forestmap_core::penalties::{GnssFix, GnssStatus, ImuAttitude};
use forestmap_core::{Quaternion, SymMat3, Vec3};
use thiserror::Error;

use crate::output::write_atomic;

pub const GNSS_COLUMNS: [&str; 11] = [
    "time", "e", "n", "u", "cov_ee", "cov_nn", "cov_uu", "cov_en", "cov_eu", "cov_nu", "status",
];
pub const IMU_COLUMNS: [&str; 6] = ["time", "qw", "qx", "qy", "qz", "mag_heading"];

#[derive(Debug, Error)]
pub enum SensorCsvError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column '{0}'")]
    MissingColumn(&'static str),
    #[error("row {row}: time {time} does not increase")]
    NonMonotoneTime { row: usize, time: f64 },
    #[error("row {row}, column '{column}': {reason}")]
    BadValue {
        row: usize,
        column: &'static str,
        reason: String,
    },
}

/// Parsed rows plus the number of rows rejected with a warning.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorRows<T> {
    pub rows: Vec<T>,
    pub warnings: usize,
}

struct Columns<const N: usize> {
    index: [usize; N],
    names: [&'static str; N],
}

impl<const N: usize> Columns<N> {
    fn locate(headers: &csv::StringRecord, names: [&'static str; N]) -> Result<Self, SensorCsvError> {
        let mut index = [0; N];
        for (slot, name) in index.iter_mut().zip(names) {
            *slot = headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or(SensorCsvError::MissingColumn(name))?;
        }
        Ok(Columns { index, names })
    }

    fn text<'r>(&self, record: &'r csv::StringRecord, k: usize, row: usize) -> Result<&'r str, SensorCsvError> {
        record.get(self.index[k]).map(str::trim).ok_or(SensorCsvError::BadValue {
            row,
            column: self.names[k],
            reason: "missing field".to_string(),
        })
    }

    fn number(&self, record: &csv::StringRecord, k: usize, row: usize) -> Result<f64, SensorCsvError> {
        let text = self.text(record, k, row)?;
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| SensorCsvError::BadValue {
                row,
                column: self.names[k],
                reason: format!("not a finite number: '{text}'"),
            })
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

fn check_time(last: &mut Option<f64>, time: f64, row: usize) -> Result<(), SensorCsvError> {
    if last.is_some_and(|t| time <= t) {
        return Err(SensorCsvError::NonMonotoneTime { row, time });
    }
    *last = Some(time);
    Ok(())
}

pub fn read_gnss_from<R: Read>(input: R) -> Result<SensorRows<GnssFix>, SensorCsvError> {
    let mut rdr = reader(input);
    let cols = Columns::locate(rdr.headers()?, GNSS_COLUMNS)?;
    let mut out = SensorRows {
        rows: Vec::new(),
        warnings: 0,
    };
    let mut last = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let v = |k| cols.number(&record, k, row);
        let time = v(0)?;
        check_time(&mut last, time, row)?;
        let position = Vec3::new(v(1)?, v(2)?, v(3)?);
        let covariance = SymMat3::new(v(4)?, v(5)?, v(6)?, v(7)?, v(8)?, v(9)?);
        let status_text = cols.text(&record, 10, row)?;
        let status = GnssStatus::parse(status_text).ok_or_else(|| SensorCsvError::BadValue {
            row,
            column: "status",
            reason: format!("unknown status '{status_text}'"),
        })?;
        if !covariance.is_positive_definite() {
            log::warn!("GNSS row {row} (t = {time}): covariance is not positive definite, row dropped");
            out.warnings += 1;
            continue;
        }
        out.rows.push(GnssFix {
            time,
            position,
            covariance,
            status,
        });
    }
    Ok(out)
}

/// IMU rows. `roll_pitch_cov` (rad^2) is attached to every sample since
/// the file carries no attitude uncertainty.
pub fn read_imu_from<R: Read>(input: R, roll_pitch_cov: f64) -> Result<SensorRows<ImuAttitude>, SensorCsvError> {
    let mut rdr = reader(input);
    let cols = Columns::locate(rdr.headers()?, IMU_COLUMNS)?;
    let mut out = SensorRows {
        rows: Vec::new(),
        warnings: 0,
    };
    let mut last = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let v = |k| cols.number(&record, k, row);
        let time = v(0)?;
        check_time(&mut last, time, row)?;
        let q = Quaternion::new(v(1)?, v(2)?, v(3)?, v(4)?);
        if !(q.norm() > 1e-9) {
            return Err(SensorCsvError::BadValue {
                row,
                column: "qw",
                reason: "zero quaternion".to_string(),
            });
        }
        out.rows.push(ImuAttitude {
            time,
            attitude: q.normalized().to_rotation(),
            roll_pitch_cov,
            raw_magnetic_heading: v(5)?,
        });
    }
    Ok(out)
}

pub fn read_gnss_csv(path: &Path) -> Result<SensorRows<GnssFix>, SensorCsvError> {
    read_gnss_from(std::fs::File::open(path)?)
}

pub fn read_imu_csv(path: &Path, roll_pitch_cov: f64) -> Result<SensorRows<ImuAttitude>, SensorCsvError> {
    read_imu_from(std::fs::File::open(path)?, roll_pitch_cov)
}

/// Both streams of a recorded run.
#[derive(Clone, Debug)]
pub struct SensorStreams {
    pub fixes: Vec<GnssFix>,
    pub attitudes: Vec<ImuAttitude>,
    pub warnings: usize,
}

pub fn read_sensor_csv(gnss: &Path, imu: &Path, roll_pitch_cov: f64) -> Result<SensorStreams, SensorCsvError> {
    let g = read_gnss_csv(gnss)?;
    let i = read_imu_csv(imu, roll_pitch_cov)?;
    Ok(SensorStreams {
        fixes: g.rows,
        attitudes: i.rows,
        warnings: g.warnings + i.warnings,
    })
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(w)
}

fn flush(mut w: csv::Writer<&mut dyn Write>) -> io::Result<()> {
    w.flush()
}

pub fn write_gnss_to(fixes: &[GnssFix], w: &mut dyn Write) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(GNSS_COLUMNS)?;
    for f in fixes {
        let c = &f.covariance;
        let nums = [
            f.time,
            f.position.x,
            f.position.y,
            f.position.z,
            c.xx,
            c.yy,
            c.zz,
            c.xy,
            c.xz,
            c.yz,
        ];
        let mut row: Vec<String> = nums.iter().map(f64::to_string).collect();
        row.push(f.status.as_str().to_string());
        out.write_record(&row)?;
    }
    flush(out)
}

pub fn write_imu_to(attitudes: &[ImuAttitude], w: &mut dyn Write) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(IMU_COLUMNS)?;
    for a in attitudes {
        let q = Quaternion::from_rotation(&a.attitude);
        let nums = [a.time, q.w, q.x, q.y, q.z, a.raw_magnetic_heading];
        out.write_record(nums.iter().map(f64::to_string))?;
    }
    flush(out)
}

pub fn write_gnss_csv(fixes: &[GnssFix], path: &Path) -> io::Result<()> {
    write_atomic(path, |w| write_gnss_to(fixes, w))
}

pub fn write_imu_csv(attitudes: &[ImuAttitude], path: &Path) -> io::Result<()> {
    write_atomic(path, |w| write_imu_to(attitudes, w))
}
