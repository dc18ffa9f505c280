//! Penalties built from GNSS fixes and IMU attitudes, and magnetometer
//! heading-offset calibration.
//!
//! Frames: positions are local ENU (or a translated copy of it, the map
//! frame); attitudes rotate body vectors into ENU; headings are measured
//! counter-clockwise from East, radians.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{GeometryError, Mat3, Quaternion, SymMat3, Vec3};
use crate::math::{atan2, cos, sin, wrap_angle};
use crate::registration::Penalty;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnssStatus {
    RtkFixed,
    RtkFloat,
    Standalone,
}

impl GnssStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            GnssStatus::RtkFixed => "rtk_fixed",
            GnssStatus::RtkFloat => "rtk_float",
            GnssStatus::Standalone => "standalone",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rtk_fixed" => Some(GnssStatus::RtkFixed),
            "rtk_float" => Some(GnssStatus::RtkFloat),
            "standalone" => Some(GnssStatus::Standalone),
            _ => None,
        }
    }
}

/// A timestamped GNSS position in the local ENU frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnssFix {
    /// Seconds.
    pub time: f64,
    pub position: Vec3,
    /// Meters squared.
    pub covariance: SymMat3,
    pub status: GnssStatus,
}

impl GnssFix {
    pub fn is_valid(&self) -> bool {
        self.time.is_finite() && self.position.is_finite() && self.covariance.is_positive_definite()
    }

    /// Same fix expressed relative to `anchor`.
    pub fn relative_to(&self, anchor: Vec3) -> GnssFix {
        GnssFix {
            position: self.position - anchor,
            ..*self
        }
    }
}

/// A timestamped IMU attitude (body to ENU).
///
/// `attitude` carries the raw magnetometer heading as its yaw; roll and pitch
/// come from the gravity estimate and are unbiased.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuAttitude {
    pub time: f64,
    pub attitude: Mat3,
    /// Radians squared.
    pub roll_pitch_cov: f64,
    pub raw_magnetic_heading: f64,
}

impl ImuAttitude {
    /// Builds an attitude from Euler angles whose yaw is the magnetic heading.
    pub fn from_euler(time: f64, roll: f64, pitch: f64, magnetic_heading: f64, roll_pitch_cov: f64) -> Self {
        ImuAttitude {
            time,
            attitude: Mat3::from_euler_zyx(roll, pitch, magnetic_heading),
            roll_pitch_cov,
            raw_magnetic_heading: magnetic_heading,
        }
    }

    pub fn roll_pitch(&self) -> (f64, f64) {
        let (roll, pitch, _) = self.attitude.to_euler_zyx();
        (roll, pitch)
    }

    /// Attitude with the heading replaced: `Rz(heading) Ry(pitch) Rx(roll)`.
    pub fn with_heading(&self, heading: f64) -> Mat3 {
        let (roll, pitch) = self.roll_pitch();
        Mat3::from_euler_zyx(roll, pitch, heading)
    }

    /// Attitude with the magnetometer offset removed from its yaw.
    pub fn corrected(&self, heading_offset: f64) -> Mat3 {
        Mat3::rot_z(-heading_offset) * self.attitude
    }

    pub fn corrected_heading(&self, heading_offset: f64) -> f64 {
        wrap_angle(self.raw_magnetic_heading - heading_offset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenaltyProvenance {
    GnssOnly,
    GnssImuThreePoint,
}

/// Penalties derived from one sensor sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltySet {
    pub penalties: Vec<Penalty>,
    pub provenance: PenaltyProvenance,
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum PenaltyError {
    #[error("heading offset is unobservable: track covers less than {required} m of motion")]
    InsufficientMotion { required: f64 },
    #[error("no sensor samples")]
    MissingData,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Default minimum travelled distance for heading calibration, meters.
pub const DEFAULT_CALIBRATION_DISTANCE: f64 = 10.0;

fn horizontal_distance(a: Vec3, b: Vec3) -> f64 {
    crate::math::hypot(b.x - a.x, b.y - a.y)
}

fn circular_mean(angles: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        s += sin(a);
        c += cos(a);
        n += 1;
    }
    if n == 0 {
        None
    } else {
        Some(wrap_angle(atan2(s, c)))
    }
}

/// Magnetometer heading interpolated at `t` along the shorter arc.
pub fn interpolate_heading(headings: &[(f64, f64)], t: f64) -> Option<f64> {
    let first = headings.first()?;
    if t <= first.0 {
        return Some(first.1);
    }
    let last = headings.last()?;
    if t >= last.0 {
        return Some(last.1);
    }
    let k = headings.partition_point(|h| h.0 <= t);
    let (t0, h0) = headings[k - 1];
    let (t1, h1) = headings[k];
    let a = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    Some(wrap_angle(h0 + a * wrap_angle(h1 - h0)))
}

/// Estimates the constant offset `magnetometer - true heading` from the
/// initial stretch of a GNSS track.
///
/// The window runs from the first fix to the first fix at least
/// `min_distance` away horizontally. Every fix in the window is paired with
/// the first later fix at least `min_distance / 2` away; the chord direction
/// is the course over ground and is compared with the circular mean of the
/// magnetometer headings recorded between the two fixes. The result is the
/// circular mean of those differences, in (-pi, pi].
pub fn estimate_heading_offset(
    gnss_track: &[GnssFix],
    imu_headings: &[(f64, f64)],
    min_distance: f64,
) -> Result<f64, PenaltyError> {
    if !(min_distance > 0.0) {
        return Err(PenaltyError::InvalidParameter("min_distance must be positive"));
    }
    let start = gnss_track.first().ok_or(PenaltyError::MissingData)?;
    if imu_headings.is_empty() {
        return Err(PenaltyError::MissingData);
    }
    let end = gnss_track
        .iter()
        .position(|f| horizontal_distance(start.position, f.position) >= min_distance)
        .ok_or(PenaltyError::InsufficientMotion { required: min_distance })?;
    let window = &gnss_track[..=end];
    let baseline = 0.5 * min_distance;

    let mut diffs = Vec::new();
    for (i, a) in window.iter().enumerate() {
        let Some(b) = window[i + 1..]
            .iter()
            .find(|b| horizontal_distance(a.position, b.position) >= baseline)
        else {
            continue;
        };
        let cog = atan2(b.position.y - a.position.y, b.position.x - a.position.x);
        let lo = imu_headings.partition_point(|h| h.0 < a.time);
        let hi = imu_headings.partition_point(|h| h.0 <= b.time);
        let mag = if hi > lo {
            circular_mean(imu_headings[lo..hi].iter().map(|h| h.1))
        } else {
            interpolate_heading(imu_headings, 0.5 * (a.time + b.time))
        };
        if let Some(mag) = mag {
            diffs.push(wrap_angle(mag - cog));
        }
    }
    circular_mean(diffs.into_iter()).ok_or(PenaltyError::InsufficientMotion { required: min_distance })
}

/// A single penalty pulling `scan_origin` onto the GNSS position.
pub fn make_gnss_penalty(fix: &GnssFix, scan_origin: Vec3) -> PenaltySet {
    PenaltySet {
        penalties: vec![Penalty {
            map_point: fix.position,
            scan_point: scan_origin,
            covariance: fix.covariance,
        }],
        provenance: PenaltyProvenance::GnssOnly,
    }
}

/// GNSS penalty plus two auxiliary points that pin roll, pitch and heading.
///
/// In the map frame the auxiliary points sit `arm_length` below the fix and
/// `arm_length` away along `heading` in the horizontal plane. Their scan-frame
/// counterparts are the same offsets expressed in the body frame through the
/// IMU roll and pitch and the given heading, so all three residuals vanish
/// when the scan pose agrees with the sensors. Auxiliary covariances are
/// `aux_cov_scale` times the fix covariance.
pub fn make_three_point_penalties(
    fix: &GnssFix,
    att: &ImuAttitude,
    heading: f64,
    arm_length: f64,
    aux_cov_scale: f64,
    scan_origin: Vec3,
) -> Result<PenaltySet, PenaltyError> {
    if !(arm_length > 0.0) || !arm_length.is_finite() {
        return Err(PenaltyError::InvalidParameter("arm_length must be positive"));
    }
    if !(aux_cov_scale > 0.0) || !aux_cov_scale.is_finite() {
        return Err(PenaltyError::InvalidParameter("aux_cov_scale must be positive"));
    }
    let body_to_map = att.with_heading(heading);
    let map_to_body = body_to_map.transpose();
    let down = Vec3::new(0.0, 0.0, -arm_length);
    let ahead = Vec3::new(cos(heading), sin(heading), 0.0) * arm_length;
    let aux_cov = fix.covariance.scale(aux_cov_scale);
    let mut set = make_gnss_penalty(fix, scan_origin);
    set.penalties.push(Penalty {
        map_point: fix.position + down,
        scan_point: scan_origin + map_to_body * down,
        covariance: aux_cov,
    });
    set.penalties.push(Penalty {
        map_point: fix.position + ahead,
        scan_point: scan_origin + map_to_body * ahead,
        covariance: aux_cov,
    });
    set.provenance = PenaltyProvenance::GnssImuThreePoint;
    Ok(set)
}

/// `q - T p`.
pub fn penalty_residual(p: &Penalty, t: &crate::geometry::RigidTransform) -> Vec3 {
    p.map_point - t.apply(p.scan_point)
}

/// Heading for the forward penalty point.
///
/// The magnetometer offset is constant, so motion is used to refine it
/// rather than to replace the heading: while the platform moves faster than
/// `speed_threshold` (m/s, between the last two fixes), the chord from the
/// most recent fix at least `baseline` meters behind gives a course over
/// ground, and the circular mean of the raw magnetometer headings logged
/// along that chord minus the course is one offset sample. Samples enter a
/// running circular mean seeded with the calibrated offset. The returned
/// heading is the raw magnetometer heading minus that mean, which avoids
/// the lag a chord course has on curved paths.
#[derive(Clone, Debug)]
pub struct HeadingFilter {
    pub speed_threshold: f64,
    pub baseline: f64,
    history: Vec<(f64, Vec3, f64)>,
    sum_sin: f64,
    sum_cos: f64,
}

pub const DEFAULT_SPEED_THRESHOLD: f64 = 0.3;
pub const DEFAULT_COURSE_BASELINE: f64 = 5.0;

impl HeadingFilter {
    pub fn new(offset: f64) -> Self {
        HeadingFilter {
            speed_threshold: DEFAULT_SPEED_THRESHOLD,
            baseline: DEFAULT_COURSE_BASELINE,
            history: Vec::new(),
            sum_sin: sin(offset),
            sum_cos: cos(offset),
        }
    }

    /// Current magnetometer offset estimate.
    pub fn offset(&self) -> f64 {
        atan2(self.sum_sin, self.sum_cos)
    }

    /// Feeds a fix and returns the heading to use with `att`.
    pub fn update(&mut self, fix: &GnssFix, att: &ImuAttitude) -> f64 {
        let moving = self.history.last().is_some_and(|&(t, p, _)| {
            let dt = fix.time - t;
            dt > 0.0 && horizontal_distance(p, fix.position) / dt > self.speed_threshold
        });
        self.history.push((fix.time, fix.position, att.raw_magnetic_heading));
        let start = self
            .history
            .iter()
            .rposition(|(_, p, _)| horizontal_distance(*p, fix.position) >= self.baseline);
        if let Some(k) = start {
            // older entries are never used again
            self.history.drain(..k);
            if moving {
                let p = self.history[0].1;
                let course = atan2(fix.position.y - p.y, fix.position.x - p.x);
                if let Some(mag) = circular_mean(self.history.iter().map(|h| h.2)) {
                    let sample = wrap_angle(mag - course);
                    self.sum_sin += sin(sample);
                    self.sum_cos += cos(sample);
                }
            }
        }
        wrap_angle(att.raw_magnetic_heading - self.offset())
    }
}

/// Linear interpolation of a time-sorted fix stream at `t` (clamped at the
/// ends). The covariance and status come from the nearer sample.
pub fn interpolate_fix(fixes: &[GnssFix], t: f64) -> Option<GnssFix> {
    let first = fixes.first()?;
    if t <= first.time {
        return Some(GnssFix { time: t, ..*first });
    }
    let last = fixes.last()?;
    if t >= last.time {
        return Some(GnssFix { time: t, ..*last });
    }
    let k = fixes.partition_point(|f| f.time <= t);
    let (a, b) = (&fixes[k - 1], &fixes[k]);
    let w = if b.time > a.time { (t - a.time) / (b.time - a.time) } else { 0.0 };
    let near = if w < 0.5 { a } else { b };
    Some(GnssFix {
        time: t,
        position: a.position + (b.position - a.position) * w,
        covariance: near.covariance,
        status: near.status,
    })
}

/// Spherical interpolation of a time-sorted attitude stream at `t`.
pub fn interpolate_attitude(atts: &[ImuAttitude], t: f64) -> Option<ImuAttitude> {
    let first = atts.first()?;
    if t <= first.time {
        return Some(ImuAttitude { time: t, ..*first });
    }
    let last = atts.last()?;
    if t >= last.time {
        return Some(ImuAttitude { time: t, ..*last });
    }
    let k = atts.partition_point(|a| a.time <= t);
    let (a, b) = (&atts[k - 1], &atts[k]);
    let w = if b.time > a.time { (t - a.time) / (b.time - a.time) } else { 0.0 };
    let q = Quaternion::from_rotation(&a.attitude).slerp(&Quaternion::from_rotation(&b.attitude), w);
    Some(ImuAttitude {
        time: t,
        attitude: q.to_rotation(),
        roll_pitch_cov: if w < 0.5 { a.roll_pitch_cov } else { b.roll_pitch_cov },
        raw_magnetic_heading: wrap_angle(
            a.raw_magnetic_heading + w * wrap_angle(b.raw_magnetic_heading - a.raw_magnetic_heading),
        ),
    })
}
