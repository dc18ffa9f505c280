use alloc::vec::Vec;

use super::SynthError;
use crate::geometry::{Mat3, RigidTransform, Vec3};
use crate::math::{cos, floor, round, sin, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// Along +x.
    Straight,
    /// Counter-clockwise circle starting at the origin heading +x.
    Loop,
    /// Along +x with sinusoidal roll and pitch.
    Rough,
}

impl TrajectoryKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "straight" => Some(TrajectoryKind::Straight),
            "loop" => Some(TrajectoryKind::Loop),
            "rough" => Some(TrajectoryKind::Rough),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TrajectoryKind::Straight => "straight",
            TrajectoryKind::Loop => "loop",
            TrajectoryKind::Rough => "rough",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryParams {
    pub kind: TrajectoryKind,
    /// Path length, meters.
    pub length: f64,
    /// Spacing between poses along the path, meters.
    pub step: f64,
    /// m/s; sets the timestamps.
    pub speed: f64,
    /// Sensor height above the ground, meters.
    pub height: f64,
    /// Peak pitch of rough paths, radians; roll peaks at 60% of it.
    pub rough_amplitude: f64,
    /// Meters per pitch oscillation on rough paths.
    pub rough_wavelength: f64,
}

impl TrajectoryParams {
    pub fn new(kind: TrajectoryKind, length: f64, step: f64) -> Self {
        TrajectoryParams {
            kind,
            length,
            step,
            speed: 1.0,
            height: 1.5,
            rough_amplitude: 5f64.to_radians(),
            rough_wavelength: 12.0,
        }
    }
}

/// [`gen_trajectory_with`] using default speed, height and roughness.
pub fn gen_trajectory(
    kind: TrajectoryKind,
    length: f64,
    step: f64,
) -> Result<Vec<(f64, RigidTransform)>, SynthError> {
    gen_trajectory_with(&TrajectoryParams::new(kind, length, step))
}

/// Timestamped sensor poses along the path, heading tangent to it.
///
/// Open paths get `floor(length / step) + 1` poses. A loop is split into
/// `round(length / step)` equal steps and its last pose is the first one.
pub fn gen_trajectory_with(p: &TrajectoryParams) -> Result<Vec<(f64, RigidTransform)>, SynthError> {
    if !(p.step > 0.0) || !(p.length >= 0.0) || !p.length.is_finite() {
        return Err(SynthError::InvalidParameter("step must be positive and length non-negative"));
    }
    if !(p.speed > 0.0) {
        return Err(SynthError::InvalidParameter("speed must be positive"));
    }
    let pose_at = |s: f64| -> RigidTransform {
        match p.kind {
            TrajectoryKind::Straight => RigidTransform::from_translation(Vec3::new(s, 0.0, p.height)),
            TrajectoryKind::Loop => {
                let r = p.length / TAU;
                let phi = s / r;
                RigidTransform::new(
                    Mat3::rot_z(phi),
                    Vec3::new(r * sin(phi), r - r * cos(phi), p.height),
                )
                .expect("rotation about z is proper")
            }
            TrajectoryKind::Rough => {
                let w = TAU * s / p.rough_wavelength;
                let pitch = p.rough_amplitude * sin(w);
                let roll = 0.6 * p.rough_amplitude * sin(0.7 * w + 1.0);
                RigidTransform::new(Mat3::from_euler_zyx(roll, pitch, 0.0), Vec3::new(s, 0.0, p.height))
                    .expect("Euler rotation is proper")
            }
        }
    };
    let mut out = Vec::new();
    match p.kind {
        TrajectoryKind::Loop => {
            let n = (round(p.length / p.step) as usize).max(if p.length > 0.0 { 3 } else { 0 });
            for i in 0..n {
                let s = p.length * i as f64 / n as f64;
                out.push((s / p.speed, pose_at(s)));
            }
            out.push((p.length / p.speed, pose_at(0.0)));
        }
        _ => {
            let n = floor(p.length / p.step + 1e-9) as usize;
            for i in 0..=n {
                let s = i as f64 * p.step;
                out.push((s / p.speed, pose_at(s)));
            }
        }
    }
    Ok(out)
}
