use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{SynthError, World};
use crate::geometry::{Mat3, RigidTransform, Vec3};
use crate::math::{cos, sin, TAU};
use crate::registration::PointCloud;

/// A spinning multi-beam lidar.
///
/// Beams are spread evenly over `[min_elevation, max_elevation]` and fire at
/// `azimuth_steps` evenly spaced azimuths. The spin axis is the sensor `z`
/// axis tilted by `tilt` about `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct LidarModel {
    pub max_range: f64,
    /// Returns closer than this are dropped (self-occlusion by the platform).
    pub min_range: f64,
    pub beams: usize,
    pub min_elevation: f64,
    pub max_elevation: f64,
    pub azimuth_steps: usize,
    pub tilt: f64,
    pub range_noise_sigma: f64,
    /// Per-beam difference between the true and the assumed elevation,
    /// radians. Empty means a perfectly calibrated sensor.
    pub elevation_bias: Vec<f64>,
}

impl Default for LidarModel {
    fn default() -> Self {
        LidarModel {
            max_range: 100.0,
            min_range: 0.5,
            beams: 16,
            min_elevation: -15f64.to_radians(),
            max_elevation: 15f64.to_radians(),
            azimuth_steps: 900,
            tilt: TILTED_MOUNT,
            range_noise_sigma: 0.01,
            elevation_bias: Vec::new(),
        }
    }
}

/// Default mounting tilt of the spin axis.
pub const TILTED_MOUNT: f64 = 27.0 * core::f64::consts::PI / 180.0;

impl LidarModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.max_range > 0.0) || !self.max_range.is_finite() {
            return Err(SynthError::InvalidParameter("max_range must be positive"));
        }
        if !(self.min_range >= 0.0) || self.min_range >= self.max_range {
            return Err(SynthError::InvalidParameter("min_range must lie in [0, max_range)"));
        }
        if self.beams == 0 || self.azimuth_steps == 0 {
            return Err(SynthError::InvalidParameter("beams and azimuth_steps must be positive"));
        }
        if !(self.range_noise_sigma >= 0.0) {
            return Err(SynthError::InvalidParameter("range noise must be non-negative"));
        }
        if !self.elevation_bias.is_empty() && self.elevation_bias.len() != self.beams {
            return Err(SynthError::InvalidParameter("elevation_bias needs one entry per beam"));
        }
        Ok(())
    }

    /// Assumed elevation of beam `b`.
    pub fn elevation(&self, b: usize) -> f64 {
        if self.beams == 1 {
            0.5 * (self.min_elevation + self.max_elevation)
        } else {
            self.min_elevation + (self.max_elevation - self.min_elevation) * b as f64 / (self.beams - 1) as f64
        }
    }

    fn direction(&self, mount: &Mat3, elevation: f64, azimuth: f64) -> Vec3 {
        let ce = cos(elevation);
        *mount * Vec3::new(ce * cos(azimuth), ce * sin(azimuth), sin(elevation))
    }
}

/// Simulates one scan from `pose` (sensor to world). Points are in the
/// sensor frame, ordered by azimuth then beam.
pub fn gen_scan(world: &World, pose: &RigidTransform, lidar: &LidarModel, seed: u64) -> Result<PointCloud, SynthError> {
    lidar.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mount = Mat3::rot_y(lidar.tilt);
    let origin = pose.translation();
    let trees = world.trees_near(origin, lidar.max_range);
    let mut points = Vec::new();
    for j in 0..lidar.azimuth_steps {
        let azimuth = TAU * j as f64 / lidar.azimuth_steps as f64;
        for b in 0..lidar.beams {
            let assumed = lidar.elevation(b);
            let bias = lidar.elevation_bias.get(b).copied().unwrap_or(0.0);
            let actual = lidar.direction(&mount, assumed + bias, azimuth);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let Some(range) = world.raycast_among(&trees, origin, pose.apply_rotation(actual), lidar.max_range)
            else {
                continue;
            };
            if range < lidar.min_range {
                continue;
            }
            let measured = range + lidar.range_noise_sigma * noise;
            let reported = if bias == 0.0 { actual } else { lidar.direction(&mount, assumed, azimuth) };
            points.push(reported * measured);
        }
    }
    Ok(PointCloud::new(points))
}
