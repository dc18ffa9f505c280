use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    gen_gnss, gen_imu, gen_scan, gen_trajectory_with, gen_world_with, sub_seed, Extent, LidarModel, SensorNoise,
    SynthError, TrajectoryKind, TrajectoryParams, TreeShape, World,
};
use crate::geometry::RigidTransform;
use crate::penalties::{GnssFix, ImuAttitude};
use crate::registration::PointCloud;

const STREAM_WORLD: u64 = 0;
const STREAM_SCAN: u64 = 1;
const STREAM_GNSS: u64 = 2;
const STREAM_IMU: u64 = 3;
const STREAM_CALIBRATION: u64 = 4;

/// Everything needed to generate a synthetic run.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub trajectory: TrajectoryParams,
    /// Trees per square meter.
    pub tree_density: f64,
    pub tree_shape: TreeShape,
    /// Trunks closer than this to the path are removed.
    pub path_clearance: f64,
    /// Forest extends this far beyond the path's bounding box.
    pub world_margin: f64,
    pub lidar: LidarModel,
    /// Standard deviation of per-beam elevation calibration errors drawn
    /// from the seed; replaces `lidar.elevation_bias` when positive.
    pub elevation_bias_sigma: f64,
    pub noise: SensorNoise,
    /// Fraction of the path, `[start, end)`, covered by canopy.
    pub canopy: (f64, f64),
    /// A scan is taken at every n-th trajectory pose; GNSS and IMU sample
    /// every pose.
    pub scan_every: usize,
}

impl Scenario {
    pub fn new(kind: TrajectoryKind, length: f64, step: f64) -> Self {
        Scenario {
            seed: 0,
            trajectory: TrajectoryParams::new(kind, length, step),
            tree_density: 0.02,
            tree_shape: TreeShape::default(),
            path_clearance: 1.5,
            world_margin: 30.0,
            lidar: LidarModel::default(),
            elevation_bias_sigma: 0.0,
            noise: SensorNoise::default(),
            canopy: (0.0, 0.0),
            scan_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.lidar.validate()?;
        self.noise.validate()?;
        if self.scan_every == 0 {
            return Err(SynthError::InvalidParameter("scan_every must be positive"));
        }
        if !(self.elevation_bias_sigma >= 0.0) || !(self.path_clearance >= 0.0) || !(self.world_margin >= 0.0) {
            return Err(SynthError::InvalidParameter("scenario distances must be non-negative"));
        }
        Ok(())
    }

    /// Lidar with the seeded calibration errors applied.
    pub fn effective_lidar(&self) -> LidarModel {
        let mut lidar = self.lidar.clone();
        if self.elevation_bias_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.seed, STREAM_CALIBRATION, 0));
            lidar.elevation_bias = (0..lidar.beams)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * self.elevation_bias_sigma
                })
                .collect();
        }
        lidar
    }
}

/// A generated run: the world, ground truth and all sensor streams.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorLog {
    pub world: World,
    /// Sensor poses at every GNSS/IMU sample.
    pub truth: Vec<(f64, RigidTransform)>,
    /// `(time, scan)` in the sensor frame.
    pub scans: Vec<(f64, PointCloud)>,
    pub fixes: Vec<GnssFix>,
    pub attitudes: Vec<ImuAttitude>,
}

impl SensorLog {
    /// Ground-truth poses at scan times.
    pub fn scan_truth(&self, scan_every: usize) -> Vec<(f64, RigidTransform)> {
        self.truth.iter().step_by(scan_every.max(1)).copied().collect()
    }
}

pub fn generate(scenario: &Scenario) -> Result<SensorLog, SynthError> {
    scenario.validate()?;
    let truth = gen_trajectory_with(&scenario.trajectory)?;
    let path: Vec<_> = truth.iter().map(|(_, p)| p.translation()).collect();
    let extent = Extent::around(path.iter().copied(), scenario.world_margin)
        .ok_or(SynthError::InvalidParameter("empty trajectory"))?;
    let world = gen_world_with(
        sub_seed(scenario.seed, STREAM_WORLD, 0),
        extent,
        scenario.tree_density,
        &scenario.tree_shape,
    )?
    .clear_path(&path, scenario.path_clearance);

    let lidar = scenario.effective_lidar();
    let n = truth.len();
    let (c0, c1) = scenario.canopy;
    let mut fixes = Vec::with_capacity(n);
    let mut attitudes = Vec::with_capacity(n);
    let mut scans = Vec::new();
    for (i, (time, pose)) in truth.iter().enumerate() {
        let fraction = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let canopy = fraction >= c0 && fraction < c1;
        let k = i as u64;
        fixes.push(gen_gnss(pose, *time, &scenario.noise, canopy, sub_seed(scenario.seed, STREAM_GNSS, k))?);
        attitudes.push(gen_imu(pose, *time, &scenario.noise, sub_seed(scenario.seed, STREAM_IMU, k)));
        if i % scenario.scan_every == 0 {
            let scan = gen_scan(&world, pose, &lidar, sub_seed(scenario.seed, STREAM_SCAN, k))?;
            scans.push((*time, scan));
        }
    }
    Ok(SensorLog {
        world,
        truth,
        scans,
        fixes,
        attitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        let mut s = Scenario::new(TrajectoryKind::Straight, 6.0, 1.0);
        s.lidar.azimuth_steps = 90;
        s.lidar.max_range = 20.0;
        s.world_margin = 10.0;
        s.scan_every = 3;
        s
    }

    #[test]
    fn streams_line_up() {
        let log = generate(&small()).unwrap();
        assert_eq!(log.truth.len(), 7);
        assert_eq!(log.fixes.len(), 7);
        assert_eq!(log.attitudes.len(), 7);
        assert_eq!(log.scans.len(), 3);
        assert_eq!(log.scans[1].0, 3.0);
        assert!(log.scans.iter().all(|(_, s)| !s.is_empty()));
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let mut other = small();
        other.seed = 1;
        assert_ne!(generate(&small()).unwrap().fixes, generate(&other).unwrap().fixes);
    }

    #[test]
    fn calibration_errors_follow_seed() {
        let mut s = small();
        s.elevation_bias_sigma = 0.001;
        let lidar = s.effective_lidar();
        assert_eq!(lidar.elevation_bias.len(), 16);
        assert_eq!(lidar, s.effective_lidar());
    }
}
