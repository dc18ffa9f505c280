//! Deterministic synthetic forest, lidar, GNSS and IMU generators.
//!
//! Every generator is a pure function of its inputs and seed. Worlds are a
//! flat ground plane with vertical cylindrical trunks, so ray intersections
//! and point-to-surface distances are exact.

mod lidar;
mod scenario;
mod sensors;
mod trajectory;
mod world;

pub use lidar::{gen_scan, LidarModel, TILTED_MOUNT};
pub use scenario::{generate, Scenario, SensorLog};
pub use sensors::{gen_gnss, gen_imu, sub_seed, SensorNoise};
pub use trajectory::{gen_trajectory, gen_trajectory_with, TrajectoryKind, TrajectoryParams};
pub use world::{gen_world, gen_world_with, Extent, Tree, TreeShape, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
