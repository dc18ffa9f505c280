//! Penalty-constrained point-to-Gaussian ICP and incremental lidar mapping.
//!
//! The crate is `no_std` (it needs `alloc`). IO, file formats and the
//! command-line runner live in the `forestmap` crate.

#![no_std]

extern crate alloc;

pub mod geometry;
pub mod mapper;
pub mod penalties;
pub mod registration;
pub mod synth;
mod math;

pub use geometry::{GeometryError, Mat3, Quaternion, RigidTransform, SymMat3, Vec3};
pub use math::wrap_angle;
