//! Nearest-neighbor matching, outlier weighting, the point-to-Gaussian
//! decomposition, the linearized SE(3) solver and penalty-augmented ICP.

mod cloud;
mod gaussian;
mod icp;
pub mod kdtree;
mod matching;
mod normals;
mod solver;
mod weighting;

pub use cloud::{PointCloud, NORMAL_TOLERANCE};
pub use gaussian::{decompose_gaussian, gaussian_to_gaussian_cov, PlaneConstraint};
pub use icp::{
    build_constraints, icp, icp_with_index, objective, penalty_constraints, point_constraints,
    IcpConfig, IcpDiagnostics, Penalty, DEFAULT_SENSOR_SIGMA,
};
pub use matching::{build_index, match_points, Match, NeighborIndex};
pub use normals::{estimate_normals, fit_normal, NormalOrientation, COLLINEAR_RATIO, DEFAULT_NORMAL_K};
pub(crate) use normals::normals_for;
pub use solver::{solve_constraints, TwistAxes, MAX_CONDITION_NUMBER};
pub use weighting::{weight_outliers, OutlierFilter};

use crate::geometry::GeometryError;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RegistrationError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("need at least {needed} points, got {available}")]
    NotEnoughPoints { needed: usize, available: usize },
    #[error("per-point attribute length differs from point count")]
    MismatchedLengths,
    #[error("normal is not unit length")]
    InvalidNormal,
    #[error("map has no normals")]
    MissingNormals,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("rank-deficient alignment (condition {condition:.3e}); unconstrained: {unconstrained}")]
    RankDeficient { unconstrained: TwistAxes, condition: f64 },
    #[error("no surviving matches between scan and map")]
    EmptyOverlap,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
