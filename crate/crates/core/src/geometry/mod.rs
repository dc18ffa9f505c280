//! Fixed-size vectors, matrices, rigid transforms and the symmetric eigen-solver.

mod eigen;
mod mat3;
mod sym;
mod transform;
mod vec3;

pub use eigen::{jacobi_eigen, JACOBI_TOLERANCE};
pub use mat3::{Mat3, Quaternion};
pub use sym::{eig_sym3, mahalanobis_sq, SymEigen, SymMat3};
pub use transform::{apply, compose, RigidTransform, REORTHONORMALIZE_THRESHOLD, ROTATION_TOLERANCE};
pub use vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("non-finite input")]
    NonFinite,
    #[error("degenerate covariance: matrix is not positive definite")]
    DegenerateCovariance,
    #[error("matrix is not a proper rotation")]
    NotARotation,
}
