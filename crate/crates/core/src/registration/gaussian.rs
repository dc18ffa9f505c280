//! Point-to-Gaussian errors rewritten as point-to-plane errors.
//!
//! With `W = N Λ Nᵀ`, the Mahalanobis term `eᵀ W⁻¹ e` equals
//! `Σᵢ (1/λᵢ) (eᵀ nᵢ)²`: three plane projections along the eigenvectors,
//! each weighted by the inverse eigenvalue. Any point-to-plane minimizer can
//! then absorb Gaussian terms unchanged.

use super::RegistrationError;
use crate::geometry::{eig_sym3, GeometryError, RigidTransform, SymMat3, Vec3};

/// A weighted point-to-plane term `weight · ((q - p)ᵀ n)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneConstraint {
    pub normal: Vec3,
    pub weight: f64,
    pub map_point: Vec3,
    pub scan_point: Vec3,
}

impl PlaneConstraint {
    /// Signed projected error `(q - p)ᵀ n`.
    #[inline]
    pub fn projected_error(&self) -> f64 {
        (self.map_point - self.scan_point).dot(self.normal)
    }

    #[inline]
    pub fn cost(&self) -> f64 {
        let e = self.projected_error();
        self.weight * e * e
    }
}

/// Splits a Gaussian pair into three plane constraints along the
/// eigenvectors of `w`, ordered by ascending eigenvalue.
pub fn decompose_gaussian(
    map_point: Vec3,
    scan_point: Vec3,
    w: &SymMat3,
) -> Result<[PlaneConstraint; 3], RegistrationError> {
    // positive definiteness is checked on the Cholesky factor so the
    // eigenvalues below are safe to invert
    w.cholesky()?;
    let e = eig_sym3(w)?;
    if e.values[0] <= 0.0 {
        return Err(GeometryError::DegenerateCovariance.into());
    }
    let make = |i: usize| PlaneConstraint {
        normal: e.vector(i),
        weight: 1.0 / e.values[i],
        map_point,
        scan_point,
    };
    Ok([make(0), make(1), make(2)])
}

/// Covariance of a Gaussian-to-Gaussian pair: `Σ_map + R Σ_scan Rᵀ`.
pub fn gaussian_to_gaussian_cov(map_cov: &SymMat3, scan_cov: &SymMat3, t: &RigidTransform) -> SymMat3 {
    *map_cov + scan_cov.rotated(t.rotation())
}
