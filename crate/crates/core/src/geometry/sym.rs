use core::ops::Add;

use super::eigen::jacobi_eigen;
use super::{GeometryError, Mat3, Vec3};
use crate::math::sqrt;

/// Symmetric 3x3 matrix stored by its six independent entries.
///
/// Covariances are expressed in meters squared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

/// Eigen-decomposition of a [`SymMat3`]: `W = N diag(values) Nᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEigen {
    /// Ascending.
    pub values: [f64; 3],
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: Mat3,
}

impl SymEigen {
    pub fn vector(&self, i: usize) -> Vec3 {
        self.vectors.col(i)
    }
}

impl SymMat3 {
    pub const IDENTITY: SymMat3 = SymMat3::diag(1.0, 1.0, 1.0);
    pub const ZERO: SymMat3 = SymMat3::diag(0.0, 0.0, 0.0);

    pub const fn new(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        SymMat3 { xx, yy, zz, xy, xz, yz }
    }

    pub const fn diag(xx: f64, yy: f64, zz: f64) -> Self {
        SymMat3::new(xx, yy, zz, 0.0, 0.0, 0.0)
    }

    pub fn isotropic(v: f64) -> Self {
        SymMat3::diag(v, v, v)
    }

    /// Symmetric part of a dense matrix.
    pub fn from_mat3(m: &Mat3) -> Self {
        let a = &m.m;
        SymMat3::new(
            a[0][0],
            a[1][1],
            a[2][2],
            0.5 * (a[0][1] + a[1][0]),
            0.5 * (a[0][2] + a[2][0]),
            0.5 * (a[1][2] + a[2][1]),
        )
    }

    pub fn to_mat3(&self) -> Mat3 {
        Mat3::from_rows([
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ])
    }

    /// `v vᵀ`.
    pub fn outer(v: Vec3) -> Self {
        SymMat3::new(v.x * v.x, v.y * v.y, v.z * v.z, v.x * v.y, v.x * v.z, v.y * v.z)
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMat3::new(
            self.xx * s,
            self.yy * s,
            self.zz * s,
            self.xy * s,
            self.xz * s,
            self.yz * s,
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        sqrt(
            self.xx * self.xx
                + self.yy * self.yy
                + self.zz * self.zz
                + 2.0 * (self.xy * self.xy + self.xz * self.xz + self.yz * self.yz),
        )
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.xx * v.x + self.xy * v.y + self.xz * v.z,
            self.xy * v.x + self.yy * v.y + self.yz * v.z,
            self.xz * v.x + self.yz * v.y + self.zz * v.z,
        )
    }

    /// `R W Rᵀ`, the covariance expressed in a rotated frame.
    pub fn rotated(&self, r: &Mat3) -> SymMat3 {
        SymMat3::from_mat3(&(*r * self.to_mat3() * r.transpose()))
    }

    pub fn eigen(&self) -> Result<SymEigen, GeometryError> {
        eig_sym3(self)
    }

    /// Lower Cholesky factor; fails unless strictly positive definite.
    pub fn cholesky(&self) -> Result<Mat3, GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        // pivots are compared against the scale of the matrix so that a
        // numerically singular covariance is reported rather than inverted
        let tiny = 1e-14 * self.xx.abs().max(self.yy.abs()).max(self.zz.abs());
        let l00sq = self.xx;
        if l00sq <= tiny || l00sq <= 0.0 {
            return Err(GeometryError::DegenerateCovariance);
        }
        let l00 = sqrt(l00sq);
        let l10 = self.xy / l00;
        let l20 = self.xz / l00;
        let l11sq = self.yy - l10 * l10;
        if l11sq <= tiny || l11sq <= 0.0 {
            return Err(GeometryError::DegenerateCovariance);
        }
        let l11 = sqrt(l11sq);
        let l21 = (self.yz - l20 * l10) / l11;
        let l22sq = self.zz - l20 * l20 - l21 * l21;
        if l22sq <= tiny || l22sq <= 0.0 {
            return Err(GeometryError::DegenerateCovariance);
        }
        Ok(Mat3::from_rows([
            [l00, 0.0, 0.0],
            [l10, l11, 0.0],
            [l20, l21, sqrt(l22sq)],
        ]))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Inverse of a positive-definite matrix.
    pub fn inverse(&self) -> Result<SymMat3, GeometryError> {
        let l = self.cholesky()?;
        let li = lower_inverse(&l);
        // W⁻¹ = L⁻ᵀ L⁻¹
        Ok(SymMat3::from_mat3(&(li.transpose() * li)))
    }

    /// Symmetric square root `S` with `S S = W` for positive semi-definite `W`.
    ///
    /// Negative eigenvalues (numerical noise) are clamped to zero.
    pub fn sqrt_psd(&self) -> Result<Mat3, GeometryError> {
        let e = self.eigen()?;
        let d = Vec3::new(
            sqrt(e.values[0].max(0.0)),
            sqrt(e.values[1].max(0.0)),
            sqrt(e.values[2].max(0.0)),
        );
        Ok(e.vectors * Mat3::diag(d) * e.vectors.transpose())
    }
}

impl Add for SymMat3 {
    type Output = SymMat3;
    fn add(self, o: SymMat3) -> SymMat3 {
        SymMat3::new(
            self.xx + o.xx,
            self.yy + o.yy,
            self.zz + o.zz,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yz + o.yz,
        )
    }
}

fn lower_inverse(l: &Mat3) -> Mat3 {
    let a = &l.m;
    let i00 = 1.0 / a[0][0];
    let i11 = 1.0 / a[1][1];
    let i22 = 1.0 / a[2][2];
    let i10 = -a[1][0] * i00 * i11;
    let i21 = -a[2][1] * i11 * i22;
    let i20 = -(a[2][0] * i00 + a[2][1] * i10) * i22;
    Mat3::from_rows([[i00, 0.0, 0.0], [i10, i11, 0.0], [i20, i21, i22]])
}

/// Eigen-decomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues are ascending; eigenvectors are orthonormal columns. Within a
/// repeated eigenvalue any orthonormal basis of the eigenspace may be returned.
pub fn eig_sym3(w: &SymMat3) -> Result<SymEigen, GeometryError> {
    let a = w.to_mat3().m;
    let (values, vecs) = jacobi_eigen(&a).ok_or(GeometryError::NonFinite)?;
    let mut vectors = Mat3::from_rows(vecs);
    // keep a right-handed basis so the columns can double as a rotation
    if vectors.determinant() < 0.0 {
        for row in vectors.m.iter_mut() {
            row[2] = -row[2];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Squared Mahalanobis distance `eᵀ W⁻¹ e`.
///
/// Solved by forward substitution on the Cholesky factor, so no explicit
/// inverse is formed.
pub fn mahalanobis_sq(e: Vec3, w: &SymMat3) -> Result<f64, GeometryError> {
    let l = w.cholesky()?;
    let a = &l.m;
    let y0 = e.x / a[0][0];
    let y1 = (e.y - a[1][0] * y0) / a[1][1];
    let y2 = (e.z - a[2][0] * y0 - a[2][1] * y1) / a[2][2];
    Ok(y0 * y0 + y1 * y1 + y2 * y2)
}
