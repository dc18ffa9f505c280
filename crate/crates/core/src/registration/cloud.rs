use alloc::vec::Vec;

use super::RegistrationError;
use crate::geometry::{RigidTransform, SymMat3, Vec3};

/// Unit-norm tolerance for stored normals.
pub const NORMAL_TOLERANCE: f64 = 1e-9;

/// Positions with optional per-point normals and covariances.
///
/// A normal slot holding `None` marks a point whose neighborhood was too
/// degenerate to fit a plane; such points take no part in matching.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Option<Vec3>>>,
    covariances: Option<Vec<SymMat3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            normals: None,
            covariances: None,
        }
    }

    pub fn with_normals(mut self, normals: Vec<Option<Vec3>>) -> Result<Self, RegistrationError> {
        if normals.len() != self.points.len() {
            return Err(RegistrationError::MismatchedLengths);
        }
        if normals
            .iter()
            .flatten()
            .any(|n| !n.is_finite() || (n.norm() - 1.0).abs() > NORMAL_TOLERANCE)
        {
            return Err(RegistrationError::InvalidNormal);
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_covariances(mut self, covs: Vec<SymMat3>) -> Result<Self, RegistrationError> {
        if covs.len() != self.points.len() {
            return Err(RegistrationError::MismatchedLengths);
        }
        if covs.iter().any(|c| !c.is_positive_definite()) {
            return Err(RegistrationError::Geometry(
                crate::geometry::GeometryError::DegenerateCovariance,
            ));
        }
        self.covariances = Some(covs);
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Option<Vec3>]> {
        self.normals.as_deref()
    }

    pub fn covariances(&self) -> Option<&[SymMat3]> {
        self.covariances.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    /// Normal of point `i`, if normals exist and this one is valid.
    #[inline]
    pub fn normal(&self, i: usize) -> Option<Vec3> {
        self.normals.as_ref().and_then(|n| n[i])
    }

    pub fn valid_normal_count(&self) -> usize {
        self.normals
            .as_ref()
            .map_or(0, |n| n.iter().filter(|n| n.is_some()).count())
    }

    /// Rigidly moves every point; normals and covariances are rotated along.
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|&p| t.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| n.map(|n| t.apply_rotation(n))).collect()),
            covariances: self
                .covariances
                .as_ref()
                .map(|cs| cs.iter().map(|c| c.rotated(t.rotation())).collect()),
        }
    }

    /// Keeps the points for which `keep` returns true, in order.
    pub fn filtered(&self, mut keep: impl FnMut(usize, Vec3) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i, self.points[i])).collect();
        self.select(&idx)
    }

    /// Sub-cloud made of the given indices, in the given order.
    pub fn select(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| idx.iter().map(|&i| ns[i]).collect()),
            covariances: self
                .covariances
                .as_ref()
                .map(|cs| idx.iter().map(|&i| cs[i]).collect()),
        }
    }

    /// Appends points with their normals. Covariances, if any, are dropped
    /// because new points carry none.
    pub(crate) fn extend_with_normals(&mut self, points: &[Vec3], normals: &[Option<Vec3>]) {
        debug_assert_eq!(points.len(), normals.len());
        let old_len = self.points.len();
        self.points.extend_from_slice(points);
        let ns = self
            .normals
            .get_or_insert_with(|| alloc::vec![None; old_len]);
        ns.extend_from_slice(normals);
        self.covariances = None;
    }

    /// Axis-aligned bounding box, `None` when empty.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(
            self.points
                .iter()
                .fold((first, first), |(lo, hi), &p| (lo.component_min(p), hi.component_max(p))),
        )
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }
}

impl From<Vec<Vec3>> for PointCloud {
    fn from(points: Vec<Vec3>) -> Self {
        PointCloud::new(points)
    }
}
