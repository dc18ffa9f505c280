//! Surface normals from the principal axes of k-nearest-neighbor patches.

use alloc::vec::Vec;

use super::kdtree::KdTree;
use super::{PointCloud, RegistrationError};
use crate::geometry::{eig_sym3, SymMat3, Vec3};

/// Neighborhood size used by the mapper.
pub const DEFAULT_NORMAL_K: usize = 15;

/// Patches whose middle eigenvalue falls below this fraction of the largest
/// are treated as collinear and get no normal.
pub const COLLINEAR_RATIO: f64 = 1e-6;

/// Sign convention for estimated normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormalOrientation {
    /// Flip so that `n · direction >= 0`.
    Direction(Vec3),
    /// Flip so that the normal faces the sensor: `n · (viewpoint - p) >= 0`.
    Viewpoint(Vec3),
}

impl Default for NormalOrientation {
    fn default() -> Self {
        NormalOrientation::Direction(Vec3::Z)
    }
}

impl NormalOrientation {
    fn orient(&self, p: Vec3, n: Vec3) -> Vec3 {
        let reference = match *self {
            NormalOrientation::Direction(d) => d,
            NormalOrientation::Viewpoint(v) => v - p,
        };
        if n.dot(reference) < 0.0 {
            -n
        } else {
            n
        }
    }
}

/// Normal of the plane best fitting `patch`, `None` when the patch is
/// collinear (or a single repeated point).
pub fn fit_normal(patch: &[Vec3]) -> Option<Vec3> {
    if patch.len() < 3 {
        return None;
    }
    let inv = 1.0 / patch.len() as f64;
    let centroid = patch.iter().fold(Vec3::ZERO, |acc, &p| acc + p) * inv;
    let mut scatter = SymMat3::ZERO;
    for &p in patch {
        scatter = scatter + SymMat3::outer(p - centroid);
    }
    let e = eig_sym3(&scatter).ok()?;
    let largest = e.values[2];
    if largest <= 0.0 || e.values[1] <= COLLINEAR_RATIO * largest {
        return None;
    }
    e.vector(0).normalized()
}

/// Estimates a normal for every point from its `k` nearest neighbors
/// (the point itself included).
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    orientation: NormalOrientation,
) -> Result<PointCloud, RegistrationError> {
    if k < 3 {
        return Err(RegistrationError::InvalidConfig("normal estimation needs k >= 3"));
    }
    if cloud.len() < k {
        return Err(RegistrationError::NotEnoughPoints {
            needed: k,
            available: cloud.len(),
        });
    }
    let tree = KdTree::new(cloud.points().to_vec());
    let all: Vec<usize> = (0..cloud.len()).collect();
    let normals = normals_for(&tree, cloud.points(), &all, k, orientation);
    cloud.clone().with_normals(normals)
}

/// Normals for `targets` (indices into `points`) using neighbors from `tree`,
/// whose ids must index `points`.
pub(crate) fn normals_for(
    tree: &KdTree,
    points: &[Vec3],
    targets: &[usize],
    k: usize,
    orientation: NormalOrientation,
) -> Vec<Option<Vec3>> {
    let mut patch = Vec::with_capacity(k);
    targets
        .iter()
        .map(|&i| {
            let p = points[i];
            patch.clear();
            patch.extend(tree.knn(p, k).iter().map(|n| points[n.id as usize]));
            fit_normal(&patch).map(|n| orientation.orient(p, n))
        })
        .collect()
}
