use alloc::vec::Vec;

use super::kdtree::KdTree;
use super::{PointCloud, RegistrationError};
use crate::geometry::{RigidTransform, Vec3};

/// Exact nearest-neighbor index over (a subset of) a cloud's points.
///
/// Reported indices always refer to positions in the indexed cloud.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    tree: KdTree,
}

impl NeighborIndex {
    /// Indexes every point of `cloud`.
    pub fn build(cloud: &PointCloud) -> Result<Self, RegistrationError> {
        NeighborIndex::from_points(cloud.points())
    }

    pub fn from_points(points: &[Vec3]) -> Result<Self, RegistrationError> {
        if points.is_empty() {
            return Err(RegistrationError::EmptyCloud);
        }
        Ok(NeighborIndex {
            tree: KdTree::new(points.to_vec()),
        })
    }

    /// Indexes only the points that carry a valid normal; those are the only
    /// usable plane anchors during registration.
    pub fn build_with_normals(cloud: &PointCloud) -> Result<Self, RegistrationError> {
        let normals = cloud.normals().ok_or(RegistrationError::MissingNormals)?;
        let ids: Vec<u32> = (0..cloud.len() as u32)
            .filter(|&i| normals[i as usize].is_some())
            .collect();
        if ids.is_empty() {
            return Err(RegistrationError::EmptyCloud);
        }
        let pts = ids.iter().map(|&i| cloud.points()[i as usize]).collect();
        Ok(NeighborIndex {
            tree: KdTree::with_ids(pts, ids),
        })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Nearest indexed point: `(cloud index, squared distance)`.
    pub fn nearest(&self, q: Vec3) -> (usize, f64) {
        let n = self.tree.nearest(q).expect("index is never empty");
        (n.id as usize, n.distance_squared)
    }

    /// The exact `k` nearest points, closest first.
    pub fn query(&self, q: Vec3, k: usize) -> Vec<(usize, f64)> {
        self.tree
            .knn(q, k)
            .into_iter()
            .map(|n| (n.id as usize, n.distance_squared))
            .collect()
    }

    /// All indexed points within `radius` (inclusive).
    pub fn within_radius(&self, q: Vec3, radius: f64) -> Vec<(usize, f64)> {
        self.tree
            .within_radius(q, radius)
            .into_iter()
            .map(|n| (n.id as usize, n.distance_squared))
            .collect()
    }
}

/// Exact nearest-neighbor index over a cloud.
pub fn build_index(cloud: &PointCloud) -> Result<NeighborIndex, RegistrationError> {
    NeighborIndex::build(cloud)
}

/// A scan point paired with its nearest map point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match {
    pub scan_index: usize,
    pub map_index: usize,
    pub squared_distance: f64,
}

/// One match per scan point: the indexed map point nearest to `t · p`.
pub fn match_points(scan: &PointCloud, index: &NeighborIndex, t: &RigidTransform) -> Vec<Match> {
    scan.points()
        .iter()
        .enumerate()
        .map(|(scan_index, &p)| {
            let (map_index, squared_distance) = index.nearest(t.apply(p));
            Match {
                scan_index,
                map_index,
                squared_distance,
            }
        })
        .collect()
}
