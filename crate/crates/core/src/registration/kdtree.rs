//! Exact k-d tree over 3D points.
//!
//! The tree is implicit: points are permuted so that every sub-range
//! `[lo, hi)` has its splitting point at `mid = (lo + hi) / 2`, with all
//! points of `[lo, mid)` at or below it along the split axis and all points
//! of `(mid, hi)` at or above it. Ranges of at most `LEAF_SIZE` points are
//! scanned linearly.
//!
//! Ties in distance resolve to the lowest point id, which makes every query
//! agree exactly with a linear scan.

use alloc::vec::Vec;

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    ids: Vec<u32>,
    axes: Vec<u8>,
}

/// A neighbor returned by a query: caller-visible point id and squared distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub distance_squared: f64,
}

#[inline]
fn better(d2: f64, id: u32, best_d2: f64, best_id: u32) -> bool {
    d2 < best_d2 || (d2 == best_d2 && id < best_id)
}

impl KdTree {
    /// Builds a tree; point `i` of the input gets id `ids[i]`.
    pub fn with_ids(points: Vec<Vec3>, ids: Vec<u32>) -> Self {
        assert_eq!(points.len(), ids.len());
        let n = points.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut axes = alloc::vec![0u8; n];
        build(&points, &mut order, 0, n, &mut axes);
        let permuted_points = order.iter().map(|&i| points[i as usize]).collect();
        let permuted_ids = order.iter().map(|&i| ids[i as usize]).collect();
        KdTree {
            points: permuted_points,
            ids: permuted_ids,
            axes,
        }
    }

    /// Builds a tree whose ids are the input positions.
    pub fn new(points: Vec<Vec3>) -> Self {
        let ids = (0..points.len() as u32).collect();
        KdTree::with_ids(points, ids)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The nearest point, or `None` for an empty tree.
    pub fn nearest(&self, q: Vec3) -> Option<Neighbor> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Neighbor {
            id: u32::MAX,
            distance_squared: f64::INFINITY,
        };
        self.nearest_in(q, 0, self.points.len(), &mut best);
        Some(best)
    }

    fn nearest_in(&self, q: Vec3, lo: usize, hi: usize, best: &mut Neighbor) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                let d2 = q.distance_squared(self.points[i]);
                if better(d2, self.ids[i], best.distance_squared, best.id) {
                    *best = Neighbor {
                        id: self.ids[i],
                        distance_squared: d2,
                    };
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let p = self.points[mid];
        let diff = q.get(axis) - p.get(axis);
        let d2 = q.distance_squared(p);
        if better(d2, self.ids[mid], best.distance_squared, best.id) {
            *best = Neighbor {
                id: self.ids[mid],
                distance_squared: d2,
            };
        }
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(q, first.0, first.1, best);
        if diff * diff <= best.distance_squared {
            self.nearest_in(q, second.0, second.1, best);
        }
    }

    /// The `k` nearest points sorted by increasing distance (ties by id).
    pub fn knn(&self, q: Vec3, k: usize) -> Vec<Neighbor> {
        let mut out = Vec::with_capacity(k + 1);
        if k == 0 || self.points.is_empty() {
            return out;
        }
        self.knn_in(q, k, 0, self.points.len(), &mut out);
        out
    }

    #[inline]
    fn knn_bound(out: &[Neighbor], k: usize) -> f64 {
        if out.len() < k {
            f64::INFINITY
        } else {
            out[out.len() - 1].distance_squared
        }
    }

    #[inline]
    fn knn_offer(out: &mut Vec<Neighbor>, k: usize, id: u32, d2: f64) {
        if out.len() == k {
            let last = out[k - 1];
            if !better(d2, id, last.distance_squared, last.id) {
                return;
            }
            out.pop();
        }
        let pos = out
            .iter()
            .position(|n| better(d2, id, n.distance_squared, n.id))
            .unwrap_or(out.len());
        out.insert(pos, Neighbor { id, distance_squared: d2 });
    }

    fn knn_in(&self, q: Vec3, k: usize, lo: usize, hi: usize, out: &mut Vec<Neighbor>) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                let d2 = q.distance_squared(self.points[i]);
                Self::knn_offer(out, k, self.ids[i], d2);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let p = self.points[mid];
        let diff = q.get(axis) - p.get(axis);
        Self::knn_offer(out, k, self.ids[mid], q.distance_squared(p));
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_in(q, k, first.0, first.1, out);
        if diff * diff <= Self::knn_bound(out, k) {
            self.knn_in(q, k, second.0, second.1, out);
        }
    }

    /// Ids of all points with squared distance `<= radius²`, unsorted.
    pub fn within_radius(&self, q: Vec3, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_in(q, radius * radius, 0, self.points.len(), &mut out);
        }
        out
    }

    /// True if any point lies within `radius` (inclusive) of `q`.
    pub fn any_within(&self, q: Vec3, radius: f64) -> bool {
        match self.nearest(q) {
            Some(n) => n.distance_squared <= radius * radius,
            None => false,
        }
    }

    fn radius_in(&self, q: Vec3, r2: f64, lo: usize, hi: usize, out: &mut Vec<Neighbor>) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                let d2 = q.distance_squared(self.points[i]);
                if d2 <= r2 {
                    out.push(Neighbor {
                        id: self.ids[i],
                        distance_squared: d2,
                    });
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let p = self.points[mid];
        let diff = q.get(axis) - p.get(axis);
        let d2 = q.distance_squared(p);
        if d2 <= r2 {
            out.push(Neighbor {
                id: self.ids[mid],
                distance_squared: d2,
            });
        }
        if diff <= 0.0 || diff * diff <= r2 {
            self.radius_in(q, r2, lo, mid, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.radius_in(q, r2, mid + 1, hi, out);
        }
    }
}

fn build(points: &[Vec3], order: &mut [u32], lo: usize, hi: usize, axes: &mut [u8]) {
    if hi - lo <= LEAF_SIZE {
        return;
    }
    let (mut min, mut max) = (points[order[lo] as usize], points[order[lo] as usize]);
    for &i in &order[lo..hi] {
        let p = points[i as usize];
        min = min.component_min(p);
        max = max.component_max(p);
    }
    let ext = max - min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        let pa = points[a as usize].get(axis);
        let pb = points[b as usize].get(axis);
        pa.total_cmp(&pb).then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    build(points, order, lo, mid, axes);
    build(points, order, mid + 1, hi, axes);
}
