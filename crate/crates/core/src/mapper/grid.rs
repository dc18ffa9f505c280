//! Spatial hashes over the growing map.

use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::geometry::Vec3;
use crate::math::floor;

const NONE: u32 = u32::MAX;

/// Voxel hash with cell size equal to the query radius, so an exact
/// radius test only visits the 27 surrounding cells.
#[derive(Clone, Debug)]
pub(crate) struct RadiusHash {
    cell: f64,
    heads: HashMap<(i32, i32, i32), u32>,
    next: Vec<u32>,
    points: Vec<Vec3>,
}

impl RadiusHash {
    pub(crate) fn new(radius: f64) -> Self {
        RadiusHash {
            cell: radius,
            heads: HashMap::new(),
            next: Vec::new(),
            points: Vec::new(),
        }
    }

    fn key(&self, p: Vec3) -> (i32, i32, i32) {
        (
            floor(p.x / self.cell) as i32,
            floor(p.y / self.cell) as i32,
            floor(p.z / self.cell) as i32,
        )
    }

    pub(crate) fn len(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn insert(&mut self, p: Vec3) {
        let id = self.points.len() as u32;
        let head = self.heads.entry(self.key(p)).or_insert(NONE);
        self.next.push(*head);
        *head = id;
        self.points.push(p);
    }

    /// Whether any registered point lies within `radius` (inclusive) of `q`.
    pub(crate) fn any_within(&self, q: Vec3) -> bool {
        let r2 = self.cell * self.cell;
        let (kx, ky, kz) = self.key(q);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(&head) = self.heads.get(&(kx + dx, ky + dy, kz + dz)) else {
                        continue;
                    };
                    let mut i = head;
                    while i != NONE {
                        if self.points[i as usize].distance_squared(q) <= r2 {
                            return true;
                        }
                        i = self.next[i as usize];
                    }
                }
            }
        }
        false
    }
}

/// Vertical columns of a coarse horizontal grid, for ball queries whose
/// radius is large compared with the point spacing.
#[derive(Clone, Debug)]
pub(crate) struct ColumnGrid {
    cell: f64,
    columns: HashMap<(i32, i32), Vec<u32>>,
}

pub(crate) const COLUMN_CELL: f64 = 8.0;

impl ColumnGrid {
    pub(crate) fn new() -> Self {
        ColumnGrid {
            cell: COLUMN_CELL,
            columns: HashMap::new(),
        }
    }

    fn key(&self, x: f64, y: f64) -> (i32, i32) {
        (floor(x / self.cell) as i32, floor(y / self.cell) as i32)
    }

    pub(crate) fn insert(&mut self, id: u32, p: Vec3) {
        self.columns.entry(self.key(p.x, p.y)).or_default().push(id);
    }

    /// Indices of the points within `radius` of `center`, ascending.
    pub(crate) fn ball(&self, points: &[Vec3], center: Vec3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let (x0, y0) = self.key(center.x - radius, center.y - radius);
        let (x1, y1) = self.key(center.x + radius, center.y + radius);
        let mut out = Vec::new();
        if (x1 - x0 + 1) as i64 * (y1 - y0 + 1) as i64 > self.columns.len() as i64 {
            // a huge ball: walking the occupied columns is cheaper
            for ids in self.columns.values() {
                out.extend(ids.iter().map(|&i| i as usize).filter(|&i| points[i].distance_squared(center) <= r2));
            }
        } else {
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    if let Some(ids) = self.columns.get(&(cx, cy)) {
                        out.extend(
                            ids.iter()
                                .map(|&i| i as usize)
                                .filter(|&i| points[i].distance_squared(center) <= r2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_hash_is_inclusive() {
        let mut h = RadiusHash::new(0.05);
        h.insert(Vec3::ZERO);
        assert!(h.any_within(Vec3::new(0.05, 0.0, 0.0)));
        assert!(!h.any_within(Vec3::new(0.0501, 0.0, 0.0)));
        assert!(h.any_within(Vec3::new(-0.03, -0.03, 0.02)));
    }

    #[test]
    fn ball_matches_linear_scan() {
        let mut pts = Vec::new();
        let mut g = ColumnGrid::new();
        for i in 0..2000 {
            let f = i as f64;
            let p = Vec3::new((f * 0.37) % 60.0 - 30.0, (f * 0.91) % 50.0 - 25.0, (f * 0.13) % 4.0);
            g.insert(i, p);
            pts.push(p);
        }
        for (c, r) in [(Vec3::ZERO, 10.0), (Vec3::new(12.0, -3.0, 1.0), 7.5), (Vec3::ZERO, 500.0)] {
            let want: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].distance(c) <= r).collect();
            assert_eq!(g.ball(&pts, c, r), want);
        }
    }
}
