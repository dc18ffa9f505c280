use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::SynthError;
use crate::geometry::Vec3;
use crate::math::{ceil, floor, hypot, sqrt};

/// A vertical cylinder standing on the ground.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tree {
    /// Trunk axis position; `z` is ignored, trunks start at ground height.
    pub center: Vec3,
    pub radius: f64,
    pub height: f64,
}

/// Axis-aligned horizontal rectangle, meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Extent {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Extent { min_x, min_y, max_x, max_y }
    }

    /// Square of side `size` centered on the origin.
    pub fn square(size: f64) -> Self {
        let h = 0.5 * size;
        Extent::new(-h, -h, h, h)
    }

    pub fn area(&self) -> f64 {
        (self.max_x - self.min_x).max(0.0) * (self.max_y - self.min_y).max(0.0)
    }

    /// Smallest extent holding all `points`, grown by `margin`.
    pub fn around(points: impl IntoIterator<Item = Vec3>, margin: f64) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut e = Extent::new(first.x, first.y, first.x, first.y);
        for p in it {
            e.min_x = e.min_x.min(p.x);
            e.min_y = e.min_y.min(p.y);
            e.max_x = e.max_x.max(p.x);
            e.max_y = e.max_y.max(p.y);
        }
        Some(Extent::new(e.min_x - margin, e.min_y - margin, e.max_x + margin, e.max_y + margin))
    }
}

/// Trunk dimensions drawn uniformly from these ranges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeShape {
    pub radius: (f64, f64),
    pub height: (f64, f64),
    /// Minimum gap between neighbouring trunk surfaces.
    pub min_gap: f64,
}

impl Default for TreeShape {
    fn default() -> Self {
        TreeShape {
            radius: (0.1, 0.35),
            height: (6.0, 14.0),
            min_gap: 0.5,
        }
    }
}

const GRID_CELL: f64 = 4.0;

/// Uniform bucket grid over trunk centers for surface-distance queries.
#[derive(Clone, Debug, PartialEq)]
struct TreeGrid {
    origin_x: f64,
    origin_y: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
    max_radius: f64,
}

impl TreeGrid {
    fn build(trees: &[Tree]) -> Self {
        let Some(ext) = Extent::around(trees.iter().map(|t| t.center), GRID_CELL) else {
            return TreeGrid {
                origin_x: 0.0,
                origin_y: 0.0,
                nx: 0,
                ny: 0,
                cells: Vec::new(),
                max_radius: 0.0,
            };
        };
        let nx = (ceil((ext.max_x - ext.min_x) / GRID_CELL) as usize).max(1);
        let ny = (ceil((ext.max_y - ext.min_y) / GRID_CELL) as usize).max(1);
        let mut grid = TreeGrid {
            origin_x: ext.min_x,
            origin_y: ext.min_y,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
            max_radius: trees.iter().map(|t| t.radius).fold(0.0, f64::max),
        };
        for (i, t) in trees.iter().enumerate() {
            let (cx, cy) = grid.cell_of(t.center.x, t.center.y);
            grid.cells[cy * nx + cx].push(i as u32);
        }
        grid
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = floor((x - self.origin_x) / GRID_CELL).clamp(0.0, (self.nx - 1) as f64) as usize;
        let cy = floor((y - self.origin_y) / GRID_CELL).clamp(0.0, (self.ny - 1) as f64) as usize;
        (cx, cy)
    }
}

/// Flat ground plus vertical trunks.
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    ground_height: f64,
    trees: Vec<Tree>,
    seed: u64,
    grid: TreeGrid,
}

impl World {
    pub fn new(ground_height: f64, trees: Vec<Tree>, seed: u64) -> Result<Self, SynthError> {
        if !ground_height.is_finite() {
            return Err(SynthError::InvalidParameter("ground height must be finite"));
        }
        for t in &trees {
            if !(t.radius > 0.0 && t.height > 0.0) || !t.center.is_finite() {
                return Err(SynthError::InvalidParameter("tree radius and height must be positive"));
            }
        }
        let grid = TreeGrid::build(&trees);
        Ok(World {
            ground_height,
            trees,
            seed,
            grid,
        })
    }

    pub fn ground_height(&self) -> f64 {
        self.ground_height
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Drops trunks closer than `clearance` (horizontally, from the trunk
    /// surface) to the polyline `path`, so a platform can drive through.
    pub fn clear_path(&self, path: &[Vec3], clearance: f64) -> World {
        let keep = self
            .trees
            .iter()
            .filter(|t| polyline_distance_xy(path, t.center) - t.radius >= clearance)
            .copied()
            .collect();
        World::new(self.ground_height, keep, self.seed).expect("subset of a valid world")
    }

    /// Distance from the trunk of `tree` to `p`, treating the trunk as an
    /// open tube between ground and its top.
    fn trunk_distance(&self, tree: &Tree, p: Vec3) -> f64 {
        let radial = (hypot(p.x - tree.center.x, p.y - tree.center.y) - tree.radius).abs();
        let top = self.ground_height + tree.height;
        let dz = if p.z > top {
            p.z - top
        } else if p.z < self.ground_height {
            self.ground_height - p.z
        } else {
            0.0
        };
        if dz == 0.0 {
            radial
        } else {
            sqrt(radial * radial + dz * dz)
        }
    }

    /// Exact distance from `p` to the nearest surface of the world.
    pub fn distance_to_surface(&self, p: Vec3) -> f64 {
        let mut best = (p.z - self.ground_height).abs();
        if self.trees.is_empty() {
            return best;
        }
        let g = &self.grid;
        let reach = best + g.max_radius;
        let (x0, y0) = g.cell_of(p.x - reach, p.y - reach);
        let (x1, y1) = g.cell_of(p.x + reach, p.y + reach);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &i in &g.cells[cy * g.nx + cx] {
                    best = best.min(self.trunk_distance(&self.trees[i as usize], p));
                }
            }
        }
        best
    }

    /// Range along the unit direction `dir` from `origin` to the first surface
    /// hit, if any lies in `(0, max_range]`. Rays starting inside a trunk
    /// ignore that trunk.
    pub fn raycast(&self, origin: Vec3, dir: Vec3, max_range: f64) -> Option<f64> {
        self.raycast_among(&self.trees, origin, dir, max_range)
    }

    /// Trunks that a ray from `origin` of length `max_range` could reach.
    pub(crate) fn trees_near(&self, origin: Vec3, max_range: f64) -> Vec<Tree> {
        self.trees
            .iter()
            .filter(|t| hypot(t.center.x - origin.x, t.center.y - origin.y) <= max_range + t.radius)
            .copied()
            .collect()
    }

    pub(crate) fn raycast_among(&self, trees: &[Tree], origin: Vec3, dir: Vec3, max_range: f64) -> Option<f64> {
        let mut best = f64::INFINITY;
        if dir.z < 0.0 && origin.z > self.ground_height {
            best = (self.ground_height - origin.z) / dir.z;
        }
        let a = dir.x * dir.x + dir.y * dir.y;
        if a > 1e-18 {
            for t in trees {
                let ox = origin.x - t.center.x;
                let oy = origin.y - t.center.y;
                let c = ox * ox + oy * oy - t.radius * t.radius;
                if c < 0.0 {
                    continue;
                }
                let b = ox * dir.x + oy * dir.y;
                if b >= 0.0 {
                    // moving away from the axis
                    continue;
                }
                let disc = b * b - a * c;
                if disc < 0.0 {
                    continue;
                }
                let s = (-b - sqrt(disc)) / a;
                if s <= 0.0 || s >= best {
                    continue;
                }
                let z = origin.z + s * dir.z;
                if z >= self.ground_height && z <= self.ground_height + t.height {
                    best = s;
                }
            }
        }
        (best <= max_range).then_some(best)
    }
}

fn polyline_distance_xy(path: &[Vec3], p: Vec3) -> f64 {
    let flat = |v: Vec3| Vec3::new(v.x, v.y, 0.0);
    let q = flat(p);
    match path {
        [] => f64::INFINITY,
        [only] => flat(*only).distance(q),
        _ => path
            .windows(2)
            .map(|w| {
                let (a, b) = (flat(w[0]), flat(w[1]));
                let ab = b - a;
                let len2 = ab.norm_squared();
                let s = if len2 > 0.0 { ((q - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (a + ab * s).distance(q)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Poisson forest over `extent` on flat ground at height 0.
pub fn gen_world(seed: u64, extent: Extent, tree_density: f64) -> Result<World, SynthError> {
    gen_world_with(seed, extent, tree_density, &TreeShape::default())
}

/// [`gen_world`] with explicit trunk dimensions.
///
/// The tree count is Poisson with mean `density * area`; trunks are placed
/// uniformly and a placement that would overlap an earlier trunk (closer
/// than `min_gap`) is redrawn a bounded number of times, then dropped.
pub fn gen_world_with(seed: u64, extent: Extent, tree_density: f64, shape: &TreeShape) -> Result<World, SynthError> {
    if !(tree_density >= 0.0) || !tree_density.is_finite() {
        return Err(SynthError::InvalidParameter("tree density must be non-negative"));
    }
    if !(shape.radius.0 > 0.0 && shape.radius.1 >= shape.radius.0)
        || !(shape.height.0 > 0.0 && shape.height.1 >= shape.height.0)
    {
        return Err(SynthError::InvalidParameter("tree shape ranges must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = tree_density * extent.area();
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|_| SynthError::InvalidParameter("tree count mean out of range"))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let mut trees: Vec<Tree> = Vec::with_capacity(count);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
    for _ in 0..count {
        let radius = uniform(&mut rng, shape.radius);
        let height = uniform(&mut rng, shape.height);
        for _attempt in 0..16 {
            let center = Vec3::new(
                uniform(&mut rng, (extent.min_x, extent.max_x)),
                uniform(&mut rng, (extent.min_y, extent.max_y)),
                0.0,
            );
            let clear = trees.iter().all(|t| {
                hypot(t.center.x - center.x, t.center.y - center.y) >= t.radius + radius + shape.min_gap
            });
            if clear {
                trees.push(Tree { center, radius, height });
                break;
            }
        }
    }
    World::new(0.0, trees, seed)
}
