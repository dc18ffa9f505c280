//! One Gauss-Newton step of weighted point-to-plane alignment.
//!
//! The twist `(ω, v)` is linearized around the weighted centroid `c` of the
//! constraints' scan points, so the rotational and translational blocks of
//! the normal system stay comparably scaled:
//!
//! ```text
//! p ↦ p + ω × (p - c) + v
//! residual = (q - p)ᵀn - ωᵀ((p - c) × n) - vᵀn
//! ```

use core::fmt;

use super::{PlaneConstraint, RegistrationError};
use crate::geometry::{jacobi_eigen, Mat3, RigidTransform, Vec3};

/// Normal systems whose eigenvalue spread exceeds this are rank-deficient.
pub const MAX_CONDITION_NUMBER: f64 = 1e8;

/// Set of twist coordinates, used to name unconstrained motions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TwistAxes(u8);

impl TwistAxes {
    pub const ROLL: TwistAxes = TwistAxes(1);
    pub const PITCH: TwistAxes = TwistAxes(2);
    pub const YAW: TwistAxes = TwistAxes(4);
    pub const X: TwistAxes = TwistAxes(8);
    pub const Y: TwistAxes = TwistAxes(16);
    pub const Z: TwistAxes = TwistAxes(32);

    const ORDER: [(TwistAxes, &'static str); 6] = [
        (TwistAxes::X, "x"),
        (TwistAxes::Y, "y"),
        (TwistAxes::Z, "z"),
        (TwistAxes::ROLL, "roll"),
        (TwistAxes::PITCH, "pitch"),
        (TwistAxes::YAW, "yaw"),
    ];

    pub fn empty() -> Self {
        TwistAxes(0)
    }

    pub fn contains(&self, other: TwistAxes) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Twist coordinate `i` in `(ωx, ωy, ωz, vx, vy, vz)` order.
    fn from_twist_index(i: usize) -> TwistAxes {
        [
            TwistAxes::ROLL,
            TwistAxes::PITCH,
            TwistAxes::YAW,
            TwistAxes::X,
            TwistAxes::Y,
            TwistAxes::Z,
        ][i]
    }
}

impl core::ops::BitOr for TwistAxes {
    type Output = TwistAxes;
    fn bitor(self, o: TwistAxes) -> TwistAxes {
        TwistAxes(self.0 | o.0)
    }
}

impl fmt::Display for TwistAxes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (axis, name) in TwistAxes::ORDER {
            if self.contains(axis) {
                if !first {
                    f.write_str(", ")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        if first {
            f.write_str("none")?;
        }
        Ok(())
    }
}

/// Accumulated normal equations `A x = b` for the twist.
#[derive(Clone, Debug)]
struct NormalSystem {
    a: [[f64; 6]; 6],
    b: [f64; 6],
}

impl NormalSystem {
    fn new() -> Self {
        NormalSystem {
            a: [[0.0; 6]; 6],
            b: [0.0; 6],
        }
    }

    #[inline]
    fn add(&mut self, row: [f64; 6], weight: f64, rhs: f64) {
        for r in 0..6 {
            let wr = weight * row[r];
            for c in r..6 {
                self.a[r][c] += wr * row[c];
            }
            self.b[r] += wr * rhs;
        }
    }
}

/// Minimizes `Σ wᵢ ((qᵢ - pᵢ')ᵀ nᵢ)²` over one linearized rigid motion and
/// returns that motion as a proper transform (rotation via the exponential
/// map). Constraints are summed in slice order.
pub fn solve_constraints(constraints: &[PlaneConstraint]) -> Result<RigidTransform, RegistrationError> {
    let mut wsum = 0.0;
    let mut centroid = Vec3::ZERO;
    for c in constraints {
        wsum += c.weight;
        centroid += c.scan_point * c.weight;
    }
    if !(wsum > 0.0) || !wsum.is_finite() {
        return Err(RegistrationError::RankDeficient {
            unconstrained: TwistAxes(63),
            condition: f64::INFINITY,
        });
    }
    let centroid = centroid / wsum;

    let mut sys = NormalSystem::new();
    for c in constraints {
        if c.weight == 0.0 {
            continue;
        }
        let arm = (c.scan_point - centroid).cross(c.normal);
        let row = [arm.x, arm.y, arm.z, c.normal.x, c.normal.y, c.normal.z];
        sys.add(row, c.weight, c.projected_error());
    }

    let (values, vectors) = jacobi_eigen(&sys.a).ok_or(RegistrationError::Geometry(
        crate::geometry::GeometryError::NonFinite,
    ))?;
    let largest = values[5];
    let floor = largest / MAX_CONDITION_NUMBER;
    if !(largest > 0.0) || values[0] <= floor {
        let mut unconstrained = TwistAxes::empty();
        for k in 0..6 {
            if values[k] > floor && largest > 0.0 {
                continue;
            }
            for (i, row) in vectors.iter().enumerate() {
                if row[k].abs() > 0.1 {
                    unconstrained = unconstrained | TwistAxes::from_twist_index(i);
                }
            }
        }
        let condition = if values[0] > 0.0 { largest / values[0] } else { f64::INFINITY };
        return Err(RegistrationError::RankDeficient {
            unconstrained,
            condition,
        });
    }

    // x = V Λ⁻¹ Vᵀ b
    let mut x = [0.0; 6];
    for k in 0..6 {
        let mut proj = 0.0;
        for i in 0..6 {
            proj += vectors[i][k] * sys.b[i];
        }
        let scale = proj / values[k];
        for i in 0..6 {
            x[i] += vectors[i][k] * scale;
        }
    }

    let omega = Vec3::new(x[0], x[1], x[2]);
    let v = Vec3::new(x[3], x[4], x[5]);
    let rotation = Mat3::exp(omega);
    let translation = centroid + v - rotation * centroid;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}
