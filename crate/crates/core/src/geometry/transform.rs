use super::{GeometryError, Mat3, Quaternion, Vec3};

/// Tolerance on `RᵀR = I` and `det R = 1` accepted by [`RigidTransform::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Orthonormality drift above which [`compose`] re-projects onto SO(3).
pub const REORTHONORMALIZE_THRESHOLD: f64 = 1e-12;

/// A rigid motion `p ↦ R p + t` (SE(3)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        RigidTransform::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    /// Validates the rotation part.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !translation.is_finite() || !rotation.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if !rotation.is_rotation(ROTATION_TOLERANCE) {
            return Err(GeometryError::NotARotation);
        }
        Ok(RigidTransform { rotation, translation })
    }

    /// Builds a transform from a rotation that is known to be valid, e.g. the
    /// output of [`Mat3::exp`] or a product of rotations.
    pub(crate) fn from_parts_unchecked(rotation: Mat3, translation: Vec3) -> Self {
        debug_assert!(rotation.is_rotation(1e-6));
        RigidTransform { rotation, translation }
    }

    pub fn from_translation(t: Vec3) -> Self {
        RigidTransform {
            rotation: Mat3::IDENTITY,
            translation: t,
        }
    }

    pub fn from_rotation(r: Mat3) -> Result<Self, GeometryError> {
        RigidTransform::new(r, Vec3::ZERO)
    }

    pub fn rot_x(angle: f64) -> Self {
        RigidTransform::from_parts_unchecked(Mat3::rot_x(angle), Vec3::ZERO)
    }

    pub fn rot_y(angle: f64) -> Self {
        RigidTransform::from_parts_unchecked(Mat3::rot_y(angle), Vec3::ZERO)
    }

    pub fn rot_z(angle: f64) -> Self {
        RigidTransform::from_parts_unchecked(Mat3::rot_z(angle), Vec3::ZERO)
    }

    /// Exponential-map rotation plus translation.
    pub fn from_rotation_vector(w: Vec3, t: Vec3) -> Self {
        RigidTransform::from_parts_unchecked(Mat3::exp(w), t)
    }

    pub fn from_quaternion(q: Quaternion, t: Vec3) -> Result<Self, GeometryError> {
        if q.norm() < 1e-12 || !q.norm().is_finite() {
            return Err(GeometryError::NotARotation);
        }
        RigidTransform::new(q.normalized().to_rotation(), t)
    }

    pub fn with_translation(self, t: Vec3) -> Self {
        RigidTransform { translation: t, ..self }
    }

    #[inline]
    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn quaternion(&self) -> Quaternion {
        Quaternion::from_rotation(&self.rotation)
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_rotation(&self, v: Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle of this transform, radians in [0, pi].
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.rotation_angle()
    }
}

/// `a ∘ b`: applies `b` first, then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    let mut rotation = a.rotation * b.rotation;
    if rotation.orthonormality_error() > REORTHONORMALIZE_THRESHOLD {
        rotation = rotation.orthonormalized();
    }
    RigidTransform {
        rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

/// `R p + t`.
#[inline]
pub fn apply(t: &RigidTransform, p: Vec3) -> Vec3 {
    t.apply(p)
}

impl core::ops::Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        compose(&self, &rhs)
    }
}
