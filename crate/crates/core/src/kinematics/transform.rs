use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::Mul;

/// Orthonormality / determinant tolerance for rotations read from files.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Rigid transform: rotation followed by translation (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Builds a transform after checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, String> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err("translation is not finite".into());
        }
        check_rotation(&rotation)?;
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::new(x, y, z) }
    }

    pub fn from_axis_angle(axis: &Unit<Vector3<f64>>, angle: f64) -> Self {
        Self { rotation: Rotation3::from_axis_angle(axis, angle).into_inner(), translation: Vector3::zeros() }
    }

    /// Fixed-axis roll/pitch/yaw: `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_rpy_translation(rpy: [f64; 3], translation: [f64; 3]) -> Self {
        Self {
            rotation: Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]).into_inner(),
            translation: Vector3::from(translation),
        }
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::z_axis(), angle)
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let rt = self.rotation.transpose();
        Transform { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Axis-angle vector of `target.rotation * self.rotationᵀ` (world frame).
    pub fn orientation_error_to(&self, target: &Transform) -> Vector3<f64> {
        let err = target.rotation * self.rotation.transpose();
        // atan2 keeps full precision at small angles, where acos of the trace does not
        let v = Vector3::new(err[(2, 1)] - err[(1, 2)], err[(0, 2)] - err[(2, 0)], err[(1, 0)] - err[(0, 1)]) / 2.0;
        let sin = v.norm();
        let cos = (err.trace() - 1.0) / 2.0;
        if cos < 0.0 && sin < 1e-6 {
            return Rotation3::from_matrix_unchecked(err).scaled_axis();
        }
        if sin == 0.0 {
            return Vector3::zeros();
        }
        v * (sin.atan2(cos) / sin)
    }

    pub fn position_error_to(&self, target: &Transform) -> Vector3<f64> {
        target.translation - self.translation
    }

    pub fn is_valid(&self) -> bool {
        check_rotation(&self.rotation).is_ok() && self.translation.iter().all(|v| v.is_finite())
    }
}

impl Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Transform> for &'a Transform {
    type Output = Transform;
    fn mul(self, rhs: &'a Transform) -> Transform {
        self.compose(rhs)
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<(), String> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err("rotation is not finite".into());
    }
    let gram = r.transpose() * r - Matrix3::identity();
    let worst = gram.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if worst > ROTATION_TOLERANCE {
        return Err(format!("rotation is not orthonormal (max |RᵀR - I| = {worst:.3e})"));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(format!("rotation determinant is {det}, expected +1"));
    }
    Ok(())
}

/// File form of a transform. Exactly one of `rotation` (row-major 3×3) or
/// `rpy` may be given; both default to identity when absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rpy: Option<[f64; 3]>,
}

impl TransformSpec {
    pub fn to_transform(&self) -> Result<Transform, String> {
        let translation = Vector3::from(self.translation);
        match (&self.rotation, &self.rpy) {
            (Some(_), Some(_)) => Err("give either `rotation` or `rpy`, not both".into()),
            (Some(rows), None) => {
                let m = Matrix3::from_row_slice(&[
                    rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0], rows[2][1],
                    rows[2][2],
                ]);
                Transform::new(m, translation)
            }
            (None, Some(rpy)) => {
                if !rpy.iter().all(|v| v.is_finite()) {
                    return Err("rpy is not finite".into());
                }
                Transform::new(Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]).into_inner(), translation)
            }
            (None, None) => Transform::new(Matrix3::identity(), translation),
        }
    }

    pub fn from_transform(t: &Transform) -> Self {
        let r = &t.rotation;
        Self {
            translation: [t.translation.x, t.translation.y, t.translation.z],
            rotation: Some([
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ]),
            rpy: None,
        }
    }
}
