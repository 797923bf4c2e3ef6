//! Rigid transforms and the vector pose parameterizations built on them.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rotations::{
    self, euler_to_matrix, exp_so3, hat, log_so3, matrix_to_euler, matrix_to_quat,
    quat_to_matrix, AxisVector, EulerAngles, GimbalLock, RawQuaternion, RotationMatrix,
};

/// Quaternions shorter than this cannot be normalized.
pub const MIN_QUATERNION_NORM: f64 = 1e-12;

const V_TAYLOR_THRESHOLD: f64 = 1e-4;
const LOG_SE3_PI_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error(transparent)]
    GimbalLock(#[from] GimbalLock),
    #[error("quaternion norm {norm:.3e} is too small to normalize")]
    ZeroQuaternion { norm: f64 },
    #[error("rotation angle {angle:.12} is too close to pi for the SE(3) logarithm")]
    NearPiRotation { angle: f64 },
}

/// An SE(3) element stored as the pair `(R, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transform {
    pub rotation: RotationMatrix,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn new(rotation: RotationMatrix, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(RotationMatrix::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(RotationMatrix::identity(), t)
    }

    pub fn from_rotation(r: RotationMatrix) -> Self {
        Self::new(r, Vector3::zeros())
    }

    /// The 4x4 homogeneous matrix `[R t; 0 1]`.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }
}

impl std::ops::Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        compose(&self, &rhs)
    }
}

/// `A * B = (R_A R_B, R_A t_B + t_A)`.
pub fn compose(a: &Transform, b: &Transform) -> Transform {
    Transform::new(
        a.rotation * b.rotation,
        a.rotation.rotate(&b.translation) + a.translation,
    )
}

pub fn inverse(t: &Transform) -> Transform {
    let rt = t.rotation.transpose();
    Transform::new(rt, -rt.rotate(&t.translation))
}

/// `A^-1 * B`, whose rotation block is `R_A^T R_B`.
pub fn relative(a: &Transform, b: &Transform) -> Transform {
    let rt = a.rotation.transpose();
    Transform::new(rt * b.rotation, rt.rotate(&(b.translation - a.translation)))
}

/// Translation plus yaw-pitch-roll, the 6-vector `[t phi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose6 {
    pub translation: Vector3<f64>,
    pub angles: EulerAngles,
}

/// Translation plus an unconstrained quaternion 4-vector, `[t q]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose7 {
    pub translation: Vector3<f64>,
    pub quaternion: RawQuaternion,
}

impl Default for Pose7 {
    fn default() -> Self {
        Self {
            translation: Vector3::zeros(),
            quaternion: RawQuaternion::new(1.0, 0.0, 0.0, 0.0),
        }
    }
}

/// Translation taken directly, rotation through the so(3) exponential.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TangentPose {
    pub translation: Vector3<f64>,
    pub rotation: AxisVector,
}

pub fn pose6_to_transform(p: &Pose6) -> Transform {
    Transform::new(euler_to_matrix(&p.angles), p.translation)
}

pub fn transform_to_pose6(t: &Transform) -> Result<Pose6, PoseError> {
    Ok(Pose6 {
        translation: t.translation,
        angles: matrix_to_euler(&t.rotation)?,
    })
}

pub fn pose7_to_transform(p: &Pose7) -> Result<Transform, PoseError> {
    let q = p
        .quaternion
        .normalize(MIN_QUATERNION_NORM)
        .ok_or(PoseError::ZeroQuaternion {
            norm: p.quaternion.norm(),
        })?;
    Ok(Transform::new(quat_to_matrix(&q), p.translation))
}

/// The returned quaternion is unit length with w >= 0.
pub fn transform_to_pose7(t: &Transform) -> Pose7 {
    Pose7 {
        translation: t.translation,
        quaternion: matrix_to_quat(&t.rotation).raw(),
    }
}

/// `(exp(omega), t)`. This is not the SE(3) exponential: the translation is
/// not passed through the left Jacobian (see [`exp_se3`] for that).
pub fn tangent_to_transform(p: &TangentPose) -> Transform {
    Transform::new(exp_so3(&p.rotation), p.translation)
}

pub fn transform_to_tangent(t: &Transform) -> TangentPose {
    TangentPose {
        translation: t.translation,
        rotation: log_so3(&t.rotation),
    }
}

/// Left Jacobian of SO(3), the `V` matrix mapping translational twist to
/// translation: `V = I + (1 - cos th)/th^2 K + (th - sin th)/th^3 K^2`.
pub fn left_jacobian_so3(omega: &AxisVector) -> Matrix3<f64> {
    let theta_sq = omega.vector().norm_squared();
    let theta = theta_sq.sqrt();
    let (b, c) = if theta < V_TAYLOR_THRESHOLD {
        (0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / theta_sq,
            (theta - theta.sin()) / (theta_sq * theta),
        )
    };
    let k = hat(omega);
    Matrix3::identity() + k * b + k * k * c
}

/// Right Jacobian of SO(3): `J_r(omega) = J_l(-omega)`.
pub fn right_jacobian_so3(omega: &AxisVector) -> Matrix3<f64> {
    left_jacobian_so3(&AxisVector(-omega.vector()))
}

/// SE(3) exponential of the twist `xi = (rho, omega)`, translation first.
pub fn exp_se3(xi: &Vector6<f64>) -> Transform {
    let rho = xi.fixed_rows::<3>(0).into_owned();
    let omega = AxisVector(xi.fixed_rows::<3>(3).into_owned());
    Transform::new(exp_so3(&omega), left_jacobian_so3(&omega) * rho)
}

pub fn log_se3(t: &Transform) -> Result<Vector6<f64>, PoseError> {
    let angle = rotations::rotation_angle(&t.rotation);
    if angle > std::f64::consts::PI - LOG_SE3_PI_MARGIN {
        return Err(PoseError::NearPiRotation { angle });
    }
    let omega = log_so3(&t.rotation);
    let v = left_jacobian_so3(&omega);
    // V is invertible for angles below 2 pi, which the guard above ensures.
    let rho = v.lu().solve(&t.translation).unwrap_or_else(Vector3::zeros);
    let mut xi = Vector6::zeros();
    xi.fixed_rows_mut::<3>(0).copy_from(&rho);
    xi.fixed_rows_mut::<3>(3).copy_from(omega.vector());
    Ok(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn assert_transform_eq(a: &Transform, b: &Transform, eps: f64) {
        assert_abs_diff_eq!(*a.rotation.matrix(), *b.rotation.matrix(), epsilon = eps);
        assert_abs_diff_eq!(a.translation, b.translation, epsilon = eps);
    }

    #[test]
    fn compose_examples() {
        let t = Transform::new(RotationMatrix::rot_z(0.4), Vector3::new(1.0, -2.0, 0.5));
        assert_transform_eq(&compose(&t, &Transform::identity()), &t, 0.0);
        assert_transform_eq(&compose(&t, &inverse(&t)), &Transform::identity(), 1e-9);

        let a = Transform::new(RotationMatrix::rot_z(PI / 2.0), Vector3::new(1.0, 0.0, 0.0));
        let b = Transform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let c = compose(&a, &b);
        assert_transform_eq(
            &c,
            &Transform::new(RotationMatrix::rot_z(PI / 2.0), Vector3::new(1.0, 1.0, 0.0)),
            1e-15,
        );
        // Same result through the homogeneous matrices.
        assert_abs_diff_eq!(
            c.to_homogeneous(),
            a.to_homogeneous() * b.to_homogeneous(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn inverse_examples() {
        assert_transform_eq(&inverse(&Transform::identity()), &Transform::identity(), 0.0);
        let t = Transform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(inverse(&t).translation, Vector3::new(-1.0, -2.0, -3.0));
        let t = Transform::new(RotationMatrix::rot_z(PI / 2.0), Vector3::new(1.0, 0.0, 0.0));
        assert_transform_eq(
            &inverse(&t),
            &Transform::new(RotationMatrix::rot_z(-PI / 2.0), Vector3::new(0.0, 1.0, 0.0)),
            1e-15,
        );
    }

    #[test]
    fn relative_examples() {
        let t = Transform::new(RotationMatrix::rot_y(1.1), Vector3::new(4.0, 0.0, -1.0));
        assert_transform_eq(&relative(&t, &t), &Transform::identity(), 1e-15);
        assert_transform_eq(&relative(&Transform::identity(), &t), &t, 0.0);
        let r = relative(
            &Transform::from_translation(Vector3::new(1.0, 0.0, 0.0)),
            &Transform::from_translation(Vector3::new(3.0, 0.0, 0.0)),
        );
        assert_transform_eq(&r, &Transform::from_translation(Vector3::new(2.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn pose6_examples() {
        assert_transform_eq(&pose6_to_transform(&Pose6::default()), &Transform::identity(), 0.0);
        let p = Pose6 {
            translation: Vector3::new(1.0, 2.0, 3.0),
            angles: EulerAngles::new(PI / 2.0, 0.0, 0.0),
        };
        assert_transform_eq(
            &pose6_to_transform(&p),
            &Transform::new(RotationMatrix::rot_z(PI / 2.0), Vector3::new(1.0, 2.0, 3.0)),
            1e-15,
        );
        let p = Pose6 {
            translation: Vector3::new(-0.5, 3.0, 1.0),
            angles: EulerAngles::new(2.0, -0.7, 0.3),
        };
        let back = transform_to_pose6(&pose6_to_transform(&p)).unwrap();
        assert_abs_diff_eq!(back.angles.to_vector(), p.angles.to_vector(), epsilon = 1e-9);
        assert_eq!(back.translation, p.translation);

        let locked = Pose6 {
            translation: Vector3::zeros(),
            angles: EulerAngles::new(0.3, PI / 2.0, 0.1),
        };
        assert!(matches!(
            transform_to_pose6(&pose6_to_transform(&locked)),
            Err(PoseError::GimbalLock(_))
        ));
    }

    #[test]
    fn pose7_examples() {
        let p = Pose7::default();
        assert_transform_eq(&pose7_to_transform(&p).unwrap(), &Transform::identity(), 0.0);
        let p = Pose7 {
            translation: Vector3::zeros(),
            quaternion: RawQuaternion::new(2.0, 0.0, 0.0, 0.0),
        };
        assert_transform_eq(&pose7_to_transform(&p).unwrap(), &Transform::identity(), 0.0);
        let h = 0.5f64.sqrt();
        let p = Pose7 {
            translation: Vector3::new(1.0, 0.0, 0.0),
            quaternion: RawQuaternion::new(h, 0.0, 0.0, h),
        };
        assert_transform_eq(
            &pose7_to_transform(&p).unwrap(),
            &Transform::new(RotationMatrix::rot_z(PI / 2.0), Vector3::new(1.0, 0.0, 0.0)),
            1e-15,
        );
        let zero = Pose7 {
            translation: Vector3::zeros(),
            quaternion: RawQuaternion::new(0.0, 1e-13, 0.0, 0.0),
        };
        assert!(matches!(
            pose7_to_transform(&zero),
            Err(PoseError::ZeroQuaternion { .. })
        ));

        let t = Transform::new(RotationMatrix::rot_x(-2.5), Vector3::new(0.0, 1.0, 2.0));
        let p = transform_to_pose7(&t);
        assert!(p.quaternion.w >= 0.0);
        assert_abs_diff_eq!(p.quaternion.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tangent_examples() {
        assert_transform_eq(
            &tangent_to_transform(&TangentPose::default()),
            &Transform::identity(),
            0.0,
        );
        let p = TangentPose {
            translation: Vector3::new(1.0, 2.0, 3.0),
            rotation: AxisVector::default(),
        };
        assert_transform_eq(
            &tangent_to_transform(&p),
            &Transform::from_translation(Vector3::new(1.0, 2.0, 3.0)),
            0.0,
        );
        let p = TangentPose {
            translation: Vector3::zeros(),
            rotation: AxisVector::new(0.0, 0.0, PI / 2.0),
        };
        assert_transform_eq(
            &tangent_to_transform(&p),
            &Transform::from_rotation(RotationMatrix::rot_z(PI / 2.0)),
            1e-15,
        );
    }

    #[test]
    fn exp_se3_examples() {
        assert_transform_eq(&exp_se3(&Vector6::zeros()), &Transform::identity(), 0.0);
        let xi = Vector6::new(1.0, 2.0, 3.0, 0.0, 0.0, 0.0);
        assert_transform_eq(
            &exp_se3(&xi),
            &Transform::from_translation(Vector3::new(1.0, 2.0, 3.0)),
            0.0,
        );
        // V e_x = integral_0^1 Rz(s pi/2) e_x ds = (2/pi, 2/pi, 0).
        let xi = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, PI / 2.0);
        let t = exp_se3(&xi);
        assert_abs_diff_eq!(*t.rotation.matrix(), *RotationMatrix::rot_z(PI / 2.0).matrix(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.translation, Vector3::new(2.0 / PI, 2.0 / PI, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(log_se3(&t).unwrap(), xi, epsilon = 1e-12);
    }

    #[test]
    fn left_jacobian_matches_quadrature() {
        // Composite Simpson of exp(s K) over s in [0, 1].
        let w = AxisVector::new(0.7, -1.2, 0.4);
        let n = 200;
        let mut acc = Matrix3::zeros();
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let weight = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += *exp_so3(&AxisVector(w.vector() * s)).matrix() * weight;
        }
        acc /= 3.0 * n as f64;
        assert_abs_diff_eq!(left_jacobian_so3(&w), acc, epsilon = 1e-9);
    }

    #[test]
    fn log_se3_rejects_half_turn() {
        let t = Transform::from_rotation(RotationMatrix::rot_y(PI));
        assert!(matches!(log_se3(&t), Err(PoseError::NearPiRotation { .. })));
    }

    #[test]
    fn tangent_map_differs_from_exp_se3() {
        let xi = Vector6::new(1.0, 0.5, -0.3, 0.2, 0.1, 0.4);
        let tangent = TangentPose {
            translation: Vector3::new(1.0, 0.5, -0.3),
            rotation: AxisVector::new(0.2, 0.1, 0.4),
        };
        let a = exp_se3(&xi);
        let b = tangent_to_transform(&tangent);
        assert_eq!(a.rotation, b.rotation);
        assert!((a.translation - b.translation).norm() > 1e-3);
    }
}
