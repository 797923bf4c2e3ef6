//! Orientation parameterizations and the so(3) exponential / logarithm maps.
//!
//! Four representations are supported:
//!
//! * [`EulerAngles`], yaw-pitch-roll applied as intrinsic Z-Y-X,
//!   i.e. `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
//! * [`UnitQuaternion`], stored w-first, plus [`RawQuaternion`] for
//!   unconstrained 4-vectors coming out of an optimizer.
//! * [`RotationMatrix`], an element of SO(3).
//! * [`AxisVector`], exponential coordinates whose norm is the rotation angle.
//!
//! Every function here is pure; nothing holds shared state.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Elementwise tolerance for the SO(3) membership check.
pub const ORTHONORMAL_TOL: f64 = 1e-9;
/// Tolerance on the squared quaternion norm.
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Distance of |pitch| from pi/2 below which the Euler chart is degenerate.
pub const GIMBAL_LOCK_TOL: f64 = 1e-7;

const EXP_TAYLOR_THRESHOLD: f64 = 1e-4;
const LOG_TAYLOR_THRESHOLD: f64 = 1e-6;
const LOG_PI_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RotationError {
    #[error("matrix is not a rotation: orthonormality defect {defect:.3e}, det {det:.12}")]
    NotRotation { defect: f64, det: f64 },
    #[error("quaternion is not unit length: squared norm {norm_sq:.12}")]
    NotUnit { norm_sq: f64 },
    #[error("matrix is not skew-symmetric: asymmetry {asymmetry:.3e}")]
    NotSkew { asymmetry: f64 },
    #[error("non-finite component")]
    NonFinite,
}

/// The Euler chart hit its singularity (|pitch| = pi/2).
///
/// `canonical` holds the angles chosen by the roll = 0 convention; they
/// reproduce the input matrix, but the chart is not locally invertible there.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("gimbal lock: pitch {:.9} is within 1e-7 of +/-pi/2", .canonical.pitch)]
pub struct GimbalLock {
    pub canonical: EulerAngles,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self { yaw, pitch, roll }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.yaw, self.pitch, self.roll)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// An unconstrained quaternion-shaped 4-vector, w first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RawQuaternion {
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn norm(self) -> f64 {
        self.to_vector().norm()
    }

    /// Normalizes to unit length; `None` when the norm is below `min_norm`.
    pub fn normalize(self, min_norm: f64) -> Option<UnitQuaternion> {
        let n = self.norm();
        if !n.is_finite() || n < min_norm {
            return None;
        }
        Some(UnitQuaternion {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        })
    }
}

impl std::ops::Neg for RawQuaternion {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Unit quaternion, w first. The unit-norm constraint is checked on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, RotationError> {
        if ![w, x, y, z].iter().all(|c| c.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let norm_sq = w * w + x * x + y * y + z * z;
        if (norm_sq - 1.0).abs() > UNIT_NORM_TOL {
            return Err(RotationError::NotUnit { norm_sq });
        }
        Ok(Self { w, x, y, z })
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn raw(self) -> RawQuaternion {
        RawQuaternion::new(self.w, self.x, self.y, self.z)
    }

    /// Representative in the w >= 0 hemisphere. When w is exactly zero the
    /// first nonzero vector component is made positive.
    pub fn canonical(self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else {
            [self.x, self.y, self.z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            -self
        } else {
            self
        }
    }
}

impl std::ops::Neg for UnitQuaternion {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// An element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Checks `R^T R = I` and `det R = 1`, both within [`ORTHONORMAL_TOL`].
    pub fn new(m: Matrix3<f64>) -> Result<Self, RotationError> {
        if !m.iter().all(|c| c.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let defect = orthonormality_defect(&m);
        let det = m.determinant();
        if defect > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(RotationError::NotRotation { defect, det });
        }
        Ok(Self(m))
    }

    /// Nearest rotation in the Frobenius sense, via SVD. Fails for
    /// reflections (negative determinant) and rank-deficient input.
    pub fn project(m: &Matrix3<f64>) -> Result<Self, RotationError> {
        if !m.iter().all(|c| c.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let det = m.determinant();
        if det <= 0.0 {
            return Err(RotationError::NotRotation {
                defect: orthonormality_defect(m),
                det,
            });
        }
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => {
                return Err(RotationError::NotRotation {
                    defect: orthonormality_defect(m),
                    det,
                })
            }
        };
        Ok(Self(u * v_t))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        #[rustfmt::skip]
        let m = Matrix3::new(
            1.0, 0.0, 0.0,
            0.0, c, -s,
            0.0, s, c,
        );
        Self(m)
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        #[rustfmt::skip]
        let m = Matrix3::new(
            c, 0.0, s,
            0.0, 1.0, 0.0,
            -s, 0.0, c,
        );
        Self(m)
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        #[rustfmt::skip]
        let m = Matrix3::new(
            c, -s, 0.0,
            s, c, 0.0,
            0.0, 0.0, 1.0,
        );
        Self(m)
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl std::ops::Mul for &RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

/// Largest elementwise deviation of `m^T m` from the identity.
pub fn orthonormality_defect(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).amax()
}

/// Exponential coordinates of a rotation; the norm is the angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisVector(pub Vector3<f64>);

impl AxisVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

pub fn euler_to_matrix(angles: &EulerAngles) -> RotationMatrix {
    let (sy, cy) = angles.yaw.sin_cos();
    let (sp, cp) = angles.pitch.sin_cos();
    let (sr, cr) = angles.roll.sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
        sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
        -sp,     cp * sr,                cp * cr,
    );
    RotationMatrix(m)
}

/// Maps (-pi, pi] onto itself, folding the -pi that atan2 can return.
fn wrap_half_open(angle: f64) -> f64 {
    if angle <= -PI {
        angle + 2.0 * PI
    } else {
        angle
    }
}

/// Inverse Z-Y-X chart with pitch in [-pi/2, pi/2] and yaw, roll in (-pi, pi].
///
/// At gimbal lock roll is pinned to zero and yaw absorbs the free angle;
/// those canonical angles are returned inside the [`GimbalLock`] error.
pub fn matrix_to_euler(r: &RotationMatrix) -> Result<EulerAngles, GimbalLock> {
    let m = r.matrix();
    let cos_pitch = m[(0, 0)].hypot(m[(1, 0)]);
    let pitch = (-m[(2, 0)]).atan2(cos_pitch);
    if (PI / 2.0 - pitch.abs()) < GIMBAL_LOCK_TOL {
        // sin(pitch) = +/-1: R01 = -sin(yaw -/+ roll), R11 = cos(yaw -/+ roll)
        let yaw = wrap_half_open((-m[(0, 1)]).atan2(m[(1, 1)]));
        return Err(GimbalLock {
            canonical: EulerAngles::new(yaw, pitch, 0.0),
        });
    }
    let yaw = wrap_half_open(m[(1, 0)].atan2(m[(0, 0)]));
    let roll = wrap_half_open(m[(2, 1)].atan2(m[(2, 2)]));
    Ok(EulerAngles::new(yaw, pitch, roll))
}

pub fn quat_to_matrix(q: &UnitQuaternion) -> RotationMatrix {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    // Only pairwise products appear, so q and -q give bit-identical matrices.
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    #[rustfmt::skip]
    let m = Matrix3::new(
        1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz),       2.0 * (xz + wy),
        2.0 * (xy + wz),       1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx),
        2.0 * (xz - wy),       2.0 * (yz + wx),       1.0 - 2.0 * (xx + yy),
    );
    RotationMatrix(m)
}

/// Shepperd's method: pick the largest of (trace, R00, R11, R22) to avoid
/// dividing by a small square root. Result is canonicalized to w >= 0.
pub fn matrix_to_quat(r: &RotationMatrix) -> UnitQuaternion {
    let m = r.matrix();
    let trace = m.trace();
    let (w, x, y, z);
    if trace >= m[(0, 0)] && trace >= m[(1, 1)] && trace >= m[(2, 2)] {
        let s = 2.0 * (1.0 + trace).sqrt();
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
        let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] >= m[(2, 2)] {
        let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    // Renormalize away the rounding left by the branch arithmetic.
    let n = (w * w + x * x + y * y + z * z).sqrt();
    UnitQuaternion {
        w: w / n,
        x: x / n,
        y: y / n,
        z: z / n,
    }
    .canonical()
}

#[rustfmt::skip]
pub fn hat(omega: &AxisVector) -> Matrix3<f64> {
    let w = omega.0;
    Matrix3::new(
        0.0,  -w.z,  w.y,
        w.z,   0.0, -w.x,
        -w.y,  w.x,  0.0,
    )
}

/// Inverse of [`hat`]. Rejects input whose asymmetry `S + S^T` exceeds 1e-9.
pub fn vee(s: &Matrix3<f64>) -> Result<AxisVector, RotationError> {
    let asymmetry = (s + s.transpose()).amax();
    if asymmetry > ORTHONORMAL_TOL {
        return Err(RotationError::NotSkew { asymmetry });
    }
    Ok(vee_unchecked(s))
}

/// `(S21, S02, S10)`: the axial vector of the skew part of `s`, up to a factor 2
/// when `s` is not skew.
pub(crate) fn vee_unchecked(s: &Matrix3<f64>) -> AxisVector {
    AxisVector::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
}

/// Rodrigues' formula.
pub fn exp_so3(omega: &AxisVector) -> RotationMatrix {
    let theta_sq = omega.0.norm_squared();
    let theta = theta_sq.sqrt();
    let (a, b) = if theta < EXP_TAYLOR_THRESHOLD {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    let k = hat(omega);
    RotationMatrix(Matrix3::identity() + k * a + k * k * b)
}

/// Rotation angle of `r` in [0, pi].
///
/// Computed with atan2 of the skew and trace parts, which stays accurate at
/// both ends of the range where arccos of the trace loses digits.
pub fn rotation_angle(r: &RotationMatrix) -> f64 {
    let m = r.matrix();
    let skew = vee_unchecked(&(m - m.transpose())).0;
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    (0.5 * skew.norm()).atan2(cos)
}

/// Logarithm of a rotation, returned with norm in [0, pi].
pub fn log_so3(r: &RotationMatrix) -> AxisVector {
    let m = r.matrix();
    let skew = vee_unchecked(&(m - m.transpose())).0;
    let theta = rotation_angle(r);

    if theta < LOG_TAYLOR_THRESHOLD {
        // theta / (2 sin theta) = 1/2 (1 + theta^2 / 6 + ...)
        return AxisVector(skew * (0.5 * (1.0 + theta * theta / 6.0)));
    }
    if PI - theta >= LOG_PI_THRESHOLD {
        return AxisVector(skew * (theta / (2.0 * theta.sin())));
    }

    // Near pi the skew part vanishes; read the axis off the symmetric part,
    // sym(R) - cos(theta) I = (1 - cos theta) a a^T.
    let cos = theta.cos();
    let outer = ((m + m.transpose()) * 0.5 - Matrix3::identity() * cos) / (1.0 - cos);
    let mut k = 0;
    for i in 1..3 {
        if outer[(i, i)] > outer[(k, k)] {
            k = i;
        }
    }
    let mut axis = outer.column(k) / outer[(k, k)].max(0.0).sqrt();
    axis /= axis.norm();

    let along = axis.dot(&skew);
    let flip = if along.abs() > f64::EPSILON {
        along < 0.0
    } else {
        axis.iter()
            .find(|c| c.abs() > f64::EPSILON)
            .is_some_and(|c| *c < 0.0)
    };
    if flip {
        axis = -axis;
    }
    AxisVector(axis * theta)
}

/// Uniform sample on SO(3) from a normalized Gaussian 4-vector.
pub fn random_rotation_with<R: Rng + ?Sized>(rng: &mut R) -> RotationMatrix {
    quat_to_matrix(&random_unit_quaternion(rng))
}

pub fn random_unit_quaternion<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion {
    loop {
        let v = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if let Some(q) = RawQuaternion::from_vector(&v).normalize(1e-6) {
            return q;
        }
    }
}

pub fn random_rotation(seed: u64) -> RotationMatrix {
    random_rotation_with(&mut ChaCha8Rng::seed_from_u64(seed))
}
