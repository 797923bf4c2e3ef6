//! Pose-regression losses over batches of (target, estimate) pairs.
//!
//! A batch holds `N` observations of `M` poses each. Every loss sums the
//! per-pose terms over both indices and divides by `N` only:
//!
//! * original: `||t - t'||^2 + k1 ||phi - phi'||^2` on Euler triplets,
//! * quaternion: `||t - t'||^2 + k2 min_b ||q - b q'||^2`, `b` in {-1, +1},
//! * SE(3): `||t - t'||^2 + k3 ||R - exp(w')||_F^2`.
//!
//! Sums use a fixed pairwise tree so results do not depend on how the
//! per-pose terms were computed.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poses::{transform_to_pose6, Pose6, Pose7, TangentPose, Transform};
use crate::rotations::{
    exp_so3, matrix_to_quat, vee_unchecked, AxisVector, EulerAngles, RawQuaternion,
};

/// Estimates whose rotation angle is this close to pi are rejected by the
/// analytic SE(3) gradient.
pub const NEAR_PI_MARGIN: f64 = 1e-3;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("batch shape {observations}x{steps} does not match {targets} targets and {estimates} estimates")]
    Shape {
        observations: usize,
        steps: usize,
        targets: usize,
        estimates: usize,
    },
    #[error("target pose {index} is at gimbal lock and has no canonical Euler angles")]
    GimbalLockTarget { index: usize },
    #[error("estimate {index} has rotation angle {angle:.6}, within 1e-3 of pi")]
    NearPiEstimate { index: usize, angle: f64 },
    #[error("loss weight {name} must be positive and finite, got {value}")]
    BadWeight { name: &'static str, value: f64 },
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error("batches have different sequence lengths ({0} vs {1})")]
    StepMismatch(usize, usize),
}

/// Weights balancing rotation against translation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            k1: 100.0,
            k2: 14.0,
            k3: 153.0,
        }
    }
}

impl LossWeights {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self, LossError> {
        for (name, value) in [("k1", k1), ("k2", k2), ("k3", k3)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(LossError::BadWeight { name, value });
            }
        }
        Ok(Self { k1, k2, k3 })
    }

    pub fn unit() -> Self {
        Self {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
        }
    }
}

/// A pose estimate that can be flattened into optimizer parameters.
pub trait PoseParams: Copy + Send + Sync {
    const DIM: usize;

    fn write_params(&self, out: &mut [f64]);
    fn from_params(params: &[f64]) -> Self;
}

impl PoseParams for Pose6 {
    const DIM: usize = 6;

    fn write_params(&self, out: &mut [f64]) {
        out[..3].copy_from_slice(self.translation.as_slice());
        out[3] = self.angles.yaw;
        out[4] = self.angles.pitch;
        out[5] = self.angles.roll;
    }

    fn from_params(p: &[f64]) -> Self {
        Pose6 {
            translation: Vector3::new(p[0], p[1], p[2]),
            angles: EulerAngles::new(p[3], p[4], p[5]),
        }
    }
}

impl PoseParams for Pose7 {
    const DIM: usize = 7;

    fn write_params(&self, out: &mut [f64]) {
        out[..3].copy_from_slice(self.translation.as_slice());
        out[3..7].copy_from_slice(self.quaternion.to_vector().as_slice());
    }

    fn from_params(p: &[f64]) -> Self {
        Pose7 {
            translation: Vector3::new(p[0], p[1], p[2]),
            quaternion: RawQuaternion::new(p[3], p[4], p[5], p[6]),
        }
    }
}

impl PoseParams for TangentPose {
    const DIM: usize = 6;

    fn write_params(&self, out: &mut [f64]) {
        out[..3].copy_from_slice(self.translation.as_slice());
        out[3..6].copy_from_slice(self.rotation.vector().as_slice());
    }

    fn from_params(p: &[f64]) -> Self {
        TangentPose {
            translation: Vector3::new(p[0], p[1], p[2]),
            rotation: AxisVector::new(p[3], p[4], p[5]),
        }
    }
}

/// `N` observations of `M` poses, stored observation-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseBatch<E> {
    observations: usize,
    steps: usize,
    targets: Vec<Transform>,
    estimates: Vec<E>,
}

impl<E: PoseParams> PoseBatch<E> {
    pub fn new(
        observations: usize,
        steps: usize,
        targets: Vec<Transform>,
        estimates: Vec<E>,
    ) -> Result<Self, LossError> {
        let n = observations * steps;
        if observations == 0 || steps == 0 || targets.len() != n || estimates.len() != n {
            return Err(LossError::Shape {
                observations,
                steps,
                targets: targets.len(),
                estimates: estimates.len(),
            });
        }
        Ok(Self {
            observations,
            steps,
            targets,
            estimates,
        })
    }

    /// A 1x1 batch.
    pub fn single(target: Transform, estimate: E) -> Self {
        Self {
            observations: 1,
            steps: 1,
            targets: vec![target],
            estimates: vec![estimate],
        }
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn targets(&self) -> &[Transform] {
        &self.targets
    }

    pub fn estimates(&self) -> &[E] {
        &self.estimates
    }

    pub fn with_estimates(&self, estimates: Vec<E>) -> Result<Self, LossError> {
        Self::new(self.observations, self.steps, self.targets.clone(), estimates)
    }

    /// Appends the observations of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self, LossError> {
        if self.steps != other.steps {
            return Err(LossError::StepMismatch(self.steps, other.steps));
        }
        let mut targets = self.targets.clone();
        targets.extend_from_slice(&other.targets);
        let mut estimates = self.estimates.clone();
        estimates.extend_from_slice(&other.estimates);
        Self::new(
            self.observations + other.observations,
            self.steps,
            targets,
            estimates,
        )
    }

    /// Flattened parameters: `[pose 0 params, pose 1 params, ...]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.estimates.len() * E::DIM];
        for (e, chunk) in self.estimates.iter().zip(out.chunks_mut(E::DIM)) {
            e.write_params(chunk);
        }
        out
    }

    pub fn with_params(&self, params: &[f64]) -> Self {
        let estimates = params.chunks(E::DIM).map(E::from_params).collect();
        Self {
            observations: self.observations,
            steps: self.steps,
            targets: self.targets.clone(),
            estimates,
        }
    }
}

/// Sum by recursive halving; the tree depends only on the slice length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

fn batch_mean(terms: &[f64], observations: usize) -> f64 {
    pairwise_sum(terms) / observations as f64
}

pub fn loss_original(batch: &PoseBatch<Pose6>, k1: f64) -> Result<f64, LossError> {
    let terms = batch
        .targets
        .iter()
        .zip(&batch.estimates)
        .enumerate()
        .map(|(index, (target, est))| {
            let target = transform_to_pose6(target)
                .map_err(|_| LossError::GimbalLockTarget { index })?;
            let dt = (target.translation - est.translation).norm_squared();
            let da = (target.angles.to_vector() - est.angles.to_vector()).norm_squared();
            Ok(dt + k1 * da)
        })
        .collect::<Result<Vec<_>, LossError>>()?;
    Ok(batch_mean(&terms, batch.observations))
}

/// Target quaternions are taken in the w >= 0 hemisphere; estimates are
/// used as given, unnormalized.
pub fn loss_quat(batch: &PoseBatch<Pose7>, k2: f64) -> f64 {
    let terms: Vec<f64> = batch
        .targets
        .iter()
        .zip(&batch.estimates)
        .map(|(target, est)| {
            let q = matrix_to_quat(&target.rotation).raw().to_vector();
            let e = est.quaternion.to_vector();
            let rot = (q - e).norm_squared().min((q + e).norm_squared());
            (target.translation - est.translation).norm_squared() + k2 * rot
        })
        .collect();
    batch_mean(&terms, batch.observations)
}

pub fn loss_se3(batch: &PoseBatch<TangentPose>, k3: f64) -> f64 {
    let terms: Vec<f64> = batch
        .targets
        .iter()
        .zip(&batch.estimates)
        .map(|(target, est)| {
            let r_hat = exp_so3(&est.rotation);
            let rot = (target.rotation.matrix() - r_hat.matrix()).norm_squared();
            (target.translation - est.translation).norm_squared() + k3 * rot
        })
        .collect();
    batch_mean(&terms, batch.observations)
}

/// A loss over batches of one estimate type, usable by [`grad_fd`].
pub trait PoseLoss: Sync {
    type Estimate: PoseParams;

    fn name(&self) -> &'static str;
    fn evaluate(&self, batch: &PoseBatch<Self::Estimate>) -> Result<f64, LossError>;
}

#[derive(Debug, Clone, Copy)]
pub struct OriginalLoss {
    pub k1: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QuatLoss {
    pub k2: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Se3Loss {
    pub k3: f64,
}

impl PoseLoss for OriginalLoss {
    type Estimate = Pose6;

    fn name(&self) -> &'static str {
        "original"
    }

    fn evaluate(&self, batch: &PoseBatch<Pose6>) -> Result<f64, LossError> {
        loss_original(batch, self.k1)
    }
}

impl PoseLoss for QuatLoss {
    type Estimate = Pose7;

    fn name(&self) -> &'static str {
        "quat"
    }

    fn evaluate(&self, batch: &PoseBatch<Pose7>) -> Result<f64, LossError> {
        Ok(loss_quat(batch, self.k2))
    }
}

impl PoseLoss for Se3Loss {
    type Estimate = TangentPose;

    fn name(&self) -> &'static str {
        "se3"
    }

    fn evaluate(&self, batch: &PoseBatch<TangentPose>) -> Result<f64, LossError> {
        Ok(loss_se3(batch, self.k3))
    }
}

/// Central differences `(L(x + h) - L(x - h)) / 2h`, one parameter at a
/// time, over the whole batch. Layout follows [`PoseBatch::params`].
pub fn grad_fd<L: PoseLoss>(
    loss: &L,
    batch: &PoseBatch<L::Estimate>,
    h: f64,
) -> Result<Vec<f64>, LossError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(LossError::BadStep(h));
    }
    let mut params = batch.params();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let x = params[i];
        params[i] = x + h;
        let plus = loss.evaluate(&batch.with_params(&params))?;
        params[i] = x - h;
        let minus = loss.evaluate(&batch.with_params(&params))?;
        params[i] = x;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Closed-form gradient of [`loss_se3`] with respect to every `(t', w')`.
///
/// With `M = R^T exp(w')`, a perturbation `exp(w' + d) = exp(w') exp(J_r d)`
/// changes `||R - exp(w')||_F^2 = 6 - 2 tr(M)` by `2 vee(M - M^T) . J_r d`,
/// so the rotation gradient is `2 k3 J_r^T vee(M - M^T) / N`.
pub fn grad_se3_analytic(batch: &PoseBatch<TangentPose>, k3: f64) -> Result<Vec<f64>, LossError> {
    let scale = 1.0 / batch.observations as f64;
    let mut grad = vec![0.0; batch.estimates.len() * TangentPose::DIM];
    for (index, ((target, est), out)) in batch
        .targets
        .iter()
        .zip(&batch.estimates)
        .zip(grad.chunks_mut(TangentPose::DIM))
        .enumerate()
    {
        let angle = est.rotation.angle();
        if angle >= std::f64::consts::PI - NEAR_PI_MARGIN {
            return Err(LossError::NearPiEstimate { index, angle });
        }
        let gt = (est.translation - target.translation) * (2.0 * scale);
        let m: Matrix3<f64> = target.rotation.matrix().transpose() * exp_so3(&est.rotation).matrix();
        let skew = vee_unchecked(&(m - m.transpose())).0;
        let jr = crate::poses::right_jacobian_so3(&est.rotation);
        let gw = jr.transpose() * skew * (2.0 * k3 * scale);
        out[..3].copy_from_slice(gt.as_slice());
        out[3..].copy_from_slice(gw.as_slice());
    }
    Ok(grad)
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poses::{transform_to_pose7, transform_to_tangent};
    use crate::rotations::RotationMatrix;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sample_target() -> Transform {
        Transform::new(
            crate::rotations::euler_to_matrix(&EulerAngles::new(0.4, -0.3, 1.2)),
            Vector3::new(1.0, -2.0, 0.5),
        )
    }

    #[test]
    fn default_weights() {
        let w = LossWeights::default();
        assert_eq!((w.k1, w.k2, w.k3), (100.0, 14.0, 153.0));
        assert!(LossWeights::new(1.0, 0.0, 1.0).is_err());
        assert!(LossWeights::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn batch_shape_is_checked() {
        let err = PoseBatch::<Pose6>::new(2, 2, vec![Transform::identity(); 4], vec![Pose6::default(); 3]);
        assert!(matches!(err, Err(LossError::Shape { .. })));
        assert!(PoseBatch::<Pose6>::new(0, 1, vec![], vec![]).is_err());
    }

    #[test]
    fn original_loss_examples() {
        let target = sample_target();
        let exact = transform_to_pose6(&target).unwrap();
        assert_eq!(loss_original(&PoseBatch::single(target, exact), 100.0).unwrap(), 0.0);

        let shifted = Pose6 {
            translation: Vector3::new(1.0, 0.0, 0.0),
            angles: EulerAngles::default(),
        };
        let batch = PoseBatch::single(Transform::identity(), shifted);
        assert_eq!(loss_original(&batch, 100.0).unwrap(), 1.0);

        let turned = Pose6 {
            translation: Vector3::zeros(),
            angles: EulerAngles::new(0.1, 0.0, 0.0),
        };
        let batch = PoseBatch::single(Transform::identity(), turned);
        assert_abs_diff_eq!(loss_original(&batch, 100.0).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn original_loss_rejects_gimbal_target() {
        let locked = Transform::from_rotation(RotationMatrix::rot_y(PI / 2.0));
        let batch = PoseBatch::single(locked, Pose6::default());
        assert_eq!(
            loss_original(&batch, 100.0),
            Err(LossError::GimbalLockTarget { index: 0 })
        );
    }

    #[test]
    fn quat_loss_examples() {
        let target = sample_target();
        let exact = transform_to_pose7(&target);
        assert_eq!(loss_quat(&PoseBatch::single(target, exact), 14.0), 0.0);

        let mut flipped = exact;
        flipped.quaternion = -exact.quaternion;
        assert_eq!(loss_quat(&PoseBatch::single(target, flipped), 14.0), 0.0);

        let short = Pose7 {
            translation: Vector3::zeros(),
            quaternion: RawQuaternion::new(0.9, 0.0, 0.0, 0.0),
        };
        // min(||(0.1, 0, 0, 0)||^2, ||(1.9, 0, 0, 0)||^2) = 0.01
        let v = loss_quat(&PoseBatch::single(Transform::identity(), short), 14.0);
        assert_abs_diff_eq!(v, 0.14, epsilon = 1e-14);
    }

    #[test]
    fn se3_loss_examples() {
        let target = sample_target();
        let exact = transform_to_tangent(&target);
        assert_abs_diff_eq!(loss_se3(&PoseBatch::single(target, exact), 153.0), 0.0, epsilon = 1e-25);

        let rz = Transform::from_rotation(RotationMatrix::rot_z(PI / 2.0));
        let single = PoseBatch::single(rz, TangentPose::default());
        assert_abs_diff_eq!(loss_se3(&single, 153.0), 612.0, epsilon = 1e-12);

        let zero = PoseBatch::single(Transform::identity(), TangentPose::default());
        let both = zero.concat(&single).unwrap();
        assert_eq!(both.observations(), 2);
        assert_abs_diff_eq!(loss_se3(&both, 153.0), 306.0, epsilon = 1e-12);
    }

    #[test]
    fn fd_gradient_of_translation_term() {
        let est = Pose6 {
            translation: Vector3::new(-1.0, 0.0, 0.0),
            angles: EulerAngles::default(),
        };
        let batch = PoseBatch::single(Transform::identity(), est);
        let g = grad_fd(&OriginalLoss { k1: 100.0 }, &batch, 1e-5).unwrap();
        // d/dt'_x (t_x - t'_x)^2 at t_x - t'_x = 1
        assert_abs_diff_eq!(g[0], -2.0, epsilon = 1e-6);
        assert!(grad_fd(&OriginalLoss { k1: 1.0 }, &batch, 0.0).is_err());
    }

    #[test]
    fn fd_gradient_vanishes_at_minimum() {
        let target = sample_target();
        let h = 1e-5;
        let g = grad_fd(
            &Se3Loss { k3: 153.0 },
            &PoseBatch::single(target, transform_to_tangent(&target)),
            h,
        )
        .unwrap();
        assert!(g.iter().all(|x| x.abs() < 10.0 * h * h), "{g:?}");
    }

    #[test]
    fn analytic_gradient_matches_fd() {
        let targets = vec![sample_target(), Transform::from_rotation(RotationMatrix::rot_x(2.9))];
        let estimates = vec![
            TangentPose {
                translation: Vector3::new(0.3, 0.1, -0.2),
                rotation: AxisVector::new(0.5, -1.0, 0.25),
            },
            TangentPose {
                translation: Vector3::zeros(),
                rotation: AxisVector::new(-0.1, 0.2, 3.0),
            },
        ];
        let batch = PoseBatch::new(1, 2, targets, estimates).unwrap();
        let a = grad_se3_analytic(&batch, 153.0).unwrap();
        let n = grad_fd(&Se3Loss { k3: 153.0 }, &batch, DEFAULT_FD_STEP).unwrap();
        assert!(relative_error(&a, &n) < 1e-5, "{a:?} vs {n:?}");
    }

    #[test]
    fn analytic_gradient_pure_translation() {
        let batch = PoseBatch::single(
            Transform::from_translation(Vector3::new(1.0, 2.0, 3.0)),
            TangentPose::default(),
        );
        let g = grad_se3_analytic(&batch, 153.0).unwrap();
        assert_eq!(&g[3..], &[0.0, 0.0, 0.0]);
        assert_eq!(&g[..3], &[-2.0, -4.0, -6.0]);
    }

    #[test]
    fn analytic_gradient_rejects_near_pi() {
        let est = TangentPose {
            translation: Vector3::zeros(),
            rotation: AxisVector::new(0.0, PI - 1e-4, 0.0),
        };
        let batch = PoseBatch::single(Transform::identity(), est);
        assert!(matches!(
            grad_se3_analytic(&batch, 1.0),
            Err(LossError::NearPiEstimate { index: 0, .. })
        ));
    }

    #[test]
    fn pairwise_sum_small_cases() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.5]), 1.5);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0, 4.0, 5.0]), 15.0);
    }
}
