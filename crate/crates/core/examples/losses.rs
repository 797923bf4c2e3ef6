//! Evaluates the three pose losses on one batch and checks the analytic
//! SE(3) gradient against central finite differences.
//!
//! `cargo run --example losses`

use nalgebra::Vector3;
use posekit::losses::{
    grad_fd, grad_se3_analytic, loss_original, loss_quat, loss_se3, relative_error, LossWeights,
    PoseBatch, Se3Loss, DEFAULT_FD_STEP,
};
use posekit::poses::{transform_to_pose6, transform_to_pose7, transform_to_tangent, Transform};
use posekit::rotations::{exp_so3, AxisVector};

fn main() {
    let w = LossWeights::default();
    let targets = vec![
        Transform::new(exp_so3(&AxisVector::new(0.0, 0.0, 1.0)), Vector3::new(1.0, 2.0, 0.0)),
        Transform::new(exp_so3(&AxisVector::new(0.5, -0.2, 0.1)), Vector3::new(0.0, -1.0, 3.0)),
    ];
    // Estimates: the targets nudged by a fixed twist.
    let nudge = Transform::new(exp_so3(&AxisVector::new(0.05, 0.02, -0.1)), Vector3::new(0.1, 0.0, -0.05));
    let est: Vec<Transform> = targets.iter().map(|t| *t * nudge).collect();

    let b6 = PoseBatch::new(1, 2, targets.clone(), est.iter().map(|t| transform_to_pose6(t).unwrap()).collect()).unwrap();
    let b7 = PoseBatch::new(1, 2, targets.clone(), est.iter().map(transform_to_pose7).collect()).unwrap();
    let bt = PoseBatch::new(1, 2, targets, est.iter().map(transform_to_tangent).collect()).unwrap();

    println!("weights k1={} k2={} k3={}", w.k1, w.k2, w.k3);
    println!("original {:.6}", loss_original(&b6, w.k1).unwrap());
    println!("quat     {:.6}", loss_quat(&b7, w.k2));
    println!("se3      {:.6}", loss_se3(&bt, w.k3));

    let analytic = grad_se3_analytic(&bt, w.k3).unwrap();
    let numeric = grad_fd(&Se3Loss { k3: w.k3 }, &bt, DEFAULT_FD_STEP).unwrap();
    println!("analytic gradient {analytic:.4?}");
    println!("numeric  gradient {numeric:.4?}");
    println!("relative error    {:.2e}", relative_error(&analytic, &numeric));
}
