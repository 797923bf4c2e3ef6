//! Round-trips one rotation through every representation and shows the
//! gimbal-lock and double-cover corner cases.
//!
//! `cargo run --example conversions`

use std::f64::consts::FRAC_PI_2;

use posekit::rotations::{
    euler_to_matrix, exp_so3, log_so3, matrix_to_euler, matrix_to_quat, quat_to_matrix,
    AxisVector, EulerAngles,
};

fn main() {
    let angles = EulerAngles::new(0.3, -0.2, 1.1);
    let r = euler_to_matrix(&angles);
    let q = matrix_to_quat(&r);
    let w = log_so3(&r);
    println!("euler      {angles:?}");
    println!("matrix     {}", r.matrix());
    println!("quaternion w={:.6} x={:.6} y={:.6} z={:.6}", q.w(), q.x(), q.y(), q.z());
    println!("axis-angle {:?} (angle {:.6} rad)", w.vector().as_slice(), w.angle());

    let back = matrix_to_euler(&quat_to_matrix(&q)).expect("pitch is far from +-pi/2");
    let drift = (back.to_vector() - angles.to_vector()).norm();
    println!("euler -> matrix -> quat -> matrix -> euler drift {drift:.2e}");
    let drift = (exp_so3(&w).matrix() - r.matrix()).norm();
    println!("matrix -> log -> exp drift {drift:.2e}");

    // At pitch = pi/2 only yaw - roll is observable.
    let locked = EulerAngles::new(0.4, FRAC_PI_2, 0.1);
    match matrix_to_euler(&euler_to_matrix(&locked)) {
        Ok(e) => println!("unexpected regular decomposition {e:?}"),
        Err(lock) => println!("gimbal lock: canonical angles {:?}", lock.canonical),
    }

    // q and -q are the same rotation.
    let pi_turn = exp_so3(&AxisVector::new(0.0, 0.0, std::f64::consts::PI));
    let q = matrix_to_quat(&pi_turn);
    let same = (quat_to_matrix(&q).matrix() - quat_to_matrix(&(-q)).matrix()).norm();
    println!("half turn about z: q = {:?}, |R(q) - R(-q)| = {same:.1e}", q.raw());
}
