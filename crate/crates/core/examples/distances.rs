//! Compares the five distances on a pair of poses and checks the
//! chord/arc relation between the chordal and geodesic distances.
//!
//! `cargo run --example distances`

use nalgebra::Vector3;
use posekit::metrics::{
    dist_chordal_se3, dist_chordal_so3, dist_euler, dist_geodesic, dist_quat,
};
use posekit::poses::Transform;
use posekit::rotations::{euler_to_matrix, matrix_to_quat, EulerAngles};

fn main() {
    let ea = EulerAngles::new(0.1, 0.2, -0.3);
    let eb = EulerAngles::new(2.5, -0.4, 1.0);
    let (ra, rb) = (euler_to_matrix(&ea), euler_to_matrix(&eb));
    let (qa, qb) = (matrix_to_quat(&ra).raw(), matrix_to_quat(&rb).raw());

    let geodesic = dist_geodesic(&ra, &rb);
    let chordal = dist_chordal_so3(&ra, &rb);
    println!("euler       {:.6}", dist_euler(&ea, &eb));
    println!("quat        {:.6}", dist_quat(&qa, &qb));
    println!("geodesic    {geodesic:.6} rad");
    println!("chordal-so3 {chordal:.6}");
    println!(
        "2*sqrt(2)*sin(geodesic/2) = {:.6}",
        2.0 * 2f64.sqrt() * (geodesic / 2.0).sin()
    );

    let ta = Transform::new(ra, Vector3::new(1.0, 0.0, 0.0));
    let tb = Transform::new(rb, Vector3::new(0.0, 2.0, 0.5));
    println!("chordal-se3 {:.6}", dist_chordal_se3(&ta, &tb));

    // The same rotation written two ways: Euler and quaternion distances
    // disagree with the rotation-level ones.
    let wrapped = EulerAngles::new(ea.yaw + 2.0 * std::f64::consts::PI, ea.pitch, ea.roll);
    println!(
        "yaw + 2pi: euler distance {:.4}, geodesic {:.1e}",
        dist_euler(&ea, &wrapped),
        dist_geodesic(&ra, &euler_to_matrix(&wrapped))
    );
    println!(
        "q vs -q:   quat distance {:.4}",
        dist_quat(&qa, &-qa)
    );
}
