//! Builds a ground-truth trajectory, derives a drifting estimate, writes
//! both as KITTI files and evaluates APE and RPE.
//!
//! `cargo run --example trajectory`

use nalgebra::Vector3;
use posekit::poses::Transform;
use posekit::rotations::RotationMatrix;
use posekit::trajeval::{ape, load_kitti, rpe, write_kitti, ErrorMode, Trajectory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A circle of 200 poses, 0.1 rad of yaw and 0.5 m forward per step.
    let step = Transform::new(RotationMatrix::rot_z(0.1), Vector3::new(0.5, 0.0, 0.0));
    let mut pose = Transform::identity();
    let gt: Vec<Transform> = (0..200)
        .map(|_| {
            let p = pose;
            pose = pose * step;
            p
        })
        .collect();
    // The estimate over-measures every step by 2 cm and 0.002 rad.
    let biased = Transform::new(RotationMatrix::rot_z(0.102), Vector3::new(0.52, 0.0, 0.0));
    let mut pose = Transform::identity();
    let est: Vec<Transform> = (0..200)
        .map(|_| {
            let p = pose;
            pose = pose * biased;
            p
        })
        .collect();

    let dir = std::env::temp_dir();
    let (gt_path, est_path) = (dir.join("posekit_gt.txt"), dir.join("posekit_est.txt"));
    write_kitti(std::fs::File::create(&gt_path)?, &Trajectory::new(gt))?;
    write_kitti(std::fs::File::create(&est_path)?, &Trajectory::new(est))?;
    let gt = load_kitti(&gt_path)?;
    let est = load_kitti(&est_path)?;

    for mode in [ErrorMode::Trans, ErrorMode::Rot] {
        let a = ape(&gt, &est, mode)?;
        let r = rpe(&gt, &est, 1, mode)?;
        println!("{mode:?}: APE rmse {:.4} max {:.4} | RPE rmse {:.4} max {:.4}", a.rmse, a.max, r.rmse, r.max);
    }
    Ok(())
}
