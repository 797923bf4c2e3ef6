//! Rotation and pose representations, distances on SO(3) and SE(3),
//! pose-regression losses, a small gradient-descent convergence lab and
//! KITTI trajectory evaluation.
//!
//! ```
//! use posekit::metrics::{dist_chordal_so3, dist_geodesic};
//! use posekit::rotations::RotationMatrix;
//!
//! let a = RotationMatrix::identity();
//! let b = RotationMatrix::rot_z(std::f64::consts::FRAC_PI_2);
//! assert!((dist_geodesic(&a, &b) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
//! assert!((dist_chordal_so3(&a, &b) - 2.0).abs() < 1e-15);
//! ```

pub mod cli;
pub mod convlab;
pub mod losses;
pub mod metrics;
pub mod poses;
pub mod rotations;
pub mod trajeval;

pub use poses::Transform;
pub use rotations::{AxisVector, EulerAngles, RawQuaternion, RotationMatrix, UnitQuaternion};
