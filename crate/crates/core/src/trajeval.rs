//! KITTI-format trajectories and absolute / relative pose error.
//!
//! A KITTI pose file has one camera-to-world pose per line: the 12 entries
//! of the row-major 3x4 matrix `[R | t]`, whitespace separated. Blank lines
//! and lines starting with `#` are skipped.
//!
//! Errors are not preceded by any trajectory alignment.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::metrics::dist_geodesic;
use crate::poses::{relative, Transform};
use crate::rotations::{orthonormality_defect, rotation_angle, RotationMatrix};

/// Defects above this are reported when a rotation is re-orthonormalized.
pub const REORTHONORMALIZE_WARN: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: rotation block is not a proper rotation (det {det:.6})")]
    InvalidRotation { line: usize, det: f64 },
    #[error("trajectory lengths differ: ground truth has {gt} poses, estimate has {est}")]
    LengthMismatch { gt: usize, est: usize },
    #[error("delta {delta} needs more than {len} poses")]
    DeltaTooLarge { delta: usize, len: usize },
    #[error("trajectory is empty")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Trajectory {
    pub poses: Vec<Transform>,
}

impl Trajectory {
    pub fn new(poses: Vec<Transform>) -> Self {
        Self { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Left-multiplies every pose by `offset` (a change of world frame).
    pub fn transformed(&self, offset: &Transform) -> Self {
        Self::new(self.poses.iter().map(|p| *offset * *p).collect())
    }
}

fn parse_line(line_no: usize, line: &str) -> Result<Transform, TrajectoryError> {
    let values = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| TrajectoryError::Parse {
                line: line_no,
                reason: format!("`{tok}` is not a number"),
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.len() != 12 {
        return Err(TrajectoryError::Parse {
            line: line_no,
            reason: format!("expected 12 values, found {}", values.len()),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(TrajectoryError::Parse {
            line: line_no,
            reason: "non-finite value".to_string(),
        });
    }
    let r = Matrix3::from_fn(|i, j| values[4 * i + j]);
    let t = Vector3::new(values[3], values[7], values[11]);

    let det = r.determinant();
    if det <= 0.0 {
        return Err(TrajectoryError::InvalidRotation { line: line_no, det });
    }
    let rotation = match RotationMatrix::new(r) {
        Ok(rot) => rot,
        Err(_) => {
            let defect = orthonormality_defect(&r);
            if defect > REORTHONORMALIZE_WARN {
                log::warn!("line {line_no}: re-orthonormalizing rotation with defect {defect:.3e}");
            }
            RotationMatrix::project(&r)
                .map_err(|_| TrajectoryError::InvalidRotation { line: line_no, det })?
        }
    };
    Ok(Transform::new(rotation, t))
}

/// Parses KITTI poses from any reader. Line numbers in errors are 1-based.
pub fn parse_kitti<R: BufRead>(reader: R) -> Result<Trajectory, TrajectoryError> {
    let mut poses = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| TrajectoryError::Io {
            path: "<reader>".to_string(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        poses.push(parse_line(i + 1, trimmed)?);
    }
    Ok(Trajectory::new(poses))
}

pub fn load_kitti(path: impl AsRef<Path>) -> Result<Trajectory, TrajectoryError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TrajectoryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_kitti(BufReader::new(file))
}

/// Writes one KITTI line per pose, using the shortest representation that
/// reads back to the same `f64`.
pub fn write_kitti<W: Write>(mut out: W, traj: &Trajectory) -> std::io::Result<()> {
    for p in &traj.poses {
        let r = p.rotation.matrix();
        let t = &p.translation;
        let fields: Vec<String> = (0..3)
            .flat_map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]])
            .map(|v| format!("{v:e}"))
            .collect();
        writeln!(out, "{}", fields.join(" "))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// Metres.
    Trans,
    /// Radians, as a geodesic angle.
    Rot,
}

impl std::str::FromStr for ErrorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trans" => Ok(ErrorMode::Trans),
            "rot" => Ok(ErrorMode::Rot),
            other => Err(format!("unknown error mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64]) -> Option<Self> {
        if errors.is_empty() {
            return None;
        }
        let n = errors.len() as f64;
        let mut sorted = errors.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        let sum = crate::losses::pairwise_sum(errors);
        let squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
        let sum_sq = crate::losses::pairwise_sum(&squares);
        Some(Self {
            rmse: (sum_sq / n).sqrt(),
            mean: sum / n,
            median,
            min: sorted[0],
            max: sorted[k - 1],
            count: errors.len(),
        })
    }
}

/// Per-frame errors together with their summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub stats: ErrorStats,
    pub errors: Vec<f64>,
}

impl ErrorReport {
    /// CSV with columns `index,error`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "error"])?;
        for (i, e) in self.errors.iter().enumerate() {
            w.write_record([i.to_string(), e.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_lengths(gt: &Trajectory, est: &Trajectory) -> Result<(), TrajectoryError> {
    if gt.len() != est.len() {
        return Err(TrajectoryError::LengthMismatch {
            gt: gt.len(),
            est: est.len(),
        });
    }
    if gt.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    Ok(())
}

fn report(errors: Vec<f64>) -> Result<ErrorReport, TrajectoryError> {
    let stats = ErrorStats::from_errors(&errors).ok_or(TrajectoryError::Empty)?;
    Ok(ErrorReport { stats, errors })
}

/// Absolute pose error per frame: `||t(gt_i^-1 est_i)||` or the geodesic
/// angle between the two rotations.
pub fn ape_report(
    gt: &Trajectory,
    est: &Trajectory,
    mode: ErrorMode,
) -> Result<ErrorReport, TrajectoryError> {
    check_lengths(gt, est)?;
    let errors = gt
        .poses
        .iter()
        .zip(&est.poses)
        .map(|(g, e)| match mode {
            ErrorMode::Trans => relative(g, e).translation.norm(),
            ErrorMode::Rot => dist_geodesic(&g.rotation, &e.rotation),
        })
        .collect();
    report(errors)
}

pub fn ape(gt: &Trajectory, est: &Trajectory, mode: ErrorMode) -> Result<ErrorStats, TrajectoryError> {
    Ok(ape_report(gt, est, mode)?.stats)
}

/// Relative pose error over `delta` frames: the discrepancy between the
/// ground-truth motion `gt_i -> gt_{i+delta}` and the estimated one.
pub fn rpe_report(
    gt: &Trajectory,
    est: &Trajectory,
    delta: usize,
    mode: ErrorMode,
) -> Result<ErrorReport, TrajectoryError> {
    check_lengths(gt, est)?;
    if delta == 0 || delta >= gt.len() {
        return Err(TrajectoryError::DeltaTooLarge {
            delta,
            len: gt.len(),
        });
    }
    let errors = (0..gt.len() - delta)
        .map(|i| {
            let motion_gt = relative(&gt.poses[i], &gt.poses[i + delta]);
            let motion_est = relative(&est.poses[i], &est.poses[i + delta]);
            let d = relative(&motion_gt, &motion_est);
            match mode {
                ErrorMode::Trans => d.translation.norm(),
                ErrorMode::Rot => rotation_angle(&d.rotation),
            }
        })
        .collect();
    report(errors)
}

pub fn rpe(
    gt: &Trajectory,
    est: &Trajectory,
    delta: usize,
    mode: ErrorMode,
) -> Result<ErrorStats, TrajectoryError> {
    Ok(rpe_report(gt, est, delta, mode)?.stats)
}
