//! Small-scale convergence lab: plain gradient descent on each pose loss,
//! fitting a single estimate to a synthetic target.
//!
//! Every head starts from the identity pose. Progress is measured the same
//! way for all three losses, as the geodesic rotation error and Euclidean
//! translation error of the current estimate, so runs with different
//! losses can be compared directly even though their loss values can't.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::{
    grad_fd, grad_se3_analytic, LossError, LossWeights, OriginalLoss, PoseBatch, PoseLoss,
    QuatLoss, Se3Loss,
};
use crate::metrics::{dist_geodesic, trial_rng};
use crate::poses::{
    pose6_to_transform, pose7_to_transform, tangent_to_transform, Pose6, Pose7, PoseError,
    TangentPose, Transform,
};
use crate::rotations::{exp_so3, AxisVector};

/// A fit is abandoned once its loss exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Original,
    Quat,
    Se3,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Original, LossKind::Quat, LossKind::Se3];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Original => "original",
            LossKind::Quat => "quat",
            LossKind::Se3 => "se3",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(LossKind::Original),
            "quat" => Ok(LossKind::Quat),
            "se3" => Ok(LossKind::Se3),
            other => Err(format!("unknown loss kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid lab configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub trials: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    /// `[low, high]` in radians for the target rotation angle.
    pub angle_range: (f64, f64),
    /// Target translations are drawn from `[-trans_range, trans_range]^3`.
    pub trans_range: f64,
    /// Geodesic rotation error (radians) counted as converged.
    pub tolerance: f64,
    pub weights: LossWeights,
    pub fd_step: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            steps: 2000,
            lr: 0.01,
            seed: 0,
            angle_range: (0.9 * PI, PI),
            trans_range: 1.0,
            tolerance: 0.01,
            weights: LossWeights::unit(),
            fd_step: crate::losses::DEFAULT_FD_STEP,
        }
    }
}

impl LabConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        let (lo, hi) = self.angle_range;
        let bad = |msg: &str| Err(LabError::Config(msg.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0 <= lo && lo <= hi && hi <= PI) {
            return bad("angle range must satisfy 0 <= low <= high <= pi");
        }
        if !(self.trans_range >= 0.0 && self.trans_range.is_finite()) {
            return bad("trans_range must be non-negative");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step must be positive");
        }
        LossWeights::new(self.weights.k1, self.weights.k2, self.weights.k3)?;
        Ok(())
    }
}

pub fn sample_target_with<R: Rng + ?Sized>(
    rng: &mut R,
    angle_range: (f64, f64),
    trans_range: f64,
) -> Transform {
    let axis = loop {
        let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-6 {
            break v / n;
        }
    };
    let (lo, hi) = angle_range;
    let angle = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let t = if trans_range > 0.0 {
        Vector3::from_fn(|_, _| rng.gen_range(-trans_range..=trans_range))
    } else {
        Vector3::zeros()
    };
    Transform::new(exp_so3(&AxisVector(axis * angle)), t)
}

/// Random axis, angle uniform in `angle_range`, translation uniform in the cube.
pub fn sample_target(seed: u64, angle_range: (f64, f64), trans_range: f64) -> Transform {
    sample_target_with(&mut ChaCha8Rng::seed_from_u64(seed), angle_range, trans_range)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub rot_err_rad: f64,
    pub trans_err_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitTrace {
    pub loss_kind: LossKind,
    pub records: Vec<StepRecord>,
    pub converged: bool,
    pub steps_to_tolerance: Option<usize>,
    /// Set when the loss passed [`DIVERGENCE_LIMIT`] or stopped being finite.
    pub diverged: bool,
    #[serde(skip)]
    pub final_estimate: Transform,
}

impl FitTrace {
    pub fn final_record(&self) -> Option<&StepRecord> {
        self.records.last()
    }
}

trait Head: PoseLoss + Sized {
    fn initial(&self) -> Self::Estimate;
    fn to_transform(&self, e: &Self::Estimate) -> Result<Transform, LabError>;
    fn gradient(&self, batch: &PoseBatch<Self::Estimate>, h: f64) -> Result<Vec<f64>, LabError> {
        Ok(grad_fd(self, batch, h)?)
    }
}

impl Head for OriginalLoss {
    fn initial(&self) -> Pose6 {
        Pose6::default()
    }

    fn to_transform(&self, e: &Pose6) -> Result<Transform, LabError> {
        Ok(pose6_to_transform(e))
    }
}

impl Head for QuatLoss {
    fn initial(&self) -> Pose7 {
        Pose7::default()
    }

    fn to_transform(&self, e: &Pose7) -> Result<Transform, LabError> {
        Ok(pose7_to_transform(e)?)
    }
}

impl Head for Se3Loss {
    fn initial(&self) -> TangentPose {
        TangentPose::default()
    }

    fn to_transform(&self, e: &TangentPose) -> Result<Transform, LabError> {
        Ok(tangent_to_transform(e))
    }

    /// Closed form, except next to pi where the right Jacobian degenerates.
    fn gradient(&self, batch: &PoseBatch<TangentPose>, h: f64) -> Result<Vec<f64>, LabError> {
        match grad_se3_analytic(batch, self.k3) {
            Err(LossError::NearPiEstimate { .. }) => Ok(grad_fd(self, batch, h)?),
            other => Ok(other?),
        }
    }
}

fn descend<H: Head>(head: &H, target: &Transform, config: &LabConfig) -> Result<FitTrace, LabError> {
    let mut batch = PoseBatch::single(*target, head.initial());
    let mut params = batch.params();
    let mut records = Vec::new();
    let mut steps_to_tolerance = None;
    let mut diverged = false;
    let mut estimate = head.to_transform(&batch.estimates()[0])?;

    for step in 0..=config.steps {
        let loss = head.evaluate(&batch)?;
        estimate = head.to_transform(&batch.estimates()[0])?;
        let rot_err_rad = dist_geodesic(&target.rotation, &estimate.rotation);
        let trans_err_m = (target.translation - estimate.translation).norm();
        records.push(StepRecord {
            step,
            loss,
            rot_err_rad,
            trans_err_m,
        });
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            diverged = true;
            break;
        }
        if rot_err_rad < config.tolerance {
            steps_to_tolerance = Some(step);
            break;
        }
        if step == config.steps {
            break;
        }
        let grad = head.gradient(&batch, config.fd_step)?;
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.lr * g;
        }
        batch = batch.with_params(&params);
    }

    Ok(FitTrace {
        loss_kind: LossKind::Original,
        converged: steps_to_tolerance.is_some(),
        steps_to_tolerance,
        diverged,
        records,
        final_estimate: estimate,
    })
}

/// Gradient descent from the identity toward `target` with the chosen loss.
///
/// The Euler and quaternion heads use central differences; the SE(3) head
/// uses its closed-form gradient. Stops at the step budget, on reaching the
/// rotation tolerance, or on divergence (which is flagged in the trace, not
/// returned as an error).
pub fn fit(kind: LossKind, target: &Transform, config: &LabConfig) -> Result<FitTrace, LabError> {
    config.validate()?;
    let w = config.weights;
    let mut trace = match kind {
        LossKind::Original => descend(&OriginalLoss { k1: w.k1 }, target, config)?,
        LossKind::Quat => descend(&QuatLoss { k2: w.k2 }, target, config)?,
        LossKind::Se3 => descend(&Se3Loss { k3: w.k3 }, target, config)?,
    };
    trace.loss_kind = kind;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindSummary {
    pub kind: LossKind,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Median over the successful trials only.
    pub median_steps_to_tolerance: Option<f64>,
    pub diverged: usize,
    /// Trials that could not run at all (e.g. a target at gimbal lock for
    /// the Euler head).
    pub errors: usize,
    /// Median loss at each step across trials; finished trials hold their
    /// last value.
    pub median_loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub config: LabConfig,
    pub rows: Vec<KindSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialTrace {
    pub kind: LossKind,
    pub trial: usize,
    pub trace: Result<FitTrace, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub table: ComparisonTable,
    pub traces: Vec<TrialTrace>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn summarize(kind: LossKind, traces: &[&TrialTrace]) -> KindSummary {
    let ok: Vec<&FitTrace> = traces.iter().filter_map(|t| t.trace.as_ref().ok()).collect();
    let successes = ok.iter().filter(|t| t.converged).count();
    let mut steps: Vec<f64> = ok
        .iter()
        .filter_map(|t| t.steps_to_tolerance.map(|s| s as f64))
        .collect();
    let longest = ok.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let median_loss_curve = (0..longest)
        .map(|s| {
            let mut at: Vec<f64> = ok
                .iter()
                .filter_map(|t| t.records.get(s).or(t.records.last()).map(|r| r.loss))
                .collect();
            median(&mut at).unwrap_or(f64::NAN)
        })
        .collect();
    KindSummary {
        kind,
        trials: traces.len(),
        successes,
        success_rate: successes as f64 / traces.len().max(1) as f64,
        median_steps_to_tolerance: median(&mut steps),
        diverged: ok.iter().filter(|t| t.diverged).count(),
        errors: traces.len() - ok.len(),
        median_loss_curve,
    }
}

/// Runs every loss kind on the same `trials` targets. Target `i` comes from
/// the stream `(seed, i)`, so the table is identical for any thread count.
pub fn compare(config: &LabConfig) -> Result<Comparison, LabError> {
    config.validate()?;
    let targets: Vec<Transform> = (0..config.trials)
        .map(|i| sample_target_with(&mut trial_rng(config.seed, i), config.angle_range, config.trans_range))
        .collect();
    compare_targets(&targets, config)
}

/// [`compare`] over caller-supplied targets; `config.trials` is ignored.
pub fn compare_targets(targets: &[Transform], config: &LabConfig) -> Result<Comparison, LabError> {
    config.validate()?;
    let jobs: Vec<(LossKind, usize)> = LossKind::ALL
        .iter()
        .flat_map(|&k| (0..targets.len()).map(move |i| (k, i)))
        .collect();
    let traces: Vec<TrialTrace> = jobs
        .into_par_iter()
        .map(|(kind, trial)| TrialTrace {
            kind,
            trial,
            trace: fit(kind, &targets[trial], config).map_err(|e| e.to_string()),
        })
        .collect();
    let rows = LossKind::ALL
        .iter()
        .map(|&kind| {
            let of_kind: Vec<&TrialTrace> = traces.iter().filter(|t| t.kind == kind).collect();
            summarize(kind, &of_kind)
        })
        .collect();
    let mut config = *config;
    config.trials = targets.len();
    Ok(Comparison {
        table: ComparisonTable { config, rows },
        traces,
    })
}

/// CSV with columns `kind,trial,step,loss,rot_err_rad,trans_err_m`.
pub fn write_traces_csv<'a, W, I>(out: W, traces: I) -> csv::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (LossKind, usize, &'a FitTrace)>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "trial", "step", "loss", "rot_err_rad", "trans_err_m"])?;
    for (kind, trial, trace) in traces {
        for r in &trace.records {
            w.write_record([
                kind.as_str().to_string(),
                trial.to_string(),
                r.step.to_string(),
                r.loss.to_string(),
                r.rot_err_rad.to_string(),
                r.trans_err_m.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
