//! Command-line front end. [`run`] is the whole program; the `posekit`
//! binary only forwards `std::env::args` and the standard streams.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors
//! (unparseable files, invalid rotations, mismatched trajectories).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use serde_json::json;

use crate::convlab::{self, LabConfig, LossKind};
use crate::losses::LossWeights;
use crate::metrics::{
    self, axiom_probe, EulerSampler, ProbeConfig, QuaternionSampler, RotationSampler,
    TransformSampler,
};
use crate::poses::Transform;
use crate::rotations::{
    euler_to_matrix, exp_so3, log_so3, matrix_to_euler, matrix_to_quat, quat_to_matrix,
    AxisVector, EulerAngles, RawQuaternion, RotationMatrix,
};
use crate::trajeval::{self, ErrorMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "posekit", version, about = "Rotation distances, pose losses and trajectory errors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a rotation between representations.
    Convert(ConvertArgs),
    /// Distance between two elements.
    Dist(DistArgs),
    /// Probe the metric axioms of a distance on random inputs.
    Axioms(AxiomsArgs),
    /// Gradient-descent fit of one random target; writes the trace as CSV.
    Fit(FitArgs),
    /// Run all three losses on the same targets; writes a JSON table.
    Compare(CompareArgs),
    /// Absolute or relative pose error between two KITTI trajectories.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rep {
    Euler,
    Quat,
    Matrix,
    Axis,
}

impl Rep {
    fn name(self) -> &'static str {
        match self {
            Rep::Euler => "euler",
            Rep::Quat => "quat",
            Rep::Matrix => "matrix",
            Rep::Axis => "axis",
        }
    }
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub from: Rep,
    #[arg(long, value_enum)]
    pub to: Rep,
    /// Comma-separated components: euler yaw,pitch,roll; quat w,x,y,z;
    /// matrix 9 row-major values; axis x,y,z. `identity` is also accepted.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    Euler,
    Quat,
    Geodesic,
    ChordalSo3,
    ChordalSe3,
}

impl DistKind {
    fn name(self) -> &'static str {
        match self {
            DistKind::Euler => "euler",
            DistKind::Quat => "quat",
            DistKind::Geodesic => "geodesic",
            DistKind::ChordalSo3 => "chordal-so3",
            DistKind::ChordalSe3 => "chordal-se3",
        }
    }
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long, value_enum)]
    pub kind: DistKind,
    /// First element, comma-separated, or `identity`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, allow_hyphen_values = true)]
    pub b: String,
    /// Representation of `--a`/`--b` for the rotation distances. Rigid
    /// transforms for chordal-se3 are always 12 row-major values of `[R|t]`.
    #[arg(long, value_enum, default_value = "matrix")]
    pub rep: Rep,
}

#[derive(Debug, Args)]
pub struct AxiomsArgs {
    #[arg(long, value_enum)]
    pub kind: DistKind,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct LabArgs {
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9 * std::f64::consts::PI, allow_hyphen_values = true)]
    pub angle_lo: f64,
    #[arg(long, default_value_t = std::f64::consts::PI, allow_hyphen_values = true)]
    pub angle_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub trans_range: f64,
    /// Geodesic rotation error (rad) counted as converged.
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k3: f64,
}

impl LabArgs {
    fn config(&self, trials: usize) -> LabConfig {
        LabConfig {
            trials,
            steps: self.steps,
            lr: self.lr,
            seed: self.seed,
            angle_range: (self.angle_lo, self.angle_hi),
            trans_range: self.trans_range,
            tolerance: self.tolerance,
            weights: LossWeights {
                k1: self.k1,
                k2: self.k2,
                k3: self.k3,
            },
            ..LabConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub loss: LossKind,
    #[command(flatten)]
    pub lab: LabArgs,
    /// Trace CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub lab: LabArgs,
    /// Table JSON destination. Per-kind trace CSVs are written next to it
    /// as `<stem>.<kind>.csv`. Without it the table goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Ape,
    Rpe,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Metric,
    #[arg(long)]
    pub mode: ErrorMode,
    #[arg(long, default_value_t = 1)]
    pub delta: usize,
    /// Optional per-frame error CSV (`index,error`).
    #[arg(long)]
    pub per_frame: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn data(err: impl std::fmt::Display) -> Failure {
    Failure::Data(err.to_string())
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. JSON and CSV documents go to `out`; diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Convert(args) => convert(args, out),
        Command::Dist(args) => dist(args, out),
        Command::Axioms(args) => axioms(args, out),
        Command::Fit(args) => fit(args, out),
        Command::Compare(args) => compare(args, out),
        Command::Eval(args) => eval(args, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\n{}", SYNOPSIS);
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}

const SYNOPSIS: &str = "\
usage: posekit convert --from REP --to REP --values V1,V2,...
       posekit dist --kind KIND --a VALUES --b VALUES [--rep REP]
       posekit axioms --kind KIND [--trials N] [--seed S]
       posekit fit --loss LOSS [--steps K] [--lr X] [--seed S] [--angle-lo A] [--angle-hi B] [--out trace.csv]
       posekit compare [--trials N] [--steps K] [--lr X] [--seed S] [--out table.json]
       posekit eval --gt gt.txt --est est.txt --metric {ape|rpe} --mode {trans|rot} [--delta D]";

fn emit(out: &mut dyn Write, value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(data)?;
    writeln!(out, "{text}").map_err(data)
}

fn parse_values(text: &str, expected: usize) -> Result<Vec<f64>, Failure> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("`{}` is not a number", s.trim())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(usage(format!(
            "expected {expected} comma-separated values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(usage("values must be finite"));
    }
    Ok(values)
}

fn arity(rep: Rep) -> usize {
    match rep {
        Rep::Euler | Rep::Axis => 3,
        Rep::Quat => 4,
        Rep::Matrix => 9,
    }
}

fn is_identity(text: &str) -> bool {
    text.trim().eq_ignore_ascii_case("identity")
}

fn parse_rotation(text: &str, rep: Rep) -> Result<RotationMatrix, Failure> {
    if is_identity(text) {
        return Ok(RotationMatrix::identity());
    }
    let v = parse_values(text, arity(rep))?;
    match rep {
        Rep::Euler => Ok(euler_to_matrix(&EulerAngles::new(v[0], v[1], v[2]))),
        Rep::Axis => Ok(exp_so3(&AxisVector::new(v[0], v[1], v[2]))),
        Rep::Quat => {
            let q = RawQuaternion::new(v[0], v[1], v[2], v[3])
                .normalize(crate::poses::MIN_QUATERNION_NORM)
                .ok_or_else(|| data("quaternion has zero length"))?;
            Ok(quat_to_matrix(&q))
        }
        Rep::Matrix => RotationMatrix::new(Matrix3::from_row_slice(&v)).map_err(data),
    }
}

fn parse_transform(text: &str) -> Result<Transform, Failure> {
    if is_identity(text) {
        return Ok(Transform::identity());
    }
    let v = parse_values(text, 12)?;
    let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
    let rotation = RotationMatrix::new(r).map_err(data)?;
    Ok(Transform::new(rotation, Vector3::new(v[3], v[7], v[11])))
}

fn convert(args: &ConvertArgs, out: &mut dyn Write) -> CmdResult {
    let r = parse_rotation(&args.values, args.from)?;
    let (values, gimbal_lock): (Vec<f64>, Option<bool>) = match args.to {
        Rep::Matrix => ((0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|ij| r.matrix()[ij]).collect(), None),
        Rep::Axis => (log_so3(&r).vector().iter().copied().collect(), None),
        Rep::Quat => {
            let q = matrix_to_quat(&r);
            (vec![q.w(), q.x(), q.y(), q.z()], None)
        }
        Rep::Euler => {
            let (e, locked) = match matrix_to_euler(&r) {
                Ok(e) => (e, false),
                Err(lock) => (lock.canonical, true),
            };
            (vec![e.yaw, e.pitch, e.roll], Some(locked))
        }
    };
    let mut doc = json!({
        "from": args.from.name(),
        "to": args.to.name(),
        "values": values,
    });
    if let Some(locked) = gimbal_lock {
        doc["gimbal_lock"] = json!(locked);
    }
    emit(out, &doc)
}

fn dist(args: &DistArgs, out: &mut dyn Write) -> CmdResult {
    let value = match args.kind {
        DistKind::Euler => {
            let parse = |s: &str| -> Result<EulerAngles, Failure> {
                if is_identity(s) {
                    return Ok(EulerAngles::default());
                }
                let v = parse_values(s, 3)?;
                Ok(EulerAngles::new(v[0], v[1], v[2]))
            };
            metrics::dist_euler(&parse(&args.a)?, &parse(&args.b)?)
        }
        DistKind::Quat => {
            let parse = |s: &str| -> Result<RawQuaternion, Failure> {
                if is_identity(s) {
                    return Ok(RawQuaternion::new(1.0, 0.0, 0.0, 0.0));
                }
                let v = parse_values(s, 4)?;
                Ok(RawQuaternion::new(v[0], v[1], v[2], v[3]))
            };
            metrics::dist_quat(&parse(&args.a)?, &parse(&args.b)?)
        }
        DistKind::Geodesic => metrics::dist_geodesic(
            &parse_rotation(&args.a, args.rep)?,
            &parse_rotation(&args.b, args.rep)?,
        ),
        DistKind::ChordalSo3 => metrics::dist_chordal_so3(
            &parse_rotation(&args.a, args.rep)?,
            &parse_rotation(&args.b, args.rep)?,
        ),
        DistKind::ChordalSe3 => {
            metrics::dist_chordal_se3(&parse_transform(&args.a)?, &parse_transform(&args.b)?)
        }
    };
    emit(out, &json!({ "kind": args.kind.name(), "value": value }))
}

fn axioms(args: &AxiomsArgs, out: &mut dyn Write) -> CmdResult {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let config = ProbeConfig {
        trials: args.trials,
        seed: args.seed,
        tolerance: args.tolerance,
    };
    let name = args.kind.name();
    match args.kind {
        DistKind::Euler => emit(
            out,
            &axiom_probe(
                name,
                metrics::dist_euler,
                &EulerSampler { gimbal_family: true },
                metrics::same_rotation_euler,
                config,
            )
            .map_err(|e| usage(e.to_string()))?,
        ),
        DistKind::Quat => emit(
            out,
            &axiom_probe(
                name,
                metrics::dist_quat,
                &QuaternionSampler { antipodal: true },
                metrics::same_quaternion,
                config,
            )
            .map_err(|e| usage(e.to_string()))?,
        ),
        DistKind::Geodesic | DistKind::ChordalSo3 => {
            let d = if args.kind == DistKind::Geodesic {
                metrics::dist_geodesic
            } else {
                metrics::dist_chordal_so3
            };
            emit(
                out,
                &axiom_probe(name, d, &RotationSampler, metrics::same_rotation, config)
                    .map_err(|e| usage(e.to_string()))?,
            )
        }
        DistKind::ChordalSe3 => emit(
            out,
            &axiom_probe(
                name,
                metrics::dist_chordal_se3,
                &TransformSampler { scale: 5.0 },
                metrics::same_transform,
                config,
            )
            .map_err(|e| usage(e.to_string()))?,
        ),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn fit(args: &FitArgs, out: &mut dyn Write) -> CmdResult {
    let config = args.lab.config(1);
    config.validate().map_err(|e| usage(e.to_string()))?;
    let target = convlab::sample_target(config.seed, config.angle_range, config.trans_range);
    let trace = convlab::fit(args.loss, &target, &config).map_err(data)?;
    let rows = [(args.loss, 0, &trace)];
    match &args.out {
        Some(path) => {
            let file = create(path)?;
            convlab::write_traces_csv(file, rows).map_err(data)?;
            emit(
                out,
                &json!({
                    "kind": args.loss,
                    "converged": trace.converged,
                    "steps_to_tolerance": trace.steps_to_tolerance,
                    "diverged": trace.diverged,
                    "final": trace.final_record(),
                    "trace": path.display().to_string(),
                }),
            )
        }
        None => convlab::write_traces_csv(out, rows).map_err(data),
    }
}

fn compare(args: &CompareArgs, out: &mut dyn Write) -> CmdResult {
    let config = args.lab.config(args.trials);
    config.validate().map_err(|e| usage(e.to_string()))?;
    let cmp = convlab::compare(&config).map_err(data)?;
    let Some(path) = &args.out else {
        return emit(out, &cmp.table);
    };
    let mut file = create(path)?;
    let text = serde_json::to_string_pretty(&cmp.table).map_err(data)?;
    writeln!(file, "{text}").map_err(data)?;
    file.flush().map_err(data)?;

    let stem = path.with_extension("");
    let mut written = Vec::new();
    for kind in LossKind::ALL {
        let csv_path = PathBuf::from(format!("{}.{kind}.csv", stem.display()));
        let rows = cmp
            .traces
            .iter()
            .filter(|t| t.kind == kind)
            .filter_map(|t| t.trace.as_ref().ok().map(|tr| (t.kind, t.trial, tr)));
        convlab::write_traces_csv(create(&csv_path)?, rows).map_err(data)?;
        written.push(csv_path.display().to_string());
    }
    let summary: Vec<_> = cmp
        .table
        .rows
        .iter()
        .map(|r| {
            json!({
                "kind": r.kind,
                "success_rate": r.success_rate,
                "median_steps_to_tolerance": r.median_steps_to_tolerance,
            })
        })
        .collect();
    emit(
        out,
        &json!({ "table": path.display().to_string(), "traces": written, "rows": summary }),
    )
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    if args.delta == 0 {
        return Err(usage("--delta must be at least 1"));
    }
    let gt = trajeval::load_kitti(&args.gt).map_err(data)?;
    let est = trajeval::load_kitti(&args.est).map_err(data)?;
    let report = match args.metric {
        Metric::Ape => trajeval::ape_report(&gt, &est, args.mode),
        Metric::Rpe => trajeval::rpe_report(&gt, &est, args.delta, args.mode),
    }
    .map_err(data)?;
    if let Some(path) = &args.per_frame {
        report.write_csv(create(path)?).map_err(data)?;
    }
    emit(out, &report.stats)
}
