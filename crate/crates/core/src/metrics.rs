//! Distances between orientations and rigid transforms, and an empirical
//! probe of the four metric axioms.
//!
//! All distances return plain (unsquared) norms. Squaring happens in
//! [`crate::losses`]; a squared norm would fail the triangle inequality
//! for trivial reasons and make the probe uninformative.
//!
//! Relations between the SO(3) distances, with `theta` the relative angle:
//!
//! ```text
//! ||A - B||_F^2 = 6 - 2 tr(A^T B) = 4 (1 - cos theta) = 8 sin^2(theta / 2)
//! ```
//!
//! so the chordal distance is `2 sqrt(2) sin(theta / 2)`, never more than
//! `sqrt(2) theta`, and vanishes together with the geodesic one.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::poses::Transform;
use crate::rotations::{
    self, euler_to_matrix, log_so3, random_rotation_with, random_unit_quaternion, AxisVector,
    EulerAngles, RawQuaternion, RotationMatrix,
};

/// Plain L2 distance between raw Euler triplets, no angle wrapping.
pub fn dist_euler(a: &EulerAngles, b: &EulerAngles) -> f64 {
    (a.to_vector() - b.to_vector()).norm()
}

/// `min(||a - b||, ||a + b||)` on raw 4-vectors.
pub fn dist_quat(a: &RawQuaternion, b: &RawQuaternion) -> f64 {
    let (a, b) = (a.to_vector(), b.to_vector());
    (a - b).norm().min((a + b).norm())
}

/// Angle of the relative rotation `A^T B`, as the norm of its logarithm.
pub fn dist_geodesic(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    log_so3(&(a.transpose() * *b)).angle()
}

/// `arccos((tr(A^T B) - 1) / 2)` with the argument clamped to [-1, 1].
///
/// Same quantity as [`dist_geodesic`]; loses precision near 0 and pi.
pub fn dist_geodesic_trace(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    let tr = (a.matrix().transpose() * b.matrix()).trace();
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// `||A - B||_F`.
pub fn dist_chordal_so3(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    (a.matrix() - b.matrix()).norm()
}

/// `||A B^T - I||_F`, the relative form of the SO(3) chordal distance.
pub fn dist_chordal_so3_relative(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    (a.matrix() * b.matrix().transpose() - Matrix3::identity()).norm()
}

/// Frobenius norm of the difference of the 4x4 homogeneous matrices.
pub fn dist_chordal_se3(a: &Transform, b: &Transform) -> f64 {
    (a.to_homogeneous() - b.to_homogeneous()).norm()
}

/// `sqrt(d_c(R_A, R_B)^2 + ||t_B - R_B t_A||^2)`.
///
/// This is a diagnostic: it is often quoted as equal to
/// [`dist_chordal_se3`], but the direct expansion of the homogeneous
/// difference gives `||t_A - t_B||` in the translation term instead. The
/// two agree only in special cases (e.g. `R_B = I` and `t_A = 0`).
pub fn chordal_se3_alternative(a: &Transform, b: &Transform) -> f64 {
    let rot = dist_chordal_so3(&a.rotation, &b.rotation);
    let trans = b.translation - b.rotation.rotate(&a.translation);
    (rot * rot + trans.norm_squared()).sqrt()
}

/// `sqrt(d_c(R_A, R_B)^2 + ||t_A - t_B||^2)`, the expanded form of
/// [`dist_chordal_se3`] (the constant bottom rows cancel).
pub fn chordal_se3_expanded(a: &Transform, b: &Transform) -> f64 {
    let rot = dist_chordal_so3(&a.rotation, &b.rotation);
    (rot * rot + (a.translation - b.translation).norm_squared()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    NonNegativity,
    Identity,
    Symmetry,
    TriangleInequality,
}

impl Axiom {
    pub const ALL: [Axiom; 4] = [
        Axiom::NonNegativity,
        Axiom::Identity,
        Axiom::Symmetry,
        Axiom::TriangleInequality,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomStatus {
    Held,
    Violated,
}

/// The first failing input found for an axiom.
///
/// `values` holds the distances that were compared, in the order given by
/// `detail`.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample<T> {
    pub trial: usize,
    pub elements: Vec<T>,
    pub values: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomOutcome<T> {
    pub axiom: Axiom,
    pub status: AxiomStatus,
    pub violations: usize,
    pub counterexample: Option<Counterexample<T>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport<T> {
    pub distance_name: String,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub axioms: Vec<AxiomOutcome<T>>,
}

impl<T> AxiomReport<T> {
    pub fn outcome(&self, axiom: Axiom) -> &AxiomOutcome<T> {
        self.axioms
            .iter()
            .find(|o| o.axiom == axiom)
            .expect("report covers every axiom")
    }

    pub fn status(&self, axiom: Axiom) -> AxiomStatus {
        self.outcome(axiom).status
    }

    pub fn is_metric(&self) -> bool {
        self.axioms.iter().all(|o| o.status == AxiomStatus::Held)
    }

    /// Every axiom except identity of indiscernibles held.
    pub fn is_pseudo_metric(&self) -> bool {
        self.axioms
            .iter()
            .filter(|o| o.axiom != Axiom::Identity)
            .all(|o| o.status == AxiomStatus::Held)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error("axiom probe needs at least one trial")]
    NoTrials,
    #[error("tolerance must be finite and non-negative, got {0}")]
    BadTolerance(f64),
}

/// Source of random elements for [`axiom_probe`].
///
/// `sample_pair` lets a sampler plant related pairs (equal elements,
/// antipodal quaternions, gimbal-lock siblings) so that the identity axiom
/// is exercised in both directions.
pub trait ElementSampler<T>: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> T;

    fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (T, T) {
        (self.sample(rng), self.sample(rng))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

/// Deterministic per-trial generator, independent of evaluation order.
pub(crate) fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

type Finding<T> = (Axiom, Counterexample<T>);

fn check_trial<T, D, E, S>(
    trial: usize,
    config: &ProbeConfig,
    distance: &D,
    sampler: &S,
    equivalent: &E,
) -> Vec<Finding<T>>
where
    T: Clone,
    D: Fn(&T, &T) -> f64,
    E: Fn(&T, &T) -> bool,
    S: ElementSampler<T> + ?Sized,
{
    let tol = config.tolerance;
    let mut rng = trial_rng(config.seed, trial);
    let (a, b) = sampler.sample_pair(&mut rng);
    let c = sampler.sample(&mut rng);
    let mut found = Vec::new();
    let mut report = |axiom, elements: Vec<&T>, values: Vec<f64>, detail: &str| {
        found.push((
            axiom,
            Counterexample {
                trial,
                elements: elements.into_iter().cloned().collect(),
                values,
                detail: detail.to_string(),
            },
        ));
    };

    let ab = distance(&a, &b);
    let ba = distance(&b, &a);
    let bc = distance(&b, &c);
    let ac = distance(&a, &c);
    let aa = distance(&a, &a);

    if let Some(&(x, y, d)) = [(&a, &b, ab), (&b, &c, bc), (&a, &c, ac)]
        .iter()
        .find(|(_, _, d)| !(*d >= -tol))
    {
        report(Axiom::NonNegativity, vec![x, y], vec![d], "d(x, y) < 0");
    }

    if !(aa.abs() <= tol) {
        report(Axiom::Identity, vec![&a], vec![aa], "d(x, x) != 0");
    } else {
        let same = equivalent(&a, &b);
        let zero = ab.abs() <= tol;
        if zero && !same {
            report(
                Axiom::Identity,
                vec![&a, &b],
                vec![ab],
                "d(x, y) = 0 for non-equivalent x, y",
            );
        } else if same && !zero {
            report(
                Axiom::Identity,
                vec![&a, &b],
                vec![ab],
                "d(x, y) != 0 for equivalent x, y",
            );
        }
    }

    if !((ab - ba).abs() <= tol) {
        report(
            Axiom::Symmetry,
            vec![&a, &b],
            vec![ab, ba],
            "d(x, y) != d(y, x): values are [d(x, y), d(y, x)]",
        );
    }

    // All three arrangements of the triple.
    let sides = [(ac, ab, bc), (ab, ac, bc), (bc, ab, ac)];
    if let Some(&(long, s1, s2)) = sides.iter().find(|(l, s1, s2)| !(*l <= s1 + s2 + tol)) {
        report(
            Axiom::TriangleInequality,
            vec![&a, &b, &c],
            vec![long, s1, s2],
            "one side exceeds the sum of the other two: values are [side, other, other]",
        );
    }
    found
}

/// Samples `config.trials` pairs and triples and tests non-negativity,
/// identity (both `d(x, x) = 0` and `d(x, y) = 0 <=> x ~ y`), symmetry
/// and the triangle inequality, each up to `config.tolerance`.
///
/// `equivalent` decides what "the same element" means: representation
/// equality, or equality of the underlying rotation. Trials run in
/// parallel; each draws from its own stream derived from `(seed, trial)`,
/// so the report does not depend on the thread count.
pub fn axiom_probe<T, D, S, E>(
    distance_name: &str,
    distance: D,
    sampler: &S,
    equivalent: E,
    config: ProbeConfig,
) -> Result<AxiomReport<T>, ProbeError>
where
    T: Clone + Send,
    D: Fn(&T, &T) -> f64 + Sync,
    S: ElementSampler<T> + ?Sized,
    E: Fn(&T, &T) -> bool + Sync,
{
    if config.trials == 0 {
        return Err(ProbeError::NoTrials);
    }
    if !(config.tolerance >= 0.0 && config.tolerance.is_finite()) {
        return Err(ProbeError::BadTolerance(config.tolerance));
    }
    let findings: Vec<Vec<Finding<T>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| check_trial(trial, &config, &distance, sampler, &equivalent))
        .collect();

    let mut axioms: Vec<AxiomOutcome<T>> = Axiom::ALL
        .iter()
        .map(|&axiom| AxiomOutcome {
            axiom,
            status: AxiomStatus::Held,
            violations: 0,
            counterexample: None,
        })
        .collect();
    for (axiom, example) in findings.into_iter().flatten() {
        let outcome = axioms
            .iter_mut()
            .find(|o| o.axiom == axiom)
            .expect("all axioms present");
        outcome.status = AxiomStatus::Violated;
        outcome.violations += 1;
        if outcome.counterexample.is_none() {
            outcome.counterexample = Some(example);
        }
    }
    Ok(AxiomReport {
        distance_name: distance_name.to_string(),
        trials: config.trials,
        seed: config.seed,
        tolerance: config.tolerance,
        axioms,
    })
}

/// Rotation-level equality used for identity checks on SO(3) elements.
pub const EQUIVALENCE_TOL: f64 = 1e-9;

pub fn same_rotation(a: &RotationMatrix, b: &RotationMatrix) -> bool {
    (a.matrix() - b.matrix()).amax() <= EQUIVALENCE_TOL
}

pub fn same_rotation_euler(a: &EulerAngles, b: &EulerAngles) -> bool {
    dist_geodesic(&euler_to_matrix(a), &euler_to_matrix(b)) < EQUIVALENCE_TOL
}

pub fn same_rotation_quat(a: &RawQuaternion, b: &RawQuaternion) -> bool {
    match (a.normalize(1e-12), b.normalize(1e-12)) {
        (Some(qa), Some(qb)) => dist_geodesic(
            &rotations::quat_to_matrix(&qa),
            &rotations::quat_to_matrix(&qb),
        ) < EQUIVALENCE_TOL,
        _ => false,
    }
}

/// Component-wise equality of the stored 4-vectors.
pub fn same_quaternion(a: &RawQuaternion, b: &RawQuaternion) -> bool {
    (a.to_vector() - b.to_vector()).amax() <= EQUIVALENCE_TOL
}

pub fn same_transform(a: &Transform, b: &Transform) -> bool {
    same_rotation(&a.rotation, &b.rotation)
        && (a.translation - b.translation).amax() <= EQUIVALENCE_TOL
}

/// Mixture used by the pair samplers: a quarter of pairs are identical,
/// a quarter are the sampler's "related" pair, the rest independent.
fn pair_kind(rng: &mut ChaCha8Rng) -> u8 {
    rng.gen_range(0..4)
}

/// Uniform rotations. Pairs are identical, a small rotation apart, or independent.
#[derive(Debug, Clone, Copy, Default)]
pub struct RotationSampler;

impl ElementSampler<RotationMatrix> for RotationSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> RotationMatrix {
        random_rotation_with(rng)
    }

    fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (RotationMatrix, RotationMatrix) {
        let a = self.sample(rng);
        match pair_kind(rng) {
            0 => (a, a),
            1 => {
                let axis = random_rotation_with(rng).matrix().column(0).into_owned();
                let small = rotations::exp_so3(&AxisVector(axis * rng.gen_range(1e-6..1e-3)));
                (a, a * small)
            }
            _ => (a, self.sample(rng)),
        }
    }
}

/// Random unit quaternions as raw 4-vectors. With `antipodal` set, a
/// quarter of the pairs are `(q, -q)`.
#[derive(Debug, Clone, Copy)]
pub struct QuaternionSampler {
    pub antipodal: bool,
}

impl ElementSampler<RawQuaternion> for QuaternionSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> RawQuaternion {
        random_unit_quaternion(rng).raw()
    }

    fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (RawQuaternion, RawQuaternion) {
        let a = self.sample(rng);
        match pair_kind(rng) {
            0 => (a, a),
            1 if self.antipodal => (a, -a),
            _ => (a, self.sample(rng)),
        }
    }
}

/// Euler triplets with yaw, roll in [-pi, pi) and pitch in [-pi/2, pi/2].
/// With `gimbal_family` set, a quarter of the pairs sit at pitch = pi/2
/// and differ by equal shifts of yaw and roll, which leaves the rotation
/// unchanged.
#[derive(Debug, Clone, Copy)]
pub struct EulerSampler {
    pub gimbal_family: bool,
}

impl ElementSampler<EulerAngles> for EulerSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> EulerAngles {
        EulerAngles::new(
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI / 2.0..=PI / 2.0),
            rng.gen_range(-PI..PI),
        )
    }

    fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (EulerAngles, EulerAngles) {
        match pair_kind(rng) {
            0 => {
                let a = self.sample(rng);
                (a, a)
            }
            1 if self.gimbal_family => {
                let yaw = rng.gen_range(-PI / 2.0..PI / 2.0);
                let roll = rng.gen_range(-PI / 2.0..PI / 2.0);
                let shift = rng.gen_range(0.01..0.5);
                (
                    EulerAngles::new(yaw, PI / 2.0, roll),
                    EulerAngles::new(yaw + shift, PI / 2.0, roll + shift),
                )
            }
            _ => (self.sample(rng), self.sample(rng)),
        }
    }
}

/// Uniform rotations with translations in the cube `[-scale, scale]^3`.
#[derive(Debug, Clone, Copy)]
pub struct TransformSampler {
    pub scale: f64,
}

impl ElementSampler<Transform> for TransformSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Transform {
        let r = random_rotation_with(rng);
        let s = self.scale;
        let t = nalgebra::Vector3::from_fn(|_, _| rng.gen_range(-s..=s));
        Transform::new(r, t)
    }

    fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (Transform, Transform) {
        let a = self.sample(rng);
        match pair_kind(rng) {
            0 => (a, a),
            _ => (a, self.sample(rng)),
        }
    }
}
