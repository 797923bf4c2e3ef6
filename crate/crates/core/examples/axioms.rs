//! Probes the metric axioms of each rotation distance on random inputs and
//! prints the first counterexample found for every violated axiom.
//!
//! `cargo run --release --example axioms`

use posekit::metrics::{
    axiom_probe, dist_chordal_so3, dist_euler, dist_geodesic, dist_quat, same_quaternion,
    same_rotation, same_rotation_euler, Axiom, AxiomReport, EulerSampler, ProbeConfig,
    QuaternionSampler, RotationSampler,
};

fn show<T: std::fmt::Debug>(report: &AxiomReport<T>) {
    println!(
        "{:<12} metric={} pseudo-metric={}",
        report.distance_name,
        report.is_metric(),
        report.is_pseudo_metric()
    );
    for axiom in Axiom::ALL {
        let outcome = report.outcome(axiom);
        print!("    {axiom:?}: {:?}", outcome.status);
        if let Some(ce) = &outcome.counterexample {
            print!(" ({} hits; trial {}: {})", outcome.violations, ce.trial, ce.detail);
        }
        println!();
    }
}

fn main() {
    let config = ProbeConfig {
        trials: 10_000,
        seed: 1,
        tolerance: 1e-9,
    };
    show(&axiom_probe("geodesic", dist_geodesic, &RotationSampler, same_rotation, config).unwrap());
    show(&axiom_probe("chordal-so3", dist_chordal_so3, &RotationSampler, same_rotation, config).unwrap());
    show(
        &axiom_probe(
            "quat",
            dist_quat,
            &QuaternionSampler { antipodal: true },
            same_quaternion,
            config,
        )
        .unwrap(),
    );
    show(
        &axiom_probe(
            "euler",
            dist_euler,
            &EulerSampler { gimbal_family: true },
            same_rotation_euler,
            config,
        )
        .unwrap(),
    );
}
