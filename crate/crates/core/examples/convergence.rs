//! Fits large-angle targets with each loss by plain gradient descent and
//! prints the success table, plus one loss curve.
//!
//! `cargo run --release --example convergence`

use std::f64::consts::PI;

use posekit::convlab::{compare, fit, sample_target, LabConfig, LossKind};

fn main() {
    let config = LabConfig {
        trials: 20,
        steps: 1000,
        angle_range: (0.9 * PI, PI),
        ..LabConfig::default()
    };
    let result = compare(&config).expect("valid configuration");
    println!("{:<9} {:>8} {:>13} {:>9}", "loss", "success", "median steps", "diverged");
    for row in &result.table.rows {
        println!(
            "{:<9} {:>8.2} {:>13} {:>9}",
            row.kind.as_str(),
            row.success_rate,
            row.median_steps_to_tolerance.map_or("-".into(), |s| s.to_string()),
            row.diverged
        );
    }

    let target = sample_target(3, config.angle_range, config.trans_range);
    let trace = fit(LossKind::Se3, &target, &config).expect("target is fittable");
    println!("se3 fit of one target: converged={} after {:?} steps", trace.converged, trace.steps_to_tolerance);
    for r in trace.records.iter().step_by(50).take(8) {
        println!("  step {:>4} loss {:>10.5} rot err {:.5} rad", r.step, r.loss, r.rot_err_rad);
    }
}
