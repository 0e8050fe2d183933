//! Tracking with observations that are truth plus a fixed bias.

use arrest::sim::{run_controlled_error, Scenario};

fn main() -> arrest::Result<()> {
    let biases = [(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, -0.5), (0.0, 0.5)];
    for r in run_controlled_error(&Scenario::default(), &biases, 0.2, 0.05, 10, 3)? {
        println!(
            "distance bias {:+.1} m, angle bias {:+5.1} deg -> mean distance {:.2} +- {:.2} m",
            r.distance_bias, r.angle_bias_deg, r.mean_distance, r.ci95
        );
    }
    Ok(())
}
