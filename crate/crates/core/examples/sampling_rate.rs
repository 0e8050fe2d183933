//! Estimation error as a sweep is thinned from 200 to 40 samples per revolution.

use arrest::sim::{run_sampling_sweep, WorldConfig};

fn main() -> arrest::Result<()> {
    let rows = run_sampling_sweep(&WorldConfig::default(), &[200, 100, 80, 60, 40], 4.0, 400, 2)?;
    for r in rows {
        println!(
            "{:3} samples: angle {:.2} +- {:.2} deg, distance {:.3} +- {:.3} m",
            r.rate, r.angle_error_deg, r.angle_ci95, r.distance_error, r.distance_ci95
        );
    }
    Ok(())
}
