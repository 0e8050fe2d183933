//! Ultrasound ranging: one protocol sweep by hand, then accuracy over many trials.

use arrest::geometry::RelativePosition;
use arrest::sim::tdoa_check;
use arrest::tdoa::{range, LinkModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> arrest::Result<()> {
    let link = LinkModel::default();
    let truth = RelativePosition::from_polar(3.5, 50f64.to_radians());
    let (d, angle) = range(truth, &link, true, 3, &mut ChaCha8Rng::seed_from_u64(1))?;
    println!("ranged {d:.2} m at {:.0} deg (true 3.50 m at 50 deg)", angle.to_degrees());

    let c = tdoa_check(&link, 500, 4)?;
    println!(
        "{} trials: {:.1}% within 0.20 m, p95 error {:.3} m, angle errors {:?} steps, {} failures",
        c.trials,
        100.0 * c.within_20cm,
        c.distance_error_p95,
        c.angle_error_steps,
        c.failures
    );
    Ok(())
}
