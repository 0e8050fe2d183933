//! Draw one sweep from the synthetic channel and print a coarse polar profile.

use arrest::channel::{generate_sweep, AntennaPattern, ChannelParams, SparsityModel, TraceBank};
use arrest::estimation::{bin_angle_deg, observe_distance, BINS};
use arrest::geometry::RelativePosition;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> arrest::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = ChannelParams::default();
    let pattern = AntennaPattern::default();
    let source = RelativePosition::from_polar(4.0, 40f64.to_radians());
    let sweep = generate_sweep(source, &params, &pattern, &SparsityModel::default(), &mut rng)?;

    println!("{} of {BINS} bins present", sweep.present_count());
    for bin in (0..BINS).step_by(10) {
        match sweep.get(bin) {
            Some(p) => println!("{:7.1} deg {:7.1} dBm {}", bin_angle_deg(bin), p, "#".repeat(((p + 90.0).max(0.0) / 2.0) as usize)),
            None => println!("{:7.1} deg    (lost)", bin_angle_deg(bin)),
        }
    }
    println!("distance observed from mean power: {:.2} m (true 4.00)", observe_distance(&sweep, &params)?);

    // The same channel sampled on the collection grid, then the path-loss
    // exponent recovered from it.
    let (d, a) = TraceBank::default_grid();
    let bank = TraceBank::synthesize(&d, &a, 10, &params, &pattern, &mut rng)?;
    let eta = arrest::channel::estimate_eta(&bank.mean_power_by_distance())?;
    println!("path-loss exponent from trace bank: {eta:.2} (true {:.2})", params.eta);
    Ok(())
}
