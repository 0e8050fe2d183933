//! Compare the three bearing estimators on one sparse sweep, then on a batch.

use arrest::channel::{generate_sweep, AntennaPattern, ChannelParams, SparsityModel};
use arrest::estimation::{aoa_basic, aoa_clustering, aoa_weighted, find_clusters, normalize};
use arrest::geometry::{wrap_angle, RelativePosition};
use arrest::sim::{aoa_benchmark, SparsityPattern, WorldConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> arrest::Result<()> {
    let pattern = AntennaPattern::default();
    let sparse = SparsityModel { drop_prob: 0.1, gap_rate: 2.0, gap_width_deg: 40.0 };
    let truth = 120f64.to_radians();
    let sweep = generate_sweep(
        RelativePosition::from_polar(3.0, truth),
        &ChannelParams::default(),
        &pattern,
        &sparse,
        &mut ChaCha8Rng::seed_from_u64(11),
    )?;
    let norm = normalize(&sweep)?;
    println!("{} clusters", find_clusters(&norm).len());
    for (name, obs) in [
        ("basic", aoa_basic(&norm, &pattern)?),
        ("clustering", aoa_clustering(&norm, &pattern)?),
        ("weighted", aoa_weighted(&norm, &pattern)?),
    ] {
        println!("{name:>10}: {:7.1} deg (error {:.1})", obs.theta_m.to_degrees(), wrap_angle(obs.theta_m - truth)?.abs().to_degrees());
    }

    let b = aoa_benchmark(&WorldConfig::default(), SparsityPattern::BatchedSparse, 300, 1)?;
    println!(
        "median error over {} batched-sparse sweeps: basic {:.1}, clustering {:.1}, weighted {:.1} deg",
        b.trials, b.median_basic_deg, b.median_clustering_deg, b.median_weighted_deg
    );
    Ok(())
}
