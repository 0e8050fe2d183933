//! One tracking episode with the default channel; the slot log goes to a temp CSV.

use arrest::policy::Strategy;
use arrest::sim::{compute_metrics, run_episode, Scenario};

fn main() -> arrest::Result<()> {
    let strategy = match std::env::args().nth(1).as_deref() {
        Some("optimistic") => Strategy::Optimistic,
        Some("baseline") => Strategy::Baseline,
        _ => Strategy::Pragmatic,
    };
    let scenario = Scenario::emulation(2.0, 1.8, strategy);
    let log = run_episode(&scenario, 0, 42)?;
    for r in log.records.iter().step_by(30) {
        println!(
            "slot {:3}: distance {:5.2} m, estimate {:5.2} m, bearing error {:5.1} deg, speed {:4.2} m/s",
            r.slot,
            r.true_d,
            r.d_e,
            arrest::geometry::wrap_angle(r.rotate_est - r.true_theta)?.abs().to_degrees(),
            r.v_f_cmd
        );
    }
    println!("{}", compute_metrics(&log, scenario.world.d_th)?.summary());
    let path = std::env::temp_dir().join("arrest_episode.csv");
    log.write_csv(std::fs::File::create(&path)?)?;
    println!("log written to {}", path.display());
    Ok(())
}
