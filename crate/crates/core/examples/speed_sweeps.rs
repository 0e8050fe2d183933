//! Mean distance against Leader speed and against the Follower cap (small batches).

use arrest::policy::Strategy;
use arrest::sim::{sweep_follower_speed, sweep_leader_speed, Scenario};

fn main() -> arrest::Result<()> {
    let base = Scenario::default();
    let strategies = [Strategy::Pragmatic, Strategy::Optimistic, Strategy::Baseline];
    println!("strategy     v_L   v_F   mean d   +-95%   P(d<=5)");
    let rows = sweep_leader_speed(&base, &[1.0, 2.0, 3.0], 1.8, &strategies, 10, 5)?;
    let more = sweep_follower_speed(&base, 1.0, &[1.2, 2.0, 3.0], &strategies, 10, 5)?;
    for r in rows.iter().chain(&more) {
        println!(
            "{:<11} {:4.1} {:5.1} {:8.2} {:7.2} {:9.3}",
            format!("{:?}", r.strategy),
            r.v_l_max,
            r.v_f_max,
            r.mean_distance,
            r.ci95,
            r.p_within
        );
    }
    Ok(())
}
