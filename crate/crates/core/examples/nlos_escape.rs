//! A static Leader hidden behind a wall, found with and without randomized escape moves.

use arrest::sim::{run_nlos_study, MultipathScenario, Scenario};

fn main() -> arrest::Result<()> {
    let mut s = Scenario::default();
    s.world.multipath = MultipathScenario::WeakMultipath;
    let study = run_nlos_study(&s, 40, 8)?;
    println!(
        "{} episodes of {} slots: found {:.0}% without escape, {:.0}% with",
        study.episodes,
        study.slots,
        100.0 * study.success_without,
        100.0 * study.success_with
    );
    Ok(())
}
