//! Print the default scenario as JSON, then load a partial override of it.

use arrest::sim::Scenario;

fn main() -> arrest::Result<()> {
    println!("{}", serde_json::to_string_pretty(&Scenario::default())?);
    let s = Scenario::from_json(r#"{"world":{"leader":{"v_l_max":2.0},"slots":100},"policy":{"strategy":"baseline"}}"#)?;
    eprintln!("override: v_L {} m/s, v_F cap {} m/s, {} slots", s.world.leader.v_l_max, s.world.v_f_max(), s.world.slots);
    Ok(())
}
