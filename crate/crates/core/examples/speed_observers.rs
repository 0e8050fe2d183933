//! The two speed observers on a Leader that stepped 1 m sideways.

use arrest::lqg::RelativeState;
use arrest::speed::{leader_motion, optimistic_observe, pragmatic_observe};

fn main() -> arrest::Result<()> {
    let prev = RelativeState { d_e: 3.0, v_rel_e: 0.0, theta_rel_e: 0.0 };
    // Leader moved from (3, 0) to (3, 1) in the robot frame.
    let (d_m, theta_m) = (10f64.sqrt(), 1f64.atan2(3.0));
    let m = leader_motion(d_m, theta_m, prev.d_e, 1.0)?;
    println!("leader displacement v1={:.3} v2={:.3}, speed {:.3} m/s, along line of sight {:.3}", m.v1, m.v2, m.v_l, m.v_l_m);
    let o = optimistic_observe(d_m, theta_m, &prev, 1.0)?;
    let p = pragmatic_observe(d_m, theta_m, &prev, 1.0, 1.0)?;
    println!("optimistic: v_rel {:.3}, leader next {:.3}", o.v_rel_m, o.v_leader_next);
    println!("pragmatic:  v_rel {:.3}, leader next {:.3}", p.v_rel_m, p.v_leader_next);
    Ok(())
}
