//! Stationary gains and closed-loop behaviour of the controller.

use arrest::lqg::{closed_loop_spectral_radius, solve_gains, Controller, ControllerConfig, ObservationVector};
use arrest::speed::SpeedStrategy;

fn main() -> arrest::Result<()> {
    for strategy in [SpeedStrategy::Optimistic, SpeedStrategy::Pragmatic] {
        let cfg = ControllerConfig::new(1.0, 3.0, 5.4, strategy);
        let g = solve_gains(&cfg)?;
        println!("{strategy:?}: K = {:.3}L = {:.3}", g.k, g.l);
        println!(
            "  residuals {:.1e} / {:.1e}, spectral radius {:.3}",
            g.filter_residual,
            g.control_residual,
            closed_loop_spectral_radius(&cfg, &g)
        );
    }

    // Regulate toward a static Leader 6 m away at 30 degrees.
    let mut c = Controller::new(ControllerConfig::new(1.0, 3.0, 5.4, SpeedStrategy::Optimistic), 6.0)?;
    let mut d = 6.0f64;
    for slot in 0..8 {
        let obs = ObservationVector { d_m: d, v_rel_m: c.state().v_rel_e, theta_m: if slot == 0 { 0.5 } else { 0.0 } };
        let u = c.step(&obs, 0.0);
        d = (d - u.v_f_next).max(0.0);
        println!("slot {slot}: rotate {:6.1} deg, speed {:5.2} m/s, distance after move {:.2} m", u.rotate_by.to_degrees(), u.v_f_next, d);
    }
    Ok(())
}
