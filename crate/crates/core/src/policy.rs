//! Movement policy: strategy selection, the Baseline controller and the
//! multipath escape randomization.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqg::ControlDecision;
use crate::speed::SpeedStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Optimistic,
    Pragmatic,
    Baseline,
}

impl Strategy {
    /// Speed observer used by the LQG strategies.
    pub fn speed_strategy(self) -> Option<SpeedStrategy> {
        match self {
            Strategy::Optimistic => Some(SpeedStrategy::Optimistic),
            Strategy::Pragmatic => Some(SpeedStrategy::Pragmatic),
            Strategy::Baseline => None,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Optimistic => "optimistic",
            Strategy::Pragmatic => "pragmatic",
            Strategy::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub strategy: Strategy,
    pub v_f_max: f64,
    pub v_l_max: f64,
    /// Slots of nearly constant distance (or consecutive obstacle hits) that
    /// count as a stall.
    pub stall_window: usize,
    /// Distance spread below which the ring counts as flat, meters.
    pub stall_eps: f64,
    /// Minimum number of slots between two randomized moves.
    pub randomization_cooldown: usize,
    /// Whether stalls trigger a randomized heading at all.
    pub escape_enabled: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Pragmatic,
            v_f_max: 1.8 * 3.0,
            v_l_max: 3.0,
            stall_window: 3,
            stall_eps: 0.2,
            randomization_cooldown: 5,
            escape_enabled: false,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_f_max > 0.0) || !self.v_f_max.is_finite() {
            return Err(Error::Config("v_f_max must be positive".into()));
        }
        if !(self.v_l_max >= 0.0) || !self.v_l_max.is_finite() {
            return Err(Error::Config("v_l_max must be non-negative".into()));
        }
        if self.stall_window < 1 || self.randomization_cooldown < 1 {
            return Err(Error::Config("stall_window and randomization_cooldown must be at least 1".into()));
        }
        if !(self.stall_eps >= 0.0) {
            return Err(Error::Config("stall_eps must be non-negative".into()));
        }
        Ok(())
    }
}

/// Rotate toward the basic AoA estimate and drive at
/// `min(v_F^max, d^m/dt)`.
pub fn baseline_decide(d_m: f64, theta_basic: f64, dt: f64, cfg: &PolicyConfig) -> ControlDecision {
    ControlDecision {
        rotate_by: theta_basic,
        u: [0.0; 3],
        v_f_next: cfg.v_f_max.min(d_m.max(0.0) / dt),
    }
}

/// Tracks recent distance estimates and obstacle hits to detect stalls.
#[derive(Debug, Clone)]
pub struct StallMonitor {
    ring: VecDeque<f64>,
    window: usize,
    eps: f64,
    cooldown: usize,
    obstacle_streak: usize,
    since_last: usize,
}

impl StallMonitor {
    pub fn new(cfg: &PolicyConfig) -> Self {
        Self {
            ring: VecDeque::with_capacity(cfg.stall_window),
            window: cfg.stall_window,
            eps: cfg.stall_eps,
            cooldown: cfg.randomization_cooldown,
            obstacle_streak: 0,
            // The first stall may fire immediately.
            since_last: cfg.randomization_cooldown,
        }
    }

    pub fn recent(&self) -> impl Iterator<Item = &f64> {
        self.ring.iter()
    }

    pub fn obstacle_streak(&self) -> usize {
        self.obstacle_streak
    }

    fn record(&mut self, obstacle_hit: bool, d_e: f64) {
        if self.ring.len() == self.window {
            self.ring.pop_front();
        }
        self.ring.push_back(d_e);
        self.obstacle_streak = if obstacle_hit { self.obstacle_streak + 1 } else { 0 };
        self.since_last = self.since_last.saturating_add(1);
    }

    fn stalled(&self) -> bool {
        if self.obstacle_streak >= self.window {
            return true;
        }
        if self.ring.len() < self.window {
            return false;
        }
        let (lo, hi) = self
            .ring
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        hi - lo < self.eps
    }
}

/// Record one slot and, if the robot looks stuck and the cooldown has
/// expired, return a uniformly random heading (relative to the current one)
/// to follow for the next slot only.
pub fn check_multipath_escape<R: Rng + ?Sized>(
    mon: &mut StallMonitor,
    obstacle_hit: bool,
    d_e: f64,
    rng: &mut R,
) -> Option<f64> {
    mon.record(obstacle_hit, d_e);
    if mon.since_last >= mon.cooldown && mon.stalled() {
        mon.since_last = 0;
        Some(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn feed(mon: &mut StallMonitor, values: &[f64], rng: &mut ChaCha8Rng) -> Vec<Option<f64>> {
        values.iter().map(|&d| check_multipath_escape(mon, false, d, rng)).collect()
    }

    #[test]
    fn baseline_examples() {
        let cfg = PolicyConfig { v_f_max: 10.0, ..PolicyConfig::default() };
        let d = baseline_decide(0.5, 0.3, 1.0, &cfg);
        assert_eq!(d.v_f_next, 0.5);
        assert_eq!(d.rotate_by, 0.3);
        let cfg = PolicyConfig { v_f_max: 0.1, ..PolicyConfig::default() };
        assert_eq!(baseline_decide(50.0, 0.0, 1.0, &cfg).v_f_next, 0.1);
    }

    #[test]
    fn changing_distance_does_not_trigger() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mon = StallMonitor::new(&PolicyConfig::default());
        assert!(feed(&mut mon, &[4.0, 3.1, 2.2], &mut rng).iter().all(Option::is_none));
    }

    #[test]
    fn flat_ring_triggers_once_per_cooldown() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mon = StallMonitor::new(&PolicyConfig::default());
        let out = feed(&mut mon, &[3.00, 3.05, 2.98], &mut rng);
        assert!(out[..2].iter().all(Option::is_none));
        let h = out[2].expect("flat ring fires");
        assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&h));
        // Still flat for four more slots: suppressed by the cooldown.
        assert!(feed(&mut mon, &[3.0, 3.01, 3.02, 3.0], &mut rng).iter().all(Option::is_none));
        // The fifth slot after the override may fire again.
        assert!(feed(&mut mon, &[3.0], &mut rng)[0].is_some());
    }

    #[test]
    fn obstacle_streak_triggers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mon = StallMonitor::new(&PolicyConfig::default());
        assert!(check_multipath_escape(&mut mon, true, 1.0, &mut rng).is_none());
        assert!(check_multipath_escape(&mut mon, true, 5.0, &mut rng).is_none());
        assert!(check_multipath_escape(&mut mon, true, 9.0, &mut rng).is_some());
        let mut mon = StallMonitor::new(&PolicyConfig::default());
        check_multipath_escape(&mut mon, true, 1.0, &mut rng);
        check_multipath_escape(&mut mon, false, 5.0, &mut rng);
        assert!(check_multipath_escape(&mut mon, true, 9.0, &mut rng).is_none());
    }

    #[test]
    fn at_most_one_override_per_cooldown() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = PolicyConfig::default();
        let mut mon = StallMonitor::new(&cfg);
        let fired: Vec<usize> = (0..200)
            .filter_map(|i| check_multipath_escape(&mut mon, i % 7 == 0, 2.0 + 0.01 * (i % 3) as f64, &mut rng).map(|_| i))
            .collect();
        assert!(fired.len() > 10);
        assert!(fired.windows(2).all(|w| w[1] - w[0] >= cfg.randomization_cooldown));
    }
}
