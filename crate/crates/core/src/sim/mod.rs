//! World simulator and experiment harness.

mod episode;
mod leader;
mod metrics;
mod multipath;
mod studies;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{AntennaPattern, ChannelParams, SparsityModel};
use crate::error::{Error, Result};
use crate::estimation::AoaMethod;
use crate::lqg::{ControllerConfig, ControllerOverrides};
use crate::policy::{PolicyConfig, Strategy};

pub use episode::{run_episode, EpisodeLog, SlotRecord};
pub use leader::{Arena, Leader, LeaderKind, LeaderModel};
pub use metrics::{
    compute_metrics, compute_metrics_pooled, mean_ci, sign_test, write_cdf, Cdf, Metrics, SignTest,
};
pub use multipath::{multipath_sweep_mixture, MultipathScenario, NlosGeometry, SecondaryPath};
pub use studies::{
    aoa_benchmark, decimate_mask, run_batch, run_controlled_error, run_nlos_study, run_sampling_sweep,
    sweep_follower_speed, sweep_leader_speed, tdoa_check, AoaBenchmark, ControlledErrorRow, NlosStudy,
    SamplingRow, SparsityPattern, SpeedSweepRow, TdoaCheck,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    /// One-second slots; the robot drives for the whole slot.
    Emulation,
    /// Six-second cycle: scan, rotate, then translate for two seconds.
    Robot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingModel {
    pub mode: TimingMode,
    pub scan_s: f64,
    pub rotate_s: f64,
    pub translate_s: f64,
    /// Slot length assumed by the controller model.
    pub controller_dt: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self::emulation()
    }
}

impl TimingModel {
    pub fn emulation() -> Self {
        Self {
            mode: TimingMode::Emulation,
            scan_s: 0.0,
            rotate_s: 0.0,
            translate_s: 1.0,
            controller_dt: 1.0,
        }
    }

    pub fn robot() -> Self {
        Self {
            mode: TimingMode::Robot,
            scan_s: 2.0,
            rotate_s: 2.0,
            translate_s: 2.0,
            controller_dt: 4.0,
        }
    }

    /// Wall-clock length of one slot.
    pub fn cycle(&self) -> f64 {
        self.scan_s + self.rotate_s + self.translate_s
    }

    /// Hardware speed cap, if the mode has one.
    pub fn speed_cap(&self) -> Option<f64> {
        match self.mode {
            TimingMode::Robot => Some(0.1),
            TimingMode::Emulation => None,
        }
    }
}

/// Where the RSSI sweeps come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ChannelSource {
    /// Draw every sample from the log-distance model.
    Model,
    /// Interpolate from a synthetic trace bank collected at episode start.
    TraceBank { samples_per_cell: usize },
}

/// What the controller observes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ObservationMode {
    /// Sweeps through the channel and the estimators.
    Channel,
    /// Truth with a fixed bias plus small Gaussian noise. A positive distance
    /// bias makes the Leader look closer than it is.
    Controlled {
        distance_bias: f64,
        angle_bias: f64,
        distance_sigma: f64,
        angle_sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub leader: LeaderModel,
    pub timing: TimingModel,
    pub channel: ChannelParams,
    pub sparsity: SparsityModel,
    pub aoa_method: AoaMethod,
    pub channel_source: ChannelSource,
    pub observation: ObservationMode,
    /// Estimate the path-loss exponent from a calibration bank at episode
    /// start instead of using the true one.
    pub calibrate_eta: bool,
    /// Follower speed cap; defaults to 1.8·v_L^max.
    pub v_f_max: Option<f64>,
    pub d_th: f64,
    pub multipath: MultipathScenario,
    /// Layout used by the multipath scenarios.
    pub nlos: Option<NlosGeometry>,
    pub arena: Arena,
    pub slots: usize,
    pub initial_distance: f64,
    pub seed: u64,
    #[serde(skip)]
    pub pattern: AntennaPattern,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            leader: LeaderModel::default(),
            timing: TimingModel::emulation(),
            channel: ChannelParams::default(),
            sparsity: SparsityModel::default(),
            aoa_method: AoaMethod::Weighted,
            channel_source: ChannelSource::Model,
            observation: ObservationMode::Channel,
            calibrate_eta: false,
            v_f_max: None,
            d_th: 5.0,
            multipath: MultipathScenario::Los,
            nlos: None,
            arena: Arena::default(),
            slots: 300,
            initial_distance: 3.0,
            seed: 0,
            pattern: AntennaPattern::default(),
        }
    }
}

impl WorldConfig {
    /// Follower speed cap after the timing mode's hardware limit.
    pub fn v_f_max(&self) -> f64 {
        let v = self.v_f_max.unwrap_or(1.8 * self.leader.v_l_max);
        match self.timing.speed_cap() {
            Some(cap) => v.min(cap),
            None => v,
        }
    }

    /// Layout for the configured multipath scenario, if any.
    pub fn nlos_geometry(&self) -> Option<NlosGeometry> {
        match self.multipath {
            MultipathScenario::Los => None,
            s => Some(self.nlos.clone().unwrap_or_else(|| NlosGeometry::for_scenario(s))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.leader.validate()?;
        self.channel.validate()?;
        self.sparsity.validate()?;
        if !(self.v_f_max() > 0.0) {
            return Err(Error::Config("v_f_max must be positive".into()));
        }
        if !(self.d_th > 0.0) {
            return Err(Error::Config("d_th must be positive".into()));
        }
        if !(self.initial_distance > 0.0) {
            return Err(Error::Config("initial_distance must be positive".into()));
        }
        if !(self.arena.width > 0.0 && self.arena.height > 0.0) {
            return Err(Error::Config("arena must have positive size".into()));
        }
        let t = &self.timing;
        if !(t.translate_s > 0.0 && t.controller_dt > 0.0 && t.scan_s >= 0.0 && t.rotate_s >= 0.0) {
            return Err(Error::Config("timing phases must be non-negative and translate_s, controller_dt positive".into()));
        }
        if let ChannelSource::TraceBank { samples_per_cell: 0 } = self.channel_source {
            return Err(Error::Config("samples_per_cell must be at least 1".into()));
        }
        Ok(())
    }
}

/// Policy knobs that are not derived from the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySettings {
    pub strategy: Strategy,
    pub stall_window: usize,
    pub stall_eps: f64,
    pub randomization_cooldown: usize,
    pub escape_enabled: bool,
}

impl Default for PolicySettings {
    fn default() -> Self {
        let p = PolicyConfig::default();
        Self {
            strategy: p.strategy,
            stall_window: p.stall_window,
            stall_eps: p.stall_eps,
            randomization_cooldown: p.randomization_cooldown,
            escape_enabled: p.escape_enabled,
        }
    }
}

/// A complete scenario: world, policy and controller overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub world: WorldConfig,
    pub policy: PolicySettings,
    pub controller: ControllerOverrides,
}

impl Scenario {
    /// Emulation scenario with a random-waypoint Leader.
    pub fn emulation(v_l_max: f64, v_f_ratio: f64, strategy: Strategy) -> Self {
        let mut s = Self::default();
        s.world.leader.v_l_max = v_l_max;
        s.world.v_f_max = Some(v_f_ratio * v_l_max);
        s.policy.strategy = strategy;
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            strategy: self.policy.strategy,
            v_f_max: self.world.v_f_max(),
            // A static Leader would zero the distance weight; keep a floor.
            v_l_max: self.world.leader.v_l_max.max(1.0),
            stall_window: self.policy.stall_window,
            stall_eps: self.policy.stall_eps,
            randomization_cooldown: self.policy.randomization_cooldown,
            escape_enabled: self.policy.escape_enabled,
        }
    }

    /// Controller settings for the LQG strategies; `None` for Baseline.
    pub fn controller_config(&self) -> Option<ControllerConfig> {
        let p = self.policy_config();
        let strategy = p.strategy.speed_strategy()?;
        Some(
            ControllerConfig::new(self.world.timing.controller_dt, p.v_l_max, p.v_f_max, strategy)
                .with_overrides(&self.controller),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.policy_config().validate()?;
        if let Some(c) = self.controller_config() {
            c.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_round_trips_through_json() {
        let s = Scenario::emulation(2.0, 1.8, Strategy::Optimistic);
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let s = Scenario::from_json(r#"{"world":{"leader":{"kind":"static","v_l_max":1.0},"slots":50}}"#).unwrap();
        assert_eq!(s.world.slots, 50);
        assert_eq!(s.world.leader.kind, LeaderKind::Static);
        assert!((s.world.v_f_max() - 1.8).abs() < 1e-12);
        assert_eq!(s.policy.strategy, Strategy::Pragmatic);
    }

    #[test]
    fn invalid_json_is_a_config_error() {
        assert!(matches!(Scenario::from_json(r#"{"world":{"d_th":-1}}"#), Err(Error::Config(_))));
        assert!(matches!(Scenario::from_json(r#"{"wrold":{}}"#), Err(Error::Config(_))));
    }

    #[test]
    fn robot_mode_caps_speed() {
        let mut w = WorldConfig::default();
        w.timing = TimingModel::robot();
        assert_eq!(w.v_f_max(), 0.1);
        assert_eq!(w.timing.cycle(), 6.0);
    }
}
