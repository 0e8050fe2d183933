use std::io::Write;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::leader::Leader;
use super::multipath::{free_fraction, NlosGeometry};
use super::{ChannelSource, ObservationMode, Scenario, WorldConfig};
use crate::channel::{
    estimate_eta, generate_sweep, interpolate_trace, synthesize_sweep, ChannelParams, TraceBank,
};
use crate::error::{Error, Result};
use crate::estimation::{aoa_basic, bin_angle, normalize, observe_distance, RssiSweep, BINS};
use crate::geometry::{to_global, to_local, wrap, GlobalPose, Point, RelativePosition};
use crate::lqg::{Controller, ObservationVector, RelativeState};
use crate::policy::{baseline_decide, check_multipath_escape, StallMonitor, Strategy};
use crate::speed::observe;

/// Named random sub-streams; each episode owns its own block of streams.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Init = 0,
    Leader = 1,
    Channel = 2,
    Policy = 3,
}

pub(crate) fn stream_rng(seed: u64, episode: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode.wrapping_mul(16).wrapping_add(stream));
    rng
}

fn rng_for(seed: u64, episode: u64, s: Stream) -> ChaCha8Rng {
    stream_rng(seed, episode, s as u64)
}

/// One row of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub leader_x: f64,
    pub leader_y: f64,
    /// Distance the Leader covered during the slot.
    pub leader_step: f64,
    pub robot_x: f64,
    pub robot_y: f64,
    pub robot_heading: f64,
    /// True distance and bearing at scan time.
    pub true_d: f64,
    pub true_theta: f64,
    pub present_bins: usize,
    pub observed: bool,
    pub d_m: Option<f64>,
    pub theta_m: Option<f64>,
    pub v_rel_m: Option<f64>,
    /// Leader speed along the line of sight implied by the speed observation.
    pub v_leader_m: Option<f64>,
    /// Leader speed during the slot projected on the line of sight.
    pub v_leader_true: f64,
    pub d_e: f64,
    pub v_rel_e: f64,
    /// Rotation derived from the estimate (before any escape override).
    pub rotate_est: f64,
    /// Rotation actually applied.
    pub rotate_by: f64,
    pub v_f_cmd: f64,
    pub displacement: f64,
    pub randomized: bool,
    pub obstacle_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: u64,
    pub seed: u64,
    pub strategy: Strategy,
    pub eta_used: f64,
    pub records: Vec<SlotRecord>,
}

impl EpisodeLog {
    /// CSV with one row per slot and a header line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.true_d)
    }

    pub fn mean_distance(&self) -> f64 {
        self.records.iter().map(|r| r.true_d).sum::<f64>() / self.records.len().max(1) as f64
    }

    /// Mean true distance over slots `range`.
    pub fn mean_distance_over(&self, range: std::ops::Range<usize>) -> f64 {
        let v: Vec<f64> = self.records.iter().filter(|r| range.contains(&r.slot)).map(|r| r.true_d).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }
}

/// Minimum distance fed to the channel model, meters.
const MIN_CHANNEL_DISTANCE: f64 = 0.1;
/// Distance the robot keeps from walls, meters.
const WALL_CLEARANCE: f64 = 0.05;

enum SweepSource {
    Model,
    Bank { bank: TraceBank },
}

struct Estimator {
    params: ChannelParams,
}

fn calibration_bank<R: Rng + ?Sized>(world: &WorldConfig, samples: usize, rng: &mut R) -> Result<TraceBank> {
    let (d, a) = TraceBank::default_grid();
    TraceBank::synthesize(&d, &a, samples, &world.channel, &world.pattern, rng)
}

/// Per-bin interpolation from a trace bank, with the bank angle taken as the
/// antenna's offset from the source.
fn bank_sweep<R: Rng + ?Sized>(world: &WorldConfig, bank: &TraceBank, rel: RelativePosition, rng: &mut R) -> Result<RssiSweep> {
    let mask = world.sparsity.draw_mask(rng);
    let d = rel.distance();
    let mut values = vec![None; BINS];
    for (k, present) in mask.iter().enumerate() {
        if *present {
            let offset = wrap(bin_angle(k) - rel.angle());
            values[k] = Some(interpolate_trace(bank, d, offset, world.channel.eta, rng)?);
        }
    }
    RssiSweep::new(values)
}

fn moved_robot(world: &WorldConfig, nlos: Option<&NlosGeometry>, pose: &GlobalPose, distance: f64) -> (GlobalPose, f64, bool) {
    let from = pose.position();
    let mut target = *pose;
    target.advance(distance);
    let to = target.position();
    let mut t: f64 = 1.0;
    // Arena walls.
    let a = &world.arena;
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    for (p, dp, lo, hi) in [(from.x, dx, 0.0, a.width), (from.y, dy, 0.0, a.height)] {
        if dp > 0.0 && p + dp > hi - WALL_CLEARANCE {
            t = t.min(((hi - WALL_CLEARANCE - p) / dp).max(0.0));
        } else if dp < 0.0 && p + dp < lo + WALL_CLEARANCE {
            t = t.min(((lo + WALL_CLEARANCE - p) / dp).max(0.0));
        }
    }
    if let Some(g) = nlos {
        let (wa, wb) = g.wall_points();
        t = t.min(free_fraction(from, to, wa, wb, WALL_CLEARANCE));
    }
    let hit = t < 1.0;
    let mut out = *pose;
    out.advance(distance * t);
    (out, (distance * t).abs(), hit)
}

/// Run one episode. Every random draw comes from sub-streams of
/// `(seed, episode)`, so the log is a pure function of the inputs.
pub fn run_episode(scenario: &Scenario, episode: u64, seed: u64) -> Result<EpisodeLog> {
    scenario.validate()?;
    let world = &scenario.world;
    let policy = scenario.policy_config();
    let mut init_rng = rng_for(seed, episode, Stream::Init);
    let mut leader_rng = rng_for(seed, episode, Stream::Leader);
    let mut chan_rng = rng_for(seed, episode, Stream::Channel);
    let mut policy_rng = rng_for(seed, episode, Stream::Policy);

    let nlos = world.nlos_geometry();
    let (leader_start, mut pose) = match &nlos {
        Some(g) => {
            let r = g.robot_point();
            let l = g.leader_point();
            let heading = init_rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            (l, GlobalPose::new(r.x, r.y, heading))
        }
        None => {
            let l = world.arena.random_point(&mut init_rng, 10.0);
            let bearing = init_rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let heading = init_rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let r = world.arena.clamp(Point::new(
                l.x + world.initial_distance * bearing.cos(),
                l.y + world.initial_distance * bearing.sin(),
            ));
            (l, GlobalPose::new(r.x, r.y, heading))
        }
    };
    let mut leader = Leader::new(world.leader.clone(), world.arena, leader_start, &mut leader_rng);

    // Channel source and the estimator's view of the channel.
    let source = match world.channel_source {
        ChannelSource::Model => SweepSource::Model,
        ChannelSource::TraceBank { samples_per_cell } => SweepSource::Bank {
            bank: calibration_bank(world, samples_per_cell, &mut chan_rng)?,
        },
    };
    let mut estimator = Estimator { params: world.channel.clone() };
    if world.calibrate_eta {
        let bank = match &source {
            SweepSource::Bank { bank } => bank.clone(),
            SweepSource::Model => calibration_bank(world, 10, &mut chan_rng)?,
        };
        estimator.params.eta = estimate_eta(&bank.mean_power_by_distance())?;
    }

    let d0 = pose.position().distance_to(leader.position()).max(MIN_CHANNEL_DISTANCE);
    let mut controller = match scenario.controller_config() {
        Some(cfg) => Some(Controller::new(cfg, d0)?),
        None => None,
    };
    let mut monitor = StallMonitor::new(&policy);
    let cycle = world.timing.cycle();
    let dt = world.timing.controller_dt;
    let v_cap = world.v_f_max();

    let mut records = Vec::with_capacity(world.slots);
    let mut prev_estimate: Option<Point> = None;
    let mut last_speed = 0.0;
    let mut last_leader_next = 0.0;
    let mut last_hit = false;

    for slot in 0..world.slots {
        let (ldx, ldy) = leader.step(cycle, &mut leader_rng);
        let true_rel = to_local(leader.position(), &pose);
        let true_d = true_rel.distance();
        let true_theta = true_rel.angle();
        let (hs, hc) = (pose.heading() + true_theta).sin_cos();
        let v_leader_true = (ldx * hc + ldy * hs) / cycle;

        // Observation.
        let (obs, present_bins, theta_basic) = match &world.observation {
            ObservationMode::Controlled { distance_bias, angle_bias, distance_sigma, angle_sigma } => {
                let nd = crate::channel::gaussian(&mut chan_rng, *distance_sigma);
                let na = crate::channel::gaussian(&mut chan_rng, *angle_sigma);
                let d_m = (true_d - distance_bias + nd).max(0.0);
                let th = wrap(true_theta + angle_bias + na);
                (Some((d_m, th)), BINS, Some(th))
            }
            ObservationMode::Channel => {
                let rel = if true_d < MIN_CHANNEL_DISTANCE {
                    RelativePosition::from_polar(MIN_CHANNEL_DISTANCE, true_theta)
                } else {
                    true_rel
                };
                let sweep = match (&source, &nlos) {
                    (_, Some(g)) => {
                        let paths = g.paths(&pose);
                        if paths.is_empty() {
                            RssiSweep::empty()
                        } else {
                            synthesize_sweep(&paths, &world.channel, &world.pattern, &world.sparsity, &mut chan_rng)?
                        }
                    }
                    (SweepSource::Model, None) => {
                        generate_sweep(rel, &world.channel, &world.pattern, &world.sparsity, &mut chan_rng)?
                    }
                    (SweepSource::Bank { bank }, None) => bank_sweep(world, bank, rel, &mut chan_rng)?,
                };
                let present = sweep.present_count();
                if present == 0 {
                    (None, 0, None)
                } else {
                    let d_m = observe_distance(&sweep, &estimator.params)?;
                    let norm = normalize(&sweep)?;
                    let th = world.aoa_method.estimate(&norm, &world.pattern)?.theta_m;
                    let basic = aoa_basic(&norm, &world.pattern)?.theta_m;
                    (Some((d_m, th)), present, Some(basic))
                }
            }
        };

        // Decision.
        let mut v_rel_m = None;
        let mut v_leader_m = None;
        let (rotate_est, v_cmd, d_e, v_rel_e) = match controller.as_mut() {
            None => {
                let (d, th) = obs.map(|(d, _)| (d, theta_basic.unwrap_or(0.0))).unwrap_or((0.0, 0.0));
                let dec = baseline_decide(d, th, dt, &policy);
                (dec.rotate_by, if obs.is_some() { dec.v_f_next } else { 0.0 }, d, 0.0)
            }
            Some(ctrl) => {
                let strategy = policy.strategy.speed_strategy().expect("LQG strategy");
                let state_before = *ctrl.state();
                let (o, leader_next) = match (obs, prev_estimate) {
                    (Some((d_m, th)), Some(prev_point)) => {
                        let carried = to_local(prev_point, &pose);
                        let prev = RelativeState {
                            d_e: carried.x_rel,
                            v_rel_e: last_speed - last_leader_next,
                            theta_rel_e: 0.0,
                        };
                        let sp = observe(strategy, d_m, th, &prev, last_speed, dt)?;
                        v_rel_m = Some(sp.v_rel_m);
                        v_leader_m = Some(last_speed - sp.v_rel_m);
                        (ObservationVector { d_m, v_rel_m: sp.v_rel_m, theta_m: th }, sp.v_leader_next)
                    }
                    (Some((d_m, th)), None) => {
                        // No previous observation yet: nothing to say about speed.
                        (ObservationVector { d_m, v_rel_m: state_before.v_rel_e, theta_m: th }, 0.0)
                    }
                    (None, _) => {
                        // No samples: feed the prediction back, i.e. no innovation.
                        let cfg = ctrl.config();
                        let p = cfg.a * state_before.to_vector() + cfg.b * Vector3::from(ctrl.last_control());
                        (ObservationVector { d_m: p[0], v_rel_m: p[1], theta_m: p[2] }, last_leader_next)
                    }
                };
                let dec = ctrl.step(&o, leader_next);
                last_leader_next = leader_next;
                let s = ctrl.state();
                (dec.rotate_by, dec.v_f_next, s.d_e, s.v_rel_e)
            }
        };

        // Multipath escape.
        let mut rotate_by = rotate_est;
        let mut v = v_cmd;
        let mut randomized = false;
        if policy.escape_enabled {
            if let Some(h) = check_multipath_escape(&mut monitor, last_hit, d_e, &mut policy_rng) {
                rotate_by = h;
                v = policy.v_f_max;
                randomized = true;
                if let Some(ctrl) = controller.as_mut() {
                    ctrl.set_angle(wrap(rotate_est - h));
                }
            }
        }
        let v = v.clamp(-v_cap, v_cap);

        // Where the estimate puts the Leader, for next slot's speed observation.
        prev_estimate = Some(to_global(RelativePosition::from_polar(d_e, rotate_est), &pose));

        let scan_pose = pose;
        pose.rotate(rotate_by);
        let (moved, dist, hit) = moved_robot(world, nlos.as_ref(), &pose, v * world.timing.translate_s);
        pose = moved;
        last_speed = dist * v.signum() / world.timing.translate_s;
        last_hit = hit;

        records.push(SlotRecord {
            slot,
            leader_x: leader.position().x,
            leader_y: leader.position().y,
            leader_step: ldx.hypot(ldy),
            robot_x: scan_pose.x,
            robot_y: scan_pose.y,
            robot_heading: scan_pose.heading(),
            true_d,
            true_theta,
            present_bins,
            observed: obs.is_some(),
            d_m: obs.map(|o| o.0),
            theta_m: obs.map(|o| o.1),
            v_rel_m,
            v_leader_m,
            v_leader_true,
            d_e,
            v_rel_e,
            rotate_est,
            rotate_by,
            v_f_cmd: v,
            displacement: dist,
            randomized,
            obstacle_hit: hit,
        });
    }
    if records.is_empty() {
        return Err(Error::Config("slots must be at least 1".into()));
    }
    Ok(EpisodeLog {
        episode,
        seed,
        strategy: policy.strategy,
        eta_used: estimator.params.eta,
        records,
    })
}
