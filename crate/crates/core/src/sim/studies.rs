use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::stream_rng;
use super::{compute_metrics_pooled, LeaderKind, mean_ci, run_episode, EpisodeLog, ObservationMode, Scenario, WorldConfig};
use crate::channel::{generate_sweep, SparsityModel};
use crate::error::{Error, Result};
use crate::estimation::{normalize, observe_distance, AoaMethod, BINS};
use crate::geometry::{wrap, RelativePosition};
use crate::policy::Strategy;
use crate::tdoa::{self, LinkModel, STEP_DEG};

/// Episode ids `0..episodes`, run in parallel, returned in id order.
pub fn run_batch(scenario: &Scenario, episodes: usize, seed: u64) -> Result<Vec<EpisodeLog>> {
    scenario.validate()?;
    let mut logs = (0..episodes as u64)
        .into_par_iter()
        .map(|ep| run_episode(scenario, ep, seed))
        .collect::<Result<Vec<_>>>()?;
    logs.sort_by_key(|l| l.episode);
    Ok(logs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSweepRow {
    pub strategy: Strategy,
    pub v_l_max: f64,
    pub v_f_max: f64,
    pub mean_distance: f64,
    pub ci95: f64,
    pub p_within: f64,
    /// Per-episode mean distances, by episode id.
    #[serde(skip)]
    pub per_episode: Vec<f64>,
}

fn speed_row(scenario: &Scenario, episodes: usize, seed: u64) -> Result<SpeedSweepRow> {
    let logs = run_batch(scenario, episodes, seed)?;
    let per_episode: Vec<f64> = logs.iter().map(EpisodeLog::mean_distance).collect();
    let m = compute_metrics_pooled(&logs, scenario.world.d_th)?;
    let (mean, ci) = mean_ci(&per_episode);
    Ok(SpeedSweepRow {
        strategy: scenario.policy.strategy,
        v_l_max: scenario.world.leader.v_l_max,
        v_f_max: scenario.world.v_f_max(),
        mean_distance: mean,
        ci95: ci,
        p_within: m.p_within,
        per_episode,
    })
}

/// Mean tracking distance against Leader speed, with the Follower cap at
/// `ratio · v_L`.
pub fn sweep_leader_speed(
    base: &Scenario,
    speeds: &[f64],
    ratio: f64,
    strategies: &[Strategy],
    episodes: usize,
    seed: u64,
) -> Result<Vec<SpeedSweepRow>> {
    let mut rows = Vec::with_capacity(speeds.len() * strategies.len());
    for &strategy in strategies {
        for &v in speeds {
            let mut s = base.clone();
            s.world.leader.v_l_max = v;
            s.world.v_f_max = Some(ratio * v);
            s.policy.strategy = strategy;
            rows.push(speed_row(&s, episodes, seed)?);
        }
    }
    Ok(rows)
}

/// Mean tracking distance against the Follower cap, as multiples of `v_L`.
pub fn sweep_follower_speed(
    base: &Scenario,
    v_l_max: f64,
    ratios: &[f64],
    strategies: &[Strategy],
    episodes: usize,
    seed: u64,
) -> Result<Vec<SpeedSweepRow>> {
    let mut rows = Vec::with_capacity(ratios.len() * strategies.len());
    for &strategy in strategies {
        for &r in ratios {
            let mut s = base.clone();
            s.world.leader.v_l_max = v_l_max;
            s.world.v_f_max = Some(r * v_l_max);
            s.policy.strategy = strategy;
            rows.push(speed_row(&s, episodes, seed)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledErrorRow {
    pub distance_bias: f64,
    pub angle_bias_deg: f64,
    pub mean_distance: f64,
    pub ci95: f64,
}

/// Tracking with observations equal to the truth plus a fixed bias and
/// small noise. `biases` holds `(distance m, angle rad)` pairs.
pub fn run_controlled_error(
    base: &Scenario,
    biases: &[(f64, f64)],
    distance_sigma: f64,
    angle_sigma: f64,
    episodes: usize,
    seed: u64,
) -> Result<Vec<ControlledErrorRow>> {
    biases
        .iter()
        .map(|&(db, ab)| {
            let mut s = base.clone();
            s.world.observation = ObservationMode::Controlled {
                distance_bias: db,
                angle_bias: ab,
                distance_sigma,
                angle_sigma,
            };
            let logs = run_batch(&s, episodes, seed)?;
            let per: Vec<f64> = logs.iter().map(EpisodeLog::mean_distance).collect();
            let (mean, ci) = mean_ci(&per);
            Ok(ControlledErrorRow {
                distance_bias: db,
                angle_bias_deg: ab.to_degrees(),
                mean_distance: mean,
                ci95: ci,
            })
        })
        .collect()
}

/// Keep `rate` evenly spaced bins of the 200, starting at `phase`
/// (a fraction of one stride in `[0, 1)`).
pub fn decimate_mask(rate: usize, phase: f64) -> Result<Vec<bool>> {
    if rate == 0 || rate > BINS {
        return Err(Error::InvalidArgument(format!("rate must lie in 1..={BINS}, got {rate}")));
    }
    let stride = BINS as f64 / rate as f64;
    let mut keep = vec![false; BINS];
    for i in 0..rate {
        let k = ((phase.clamp(0.0, 1.0 - f64::EPSILON) + i as f64) * stride).floor() as usize;
        keep[k % BINS] = true;
    }
    Ok(keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRow {
    pub rate: usize,
    pub angle_error_deg: f64,
    pub angle_ci95: f64,
    pub distance_error: f64,
    pub distance_ci95: f64,
    /// Fraction of trials with angle error below 40°.
    pub angle_within_40: f64,
}

/// Fixed-distance trials at a random bearing. Each trial draws one full
/// sweep and then thins it to every rate, so all rates see the same
/// channel realizations.
pub fn run_sampling_sweep(
    world: &WorldConfig,
    rates: &[usize],
    distance: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<SamplingRow>> {
    if !(distance > 0.0) {
        return Err(Error::InvalidArgument("distance must be positive".into()));
    }
    for &r in rates {
        decimate_mask(r, 0.0)?;
    }
    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t, 8);
            let bearing = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let rel = RelativePosition::from_polar(distance, bearing);
            let full = generate_sweep(rel, &world.channel, &world.pattern, &SparsityModel::none(), &mut rng)?;
            let phase: f64 = rng.random();
            rates
                .iter()
                .map(|&r| {
                    let s = full.masked(&decimate_mask(r, phase)?);
                    let th = world.aoa_method.estimate(&normalize(&s)?, &world.pattern)?.theta_m;
                    let d = observe_distance(&s, &world.channel)?;
                    Ok((wrap(th - bearing).abs().to_degrees(), (d - distance).abs()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let a: Vec<f64> = per_trial.iter().map(|t| t[i].0).collect();
            let d: Vec<f64> = per_trial.iter().map(|t| t[i].1).collect();
            let (am, aci) = mean_ci(&a);
            let (dm, dci) = mean_ci(&d);
            SamplingRow {
                rate,
                angle_error_deg: am,
                angle_ci95: aci,
                distance_error: dm,
                distance_ci95: dci,
                angle_within_40: a.iter().filter(|&&e| e < 40.0).count() as f64 / a.len().max(1) as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlosStudy {
    pub episodes: usize,
    pub slots: usize,
    pub success_without: f64,
    pub success_with: f64,
}

fn found(log: &EpisodeLog, radius: f64) -> bool {
    log.records.iter().any(|r| r.true_d <= radius)
}

/// Success rate of finding a static Leader behind a wall within the layout's
/// slot budget, with and without the multipath escape. The Follower cap
/// comes from the layout, not the base scenario.
pub fn run_nlos_study(base: &Scenario, episodes: usize, seed: u64) -> Result<NlosStudy> {
    let geometry = base
        .world
        .nlos_geometry()
        .ok_or_else(|| Error::Config("nlos study needs a multipath scenario".into()))?;
    let rate = |escape: bool| -> Result<f64> {
        let mut s = base.clone();
        s.policy.escape_enabled = escape;
        s.world.slots = geometry.slot_budget;
        s.world.leader.kind = LeaderKind::Static;
        s.world.leader.v_l_max = 0.0;
        s.world.v_f_max = Some(geometry.follower_speed);
        let logs = run_batch(&s, episodes, seed)?;
        Ok(logs.iter().filter(|l| found(l, geometry.success_radius)).count() as f64 / episodes.max(1) as f64)
    };
    Ok(NlosStudy {
        episodes,
        slots: geometry.slot_budget,
        success_without: rate(false)?,
        success_with: rate(true)?,
    })
}

/// Shapes of missing data for the AoA benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SparsityPattern {
    /// A few clusters of very different sizes separated by wide gaps.
    BatchedSparse,
    /// Random gaps plus per-bin drops drawn from the world's sparsity model.
    Model,
}

impl SparsityPattern {
    fn draw<R: Rng + ?Sized>(self, sparsity: &SparsityModel, rng: &mut R) -> Vec<bool> {
        match self {
            SparsityPattern::Model => sparsity.draw_mask(rng),
            SparsityPattern::BatchedSparse => batched_mask(rng),
        }
    }
}

/// One large batch and a handful of short ones, every gap at least 30°.
fn batched_mask<R: Rng + ?Sized>(rng: &mut R) -> Vec<bool> {
    const MIN_GAP: usize = 17;
    let mut keep = vec![false; BINS];
    let small = rng.random_range(2..=4);
    let mut sizes = vec![rng.random_range(25..=40)];
    sizes.extend((0..small).map(|_| rng.random_range(2..=5)));
    let used: usize = sizes.iter().sum::<usize>() + MIN_GAP * sizes.len();
    let mut slack = BINS - used;
    let start = rng.random_range(0..BINS);
    let mut k = start;
    let n = sizes.len();
    for (i, size) in sizes.into_iter().enumerate() {
        for b in 0..size {
            keep[(k + b) % BINS] = true;
        }
        let extra = if i + 1 == n { 0 } else { rng.random_range(0..=slack / 2) };
        slack -= extra;
        k += size + MIN_GAP + extra;
    }
    keep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoaBenchmark {
    pub pattern: SparsityPattern,
    pub trials: usize,
    pub median_basic_deg: f64,
    pub median_clustering_deg: f64,
    pub median_weighted_deg: f64,
}

/// Median absolute bearing error of the three AoA methods on the same
/// sweeps, at random distances in 1–8 m and random bearings.
pub fn aoa_benchmark(world: &WorldConfig, pattern: SparsityPattern, trials: usize, seed: u64) -> Result<AoaBenchmark> {
    let errors = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t, 9);
            let bearing = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let d = rng.random_range(1.0..8.0);
            let rel = RelativePosition::from_polar(d, bearing);
            let full = generate_sweep(rel, &world.channel, &world.pattern, &SparsityModel::none(), &mut rng)?;
            let mut mask = pattern.draw(&world.sparsity, &mut rng);
            if !mask.iter().any(|&m| m) {
                mask[0] = true;
            }
            let s = normalize(&full.masked(&mask))?;
            [AoaMethod::Basic, AoaMethod::Clustering, AoaMethod::Weighted]
                .map(|m| m.estimate(&s, &world.pattern).map(|o| wrap(o.theta_m - bearing).abs().to_degrees()))
                .into_iter()
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let median = |i: usize| super::Cdf::new(errors.iter().map(|e| e[i]).collect()).median();
    Ok(AoaBenchmark {
        pattern,
        trials,
        median_basic_deg: median(0),
        median_clustering_deg: median(1),
        median_weighted_deg: median(2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdoaCheck {
    pub trials: usize,
    /// Fraction of trials with distance error ≤ 0.20 m.
    pub within_20cm: f64,
    pub distance_error_p95: f64,
    /// Distinct angle errors seen, in multiples of the 18° step.
    pub angle_error_steps: Vec<i64>,
    pub failures: usize,
}

/// LOS ranging at random distances and bearings. Angle errors are measured
/// against the orientation nearest the true bearing.
pub fn tdoa_check(link: &LinkModel, trials: usize, seed: u64) -> Result<TdoaCheck> {
    link.validate()?;
    let step = STEP_DEG.to_radians();
    let results = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t, 10);
            let d = rng.random_range(0.5..8.0);
            let bearing = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let rel = RelativePosition::from_polar(d, bearing);
            match tdoa::range(rel, link, true, 5, &mut rng) {
                Ok((dh, ah)) => {
                    let nearest = (bearing / step).round() * step;
                    let steps = (wrap(ah - nearest) / step).round() as i64;
                    Ok(Some(((dh - d).abs(), steps.abs())))
                }
                Err(Error::RangingFailure) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let ok: Vec<(f64, i64)> = results.iter().flatten().copied().collect();
    let errs = super::Cdf::new(ok.iter().map(|r| r.0).collect());
    let mut steps: Vec<i64> = ok.iter().map(|r| r.1).collect();
    steps.sort_unstable();
    steps.dedup();
    Ok(TdoaCheck {
        trials,
        within_20cm: errs.prob_le(0.20),
        distance_error_p95: errs.quantile(0.95),
        angle_error_steps: steps,
        failures: results.len() - ok.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::RssiSweep;

    #[test]
    fn decimation_keeps_exactly_rate_bins() {
        for rate in [200, 150, 100, 70, 40, 1] {
            for phase in [0.0, 0.3, 0.99] {
                let m = decimate_mask(rate, phase).unwrap();
                assert_eq!(m.iter().filter(|&&b| b).count(), rate);
            }
        }
        assert!(decimate_mask(0, 0.0).is_err());
        assert!(decimate_mask(201, 0.0).is_err());
    }

    #[test]
    fn batched_masks_have_wide_gaps() {
        let mut rng = stream_rng(1, 0, 0);
        for _ in 0..200 {
            let m = batched_mask(&mut rng);
            let clusters = crate::estimation::find_clusters(
                &normalize(&RssiSweep::new(m.iter().map(|&b| b.then_some(-50.0)).collect()).unwrap()).unwrap(),
            );
            assert!(clusters.len() >= 3);
            let present = m.iter().filter(|&&b| b).count();
            assert!(BINS - present >= 17 * clusters.len());
        }
    }

    #[test]
    fn batch_is_sorted_by_episode() {
        let mut s = Scenario::emulation(1.0, 1.8, Strategy::Pragmatic);
        s.world.slots = 10;
        let logs = run_batch(&s, 6, 3).unwrap();
        assert!(logs.iter().enumerate().all(|(i, l)| l.episode == i as u64));
    }
}
