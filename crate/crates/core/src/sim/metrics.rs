use std::io::Write;

use serde::{Deserialize, Serialize};

use super::EpisodeLog;
use crate::error::{Error, Result};
use crate::geometry::wrap;

/// Empirical CDF over a finite sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    values: Vec<f64>,
}

impl Cdf {
    /// Non-finite values are dropped.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.retain(|v| v.is_finite());
        values.sort_by(f64::total_cmp);
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of samples `≤ x`.
    pub fn prob_le(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    /// Fraction of samples strictly below `x`.
    pub fn prob_lt(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.partition_point(|&v| v < x) as f64 / self.values.len() as f64
    }

    /// Smallest sample with cumulative probability ≥ `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        let n = self.values.len();
        let k = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.values[k - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `(value, cumulative probability)` steps.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.values.len() as f64;
        self.values.iter().enumerate().map(move |(i, &v)| (v, (i + 1) as f64 / n))
    }
}

/// Write a CDF as `value,cum_prob` rows.
pub fn write_cdf<W: Write>(writer: W, cdf: &Cdf) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["value", "cum_prob"])?;
    for (v, p) in cdf.points() {
        w.write_record([v.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub slots: usize,
    pub d_th: f64,
    pub p_within: f64,
    pub mean_distance: f64,
    pub distance: Cdf,
    /// `|d_e − d|`, meters.
    pub distance_error: Cdf,
    /// Angle between the chosen heading and the true bearing, degrees.
    pub angle_error_deg: Cdf,
    /// `|v_L^m − v_L|` along the line of sight, m/s.
    pub speed_error: Cdf,
    /// Robot path length over Leader path length, one entry per episode
    /// whose Leader moved.
    pub path_ratios: Vec<f64>,
}

impl Metrics {
    /// Fraction of episodes whose path ratio is below `bound`.
    pub fn path_ratio_below(&self, bound: f64) -> f64 {
        if self.path_ratios.is_empty() {
            return f64::NAN;
        }
        self.path_ratios.iter().filter(|&&r| r < bound).count() as f64 / self.path_ratios.len() as f64
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        format!(
            "P(d<={}) = {:.4}  mean d = {:.3} m  |d err| p50/p90 = {:.2}/{:.2} m  angle err p50/p90 = {:.1}/{:.1} deg  speed err p50/p90 = {:.2}/{:.2} m/s",
            self.d_th,
            self.p_within,
            self.mean_distance,
            self.distance_error.quantile(0.5),
            self.distance_error.quantile(0.9),
            self.angle_error_deg.quantile(0.5),
            self.angle_error_deg.quantile(0.9),
            self.speed_error.quantile(0.5),
            self.speed_error.quantile(0.9),
        )
    }
}

pub fn compute_metrics(log: &EpisodeLog, d_th: f64) -> Result<Metrics> {
    compute_metrics_pooled(std::slice::from_ref(log), d_th)
}

/// Metrics over every slot of every log.
pub fn compute_metrics_pooled(logs: &[EpisodeLog], d_th: f64) -> Result<Metrics> {
    if !(d_th > 0.0) {
        return Err(Error::InvalidArgument(format!("d_th must be positive, got {d_th}")));
    }
    let slots: usize = logs.iter().map(|l| l.records.len()).sum();
    if slots == 0 {
        return Err(Error::InsufficientData("no slots to summarize".into()));
    }
    let mut d = Vec::with_capacity(slots);
    let mut de = Vec::with_capacity(slots);
    let mut ae = Vec::with_capacity(slots);
    let mut se = Vec::with_capacity(slots);
    let mut ratios = Vec::with_capacity(logs.len());
    for log in logs {
        let mut robot_path = 0.0;
        let mut leader_path = 0.0;
        for r in &log.records {
            d.push(r.true_d);
            de.push((r.d_e - r.true_d).abs());
            ae.push(wrap(r.rotate_est - r.true_theta).abs().to_degrees());
            if let Some(v) = r.v_leader_m {
                se.push((v - r.v_leader_true).abs());
            }
            robot_path += r.displacement;
            leader_path += r.leader_step;
        }
        if leader_path > 0.0 {
            ratios.push(robot_path / leader_path);
        }
    }
    let distance = Cdf::new(d);
    Ok(Metrics {
        episodes: logs.len(),
        slots,
        d_th,
        p_within: distance.prob_le(d_th),
        mean_distance: distance.mean(),
        distance,
        distance_error: Cdf::new(de),
        angle_error_deg: Cdf::new(ae),
        speed_error: Cdf::new(se),
        path_ratios: ratios,
    })
}

/// Sample mean and the half-width of its normal-approximation 95 % interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs with `a < b`.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// One-sided p-value for "a tends to be smaller than b".
    pub p_value: f64,
}

/// Paired one-sided sign test; ties are discarded.
pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("paired samples must have equal length".into()));
    }
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => wins += 1,
            std::cmp::Ordering::Greater => losses += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = wins + losses;
    // P(X ≥ wins) for X ~ Binomial(n, 1/2), accumulated in log space.
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let mut p = 0.0;
    let mut ln_choose = 0.0; // ln C(n, 0)
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= wins {
            p += (ln_choose + ln_half_n).exp();
        }
    }
    Ok(SignTest {
        wins,
        losses,
        ties,
        p_value: p.min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Strategy;
    use crate::sim::SlotRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(slot: usize, d: f64) -> SlotRecord {
        SlotRecord {
            slot,
            leader_x: 0.0,
            leader_y: 0.0,
            leader_step: 1.0,
            robot_x: 0.0,
            robot_y: 0.0,
            robot_heading: 0.0,
            true_d: d,
            true_theta: 0.0,
            present_bins: 200,
            observed: true,
            d_m: Some(d),
            theta_m: Some(0.0),
            v_rel_m: None,
            v_leader_m: None,
            v_leader_true: 0.0,
            d_e: d,
            v_rel_e: 0.0,
            rotate_est: 0.0,
            rotate_by: 0.0,
            v_f_cmd: 0.0,
            displacement: 1.5,
            randomized: false,
            obstacle_hit: false,
        }
    }

    fn log(ds: &[f64]) -> EpisodeLog {
        EpisodeLog {
            episode: 0,
            seed: 0,
            strategy: Strategy::Pragmatic,
            eta_used: 2.0,
            records: ds.iter().enumerate().map(|(i, &d)| record(i, d)).collect(),
        }
    }

    #[test]
    fn constant_distance_gives_a_step() {
        let m = compute_metrics(&log(&[1.0; 20]), 5.0).unwrap();
        assert_eq!(m.p_within, 1.0);
        assert_eq!(m.distance.prob_lt(1.0), 0.0);
        assert_eq!(m.distance.prob_le(1.0), 1.0);
        assert_eq!(m.path_ratios, vec![1.5]);
    }

    #[test]
    fn uniform_distances_split_at_the_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20_000;
        let ds: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let m = compute_metrics(&log(&ds), 5.0).unwrap();
        let half_width = 1.96 * (0.25 / n as f64).sqrt();
        assert!((m.p_within - 0.5).abs() < 2.0 * half_width, "{}", m.p_within);
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let c = Cdf::new(vec![3.0, 1.0, 2.0, 2.0, f64::NAN]);
        let pts: Vec<_> = c.points().collect();
        assert_eq!(pts.len(), 4);
        assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(pts.last().unwrap().1, 1.0);
        assert_eq!(c.median(), 2.0);
        let mut buf = Vec::new();
        write_cdf(&mut buf, &c).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("value,cum_prob\n1,0.25\n"));
    }

    #[test]
    fn sign_test_matches_binomial_tail() {
        let a = [1.0; 10];
        let b = [2.0; 10];
        let t = sign_test(&a, &b).unwrap();
        assert_eq!(t.wins, 10);
        assert!((t.p_value - 1.0 / 1024.0).abs() < 1e-12);
        // 8 of 10: (45 + 10 + 1) / 1024.
        let a = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0, 3.0, 2.0];
        let b = [2.0; 11];
        let t = sign_test(&a, &b).unwrap();
        assert_eq!((t.wins, t.losses, t.ties), (8, 2, 1));
        assert!((t.p_value - 56.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn mean_ci_of_constant_has_zero_width() {
        assert_eq!(mean_ci(&[2.0, 2.0, 2.0]), (2.0, 0.0));
    }
}
