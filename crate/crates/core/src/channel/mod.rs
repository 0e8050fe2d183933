//! Simulated RF channel for a rotating directional receiver.
//!
//! Received power follows the log-distance model with the directional gain of
//! the antenna at its current offset from the arrival direction, plus
//! Gaussian shadowing in dB. Packet loss is modeled per revolution as a mix of
//! independent drops and clustered gaps.

mod pattern;
mod trace;

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{bin_angle, RssiSweep, BINS, BIN_WIDTH_DEG};
use crate::geometry::{wrap, RelativePosition};

pub use pattern::{AntennaPattern, DEFAULT_FLOOR_DB, DEFAULT_HPBW_DEG};
pub use trace::{
    estimate_eta, eta_from_reference, interpolate_trace, interpolate_trace_with_noise, TraceBank,
    TRACE_EXTRA_NOISE_VAR,
};

/// Log-distance channel parameters.
///
/// `p_ref_dbm` is the receiver's calibration: the mean power of a full sweep
/// taken at `d_ref`. It is what the distance observer inverts against. The
/// power at `d_ref` on boresight is [`ChannelParams::peak_ref_dbm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub p_t_dbm: f64,
    pub l_ref_db: f64,
    pub d_ref: f64,
    pub eta: f64,
    /// Standard deviation of the per-sample shadowing term, dB.
    pub shadow_sigma_db: f64,
    /// Standard deviation of a shadowing offset shared by every sample of one
    /// sweep (large-scale shadowing at the receiver's location), dB.
    pub sweep_shadow_sigma_db: f64,
    pub p_ref_dbm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::calibrated(7.0, 40.0, 1.0, 2.0, 2.0, 1.0, &AntennaPattern::default())
    }
}

impl ChannelParams {
    /// Parameters whose `p_ref_dbm` matches the mean sweep power of `pattern`
    /// at `d_ref`.
    pub fn calibrated(
        p_t_dbm: f64,
        l_ref_db: f64,
        d_ref: f64,
        eta: f64,
        shadow_sigma_db: f64,
        sweep_shadow_sigma_db: f64,
        pattern: &AntennaPattern,
    ) -> Self {
        Self {
            p_t_dbm,
            l_ref_db,
            d_ref,
            eta,
            shadow_sigma_db,
            sweep_shadow_sigma_db,
            p_ref_dbm: p_t_dbm - l_ref_db + pattern.mean_gain_db(),
        }
    }

    /// Received power at `d_ref` on boresight, without shadowing.
    pub fn peak_ref_dbm(&self) -> f64 {
        self.p_t_dbm - self.l_ref_db
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            (self.p_t_dbm, "p_t_dbm"),
            (self.l_ref_db, "l_ref_db"),
            (self.d_ref, "d_ref"),
            (self.eta, "eta"),
            (self.shadow_sigma_db, "shadow_sigma_db"),
            (self.sweep_shadow_sigma_db, "sweep_shadow_sigma_db"),
            (self.p_ref_dbm, "p_ref_dbm"),
        ];
        for (v, name) in fields {
            crate::error::ensure_finite(v, name)?;
        }
        if self.eta <= 0.0 {
            return Err(Error::Config("eta must be positive".into()));
        }
        if self.d_ref <= 0.0 {
            return Err(Error::Config("d_ref must be positive".into()));
        }
        if self.shadow_sigma_db < 0.0 || self.sweep_shadow_sigma_db < 0.0 {
            return Err(Error::Config("shadowing deviations must be non-negative".into()));
        }
        Ok(())
    }

    /// Mean path loss beyond `d_ref`, dB.
    pub fn excess_loss_db(&self, d: f64) -> f64 {
        10.0 * self.eta * (d / self.d_ref).log10()
    }
}

/// Received power at distance `d` with the antenna `antenna_offset` radians
/// away from the arrival direction.
pub fn received_power(
    d: f64,
    antenna_offset: f64,
    params: &ChannelParams,
    pattern: &AntennaPattern,
    noise_draw: f64,
) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {d}")));
    }
    Ok(params.p_t_dbm + pattern.gain_at(antenna_offset) - params.l_ref_db - params.excess_loss_db(d)
        + noise_draw)
}

/// Missing-sample model for one revolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparsityModel {
    /// Independent per-bin loss probability.
    pub drop_prob: f64,
    /// Expected number of clustered gaps per revolution.
    pub gap_rate: f64,
    /// Mean width of a clustered gap, degrees.
    pub gap_width_deg: f64,
}

impl Default for SparsityModel {
    fn default() -> Self {
        Self {
            drop_prob: 0.0,
            gap_rate: 0.0,
            gap_width_deg: 30.0,
        }
    }
}

impl SparsityModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::Config("drop_prob must lie in [0, 1]".into()));
        }
        if !(self.gap_rate >= 0.0) || !(self.gap_width_deg >= 0.0) {
            return Err(Error::Config("gap parameters must be non-negative".into()));
        }
        Ok(())
    }

    /// Draw the presence mask for one revolution.
    pub fn draw_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let mut present = vec![true; BINS];
        if self.gap_rate > 0.0 {
            let gaps = Poisson::new(self.gap_rate).map(|p| p.sample(rng) as usize).unwrap_or(0);
            let mean_bins = (self.gap_width_deg / BIN_WIDTH_DEG).max(1.0);
            let width = Geometric::new(1.0 / mean_bins).expect("probability in (0, 1]");
            for _ in 0..gaps {
                let start = rng.random_range(0..BINS);
                let w = (1 + width.sample(rng) as usize).min(BINS);
                for k in 0..w {
                    present[(start + k) % BINS] = false;
                }
            }
        }
        if self.drop_prob > 0.0 {
            for p in present.iter_mut() {
                if rng.random::<f64>() < self.drop_prob {
                    *p = false;
                }
            }
        }
        present
    }
}

/// One propagation path seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    /// Total path length, meters.
    pub length_m: f64,
    /// Arrival direction in the receiver's local frame, radians.
    pub angle: f64,
    /// Extra attenuation (reflection or penetration), dB. Zero for a clear
    /// direct path.
    pub gain_db: f64,
}

/// Synthesize one sweep from a set of paths. Per-bin power is the power sum
/// of every path's contribution, then shadowing is added in dB.
///
/// Random draws happen in a fixed order: presence mask, sweep-level
/// shadowing, then one shadowing draw per present bin in bin order.
pub fn synthesize_sweep<R: Rng + ?Sized>(
    paths: &[PropagationPath],
    params: &ChannelParams,
    pattern: &AntennaPattern,
    sparsity: &SparsityModel,
    rng: &mut R,
) -> Result<RssiSweep> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("at least one propagation path is required".into()));
    }
    let mask = sparsity.draw_mask(rng);
    let sweep_offset = gaussian(rng, params.sweep_shadow_sigma_db);
    let per_bin = Normal::new(0.0, params.shadow_sigma_db)
        .map_err(|_| Error::InvalidArgument("shadowing deviation must be non-negative".into()))?;
    let mut values = vec![None; BINS];
    for (bin, present) in mask.iter().enumerate() {
        if !present {
            continue;
        }
        let orientation = bin_angle(bin);
        let mut contributions = Vec::with_capacity(paths.len());
        for p in paths {
            let offset = wrap(orientation - p.angle);
            contributions.push(received_power(p.length_m, offset, params, pattern, p.gain_db)?);
        }
        let noise = if params.shadow_sigma_db > 0.0 { per_bin.sample(rng) } else { 0.0 };
        values[bin] = Some(power_sum_db(&contributions) + sweep_offset + noise);
    }
    RssiSweep::new(values)
}

/// One sweep for a source at `true_rel` with a clear direct path.
pub fn generate_sweep<R: Rng + ?Sized>(
    true_rel: RelativePosition,
    params: &ChannelParams,
    pattern: &AntennaPattern,
    sparsity: &SparsityModel,
    rng: &mut R,
) -> Result<RssiSweep> {
    let d = true_rel.distance();
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("source must not coincide with the receiver".into()));
    }
    let direct = PropagationPath {
        length_m: d,
        angle: true_rel.angle(),
        gain_db: 0.0,
    };
    synthesize_sweep(&[direct], params, pattern, sparsity, rng)
}

/// `10·log10(Σ 10^(x/10))`, exact for a single term.
pub(crate) fn power_sum_db(values_db: &[f64]) -> f64 {
    let max = values_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values_db.len() == 1 {
        return max;
    }
    let sum: f64 = values_db.iter().map(|v| 10f64.powf((v - max) / 10.0)).sum();
    max + 10.0 * sum.log10()
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("positive sigma").sample(rng)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::nearest_bin;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless() -> ChannelParams {
        ChannelParams {
            shadow_sigma_db: 0.0,
            sweep_shadow_sigma_db: 0.0,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn reference_distance_on_boresight() {
        let p = noiseless();
        let pat = AntennaPattern::default();
        let got = received_power(p.d_ref, 0.0, &p, &pat, 0.0).unwrap();
        assert_abs_diff_eq!(got, p.peak_ref_dbm(), epsilon = 1e-12);
    }

    #[test]
    fn closed_form_path_loss() {
        let pat = AntennaPattern::default();
        let p = ChannelParams { eta: 2.0, ..noiseless() };
        let a = received_power(3.0, 0.3, &p, &pat, 0.0).unwrap();
        let b = received_power(6.0, 0.3, &p, &pat, 0.0).unwrap();
        assert_abs_diff_eq!(a - b, 20.0 * 2f64.log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(a - b, 6.0206, epsilon = 1e-4);

        let p = ChannelParams { eta: 3.0, ..noiseless() };
        let r = received_power(10.0 * p.d_ref, 0.0, &p, &pat, 0.0).unwrap();
        assert_abs_diff_eq!(p.peak_ref_dbm() - r, 30.0, epsilon = 1e-12);
    }

    #[test]
    fn nonpositive_distance_rejected() {
        let pat = AntennaPattern::default();
        assert!(received_power(0.0, 0.0, &noiseless(), &pat, 0.0).is_err());
        assert!(received_power(-1.0, 0.0, &noiseless(), &pat, 0.0).is_err());
    }

    #[test]
    fn power_strictly_decreases_with_distance() {
        let pat = AntennaPattern::default();
        let p = noiseless();
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let v = received_power(i as f64 * 0.1, 0.2, &p, &pat, 0.0).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn noiseless_sweep_is_shifted_pattern() {
        let pat = AntennaPattern::default();
        let p = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = 36f64.to_radians();
        let rel = RelativePosition::from_polar(2.5, theta);
        let s = generate_sweep(rel, &p, &pat, &SparsityModel::none(), &mut rng).unwrap();
        let offset = p.peak_ref_dbm() - p.excess_loss_db(2.5);
        for k in 0..BINS {
            let g = pat.gains_db()[(k + BINS - 20) % BINS];
            assert_abs_diff_eq!(s.get(k).unwrap(), offset + g, epsilon = 1e-9);
        }
        let argmax = (0..BINS)
            .max_by(|&a, &b| s.get(a).unwrap().total_cmp(&s.get(b).unwrap()))
            .unwrap();
        assert_eq!(argmax, nearest_bin(theta));
    }

    #[test]
    fn full_drop_gives_empty_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sp = SparsityModel { drop_prob: 1.0, ..SparsityModel::none() };
        let s = generate_sweep(
            RelativePosition::new(1.0, 1.0),
            &ChannelParams::default(),
            &AntennaPattern::default(),
            &sp,
            &mut rng,
        )
        .unwrap();
        assert_eq!(s.present_count(), 0);
    }

    #[test]
    fn drop_rate_matches_binomial_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = SparsityModel { drop_prob: 0.3, ..SparsityModel::none() };
        let n = 1000;
        let total: usize = (0..n).map(|_| sp.draw_mask(&mut rng).iter().filter(|&&b| b).count()).sum();
        let mean = total as f64 / n as f64;
        // Binomial(200, 0.7): sd of the mean over 1000 sweeps is ~0.205.
        let se = (200.0 * 0.3 * 0.7 / n as f64).sqrt();
        assert!((mean - 140.0).abs() < 4.0 * se, "mean present {mean}");
    }

    #[test]
    fn clustered_gaps_have_requested_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sp = SparsityModel { drop_prob: 0.0, gap_rate: 1.0, gap_width_deg: 30.0 };
        // A single gap per revolution averages 30°/1.8° ≈ 16.7 bins; with a
        // Poisson count the expected number of missing bins is close to that
        // (slightly less when gaps overlap).
        let n = 4000;
        let missing: usize = (0..n).map(|_| sp.draw_mask(&mut rng).iter().filter(|&&b| !b).count()).sum();
        let mean = missing as f64 / n as f64;
        assert!((14.5..17.5).contains(&mean), "mean missing {mean}");
    }

    #[test]
    fn power_sum_examples() {
        assert_eq!(power_sum_db(&[-42.5]), -42.5);
        assert_abs_diff_eq!(power_sum_db(&[-40.0, -40.0]), -40.0 + 10.0 * 2f64.log10(), epsilon = 1e-12);
    }
}
