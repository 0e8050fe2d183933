use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{received_power, AntennaPattern, ChannelParams};
use crate::error::{Error, Result};
use crate::geometry::wrap;

/// Variance of the extra Gaussian term added on interpolation, dB².
pub const TRACE_EXTRA_NOISE_VAR: f64 = 2.0;

/// Raw RSSI samples collected on a (distance, angle) grid. The angle is the
/// antenna's offset from the transmitter direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBank {
    distances: Vec<f64>,
    /// Radians, sorted ascending in [−π, π).
    angles: Vec<f64>,
    /// `cells[i][j]` holds the samples at `distances[i]`, `angles[j]`.
    cells: Vec<Vec<Vec<f64>>>,
}

impl TraceBank {
    /// Build a bank from `(distance_m, angle_rad, rssi_dbm)` samples. Every
    /// combination of the distinct distances and angles must be populated.
    pub fn from_samples<I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64, f64)>,
    {
        let samples: Vec<(f64, f64, f64)> = samples
            .into_iter()
            .map(|(d, a, r)| (d, wrap(a), r))
            .collect();
        if samples.is_empty() {
            return Err(Error::EmptyBank);
        }
        for &(d, a, r) in &samples {
            if !(d.is_finite() && a.is_finite() && r.is_finite()) {
                return Err(Error::NonFinite("trace sample"));
            }
            if d <= 0.0 {
                return Err(Error::InvalidArgument(format!("trace distance must be positive, got {d}")));
            }
        }
        let mut distances: Vec<f64> = samples.iter().map(|s| s.0).collect();
        distances.sort_by(f64::total_cmp);
        distances.dedup();
        let mut angles: Vec<f64> = samples.iter().map(|s| s.1).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let mut cells = vec![vec![Vec::new(); angles.len()]; distances.len()];
        for (d, a, r) in samples {
            let i = distances.iter().position(|&x| x == d).expect("distance is on the grid");
            let j = angles.iter().position(|&x| (x - a).abs() < 1e-9).expect("angle is on the grid");
            cells[i][j].push(r);
        }
        if cells.iter().flatten().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("trace bank has an empty (distance, angle) cell".into()));
        }
        Ok(Self { distances, angles, cells })
    }

    /// Synthetic bank drawn from the log-distance channel.
    pub fn synthesize<R: Rng + ?Sized>(
        distances: &[f64],
        angles: &[f64],
        samples_per_cell: usize,
        params: &ChannelParams,
        pattern: &AntennaPattern,
        rng: &mut R,
    ) -> Result<Self> {
        if samples_per_cell == 0 {
            return Err(Error::EmptyBank);
        }
        let noise = Normal::new(0.0, params.shadow_sigma_db)
            .map_err(|_| Error::InvalidArgument("shadowing deviation must be non-negative".into()))?;
        let mut samples = Vec::with_capacity(distances.len() * angles.len() * samples_per_cell);
        for &d in distances {
            for &a in angles {
                for _ in 0..samples_per_cell {
                    samples.push((d, a, received_power(d, a, params, pattern, noise.sample(rng))?));
                }
            }
        }
        Self::from_samples(samples)
    }

    /// The default collection grid: D = {1, 2, 3, 5, 8, 12} m, 18° angle steps.
    pub fn default_grid() -> (Vec<f64>, Vec<f64>) {
        let d = vec![1.0, 2.0, 3.0, 5.0, 8.0, 12.0];
        let a = (0..20).map(|k| (-180.0 + 18.0 * k as f64).to_radians()).collect();
        (d, a)
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn samples(&self, distance_index: usize, angle_index: usize) -> &[f64] {
        &self.cells[distance_index][angle_index]
    }

    /// Mean power per distance, averaged over every angle.
    pub fn mean_power_by_distance(&self) -> Vec<(f64, f64)> {
        self.distances
            .iter()
            .zip(&self.cells)
            .map(|(&d, row)| {
                let all: Vec<f64> = row.iter().flatten().copied().collect();
                (d, all.iter().sum::<f64>() / all.len() as f64)
            })
            .collect()
    }

    /// Nearest grid cell. Ties go to the smaller distance and to the smaller
    /// angle; angle distance is measured on the circle.
    pub fn nearest_cell(&self, d: f64, theta: f64) -> (usize, usize) {
        let i = argmin_first(self.distances.iter().map(|&x| (x - d).abs()));
        let theta = wrap(theta);
        let j = argmin_first(self.angles.iter().map(|&a| wrap(a - theta).abs()));
        (i, j)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["distance_m", "angle_deg", "rssi_dbm"])?;
        for (i, &d) in self.distances.iter().enumerate() {
            for (j, &a) in self.angles.iter().enumerate() {
                for r in &self.cells[i][j] {
                    w.write_record([d.to_string(), a.to_degrees().to_string(), r.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut samples = Vec::new();
        for record in r.deserialize::<(f64, f64, f64)>() {
            let (d, a, p) = record?;
            samples.push((d, a.to_radians(), p));
        }
        Self::from_samples(samples)
    }
}

fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in values.enumerate() {
        // Strict comparison keeps the first (smallest) index on ties; a tiny
        // tolerance absorbs rounding in the angle grid.
        if v < best.0 - 1e-12 {
            best = (v, i);
        }
    }
    best.1
}

/// Emulated RSSI for a configuration `(d, theta)` from the nearest stored
/// cell, corrected for distance with the path-loss exponent and perturbed by
/// extra Gaussian noise of variance 2 dB².
pub fn interpolate_trace<R: Rng + ?Sized>(bank: &TraceBank, d: f64, theta: f64, eta: f64, rng: &mut R) -> Result<f64> {
    interpolate_trace_with_noise(bank, d, theta, eta, TRACE_EXTRA_NOISE_VAR, rng)
}

/// As [`interpolate_trace`] with an explicit extra-noise variance.
pub fn interpolate_trace_with_noise<R: Rng + ?Sized>(
    bank: &TraceBank,
    d: f64,
    theta: f64,
    eta: f64,
    noise_var: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {d}")));
    }
    if bank.cells.is_empty() {
        return Err(Error::EmptyBank);
    }
    let (i, j) = bank.nearest_cell(d, theta);
    let cell = &bank.cells[i][j];
    let stored = cell[rng.random_range(0..cell.len())];
    let noise = if noise_var > 0.0 {
        Normal::new(0.0, noise_var.sqrt()).expect("positive deviation").sample(rng)
    } else {
        0.0
    };
    Ok(stored - 10.0 * eta * (d / bank.distances[i]).log10() + noise)
}

/// Path-loss exponent from `(distance, mean power)` points: the mean over
/// every ordered pair with distinct distances of
/// `(p_j − p_i) / (10·log10(d_i/d_j))`, i.e. the single-reference estimate
/// with point `j` serving as the reference.
pub fn estimate_eta(points: &[(f64, f64)]) -> Result<f64> {
    for &(d, p) in points {
        if !(d.is_finite() && p.is_finite()) {
            return Err(Error::NonFinite("eta calibration point"));
        }
        if d <= 0.0 {
            return Err(Error::InvalidArgument(format!("distance must be positive, got {d}")));
        }
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, &(di, pi)) in points.iter().enumerate() {
        for (j, &(dj, pj)) in points.iter().enumerate() {
            if i == j || di == dj {
                continue;
            }
            sum += eta_from_reference(di, pi, pj, dj);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData("at least two distinct distances are required".into()));
    }
    Ok(sum / n as f64)
}

/// Path-loss exponent from one observation `(d, p)` against the reference
/// power `p_ref` measured at `d_ref`.
pub fn eta_from_reference(d: f64, p: f64, p_ref: f64, d_ref: f64) -> f64 {
    (p_ref - p) / (10.0 * (d / d_ref).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_bank() -> TraceBank {
        TraceBank::from_samples([
            (1.0, 0.0, -40.0),
            (1.0, 0.0, -41.0),
            (1.0, 1.0, -50.0),
            (3.0, 0.0, -49.0),
            (3.0, 1.0, -60.0),
        ])
        .unwrap()
    }

    #[test]
    fn exact_cell_without_noise_returns_stored_sample() {
        let bank = tiny_bank();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let r = interpolate_trace_with_noise(&bank, 1.0, 0.0, 2.0, 0.0, &mut rng).unwrap();
            assert!(r == -40.0 || r == -41.0);
        }
        let r = interpolate_trace_with_noise(&bank, 3.0, 1.0, 2.0, 0.0, &mut rng).unwrap();
        assert_eq!(r, -60.0);
    }

    #[test]
    fn doubling_distance_subtracts_path_loss() {
        let bank = tiny_bank();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // d = 6 is nearest to 3 (distance grid {1, 3}).
        let r = interpolate_trace_with_noise(&bank, 6.0, 1.0, 2.0, 0.0, &mut rng).unwrap();
        assert_abs_diff_eq!(r, -60.0 - 20.0 * 2f64.log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(-60.0 - r, 6.0206, epsilon = 1e-4);
    }

    #[test]
    fn extra_noise_has_variance_two() {
        let bank = TraceBank::from_samples([(2.0, 0.0, -45.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| interpolate_trace(&bank, 2.0, 0.0, 2.0, &mut rng).unwrap() + 45.0)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 2.0).abs() <= 0.15, "variance {var}");
    }

    #[test]
    fn nearest_cell_ties_and_circular_angle() {
        let bank = tiny_bank();
        // 2.0 is equidistant from 1 and 3: take the smaller.
        assert_eq!(bank.nearest_cell(2.0, 0.0).0, 0);
        // 0.5 rad is equidistant from 0 and 1 rad: take the smaller.
        assert_eq!(bank.nearest_cell(1.0, 0.5).1, 0);

        let bank = TraceBank::from_samples([(1.0, (-180f64).to_radians(), -1.0), (1.0, 0.0, -2.0)]).unwrap();
        // 170° is 10° from the -180° cell across the seam.
        assert_eq!(bank.nearest_cell(1.0, 170f64.to_radians()).1, 0);
    }

    #[test]
    fn empty_bank_and_bad_distance_rejected() {
        assert!(matches!(TraceBank::from_samples(Vec::new()), Err(Error::EmptyBank)));
        let bank = tiny_bank();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(interpolate_trace(&bank, 0.0, 0.0, 2.0, &mut rng).is_err());
        // Missing (3 m, 1 rad) cell.
        assert!(TraceBank::from_samples([(1.0, 0.0, -1.0), (1.0, 1.0, -1.0), (3.0, 0.0, -1.0)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (d, a) = TraceBank::default_grid();
        let bank = TraceBank::synthesize(&d, &a, 3, &ChannelParams::default(), &AntennaPattern::default(), &mut rng).unwrap();
        let mut buf = Vec::new();
        bank.write_csv(&mut buf).unwrap();
        let back = TraceBank::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.distances(), bank.distances());
        assert_eq!(back.angles().len(), 20);
        for i in 0..d.len() {
            for j in 0..20 {
                assert_eq!(back.samples(i, j), bank.samples(i, j));
            }
        }
    }

    fn log_distance(eta: f64, d: f64) -> f64 {
        -40.0 - 10.0 * eta * d.log10()
    }

    #[test]
    fn eta_exact_inversion() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 3.0, 5.0, 8.0].iter().map(|&d| (d, log_distance(2.5, d))).collect();
        assert_abs_diff_eq!(estimate_eta(&pts).unwrap(), 2.5, epsilon = 1e-9);
    }

    #[test]
    fn eta_single_pair_matches_hand_formula() {
        // (2 m, -50 dBm) and (4 m, -59 dBm): 9 dB over log10(2)·10.
        let hand = 9.0 / (10.0 * 2f64.log10());
        assert_abs_diff_eq!(estimate_eta(&[(2.0, -50.0), (4.0, -59.0)]).unwrap(), hand, epsilon = 1e-12);
        assert_abs_diff_eq!(eta_from_reference(4.0, -59.0, -50.0, 2.0), hand, epsilon = 1e-12);
    }

    #[test]
    fn eta_needs_two_distinct_distances() {
        assert!(matches!(estimate_eta(&[(2.0, -50.0)]), Err(Error::InsufficientData(_))));
        assert!(estimate_eta(&[(2.0, -50.0), (2.0, -51.0)]).is_err());
        // Equal-distance pairs are skipped, the rest still count.
        let v = estimate_eta(&[(2.0, log_distance(2.0, 2.0)), (2.0, log_distance(2.0, 2.0)), (4.0, log_distance(2.0, 4.0))])
            .unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn eta_is_scale_consistent() {
        let base: Vec<(f64, f64)> = [(1.0, -40.0), (2.5, -48.0), (4.0, -55.5), (7.0, -60.1)].to_vec();
        let c = 3.7;
        let eta = estimate_eta(&base).unwrap();
        // Scaling every distance by c shifts every power by the same
        // -10·η·log10(c), which leaves all pairwise ratios unchanged.
        let scaled: Vec<(f64, f64)> = base.iter().map(|&(d, p)| (c * d, p - 10.0 * eta * c.log10())).collect();
        assert_abs_diff_eq!(estimate_eta(&scaled).unwrap(), eta, epsilon = 1e-9);
    }

    #[test]
    fn eta_monte_carlo_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let mut est: Vec<f64> = (0..100)
            .map(|_| {
                let pts: Vec<(f64, f64)> = [1.0, 2.0, 3.0, 5.0, 8.0]
                    .iter()
                    .map(|&d| (d, log_distance(2.5, d) + noise.sample(&mut rng)))
                    .collect();
                estimate_eta(&pts).unwrap()
            })
            .collect();
        est.sort_by(f64::total_cmp);
        let median = (est[49] + est[50]) / 2.0;
        assert!((median - 2.5).abs() <= 0.3, "median {median}");
    }
}
