use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::estimation::{bin_angle, bin_angle_deg, nearest_bin, BINS, BIN_WIDTH_DEG};

/// Half-power beamwidth of the default synthetic pattern, degrees.
pub const DEFAULT_HPBW_DEG: f64 = 70.0;
/// Back-lobe floor of the default synthetic pattern, dB.
pub const DEFAULT_FLOOR_DB: f64 = -15.0;

/// Directional antenna gain sampled on the sweep grid, normalized so the peak
/// is 0 dB. Bin `i` is the gain at an offset of `bin_angle(i)` from boresight.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaPattern {
    gains_db: Vec<f64>,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self::raised_cosine(DEFAULT_HPBW_DEG, DEFAULT_FLOOR_DB)
    }
}

impl AntennaPattern {
    /// Normalizes `gains_db` so its maximum is exactly 0 dB.
    pub fn new(gains_db: Vec<f64>) -> Result<Self> {
        if gains_db.len() != BINS {
            return Err(Error::InvalidArgument(format!(
                "pattern must have {BINS} bins, got {}",
                gains_db.len()
            )));
        }
        if gains_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("pattern gain"));
        }
        let max = gains_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            gains_db: gains_db.into_iter().map(|g| g - max).collect(),
        })
    }

    /// Main lobe `cos^(2m)(θ/2)` in linear power with `m` chosen so the
    /// −3 dB points sit at ±hpbw/2, clipped to `floor_db`.
    pub fn raised_cosine(hpbw_deg: f64, floor_db: f64) -> Self {
        let half = (hpbw_deg / 2.0).to_radians();
        let m = -3.0 / (20.0 * (half / 2.0).cos().log10());
        let gains_db = (0..BINS)
            .map(|i| {
                let c = (bin_angle(i) / 2.0).cos();
                if c <= 0.0 {
                    floor_db
                } else {
                    (20.0 * m * c.log10()).max(floor_db)
                }
            })
            .collect();
        Self { gains_db }
    }

    /// An omnidirectional pattern: 0 dB everywhere.
    pub fn isotropic() -> Self {
        Self {
            gains_db: vec![0.0; BINS],
        }
    }

    pub fn gains_db(&self) -> &[f64] {
        &self.gains_db
    }

    /// Gain at the grid bin nearest to `offset` (radians from boresight).
    pub fn gain_at(&self, offset: f64) -> f64 {
        self.gains_db[nearest_bin(offset)]
    }

    pub fn mean_gain_db(&self) -> f64 {
        self.gains_db.iter().sum::<f64>() / BINS as f64
    }

    /// Width of the contiguous run of bins around the peak that are within
    /// 3 dB of it, in degrees.
    pub fn hpbw_deg(&self) -> f64 {
        let peak = self
            .gains_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let within = |i: usize| self.gains_db[i] >= -3.0;
        let mut count = 1;
        let mut i = peak;
        while count < BINS && within((i + 1) % BINS) {
            i = (i + 1) % BINS;
            count += 1;
        }
        let mut i = peak;
        while count < BINS && within((i + BINS - 1) % BINS) {
            i = (i + BINS - 1) % BINS;
            count += 1;
        }
        count as f64 * BIN_WIDTH_DEG
    }

    /// Write 200 `angle_deg,gain_db` lines, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for (i, g) in self.gains_db.iter().enumerate() {
            w.write_record([format!("{:.1}", bin_angle_deg(i)), g.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut gains = vec![None; BINS];
        for record in r.records() {
            let record = record?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad number {s:?} in pattern file")))
            };
            let angle = parse(&record[0])?;
            let gain = parse(record.get(1).unwrap_or(""))?;
            let bin = nearest_bin(angle.to_radians());
            if (bin_angle_deg(bin) - crate::geometry::wrap(angle.to_radians()).to_degrees()).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!("pattern angle {angle} is off the grid")));
            }
            gains[bin] = Some(gain);
        }
        let gains: Option<Vec<f64>> = gains.into_iter().collect();
        Self::new(gains.ok_or_else(|| Error::InvalidArgument("pattern file is missing bins".into()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pattern_shape() {
        let p = AntennaPattern::default();
        assert_eq!(p.gains_db().len(), BINS);
        assert_eq!(p.gains_db()[100], 0.0);
        assert!(p.gains_db().iter().all(|&g| (DEFAULT_FLOOR_DB..=0.0).contains(&g)));
        let hpbw = p.hpbw_deg();
        assert!((hpbw - 70.0).abs() <= BIN_WIDTH_DEG, "hpbw {hpbw}");
        // Back lobe sits on the floor.
        assert_eq!(p.gains_db()[0], DEFAULT_FLOOR_DB);
        // Symmetric about boresight.
        for k in 1..100 {
            assert!((p.gains_db()[100 + k] - p.gains_db()[100 - k]).abs() < 1e-9);
        }
    }

    #[test]
    fn new_normalizes_to_zero_peak() {
        let p = AntennaPattern::new((0..BINS).map(|i| 5.0 - (i as f64) * 0.01).collect()).unwrap();
        assert_eq!(p.gains_db()[0], 0.0);
        assert!(AntennaPattern::new(vec![0.0; 3]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = AntennaPattern::default();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), BINS);
        let back = AntennaPattern::read_csv(buf.as_slice()).unwrap();
        for (a, b) in back.gains_db().iter().zip(p.gains_db()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
