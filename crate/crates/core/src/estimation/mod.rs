//! Relative position estimation from a single antenna sweep.
//!
//! A sweep holds one optional RSSI sample per antenna orientation on a fixed
//! 200-bin grid (1.8° steps from −180° to 178.2°). Distance comes from the
//! mean received power through the log-distance model; the bearing comes from
//! correlating the normalized sweep against the known antenna pattern.

mod aoa;
mod clusters;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::geometry::wrap;

pub use aoa::{aoa_basic, aoa_clustering, aoa_weighted, correlation_costs, AoaMethod, AoaObservation};
pub use clusters::{find_clusters, AngularCluster, ClusterStats};

/// Number of antenna orientations per revolution.
pub const BINS: usize = 200;
/// Angular width of one bin in degrees.
pub const BIN_WIDTH_DEG: f64 = 1.8;

pub(crate) const BIN_WIDTH_RAD: f64 = BIN_WIDTH_DEG * std::f64::consts::PI / 180.0;

/// Orientation of bin `index`, in radians.
pub fn bin_angle(index: usize) -> f64 {
    (-180.0 + BIN_WIDTH_DEG * index as f64).to_radians()
}

/// Orientation of bin `index`, in degrees.
pub fn bin_angle_deg(index: usize) -> f64 {
    -180.0 + BIN_WIDTH_DEG * index as f64
}

/// Index of the grid bin nearest to `angle` (radians). Exact halfway points
/// resolve toward the smaller angle.
pub fn nearest_bin(angle: f64) -> usize {
    let a = wrap(angle).to_degrees() + 180.0;
    let steps = a / BIN_WIDTH_DEG;
    let lower = steps.floor();
    let idx = if steps - lower > 0.5 + 1e-9 { lower + 1.0 } else { lower };
    (idx as usize) % BINS
}

/// Signed bin offset in `[-100, 99]` for a shift of `index` bins, i.e. the
/// shift expressed as the angle `1.8° · offset`.
pub(crate) fn signed_shift(index: usize) -> i64 {
    let i = index as i64;
    if i >= (BINS / 2) as i64 {
        i - BINS as i64
    } else {
        i
    }
}

/// One revolution of RSSI samples; `None` marks a missing sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiSweep {
    values_dbm: Vec<Option<f64>>,
}

impl RssiSweep {
    pub fn new(values_dbm: Vec<Option<f64>>) -> Result<Self> {
        if values_dbm.len() != BINS {
            return Err(Error::InvalidArgument(format!(
                "sweep must have {BINS} bins, got {}",
                values_dbm.len()
            )));
        }
        if values_dbm.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sweep sample"));
        }
        Ok(Self { values_dbm })
    }

    pub fn from_full(values_dbm: &[f64]) -> Result<Self> {
        Self::new(values_dbm.iter().copied().map(Some).collect())
    }

    pub fn empty() -> Self {
        Self {
            values_dbm: vec![None; BINS],
        }
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values_dbm
    }

    pub fn get(&self, bin: usize) -> Option<f64> {
        self.values_dbm[bin]
    }

    pub fn is_present(&self, bin: usize) -> bool {
        self.values_dbm[bin].is_some()
    }

    pub fn present_mask(&self) -> Vec<bool> {
        self.values_dbm.iter().map(Option::is_some).collect()
    }

    pub fn present_count(&self) -> usize {
        self.values_dbm.iter().flatten().count()
    }

    /// Mean of the present samples in dBm.
    pub fn mean_present(&self) -> Result<f64> {
        let n = self.present_count();
        if n == 0 {
            return Err(Error::NoObservation);
        }
        Ok(self.values_dbm.iter().flatten().sum::<f64>() / n as f64)
    }

    /// The sweep a receiver would see if the source moved `k` bins
    /// counter-clockwise: bin `i` takes the value of bin `i - k`.
    pub fn rotated(&self, k: i64) -> Self {
        let mut out = vec![None; BINS];
        for (i, v) in self.values_dbm.iter().enumerate() {
            let j = (i as i64 + k).rem_euclid(BINS as i64) as usize;
            out[j] = *v;
        }
        Self { values_dbm: out }
    }

    /// Keep only bins where `keep` is true.
    pub fn masked(&self, keep: &[bool]) -> Self {
        let values_dbm = self
            .values_dbm
            .iter()
            .zip(keep)
            .map(|(v, &k)| if k { *v } else { None })
            .collect();
        Self { values_dbm }
    }

    /// Write as `bin_angle_deg,rssi_dbm` CSV with `NA` for missing bins.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_angle_deg", "rssi_dbm"])?;
        for (i, v) in self.values_dbm.iter().enumerate() {
            let value = v.map_or_else(|| "NA".to_string(), |x| x.to_string());
            w.write_record([format!("{:.1}", bin_angle_deg(i)), value])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut values = vec![None; BINS];
        let mut seen = [false; BINS];
        for record in r.records() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::InvalidArgument("sweep rows need 2 columns".into()));
            }
            let angle: f64 = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad angle {:?}", &record[0])))?;
            let bin = nearest_bin(angle.to_radians());
            if (bin_angle_deg(bin) - wrap(angle.to_radians()).to_degrees()).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!("angle {angle} is off the 1.8° grid")));
            }
            let field = record[1].trim();
            values[bin] = if field.eq_ignore_ascii_case("NA") {
                None
            } else {
                Some(field.parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad rssi value {field:?}"))
                })?)
            };
            seen[bin] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("sweep file is missing bins".into()));
        }
        Self::new(values)
    }
}

/// Sweep expressed relative to its own maximum: the strongest present bin is
/// 0 dB and every other present bin is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSweep {
    gains_db: Vec<Option<f64>>,
}

impl NormalizedSweep {
    pub fn gains(&self) -> &[Option<f64>] {
        &self.gains_db
    }

    pub fn present_mask(&self) -> Vec<bool> {
        self.gains_db.iter().map(Option::is_some).collect()
    }

    pub fn present_count(&self) -> usize {
        self.gains_db.iter().flatten().count()
    }
}

pub fn normalize(sweep: &RssiSweep) -> Result<NormalizedSweep> {
    let max = sweep
        .values()
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NoObservation);
    }
    Ok(NormalizedSweep {
        gains_db: sweep.values().iter().map(|v| v.map(|x| x - max)).collect(),
    })
}

/// Invert the log-distance model on the mean present power.
pub fn observe_distance(sweep: &RssiSweep, params: &ChannelParams) -> Result<f64> {
    if !(params.eta > 0.0) {
        return Err(Error::InvalidArgument("path-loss exponent must be positive".into()));
    }
    let mean = sweep.mean_present()?;
    Ok(params.d_ref * 10f64.powf((params.p_ref_dbm - mean) / (10.0 * params.eta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(eta: f64) -> ChannelParams {
        ChannelParams {
            eta,
            p_ref_dbm: -40.0,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn grid_helpers() {
        assert_eq!(bin_angle_deg(0), -180.0);
        assert_abs_diff_eq!(bin_angle_deg(199), 178.2, epsilon = 1e-9);
        assert_eq!(nearest_bin(0.0), 100);
        assert_eq!(nearest_bin(36f64.to_radians()), 120);
        assert_eq!(nearest_bin(std::f64::consts::PI), 0);
        // Halfway between 0° and 1.8° resolves to 0°.
        assert_eq!(nearest_bin(0.9f64.to_radians()), 100);
        assert_eq!(nearest_bin(179.5f64.to_radians()), 0);
        assert_eq!(signed_shift(0), 0);
        assert_eq!(signed_shift(99), 99);
        assert_eq!(signed_shift(100), -100);
        assert_eq!(signed_shift(199), -1);
    }

    #[test]
    fn normalize_examples() {
        let s = RssiSweep::from_full(&[-55.0; BINS]).unwrap();
        assert!(normalize(&s).unwrap().gains().iter().all(|g| *g == Some(0.0)));

        let mut v = vec![None; BINS];
        v[3] = Some(-50.0);
        v[7] = Some(-60.0);
        let n = normalize(&RssiSweep::new(v).unwrap()).unwrap();
        assert_eq!(n.gains()[3], Some(0.0));
        assert_eq!(n.gains()[7], Some(-10.0));
        assert_eq!(n.present_count(), 2);

        assert!(matches!(normalize(&RssiSweep::empty()), Err(Error::NoObservation)));
    }

    #[test]
    fn sweep_length_is_checked() {
        assert!(RssiSweep::new(vec![Some(1.0); 10]).is_err());
        assert!(RssiSweep::new(vec![Some(f64::NAN); BINS]).is_err());
    }

    #[test]
    fn distance_examples() {
        let p = params(2.0);
        let s = RssiSweep::from_full(&[-40.0; BINS]).unwrap();
        assert_abs_diff_eq!(observe_distance(&s, &p).unwrap(), 1.0, epsilon = 1e-12);
        let s = RssiSweep::from_full(&[-60.0; BINS]).unwrap();
        assert_abs_diff_eq!(observe_distance(&s, &p).unwrap(), 10.0, epsilon = 1e-9);
        assert!(matches!(
            observe_distance(&RssiSweep::empty(), &p),
            Err(Error::NoObservation)
        ));
        assert!(observe_distance(&s, &params(0.0)).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_missing_bins() {
        let mut v: Vec<Option<f64>> = (0..BINS).map(|i| Some(-50.0 - i as f64 * 0.1)).collect();
        v[5] = None;
        v[199] = None;
        let s = RssiSweep::new(v).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bin_angle_deg,rssi_dbm\n-180.0,"));
        assert!(text.contains("178.2,NA"));
        let back = RssiSweep::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_rejects_incomplete_file() {
        let text = "bin_angle_deg,rssi_dbm\n0.0,-50\n";
        assert!(RssiSweep::read_csv(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn normalized_max_is_zero(vals in proptest::collection::vec(proptest::option::of(-90.0..-20.0f64), BINS)) {
            let s = RssiSweep::new(vals).unwrap();
            match normalize(&s) {
                Ok(n) => {
                    let max = n.gains().iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert_eq!(max, 0.0);
                    prop_assert_eq!(n.present_mask(), s.present_mask());
                }
                Err(_) => prop_assert_eq!(s.present_count(), 0),
            }
        }

        #[test]
        fn distance_decreases_with_power(a in -90.0..-20.0f64, b in -90.0..-20.0f64) {
            prop_assume!((a - b).abs() > 1e-6);
            let p = params(2.3);
            let da = observe_distance(&RssiSweep::from_full(&[a; BINS]).unwrap(), &p).unwrap();
            let db = observe_distance(&RssiSweep::from_full(&[b; BINS]).unwrap(), &p).unwrap();
            prop_assert_eq!(a > b, da < db);
        }
    }
}
