use serde::{Deserialize, Serialize};

use super::clusters::{clusters_from_mask, ClusterStats};
use super::{signed_shift, NormalizedSweep, BINS, BIN_WIDTH_RAD};
use crate::channel::AntennaPattern;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AoaMethod {
    Basic,
    Clustering,
    Weighted,
}

/// Bearing observation snapped to the 1.8° grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoaObservation {
    pub theta_m: f64,
    /// Bearing as a signed bin offset in `[-100, 99]`.
    pub offset: i64,
    pub method: AoaMethod,
}

impl AoaObservation {
    fn from_offset(offset: i64, method: AoaMethod) -> Self {
        Self {
            theta_m: offset as f64 * BIN_WIDTH_RAD,
            offset,
            method,
        }
    }
}

impl AoaMethod {
    pub fn estimate(self, sweep: &NormalizedSweep, pattern: &AntennaPattern) -> Result<AoaObservation> {
        match self {
            AoaMethod::Basic => aoa_basic(sweep, pattern),
            AoaMethod::Clustering => aoa_clustering(sweep, pattern),
            AoaMethod::Weighted => aoa_weighted(sweep, pattern),
        }
    }
}

/// Weighted sum of absolute gaps between the sweep and the pattern shifted by each
/// candidate bearing, indexed by shift (bin `j` means bearing `1.8° · j`,
/// taken modulo the circle). Missing bins contribute nothing.
pub fn correlation_costs(sweep: &NormalizedSweep, pattern: &AntennaPattern, weights: &[f64]) -> Vec<f64> {
    let g = pattern.gains_db();
    let r = sweep.gains();
    (0..BINS)
        .map(|shift| {
            r.iter()
                .zip(weights)
                .enumerate()
                .filter_map(|(k, (v, w))| v.map(|v| (k, v, *w)))
                .map(|(k, v, w)| w * (v - g[(k + BINS - shift) % BINS]).abs())
                .sum()
        })
        .collect()
}

/// Lowest-cost shift; ties go to the smallest |bearing|, then to the
/// negative side.
fn argmin_shift(costs: &[f64]) -> i64 {
    let mut best = (f64::INFINITY, 0i64);
    for (i, &c) in costs.iter().enumerate() {
        let s = signed_shift(i);
        let better = c < best.0
            || (c == best.0 && (s.abs() < best.1.abs() || (s.abs() == best.1.abs() && s < best.1)));
        if better {
            best = (c, s);
        }
    }
    best.1
}

fn require_samples(sweep: &NormalizedSweep) -> Result<()> {
    if sweep.present_count() == 0 {
        Err(Error::NoObservation)
    } else {
        Ok(())
    }
}

/// Pattern correlation with uniform weights.
pub fn aoa_basic(sweep: &NormalizedSweep, pattern: &AntennaPattern) -> Result<AoaObservation> {
    require_samples(sweep)?;
    let costs = correlation_costs(sweep, pattern, &[1.0; BINS]);
    Ok(AoaObservation::from_offset(argmin_shift(&costs), AoaMethod::Basic))
}

/// Per-sample weight `1/|cluster|`, so every angular cluster carries a total
/// weight of one.
pub(crate) fn cluster_weights(present: &[bool]) -> Vec<f64> {
    let mut w = vec![0.0; BINS];
    for c in clusters_from_mask(present) {
        for b in c.bins() {
            w[b] = 1.0 / c.size as f64;
        }
    }
    w
}

/// Pattern correlation where each angular cluster contributes equally.
pub fn aoa_clustering(sweep: &NormalizedSweep, pattern: &AntennaPattern) -> Result<AoaObservation> {
    require_samples(sweep)?;
    let costs = correlation_costs(sweep, pattern, &cluster_weights(&sweep.present_mask()));
    Ok(AoaObservation::from_offset(argmin_shift(&costs), AoaMethod::Clustering))
}

/// Blend of the basic and clustering bearings driven by the ratio of mean
/// cluster width to mean gap width. The blend is a circular mean, snapped
/// back onto the grid.
pub fn aoa_weighted(sweep: &NormalizedSweep, pattern: &AntennaPattern) -> Result<AoaObservation> {
    require_samples(sweep)?;
    let mask = sweep.present_mask();
    let stats = ClusterStats::from_clusters(&clusters_from_mask(&mask));
    let basic = aoa_basic(sweep, pattern)?;
    if stats.mean_gap_deg == 0.0 || stats.mean_cluster_deg > stats.mean_gap_deg {
        return Ok(AoaObservation { method: AoaMethod::Weighted, ..basic });
    }
    let clustering = aoa_clustering(sweep, pattern)?;
    let w = stats.mean_cluster_deg / stats.mean_gap_deg;
    Ok(AoaObservation::from_offset(
        circular_blend(basic.offset, clustering.offset, w),
        AoaMethod::Weighted,
    ))
}

/// `w·a + (1−w)·b` on the circle, in bin units. Falls back to `b` when the
/// two bearings cancel.
pub(crate) fn circular_blend(a: i64, b: i64, w: f64) -> i64 {
    let (ta, tb) = (a as f64 * BIN_WIDTH_RAD, b as f64 * BIN_WIDTH_RAD);
    let y = w * ta.sin() + (1.0 - w) * tb.sin();
    let x = w * ta.cos() + (1.0 - w) * tb.cos();
    if x.hypot(y) < 1e-12 {
        return b;
    }
    super::nearest_bin(y.atan2(x)) as i64 - (BINS / 2) as i64
}
