use super::{NormalizedSweep, BINS, BIN_WIDTH_DEG};

/// A maximal circular run of present bins. `first_bin..=last_bin` may wrap
/// past the −180°/+178.2° seam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularCluster {
    pub first_bin: usize,
    pub last_bin: usize,
    pub size: usize,
}

impl AngularCluster {
    pub fn bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.size).map(move |k| (self.first_bin + k) % BINS)
    }
}

/// Partition the present bins into maximal circular runs, ordered by their
/// first bin.
pub fn find_clusters(sweep: &NormalizedSweep) -> Vec<AngularCluster> {
    clusters_from_mask(&sweep.present_mask())
}

pub(crate) fn clusters_from_mask(present: &[bool]) -> Vec<AngularCluster> {
    let n = present.len();
    let Some(start) = (0..n).find(|&i| !present[i]) else {
        return if n == 0 {
            Vec::new()
        } else {
            vec![AngularCluster {
                first_bin: 0,
                last_bin: n - 1,
                size: n,
            }]
        };
    };
    // Walk once around the circle starting from an absent bin so no run is
    // split by the seam.
    let mut out = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for step in 1..=n {
        let i = (start + step) % n;
        if present[i] {
            run = Some(match run {
                Some((first, size)) => (first, size + 1),
                None => (i, 1),
            });
        } else if let Some((first, size)) = run.take() {
            out.push(AngularCluster {
                first_bin: first,
                last_bin: (first + size - 1) % n,
                size,
            });
        }
    }
    out.sort_by_key(|c| c.first_bin);
    out
}

/// Mean cluster and gap widths, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterStats {
    pub mean_cluster_deg: f64,
    pub mean_gap_deg: f64,
}

impl ClusterStats {
    pub fn from_clusters(clusters: &[AngularCluster]) -> Self {
        if clusters.is_empty() {
            return Self {
                mean_cluster_deg: 0.0,
                mean_gap_deg: BINS as f64 * BIN_WIDTH_DEG,
            };
        }
        let present: usize = clusters.iter().map(|c| c.size).sum();
        let absent = BINS - present;
        // On a circle every cluster is followed by exactly one gap, unless
        // nothing is missing.
        let gaps = if absent == 0 { 0 } else { clusters.len() };
        Self {
            mean_cluster_deg: present as f64 * BIN_WIDTH_DEG / clusters.len() as f64,
            mean_gap_deg: if gaps == 0 {
                0.0
            } else {
                absent as f64 * BIN_WIDTH_DEG / gaps as f64
            },
        }
    }
}
