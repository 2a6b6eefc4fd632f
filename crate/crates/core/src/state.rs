//! Selection state threaded through a pipeline.

use crate::interval::Interval;

/// Label of a sample removed as an outlier (or DBSCAN noise).
pub const OUTLIER: i32 = -1;
/// Label of a sample that has not been clustered yet.
pub const UNCLUSTERED: i32 = 0;

/// `(O, M, C)` produced by a pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PipelineResult {
    /// Sorted outlier row indices.
    pub outliers: Vec<usize>,
    /// Sorted selected feature indices.
    pub features: Vec<usize>,
    /// One label per row: `-1` outlier/noise, `0` unclustered, `1..=K` cluster.
    pub labels: Vec<i32>,
}

impl PipelineResult {
    /// Rows carrying cluster label `k`.
    pub fn cluster(&self, k: i32) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == k).collect()
    }

    /// Cluster ids present, ascending.
    pub fn cluster_ids(&self) -> Vec<i32> {
        let mut ids: Vec<i32> = self.labels.iter().copied().filter(|&c| c > 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// `(O, M, C, l, u)`: the running decision plus the interval of `z` over
/// which it is known to be constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub outliers: Vec<bool>,
    pub features: Vec<bool>,
    pub labels: Vec<i32>,
    pub lo: f64,
    pub hi: f64,
    /// Set once a clustering node has run on this path.
    pub clustered: bool,
}

impl SelectionState {
    /// `(empty, [d], 0_n, -inf, +inf)`.
    pub fn initial(n: usize, d: usize) -> Self {
        SelectionState {
            outliers: vec![false; n],
            features: vec![true; d],
            labels: vec![UNCLUSTERED; n],
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            clustered: false,
        }
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.lo, self.hi)
    }

    pub fn narrow(&mut self, iv: Interval) {
        self.lo = self.lo.max(iv.lo);
        self.hi = self.hi.min(iv.hi);
    }

    /// Row indices not flagged as outliers.
    pub fn inlier_rows(&self) -> Vec<usize> {
        (0..self.outliers.len()).filter(|&i| !self.outliers[i]).collect()
    }

    pub fn selected_features(&self) -> Vec<usize> {
        (0..self.features.len()).filter(|&j| self.features[j]).collect()
    }

    pub fn mark_outlier(&mut self, i: usize) {
        self.outliers[i] = true;
        if self.clustered {
            self.labels[i] = OUTLIER;
        }
    }

    pub fn result(&self) -> PipelineResult {
        PipelineResult {
            outliers: self.outlier_rows(),
            features: self.selected_features(),
            labels: self.labels.clone(),
        }
    }

    pub fn outlier_rows(&self) -> Vec<usize> {
        (0..self.outliers.len()).filter(|&i| self.outliers[i]).collect()
    }

    /// Whether the discrete part equals `r`.
    pub fn matches(&self, r: &PipelineResult) -> bool {
        self.labels == r.labels
            && self.outliers.iter().filter(|&&o| o).count() == r.outliers.len()
            && r.outliers.iter().all(|&i| self.outliers[i])
            && self.features.iter().filter(|&&f| f).count() == r.features.len()
            && r.features.iter().all(|&j| self.features[j])
    }
}
