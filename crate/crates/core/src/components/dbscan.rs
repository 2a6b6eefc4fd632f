//! DBSCAN with a deterministic expansion order.

use super::{gather, sq_dist, Parametric, SubLine};
use crate::error::Result;
use crate::state::{SelectionState, OUTLIER, UNCLUSTERED};
use std::collections::VecDeque;

/// DBSCAN labels (`-1` noise, `1..`) from an adjacency matrix where
/// `adj[r * m + s]` means `||X_r - X_s|| <= eps` (including `r == s`).
///
/// Rows are visited in ascending order; the expansion queue is FIFO and
/// neighbors are enqueued in ascending order.
pub fn dbscan_labels(adj: &[bool], m: usize, min_pts: usize) -> Vec<i32> {
    let mut labels = vec![UNCLUSTERED; m];
    let mut visited = vec![false; m];
    let mut queued = vec![false; m];
    let mut queue = VecDeque::new();
    let mut cluster = 0;
    let neighbors = |r: usize| (0..m).filter(move |&s| adj[r * m + s]);
    for r in 0..m {
        if visited[r] {
            continue;
        }
        visited[r] = true;
        if neighbors(r).count() < min_pts {
            labels[r] = OUTLIER;
            continue;
        }
        cluster += 1;
        labels[r] = cluster;
        for s in neighbors(r).filter(|&s| s != r) {
            queue.push_back(s);
            queued[s] = true;
        }
        while let Some(p) = queue.pop_front() {
            queued[p] = false;
            if !visited[p] {
                visited[p] = true;
                if neighbors(p).count() >= min_pts {
                    for s in neighbors(p) {
                        if !queued[s] && (!visited[s] || labels[s] <= UNCLUSTERED) {
                            queue.push_back(s);
                            queued[s] = true;
                        }
                    }
                }
            }
            if labels[p] == UNCLUSTERED || labels[p] == OUTLIER {
                labels[p] = cluster;
            }
        }
    }
    labels
}

pub(crate) fn apply(
    x: &[f64],
    d: usize,
    eps: f64,
    min_pts: usize,
    state: &mut SelectionState,
    mut par: Parametric<'_, '_>,
) -> Result<()> {
    let rows = state.inlier_rows();
    let feats = state.selected_features();
    let (m, f) = (rows.len(), feats.len());
    let block = gather(x, d, &rows, &feats);
    let eps2 = eps * eps;
    let mut adj = vec![false; m * m];
    for r in 0..m {
        adj[r * m + r] = true;
        for s in r + 1..m {
            let near = sq_dist(&block[r * f..(r + 1) * f], &block[s * f..(s + 1) * f]) <= eps2;
            adj[r * m + s] = near;
            adj[s * m + r] = near;
        }
    }
    let labels = dbscan_labels(&adj, m, min_pts);

    if let Some((p, ev)) = par.as_mut() {
        let line = SubLine::gather(p, &rows, &feats);
        if !line.is_constant() {
            for r in 0..m {
                for s in r + 1..m {
                    if line.fixed[r] && line.fixed[s] {
                        continue;
                    }
                    let q = line.pair(r, s);
                    if adj[r * m + s] {
                        ev.quad_leq(q[0], q[1], q[2] - eps2);
                    } else {
                        ev.quad_gt(q[0], q[1], q[2] - eps2);
                    }
                }
            }
        }
    }

    for (i, label) in state.labels.iter_mut().enumerate() {
        if state.outliers[i] {
            *label = OUTLIER;
        }
    }
    for (r, &i) in rows.iter().enumerate() {
        state.labels[i] = labels[r];
    }
    state.clustered = true;
    Ok(())
}
