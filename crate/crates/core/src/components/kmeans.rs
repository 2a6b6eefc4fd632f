//! Lloyd's k-means with seeded initialization.

use super::{gather, sq_dist, Parametric};
use crate::error::{Error, Result};
use crate::state::{SelectionState, OUTLIER};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Positions (into the candidate rows) of the initial centroids: `k`
/// distinct draws from `0..m` using ChaCha8 seeded with `seed`.
pub fn initial_indices(m: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, m, k).into_vec()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(row: &[f64], centroids: &[f64], f: usize) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, m) in centroids.chunks_exact(f.max(1)).enumerate() {
        let dist = if f == 0 { 0.0 } else { sq_dist(row, m) };
        if dist < best_d {
            best_d = dist;
            best = c;
        }
    }
    best
}

/// Lloyd trajectory: initial positions and every assignment vector computed.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub init: Vec<usize>,
    pub assignments: Vec<Vec<usize>>,
}

/// Runs Lloyd's algorithm on a `m x f` block.
pub fn lloyd(x: &[f64], m: usize, f: usize, k: usize, max_iter: usize, seed: u64) -> Trajectory {
    let init = initial_indices(m, k, seed);
    let mut centroids: Vec<f64> = Vec::with_capacity(k * f);
    for &s in &init {
        centroids.extend_from_slice(&x[s * f..(s + 1) * f]);
    }
    let assign = |centroids: &[f64]| -> Vec<usize> {
        (0..m).map(|r| nearest(&x[r * f..(r + 1) * f], centroids, f)).collect()
    };
    let mut assignments = vec![assign(&centroids)];
    let mut t = 0;
    while t <= max_iter {
        let current = assignments.last().unwrap();
        update_centroids(x, f, k, current, &mut centroids);
        let next = assign(&centroids);
        let done = next == *current;
        assignments.push(next);
        if done {
            break;
        }
        t += 1;
    }
    Trajectory { init, assignments }
}

/// Mean of assigned rows; an empty cluster keeps its previous centroid.
fn update_centroids(x: &[f64], f: usize, k: usize, labels: &[usize], centroids: &mut [f64]) {
    let mut sums = vec![0.0; k * f];
    let mut counts = vec![0usize; k];
    for (r, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for j in 0..f {
            sums[c * f + j] += x[r * f + j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..f {
                centroids[c * f + j] = sums[c * f + j] / counts[c] as f64;
            }
        }
    }
}

pub(crate) fn apply(
    x: &[f64],
    d: usize,
    k: usize,
    max_iter: usize,
    seed: u64,
    state: &mut SelectionState,
    mut par: Parametric<'_, '_>,
) -> Result<()> {
    let rows = state.inlier_rows();
    let feats = state.selected_features();
    let (m, f) = (rows.len(), feats.len());
    if m < k {
        return Err(Error::Config(format!(
            "k-means with K = {k} needs at least {k} rows, got {m}"
        )));
    }
    let block = gather(x, d, &rows, &feats);
    let traj = lloyd(&block, m, f, k, max_iter, seed);

    if let Some((p, ev)) = par.as_mut() {
        let a = gather(p.a, d, &rows, &feats);
        let b = gather(p.b, d, &rows, &feats);
        if b.iter().any(|&v| v != 0.0) {
            trajectory_events(&a, &b, m, f, k, &traj, ev);
        }
    }

    let last = traj.assignments.last().unwrap();
    for (i, label) in state.labels.iter_mut().enumerate() {
        if state.outliers[i] {
            *label = OUTLIER;
        }
    }
    for (r, &i) in rows.iter().enumerate() {
        state.labels[i] = last[r] as i32 + 1;
    }
    state.clustered = true;
    Ok(())
}

/// Every assignment of every iteration stays the argmin along the line,
/// with centroids linear in `z`.
fn trajectory_events(
    a: &[f64],
    b: &[f64],
    m: usize,
    f: usize,
    k: usize,
    traj: &Trajectory,
    ev: &mut super::EventInterval,
) {
    let mut ca = Vec::with_capacity(k * f);
    let mut cb = Vec::with_capacity(k * f);
    for &s in &traj.init {
        ca.extend_from_slice(&a[s * f..(s + 1) * f]);
        cb.extend_from_slice(&b[s * f..(s + 1) * f]);
    }
    let mut q = vec![[0.0f64; 3]; k];
    for (t, labels) in traj.assignments.iter().enumerate() {
        if t > 0 {
            let prev = &traj.assignments[t - 1];
            update_centroids(a, f, k, prev, &mut ca);
            update_centroids(b, f, k, prev, &mut cb);
        }
        for r in 0..m {
            let (ar, br) = (&a[r * f..(r + 1) * f], &b[r * f..(r + 1) * f]);
            for (c, qc) in q.iter_mut().enumerate() {
                *qc = super::pair_quadratic(ar, br, &ca[c * f..(c + 1) * f], &cb[c * f..(c + 1) * f]);
            }
            let own = q[labels[r]];
            for (c, qc) in q.iter().enumerate() {
                if c != labels[r] {
                    ev.quad_leq(own[0] - qc[0], own[1] - qc[1], own[2] - qc[2]);
                }
            }
        }
    }
}
