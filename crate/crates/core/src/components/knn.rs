//! k-NN distance based outlier removal.

use super::{sq_dist, EventInterval, LinePoint, Parametric, Sub, SubLine};
use crate::polyroot::{quadratic_leq, QuadSet};
use crate::error::{Error, Result};
use crate::state::SelectionState;

/// Search scopes: all inlier rows, or the inlier rows of each cluster.
fn scopes(state: &SelectionState, within_clusters: bool) -> Vec<Vec<usize>> {
    let rows = state.inlier_rows();
    if !within_clusters {
        return vec![rows];
    }
    let mut ids: Vec<i32> = rows.iter().map(|&i| state.labels[i]).filter(|&c| c > 0).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|c| rows.iter().copied().filter(|&i| state.labels[i] == c).collect())
        .collect()
}

/// Flags rows whose k-th nearest squared distance (or the mean of the k
/// nearest, with `mean`) exceeds `tau`.
///
/// In parametric mode the flag next to the event sink selects counting
/// events (decision only) instead of neighbor-ordering events; it is
/// ignored for the mean score.
#[allow(clippy::too_many_arguments)]
pub(crate) fn apply(
    x: &[f64],
    d: usize,
    k: usize,
    tau: f64,
    mean: bool,
    within_clusters: bool,
    state: &mut SelectionState,
    par: Option<(&LinePoint<'_>, &mut EventInterval, bool)>,
) -> Result<()> {
    let (mut par, counting): (Parametric<'_, '_>, bool) = match par {
        Some((p, ev, c)) => (Some((p, ev)), c && !mean),
        None => (None, false),
    };
    let feats = state.selected_features();
    let mut flagged = Vec::new();
    for rows in scopes(state, within_clusters) {
        if rows.len() < k + 1 {
            return Err(Error::Config(format!(
                "k-NN search scope has {} rows but k = {k} needs at least {}",
                rows.len(),
                k + 1
            )));
        }
        let sub = Sub::gather(x, d, rows, feats.clone());
        let m = sub.len();
        let line = par.as_ref().map(|(p, _)| SubLine::gather(p, &sub.rows, &sub.feats));
        let line = line.filter(|l| !l.is_constant());
        // pairwise squared-distance quadratics, symmetric
        let pairs: Vec<[f64; 3]> = match &line {
            Some(l) => {
                let mut v = vec![[0.0; 3]; m * m];
                for r in 0..m {
                    for s in r + 1..m {
                        let q = l.pair(r, s);
                        v[r * m + s] = q;
                        v[s * m + r] = q;
                    }
                }
                v
            }
            None => Vec::new(),
        };

        let mut order: Vec<(f64, usize)> = Vec::with_capacity(m);
        let mut in_knn = vec![false; m];
        let mut within: Vec<(f64, f64)> = Vec::with_capacity(m);
        for r in 0..m {
            order.clear();
            let xr = sub.row(r);
            order.extend((0..m).filter(|&s| s != r).map(|s| (sq_dist(xr, sub.row(s)), s)));
            order.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            let neigh = &order[..k];
            let kth = neigh[k - 1].1;
            let score = if mean {
                neigh.iter().map(|p| p.0).sum::<f64>() / k as f64
            } else {
                neigh[k - 1].0
            };
            let outlier = score > tau;
            if outlier {
                flagged.push(sub.rows[r]);
            }

            let (Some((_, ev)), Some(_)) = (par.as_mut(), line.as_ref()) else {
                continue;
            };
            let q = |s: usize| pairs[r * m + s];
            if counting {
                // outlier iff fewer than k rows lie within tau
                if tau.is_finite() {
                    within.clear();
                    for s in (0..m).filter(|&s| s != r) {
                        let qs = q(s);
                        match quadratic_leq(qs[0], qs[1], qs[2] - tau) {
                            QuadSet::Empty => {}
                            QuadSet::All => within.push((f64::NEG_INFINITY, f64::INFINITY)),
                            QuadSet::Below(u) => within.push((f64::NEG_INFINITY, u)),
                            QuadSet::Above(l) => within.push((l, f64::INFINITY)),
                            QuadSet::Between(l, u) => within.push((l, u)),
                            QuadSet::Outside(l, u) => {
                                within.push((f64::NEG_INFINITY, l));
                                within.push((u, f64::INFINITY));
                            }
                        }
                    }
                    ev.count_at_least(&within, k, !outlier);
                }
                continue;
            }
            let qk = q(kth);
            for p in neigh {
                in_knn[p.1] = true;
            }
            for s in (0..m).filter(|&s| s != r && s != kth) {
                let qs = q(s);
                if in_knn[s] {
                    // inside the k-NN set: no farther than the k-th neighbor
                    ev.quad_leq(qs[0] - qk[0], qs[1] - qk[1], qs[2] - qk[2]);
                } else {
                    ev.quad_leq(qk[0] - qs[0], qk[1] - qs[1], qk[2] - qs[2]);
                }
            }
            for p in neigh {
                in_knn[p.1] = false;
            }
            if tau.is_finite() {
                let mut t = if mean {
                    let mut acc = [0.0; 3];
                    for p in neigh {
                        let qs = q(p.1);
                        for c in 0..3 {
                            acc[c] += qs[c];
                        }
                    }
                    acc.map(|v| v / k as f64)
                } else {
                    qk
                };
                t[2] -= tau;
                if outlier {
                    ev.quad_gt(t[0], t[1], t[2]);
                } else {
                    ev.quad_leq(t[0], t[1], t[2]);
                }
            }
        }
    }
    for i in flagged {
        state.mark_outlier(i);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::{knn_mean_od_observed, knn_mean_od_parametric, knn_od_observed, knn_od_parametric};
    use crate::data::{DataMatrix, ParametricLine};
    use crate::interval::Interval;

    fn col(v: &[f64]) -> DataMatrix {
        DataMatrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn collinear_example() {
        let x = col(&[0.0, 1.0, 10.0]);
        let s = knn_od_observed(&x, 1, 4.0, false, &SelectionState::initial(3, 1)).unwrap();
        assert_eq!(s.outlier_rows(), vec![2]);
        let s = knn_od_observed(&x, 1, f64::INFINITY, false, &SelectionState::initial(3, 1)).unwrap();
        assert!(s.outlier_rows().is_empty());
        let same = col(&[2.0; 4]);
        let s = knn_od_observed(&same, 2, 0.5, false, &SelectionState::initial(4, 1)).unwrap();
        assert!(s.outlier_rows().is_empty());
    }

    #[test]
    fn scope_too_small() {
        let x = col(&[0.0, 1.0, 10.0]);
        let err = knn_od_observed(&x, 3, 1.0, false, &SelectionState::initial(3, 1)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn mean_with_k1_equals_plain() {
        let x = DataMatrix::new(6, 2, vec![0.0, 0.0, 1.0, 0.5, 0.2, 3.0, 5.0, 5.0, 4.0, 4.5, 9.0, -2.0]).unwrap();
        for tau in [0.5, 2.0, 10.0, 40.0] {
            let a = knn_od_observed(&x, 1, tau, false, &SelectionState::initial(6, 2)).unwrap();
            let b = knn_mean_od_observed(&x, 1, tau, false, &SelectionState::initial(6, 2)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_line_gives_whole_line() {
        let line = ParametricLine::constant(&[0.0, 1.0, 10.0]);
        let out = knn_od_parametric(&line, 0.3, 3, 1, 1, 4.0, false, &SelectionState::initial(3, 1)).unwrap();
        assert_eq!(out.event_interval, Interval::ALL);
        assert_eq!(out.state.outlier_rows(), vec![2]);
    }

    /// Decisions of the observed algorithm along a grid; the parametric
    /// interval must cover exactly the constant run around `z`.
    fn scan_check(line: &ParametricLine, n: usize, d: usize, k: usize, tau: f64, mean: bool, z: f64) {
        let init = SelectionState::initial(n, d);
        let run = |r: f64| {
            let x = line.at(r, n, d).unwrap();
            if mean {
                knn_mean_od_observed(&x, k, tau, false, &init).unwrap().outlier_rows()
            } else {
                knn_od_observed(&x, k, tau, false, &init).unwrap().outlier_rows()
            }
        };
        let out = if mean {
            knn_mean_od_parametric(line, z, n, d, k, tau, false, &init).unwrap()
        } else {
            knn_od_parametric(line, z, n, d, k, tau, false, &init).unwrap()
        };
        let iv = out.event_interval;
        assert!(iv.contains(z));
        let obs = run(z);
        assert_eq!(out.state.outlier_rows(), obs);
        // a generic query point never sits on an event boundary
        assert!(iv.hi - iv.lo > 1e-9, "degenerate interval {iv}");
        let step = 1e-3;
        // closed endpoints of strict events may flip; only interior points count
        let mut r = ((iv.lo.max(-20.0) + 1e-9) / step).ceil() * step;
        while r < iv.hi.min(20.0) - 1e-9 {
            assert_eq!(run(r), obs, "decision changed at {r} inside {iv}");
            r += step;
        }
    }

    #[test]
    fn one_dimensional_scan() {
        let line = ParametricLine::new(vec![0.0, 1.0, 10.0], vec![0.0, 0.0, 1.0]);
        let out = knn_od_parametric(&line, 0.0, 3, 1, 1, 4.0, false, &SelectionState::initial(3, 1)).unwrap();
        // point 3 is flagged while (9 + z)^2 > 4, i.e. z > -7 on this branch;
        // the neighbor order (point 2 nearest to point 3) holds while z > -9.5
        assert_eq!(out.state.outlier_rows(), vec![2]);
        assert!((out.event_interval.lo - (-7.0)).abs() < 1e-12, "{}", out.event_interval);
        scan_check(&line, 3, 1, 1, 4.0, false, 0.0);
    }

    #[test]
    fn random_scans() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let (n, d) = (8, 2);
            let a: Vec<f64> = (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let line = ParametricLine::new(a, b);
            let z = rng.random_range(-2.0..2.0);
            scan_check(&line, n, d, 2, 3.0, trial % 2 == 0, z);
        }
    }

    #[test]
    fn sparse_direction_scans() {
        // only a few rows move, as with a real contrast vector; orderings then
        // compare moving pairs against fixed ones
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..30 {
            let (n, d) = (10, 2);
            let a: Vec<f64> = (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut b = vec![0.0; n * d];
            for i in 0..3 {
                b[i * d + trial % d] = rng.random_range(-1.0..1.0);
            }
            let line = ParametricLine::new(a, b);
            let z = rng.random_range(-2.0..2.0);
            scan_check(&line, n, d, 3, 2.5, trial % 2 == 1, z);
        }
    }

    #[test]
    fn counting_events_give_maximal_intervals() {
        use crate::components::{apply_parametric_mode, EventMode, LinePoint};
        use crate::graph::Component;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for trial in 0..40 {
            let (n, d, k, tau) = (12, 2, 3, 2.0);
            let a: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut b = vec![0.0; n * d];
            for i in 0..4 {
                b[i * d + trial % d] = rng.random_range(-1.0..1.0);
            }
            let line = ParametricLine::new(a, b);
            let z = rng.random_range(-2.0..2.0);
            let init = SelectionState::initial(n, d);
            let run = |r: f64| knn_od_observed(&line.at(r, n, d).unwrap(), k, tau, false, &init).unwrap().outlier_rows();
            let x = line.eval(z);
            let p = LinePoint { a: &line.a, b: &line.b, x: &x, z, n, d };
            let mut s = init.clone();
            let iv = apply_parametric_mode(&Component::KnnOD { k, tau }, false, &p, &mut s, EventMode::Decision).unwrap();
            let obs = run(z);
            assert_eq!(s.outlier_rows(), obs);
            assert!(iv.hi - iv.lo > 1e-9, "degenerate interval {iv}");
            let mut r = ((iv.lo.max(-20.0) + 1e-9) / 1e-3).ceil() * 1e-3;
            while r < iv.hi.min(20.0) - 1e-9 {
                assert_eq!(run(r), obs, "decision changed at {r} inside {iv}");
                r += 1e-3;
            }
            for end in [iv.lo - 1e-7, iv.hi + 1e-7] {
                if end.is_finite() {
                    assert_ne!(run(end), obs, "decision unchanged just past {iv}");
                }
            }
            // the ordering events can only give a sub-interval
            let mut s2 = init.clone();
            let fine = apply_parametric_mode(&Component::KnnOD { k, tau }, false, &p, &mut s2, EventMode::Trace).unwrap();
            assert!(fine.lo >= iv.lo && fine.hi <= iv.hi, "{fine} not inside {iv}");
        }
    }
}
