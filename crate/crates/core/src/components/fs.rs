//! Variance and correlation based feature selection.

use super::{gather, Parametric};
use crate::error::{Error, Result};
use crate::polyroot::Polynomial;
use crate::state::SelectionState;

fn check_rows(rows: usize, what: &str) -> Result<()> {
    if rows < 2 {
        return Err(Error::DegenerateInput(format!(
            "{what} needs at least 2 non-outlier rows, got {rows}"
        )));
    }
    Ok(())
}

/// Column-centered copy of a `m x f` row-major block.
fn centered(block: &[f64], m: usize, f: usize) -> Vec<f64> {
    let mut out = block.to_vec();
    for j in 0..f {
        let mean = (0..m).map(|r| block[r * f + j]).sum::<f64>() / m as f64;
        for r in 0..m {
            out[r * f + j] -= mean;
        }
    }
    out
}

/// Unbiased covariance of columns `j` and `k` of centered blocks `u` and `v`.
#[inline]
fn cov(u: &[f64], v: &[f64], m: usize, f: usize, j: usize, k: usize) -> f64 {
    (0..m).map(|r| u[r * f + j] * v[r * f + k]).sum::<f64>() / (m - 1) as f64
}

/// Keep features whose unbiased variance exceeds `tau`.
pub(crate) fn variance_apply(
    x: &[f64],
    d: usize,
    tau: f64,
    state: &mut SelectionState,
    mut par: Parametric<'_, '_>,
) -> Result<()> {
    let rows = state.inlier_rows();
    check_rows(rows.len(), "variance feature selection")?;
    let feats = state.selected_features();
    let (m, f) = (rows.len(), feats.len());
    let xc = centered(&gather(x, d, &rows, &feats), m, f);
    let keep: Vec<bool> = (0..f).map(|j| cov(&xc, &xc, m, f, j, j) > tau).collect();

    if let Some((p, ev)) = par.as_mut() {
        if tau.is_finite() {
            let ac = centered(&gather(p.a, d, &rows, &feats), m, f);
            let bc = centered(&gather(p.b, d, &rows, &feats), m, f);
            for j in 0..f {
                let v2 = cov(&bc, &bc, m, f, j, j);
                let v1 = 2.0 * cov(&ac, &bc, m, f, j, j);
                let v0 = cov(&ac, &ac, m, f, j, j) - tau;
                if keep[j] {
                    ev.quad_gt(v2, v1, v0);
                } else {
                    ev.quad_leq(v2, v1, v0);
                }
            }
        }
    }
    for (j, &fj) in feats.iter().enumerate() {
        if !keep[j] {
            state.features[fj] = false;
        }
    }
    Ok(())
}

/// Drop the larger-index feature of every pair with `|rho| > tau_corr`.
/// A zero-variance feature has correlation 0 with everything.
pub(crate) fn correlation_apply(
    x: &[f64],
    d: usize,
    tau_corr: f64,
    state: &mut SelectionState,
    mut par: Parametric<'_, '_>,
) -> Result<()> {
    let rows = state.inlier_rows();
    check_rows(rows.len(), "correlation feature selection")?;
    let feats = state.selected_features();
    let (m, f) = (rows.len(), feats.len());
    let xc = centered(&gather(x, d, &rows, &feats), m, f);
    let var: Vec<f64> = (0..f).map(|j| cov(&xc, &xc, m, f, j, j)).collect();
    let mut high = vec![false; f * f];
    let mut redundant = vec![false; f];
    for j in 0..f {
        for k in 0..j {
            let denom = var[j] * var[k];
            let rho = if denom > 0.0 {
                cov(&xc, &xc, m, f, j, k) / denom.sqrt()
            } else {
                0.0
            };
            if rho.abs() > tau_corr {
                high[j * f + k] = true;
                redundant[j] = true;
            }
        }
    }

    if let Some((p, ev)) = par.as_mut() {
        let ac = centered(&gather(p.a, d, &rows, &feats), m, f);
        let bc = centered(&gather(p.b, d, &rows, &feats), m, f);
        let moving: Vec<bool> = (0..f).map(|j| (0..m).any(|r| bc[r * f + j] != 0.0)).collect();
        // variance of each feature as a quadratic in z
        let vq: Vec<[f64; 3]> = (0..f)
            .map(|j| {
                [
                    cov(&ac, &ac, m, f, j, j),
                    2.0 * cov(&ac, &bc, m, f, j, j),
                    cov(&bc, &bc, m, f, j, j),
                ]
            })
            .collect();
        let t2 = tau_corr * tau_corr;
        for j in 0..f {
            for k in 0..j {
                if !moving[j] && !moving[k] {
                    continue;
                }
                let s = [
                    cov(&ac, &ac, m, f, j, k),
                    cov(&ac, &bc, m, f, j, k) + cov(&bc, &ac, m, f, j, k),
                    cov(&bc, &bc, m, f, j, k),
                ];
                // sigma_jk^2 - tau^2 sigma_j^2 sigma_k^2
                let mut c = [0.0; 5];
                for u in 0..3 {
                    for v in 0..3 {
                        c[u + v] += s[u] * s[v] - t2 * vq[j][u] * vq[k][v];
                    }
                }
                let poly = Polynomial { c };
                if high[j * f + k] {
                    ev.poly_gt(&poly);
                } else {
                    ev.poly_leq(&poly);
                }
            }
        }
    }
    for (j, &fj) in feats.iter().enumerate() {
        if redundant[j] {
            state.features[fj] = false;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use crate::components::*;
    use crate::data::{DataMatrix, ParametricLine};
    use crate::error::Error;
    use crate::interval::Interval;
    use crate::state::SelectionState;
    use rand::{Rng, SeedableRng};

    #[test]
    fn variance_examples() {
        let x = DataMatrix::new(2, 2, vec![0.0, 1.0, 2.0, 1.0]).unwrap();
        let init = SelectionState::initial(2, 2);
        // column 0 = (0, 2): variance 2; column 1 constant
        assert_eq!(variance_fs_observed(&x, 0.0, &init).unwrap().selected_features(), vec![0]);
        assert_eq!(variance_fs_observed(&x, 1.99, &init).unwrap().selected_features(), vec![0]);
        assert!(variance_fs_observed(&x, 2.0, &init).unwrap().selected_features().is_empty());
        assert_eq!(variance_fs_observed(&x, -1.0, &init).unwrap().selected_features(), vec![0, 1]);
        let mut one = init.clone();
        one.outliers[0] = true;
        assert!(matches!(variance_fs_observed(&x, 0.0, &one), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn variance_parametric_closed_form() {
        // variance(z) = z^2 / 2 > 0.4  <=>  |z| > sqrt(0.8)
        let line = ParametricLine::new(vec![0.0, 0.0], vec![0.0, 1.0]);
        let out = variance_fs_parametric(&line, 1.0, 2, 1, 0.4, &SelectionState::initial(2, 1)).unwrap();
        assert_eq!(out.state.selected_features(), vec![0]);
        assert!((out.event_interval.lo - 0.8f64.sqrt()).abs() < 1e-12);
        assert_eq!(out.event_interval.hi, f64::INFINITY);
        let flat = ParametricLine::constant(&[0.0, 3.0]);
        let out = variance_fs_parametric(&flat, 1.0, 2, 1, 0.4, &SelectionState::initial(2, 1)).unwrap();
        assert_eq!(out.event_interval, Interval::ALL);
    }

    #[test]
    fn correlation_examples() {
        // duplicated column -> larger index removed
        let x = DataMatrix::new(4, 3, vec![1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 3.0, 3.0, 0.0, 5.0, 5.0, 1.0]).unwrap();
        let s = correlation_fs_observed(&x, 0.9, &SelectionState::initial(4, 3)).unwrap();
        assert_eq!(s.selected_features(), vec![0, 2]);
        // orthogonal +- patterns
        let x = DataMatrix::new(4, 2, vec![1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]).unwrap();
        let s = correlation_fs_observed(&x, 0.5, &SelectionState::initial(4, 2)).unwrap();
        assert_eq!(s.selected_features(), vec![0, 1]);
        // zero-variance column is never redundant
        let x = DataMatrix::new(3, 2, vec![1.0, 4.0, 2.0, 4.0, 3.0, 4.0]).unwrap();
        let s = correlation_fs_observed(&x, 0.0, &SelectionState::initial(3, 2)).unwrap();
        assert_eq!(s.selected_features(), vec![0, 1]);
    }

    fn scan(f: &dyn Fn(f64) -> Vec<usize>, iv: Interval, obs: &[usize]) {
        // a generic query point never sits on an event boundary
        assert!(iv.hi - iv.lo > 1e-9, "degenerate interval {iv}");
        let step = 1e-3;
        // closed endpoints of strict events may flip; only interior points count
        let mut r = ((iv.lo.max(-10.0) + 1e-9) / step).ceil() * step;
        while r < iv.hi.min(10.0) - 1e-9 {
            assert_eq!(f(r), obs, "decision changed at {r} inside {iv}");
            r += step;
        }
    }

    #[test]
    fn random_scans() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..30 {
            let (n, d) = (6, 3);
            let a: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut b = vec![0.0; n * d];
            for i in 0..n {
                b[i * d + trial % d] = rng.random_range(-1.0..1.0);
            }
            let line = ParametricLine::new(a, b);
            let z = rng.random_range(-1.5..1.5);
            let init = SelectionState::initial(n, d);
            let tau = rng.random_range(0.2..0.9);
            let out = correlation_fs_parametric(&line, z, n, d, tau, &init).unwrap();
            let run = |r: f64| {
                correlation_fs_observed(&line.at(r, n, d).unwrap(), tau, &init)
                    .unwrap()
                    .selected_features()
            };
            assert_eq!(out.state.selected_features(), run(z));
            scan(&run, out.event_interval, &run(z));

            let out = variance_fs_parametric(&line, z, n, d, tau, &init).unwrap();
            let run = |r: f64| {
                variance_fs_observed(&line.at(r, n, d).unwrap(), tau, &init)
                    .unwrap()
                    .selected_features()
            };
            assert_eq!(out.state.selected_features(), run(z));
            scan(&run, out.event_interval, &run(z));
        }
    }
}
