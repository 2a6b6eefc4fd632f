//! Pipeline components in observed mode (plain algorithm on a matrix) and
//! parametric mode (same decision at `X(z) = a + b z`, plus the interval of
//! `z` over which that decision cannot change).
//!
//! Every component works on the submatrix of non-outlier rows and selected
//! features.

pub mod aggregate;
pub mod dbscan;
pub mod event;
pub mod fs;
pub mod kmeans;
pub mod knn;

use crate::data::{DataMatrix, ParametricLine};
use crate::error::{Error, Result};
use crate::graph::Component;
use crate::interval::Interval;
use crate::state::SelectionState;
pub use event::EventInterval;

/// A point on a parametric line: `x = a + b z`, all vectorized `n x d`.
#[derive(Debug, Clone, Copy)]
pub struct LinePoint<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub x: &'a [f64],
    pub z: f64,
    pub n: usize,
    pub d: usize,
}

/// New state plus the event interval of the component alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentOutput {
    pub state: SelectionState,
    pub event_interval: Interval,
}

/// Rows and columns of the working submatrix, gathered contiguously.
#[derive(Debug, Clone)]
pub(crate) struct Sub {
    pub rows: Vec<usize>,
    pub feats: Vec<usize>,
    /// `rows.len() x feats.len()`, row-major.
    pub x: Vec<f64>,
}

impl Sub {
    pub fn gather(src: &[f64], d: usize, rows: Vec<usize>, feats: Vec<usize>) -> Sub {
        let x = gather(src, d, &rows, &feats);
        Sub { rows, feats, x }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        let f = self.feats.len();
        &self.x[r * f..(r + 1) * f]
    }
}

pub(crate) fn gather(src: &[f64], d: usize, rows: &[usize], feats: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * feats.len());
    for &i in rows {
        let row = &src[i * d..(i + 1) * d];
        out.extend(feats.iter().map(|&j| row[j]));
    }
    out
}

#[inline]
pub(crate) fn sq_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Coefficients `(A, B, C)` of `||(a_i - a_j) + (b_i - b_j) z||^2`.
#[inline]
pub(crate) fn pair_quadratic(ai: &[f64], bi: &[f64], aj: &[f64], bj: &[f64]) -> [f64; 3] {
    let (mut q2, mut q1, mut q0) = (0.0, 0.0, 0.0);
    for t in 0..ai.len() {
        let da = ai[t] - aj[t];
        let db = bi[t] - bj[t];
        q2 += db * db;
        q1 += da * db;
        q0 += da * da;
    }
    [q2, 2.0 * q1, q0]
}

/// Line coefficients restricted to a submatrix.
#[derive(Debug, Clone)]
pub(crate) struct SubLine {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub f: usize,
    /// Rows whose `b` part is identically zero on the selected features.
    pub fixed: Vec<bool>,
}

impl SubLine {
    pub fn gather(p: &LinePoint<'_>, rows: &[usize], feats: &[usize]) -> SubLine {
        let a = gather(p.a, p.d, rows, feats);
        let b = gather(p.b, p.d, rows, feats);
        let f = feats.len();
        let fixed = (0..rows.len())
            .map(|r| b[r * f..(r + 1) * f].iter().all(|&v| v == 0.0))
            .collect();
        SubLine { a, b, f, fixed }
    }

    #[inline]
    pub fn a_row(&self, r: usize) -> &[f64] {
        &self.a[r * self.f..(r + 1) * self.f]
    }

    #[inline]
    pub fn b_row(&self, r: usize) -> &[f64] {
        &self.b[r * self.f..(r + 1) * self.f]
    }

    /// Squared-distance quadratic between rows `r` and `s`.
    #[inline]
    pub fn pair(&self, r: usize, s: usize) -> [f64; 3] {
        pair_quadratic(self.a_row(r), self.b_row(r), self.a_row(s), self.b_row(s))
    }

    /// Whether every row is fixed (no event can move).
    pub fn is_constant(&self) -> bool {
        self.fixed.iter().all(|&f| f)
    }
}

/// Apply `component` in observed mode to the vectorized data `x`.
pub fn apply_observed(
    component: &Component,
    within_clusters: bool,
    x: &[f64],
    n: usize,
    d: usize,
    state: &mut SelectionState,
) -> Result<()> {
    debug_assert_eq!(x.len(), n * d);
    match *component {
        Component::KnnOD { k, tau } => knn::apply(x, d, k, tau, false, within_clusters, state, None),
        Component::KnnMeanOD { k, tau } => knn::apply(x, d, k, tau, true, within_clusters, state, None),
        Component::VarianceFS { tau } => fs::variance_apply(x, d, tau, state, None),
        Component::CorrelationFS { tau_corr } => fs::correlation_apply(x, d, tau_corr, state, None),
        Component::KMeans {
            n_clusters,
            max_iter,
            seed,
        } => kmeans::apply(x, d, n_clusters, max_iter, seed, state, None),
        Component::Dbscan { eps, min_pts } => dbscan::apply(x, d, eps, min_pts, state, None),
        _ => Err(Error::Inconsistent(format!(
            "{} is an aggregate and needs its parent states",
            component.kind_name()
        ))),
    }
}

/// Which events a parametric update conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EventMode {
    /// The update rules proper: every intermediate decision of the
    /// algorithm (for k-NN, the neighbor ordering) must be preserved.
    #[default]
    Trace,
    /// Only the component's output must be preserved. Gives the maximal
    /// constancy interval where it is cheap to characterize (k-NN removal
    /// reduces to counting neighbors within `tau`); other components fall
    /// back to `Trace`. The union of matching intervals is the same set,
    /// reached in fewer steps.
    Decision,
}

/// Apply `component` in parametric mode at `p`; narrows `state`'s interval
/// and returns the event interval of this component alone.
pub fn apply_parametric(
    component: &Component,
    within_clusters: bool,
    p: &LinePoint<'_>,
    state: &mut SelectionState,
) -> Result<Interval> {
    apply_parametric_mode(component, within_clusters, p, state, EventMode::Trace)
}

/// [`apply_parametric`] with an explicit [`EventMode`].
pub fn apply_parametric_mode(
    component: &Component,
    within_clusters: bool,
    p: &LinePoint<'_>,
    state: &mut SelectionState,
    mode: EventMode,
) -> Result<Interval> {
    let mut ev = EventInterval::unbounded(p.z);
    let (x, d) = (p.x, p.d);
    match *component {
        Component::KnnOD { k, tau } => {
            let counting = mode == EventMode::Decision;
            knn::apply(x, d, k, tau, false, within_clusters, state, Some((p, &mut ev, counting)))?
        }
        Component::KnnMeanOD { k, tau } => {
            knn::apply(x, d, k, tau, true, within_clusters, state, Some((p, &mut ev, false)))?
        }
        Component::VarianceFS { tau } => fs::variance_apply(x, d, tau, state, Some((p, &mut ev)))?,
        Component::CorrelationFS { tau_corr } => {
            fs::correlation_apply(x, d, tau_corr, state, Some((p, &mut ev)))?
        }
        Component::KMeans {
            n_clusters,
            max_iter,
            seed,
        } => kmeans::apply(x, d, n_clusters, max_iter, seed, state, Some((p, &mut ev)))?,
        Component::Dbscan { eps, min_pts } => dbscan::apply(x, d, eps, min_pts, state, Some((p, &mut ev)))?,
        _ => {
            return Err(Error::Inconsistent(format!(
                "{} is an aggregate and needs its parent states",
                component.kind_name()
            )))
        }
    }
    let iv = ev.interval();
    state.narrow(iv);
    Ok(iv)
}

/// Event sink handed to component implementations in parametric mode.
pub(crate) type Parametric<'p, 'a> = Option<(&'p LinePoint<'a>, &'p mut EventInterval)>;

fn observed(component: Component, within: bool, x: &DataMatrix, state: &SelectionState) -> Result<SelectionState> {
    let mut s = state.clone();
    apply_observed(&component, within, x.as_vec(), x.rows(), x.cols(), &mut s)?;
    Ok(s)
}

fn parametric(
    component: Component,
    within: bool,
    line: &ParametricLine,
    z: f64,
    n: usize,
    d: usize,
    state: &SelectionState,
) -> Result<ComponentOutput> {
    assert_eq!(line.len(), n * d, "line length does not match n x d");
    let x = line.eval(z);
    let p = LinePoint {
        a: &line.a,
        b: &line.b,
        x: &x,
        z,
        n,
        d,
    };
    let mut s = state.clone();
    let event_interval = apply_parametric(&component, within, &p, &mut s)?;
    Ok(ComponentOutput {
        state: s,
        event_interval,
    })
}

/// k-NN removal: rows whose squared distance to the k-th nearest neighbor
/// exceeds `tau` join the outlier set.
pub fn knn_od_observed(
    x: &DataMatrix,
    k: usize,
    tau: f64,
    within_clusters: bool,
    state: &SelectionState,
) -> Result<SelectionState> {
    observed(Component::KnnOD { k, tau }, within_clusters, x, state)
}

#[allow(clippy::too_many_arguments)]
pub fn knn_od_parametric(
    line: &ParametricLine,
    z: f64,
    n: usize,
    d: usize,
    k: usize,
    tau: f64,
    within_clusters: bool,
    state: &SelectionState,
) -> Result<ComponentOutput> {
    parametric(Component::KnnOD { k, tau }, within_clusters, line, z, n, d, state)
}

/// k-NN-mean removal: mean squared distance to the k nearest neighbors.
pub fn knn_mean_od_observed(
    x: &DataMatrix,
    k: usize,
    tau: f64,
    within_clusters: bool,
    state: &SelectionState,
) -> Result<SelectionState> {
    observed(Component::KnnMeanOD { k, tau }, within_clusters, x, state)
}

#[allow(clippy::too_many_arguments)]
pub fn knn_mean_od_parametric(
    line: &ParametricLine,
    z: f64,
    n: usize,
    d: usize,
    k: usize,
    tau: f64,
    within_clusters: bool,
    state: &SelectionState,
) -> Result<ComponentOutput> {
    parametric(Component::KnnMeanOD { k, tau }, within_clusters, line, z, n, d, state)
}

pub fn variance_fs_observed(x: &DataMatrix, tau: f64, state: &SelectionState) -> Result<SelectionState> {
    observed(Component::VarianceFS { tau }, false, x, state)
}

pub fn variance_fs_parametric(
    line: &ParametricLine,
    z: f64,
    n: usize,
    d: usize,
    tau: f64,
    state: &SelectionState,
) -> Result<ComponentOutput> {
    parametric(Component::VarianceFS { tau }, false, line, z, n, d, state)
}

pub fn correlation_fs_observed(
    x: &DataMatrix,
    tau_corr: f64,
    state: &SelectionState,
) -> Result<SelectionState> {
    observed(Component::CorrelationFS { tau_corr }, false, x, state)
}

pub fn correlation_fs_parametric(
    line: &ParametricLine,
    z: f64,
    n: usize,
    d: usize,
    tau_corr: f64,
    state: &SelectionState,
) -> Result<ComponentOutput> {
    parametric(Component::CorrelationFS { tau_corr }, false, line, z, n, d, state)
}

pub fn kmeans_observed(
    x: &DataMatrix,
    n_clusters: usize,
    max_iter: usize,
    seed: u64,
    state: &SelectionState,
) -> Result<SelectionState> {
    observed(
        Component::KMeans {
            n_clusters,
            max_iter,
            seed,
        },
        false,
        x,
        state,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn kmeans_parametric(
    line: &ParametricLine,
    z: f64,
    n: usize,
    d: usize,
    n_clusters: usize,
    max_iter: usize,
    seed: u64,
    state: &SelectionState,
) -> Result<ComponentOutput> {
    let c = Component::KMeans {
        n_clusters,
        max_iter,
        seed,
    };
    parametric(c, false, line, z, n, d, state)
}

pub fn dbscan_observed(x: &DataMatrix, eps: f64, min_pts: usize, state: &SelectionState) -> Result<SelectionState> {
    observed(Component::Dbscan { eps, min_pts }, false, x, state)
}

#[allow(clippy::too_many_arguments)]
pub fn dbscan_parametric(
    line: &ParametricLine,
    z: f64,
    n: usize,
    d: usize,
    eps: f64,
    min_pts: usize,
    state: &SelectionState,
) -> Result<ComponentOutput> {
    parametric(Component::Dbscan { eps, min_pts }, false, line, z, n, d, state)
}
