//! Test construction, the one-dimensional reduction along the test
//! direction, and selective / baseline p-values.

pub mod normal;
pub mod tn;

use crate::data::{Covariance, DataMatrix, ParametricLine};
use crate::engine::{run_pipeline, sweep_truncation_region, SweepConfig};
use crate::error::{Error, Result};
use crate::graph::PipelineGraph;
use crate::interval::Interval;
use crate::state::PipelineResult;
use serde::Serialize;
use std::time::Instant;
pub use tn::{bonferroni_p, naive_p, selective_p, tn_cdf, wopp_p, TruncatedNormal};

/// Difference of the means of feature `feature` between two clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestSpec {
    pub cluster_a: i32,
    pub cluster_b: i32,
    pub feature: usize,
}

/// `eta` such that `T = eta^T x`, and `sigma_T = sqrt(eta^T Sigma eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestDirection {
    pub eta: Vec<f64>,
    pub sigma_t: f64,
}

/// The two largest clusters of `result` (ties to the smaller label),
/// returned in ascending label order.
pub fn default_pair(result: &PipelineResult) -> Result<(i32, i32)> {
    let mut sizes: Vec<(usize, i32)> = result
        .cluster_ids()
        .into_iter()
        .map(|k| (result.cluster(k).len(), k))
        .collect();
    if sizes.len() < 2 {
        return Err(Error::Untestable(format!(
            "need at least two clusters, found {}",
            sizes.len()
        )));
    }
    sizes.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    let (a, b) = (sizes[0].1, sizes[1].1);
    Ok((a.min(b), a.max(b)))
}

/// Build the contrast vector of `spec` against the pipeline output.
pub fn build_eta(
    result: &PipelineResult,
    spec: &TestSpec,
    n: usize,
    d: usize,
    sigma: &Covariance,
) -> Result<TestDirection> {
    if spec.cluster_a == spec.cluster_b || spec.cluster_a <= 0 || spec.cluster_b <= 0 {
        return Err(Error::Untestable(format!(
            "clusters {} and {} are not two distinct cluster labels",
            spec.cluster_a, spec.cluster_b
        )));
    }
    if !result.features.contains(&spec.feature) {
        return Err(Error::Untestable(format!(
            "feature {} is not among the selected features",
            spec.feature
        )));
    }
    let ca = result.cluster(spec.cluster_a);
    let cb = result.cluster(spec.cluster_b);
    if ca.is_empty() || cb.is_empty() {
        return Err(Error::Untestable(format!(
            "cluster sizes are {} and {}",
            ca.len(),
            cb.len()
        )));
    }
    let mut eta = vec![0.0; n * d];
    for &i in &ca {
        eta[i * d + spec.feature] = 1.0 / ca.len() as f64;
    }
    for &i in &cb {
        eta[i * d + spec.feature] = -1.0 / cb.len() as f64;
    }
    let var = sigma.quad_form(&eta, n, d);
    let scale: f64 = eta.iter().map(|v| v * v).sum();
    if !(var.is_finite() && var > 1e-300 && var > 1e-24 * scale) {
        return Err(Error::DegenerateDirection(var.max(0.0).sqrt()));
    }
    Ok(TestDirection {
        eta,
        sigma_t: var.sqrt(),
    })
}

/// `z_obs = eta^T x`, `b = Sigma eta / sigma_T^2`, `a = x - b z_obs`.
pub fn decompose(
    x: &[f64],
    dir: &TestDirection,
    sigma: &Covariance,
    n: usize,
    d: usize,
) -> Result<(ParametricLine, f64)> {
    if !(dir.sigma_t > 0.0 && dir.sigma_t.is_finite()) {
        return Err(Error::DegenerateDirection(dir.sigma_t));
    }
    let z_obs: f64 = dir.eta.iter().zip(x).map(|(e, v)| e * v).sum();
    let s2 = dir.sigma_t * dir.sigma_t;
    let b: Vec<f64> = sigma.apply(&dir.eta, n, d).into_iter().map(|v| v / s2).collect();
    let a: Vec<f64> = x.iter().zip(&b).map(|(xv, bv)| xv - bv * z_obs).collect();
    Ok((ParametricLine::new(a, b), z_obs))
}

/// Unbiased sample variance of column `j` (two-pass).
pub fn estimate_variance(x: &DataMatrix, j: usize) -> f64 {
    let col = x.column(j);
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// One selective test and its baselines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRecord {
    pub pipeline: String,
    pub feature: usize,
    pub cluster_a: i32,
    pub cluster_b: i32,
    pub z_obs: f64,
    pub sigma_t: f64,
    pub p_selective: f64,
    pub p_naive: f64,
    pub p_bonferroni: f64,
    pub p_wopp: f64,
    pub n_intervals: usize,
    pub runtime_ms: f64,
}

/// Everything needed to assemble a [`TestRecord`], kept for diagnostics.
#[derive(Debug, Clone)]
pub struct TestDetail {
    pub record: TestRecord,
    pub line: ParametricLine,
    pub region: crate::interval::IntervalSet,
    pub local: Interval,
    pub range: Interval,
}

/// Test `spec` given the observed pipeline output `observed` of `x`.
pub fn test_with_result(
    g: &PipelineGraph,
    x: &DataMatrix,
    sigma: &Covariance,
    observed: &PipelineResult,
    spec: &TestSpec,
    cfg: &SweepConfig,
) -> Result<TestDetail> {
    let start = Instant::now();
    let (n, d) = (x.rows(), x.cols());
    let dir = build_eta(observed, spec, n, d, sigma)?;
    let (line, z_obs) = decompose(x.as_vec(), &dir, sigma, n, d)?;
    let sweep = sweep_truncation_region(g, &line, n, d, observed, z_obs, dir.sigma_t, cfg)?;
    let p_selective = selective_p(z_obs, dir.sigma_t, &sweep.region)?;
    let p_wopp = wopp_p(z_obs, dir.sigma_t, sweep.local)?;
    let log_naive = normal::log_two_sided(z_obs / dir.sigma_t);
    let record = TestRecord {
        pipeline: String::new(),
        feature: spec.feature,
        cluster_a: spec.cluster_a,
        cluster_b: spec.cluster_b,
        z_obs,
        sigma_t: dir.sigma_t,
        p_selective,
        p_naive: log_naive.exp().min(1.0),
        p_bonferroni: tn::bonferroni_p_log(log_naive, n, d),
        p_wopp,
        n_intervals: sweep.region.len(),
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(TestDetail {
        record,
        line,
        region: sweep.region,
        local: sweep.local,
        range: sweep.range,
    })
}

/// Run the pipeline on `x`, then test `spec`.
pub fn run_selective_test(
    g: &PipelineGraph,
    x: &DataMatrix,
    sigma: &Covariance,
    spec: &TestSpec,
    cfg: &SweepConfig,
) -> Result<TestRecord> {
    let observed = run_pipeline(g, x)?;
    Ok(test_with_result(g, x, sigma, &observed, spec, cfg)?.record)
}

/// One test per selected feature between `pair` (default: two largest clusters).
pub fn test_all_features(
    g: &PipelineGraph,
    x: &DataMatrix,
    sigma: &Covariance,
    pair: Option<(i32, i32)>,
    cfg: &SweepConfig,
) -> Result<Vec<TestRecord>> {
    let observed = run_pipeline(g, x)?;
    let (ca, cb) = match pair {
        Some(p) => p,
        None => default_pair(&observed)?,
    };
    observed
        .features
        .iter()
        .map(|&feature| {
            let spec = TestSpec {
                cluster_a: ca,
                cluster_b: cb,
                feature,
            };
            Ok(test_with_result(g, x, sigma, &observed, &spec, cfg)?.record)
        })
        .collect()
}
