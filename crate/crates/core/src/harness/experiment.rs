//! Monte Carlo Type I error and power experiments.

use super::generate::{generate_null, generate_power_data, NoiseModel, NullGenSpec, PowerGenSpec};
use super::stats::ks_uniform;
use crate::data::{Covariance, DataMatrix};
use crate::engine::{run_pipeline, SweepConfig};
use crate::error::{Error, Result};
use crate::graph::PipelineGraph;
use crate::inference::{default_pair, estimate_variance, test_with_result, TestRecord, TestSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `master`.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}

/// Noise variance used by the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// The generating covariance.
    Known,
    /// `sigma^2 I` with `sigma^2` the unbiased variance of the tested column.
    Estimated,
}

/// How many features a replicate tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureChoice {
    /// One feature drawn uniformly from the candidates.
    One,
    /// Every candidate feature.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Testable replicates per grid point.
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub jobs: usize,
    /// Give up after `max_attempts_factor * replicates` draws per point.
    pub max_attempts_factor: usize,
    pub sigma: SigmaMode,
    pub features: FeatureChoice,
    pub sweep: SweepConfig,
    /// Written into the `pipeline` field of every record.
    pub label: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            replicates: 2000,
            alpha: 0.05,
            seed: 0,
            jobs: 1,
            max_attempts_factor: 20,
            sigma: SigmaMode::Known,
            features: FeatureChoice::One,
            sweep: SweepConfig::default(),
            label: String::new(),
        }
    }
}

/// Where replicate data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Null { n: usize, d: usize, noise: NoiseModel },
    /// Tests are restricted to the features carrying the cluster signal.
    Power { delta: f64, noise: NoiseModel },
}

impl Design {
    fn shape(&self) -> (usize, usize) {
        match self {
            Design::Null { n, d, .. } => (*n, *d),
            Design::Power { .. } => {
                let s = PowerGenSpec::new(0.0, 0);
                (s.n, s.d)
            }
        }
    }

    fn noise(&self) -> &NoiseModel {
        match self {
            Design::Null { noise, .. } | Design::Power { noise, .. } => noise,
        }
    }

    fn generate(&self, seed: u64) -> Result<DataMatrix> {
        match self {
            Design::Null { n, d, noise } => generate_null(&NullGenSpec {
                n: *n,
                d: *d,
                noise: noise.clone(),
                seed,
            }),
            Design::Power { delta, noise } => Ok(generate_power_data(&PowerGenSpec {
                noise: noise.clone(),
                ..PowerGenSpec::new(*delta, seed)
            })?
            .x),
        }
    }

    fn candidates(&self, selected: &[usize]) -> Vec<usize> {
        match self {
            Design::Null { .. } => selected.to_vec(),
            Design::Power { .. } => selected.iter().copied().filter(|&j| j < 2).collect(),
        }
    }
}

/// Result of one replicate.
#[derive(Debug, Clone)]
pub enum Outcome {
    Tested(Vec<TestRecord>),
    /// Fewer than two clusters or no candidate feature.
    Untestable,
    /// The pipeline or a test failed; the message is kept for the log.
    Failed(String),
}

pub fn run_replicate(
    g: &PipelineGraph,
    design: &Design,
    known: &Covariance,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Outcome {
    let x = match design.generate(seed) {
        Ok(x) => x,
        Err(e) => return Outcome::Failed(e.to_string()),
    };
    let observed = match run_pipeline(g, &x) {
        Ok(r) => r,
        Err(e) => return Outcome::Failed(e.to_string()),
    };
    let Ok((cluster_a, cluster_b)) = default_pair(&observed) else {
        return Outcome::Untestable;
    };
    let cand = design.candidates(&observed.features);
    if cand.is_empty() {
        return Outcome::Untestable;
    }
    let features = match cfg.features {
        FeatureChoice::All => cand,
        FeatureChoice::One => {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
            vec![cand[rng.random_range(0..cand.len())]]
        }
    };
    let mut records = Vec::with_capacity(features.len());
    for feature in features {
        let sigma = match cfg.sigma {
            SigmaMode::Known => known.clone(),
            SigmaMode::Estimated => Covariance::IdentityScaled(estimate_variance(&x, feature)),
        };
        let spec = TestSpec {
            cluster_a,
            cluster_b,
            feature,
        };
        match test_with_result(g, &x, &sigma, &observed, &spec, &cfg.sweep) {
            Ok(detail) => {
                let mut r = detail.record;
                r.pipeline = cfg.label.clone();
                records.push(r);
            }
            Err(e) => return Outcome::Failed(e.to_string()),
        }
    }
    Outcome::Tested(records)
}

/// One row of an experiment table. The CSV columns are exactly these
/// fields, in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub pipeline: String,
    /// `n`, `d` or `delta`.
    pub variable: String,
    pub value: f64,
    /// Replicates with at least one test.
    pub replicates: usize,
    pub tests: usize,
    pub untestable: usize,
    pub failed: usize,
    pub proposed: f64,
    pub wopp: f64,
    pub naive: f64,
    pub bonferroni: f64,
    /// KS p-value of the selective p-values against Uniform[0, 1].
    pub ks_p: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentPoint {
    pub row: RateRow,
    pub records: Vec<TestRecord>,
}

impl ExperimentPoint {
    pub fn p_selective(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p_selective).collect()
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Draw replicates until `cfg.replicates` of them are testable. Batches
/// run in parallel but are consumed in index order, so the result does
/// not depend on `jobs`.
pub fn run_point(
    g: &PipelineGraph,
    design: &Design,
    variable: &str,
    value: f64,
    cfg: &ExperimentConfig,
) -> Result<ExperimentPoint> {
    if cfg.replicates == 0 || !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Config(format!(
            "need replicates > 0 and alpha in (0, 1), got {} and {}",
            cfg.replicates, cfg.alpha
        )));
    }
    let (n, d) = design.shape();
    let known = design.noise().covariance(n, d);
    let pool = pool(cfg.jobs)?;
    let cap = (cfg.max_attempts_factor.max(1) * cfg.replicates) as u64;
    // grid points get disjoint seed streams
    let master = splitmix64(cfg.seed ^ value.to_bits());
    let (mut tested, mut untestable, mut failed) = (Vec::new(), 0usize, 0usize);
    let mut next = 0u64;
    'draw: while tested.len() < cfg.replicates && next < cap {
        let want = (cfg.replicates - tested.len()) as u64;
        let batch = (want + want / 4).max(4 * cfg.jobs as u64).min(cap - next);
        let outcomes: Vec<Outcome> = pool.install(|| {
            (next..next + batch)
                .into_par_iter()
                .map(|i| run_replicate(g, design, &known, cfg, replicate_seed(master, i)))
                .collect()
        });
        next += batch;
        for o in outcomes {
            match o {
                Outcome::Tested(r) => tested.push(r),
                Outcome::Untestable => untestable += 1,
                Outcome::Failed(msg) => {
                    failed += 1;
                    log::warn!("{variable} = {value}: replicate failed: {msg}");
                }
            }
            if tested.len() == cfg.replicates {
                break 'draw;
            }
        }
    }
    if tested.len() < cfg.replicates {
        log::warn!(
            "{variable} = {value}: only {} testable replicates after {next} draws",
            tested.len()
        );
    }
    let records: Vec<TestRecord> = tested.iter().flatten().cloned().collect();
    let rate = |f: fn(&TestRecord) -> f64| {
        let hits = records.iter().filter(|r| f(r) <= cfg.alpha).count();
        hits as f64 / records.len().max(1) as f64
    };
    let ps: Vec<f64> = records.iter().map(|r| r.p_selective).collect();
    let row = RateRow {
        pipeline: cfg.label.clone(),
        variable: variable.to_string(),
        value,
        replicates: tested.len(),
        tests: records.len(),
        untestable,
        failed,
        proposed: rate(|r| r.p_selective),
        wopp: rate(|r| r.p_wopp),
        naive: rate(|r| r.p_naive),
        bonferroni: rate(|r| r.p_bonferroni),
        ks_p: if ps.is_empty() { f64::NAN } else { ks_uniform(&ps).p_value },
    };
    log::info!(
        "{variable} = {value}: {} tests, proposed {:.4}, wopp {:.4}, naive {:.4}, bonferroni {:.4}",
        row.tests,
        row.proposed,
        row.wopp,
        row.naive,
        row.bonferroni
    );
    Ok(ExperimentPoint { row, records })
}

/// Grid of the Type I error experiment; the other dimension is fixed at
/// `d = 10` or `n = 100`.
#[derive(Debug, Clone, PartialEq)]
pub enum Type1Grid {
    N(Vec<usize>),
    D(Vec<usize>),
}

impl Type1Grid {
    pub fn default_n() -> Self {
        Type1Grid::N(vec![100, 150, 200, 250])
    }

    pub fn default_d() -> Self {
        Type1Grid::D(vec![5, 10, 15, 20])
    }

    fn points(&self) -> Vec<(usize, usize, &'static str, usize)> {
        match self {
            Type1Grid::N(v) => v.iter().map(|&n| (n, 10, "n", n)).collect(),
            Type1Grid::D(v) => v.iter().map(|&d| (100, d, "d", d)).collect(),
        }
    }
}

pub fn type1_experiment(
    g: &PipelineGraph,
    grid: &Type1Grid,
    noise: &NoiseModel,
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentPoint>> {
    grid.points()
        .into_iter()
        .map(|(n, d, var, v)| {
            let design = Design::Null {
                n,
                d,
                noise: noise.clone(),
            };
            run_point(g, &design, var, v as f64, cfg)
        })
        .collect()
}

pub fn power_experiment(
    g: &PipelineGraph,
    deltas: &[f64],
    noise: &NoiseModel,
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentPoint>> {
    deltas
        .iter()
        .map(|&delta| {
            let design = Design::Power {
                delta,
                noise: noise.clone(),
            };
            run_point(g, &design, "delta", delta, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Component::*;

    fn small_graph() -> PipelineGraph {
        PipelineGraph::chain(vec![
            VarianceFS { tau: 0.5 },
            KMeans {
                n_clusters: 2,
                max_iter: 20,
                seed: 0,
            },
        ])
        .unwrap()
    }

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference generator seeded with 0
        let mut s = 0u64;
        let mut next = || {
            let out = splitmix64(s);
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            out
        };
        assert_eq!(next(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(next(), 0x6E78_9E6A_A1B9_65F4);
        assert_ne!(replicate_seed(1, 0), replicate_seed(0, 1));
    }

    #[test]
    fn point_is_independent_of_jobs() {
        let g = small_graph();
        let design = Design::Null {
            n: 20,
            d: 3,
            noise: NoiseModel::Identity,
        };
        let cfg = ExperimentConfig {
            replicates: 12,
            seed: 5,
            ..Default::default()
        };
        let one = run_point(&g, &design, "n", 20.0, &cfg).unwrap();
        let four = run_point(&g, &design, "n", 20.0, &ExperimentConfig { jobs: 4, ..cfg.clone() }).unwrap();
        assert_eq!(one.row, four.row);
        let strip = |p: &ExperimentPoint| {
            p.records
                .iter()
                .map(|r| (r.feature, r.z_obs, r.p_selective, r.p_wopp))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&one), strip(&four));
        assert_eq!(one.row.replicates, 12);
        assert_eq!(one.row.tests, 12);
    }

    #[test]
    fn all_features_mode_tests_every_candidate() {
        let g = small_graph();
        let design = Design::Null {
            n: 20,
            d: 3,
            noise: NoiseModel::Identity,
        };
        let cfg = ExperimentConfig {
            replicates: 5,
            features: FeatureChoice::All,
            sigma: SigmaMode::Estimated,
            ..Default::default()
        };
        let p = run_point(&g, &design, "n", 20.0, &cfg).unwrap();
        assert_eq!(p.row.replicates, 5);
        assert!(p.row.tests >= 5);
        for r in &p.records {
            assert!(r.p_selective >= 0.0 && r.p_selective <= 1.0);
        }
    }

    #[test]
    fn bad_configuration() {
        let g = small_graph();
        let design = Design::Null {
            n: 20,
            d: 3,
            noise: NoiseModel::Identity,
        };
        let cfg = ExperimentConfig {
            alpha: 1.5,
            ..Default::default()
        };
        assert!(run_point(&g, &design, "n", 20.0, &cfg).is_err());
    }

    #[test]
    fn untestable_designs_stop_at_the_cap() {
        // one cluster only: nothing is ever testable
        let g = PipelineGraph::chain(vec![KMeans {
            n_clusters: 1,
            max_iter: 5,
            seed: 0,
        }])
        .unwrap();
        let design = Design::Null {
            n: 10,
            d: 2,
            noise: NoiseModel::Identity,
        };
        let cfg = ExperimentConfig {
            replicates: 3,
            max_attempts_factor: 4,
            ..Default::default()
        };
        let p = run_point(&g, &design, "n", 10.0, &cfg).unwrap();
        assert_eq!((p.row.replicates, p.row.untestable), (0, 12));
        assert!(p.row.ks_p.is_nan());
    }
}
