//! Synthetic data: null matrices and the three-cluster power design.

use crate::data::{Covariance, DataMatrix};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Noise covariance over the flattened `n * d` vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `Sigma = I`.
    Identity,
    /// `Sigma_ij = rho^|i - j|` over the flat index.
    Ar { rho: f64 },
}

impl NoiseModel {
    /// The correlated design with `rho = 1/2`.
    pub fn ar_half() -> Self {
        NoiseModel::Ar { rho: 0.5 }
    }

    pub fn covariance(&self, n: usize, d: usize) -> Covariance {
        match self {
            NoiseModel::Identity => Covariance::identity(),
            NoiseModel::Ar { rho } => ar_covariance(n * d, *rho),
        }
    }

    /// One draw of `eps ~ N(0, Sigma)` of length `len`.
    pub fn sample(&self, len: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut e: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        if let NoiseModel::Ar { rho } = *self {
            // stationary AR(1): x_t = rho x_{t-1} + sqrt(1 - rho^2) e_t
            let s = (1.0 - rho * rho).sqrt();
            for t in 1..len {
                e[t] = rho * e[t - 1] + s * e[t];
            }
        }
        e
    }
}

/// Dense `rho^|i - j|`, `len x len`.
pub fn ar_covariance(len: usize, rho: f64) -> Covariance {
    let mut powers = vec![1.0; len];
    for k in 1..len {
        powers[k] = powers[k - 1] * rho;
    }
    Covariance::Full(DMatrix::from_fn(len, len, |i, j| powers[i.abs_diff(j)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullGenSpec {
    pub n: usize,
    pub d: usize,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// `X = eps`, `eps ~ N(0, Sigma)`.
pub fn generate_null(spec: &NullGenSpec) -> Result<DataMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = spec.noise.sample(spec.n * spec.d, &mut rng);
    DataMatrix::new(spec.n, spec.d, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGenSpec {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub delta: f64,
    pub n_outlier: usize,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl PowerGenSpec {
    pub fn new(delta: f64, seed: u64) -> Self {
        PowerGenSpec {
            n: 100,
            d: 10,
            k: 3,
            delta,
            n_outlier: 10,
            noise: NoiseModel::Identity,
            seed,
        }
    }
}

/// Generated matrix with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerData {
    pub x: DataMatrix,
    /// `1..=k` for inliers, -1 for planted outliers.
    pub labels: Vec<i32>,
    pub outliers: Vec<usize>,
}

/// Features 0-2 carry the clusters (centers on a circle of radius
/// `5 delta` in dims 0-1, dim 2 zero), 3-5 are pure noise, 6-9 come from
/// two `N(0, 2.5^2)` factors (6/7 same sign, 8/9 opposite sign). Half of the
/// outliers sit at `+-8` on every feature, the rest 1.5 units outward from
/// a center along its largest coordinate. Inliers come first, then the
/// large outliers, then the small ones.
pub fn generate_power_data(spec: &PowerGenSpec) -> Result<PowerData> {
    let PowerGenSpec {
        n,
        d,
        k,
        delta,
        n_outlier,
        ..
    } = *spec;
    if d < 10 {
        return Err(Error::Config(format!("power design needs d >= 10, got {d}")));
    }
    if k == 0 || n < n_outlier + 2 * k {
        return Err(Error::Config(format!(
            "n = {n} is too small for {n_outlier} outliers and {k} clusters"
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Config(format!("delta must lie in [0, 1], got {delta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<[f64; 3]> = (0..k)
        .map(|c| {
            let t = std::f64::consts::TAU * c as f64 / k as f64;
            [5.0 * delta * t.cos(), 5.0 * delta * t.sin(), 0.0]
        })
        .collect();
    let n_in = n - n_outlier;
    let n_large = n_outlier / 2;
    let mut mean = vec![0.0; n * d];
    let mut labels = vec![0i32; n];
    let factor = |rng: &mut ChaCha8Rng, row: &mut [f64]| {
        let f1: f64 = 2.5 * rng.sample::<f64, _>(StandardNormal);
        let f2: f64 = 2.5 * rng.sample::<f64, _>(StandardNormal);
        row[6] = f1;
        row[7] = f1;
        row[8] = f2;
        row[9] = -f2;
    };
    for i in 0..n_in {
        let c = i % k;
        labels[i] = c as i32 + 1;
        let row = &mut mean[i * d..(i + 1) * d];
        row[..3].copy_from_slice(&centers[c]);
        factor(&mut rng, row);
    }
    for i in n_in..n_in + n_large {
        labels[i] = -1;
        for v in &mut mean[i * d..(i + 1) * d] {
            *v = if rng.random::<bool>() { 8.0 } else { -8.0 };
        }
    }
    for (m, i) in (n_in + n_large..n).enumerate() {
        labels[i] = -1;
        let c = centers[m % k];
        let axis = (0..3)
            .max_by(|&p, &q| c[p].abs().total_cmp(&c[q].abs()).then(q.cmp(&p)))
            .unwrap();
        let sign = if c[axis] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut mean[i * d..(i + 1) * d];
        row[..3].copy_from_slice(&c);
        row[axis] += 1.5 * sign;
        factor(&mut rng, row);
    }
    let noise = spec.noise.sample(n * d, &mut rng);
    let values = mean.iter().zip(&noise).map(|(m, e)| m + e).collect();
    Ok(PowerData {
        x: DataMatrix::new(n, d, values)?,
        labels,
        outliers: (n_in..n).collect(),
    })
}
