//! Truncated normal distribution and the p-values built on it.

use super::normal::{log_mass, log_sum, log_two_sided};
use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalSet};

/// `N(mean, sd^2)` restricted to `region`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub region: IntervalSet,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, region: IntervalSet) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::DegenerateDirection(sd));
        }
        Ok(TruncatedNormal { mean, sd, region })
    }

    fn log_masses(&self, clip: Interval) -> Vec<f64> {
        self.region
            .intervals()
            .iter()
            .filter_map(|iv| iv.intersect(&clip))
            .map(|iv| log_mass((iv.lo - self.mean) / self.sd, (iv.hi - self.mean) / self.sd))
            .collect()
    }

    fn log_total(&self) -> Result<f64> {
        let total = log_sum(&mut self.log_masses(Interval::ALL));
        if !total.is_finite() {
            return Err(Error::Precision(format!(
                "truncation region {} has no representable mass under N({}, {}^2); \
                 widen the region or report the p-value as 0 or 1 by the side of z_obs",
                self.region, self.mean, self.sd
            )));
        }
        Ok(total)
    }

    /// `P(T <= t)`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        let total = self.log_total()?;
        let below = log_sum(&mut self.log_masses(Interval::new(f64::NEG_INFINITY, t)));
        Ok((below - total).exp().clamp(0.0, 1.0))
    }

    /// `P(T >= t)`, computed directly rather than as `1 - cdf`.
    pub fn sf(&self, t: f64) -> Result<f64> {
        let total = self.log_total()?;
        let above = log_sum(&mut self.log_masses(Interval::new(t, f64::INFINITY)));
        Ok((above - total).exp().clamp(0.0, 1.0))
    }
}

/// `P(T <= t)` for `T ~ TN(mean, sd^2, region)`.
pub fn tn_cdf(t: f64, tn: &TruncatedNormal) -> Result<f64> {
    tn.cdf(t)
}

/// Two-sided selective p-value `2 min(pi, 1 - pi)` with `pi = P(T >= z_obs)`
/// under `TN(0, sigma_t^2, region)`; the null fixes the mean at zero.
pub fn selective_p(z_obs: f64, sigma_t: f64, region: &IntervalSet) -> Result<f64> {
    let tol = 1e-8 * z_obs.abs().max(sigma_t);
    if region.component_near(z_obs, tol).is_none() {
        return Err(Error::Inconsistent(format!(
            "z_obs = {z_obs} is not in the truncation region {region}"
        )));
    }
    let tn = TruncatedNormal::new(0.0, sigma_t, region.clone())?;
    let upper = tn.sf(z_obs)?;
    let lower = tn.cdf(z_obs)?;
    Ok((2.0 * upper.min(lower)).min(1.0))
}

/// Unconditional two-sided z-test.
pub fn naive_p(z_obs: f64, sigma_t: f64) -> f64 {
    log_two_sided(z_obs / sigma_t).exp().min(1.0)
}

/// `ln` of the Bonferroni factor `3^n 2^d`.
pub fn bonferroni_log_factor(n: usize, d: usize) -> f64 {
    n as f64 * 3f64.ln() + d as f64 * 2f64.ln()
}

/// `min(1, 3^n 2^d naive)` evaluated in log space.
pub fn bonferroni_p(naive: f64, n: usize, d: usize) -> f64 {
    bonferroni_p_log(naive.ln(), n, d)
}

/// Same as [`bonferroni_p`] from `ln(naive)`, which survives underflow.
pub fn bonferroni_p_log(log_naive: f64, n: usize, d: usize) -> f64 {
    (log_naive + bonferroni_log_factor(n, d)).exp().min(1.0)
}

/// Selective p-value conditioned on the single interval around `z_obs`.
pub fn wopp_p(z_obs: f64, sigma_t: f64, single: Interval) -> Result<f64> {
    selective_p(z_obs, sigma_t, &IntervalSet::from(single))
}
