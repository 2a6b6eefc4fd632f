//! Small statistics used to judge Monte Carlo output.

/// One-sample Kolmogorov-Smirnov test against Uniform[0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `D = sup |F_n - F|` and its asymptotic p-value with Stephens'
/// small-sample correction. Panics on an empty sample.
pub fn ks_uniform(sample: &[f64]) -> KsResult {
    assert!(!sample.is_empty(), "empty sample");
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = x.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `3 sqrt(alpha (1 - alpha) / r)`.
pub fn binomial_band(alpha: f64, r: usize) -> f64 {
    3.0 * (alpha * (1.0 - alpha) / r as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kolmogorov_quantiles() {
        // classical critical values of the limiting distribution
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn statistic_by_hand() {
        // F_n jumps at 0.1, 0.5, 0.6; D is the largest one-sided gap at a jump
        let r = ks_uniform(&[0.6, 0.1, 0.5]);
        let want = [1.0 / 3.0 - 0.1, 0.5 - 1.0 / 3.0, 2.0 / 3.0 - 0.5, 0.6 - 2.0 / 3.0, 1.0 - 0.6]
            .into_iter()
            .fold(0.1f64, f64::max);
        assert!((r.statistic - want).abs() < 1e-15);
    }

    #[test]
    fn uniform_passes_and_skewed_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_uniform(&u).p_value > 0.01);
        let s: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&s).p_value < 1e-6);
    }

    #[test]
    fn band_at_desk_scale() {
        assert!((binomial_band(0.05, 2000) - 0.0146).abs() < 1e-4);
    }
}
