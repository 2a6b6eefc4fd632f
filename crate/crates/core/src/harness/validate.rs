//! Property suites behind `sipipe validate`: interval stability, masked
//! runs and the numerical kernels against brute-force oracles.

use crate::data::{Covariance, DataMatrix, ParametricLine};
use crate::engine::{run_pipeline, update_interval, SweepConfig};
use crate::graph::{Component, PipelineGraph};
use crate::inference::normal::log_phi;
use crate::inference::{build_eta, decompose, default_pair, test_with_result, tn_cdf, TestSpec, TruncatedNormal};
use crate::interval::{Interval, IntervalSet};
use crate::polyroot::{solve_quartic_leq, Polynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: &'static str,
    pub checked: usize,
    pub violations: usize,
    /// First violation, if any.
    pub example: Option<String>,
}

impl Report {
    fn new(name: &'static str) -> Self {
        Report {
            name,
            checked: 0,
            violations: 0,
            example: None,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.example.is_none() {
                self.example = Some(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checked > 0
    }
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {} checks, {} violations", self.name, self.checked, self.violations)?;
        if let Some(e) = &self.example {
            write!(f, " (first: {e})")?;
        }
        Ok(())
    }
}

/// Small versions of the two shipped pipelines plus a union of two
/// outlier detectors, sized for `n = 30`, `d = 4` unit-noise data.
pub fn sample_graphs() -> Vec<PipelineGraph> {
    use Component::*;
    let two_fs = PipelineGraph::new(
        vec![
            node("od", KnnOD { k: 3, tau: 6.0 }),
            node("var", VarianceFS { tau: 0.8 }),
            node("corr", CorrelationFS { tau_corr: 0.6 }),
            node("fs", IntersectM),
            node("km", KMeans { n_clusters: 3, max_iter: 50, seed: 0 }),
        ],
        &edges(&[("od", "var"), ("od", "corr"), ("var", "fs"), ("corr", "fs"), ("fs", "km")]),
    )
    .unwrap();
    let dbscan = PipelineGraph::chain(vec![
        KnnOD { k: 3, tau: 6.0 },
        VarianceFS { tau: 0.8 },
        Dbscan { eps: 1.1, min_pts: 3 },
        KnnMeanOD { k: 2, tau: 1.5 },
    ])
    .unwrap();
    let union = PipelineGraph::new(
        vec![
            node("fs", VarianceFS { tau: 0.7 }),
            node("a", KnnOD { k: 2, tau: 3.0 }),
            node("b", KnnMeanOD { k: 4, tau: 4.0 }),
            node("o", UnionO),
            node("km", KMeans { n_clusters: 2, max_iter: 50, seed: 1 }),
        ],
        &edges(&[("fs", "a"), ("fs", "b"), ("a", "o"), ("b", "o"), ("o", "km")]),
    )
    .unwrap();
    vec![two_fs, dbscan, union]
}

fn node(id: &str, component: Component) -> crate::graph::Node {
    crate::graph::Node {
        id: id.into(),
        component,
    }
}

fn edges(e: &[(&str, &str)]) -> Vec<(String, String)> {
    e.iter().map(|(p, c)| (p.to_string(), c.to_string())).collect()
}

fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DataMatrix {
    let v = (0..n * d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    DataMatrix::new(n, d, v).unwrap()
}

/// A test line through null data: `a + b z` with `b` from a random
/// cluster contrast, or a random sparse direction when untestable.
fn random_line(rng: &mut ChaCha8Rng, g: &PipelineGraph, n: usize, d: usize) -> ParametricLine {
    let x = random_data(rng, n, d);
    let sigma = Covariance::identity();
    if let Ok(obs) = run_pipeline(g, &x) {
        if let (Ok((a, b)), false) = (default_pair(&obs), obs.features.is_empty()) {
            let feature = obs.features[rng.random_range(0..obs.features.len())];
            let spec = TestSpec {
                cluster_a: a,
                cluster_b: b,
                feature,
            };
            if let Ok(dir) = build_eta(&obs, &spec, n, d, &sigma) {
                return decompose(x.as_vec(), &dir, &sigma, n, d).unwrap().0;
            }
        }
    }
    let j = rng.random_range(0..d);
    let b = (0..n * d)
        .map(|l| if l % d == j { rng.random_range(-0.3..0.3) } else { 0.0 })
        .collect();
    ParametricLine::new(x.into_vec(), b)
}

/// Any point drawn from `[L_z, U_z]` reproduces the same interval and output.
pub fn interval_stability(cases: usize, draws: usize, seed: u64) -> Report {
    let mut rep = Report::new("interval stability");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs = sample_graphs();
    let (n, d) = (30, 4);
    let mut done = 0;
    let mut attempts = 0;
    while done < cases && attempts < 100 * cases {
        attempts += 1;
        let g = &graphs[rng.random_range(0..graphs.len())];
        let line = random_line(&mut rng, g, n, d);
        let z = rng.random_range(-2.0..2.0);
        let Ok((iv, res)) = update_interval(g, &line, n, d, z) else { continue };
        done += 1;
        let (lo, hi) = (iv.lo.max(z - 50.0), iv.hi.min(z + 50.0));
        for _ in 0..draws {
            let r = lo + rng.random::<f64>() * (hi - lo);
            let again = update_interval(g, &line, n, d, r);
            rep.record(matches!(&again, Ok((iv2, res2)) if *iv2 == iv && *res2 == res), || {
                format!("z = {z}, r = {r}: {iv} became {:?}", again.map(|a| a.0))
            });
        }
    }
    rep
}

/// Plain runs at `X(z)` reproduce the observed output exactly on the
/// truncation region and nowhere else in the swept range.
pub fn masked_runs(tests: usize, per_side: usize, seed: u64) -> Report {
    let mut rep = Report::new("masked-run oracle");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs = sample_graphs();
    let (n, d) = (30, 4);
    let sigma = Covariance::identity();
    let cfg = SweepConfig::default();
    let mut done = 0;
    let mut attempts = 0;
    while done < tests && attempts < 100 * tests {
        attempts += 1;
        let g = &graphs[rng.random_range(0..graphs.len())];
        let x = random_data(&mut rng, n, d);
        let Ok(obs) = run_pipeline(g, &x) else { continue };
        let Ok((a, b)) = default_pair(&obs) else { continue };
        if obs.features.is_empty() {
            continue;
        }
        let spec = TestSpec {
            cluster_a: a,
            cluster_b: b,
            feature: obs.features[rng.random_range(0..obs.features.len())],
        };
        let Ok(t) = test_with_result(g, &x, &sigma, &obs, &spec, &cfg) else { continue };
        let outside = t.region.closure_complement().clip(t.range.lo, t.range.hi);
        if outside.measure() < 1e-6 {
            continue;
        }
        done += 1;
        let ends: Vec<f64> = t.region.intervals().iter().flat_map(|iv| [iv.lo, iv.hi]).collect();
        for (set, inside) in [(&t.region, true), (&outside, false)] {
            for _ in 0..per_side {
                let z = sample_in(&mut rng, set);
                if ends.iter().any(|e| (z - e).abs() < 1e-8) {
                    continue;
                }
                let hit = matches!(run_pipeline(g, &t.line.at(z, n, d).unwrap()), Ok(r) if r == obs);
                rep.record(hit == inside, || format!("z = {z}: in region {inside}, output match {hit}"));
            }
        }
    }
    rep
}

/// Uniform draw from a bounded interval set.
fn sample_in(rng: &mut ChaCha8Rng, set: &IntervalSet) -> f64 {
    let mut u = rng.random::<f64>() * set.measure();
    for iv in set.intervals() {
        if u <= iv.width() {
            return iv.lo + u;
        }
        u -= iv.width();
    }
    set.intervals().last().map_or(0.0, |iv| iv.hi)
}

/// Adaptive Simpson of `phi(x) / phi(c)` on `[a, b]`, both finite. Scaling
/// by the density at `c` keeps the tolerance relative in the tails.
pub fn simpson_mass(a: f64, b: f64, c: f64, tol: f64) -> f64 {
    let f = |x: f64| (log_phi(x) - log_phi(c)).exp();
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(&f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// `tn_cdf` against Simpson quadrature on random regions within `[-8, 8]`.
pub fn tn_against_quadrature(cases: usize, seed: u64) -> Report {
    let mut rep = Report::new("truncated normal cdf");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let k = rng.random_range(1..4);
        let mut cuts: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-8.0..8.0)).collect();
        cuts.sort_by(f64::total_cmp);
        let region = IntervalSet::from_intervals(cuts.chunks(2).map(|c| Interval::new(c[0], c[1])));
        // the point of the region nearest the mode carries the largest density
        let c = region
            .intervals()
            .iter()
            .map(|iv| 0.0f64.clamp(iv.lo, iv.hi))
            .min_by(|u, v| u.abs().total_cmp(&v.abs()))
            .unwrap();
        let mass = |lo: f64, hi: f64| simpson_mass(lo, hi, c, 1e-14);
        let total: f64 = region.intervals().iter().map(|iv| mass(iv.lo, iv.hi)).sum();
        let t = rng.random_range(cuts[0]..cuts[2 * k - 1]);
        let below: f64 = region
            .intervals()
            .iter()
            .filter_map(|iv| iv.clip(f64::NEG_INFINITY, t))
            .map(|iv| mass(iv.lo, iv.hi))
            .sum();
        let want = below / total;
        let tn = TruncatedNormal::new(0.0, 1.0, region.clone()).unwrap();
        let got = tn_cdf(t, &tn);
        rep.record(matches!(got, Ok(v) if (v - want).abs() <= 1e-8), || {
            format!("t = {t} on {region}: {got:?} vs {want}")
        });
    }
    rep
}

/// Sign changes of `p` on a grid of `points` over `[lo, hi]`, each
/// refined by bisection.
pub fn sign_sweep_roots(p: &Polynomial, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    let mut roots = Vec::new();
    let mut prev = (lo, p.eval(lo));
    for i in 1..points {
        let z = lo + step * i as f64;
        let v = p.eval(z);
        if v == 0.0 {
            roots.push(z);
        } else if prev.1 != 0.0 && (v < 0.0) != (prev.1 < 0.0) {
            let (mut a, mut b) = (prev.0, z);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if (p.eval(m) < 0.0) == (prev.1 < 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = (z, v);
    }
    roots
}

/// Random quartic with well separated real roots in `[-5, 5]`.
fn random_quartic(rng: &mut ChaCha8Rng) -> Polynomial {
    loop {
        let n_real = 2 * rng.random_range(0..3);
        let mut real: Vec<f64> = (0..n_real).map(|_| rng.random_range(-5.0..5.0)).collect();
        real.sort_by(f64::total_cmp);
        if real.windows(2).any(|w| w[1] - w[0] < 1e-2) {
            continue;
        }
        // quadratic factors: (z - r1)(z - r2) or z^2 - 2 s z + s^2 + t^2
        let mut factors: Vec<[f64; 3]> = real.chunks(2).map(|c| [c[0] * c[1], -(c[0] + c[1]), 1.0]).collect();
        while factors.len() < 2 {
            let s: f64 = rng.random_range(-5.0..5.0);
            let t: f64 = rng.random_range(0.1..3.0);
            factors.push([s * s + t * t, -2.0 * s, 1.0]);
        }
        let (f, g) = (factors[0], factors[1]);
        let mut c = [0.0; 5];
        for i in 0..3 {
            for j in 0..3 {
                c[i + j] += f[i] * g[j];
            }
        }
        let lead: f64 = rng.random_range(0.2..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        return Polynomial { c: c.map(|v| v * lead) };
    }
}

/// Finite endpoints of `{p <= 0}` against a sign sweep of `points` grid points.
pub fn quartic_against_sweep(cases: usize, points: usize, seed: u64) -> Report {
    let mut rep = Report::new("quartic endpoints");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let p = random_quartic(&mut rng);
        let set = solve_quartic_leq(&p);
        let got: Vec<f64> = set
            .intervals()
            .iter()
            .flat_map(|iv| [iv.lo, iv.hi])
            .filter(|v| v.is_finite())
            .collect();
        let want = sign_sweep_roots(&p, -10.0, 10.0, points);
        let ok = got.len() == want.len() && got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= 1e-8);
        rep.record(ok, || format!("{:?}: {got:?} vs {want:?}", p.c));
    }
    rep
}

/// `a + b z_obs` reproduces `x`, and `eta^T a = 0`.
pub fn decompose_reconstruction(cases: usize, seed: u64) -> Report {
    let mut rep = Report::new("decompose reconstruction");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let (n, d) = (rng.random_range(4..40), rng.random_range(1..8));
        let x = random_data(&mut rng, n, d);
        let feature = rng.random_range(0..d);
        let labels: Vec<i32> = (0..n).map(|i| if i < 2 { i as i32 + 1 } else { rng.random_range(-1..3) }).collect();
        let obs = crate::state::PipelineResult {
            outliers: (0..n).filter(|&i| labels[i] == -1).collect(),
            features: (0..d).collect(),
            labels,
        };
        let sigma = match rng.random_range(0..3) {
            0 => Covariance::IdentityScaled(rng.random_range(0.1..5.0)),
            1 => crate::harness::generate::ar_covariance(n * d, 0.5),
            _ => {
                let c: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..3.0)).collect();
                Covariance::Kronecker {
                    row: nalgebra::DMatrix::identity(n, n),
                    col: nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(c)),
                }
            }
        };
        let spec = TestSpec {
            cluster_a: 1,
            cluster_b: 2,
            feature,
        };
        let dir = build_eta(&obs, &spec, n, d, &sigma).unwrap();
        let (line, z) = decompose(x.as_vec(), &dir, &sigma, n, d).unwrap();
        let err = line
            .eval(z)
            .iter()
            .zip(x.as_vec())
            .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        let eta_a: f64 = dir.eta.iter().zip(&line.a).map(|(e, a)| e * a).sum();
        rep.record(err <= 1e-10 && eta_a.abs() <= 1e-10, || format!("error {err:e}, eta^T a = {eta_a:e}"));
    }
    rep
}

/// Every suite at the given scale (1.0 = 100 stability cases, 50 masked
/// tests, 1000 kernel cases).
pub fn run_all(scale: f64, seed: u64) -> Vec<Report> {
    let s = |v: usize| ((v as f64 * scale).ceil() as usize).max(1);
    vec![
        interval_stability(s(100), 20, seed),
        masked_runs(s(50), 10, seed ^ 1),
        tn_against_quadrature(s(1000), seed ^ 2),
        quartic_against_sweep(s(1000), 100_000, seed ^ 3),
        decompose_reconstruction(s(1000), seed ^ 4),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_matches_closed_form() {
        // Phi(1) - Phi(-1)
        let scale = log_phi(1.0).exp();
        assert!((simpson_mass(-1.0, 1.0, 1.0, 1e-15) * scale - 0.682_689_492_137_085_9).abs() < 1e-13);
    }

    #[test]
    fn sweep_finds_known_roots() {
        // (z - 1)(z + 2)(z^2 + 1)
        let p = Polynomial::new(&[-2.0, 1.0, -1.0, 1.0, 1.0]);
        let r = sign_sweep_roots(&p, -10.0, 10.0, 1001);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_suites_pass() {
        for rep in run_all(0.05, 17) {
            assert!(rep.passed(), "{rep}");
        }
    }
}
