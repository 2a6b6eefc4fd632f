//! Pipeline execution, per-point interval updates and the line sweep that
//! assembles the truncation region.

use crate::components::{aggregate::aggregate, apply_observed, apply_parametric_mode, EventMode, LinePoint};
use crate::data::{DataMatrix, ParametricLine};
use crate::error::{Error, Result};
use crate::graph::{Component, PipelineGraph};
use crate::interval::{Interval, IntervalSet};
use crate::state::{PipelineResult, SelectionState, OUTLIER};

/// Search-range and stepping policy of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Half width of the range around zero, in units of `sigma_T`, added to `|z_obs|`.
    pub z_half_width: f64,
    /// Smallest step past an interval end.
    pub min_step: f64,
    pub max_intervals: usize,
    /// Stop evaluating a point as soon as its output can no longer match.
    pub prune: bool,
    /// Events used while sweeping. The region is the same for both modes;
    /// `Decision` needs fewer steps. The local interval at `z_obs` always
    /// comes from the full update rules.
    pub events: EventMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            z_half_width: 10.0,
            min_step: 1e-10,
            max_intervals: 1_000_000,
            prune: true,
            events: EventMode::Decision,
        }
    }
}

/// Truncation region plus bookkeeping from one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub region: IntervalSet,
    /// The swept range `[z_lo, z_hi]`.
    pub range: Interval,
    /// Interval returned by `update_interval` at `z_obs`.
    pub local: Interval,
    pub visited: usize,
    pub matched: usize,
}

/// Apply the pipeline to `x` in observed mode.
pub fn run_pipeline(g: &PipelineGraph, x: &DataMatrix) -> Result<PipelineResult> {
    let (n, d) = (x.rows(), x.cols());
    let mut states: Vec<Option<SelectionState>> = vec![None; g.nodes().len()];
    for &k in g.order() {
        let node = g.node(k);
        let mut state = input_state(g, k, &states, n, d)?;
        if !node.component.is_aggregate() {
            apply_observed(&node.component, g.after_clustering(k), x.as_vec(), n, d, &mut state)
                .map_err(|e| e.in_node(&node.id, None))?;
        }
        states[k] = Some(state);
    }
    Ok(states[g.sink()].take().unwrap().result())
}

fn input_state(
    g: &PipelineGraph,
    k: usize,
    states: &[Option<SelectionState>],
    n: usize,
    d: usize,
) -> Result<SelectionState> {
    let node = g.node(k);
    let parents = g.parents(k);
    if parents.is_empty() {
        return Ok(SelectionState::initial(n, d));
    }
    if node.component.is_aggregate() {
        let inputs: Vec<&SelectionState> =
            parents.iter().map(|&p| states[p].as_ref().unwrap()).collect();
        return aggregate(&node.component, &inputs).map_err(|e| e.in_node(&node.id, None));
    }
    Ok(states[parents[0]].as_ref().unwrap().clone())
}

/// Which nodes may be followed by something that shrinks `O` or grows `M`.
#[derive(Debug, Clone)]
struct PruneRules {
    o_final: Vec<bool>,
    m_final: Vec<bool>,
}

impl PruneRules {
    fn new(g: &PipelineGraph) -> Self {
        let nn = g.nodes().len();
        let mut children = vec![Vec::new(); nn];
        for k in 0..nn {
            for &p in g.parents(k) {
                children[p].push(k);
            }
        }
        let mut o_shrinks_below = vec![false; nn];
        let mut m_grows_below = vec![false; nn];
        for &k in g.order().iter().rev() {
            for &c in &children[k] {
                let comp = &g.node(c).component;
                o_shrinks_below[k] |= o_shrinks_below[c] || *comp == Component::IntersectO;
                m_grows_below[k] |= m_grows_below[c] || *comp == Component::UnionM;
            }
        }
        PruneRules {
            o_final: o_shrinks_below.iter().map(|&b| !b).collect(),
            m_final: m_grows_below.iter().map(|&b| !b).collect(),
        }
    }

    /// True when no continuation of `s` can end in `target`.
    fn hopeless(&self, k: usize, s: &SelectionState, target: &PipelineResult) -> bool {
        if self.o_final[k] {
            let mut want = vec![false; s.outliers.len()];
            for &i in &target.outliers {
                want[i] = true;
            }
            if s.outliers.iter().zip(&want).any(|(&o, &w)| o && !w) {
                return true;
            }
            if s.clustered
                && s.labels
                    .iter()
                    .zip(&target.labels)
                    .any(|(&c, &t)| c != t && t != OUTLIER)
            {
                return true;
            }
        }
        if self.m_final[k] {
            if target.features.iter().any(|&j| !s.features[j]) {
                return true;
            }
        }
        false
    }
}

enum Evaluation {
    Full(SelectionState),
    /// Output cannot match the target anywhere on this interval.
    Pruned(Interval),
}

fn evaluate(
    g: &PipelineGraph,
    p: &LinePoint<'_>,
    prune: Option<(&PruneRules, &PipelineResult)>,
    mode: EventMode,
) -> Result<Evaluation> {
    let mut states: Vec<Option<SelectionState>> = vec![None; g.nodes().len()];
    for &k in g.order() {
        let node = g.node(k);
        let mut state = input_state(g, k, &states, p.n, p.d)?;
        if !node.component.is_aggregate() {
            let before = state.interval();
            apply_parametric_mode(&node.component, g.after_clustering(k), p, &mut state, mode)
                .map_err(|e| e.in_node(&node.id, Some(before)))?;
        }
        if let Some((rules, target)) = prune {
            if rules.hopeless(k, &state, target) {
                return Ok(Evaluation::Pruned(state.interval()));
            }
        }
        states[k] = Some(state);
    }
    Ok(Evaluation::Full(states[g.sink()].take().unwrap()))
}

fn line_point<'a>(line: &'a ParametricLine, x: &'a [f64], z: f64, n: usize, d: usize) -> LinePoint<'a> {
    LinePoint {
        a: &line.a,
        b: &line.b,
        x,
        z,
        n,
        d,
    }
}

fn check_shape(line: &ParametricLine, n: usize, d: usize) -> Result<()> {
    if line.len() != n * d {
        return Err(Error::InvalidData(format!(
            "line has length {} but data is {n} x {d}",
            line.len()
        )));
    }
    Ok(())
}

/// `[L_z, U_z]` and the pipeline output at `X(z) = a + b z`: every node
/// applies its update rule in topological order, starting from
/// `(empty, [d], 0_n, -inf, +inf)`.
pub fn update_interval(
    g: &PipelineGraph,
    line: &ParametricLine,
    n: usize,
    d: usize,
    z: f64,
) -> Result<(Interval, PipelineResult)> {
    check_shape(line, n, d)?;
    let x = line.eval(z);
    match evaluate(g, &line_point(line, &x, z, n, d), None, EventMode::Trace)? {
        Evaluation::Full(s) => Ok((s.interval(), s.result())),
        Evaluation::Pruned(_) => unreachable!("pruning disabled"),
    }
}

/// Walk `z` across `[-R, R]`, `R = |z_obs| + z_half_width * sigma_t`,
/// collecting every interval whose output equals `observed`.
pub fn sweep_truncation_region(
    g: &PipelineGraph,
    line: &ParametricLine,
    n: usize,
    d: usize,
    observed: &PipelineResult,
    z_obs: f64,
    sigma_t: f64,
    cfg: &SweepConfig,
) -> Result<SweepOutput> {
    check_shape(line, n, d)?;
    if !(cfg.min_step > 0.0) || !(cfg.z_half_width > 0.0) {
        return Err(Error::Config(format!("invalid sweep configuration {cfg:?}")));
    }
    let (local, at_obs) = update_interval(g, line, n, d, z_obs)?;
    if at_obs != *observed {
        return Err(Error::Inconsistent(format!(
            "pipeline output at z_obs = {z_obs} differs from the observed output"
        )));
    }
    let half = z_obs.abs() + cfg.z_half_width * sigma_t;
    let range = Interval::new(-half, half);
    let rules = PruneRules::new(g);
    let prune = cfg.prune.then_some((&rules, observed));

    let mut parts: Vec<Interval> = local.clip(range.lo, range.hi).into_iter().collect();
    let mut x = Vec::with_capacity(n * d);
    let mut z = range.lo;
    let mut visited = 0usize;
    let mut matched = 1usize;
    let mut thin_run = 0usize;
    while z <= range.hi {
        if visited >= cfg.max_intervals {
            return Err(Error::Budget(cfg.max_intervals));
        }
        visited += 1;
        line.eval_into(z, &mut x);
        let p = line_point(line, &x, z, n, d);
        let (iv, hit) = match evaluate(g, &p, prune, cfg.events) {
            Ok(Evaluation::Full(s)) => (s.interval(), s.matches(observed)),
            Ok(Evaluation::Pruned(iv)) => (iv, false),
            Err(e) => match e.failure_interval() {
                Some(iv) => (iv, false),
                None => return Err(e),
            },
        };
        if !iv.contains(z) {
            return Err(Error::Stagnation {
                z,
                steps: visited,
                detail: format!("interval {iv} does not contain the query point"),
            });
        }
        if hit {
            matched += 1;
            if let Some(c) = iv.clip(range.lo, range.hi) {
                parts.push(c);
            }
        }
        let nudge = cfg.min_step.max(1e-9 * iv.hi.abs());
        if iv.hi - iv.lo < nudge {
            thin_run += 1;
            log::debug!("degenerate interval {iv} at z = {z}");
            if thin_run > 100_000 {
                return Err(Error::Stagnation {
                    z,
                    steps: visited,
                    detail: "too many consecutive degenerate intervals".into(),
                });
            }
        } else {
            thin_run = 0;
        }
        if iv.hi == f64::INFINITY {
            break;
        }
        z = iv.hi + nudge;
    }
    let region = IntervalSet::from_intervals(parts);
    log::info!(
        "sweep: {visited} intervals visited, {matched} matched, {} pieces, matched measure {:.6e}",
        region.len(),
        region.measure()
    );
    Ok(SweepOutput {
        region,
        range,
        local,
        visited,
        matched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Component::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graphs() -> Vec<PipelineGraph> {
        vec![
            PipelineGraph::chain(vec![
                KnnOD { k: 2, tau: 3.0 },
                VarianceFS { tau: 0.8 },
                KMeans { n_clusters: 2, max_iter: 20, seed: 3 },
            ])
            .unwrap(),
            PipelineGraph::chain(vec![
                VarianceFS { tau: 0.5 },
                Dbscan { eps: 1.2, min_pts: 3 },
                KnnMeanOD { k: 2, tau: 1.5 },
            ])
            .unwrap(),
        ]
    }

    fn random_line(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ParametricLine {
        let a = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        // sparse direction, like a two-cluster contrast on one feature
        let j = rng.random_range(0..d);
        let b = (0..n * d)
            .map(|l| if l % d == j { rng.random_range(-0.5..0.5) } else { 0.0 })
            .collect();
        ParametricLine::new(a, b)
    }

    #[test]
    fn constant_line_gives_whole_range() {
        let g = &graphs()[0];
        let x: Vec<f64> = (0..30).map(|v| ((v * 7) % 11) as f64 / 3.0).collect();
        let line = ParametricLine::constant(&x);
        let obs = run_pipeline(g, &line.at(0.0, 10, 3).unwrap()).unwrap();
        let out = sweep_truncation_region(g, &line, 10, 3, &obs, 0.5, 1.0, &SweepConfig::default()).unwrap();
        assert_eq!(out.local, Interval::ALL);
        assert_eq!(out.region.intervals(), &[Interval::new(-10.5, 10.5)]);
        assert_eq!(out.visited, 1);
    }

    #[test]
    fn update_interval_matches_run_pipeline_and_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, d) = (12, 3);
        let mut checked = 0;
        for g in graphs() {
            for _ in 0..15 {
                let line = random_line(&mut rng, n, d);
                let z = rng.random_range(-3.0..3.0);
                let Ok((iv, res)) = update_interval(&g, &line, n, d, z) else { continue };
                assert!(iv.contains(z));
                assert_eq!(res, run_pipeline(&g, &line.at(z, n, d).unwrap()).unwrap());
                // any point of the interval reproduces it exactly
                for _ in 0..10 {
                    let r = iv.lo.max(-50.0) + rng.random::<f64>() * (iv.hi.min(50.0) - iv.lo.max(-50.0));
                    let (iv2, res2) = update_interval(&g, &line, n, d, r).unwrap();
                    assert_eq!(iv2, iv, "at {r}");
                    assert_eq!(res2, res);
                }
                checked += 1;
            }
        }
        assert!(checked >= 20, "{checked}");
    }

    fn same_region(p: &IntervalSet, q: &IntervalSet) {
        assert_eq!(p.len(), q.len(), "{p:?} vs {q:?}");
        for (u, v) in p.intervals().iter().zip(q.intervals()) {
            assert!((u.lo - v.lo).abs() < 1e-8 && (u.hi - v.hi).abs() < 1e-8, "{u} vs {v}");
        }
    }

    #[test]
    fn region_is_independent_of_pruning_and_event_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, d) = (12, 3);
        let mut checked = 0;
        for g in graphs() {
            for _ in 0..8 {
                let line = random_line(&mut rng, n, d);
                let Ok(obs) = run_pipeline(&g, &line.at(0.0, n, d).unwrap()) else { continue };
                let base = SweepConfig::default();
                let runs: Vec<SweepOutput> = [
                    base,
                    SweepConfig { prune: false, ..base },
                    SweepConfig { events: EventMode::Trace, ..base },
                    SweepConfig { prune: false, events: EventMode::Trace, ..base },
                ]
                .iter()
                .map(|c| sweep_truncation_region(&g, &line, n, d, &obs, 0.0, 1.0, c).unwrap())
                .collect();
                for r in &runs[1..] {
                    same_region(&runs[0].region, &r.region);
                }
                assert!(runs[0].visited <= runs[3].visited);
                // determinism
                let again = sweep_truncation_region(&g, &line, n, d, &obs, 0.0, 1.0, &base).unwrap();
                assert_eq!(again, runs[0]);
                checked += usize::from(runs[0].region.len() > 1 || runs[0].visited > 3);
            }
        }
        assert!(checked >= 8, "{checked}");
    }

    #[test]
    fn region_agrees_with_plain_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, d) = (12, 3);
        let mut checked = 0;
        for g in graphs() {
            for _ in 0..6 {
                let line = random_line(&mut rng, n, d);
                let Ok(obs) = run_pipeline(&g, &line.at(0.0, n, d).unwrap()) else { continue };
                let out = sweep_truncation_region(&g, &line, n, d, &obs, 0.0, 1.0, &SweepConfig::default()).unwrap();
                assert!(out.region.contains(0.0));
                let step = out.range.width() / 997.0;
                let mut z = out.range.lo + step / 2.0;
                while z < out.range.hi {
                    let near_end = out
                        .region
                        .intervals()
                        .iter()
                        .any(|iv| (z - iv.lo).abs() < 1e-8 || (z - iv.hi).abs() < 1e-8);
                    if !near_end {
                        let hit = matches!(run_pipeline(&g, &line.at(z, n, d).unwrap()), Ok(r) if r == obs);
                        assert_eq!(hit, out.region.contains(z), "z = {z}, region {:?}", out.region);
                    }
                    z += step;
                }
                checked += 1;
            }
        }
        assert!(checked >= 8, "{checked}");
    }

    #[test]
    fn dbscan_toy_region() {
        // rows 0 and 1 form a cluster; row 2 sits at 10 + z and joins it
        // exactly when it is within 2 of either, i.e. z in [-12, -7]
        let g = PipelineGraph::chain(vec![Dbscan { eps: 2.0, min_pts: 2 }]).unwrap();
        let line = ParametricLine::new(vec![0.0, 1.0, 10.0], vec![0.0, 0.0, 1.0]);
        let obs = run_pipeline(&g, &line.at(0.0, 3, 1).unwrap()).unwrap();
        assert_eq!(obs.labels, vec![1, 1, -1]);
        let out = sweep_truncation_region(&g, &line, 3, 1, &obs, 0.0, 2.0, &SweepConfig::default()).unwrap();
        assert_eq!(out.range, Interval::new(-20.0, 20.0));
        let want = [(-20.0, -12.0), (-7.0, 20.0)];
        assert_eq!(out.region.len(), 2, "{:?}", out.region);
        for (iv, (lo, hi)) in out.region.intervals().iter().zip(want) {
            assert!((iv.lo - lo).abs() < 1e-9 && (iv.hi - hi).abs() < 1e-9, "{iv}");
        }
        assert!((out.local.lo + 7.0).abs() < 1e-9 && out.local.hi == f64::INFINITY);
    }

    #[test]
    fn mismatched_observation_is_rejected() {
        let g = PipelineGraph::chain(vec![Dbscan { eps: 2.0, min_pts: 2 }]).unwrap();
        let line = ParametricLine::new(vec![0.0, 1.0, 10.0], vec![0.0, 0.0, 1.0]);
        let mut obs = run_pipeline(&g, &line.at(0.0, 3, 1).unwrap()).unwrap();
        obs.labels[2] = 1;
        let err = sweep_truncation_region(&g, &line, 3, 1, &obs, 0.0, 1.0, &SweepConfig::default());
        assert!(matches!(err, Err(Error::Inconsistent(_))));
        assert!(update_interval(&g, &line, 3, 2, 0.0).is_err());
    }
}
