//! Real solution sets of low-degree polynomial inequalities `p(z) <= 0`.

use crate::interval::{Interval, IntervalSet};
use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};

/// Relative size below which a leading coefficient is treated as zero.
pub const COLLAPSE_RTOL: f64 = 1e-12;

const INF: f64 = f64::INFINITY;

/// Polynomial of degree at most 4, coefficients in ascending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polynomial {
    pub c: [f64; 5],
}

impl Polynomial {
    /// From ascending coefficients `c0, c1, ...` (at most five).
    pub fn new(coeffs: &[f64]) -> Self {
        assert!(coeffs.len() <= 5, "degree above 4 is not supported");
        let mut c = [0.0; 5];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Polynomial { c }
    }

    pub fn quadratic(c2: f64, c1: f64, c0: f64) -> Self {
        Polynomial {
            c: [c0, c1, c2, 0.0, 0.0],
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &ci| acc * z + ci)
    }

    fn eval_with_derivative(&self, z: f64, deg: usize) -> (f64, f64) {
        let mut p = self.c[deg];
        let mut dp = 0.0;
        for k in (0..deg).rev() {
            dp = dp * z + p;
            p = p * z + self.c[k];
        }
        (p, dp)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Degree after dropping leading coefficients that are negligible
    /// relative to the largest one. `None` for the zero polynomial.
    pub fn effective_degree(&self) -> Option<usize> {
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            return None;
        }
        (0..5).rev().find(|&k| self.c[k].abs() > COLLAPSE_RTOL * scale)
    }

    pub fn negated(&self) -> Self {
        Polynomial {
            c: self.c.map(|v| -v),
        }
    }
}

/// Shape of `{z : c2 z^2 + c1 z + c0 <= 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadSet {
    Empty,
    All,
    /// `(-inf, r]`
    Below(f64),
    /// `[r, inf)`
    Above(f64),
    /// `[r1, r2]`
    Between(f64, f64),
    /// `(-inf, r1] U [r2, inf)`
    Outside(f64, f64),
}

impl QuadSet {
    /// The component containing `z`, or the nearest one within `tol`
    /// (widened so it contains `z`).
    pub fn component_near(self, z: f64, tol: f64) -> Option<(f64, f64)> {
        let widen = |lo: f64, hi: f64| -> Option<(f64, f64)> {
            if z >= lo - tol && z <= hi + tol {
                Some((lo.min(z), hi.max(z)))
            } else {
                None
            }
        };
        match self {
            QuadSet::Empty => None,
            QuadSet::All => Some((-INF, INF)),
            QuadSet::Below(r) => widen(-INF, r),
            QuadSet::Above(r) => widen(r, INF),
            QuadSet::Between(r1, r2) => widen(r1, r2),
            QuadSet::Outside(r1, r2) => {
                if z <= r1 + tol && (z - r1 <= r2 - z) {
                    widen(-INF, r1)
                } else {
                    widen(r2, INF)
                }
            }
        }
    }

    pub fn to_set(self) -> IntervalSet {
        match self {
            QuadSet::Empty => IntervalSet::empty(),
            QuadSet::All => IntervalSet::all(),
            QuadSet::Below(r) => Interval::new(-INF, r).into(),
            QuadSet::Above(r) => Interval::new(r, INF).into(),
            QuadSet::Between(r1, r2) => Interval::new(r1, r2).into(),
            QuadSet::Outside(r1, r2) => IntervalSet::from_intervals([
                Interval::new(-INF, r1),
                Interval::new(r2, INF),
            ]),
        }
    }
}

/// `{z : c2 z^2 + c1 z + c0 <= 0}` without allocating.
pub fn quadratic_leq(c2: f64, c1: f64, c0: f64) -> QuadSet {
    let scale = c2.abs().max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return QuadSet::All;
    }
    let eps = COLLAPSE_RTOL * scale;
    if c2.abs() <= eps {
        if c1.abs() <= eps {
            return if c0 <= 0.0 { QuadSet::All } else { QuadSet::Empty };
        }
        let r = -c0 / c1;
        return if c1 > 0.0 {
            QuadSet::Below(r)
        } else {
            QuadSet::Above(r)
        };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return if c2 > 0.0 { QuadSet::Empty } else { QuadSet::All };
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let (mut r1, mut r2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / c2, c0 / q)
    };
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if c2 > 0.0 {
        QuadSet::Between(r1, r2)
    } else if r1 == r2 {
        QuadSet::All
    } else {
        QuadSet::Outside(r1, r2)
    }
}

/// `{z : p(z) <= 0}` for `deg p <= 2`.
pub fn solve_quadratic_leq(p: &Polynomial) -> IntervalSet {
    debug_assert!(p.c[3] == 0.0 && p.c[4] == 0.0);
    quadratic_leq(p.c[2], p.c[1], p.c[0]).to_set()
}

/// `{z : p(z) <= 0}` for `deg p <= 4`.
///
/// Real roots come from the companion-matrix eigenvalues, polished by
/// Newton steps; the sign on each segment between consecutive roots is
/// taken at its midpoint.
pub fn solve_quartic_leq(p: &Polynomial) -> IntervalSet {
    let deg = match p.effective_degree() {
        None => return IntervalSet::all(),
        Some(d) => d,
    };
    if deg <= 2 {
        return quadratic_leq(p.c[2], p.c[1], p.c[0]).to_set();
    }
    let roots = real_roots(p, deg);
    sign_set(p, &roots)
}

/// Closure of the complement; used for strict `>` events.
pub fn strict_complement(s: &IntervalSet) -> IntervalSet {
    s.closure_complement()
}

/// Sorted real roots of `p`, whose effective degree is `deg >= 1`.
pub fn real_roots(p: &Polynomial, deg: usize) -> Vec<f64> {
    let lead = p.c[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for k in 0..deg {
        comp[(0, k)] = -p.c[deg - 1 - k] / lead;
        if k + 1 < deg {
            comp[(k + 1, k)] = 1.0;
        }
    }
    let eig = companion_eigenvalues(comp, p, deg);
    let mut roots: Vec<f64> = eig
        .iter()
        .filter(|e| e.im.abs() <= 1e-6 * (1.0 + e.re.abs()))
        .map(|e| polish(p, deg, e.re))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots
}

/// Francis QR can cycle when roots come in `+-r` pairs, so the iteration is
/// bounded; on failure the matrix is shifted (moving the eigenvalues off the
/// symmetric configuration) and, as a last resort, Aberth iteration is used.
fn companion_eigenvalues(comp: DMatrix<f64>, p: &Polynomial, deg: usize) -> Vec<Complex<f64>> {
    let eps = f64::EPSILON;
    if let Some(s) = Schur::try_new(comp.clone(), eps, 500) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    let scale = comp.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for shift in [0.123_456_7 * scale, -0.371_293 * scale] {
        let mut m = comp.clone();
        for k in 0..deg {
            m[(k, k)] -= shift;
        }
        if let Some(s) = Schur::try_new(m, eps, 500) {
            return s.complex_eigenvalues().iter().map(|e| e + shift).collect();
        }
    }
    aberth(p, deg)
}

fn aberth(p: &Polynomial, deg: usize) -> Vec<Complex<f64>> {
    let lead = p.c[deg];
    let coef: Vec<f64> = p.c[..=deg].iter().map(|c| c / lead).collect();
    let radius = 1.0 + coef[..deg].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex<f64>> = (0..deg)
        .map(|k| Complex::from_polar(0.5 * radius, 0.4 + std::f64::consts::TAU * k as f64 / deg as f64))
        .collect();
    let eval = |x: Complex<f64>| {
        let mut v = Complex::new(0.0, 0.0);
        let mut dv = Complex::new(0.0, 0.0);
        for &c in coef.iter().rev() {
            dv = dv * x + v;
            v = v * x + c;
        }
        (v, dv)
    };
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (v, dv) = eval(z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulse: Complex<f64> = (0..deg)
                .filter(|&j| j != i)
                .map(|j| Complex::new(1.0, 0.0) / (z[i] - z[j]))
                .sum();
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulse);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

fn polish(p: &Polynomial, deg: usize, mut x: f64) -> f64 {
    let (mut px, _) = p.eval_with_derivative(x, deg);
    for _ in 0..3 {
        let (v, dv) = p.eval_with_derivative(x, deg);
        if dv == 0.0 || v == 0.0 {
            break;
        }
        let next = x - v / dv;
        let pn = p.eval(next);
        if !next.is_finite() || pn.abs() > px.abs() {
            break;
        }
        x = next;
        px = pn;
    }
    x
}

fn sign_set(p: &Polynomial, roots: &[f64]) -> IntervalSet {
    if roots.is_empty() {
        return if p.eval(0.0) <= 0.0 {
            IntervalSet::all()
        } else {
            IntervalSet::empty()
        };
    }
    // collapse near-coincident roots; the midpoint sign decides either way
    let mut pts: Vec<f64> = Vec::with_capacity(roots.len());
    for &r in roots {
        match pts.last() {
            Some(&last) if r - last <= 1e-10 * last.abs().max(1.0) => {}
            _ => pts.push(r),
        }
    }
    let mut parts = Vec::with_capacity(pts.len() + 1);
    let first = pts[0];
    if p.eval(first - first.abs().max(1.0)) <= 0.0 {
        parts.push(Interval::new(-INF, first));
    }
    for w in pts.windows(2) {
        if p.eval(0.5 * (w[0] + w[1])) <= 0.0 {
            parts.push(Interval::new(w[0], w[1]));
        }
    }
    let last = *pts.last().unwrap();
    if p.eval(last + last.abs().max(1.0)) <= 0.0 {
        parts.push(Interval::new(last, INF));
    }
    IntervalSet::from_intervals(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn set(v: &[(f64, f64)]) -> IntervalSet {
        IntervalSet::from_intervals(v.iter().map(|&(a, b)| Interval::new(a, b)))
    }

    fn close_sets(a: &IntervalSet, b: &IntervalSet, tol: f64) -> bool {
        a.len() == b.len()
            && a.intervals().iter().zip(b.intervals()).all(|(x, y)| {
                let same = |u: f64, v: f64| u == v || (u - v).abs() <= tol * u.abs().max(1.0);
                same(x.lo, y.lo) && same(x.hi, y.hi)
            })
    }

    #[test]
    fn quadratic_examples() {
        assert_eq!(
            solve_quadratic_leq(&Polynomial::new(&[-1.0, 0.0, 1.0])),
            set(&[(-1.0, 1.0)])
        );
        assert_eq!(
            solve_quadratic_leq(&Polynomial::new(&[-1.0, 0.0, -1.0])),
            IntervalSet::all()
        );
        assert_eq!(
            solve_quadratic_leq(&Polynomial::new(&[-4.0, 2.0, 0.0])),
            set(&[(-INF, 2.0)])
        );
        assert_eq!(
            solve_quadratic_leq(&Polynomial::new(&[1.0, 0.0, 0.0])),
            IntervalSet::empty()
        );
        // -(z-1)(z-3) <= 0 outside the roots
        assert_eq!(
            solve_quadratic_leq(&Polynomial::new(&[-3.0, 4.0, -1.0])),
            set(&[(-INF, 1.0), (3.0, INF)])
        );
    }

    #[test]
    fn quadratic_collapse_threshold() {
        // leading coefficient 1e-14 relative to 2 collapses to the linear case
        let s = quadratic_leq(1e-14, 2.0, -4.0);
        assert_eq!(s, QuadSet::Below(2.0));
    }

    #[test]
    fn quartic_examples() {
        // (z^2 - 1)(z^2 - 4) = z^4 - 5 z^2 + 4
        let s = solve_quartic_leq(&Polynomial::new(&[4.0, 0.0, -5.0, 0.0, 1.0]));
        assert!(close_sets(&s, &set(&[(-2.0, -1.0), (1.0, 2.0)]), 1e-12), "{s}");
        assert!(solve_quartic_leq(&Polynomial::new(&[1.0, 0.0, 0.0, 0.0, 1.0])).is_empty());
        // roots -3, -0.5, 0.5, 3: (z^2 - 9)(z^2 - 0.25)
        let s = solve_quartic_leq(&Polynomial::new(&[2.25, 0.0, -9.25, 0.0, 1.0]));
        assert!(close_sets(&s, &set(&[(-3.0, -0.5), (0.5, 3.0)]), 1e-12), "{s}");
        let oracle = sweep_oracle(&Polynomial::new(&[2.25, 0.0, -9.25, 0.0, 1.0]), -10.0, 10.0, 100_000);
        assert!(close_sets(&s, &oracle, 1e-9), "{s} vs {oracle}");
    }

    #[test]
    fn aberth_fallback_finds_symmetric_roots() {
        let p = Polynomial::new(&[2.25, 0.0, -9.25, 0.0, 1.0]);
        let mut re: Vec<f64> = aberth(&p, 4).iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (r, want) in re.iter().zip([-3.0, -0.5, 0.5, 3.0]) {
            assert!((r - want).abs() < 1e-12, "{re:?}");
        }
        // z^4 + 1 has no real roots
        let p = Polynomial::new(&[1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(aberth(&p, 4).iter().all(|z| z.im.abs() > 0.5));
    }

    #[test]
    fn cubic_and_collapsed_quartic() {
        // z (z - 1)(z + 2) = z^3 + z^2 - 2z
        let s = solve_quartic_leq(&Polynomial::new(&[0.0, -2.0, 1.0, 1.0]));
        assert!(close_sets(&s, &set(&[(-INF, -2.0), (0.0, 1.0)]), 1e-12), "{s}");
        let s = solve_quartic_leq(&Polynomial::new(&[-1.0, 0.0, 1.0, 0.0, 1e-16]));
        assert!(close_sets(&s, &set(&[(-1.0, 1.0)]), 1e-12), "{s}");
        assert_eq!(solve_quartic_leq(&Polynomial::new(&[0.0; 5])), IntervalSet::all());
    }

    #[test]
    fn double_root_does_not_split() {
        // (z - 1)^2 (z + 1)^2 >= 0 everywhere; only the roots satisfy <= 0
        let s = solve_quartic_leq(&Polynomial::new(&[1.0, 0.0, -2.0, 0.0, 1.0]));
        assert!(s.measure() < 1e-6, "{s}");
        // -(z - 1)^2 (z^2 + 1) <= 0 everywhere
        let p = Polynomial::new(&[-1.0, 2.0, -2.0, 2.0, -1.0]);
        let s = solve_quartic_leq(&p);
        assert_eq!(s, IntervalSet::all(), "{s}");
    }

    #[test]
    fn complement_examples() {
        let s = strict_complement(&set(&[(-2.0, -1.0), (0.0, 1.0), (2.0, 3.0)]));
        assert_eq!(s.len(), 4);
        for k in 0..1000 {
            let x = -5.0 + 10.0 * (k as f64 + 0.37) / 1000.0;
            let inside = [(-2.0, -1.0), (0.0, 1.0), (2.0, 3.0)]
                .iter()
                .any(|&(a, b)| a <= x && x <= b);
            assert_eq!(s.contains(x), !inside, "x = {x}");
        }
    }

    /// Sign sweep on a grid followed by bisection on every sign change.
    fn sweep_oracle(p: &Polynomial, lo: f64, hi: f64, steps: usize) -> IntervalSet {
        let mut parts = Vec::new();
        let h = (hi - lo) / steps as f64;
        let neg = |x: f64| p.eval(x) <= 0.0;
        let bisect = |mut a: f64, mut b: f64| {
            let sa = neg(a);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if neg(m) == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let mut start = if neg(lo) { Some(-INF) } else { None };
        let mut prev = lo;
        for k in 1..=steps {
            let x = lo + h * k as f64;
            if neg(x) != neg(prev) {
                let r = bisect(prev, x);
                match start.take() {
                    Some(s) => parts.push(Interval::new(s, r)),
                    None => start = Some(r),
                }
            }
            prev = x;
        }
        if let Some(s) = start {
            parts.push(Interval::new(s, INF));
        }
        IntervalSet::from_intervals(parts)
    }

    #[test]
    fn random_quartics_with_known_roots_match_sweep_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut roots: Vec<f64> = (0..4).map(|_| rng.random_range(-8.0..8.0)).collect();
            roots.sort_by(f64::total_cmp);
            if roots.windows(2).any(|w| w[1] - w[0] < 1e-3) {
                continue;
            }
            let lead: f64 = rng.random_range(0.1..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            // expand lead * prod (z - r)
            let mut c = vec![lead];
            for r in &roots {
                let mut next = vec![0.0; c.len() + 1];
                for (k, ck) in c.iter().enumerate() {
                    next[k + 1] += ck;
                    next[k] -= r * ck;
                }
                c = next;
            }
            let p = Polynomial::new(&c);
            let got = solve_quartic_leq(&p);
            let oracle = sweep_oracle(&p, -10.0, 10.0, 100_000);
            assert!(close_sets(&got, &oracle, 1e-8), "{got} vs {oracle}");
        }
    }

    proptest! {
        #[test]
        fn membership_matches_sign(seed in any::<u64>(), deg in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<f64> = (0..=deg).map(|_| rng.sample(StandardNormal)).collect();
            let p = Polynomial::new(&coeffs);
            let s = solve_quartic_leq(&p);
            let scale = p.max_abs_coeff();
            for iv in s.intervals() {
                for e in [iv.lo, iv.hi] {
                    if e.is_finite() {
                        prop_assert!(p.eval(e).abs() <= 1e-8 * scale * e.abs().max(1.0).powi(4),
                            "p({e}) = {}", p.eval(e));
                    }
                }
            }
            for k in 0..1000 {
                let x = -10.0 + 20.0 * (k as f64 + 0.5) / 1000.0;
                let near_edge = s.intervals().iter().any(|iv| (iv.lo - x).abs() < 1e-8 || (iv.hi - x).abs() < 1e-8);
                if !near_edge {
                    prop_assert_eq!(s.contains(x), p.eval(x) <= 0.0, "x = {}, set {}", x, s);
                }
            }
        }
    }
}
