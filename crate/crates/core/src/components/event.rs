//! Accumulates selection events along the line into one interval around `z`.

use crate::interval::{merge_tol, Interval};
use crate::polyroot::{quadratic_leq, solve_quartic_leq, Polynomial};

/// Intersection of the components, containing `z`, of a series of
/// polynomial inequality sets.
///
/// An event that does not hold at `z` (beyond rounding) collapses the
/// interval to the single point `z`.
#[derive(Debug, Clone, Copy)]
pub struct EventInterval {
    z: f64,
    lo: f64,
    hi: f64,
    tol: f64,
}

impl EventInterval {
    pub fn new(z: f64, lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= z && z <= hi, "z = {z} outside [{lo}, {hi}]");
        EventInterval {
            z,
            lo,
            hi,
            tol: 1e-10 * z.abs().max(1.0),
        }
    }

    pub fn unbounded(z: f64) -> Self {
        EventInterval::new(z, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    fn clip(&mut self, lo: f64, hi: f64) {
        if lo > self.lo {
            self.lo = lo;
        }
        if hi < self.hi {
            self.hi = hi;
        }
    }

    fn collapse(&mut self) {
        self.lo = self.z;
        self.hi = self.z;
    }

    /// `c2 z^2 + c1 z + c0 <= 0`.
    #[inline]
    pub fn quad_leq(&mut self, c2: f64, c1: f64, c0: f64) {
        if c2 == 0.0 && c1 == 0.0 {
            // constant events hold by construction at the query point
            return;
        }
        match quadratic_leq(c2, c1, c0).component_near(self.z, self.tol) {
            Some((lo, hi)) => self.clip(lo, hi),
            None => self.collapse(),
        }
    }

    /// `c2 z^2 + c1 z + c0 > 0`, taken as the closure `>= 0`.
    #[inline]
    pub fn quad_gt(&mut self, c2: f64, c1: f64, c0: f64) {
        self.quad_leq(-c2, -c1, -c0);
    }

    /// `p(z) <= 0` for a polynomial of degree at most 4.
    pub fn poly_leq(&mut self, p: &Polynomial) {
        if p.c[1..].iter().all(|&v| v == 0.0) {
            return;
        }
        let set = solve_quartic_leq(p);
        match set.component_near(self.z, self.tol) {
            Some(iv) => self.clip(iv.lo, iv.hi),
            None => self.collapse(),
        }
    }

    pub fn poly_gt(&mut self, p: &Polynomial) {
        self.poly_leq(&p.negated());
    }

    /// Keep the component around `z` on which `#{s : z in sets[s]} >= k`
    /// has the truth value `holds`; `sets` are closed intervals.
    ///
    /// The count only changes at set endpoints, so the component ends at the
    /// first endpoint on each side past which the predicate flips.
    pub fn count_at_least(&mut self, sets: &[(f64, f64)], k: usize, holds: bool) {
        let z = self.z;
        let ok = |c: i64| (c >= k as i64) == holds;
        let mut marks: Vec<(f64, i64)> = Vec::with_capacity(2 * sets.len());

        let mut c = sets.iter().filter(|&&(l, u)| l <= z && z < u).count() as i64;
        let mut hi = z;
        if ok(c) {
            hi = f64::INFINITY;
            for &(l, u) in sets {
                if l > z {
                    marks.push((l, 1));
                }
                if u > z && u.is_finite() {
                    marks.push((u, -1));
                }
            }
            marks.sort_unstable_by(|p, q| p.0.total_cmp(&q.0));
            let mut i = 0;
            while i < marks.len() {
                let at = marks[i].0;
                while i < marks.len() && marks[i].0 == at {
                    c += marks[i].1;
                    i += 1;
                }
                if !ok(c) {
                    hi = at;
                    break;
                }
            }
        }

        marks.clear();
        let mut c = sets.iter().filter(|&&(l, u)| l < z && z <= u).count() as i64;
        let mut lo = z;
        if ok(c) {
            lo = f64::NEG_INFINITY;
            for &(l, u) in sets {
                if u < z {
                    marks.push((u, 1));
                }
                if l < z && l.is_finite() {
                    marks.push((l, -1));
                }
            }
            marks.sort_unstable_by(|p, q| q.0.total_cmp(&p.0));
            let mut i = 0;
            while i < marks.len() {
                let at = marks[i].0;
                while i < marks.len() && marks[i].0 == at {
                    c += marks[i].1;
                    i += 1;
                }
                if !ok(c) {
                    lo = at;
                    break;
                }
            }
        }
        self.clip(lo, hi);
    }

    pub fn intersect(&mut self, iv: Interval) {
        self.clip(iv.lo, iv.hi);
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.lo.min(self.z), self.hi.max(self.z))
    }

    /// True when the interval has shrunk to (numerically) a point.
    pub fn is_degenerate(&self) -> bool {
        self.hi - self.lo <= merge_tol(self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersects_components() {
        let mut ev = EventInterval::unbounded(0.5);
        ev.quad_leq(1.0, 0.0, -1.0); // [-1, 1]
        ev.quad_gt(0.0, 1.0, 0.0); // z >= 0
        assert_eq!(ev.interval(), Interval::new(0.0, 1.0));
        // outside-of-roots set: component containing 0.5 is [0.4, inf)
        ev.quad_leq(-1.0, 0.0, 0.16);
        assert_eq!(ev.interval(), Interval::new(0.4, 1.0));
    }

    #[test]
    fn counting_event() {
        // sets [0,2], [1,3], [5,6]; at least two hold exactly on [1, 2]
        let sets = [(0.0, 2.0), (1.0, 3.0), (5.0, 6.0)];
        let mut ev = EventInterval::unbounded(1.5);
        ev.count_at_least(&sets, 2, true);
        assert_eq!(ev.interval(), Interval::new(1.0, 2.0));
        // fewer than two: component around 4 is [3, inf) ... up to where two overlap again (never)
        let mut ev = EventInterval::unbounded(4.0);
        ev.count_at_least(&sets, 2, false);
        assert_eq!(ev.interval(), Interval::new(2.0, f64::INFINITY));
        let mut ev = EventInterval::unbounded(-1.0);
        ev.count_at_least(&sets, 2, false);
        assert_eq!(ev.interval(), Interval::new(f64::NEG_INFINITY, 1.0));
        // wrong claimed truth value collapses
        let mut ev = EventInterval::unbounded(1.5);
        ev.count_at_least(&sets, 2, false);
        assert_eq!(ev.interval(), Interval::point(1.5));
        // unbounded sets and a point set that never fills a gap
        let sets = [(f64::NEG_INFINITY, 0.0), (-1.0, f64::INFINITY), (0.5, 0.5)];
        let mut ev = EventInterval::unbounded(-0.5);
        ev.count_at_least(&sets, 2, true);
        assert_eq!(ev.interval(), Interval::new(-1.0, 0.0));
    }

    #[test]
    fn counting_event_matches_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let m = rng.random_range(1..8);
            let sets: Vec<(f64, f64)> = (0..m)
                .map(|_| {
                    let a: f64 = rng.random_range(-5.0..5.0);
                    (a, a + rng.random_range(0.0..4.0))
                })
                .collect();
            let k = rng.random_range(1..=m);
            let z = rng.random_range(-6.0..6.0);
            let count = |t: f64| sets.iter().filter(|&&(l, u)| l <= t && t <= u).count();
            let holds = count(z) >= k;
            let mut ev = EventInterval::unbounded(z);
            ev.count_at_least(&sets, k, holds);
            let iv = ev.interval();
            let mut t = -10.0;
            while t <= 10.0 {
                let interior = t > iv.lo + 1e-9 && t < iv.hi - 1e-9;
                if interior {
                    assert_eq!(count(t) >= k, holds, "{t} in {iv}");
                }
                t += 1e-3;
            }
            // maximal: just past a finite end the predicate flips
            for end in [iv.lo - 1e-6, iv.hi + 1e-6] {
                if end.is_finite() && iv.hi > iv.lo {
                    assert_ne!(count(end) >= k, holds, "{end} next to {iv}");
                }
            }
        }
    }

    #[test]
    fn violated_event_collapses() {
        let mut ev = EventInterval::unbounded(3.0);
        ev.quad_leq(1.0, 0.0, -1.0);
        assert_eq!(ev.interval(), Interval::point(3.0));
        assert!(ev.is_degenerate());
    }

    #[test]
    fn boundary_rounding_is_tolerated() {
        let z = 1.0 + 1e-13;
        let mut ev = EventInterval::unbounded(z);
        ev.quad_leq(1.0, 0.0, -1.0);
        assert_eq!(ev.interval(), Interval::new(-1.0, z));
    }
}
