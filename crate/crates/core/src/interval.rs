//! Closed intervals on the extended real line and finite unions of them.
//!
//! Endpoints may be `f64::NEG_INFINITY` / `f64::INFINITY`. Infinite endpoints
//! are only ever compared, never used in arithmetic.

use std::fmt;

/// Relative tolerance used when merging abutting endpoints.
pub const MERGE_RTOL: f64 = 1e-12;

/// Merge tolerance for an endpoint: `1e-12 * max(1, |x|)`, zero at infinity.
#[inline]
pub fn merge_tol(x: f64) -> f64 {
    if x.is_finite() {
        MERGE_RTOL * x.abs().max(1.0)
    } else {
        0.0
    }
}

/// Closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ALL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Panics if `lo > hi` or either endpoint is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval with lo > hi: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(z: f64) -> Self {
        Interval { lo: z, hi: z }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Length of the interval; infinite when either end is unbounded.
    pub fn width(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            self.hi - self.lo
        } else {
            f64::INFINITY
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Clip to `[lo, hi]`, returning `None` when disjoint.
    pub fn clip(&self, lo: f64, hi: f64) -> Option<Interval> {
        self.intersect(&Interval { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Sorted union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { parts: Vec::new() }
    }

    pub fn all() -> Self {
        IntervalSet::from(Interval::ALL)
    }

    /// Build from arbitrary (possibly overlapping, unsorted) intervals.
    pub fn from_intervals<I: IntoIterator<Item = Interval>>(iter: I) -> Self {
        let mut parts: Vec<Interval> = iter.into_iter().collect();
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for iv in parts {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi + merge_tol(last.hi) => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        IntervalSet { parts: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn contains(&self, x: f64) -> bool {
        // parts are sorted and disjoint
        let idx = self.parts.partition_point(|iv| iv.hi < x);
        self.parts.get(idx).is_some_and(|iv| iv.contains(x))
    }

    /// Total Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.parts.iter().map(Interval::width).sum()
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_intervals(self.parts.iter().chain(other.parts.iter()).copied())
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.parts.len() && j < other.parts.len() {
            let a = self.parts[i];
            let b = other.parts[j];
            if let Some(iv) = a.intersect(&b) {
                out.push(iv);
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::from_intervals(out)
    }

    /// Closure of the complement `R \ self`.
    pub fn closure_complement(&self) -> IntervalSet {
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        let mut cursor = f64::NEG_INFINITY;
        for iv in &self.parts {
            if iv.lo > cursor || (cursor == f64::NEG_INFINITY && iv.lo > f64::NEG_INFINITY) {
                out.push(Interval::new(cursor, iv.lo));
            }
            cursor = iv.hi;
        }
        if cursor < f64::INFINITY {
            out.push(Interval::new(cursor, f64::INFINITY));
        }
        IntervalSet::from_intervals(out)
    }

    /// The component containing `z`, allowing `z` to sit up to `tol` outside
    /// a component (the returned interval is then widened to include `z`).
    pub fn component_near(&self, z: f64, tol: f64) -> Option<Interval> {
        let idx = self.parts.partition_point(|iv| iv.hi < z);
        if let Some(iv) = self.parts.get(idx) {
            if iv.contains(z) {
                return Some(*iv);
            }
        }
        let mut best: Option<(f64, Interval)> = None;
        for k in [idx.wrapping_sub(1), idx] {
            if let Some(iv) = self.parts.get(k) {
                let gap = if z < iv.lo { iv.lo - z } else { z - iv.hi };
                if gap <= tol && best.is_none_or(|(g, _)| gap < g) {
                    best = Some((gap, *iv));
                }
            }
        }
        best.map(|(_, iv)| Interval {
            lo: iv.lo.min(z),
            hi: iv.hi.max(z),
        })
    }

    /// Clip every part to `[lo, hi]`.
    pub fn clip(&self, lo: f64, hi: f64) -> IntervalSet {
        self.intersect(&IntervalSet::from(Interval::new(lo, hi)))
    }
}

impl From<Interval> for IntervalSet {
    fn from(iv: Interval) -> Self {
        IntervalSet { parts: vec![iv] }
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "{{}}");
        }
        for (k, iv) in self.parts.iter().enumerate() {
            if k > 0 {
                write!(f, " U ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

/// Set intersection of two normalized interval sets.
pub fn interval_intersect(s1: &IntervalSet, s2: &IntervalSet) -> IntervalSet {
    s1.intersect(s2)
}

/// Set union of two normalized interval sets, merging abutting endpoints.
pub fn interval_union(s1: &IntervalSet, s2: &IntervalSet) -> IntervalSet {
    s1.union(s2)
}
