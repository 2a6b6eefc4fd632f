//! Union / intersection of the outputs of several branches.

use crate::error::{Error, Result};
use crate::graph::Component;
use crate::state::SelectionState;

/// Combine parent states for an aggregate node.
///
/// The combined set is the union or intersection of `O` (or `M`); the other
/// fields must agree across parents. The interval is `[max l_e, min u_e]`.
pub fn aggregate(component: &Component, states: &[&SelectionState]) -> Result<SelectionState> {
    let (on_outliers, union) = match component {
        Component::UnionO => (true, true),
        Component::IntersectO => (true, false),
        Component::UnionM => (false, true),
        Component::IntersectM => (false, false),
        other => {
            return Err(Error::Inconsistent(format!(
                "{} is not an aggregate",
                other.kind_name()
            )))
        }
    };
    let first = *states
        .first()
        .ok_or_else(|| Error::Inconsistent("aggregate without inputs".into()))?;
    let mut out = first.clone();
    for s in &states[1..] {
        let agree = if on_outliers {
            s.features == first.features
        } else {
            s.outliers == first.outliers
        };
        if !agree || s.labels != first.labels || s.clustered != first.clustered {
            return Err(Error::Inconsistent(format!(
                "{} inputs disagree outside the combined set",
                component.kind_name()
            )));
        }
        let (dst, src) = if on_outliers {
            (&mut out.outliers, &s.outliers)
        } else {
            (&mut out.features, &s.features)
        };
        for (x, &y) in dst.iter_mut().zip(src) {
            *x = if union { *x || y } else { *x && y };
        }
        out.lo = out.lo.max(s.lo);
        out.hi = out.hi.min(s.hi);
    }
    Ok(out)
}

/// Union or intersection of outlier sets.
pub fn aggregate_o(states: &[&SelectionState], union: bool) -> Result<SelectionState> {
    let c = if union { Component::UnionO } else { Component::IntersectO };
    aggregate(&c, states)
}

/// Union or intersection of feature sets.
pub fn aggregate_m(states: &[&SelectionState], union: bool) -> Result<SelectionState> {
    let c = if union { Component::UnionM } else { Component::IntersectM };
    aggregate(&c, states)
}
