//! The partial temporal order induced by a diagram and observable release.

use std::collections::BTreeSet;

use crate::model::{Uid, VarId, VarKind};

/// Strict partial order over decisions and observables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialOrder {
    n: usize,
    vars: Vec<VarId>,
    rel: Vec<bool>,
}

impl PartialOrder {
    /// `a ≺ b`.
    pub fn precedes(&self, a: VarId, b: VarId) -> bool {
        self.rel[a.0 * self.n + b.0]
    }

    /// The decisions and observables the order ranges over.
    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn pairs(&self) -> Vec<(VarId, VarId)> {
        let mut out = Vec::new();
        for &a in &self.vars {
            for &b in &self.vars {
                if self.precedes(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        !self.rel.iter().any(|&r| r)
    }

    /// Sort `items` into a sequence compatible with the order (ties by id).
    pub fn linearize(&self, items: &BTreeSet<VarId>) -> Vec<VarId> {
        let mut left = items.clone();
        let mut out = Vec::with_capacity(items.len());
        while !left.is_empty() {
            let next = *left
                .iter()
                .find(|&&v| !left.iter().any(|&u| u != v && self.precedes(u, v)))
                .expect("a strict partial order always has a minimal element");
            left.remove(&next);
            out.push(next);
        }
        out
    }
}

/// Smallest transitively closed relation containing `X ≺ D` for every arc
/// into a decision `D` from a decision or observable `X`, and `D ≺ O` for
/// every decision `D` that is a graph ancestor of an observable `O`.
pub fn temporal_order(uid: &Uid) -> PartialOrder {
    let n = uid.len();
    let mut rel = vec![false; n * n];
    for d in uid.decisions() {
        for &x in uid.parents(d) {
            if uid.kind(x).is_temporal() {
                rel[x.0 * n + d.0] = true;
            }
        }
        for &o in uid.descendants(d) {
            if uid.kind(o) == VarKind::ChanceObservable {
                rel[d.0 * n + o.0] = true;
            }
        }
    }
    // Warshall
    for k in 0..n {
        for i in 0..n {
            if rel[i * n + k] {
                for j in 0..n {
                    if rel[k * n + j] {
                        rel[i * n + j] = true;
                    }
                }
            }
        }
    }
    PartialOrder { n, vars: uid.temporal_vars(), rel }
}

/// Observables all of whose decision ancestors lie in `decided`.
pub fn released_observables(uid: &Uid, decided: &BTreeSet<VarId>) -> BTreeSet<VarId> {
    uid.observables()
        .into_iter()
        .filter(|&o| uid.decision_ancestors(o).is_subset(decided))
        .collect()
}

/// True iff `sequence` is a permutation of all decisions and observables
/// that extends the temporal order.
pub fn is_admissible(uid: &Uid, sequence: &[VarId]) -> bool {
    is_admissible_with(uid, &temporal_order(uid), sequence)
}

pub fn is_admissible_with(uid: &Uid, order: &PartialOrder, sequence: &[VarId]) -> bool {
    let expected: BTreeSet<VarId> = uid.temporal_vars().into_iter().collect();
    let seen: BTreeSet<VarId> = sequence.iter().copied().collect();
    if seen.len() != sequence.len() || seen != expected {
        return false;
    }
    for (i, &a) in sequence.iter().enumerate() {
        for &b in &sequence[..i] {
            if order.precedes(a, b) {
                return false;
            }
        }
    }
    true
}
