//! Requisite-past analysis and relevance-based trimming of skeleton parents.
//!
//! A past variable `A` is requisite for a decision `D` when some utility
//! descendant of `D` is d-connected to `A` given the rest of `D`'s past.
//! Informational arcs into decisions are removed before testing; decisions
//! later in the ordering are then analysed first and re-attached to their
//! own requisite sets, exactly as a decision is replaced by a chance node
//! whose parents are its requisite past.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::model::{Uid, VarId, VarKind};
use crate::order::{is_admissible_with, released_observables, temporal_order, PartialOrder};
use crate::skeleton::{DecisionSet, ParentCandidate, Skeleton};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequisiteQuery {
    pub ordering: Vec<VarId>,
    pub target: VarId,
}

/// A DAG given by parent lists.
#[derive(Debug, Clone)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(parents: Vec<Vec<usize>>) -> Self {
        let mut children = vec![Vec::new(); parents.len()];
        for (v, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(v);
            }
        }
        Dag { parents, children }
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = self.children[v].clone();
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend(&self.children[x]);
            }
        }
        seen
    }

    /// Nodes connected to `source` by an active trail given `observed`
    /// (Bayes-ball). The source itself is included.
    pub fn reachable(&self, source: usize, observed: &[bool]) -> Vec<bool> {
        let n = self.len();
        // ancestors of the evidence, evidence included
        let mut anc = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&v| observed[v]).collect();
        while let Some(v) = stack.pop() {
            if !anc[v] {
                anc[v] = true;
                stack.extend(&self.parents[v]);
            }
        }
        // (node, arrived from a child)
        let mut visited = vec![[false; 2]; n];
        let mut reach = vec![false; n];
        let mut queue = VecDeque::from([(source, true)]);
        while let Some((y, up)) = queue.pop_front() {
            let slot = usize::from(up);
            if visited[y][slot] {
                continue;
            }
            visited[y][slot] = true;
            if !observed[y] {
                reach[y] = true;
            }
            if up {
                if !observed[y] {
                    queue.extend(self.parents[y].iter().map(|&p| (p, true)));
                    queue.extend(self.children[y].iter().map(|&c| (c, false)));
                }
            } else {
                if !observed[y] {
                    queue.extend(self.children[y].iter().map(|&c| (c, false)));
                }
                if anc[y] {
                    queue.extend(self.parents[y].iter().map(|&p| (p, true)));
                }
            }
        }
        reach
    }
}

/// Requisite past of `q.target` under the ordering `q.ordering`.
pub fn requisite_set(uid: &Uid, q: &RequisiteQuery) -> Result<BTreeSet<VarId>> {
    let order = temporal_order(uid);
    if !is_admissible_with(uid, &order, &q.ordering) {
        return Err(Error::InvalidQuery("ordering is not admissible".into()));
    }
    if uid.kind(q.target) != VarKind::Decision || !q.ordering.contains(&q.target) {
        return Err(Error::InvalidQuery(format!("{} is not a decision of the ordering", uid.name(q.target))));
    }
    Ok(requisite_unchecked(uid, &q.ordering, q.target))
}

/// [`requisite_set`] without validating the query.
pub fn requisite_unchecked(uid: &Uid, ordering: &[VarId], target: VarId) -> BTreeSet<VarId> {
    let mut parents: Vec<Vec<usize>> = uid
        .ids()
        .map(|v| match uid.kind(v) {
            VarKind::Decision => Vec::new(),
            _ => uid.parents(v).iter().map(|p| p.0).collect(),
        })
        .collect();
    let pos = ordering.iter().position(|&v| v == target).expect("target in ordering");
    for i in (pos + 1..ordering.len()).rev() {
        let d = ordering[i];
        if uid.kind(d) != VarKind::Decision {
            continue;
        }
        let req = requisite_in(uid, &Dag::new(parents.clone()), &ordering[..i], d);
        parents[d.0] = req.iter().map(|v| v.0).collect();
    }
    requisite_in(uid, &Dag::new(parents), &ordering[..pos], target)
}

fn requisite_in(uid: &Uid, g: &Dag, past: &[VarId], target: VarId) -> BTreeSet<VarId> {
    let utilities: Vec<usize> = g
        .descendants(target.0)
        .into_iter()
        .filter(|&v| uid.kind(VarId(v)) == VarKind::Utility)
        .collect();
    if utilities.is_empty() {
        return BTreeSet::new();
    }
    let mut observed = vec![false; g.len()];
    for v in past {
        observed[v.0] = true;
    }
    let mut out = BTreeSet::new();
    for &a in past {
        observed[a.0] = false;
        let reach = g.reachable(a.0, &observed);
        observed[a.0] = true;
        if utilities.iter().any(|&u| reach[u]) {
            out.insert(a);
        }
    }
    out
}

/// Drop parent candidates whose placement right before the node is made
/// unnecessary by another candidate.
///
/// `c2` is removable by `c1` when, for every path from `node` in the partial
/// skeleton, neither `c1`'s decisions nor the observables they release are
/// requisite for `c2` in the ordering `past, c1, O1, c2, O2, path`.
/// Removal proceeds from the highest-id candidate down and always leaves at
/// least one candidate; when all are mutually removable the lowest-id one
/// survives.
pub fn trim_candidates(uid: &Uid, sk: &Skeleton, node: usize, candidates: Vec<ParentCandidate>) -> Vec<ParentCandidate> {
    if candidates.len() < 2 {
        return candidates;
    }
    let order = temporal_order(uid);
    let paths = sk.paths_from(node);
    let n = candidates.len();
    let mut removes = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                removes[i][j] = is_removable(uid, &order, sk, node, &paths, &candidates[i], &candidates[j]);
            }
        }
    }
    let mut kept = vec![true; n];
    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_by_key(|&i| candidates[i].label.iter().next().copied());
    for &j in by_id.iter().rev() {
        if (0..n).any(|i| i != j && kept[i] && removes[i][j]) {
            kept[j] = false;
        }
    }
    candidates
        .into_iter()
        .zip(kept)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

fn is_removable(
    uid: &Uid,
    order: &PartialOrder,
    sk: &Skeleton,
    node: usize,
    paths: &[Vec<usize>],
    c1: &ParentCandidate,
    c2: &ParentCandidate,
) -> bool {
    let future = &sk.nodes[node].future;
    let s: DecisionSet = uid
        .decisions()
        .into_iter()
        .filter(|d| !future.contains(d) && !c1.label.contains(d) && !c2.label.contains(d))
        .collect();
    let past_obs = released_observables(uid, &s);
    let s1: DecisionSet = s.union(&c1.label).copied().collect();
    let rel1 = released_observables(uid, &s1);
    let s12: DecisionSet = s1.union(&c2.label).copied().collect();
    let rel12 = released_observables(uid, &s12);
    let o1: BTreeSet<VarId> = rel1.difference(&past_obs).copied().collect();
    let o2: BTreeSet<VarId> = rel12.difference(&rel1).copied().collect();

    let mut prefix = order.linearize(&s.union(&past_obs).copied().collect());
    prefix.extend(c1.label.iter().copied());
    prefix.extend(o1.iter().copied());
    prefix.extend(c2.label.iter().copied());
    prefix.extend(o2.iter().copied());

    let watched: BTreeSet<VarId> = c1.label.union(&o1).copied().collect();
    for path in paths {
        let mut seq = prefix.clone();
        for &k in path {
            seq.extend(order.linearize(&sk.nodes[k].label));
            seq.extend(sk.nodes[k].released.iter().copied());
        }
        debug_assert!(is_admissible_with(uid, order, &seq));
        for &d in &c2.label {
            if !requisite_unchecked(uid, &seq, d).is_disjoint(&watched) {
                return false;
            }
        }
    }
    true
}
