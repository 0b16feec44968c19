//! Reverse construction of the decision skeleton of a GS-DAG.
//!
//! Nodes are built from the last decisions backwards. Every node is keyed by
//! `(label, future \ label)`, where the future is the set of decisions on
//! the paths from the node to the sink, label included. Parents of a node
//! are the co-free decisions whose not-yet-placed observable consequences
//! (Ω) are minimal; decisions with equal Ω share one parent node.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Uid, VarId};
use crate::relevance;

pub type DecisionSet = BTreeSet<VarId>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonNode {
    pub label: DecisionSet,
    pub future: DecisionSet,
    /// Observables released when the label is completed.
    pub released: BTreeSet<VarId>,
    /// Nodes that come right before this one in time.
    pub parents: Vec<usize>,
    /// Nodes that come right after this one in time.
    pub children: Vec<usize>,
}

impl SkeletonNode {
    pub fn key(&self) -> (DecisionSet, DecisionSet) {
        (self.label.clone(), self.future.difference(&self.label).copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub nodes: Vec<SkeletonNode>,
    pub sink: usize,
}

/// A proposed parent: a group of co-free decisions with equal Ω.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentCandidate {
    pub label: DecisionSet,
    pub future: DecisionSet,
    pub omega: BTreeSet<VarId>,
}

impl Skeleton {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).sum()
    }

    /// Nodes without parents, i.e. possible first decisions.
    pub fn sources(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].parents.is_empty()).collect()
    }

    pub fn find(&self, label: &DecisionSet, future: &DecisionSet) -> Option<usize> {
        self.nodes.iter().position(|n| &n.label == label && &n.future == future)
    }

    /// Every maximal path from `from` to a sink, following children.
    pub fn paths_from(&self, from: usize) -> Vec<Vec<usize>> {
        let node = &self.nodes[from];
        if node.children.is_empty() {
            return vec![vec![from]];
        }
        let mut out = Vec::new();
        for &c in &node.children {
            for mut tail in self.paths_from(c) {
                tail.insert(0, from);
                out.push(tail);
            }
        }
        out
    }
}

/// Observables whose decision ancestors meet `future`; they are placed
/// somewhere on the paths below a node with that future.
pub fn future_observables(uid: &Uid, future: &DecisionSet) -> BTreeSet<VarId> {
    uid.observables()
        .into_iter()
        .filter(|&o| !uid.decision_ancestors(o).is_disjoint(future))
        .collect()
}

/// Observables released by completing `label` when `after` is still to come.
pub fn released_by(uid: &Uid, label: &DecisionSet, after: &DecisionSet) -> BTreeSet<VarId> {
    uid.observables()
        .into_iter()
        .filter(|&o| {
            let anc = uid.decision_ancestors(o);
            !anc.is_disjoint(label) && anc.is_disjoint(after)
        })
        .collect()
}

/// Decisions with no observable descendants; they can always go last.
pub fn free_decisions(uid: &Uid) -> DecisionSet {
    uid.decisions()
        .into_iter()
        .filter(|&d| uid.observable_descendants(d).is_empty())
        .collect()
}

/// Candidate parents for a node with the given future.
pub fn find_parents(uid: &Uid, future: &DecisionSet) -> Vec<ParentCandidate> {
    let placed = future_observables(uid, future);
    let mut cands: Vec<(VarId, BTreeSet<VarId>)> = uid
        .decisions()
        .into_iter()
        .filter(|d| !future.contains(d))
        .filter(|&d| uid.decision_descendants(d).is_subset(future))
        .map(|d| {
            let omega = uid.observable_descendants(d).difference(&placed).copied().collect();
            (d, omega)
        })
        .collect();

    let dominated: BTreeSet<VarId> = cands
        .iter()
        .filter(|(_, om)| cands.iter().any(|(_, other)| other.len() < om.len() && other.is_subset(om)))
        .map(|(d, _)| *d)
        .collect();
    cands.retain(|(d, _)| !dominated.contains(d));

    let mut groups: BTreeMap<BTreeSet<VarId>, DecisionSet> = BTreeMap::new();
    for (d, om) in cands {
        groups.entry(om).or_default().insert(d);
    }
    let mut out: Vec<ParentCandidate> = groups
        .into_iter()
        .map(|(omega, label)| ParentCandidate {
            future: future.union(&label).copied().collect(),
            label,
            omega,
        })
        .collect();
    out.sort_by(|a, b| a.label.cmp(&b.label));
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    pub trim_relevance: bool,
}

/// Build the skeleton from the sink `[free, ∅]` backwards.
///
/// Nodes are processed in order of increasing future size (creation order
/// within a size), so every node's set of children is complete when it is
/// processed.
pub fn build_skeleton(uid: &Uid, opts: BuildOptions) -> Skeleton {
    let all: DecisionSet = uid.decisions().into_iter().collect();
    let free = free_decisions(uid);
    let mut sk = Skeleton {
        nodes: vec![SkeletonNode {
            released: released_by(uid, &free, &BTreeSet::new()),
            label: free.clone(),
            future: free,
            parents: vec![],
            children: vec![],
        }],
        sink: 0,
    };
    let mut index: BTreeMap<(DecisionSet, DecisionSet), usize> = BTreeMap::new();
    index.insert(sk.nodes[0].key(), 0);
    let mut queue: BTreeSet<(usize, usize)> = BTreeSet::from([(sk.nodes[0].future.len(), 0)]);

    while let Some((_, p)) = queue.pop_first() {
        if sk.nodes[p].future == all {
            continue;
        }
        let mut cands = find_parents(uid, &sk.nodes[p].future);
        if opts.trim_relevance && cands.len() > 1 {
            cands = relevance::trim_candidates(uid, &sk, p, cands);
        }
        for c in cands {
            let after: DecisionSet = c.future.difference(&c.label).copied().collect();
            let key = (c.label.clone(), after.clone());
            let parent = match index.get(&key) {
                Some(&i) => i,
                None => {
                    let i = sk.nodes.len();
                    sk.nodes.push(SkeletonNode {
                        released: released_by(uid, &c.label, &after),
                        label: c.label,
                        future: c.future,
                        parents: vec![],
                        children: vec![],
                    });
                    index.insert(key, i);
                    queue.insert((sk.nodes[i].future.len(), i));
                    i
                }
            };
            if !sk.nodes[parent].children.contains(&p) {
                sk.nodes[parent].children.push(p);
                sk.nodes[p].parents.push(parent);
            }
        }
    }
    sk
}
