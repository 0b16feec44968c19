//! Normal-form S-DAGs expanded from a skeleton, and DOT export.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Uid, VarId, VarKind};
use crate::order::PartialOrder;
use crate::skeleton::Skeleton;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Decision,
    Observation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdagNode {
    pub kind: NodeKind,
    /// Sorted by variable id.
    pub label: Vec<VarId>,
    pub children: Vec<NodeId>,
    pub parents: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SDag {
    pub nodes: Vec<SdagNode>,
    pub root: NodeId,
}

impl SDag {
    pub fn node(&self, id: NodeId) -> &SdagNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn sinks(&self) -> Vec<NodeId> {
        self.ids().filter(|&n| self.node(n).children.is_empty()).collect()
    }

    /// Nodes ordered so that every node comes after all of its children.
    pub fn children_first(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut state = vec![0u8; self.nodes.len()];
        // iterative DFS post-order
        let mut stack = vec![(self.root, 0usize)];
        state[self.root.0] = 1;
        while let Some((n, i)) = stack.pop() {
            let ch = &self.node(n).children;
            if i < ch.len() {
                stack.push((n, i + 1));
                let c = ch[i];
                if state[c.0] == 0 {
                    state[c.0] = 1;
                    stack.push((c, 0));
                }
            } else {
                state[n.0] = 2;
                out.push(n);
            }
        }
        out
    }

    /// Every maximal root-to-sink path.
    pub fn paths(&self) -> Vec<Vec<NodeId>> {
        fn walk(g: &SDag, n: NodeId, prefix: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
            prefix.push(n);
            let ch = &g.node(n).children;
            if ch.is_empty() {
                out.push(prefix.clone());
            }
            for &c in ch {
                walk(g, c, prefix, out);
            }
            prefix.pop();
        }
        let mut out = Vec::new();
        walk(self, self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Flatten a path into a variable sequence; labels are linearised
    /// with respect to the temporal order.
    pub fn path_sequence(&self, order: &PartialOrder, path: &[NodeId]) -> Vec<VarId> {
        path.iter()
            .flat_map(|&n| {
                let label: BTreeSet<VarId> = self.node(n).label.iter().copied().collect();
                order.linearize(&label)
            })
            .collect()
    }
}

/// Interpose observation nodes for the releases of every skeleton node and
/// put a root observation node (observables with no decision ancestors) in
/// front of the skeleton sources.
pub fn expand_normal_form(uid: &Uid, sk: &Skeleton) -> SDag {
    let initial: Vec<VarId> = uid
        .observables()
        .into_iter()
        .filter(|&o| uid.decision_ancestors(o).is_empty())
        .collect();
    let mut nodes = vec![SdagNode { kind: NodeKind::Observation, label: initial, children: vec![], parents: vec![] }];
    let mut entry = Vec::with_capacity(sk.len());
    let mut exit = Vec::with_capacity(sk.len());
    for n in &sk.nodes {
        let d = NodeId(nodes.len());
        nodes.push(SdagNode {
            kind: NodeKind::Decision,
            label: n.label.iter().copied().collect(),
            children: vec![],
            parents: vec![],
        });
        entry.push(d);
        if n.released.is_empty() {
            exit.push(d);
        } else {
            let o = NodeId(nodes.len());
            nodes.push(SdagNode {
                kind: NodeKind::Observation,
                label: n.released.iter().copied().collect(),
                children: vec![],
                parents: vec![d],
            });
            nodes[d.0].children.push(o);
            exit.push(o);
        }
    }
    let mut link = |from: NodeId, to: NodeId| {
        nodes[from.0].children.push(to);
        nodes[to.0].parents.push(from);
    };
    for s in sk.sources() {
        link(NodeId(0), entry[s]);
    }
    for (i, n) in sk.nodes.iter().enumerate() {
        for &c in &n.children {
            link(exit[i], entry[c]);
        }
    }
    SDag { nodes, root: NodeId(0) }
}

fn label_text(uid: &Uid, label: impl IntoIterator<Item = VarId>) -> String {
    let names = uid.names(label);
    if names.is_empty() {
        "∅".to_string()
    } else {
        names.join(",")
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn skeleton_dot(uid: &Uid, sk: &Skeleton) -> String {
    let mut out = String::from("digraph skeleton {\n  rankdir=LR;\n  node [shape=box];\n");
    for (i, n) in sk.nodes.iter().enumerate() {
        let after: Vec<VarId> = n.future.difference(&n.label).copied().collect();
        let text = format!("{} | {}", label_text(uid, n.label.iter().copied()), label_text(uid, after));
        let _ = writeln!(out, "  n{i} [label=\"{}\"];", escape(&text));
    }
    for (i, n) in sk.nodes.iter().enumerate() {
        for c in &n.children {
            let _ = writeln!(out, "  n{i} -> n{c};");
        }
    }
    out.push_str("}\n");
    out
}

pub fn sdag_dot(uid: &Uid, g: &SDag) -> String {
    let mut out = String::from("digraph sdag {\n  rankdir=LR;\n");
    for id in g.ids() {
        let n = g.node(id);
        let shape = match n.kind {
            NodeKind::Decision => "box",
            NodeKind::Observation => "doublecircle",
        };
        let text = label_text(uid, n.label.iter().copied());
        let _ = writeln!(out, "  n{} [shape={shape}, label=\"{}\"];", id.0, escape(&text));
    }
    for id in g.ids() {
        for c in &g.node(id).children {
            let _ = writeln!(out, "  n{} -> n{};", id.0, c.0);
        }
    }
    out.push_str("}\n");
    out
}

/// Check the structural S-DAG invariants; returns a description of each
/// breach.
pub fn check_normal_form(uid: &Uid, order: &PartialOrder, g: &SDag) -> Vec<String> {
    let mut problems = Vec::new();
    for id in g.ids() {
        let n = g.node(id);
        let want = match n.kind {
            NodeKind::Decision => VarKind::Decision,
            NodeKind::Observation => VarKind::ChanceObservable,
        };
        if n.label.iter().any(|&v| uid.kind(v) != want) {
            problems.push(format!("node {} mixes variable kinds", id.0));
        }
        if n.kind == NodeKind::Observation {
            if id != g.root && n.label.is_empty() {
                problems.push(format!("observation node {} has an empty label", id.0));
            }
            if n.children.iter().any(|c| g.node(*c).kind != NodeKind::Decision) {
                problems.push(format!("observation node {} has a non-decision child", id.0));
            }
            for p in &n.parents {
                let ok = n.label.iter().all(|&o| {
                    g.node(*p).label.iter().any(|&d| order.precedes(d, o))
                });
                if !ok {
                    problems.push(format!("observation node {} not released by parent {}", id.0, p.0));
                }
            }
        }
    }
    problems
}
