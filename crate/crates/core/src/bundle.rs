//! Self-contained strategy documents: the model, the S-DAG, every policy
//! and step policy (with the tables they were maximised from) and the MEU.
//!
//! Variables are referred to by their model ids and S-DAG nodes by index,
//! so a consumer needs nothing but this one file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Uid, UidDocument, VarId, VarKind};
use crate::sdag::{NodeId, NodeKind, SDag, SdagNode};
use crate::solver::{PolicyTable, SolveStats, Strategy, StepPolicy};

pub const FORMAT: &str = "gsdag-strategy";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyBundle {
    pub format: String,
    pub version: u32,
    pub model: UidDocument,
    pub sdag: SdagDoc,
    pub policies: Vec<PolicyDoc>,
    pub step_policies: Vec<StepPolicyDoc>,
    pub meu: f64,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdagDoc {
    pub root: usize,
    pub nodes: Vec<SdagNodeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdagNodeDoc {
    pub id: usize,
    pub kind: NodeKind,
    pub label: Vec<String>,
    /// Execution order of the label; decision nodes only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order: Vec<String>,
    pub children: Vec<usize>,
    pub parents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDoc {
    pub node: usize,
    pub decision: String,
    pub domain: Vec<String>,
    pub choices: Vec<usize>,
    /// Table over `domain` followed by `decision`, before maximisation.
    #[serde(default)]
    pub expected: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPolicyDoc {
    pub node: usize,
    pub domain: Vec<String>,
    pub choices: Vec<usize>,
    /// One table over `domain` per child of `node`, in child order.
    #[serde(default)]
    pub branch_values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub tool_version: String,
    pub created_unix: u64,
    pub flags: BTreeMap<String, bool>,
}

impl Meta {
    pub fn now(flags: BTreeMap<String, bool>) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Meta {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            flags,
        }
    }
}

impl StrategyBundle {
    pub fn from_strategy(uid: &Uid, s: &Strategy, meta: Meta) -> Self {
        let names = |vs: &[VarId]| vs.iter().map(|v| uid.var(*v).id.clone()).collect::<Vec<_>>();
        let nodes = s
            .sdag
            .ids()
            .map(|id| {
                let n = s.sdag.node(id);
                SdagNodeDoc {
                    id: id.0,
                    kind: n.kind,
                    label: names(&n.label),
                    order: s.decision_order.get(&id).map(|o| names(o)).unwrap_or_default(),
                    children: n.children.iter().map(|c| c.0).collect(),
                    parents: n.parents.iter().map(|c| c.0).collect(),
                }
            })
            .collect();
        StrategyBundle {
            format: FORMAT.to_string(),
            version: FORMAT_VERSION,
            model: uid.to_document(),
            sdag: SdagDoc { root: s.sdag.root.0, nodes },
            policies: s
                .policies
                .iter()
                .map(|p| PolicyDoc {
                    node: p.node.0,
                    decision: uid.var(p.decision).id.clone(),
                    domain: names(&p.domain),
                    choices: p.choices.clone(),
                    expected: p.expected.clone(),
                })
                .collect(),
            step_policies: s
                .step_policies
                .iter()
                .map(|p| StepPolicyDoc {
                    node: p.node.0,
                    domain: names(&p.domain),
                    choices: p.choices.iter().map(|c| c.0).collect(),
                    branch_values: p.branch_values.clone(),
                })
                .collect(),
            meu: s.meu,
            meta,
        }
    }

    /// Rebuild the model and strategy, checking every reference.
    pub fn to_strategy(&self) -> Result<(Uid, Strategy)> {
        if self.format != FORMAT {
            return Err(Error::StrategyMismatch(format!("unknown bundle format `{}`", self.format)));
        }
        let uid = Uid::from_document(self.model.clone())?;
        let violations = crate::model::validate(&uid);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        let mismatch = |m: String| Error::StrategyMismatch(m);
        let var = |name: &str| uid.id_of(name).ok_or_else(|| mismatch(format!("unknown variable `{name}`")));
        let vars = |names: &[String]| names.iter().map(|n| var(n)).collect::<Result<Vec<_>>>();
        let n = self.sdag.nodes.len();
        let node = |i: usize| if i < n { Ok(NodeId(i)) } else { Err(mismatch(format!("unknown node {i}"))) };

        let mut nodes = Vec::with_capacity(n);
        let mut decision_order = BTreeMap::new();
        for (i, d) in self.sdag.nodes.iter().enumerate() {
            if d.id != i {
                return Err(mismatch(format!("node {} stored at position {i}", d.id)));
            }
            let label = vars(&d.label)?;
            let want = match d.kind {
                NodeKind::Decision => VarKind::Decision,
                NodeKind::Observation => VarKind::ChanceObservable,
            };
            if label.iter().any(|v| uid.kind(*v) != want) {
                return Err(mismatch(format!("node {i} label has the wrong kind")));
            }
            if d.kind == NodeKind::Decision {
                let order = vars(&d.order)?;
                let mut a = order.clone();
                let mut b = label.clone();
                a.sort();
                b.sort();
                if a != b {
                    return Err(mismatch(format!("node {i} order does not cover its label")));
                }
                decision_order.insert(NodeId(i), order);
            }
            nodes.push(SdagNode {
                kind: d.kind,
                label,
                children: d.children.iter().map(|&c| node(c)).collect::<Result<_>>()?,
                parents: d.parents.iter().map(|&c| node(c)).collect::<Result<_>>()?,
            });
        }
        let sdag = SDag { nodes, root: node(self.sdag.root)? };

        let table_len = |dom: &[VarId]| dom.iter().map(|v| uid.card(*v)).product::<usize>();
        let mut policies = Vec::with_capacity(self.policies.len());
        for p in &self.policies {
            let at = node(p.node)?;
            let decision = var(&p.decision)?;
            let domain = vars(&p.domain)?;
            if !sdag.node(at).label.contains(&decision) {
                return Err(mismatch(format!("{} is not decided at node {}", p.decision, p.node)));
            }
            if p.choices.len() != table_len(&domain) || p.choices.iter().any(|&c| c >= uid.card(decision)) {
                return Err(mismatch(format!("malformed policy table for {}", p.decision)));
            }
            policies.push(PolicyTable { node: at, decision, domain, choices: p.choices.clone(), expected: p.expected.clone() });
        }
        let mut step_policies = Vec::with_capacity(self.step_policies.len());
        for p in &self.step_policies {
            let at = node(p.node)?;
            let domain = vars(&p.domain)?;
            let choices = p.choices.iter().map(|&c| node(c)).collect::<Result<Vec<_>>>()?;
            if choices.len() != table_len(&domain) || choices.iter().any(|c| !sdag.node(at).children.contains(c)) {
                return Err(mismatch(format!("malformed step policy at node {}", p.node)));
            }
            step_policies.push(StepPolicy { node: at, domain, choices, branch_values: p.branch_values.clone() });
        }
        for id in sdag.ids() {
            let nd = sdag.node(id);
            if nd.children.len() > 1 && !step_policies.iter().any(|p| p.node == id) {
                return Err(mismatch(format!("branching node {} has no step policy", id.0)));
            }
            if nd.kind == NodeKind::Decision {
                for d in &nd.label {
                    if !policies.iter().any(|p| p.node == id && p.decision == *d) {
                        return Err(mismatch(format!("no policy for {} at node {}", uid.name(*d), id.0)));
                    }
                }
            }
        }
        let strategy = Strategy { sdag, policies, step_policies, decision_order, meu: self.meu, stats: SolveStats::default() };
        Ok((uid, strategy))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundles always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::strategy_eu;
    use crate::solver::{solve_uid, SolveOptions};

    fn bundle_of(uid: &Uid) -> (Strategy, StrategyBundle) {
        let s = solve_uid(uid, SolveOptions::default()).unwrap();
        let meta = Meta { tool: "t".into(), tool_version: "0".into(), created_unix: 0, flags: BTreeMap::new() };
        let b = StrategyBundle::from_strategy(uid, &s, meta);
        (s, b)
    }

    #[test]
    fn round_trip_rescores() {
        for uid in [fixtures::four_decisions(), fixtures::king()] {
            let (s, b) = bundle_of(&uid);
            let again = StrategyBundle::from_json(&b.to_json()).unwrap();
            assert_eq!(again, b);
            let (uid2, s2) = again.to_strategy().unwrap();
            assert_eq!(uid2, uid);
            assert_eq!(s2.sdag, s.sdag);
            assert_eq!(s2.policies, s.policies);
            let eu = strategy_eu(&uid2, &s2).unwrap();
            assert!((eu - s.meu).abs() <= 1e-9 * (1.0 + s.meu.abs()));
        }
    }

    #[test]
    fn deterministic_payload() {
        let uid = fixtures::king();
        assert_eq!(bundle_of(&uid).1.to_json(), bundle_of(&uid).1.to_json());
    }

    #[test]
    fn missing_policy_rejected() {
        let (_, mut b) = bundle_of(&fixtures::four_decisions());
        b.policies.pop();
        assert!(matches!(b.to_strategy(), Err(Error::StrategyMismatch(_))));
    }

    #[test]
    fn foreign_step_choice_rejected() {
        let (_, mut b) = bundle_of(&fixtures::four_decisions());
        b.step_policies[0].choices[0] = b.sdag.root;
        assert!(b.to_strategy().is_err());
    }
}
