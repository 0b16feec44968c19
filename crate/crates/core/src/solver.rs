//! Reverse elimination over a normal-form S-DAG.
//!
//! Hidden chance variables are summed out first. The S-DAG is then swept
//! from the sinks towards the root; each node's potential sets are computed
//! once and shared by all of its parents. Where a node has several children
//! their results are unified: the probability sets must agree, and the
//! utility sets are merged by a pointwise maximum that also yields the step
//! policy for the node.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Uid, VarId};
use crate::order::{temporal_order, PartialOrder};
use crate::potential::{
    self, approx_equal, divide, envelope_max, max_out, multiply, sum_out, Potential, PotentialKind,
    PotentialSets, Provenance, MERGE_TOLERANCE,
};
use crate::sdag::{expand_normal_form, NodeId, NodeKind, SDag};
use crate::skeleton::{build_skeleton, BuildOptions};

/// Choice of a decision state as a function of the relevant past.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub node: NodeId,
    pub decision: VarId,
    pub domain: Vec<VarId>,
    pub choices: Vec<usize>,
    /// The maximised table over `domain` followed by `decision`.
    pub expected: Vec<f64>,
}

/// Choice of the next S-DAG child at a branching node.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPolicy {
    pub node: NodeId,
    pub domain: Vec<VarId>,
    pub choices: Vec<NodeId>,
    /// One table over `domain` per child, in child order.
    pub branch_values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub merges: usize,
    pub phi_exact_matches: usize,
    pub phi_product_matches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub sdag: SDag,
    pub policies: Vec<PolicyTable>,
    pub step_policies: Vec<StepPolicy>,
    /// Execution order of the decisions within each decision node.
    pub decision_order: BTreeMap<NodeId, Vec<VarId>>,
    pub meu: f64,
    pub stats: SolveStats,
}

fn table_offset(uid: &Uid, domain: &[VarId], state_of: impl Fn(VarId) -> Option<usize>) -> Option<usize> {
    let mut off = 0;
    for &v in domain {
        off = off * uid.card(v) + state_of(v)?;
    }
    Some(off)
}

impl PolicyTable {
    /// The recommended state under `evidence` (indexed by variable id), or
    /// `None` if a domain variable is unknown.
    pub fn choice(&self, uid: &Uid, evidence: &[Option<usize>]) -> Option<usize> {
        table_offset(uid, &self.domain, |v| evidence[v.0]).map(|o| self.choices[o])
    }
}

impl StepPolicy {
    pub fn choice(&self, uid: &Uid, evidence: &[Option<usize>]) -> Option<NodeId> {
        table_offset(uid, &self.domain, |v| evidence[v.0]).map(|o| self.choices[o])
    }
}

impl Strategy {
    pub fn policy(&self, node: NodeId, decision: VarId) -> Option<&PolicyTable> {
        self.policies.iter().find(|p| p.node == node && p.decision == decision)
    }

    pub fn step_policy(&self, node: NodeId) -> Option<&StepPolicy> {
        self.step_policies.iter().find(|p| p.node == node)
    }

    pub fn policy_mut(&mut self, node: NodeId, decision: VarId) -> Option<&mut PolicyTable> {
        self.policies.iter_mut().find(|p| p.node == node && p.decision == decision)
    }
}

// ---------------------------------------------------------------------------
// Trace

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    EliminateChance {
        node: Option<NodeId>,
        var: VarId,
        phi: Option<Potential>,
        psi: Option<Potential>,
    },
    EliminateDecision {
        node: NodeId,
        var: VarId,
        psi: Option<Potential>,
        policy_domain: Vec<VarId>,
    },
    Unify {
        node: NodeId,
        totals: Vec<Potential>,
        unified: Potential,
        step_domain: Vec<VarId>,
    },
}

// ---------------------------------------------------------------------------
// Operations

pub fn base_potentials(uid: &Uid) -> PotentialSets {
    let mut sets = PotentialSets::default();
    for v in uid.chance() {
        if let Some(t) = uid.cpt(v) {
            let prov = Provenance::new(format!("cpt:{}", uid.name(v)));
            sets.phi.push(Potential::from_table(uid, PotentialKind::Probability, t, prov));
        }
    }
    for u in uid.utility_vars() {
        if let Some(t) = uid.utility(u) {
            let prov = Provenance::new(format!("util:{}", uid.name(u)));
            sets.psi.push(Potential::from_table(uid, PotentialKind::Utility, t, prov));
        }
    }
    for d in uid.decisions() {
        if let Some(c) = uid.cost(d) {
            if c.iter().any(|&x| x != 0.0) {
                sets.psi.push(Potential::new(
                    PotentialKind::Utility,
                    vec![d],
                    vec![uid.card(d)],
                    c.to_vec(),
                    Provenance::new(format!("cost:{}", uid.name(d))),
                ));
            }
        }
    }
    sets
}

/// What a chance elimination added to the sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ChanceStep {
    pub phi: Option<Potential>,
    pub psi: Option<Potential>,
}

pub fn eliminate_chance(sets: PotentialSets, x: VarId) -> Result<(PotentialSets, ChanceStep)> {
    let (phi_x, mut phi): (Vec<_>, Vec<_>) = sets.phi.into_iter().partition(|p| p.contains(x));
    let (psi_x, mut psi): (Vec<_>, Vec<_>) = sets.psi.into_iter().partition(|p| p.contains(x));
    if phi_x.is_empty() {
        if psi_x.is_empty() {
            return Ok((PotentialSets { phi, psi }, ChanceStep { phi: None, psi: None }));
        }
        return Err(Error::Internal(format!("chance variable {x} has no probability potential")));
    }
    let joint = potential::product(&phi_x.iter().collect::<Vec<_>>());
    let marginal = sum_out(&joint, x)?;
    let mut step = ChanceStep { phi: None, psi: None };
    if !psi_x.is_empty() {
        let total = potential::sum(&psi_x.iter().collect::<Vec<_>>());
        let weighted = sum_out(&multiply(&joint, &total), x)?;
        let mut u = divide(&weighted, &marginal)?;
        u.kind = PotentialKind::Utility;
        psi.push(u.clone());
        step.psi = Some(u);
    }
    if !marginal.is_neutral(MERGE_TOLERANCE) {
        phi.push(marginal.clone());
        step.phi = Some(marginal);
    }
    Ok((PotentialSets { phi, psi }, step))
}

/// Max out `d`. Probability potentials may still mention `d` only if their
/// product does not depend on it; they are then reduced.
pub fn eliminate_decision(sets: PotentialSets, d: VarId, node: NodeId) -> Result<(PotentialSets, PolicyTable, Option<Potential>)> {
    let (phi_d, mut phi): (Vec<_>, Vec<_>) = sets.phi.into_iter().partition(|p| p.contains(d));
    if !phi_d.is_empty() {
        let joint = potential::product(&phi_d.iter().collect::<Vec<_>>());
        let reduced = joint
            .drop_constant(d, MERGE_TOLERANCE)
            .ok_or_else(|| Error::DecisionInProbabilityScope(format!("{d}")))?;
        if !reduced.is_neutral(MERGE_TOLERANCE) {
            phi.push(reduced);
        }
    }
    let (psi_d, mut psi): (Vec<_>, Vec<_>) = sets.psi.into_iter().partition(|p| p.contains(d));
    if psi_d.is_empty() {
        let policy = PolicyTable { node, decision: d, domain: vec![], choices: vec![0], expected: vec![] };
        return Ok((PotentialSets { phi, psi }, policy, None));
    }
    let total = potential::sum(&psi_d.iter().collect::<Vec<_>>());
    let (maxed, choices) = max_out(&total, d)?;
    let mut order = maxed.domain.clone();
    order.push(d);
    let expected = total.reorder(&order).values;
    let policy = PolicyTable { node, decision: d, domain: maxed.domain.clone(), choices, expected };
    psi.push(maxed.clone());
    Ok((PotentialSets { phi, psi }, policy, Some(maxed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiMatch {
    Exact,
    Product,
}

/// Compare two probability sets: first factor by factor, then by their
/// products over the union domain.
pub fn phi_equal(a: &[Potential], b: &[Potential], tol: f64) -> Option<PhiMatch> {
    if a.len() == b.len() {
        let mut used = vec![false; b.len()];
        let all = a.iter().all(|p| {
            let hit = (0..b.len()).find(|&j| !used[j] && approx_equal(p, &b[j], tol));
            if let Some(j) = hit {
                used[j] = true;
            }
            hit.is_some()
        });
        if all {
            return Some(PhiMatch::Exact);
        }
    }
    let pa = potential::product(&a.iter().collect::<Vec<_>>());
    let pb = potential::product(&b.iter().collect::<Vec<_>>());
    let mut da = pa.domain.clone();
    let mut db = pb.domain.clone();
    da.sort();
    db.sort();
    let (pa, pb) = if da == db {
        (pa, pb)
    } else {
        // a variable absent on one side must be constant on the other
        let mut pa = pa;
        let mut pb = pb;
        for v in da.iter().filter(|v| !db.contains(v)) {
            pa = pa.drop_constant(*v, tol)?;
        }
        for v in db.iter().filter(|v| !da.contains(v)) {
            pb = pb.drop_constant(*v, tol)?;
        }
        (pa, pb)
    };
    let scale = pa.values.iter().chain(&pb.values).fold(1.0f64, |m, v| m.max(v.abs()));
    approx_equal(&pa, &pb, tol * scale).then_some(PhiMatch::Product)
}

/// Merge the results of a branching node's children.
pub fn unify_children(
    results: &[PotentialSets],
    children: &[NodeId],
    node: NodeId,
) -> Result<(PotentialSets, StepPolicy, PhiMatch, Vec<Potential>, Potential)> {
    assert!(results.len() >= 2 && results.len() == children.len());
    let mut matched = PhiMatch::Exact;
    for r in &results[1..] {
        match phi_equal(&results[0].phi, &r.phi, MERGE_TOLERANCE) {
            Some(PhiMatch::Product) => matched = PhiMatch::Product,
            Some(PhiMatch::Exact) => {}
            None => return Err(Error::BranchProbabilityMismatch { node: node.0 }),
        }
    }

    // factors identical in every branch stay factored
    let mut rest: Vec<Vec<Option<&Potential>>> = results.iter().map(|r| r.psi.iter().map(Some).collect()).collect();
    let mut shared = Vec::new();
    for f in &results[0].psi {
        let hits: Option<Vec<usize>> = rest[1..]
            .iter()
            .map(|other| {
                other.iter().position(|g| {
                    g.is_some_and(|g| g.provenance == f.provenance && g.domain == f.domain && g.values == f.values)
                })
            })
            .collect();
        if let Some(hits) = hits {
            for (k, h) in hits.into_iter().enumerate() {
                rest[k + 1][h] = None;
            }
            let own = rest[0].iter().position(|g| g.is_some_and(|g| std::ptr::eq(g, f))).expect("own factor");
            rest[0][own] = None;
            shared.push(f.clone());
        }
    }
    let totals: Vec<Potential> = rest
        .iter()
        .map(|fs| potential::sum(&fs.iter().flatten().copied().collect::<Vec<_>>()))
        .collect();
    let (unified, choice) = envelope_max(&totals);
    let branch_values = totals
        .iter()
        .map(|t| {
            let mut full = t.clone();
            for (v, c) in unified.domain.iter().zip(&unified.cards) {
                if !full.contains(*v) {
                    full = potential::add(&full, &Potential::zero_utility(vec![*v], vec![*c]));
                }
            }
            full.reorder(&unified.domain).values
        })
        .collect();
    let step = StepPolicy {
        node,
        domain: unified.domain.clone(),
        choices: choice.iter().map(|&k| children[k]).collect(),
        branch_values,
    };
    let mut psi = shared;
    psi.push(unified.clone());
    Ok((PotentialSets { phi: results[0].phi.clone(), psi }, step, matched, totals, unified))
}

// ---------------------------------------------------------------------------
// Sweep

fn elimination_weight(sets: &PotentialSets, x: VarId) -> usize {
    let mut dom: Vec<(VarId, usize)> = Vec::new();
    for p in sets.phi.iter().chain(&sets.psi).filter(|p| p.contains(x)) {
        for (v, c) in p.domain.iter().zip(&p.cards) {
            if *v != x && !dom.iter().any(|(w, _)| w == v) {
                dom.push((*v, *c));
            }
        }
    }
    dom.iter().map(|(_, c)| c).product()
}

/// Pick the next variable to eliminate among `candidates`: smallest
/// resulting table, ties by id.
fn cheapest(sets: &PotentialSets, candidates: impl Iterator<Item = VarId>) -> Option<VarId> {
    candidates.min_by_key(|&v| (elimination_weight(sets, v), v))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    pub trim_relevance: bool,
}

/// Build the GS-DAG for `uid` and solve it.
pub fn solve_uid(uid: &Uid, opts: SolveOptions) -> Result<Strategy> {
    let sk = build_skeleton(uid, BuildOptions { trim_relevance: opts.trim_relevance });
    solve(uid, &expand_normal_form(uid, &sk))
}

pub fn solve(uid: &Uid, sdag: &SDag) -> Result<Strategy> {
    Solver::new(uid, sdag).run(None)
}

/// Like [`solve`], also recording every elimination and merge.
pub fn solve_traced(uid: &Uid, sdag: &SDag, trace: &mut Vec<TraceEvent>) -> Result<Strategy> {
    Solver::new(uid, sdag).run(Some(trace))
}

struct Solver<'a> {
    uid: &'a Uid,
    sdag: &'a SDag,
    order: PartialOrder,
    /// Eliminate label variables most expensive first; only used to check
    /// that the order inside a label does not matter.
    costly_first: bool,
}

impl<'a> Solver<'a> {
    fn new(uid: &'a Uid, sdag: &'a SDag) -> Self {
        Solver { uid, sdag, order: temporal_order(uid), costly_first: false }
    }

    fn pick(&self, sets: &PotentialSets, candidates: impl Iterator<Item = VarId>) -> Option<VarId> {
        if self.costly_first {
            candidates.max_by_key(|&v| (elimination_weight(sets, v), v))
        } else {
            cheapest(sets, candidates)
        }
    }

    fn run(&self, mut trace: Option<&mut Vec<TraceEvent>>) -> Result<Strategy> {
        let mut sets = base_potentials(self.uid);
        let mut hidden = self.uid.hidden();
        while let Some(x) = cheapest(&sets, hidden.iter().copied()) {
            hidden.retain(|&h| h != x);
            let (next, step) = eliminate_chance(sets, x)?;
            sets = next;
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceEvent::EliminateChance { node: None, var: x, phi: step.phi, psi: step.psi });
            }
        }

        let mut policies = Vec::new();
        let mut step_policies = Vec::new();
        let mut decision_order = BTreeMap::new();
        let mut stats = SolveStats::default();
        let mut memo: Vec<Option<PotentialSets>> = vec![None; self.sdag.len()];
        let mut pending: Vec<usize> = self.sdag.nodes.iter().map(|n| n.parents.len()).collect();

        for id in self.sdag.children_first() {
            let node = self.sdag.node(id);
            let mut take = |c: NodeId, memo: &mut Vec<Option<PotentialSets>>| -> PotentialSets {
                pending[c.0] -= 1;
                if pending[c.0] == 0 {
                    memo[c.0].take().expect("child solved")
                } else {
                    memo[c.0].clone().expect("child solved")
                }
            };
            let mut current = match node.children.len() {
                0 => sets.clone(),
                1 => take(node.children[0], &mut memo),
                _ => {
                    let results: Vec<PotentialSets> = node.children.iter().map(|&c| take(c, &mut memo)).collect();
                    let (merged, step, matched, totals, unified) = unify_children(&results, &node.children, id)?;
                    stats.merges += 1;
                    match matched {
                        PhiMatch::Exact => stats.phi_exact_matches += 1,
                        PhiMatch::Product => stats.phi_product_matches += 1,
                    }
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(TraceEvent::Unify { node: id, totals, unified, step_domain: step.domain.clone() });
                    }
                    step_policies.push(step);
                    merged
                }
            };

            let mut left: Vec<VarId> = node.label.clone();
            let mut eliminated = Vec::new();
            while !left.is_empty() {
                let x = match node.kind {
                    NodeKind::Observation => self.pick(&current, left.iter().copied()),
                    // the latest decisions of the label go first
                    NodeKind::Decision => self.pick(
                        &current,
                        left.iter().copied().filter(|&d| !left.iter().any(|&e| self.order.precedes(d, e))),
                    ),
                }
                .expect("a strict partial order has maximal elements");
                left.retain(|&v| v != x);
                eliminated.push(x);
                match node.kind {
                    NodeKind::Observation => {
                        let (next, step) = eliminate_chance(current, x)?;
                        current = next;
                        if let Some(t) = trace.as_deref_mut() {
                            t.push(TraceEvent::EliminateChance { node: Some(id), var: x, phi: step.phi, psi: step.psi });
                        }
                    }
                    NodeKind::Decision => {
                        let (next, policy, maxed) = eliminate_decision(current, x, id)?;
                        current = next;
                        if let Some(t) = trace.as_deref_mut() {
                            t.push(TraceEvent::EliminateDecision {
                                node: id,
                                var: x,
                                psi: maxed,
                                policy_domain: policy.domain.clone(),
                            });
                        }
                        policies.push(policy);
                    }
                }
            }
            if node.kind == NodeKind::Decision {
                eliminated.reverse();
                decision_order.insert(id, eliminated);
            }
            memo[id.0] = Some(current);
        }

        let root = memo[self.sdag.root.0].take().ok_or_else(|| Error::Internal("root not solved".into()))?;
        if let Some(p) = root.phi.iter().chain(&root.psi).find(|p| !p.is_scalar()) {
            return Err(Error::Internal(format!(
                "variables {:?} left at the root",
                self.uid.names(p.domain.iter().copied())
            )));
        }
        let scale: f64 = root.phi.iter().map(|p| p.values[0]).product();
        let meu = scale * root.psi.iter().map(|p| p.values[0]).sum::<f64>();
        Ok(Strategy { sdag: self.sdag.clone(), policies, step_policies, decision_order, meu, stats })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::ModelBuilder;
    use crate::oracle;

    fn meu(uid: &Uid) -> f64 {
        solve_uid(uid, SolveOptions::default()).unwrap().meu
    }

    #[test]
    fn single_decision() {
        let mut b = ModelBuilder::new();
        b.decision("D", &["a", "b"], &[]).utility("U", &["D"], vec![0.0, 10.0]);
        let uid = b.build().unwrap();
        let s = solve_uid(&uid, SolveOptions::default()).unwrap();
        assert_eq!(s.meu, 10.0);
        assert_eq!(s.policies.len(), 1);
        assert_eq!(s.policies[0].choices, vec![1]);
        assert!(s.policies[0].domain.is_empty());
    }

    #[test]
    fn coin_match_and_hidden_coin() {
        assert!((meu(&fixtures::coin_match()) - 1.0).abs() < 1e-12);
        assert!((meu(&fixtures::hidden_coin()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn base_sets_of_four_decisions() {
        let uid = fixtures::four_decisions();
        let s = base_potentials(&uid);
        assert_eq!(s.phi.len(), 5);
        assert_eq!(s.psi.len(), 4);
    }

    #[test]
    fn cost_adds_a_factor() {
        let mut b = ModelBuilder::new();
        b.decision("D", &["a", "b"], &[]).utility("U", &["D"], vec![0.0, 10.0]).cost("D", vec![0.0, -3.0]);
        let uid = b.build().unwrap();
        let s = base_potentials(&uid);
        assert_eq!(s.psi.len(), 2);
        assert_eq!(s.psi[1].domain, vec![uid.v("D")]);
        assert_eq!(meu(&uid), 7.0);
    }

    #[test]
    fn no_utilities_gives_zero() {
        let mut b = ModelBuilder::new();
        b.decision("D", &["a", "b"], &[]).observable("X", &["0", "1"], &["D"], vec![0.5, 0.5, 0.1, 0.9]);
        let uid = b.build().unwrap();
        assert!(base_potentials(&uid).psi.is_empty());
        assert_eq!(meu(&uid), 0.0);
    }

    #[test]
    fn chance_only_in_phi_leaves_psi() {
        let uid = fixtures::four_decisions();
        let sets = base_potentials(&uid);
        let psi = sets.psi.clone();
        let (after, step) = eliminate_chance(sets, uid.v("B")).unwrap();
        assert!(step.psi.is_none());
        assert_eq!(after.psi, psi);
    }

    #[test]
    fn decision_in_probability_scope_is_rejected() {
        let uid = fixtures::four_decisions();
        let sets = base_potentials(&uid);
        let err = eliminate_decision(sets, uid.v("D1"), NodeId(0)).unwrap_err();
        assert!(matches!(err, Error::DecisionInProbabilityScope(_)));
    }

    #[test]
    fn decision_elimination_matches_scan() {
        let u = Potential::new(
            PotentialKind::Utility,
            vec![VarId(0), VarId(1), VarId(2)],
            vec![2, 3, 2],
            vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0],
            Provenance::new("u"),
        );
        let sets = PotentialSets { phi: vec![], psi: vec![u.clone()] };
        let (after, policy, _) = eliminate_decision(sets, VarId(1), NodeId(3)).unwrap();
        assert_eq!(after.psi.len(), 1);
        for a in 0..2 {
            for c in 0..2 {
                let cells: Vec<f64> = (0..3).map(|b| u.values[a * 6 + b * 2 + c]).collect();
                let best = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let arg = cells.iter().position(|&x| x == best).unwrap();
                assert_eq!(after.psi[0].values[a * 2 + c], best);
                assert_eq!(policy.choices[a * 2 + c], arg);
            }
        }
    }

    #[test]
    fn oracle_agreement_on_fixtures() {
        for uid in [fixtures::four_decisions(), fixtures::coin_match(), fixtures::unconstrained(3)] {
            let s = solve_uid(&uid, SolveOptions::default()).unwrap();
            let brute = oracle::brute_meu(&uid).unwrap();
            assert!((s.meu - brute).abs() <= 1e-9 * (1.0 + brute.abs()), "{} vs {}", s.meu, brute);
        }
    }

    #[test]
    fn label_order_does_not_matter() {
        let mut models: Vec<Uid> = (0..150).map(|s| fixtures::random_uid(s, &fixtures::RandomShape::default())).collect();
        models.extend([fixtures::king(), fixtures::unconstrained(4)]);
        for uid in models {
            let g = expand_normal_form(&uid, &build_skeleton(&uid, BuildOptions::default()));
            let a = Solver::new(&uid, &g).run(None).unwrap();
            let mut other = Solver::new(&uid, &g);
            other.costly_first = true;
            let b = other.run(None).unwrap();
            assert!((a.meu - b.meu).abs() <= 1e-9 * (1.0 + a.meu.abs()));
        }
    }

    fn prob(domain: &[usize], cards: &[usize], values: Vec<f64>) -> Potential {
        let domain = domain.iter().map(|&v| VarId(v)).collect();
        Potential::new(PotentialKind::Probability, domain, cards.to_vec(), values, Provenance::new("t"))
    }

    #[test]
    fn probability_sets_compared_by_product() {
        let pa = prob(&[0], &[2], vec![0.3, 0.7]);
        let pba = prob(&[0, 1], &[2, 2], vec![0.9, 0.1, 0.2, 0.8]);
        let joint = prob(&[1, 0], &[2, 2], vec![0.27, 0.14, 0.03, 0.56]);
        assert_eq!(phi_equal(&[pa.clone(), pba.clone()], &[pba.clone(), pa.clone()], 1e-9), Some(PhiMatch::Exact));
        assert_eq!(phi_equal(&[pa.clone(), pba.clone()], &[joint], 1e-9), Some(PhiMatch::Product));
        let other = prob(&[0], &[2], vec![0.4, 0.6]);
        assert_eq!(phi_equal(&[pa, pba.clone()], &[other, pba], 1e-9), None);
    }

    #[test]
    fn probability_mismatch_is_an_error() {
        let pa = prob(&[0], &[2], vec![0.3, 0.7]);
        let pb = prob(&[0], &[2], vec![0.5, 0.5]);
        let sets = |p: &Potential| PotentialSets { phi: vec![p.clone()], psi: vec![] };
        let err = unify_children(&[sets(&pa), sets(&pb)], &[NodeId(1), NodeId(2)], NodeId(0)).unwrap_err();
        assert!(matches!(err, Error::BranchProbabilityMismatch { node: 0 }));
    }

    #[test]
    fn shared_utilities_stay_factored() {
        let u = Potential::new(PotentialKind::Utility, vec![VarId(0)], vec![2], vec![1.0, 2.0], Provenance::new("u"));
        let a = Potential::new(PotentialKind::Utility, vec![VarId(0)], vec![2], vec![5.0, 0.0], Provenance::new("a"));
        let b = Potential::new(PotentialKind::Utility, vec![VarId(0)], vec![2], vec![3.0, 4.0], Provenance::new("b"));
        let r1 = PotentialSets { phi: vec![], psi: vec![u.clone(), a] };
        let r2 = PotentialSets { phi: vec![], psi: vec![b, u.clone()] };
        let (merged, step, ..) = unify_children(&[r1, r2], &[NodeId(4), NodeId(7)], NodeId(0)).unwrap();
        assert_eq!(merged.psi.len(), 2);
        assert_eq!(merged.psi[0], u);
        assert_eq!(merged.psi[1].values, vec![5.0, 4.0]);
        assert_eq!(step.choices, vec![NodeId(4), NodeId(7)]);
        assert_eq!(step.branch_values, vec![vec![5.0, 0.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn identical_branches_pick_the_first_child() {
        let a = Potential::new(PotentialKind::Utility, vec![VarId(0)], vec![2], vec![5.0, 1.0], Provenance::new("a"));
        let r = PotentialSets { phi: vec![], psi: vec![a] };
        let (merged, step, ..) = unify_children(&[r.clone(), r.clone()], &[NodeId(3), NodeId(5)], NodeId(0)).unwrap();
        // the factor is shared, so the branches differ by nothing
        assert!(step.domain.is_empty());
        assert_eq!(step.choices, vec![NodeId(3)]);
        assert_eq!(merged.psi[0], r.psi[0]);
    }

    #[test]
    fn cost_shift_is_linear() {
        for seed in 0..20 {
            let uid = fixtures::random_uid(seed, &fixtures::RandomShape::default());
            let base = meu(&uid);
            let d = uid.decisions()[0];
            let mut doc = uid.to_document();
            let k = uid.card(d);
            let entry = doc.costs.entry(uid.name(d).to_string()).or_insert_with(|| vec![0.0; k]);
            for x in entry.iter_mut() {
                *x += 2.5;
            }
            let shifted = crate::model::Uid::from_document(doc).unwrap();
            assert!((meu(&shifted) - base - 2.5).abs() < 1e-9);
        }
    }
}
