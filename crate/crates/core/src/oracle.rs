//! Ground-truth evaluators by exhaustive enumeration, and Monte Carlo
//! rollouts of a strategy.
//!
//! Everything here works on the full joint distribution of the chance
//! variables and is meant to be obviously correct rather than fast.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Uid, VarId, VarKind};
use crate::order::{is_admissible, released_observables};
use crate::sdag::{NodeId, NodeKind};
use crate::solver::Strategy;

/// Largest joint space (chance configurations times decision
/// configurations) the oracles accept.
pub const SCALE_LIMIT: f64 = 1e7;

const UNSET: u16 = u16::MAX;

/// A full assignment to the chance variables with its probability and the
/// utility it yields (decision costs excluded).
struct World {
    states: Vec<u16>,
    p: f64,
    utility: f64,
}

/// Joint tables of the chance variables, cached per decision assignment.
struct Joint<'a> {
    uid: &'a Uid,
    chance: Vec<VarId>,
    decisions: Vec<VarId>,
    cache: RefCell<HashMap<Vec<u16>, Rc<Vec<World>>>>,
}

impl<'a> Joint<'a> {
    fn new(uid: &'a Uid) -> Result<Self> {
        let space: f64 = uid.ids().filter(|&v| uid.kind(v) != VarKind::Utility).map(|v| uid.card(v) as f64).product();
        if space > SCALE_LIMIT {
            return Err(Error::ScaleGuard(format!("joint space {space:.3e} exceeds {SCALE_LIMIT:.0e}")));
        }
        Ok(Joint {
            uid,
            chance: uid.chance_topological(),
            decisions: uid.decisions(),
            cache: RefCell::new(HashMap::new()),
        })
    }

    /// All chance worlds under the given decisions; undecided decisions are
    /// fixed at state 0, which does not change the distribution of anything
    /// already released.
    fn worlds(&self, evidence: &[u16]) -> Rc<Vec<World>> {
        let key: Vec<u16> = self.decisions.iter().map(|d| if evidence[d.0] == UNSET { 0 } else { evidence[d.0] }).collect();
        if let Some(w) = self.cache.borrow().get(&key) {
            return w.clone();
        }
        let mut base = vec![0u16; self.uid.len()];
        for (d, s) in self.decisions.iter().zip(&key) {
            base[d.0] = *s;
        }
        let mut out = Vec::new();
        self.expand(0, &mut base, 1.0, &mut out);
        let rc = Rc::new(out);
        self.cache.borrow_mut().insert(key, rc.clone());
        rc
    }

    fn expand(&self, i: usize, states: &mut Vec<u16>, p: f64, out: &mut Vec<World>) {
        if i == self.chance.len() {
            let utility = total_utility(self.uid, |v| states[v.0] as usize);
            out.push(World { states: states.clone(), p, utility });
            return;
        }
        let v = self.chance[i];
        let cpt = self.uid.cpt(v).expect("validated model");
        let k = self.uid.card(v);
        let mut row = 0;
        for &pa in self.uid.parents(v) {
            row = row * self.uid.card(pa) + states[pa.0] as usize;
        }
        for s in 0..k {
            let q = cpt.values[row * k + s];
            if q == 0.0 {
                continue;
            }
            states[v.0] = s as u16;
            self.expand(i + 1, states, p * q, out);
        }
    }
}

fn total_utility(uid: &Uid, state: impl Fn(VarId) -> usize) -> f64 {
    uid.utility_vars()
        .into_iter()
        .map(|u| {
            let t = uid.utility(u).expect("validated model");
            let mut off = 0;
            for &v in &t.domain {
                off = off * uid.card(v) + state(v);
            }
            t.values[off]
        })
        .sum()
}

fn consistent(w: &World, evidence: &[u16], observed: &[VarId]) -> bool {
    observed.iter().all(|o| evidence[o.0] == UNSET || w.states[o.0] == evidence[o.0])
}

/// Shared machinery of the recursive evaluators.
struct Enumerator<'a> {
    uid: &'a Uid,
    joint: Joint<'a>,
    observables: Vec<VarId>,
    decisions: Vec<VarId>,
}

impl<'a> Enumerator<'a> {
    fn new(uid: &'a Uid) -> Result<Self> {
        Ok(Enumerator { uid, joint: Joint::new(uid)?, observables: uid.observables(), decisions: uid.decisions() })
    }

    fn empty(&self) -> Vec<u16> {
        vec![UNSET; self.uid.len()]
    }

    /// Posterior over the joint states of `vars` given the evidence, as
    /// (states, probability) pairs with nonzero mass.
    fn posterior(&self, evidence: &[u16], vars: &[VarId]) -> Vec<(Vec<u16>, f64)> {
        let worlds = self.joint.worlds(evidence);
        let mut mass: HashMap<Vec<u16>, f64> = HashMap::new();
        let mut order = Vec::new();
        let mut total = 0.0;
        for w in worlds.iter().filter(|w| consistent(w, evidence, &self.observables)) {
            let key: Vec<u16> = vars.iter().map(|v| w.states[v.0]).collect();
            let e = mass.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                0.0
            });
            *e += w.p;
            total += w.p;
        }
        if total == 0.0 {
            return Vec::new();
        }
        order.sort();
        order.into_iter().map(|k| {
            let p = mass[&k] / total;
            (k, p)
        })
        .collect()
    }

    /// Expected utility given complete decision evidence.
    fn expected_utility(&self, evidence: &[u16]) -> f64 {
        let worlds = self.joint.worlds(evidence);
        let (mut num, mut den) = (0.0, 0.0);
        for w in worlds.iter().filter(|w| consistent(w, evidence, &self.observables)) {
            num += w.p * w.utility;
            den += w.p;
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    fn decided(&self, evidence: &[u16]) -> std::collections::BTreeSet<VarId> {
        self.decisions.iter().copied().filter(|d| evidence[d.0] != UNSET).collect()
    }

    fn pending_releases(&self, evidence: &[u16]) -> Vec<VarId> {
        released_observables(self.uid, &self.decided(evidence))
            .into_iter()
            .filter(|o| evidence[o.0] == UNSET)
            .collect()
    }

    fn eligible(&self, evidence: &[u16]) -> Vec<VarId> {
        self.decisions
            .iter()
            .copied()
            .filter(|d| evidence[d.0] == UNSET && self.uid.parents(*d).iter().all(|p| evidence[p.0] != UNSET))
            .collect()
    }

    fn observe(&self, evidence: &mut Vec<u16>, vars: &[VarId], mut rest: impl FnMut(&mut Vec<u16>) -> f64) -> f64 {
        let mut acc = 0.0;
        for (states, p) in self.posterior(evidence, vars) {
            for (v, s) in vars.iter().zip(&states) {
                evidence[v.0] = *s;
            }
            acc += p * rest(evidence);
        }
        for v in vars {
            evidence[v.0] = UNSET;
        }
        acc
    }
}

/// Maximum expected utility by exhaustive search over all admissible orders
/// and policies. Released observations are made as soon as possible.
pub fn brute_meu(uid: &Uid) -> Result<f64> {
    let en = Enumerator::new(uid)?;
    let mut memo = HashMap::new();
    let mut ev = en.empty();
    Ok(observe_first(&en, &mut ev, &mut memo))
}

fn observe_first(en: &Enumerator, ev: &mut Vec<u16>, memo: &mut HashMap<Vec<u16>, f64>) -> f64 {
    if let Some(&v) = memo.get(ev.as_slice()) {
        return v;
    }
    let released = en.pending_releases(ev);
    let value = if !released.is_empty() {
        en.observe(ev, &released, |ev| observe_first(en, ev, memo))
    } else if en.decisions.iter().any(|d| ev[d.0] == UNSET) {
        let mut best = f64::NEG_INFINITY;
        for d in en.eligible(ev) {
            for s in 0..en.uid.card(d) {
                ev[d.0] = s as u16;
                let v = en.uid.cost_of(d, s) + observe_first(en, ev, memo);
                best = best.max(v);
            }
            ev[d.0] = UNSET;
        }
        best
    } else {
        en.expected_utility(ev)
    };
    memo.insert(ev.clone(), value);
    value
}

/// As [`brute_meu`], but observations may also be postponed: every
/// released observation competes with every eligible decision.
pub fn brute_meu_full(uid: &Uid) -> Result<f64> {
    if uid.decisions().len() > 2 || uid.observables().len() > 3 {
        return Err(Error::ScaleGuard("at most 2 decisions and 3 observables".into()));
    }
    let en = Enumerator::new(uid)?;
    let mut memo = HashMap::new();
    let mut ev = en.empty();
    Ok(any_order(&en, &mut ev, &mut memo))
}

fn any_order(en: &Enumerator, ev: &mut Vec<u16>, memo: &mut HashMap<Vec<u16>, f64>) -> f64 {
    if let Some(&v) = memo.get(ev.as_slice()) {
        return v;
    }
    let value = if en.decisions.iter().all(|d| ev[d.0] != UNSET) {
        en.expected_utility(ev)
    } else {
        let mut best = f64::NEG_INFINITY;
        for o in en.pending_releases(ev) {
            best = best.max(en.observe(ev, &[o], |ev| any_order(en, ev, memo)));
        }
        for d in en.eligible(ev) {
            for s in 0..en.uid.card(d) {
                ev[d.0] = s as u16;
                best = best.max(en.uid.cost_of(d, s) + any_order(en, ev, memo));
            }
            ev[d.0] = UNSET;
        }
        best
    };
    memo.insert(ev.clone(), value);
    value
}

/// Maximum expected utility when decisions and observations follow the
/// given admissible ordering.
pub fn brute_meu_ordered(uid: &Uid, ordering: &[VarId]) -> Result<f64> {
    if !is_admissible(uid, ordering) {
        return Err(Error::InvalidQuery("ordering is not admissible".into()));
    }
    let en = Enumerator::new(uid)?;
    let mut ev = en.empty();
    Ok(along(&en, ordering, &mut ev))
}

fn along(en: &Enumerator, rest: &[VarId], ev: &mut Vec<u16>) -> f64 {
    let Some((&x, tail)) = rest.split_first() else {
        return en.expected_utility(ev);
    };
    if en.uid.kind(x) == VarKind::Decision {
        let mut best = f64::NEG_INFINITY;
        for s in 0..en.uid.card(x) {
            ev[x.0] = s as u16;
            best = best.max(en.uid.cost_of(x, s) + along(en, tail, ev));
        }
        ev[x.0] = UNSET;
        best
    } else {
        en.observe(ev, &[x], |ev| along(en, tail, ev))
    }
}

/// Exact expected utility of a strategy, by folding it out into a tree.
pub fn strategy_eu(uid: &Uid, s: &Strategy) -> Result<f64> {
    let en = Enumerator::new(uid)?;
    let mut ev = en.empty();
    fold(&en, s, s.sdag.root, &mut ev)
}

fn fold(en: &Enumerator, s: &Strategy, node: NodeId, ev: &mut Vec<u16>) -> Result<f64> {
    let n = s.sdag.node(node);
    let next = |en: &Enumerator, ev: &mut Vec<u16>| -> Result<f64> {
        match n.children.len() {
            0 => {
                if let Some(d) = en.decisions.iter().find(|d| ev[d.0] == UNSET) {
                    return Err(Error::StrategyMismatch(format!("{} never decided", en.uid.name(*d))));
                }
                Ok(en.expected_utility(ev))
            }
            1 => fold(en, s, n.children[0], ev),
            _ => {
                let step = s
                    .step_policy(node)
                    .ok_or_else(|| Error::StrategyMismatch(format!("no step policy at node {}", node.0)))?;
                let child = step
                    .choice(en.uid, &as_evidence(ev))
                    .ok_or_else(|| Error::StrategyMismatch(format!("step policy at node {} reads the future", node.0)))?;
                if !n.children.contains(&child) {
                    return Err(Error::StrategyMismatch(format!("node {} is not a child of {}", child.0, node.0)));
                }
                fold(en, s, child, ev)
            }
        }
    };
    match n.kind {
        NodeKind::Observation => {
            let mut err = None;
            let v = en.observe(ev, &n.label, |ev| match next(en, ev) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            });
            err.map_or(Ok(v), Err)
        }
        NodeKind::Decision => {
            let order = s
                .decision_order
                .get(&node)
                .ok_or_else(|| Error::StrategyMismatch(format!("no decision order at node {}", node.0)))?;
            let mut cost = 0.0;
            for &d in order {
                let policy = s.policy(node, d).ok_or_else(|| {
                    Error::StrategyMismatch(format!("no policy for {} at node {}", en.uid.name(d), node.0))
                })?;
                let c = policy
                    .choice(en.uid, &as_evidence(ev))
                    .ok_or_else(|| Error::StrategyMismatch(format!("policy for {} reads the future", en.uid.name(d))))?;
                if c >= en.uid.card(d) {
                    return Err(Error::StrategyMismatch(format!("state {c} out of range for {}", en.uid.name(d))));
                }
                ev[d.0] = c as u16;
                cost += en.uid.cost_of(d, c);
            }
            let v = next(en, ev);
            for &d in order {
                ev[d.0] = UNSET;
            }
            Ok(cost + v?)
        }
    }
}

fn as_evidence(ev: &[u16]) -> Vec<Option<usize>> {
    ev.iter().map(|&s| (s != UNSET).then_some(s as usize)).collect()
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Rollouts per independently seeded chunk.
pub const CHUNK: usize = 4096;

type ChunkSums = Vec<(usize, (f64, f64))>;

/// Mean total utility of `n` sampled rollouts of `s`, and its standard
/// error. Chunk `k` draws from a generator seeded with `seed + k`, so the
/// result does not depend on the number of threads.
pub fn simulate(uid: &Uid, s: &Strategy, n: usize, seed: u64) -> Result<(f64, f64)> {
    assert!(n >= 1);
    let chunks = n.div_ceil(CHUNK);
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(chunks);
    let mut sums = vec![(0.0f64, 0.0f64); chunks];
    let results: Vec<Result<ChunkSums>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for k in (w..chunks).step_by(workers) {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                        let len = CHUNK.min(n - k * CHUNK);
                        let (mut sum, mut sq) = (0.0, 0.0);
                        for _ in 0..len {
                            let x = rollout(uid, s, &mut rng)?;
                            sum += x;
                            sq += x * x;
                        }
                        out.push((k, (sum, sq)));
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
    });
    for r in results {
        for (k, v) in r? {
            sums[k] = v;
        }
    }
    let (sum, sq) = sums.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let mean = sum / n as f64;
    if n == 1 {
        return Ok((mean, 0.0));
    }
    let var = ((sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
    Ok((mean, (var / n as f64).sqrt()))
}

/// Draw chance variables only when they are needed, sampling unset parents
/// first.
fn sample(uid: &Uid, v: VarId, state: &mut [Option<usize>], rng: &mut ChaCha8Rng) -> usize {
    if let Some(s) = state[v.0] {
        return s;
    }
    let mut row = 0;
    for &p in uid.parents(v) {
        let ps = sample(uid, p, state, rng);
        row = row * uid.card(p) + ps;
    }
    let k = uid.card(v);
    let cpt = &uid.cpt(v).expect("chance variable").values[row * k..(row + 1) * k];
    let mut u: f64 = rng.gen();
    let mut pick = k - 1;
    for (i, &p) in cpt.iter().enumerate() {
        if u < p {
            pick = i;
            break;
        }
        u -= p;
    }
    // never land on an impossible state through rounding
    while cpt[pick] == 0.0 && pick > 0 {
        pick -= 1;
    }
    state[v.0] = Some(pick);
    pick
}

fn rollout(uid: &Uid, s: &Strategy, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut state: Vec<Option<usize>> = vec![None; uid.len()];
    // what the decision maker has seen so far
    let mut known: Vec<Option<usize>> = vec![None; uid.len()];
    let mut total = 0.0;
    let mut node = s.sdag.root;
    loop {
        let n = s.sdag.node(node);
        match n.kind {
            NodeKind::Observation => {
                for &o in &n.label {
                    known[o.0] = Some(sample(uid, o, &mut state, rng));
                }
            }
            NodeKind::Decision => {
                let order = s.decision_order.get(&node).map(Vec::as_slice).unwrap_or(&[]);
                for &d in order {
                    let c = s
                        .policy(node, d)
                        .and_then(|p| p.choice(uid, &known))
                        .ok_or_else(|| Error::StrategyMismatch(format!("no usable policy for {}", uid.name(d))))?;
                    state[d.0] = Some(c);
                    known[d.0] = Some(c);
                    total += uid.cost_of(d, c);
                }
            }
        }
        node = match n.children.len() {
            0 => break,
            1 => n.children[0],
            _ => s
                .step_policy(node)
                .and_then(|p| p.choice(uid, &known))
                .ok_or_else(|| Error::StrategyMismatch(format!("no usable step policy at node {}", node.0)))?,
        };
    }
    if let Some(d) = uid.decisions().into_iter().find(|d| state[d.0].is_none()) {
        return Err(Error::StrategyMismatch(format!("{} never decided", uid.name(d))));
    }
    for c in uid.chance_topological() {
        sample(uid, c, &mut state, rng);
    }
    Ok(total + total_utility(uid, |v| state[v.0].expect("all sampled")))
}
