//! Dense discrete potentials and the table arithmetic used by elimination.
//!
//! Values are stored row-major with the last domain variable varying
//! fastest, the same convention as model tables.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Table, Uid, VarId};

/// Tolerance used when comparing branch results at merge points.
pub const MERGE_TOLERANCE: f64 = 1e-9;
/// Tolerance for algebraic identities in tests.
pub const ALGEBRA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Probability,
    Utility,
}

/// Stable token naming where a potential came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance(pub String);

impl Provenance {
    pub fn new(s: impl Into<String>) -> Self {
        Provenance(s.into())
    }

    /// Token for a potential derived by `op` on `var` from `inputs`.
    pub fn derived(op: &str, var: Option<VarId>, inputs: &[&Provenance]) -> Self {
        let mut h = DefaultHasher::new();
        op.hash(&mut h);
        var.hash(&mut h);
        for p in inputs {
            p.hash(&mut h);
        }
        match var {
            Some(v) => Provenance(format!("{op}({}):{:016x}", v.0, h.finish())),
            None => Provenance(format!("{op}:{:016x}", h.finish())),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub domain: Vec<VarId>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

/// The pair (Φ, Ψ) of probability and utility potentials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PotentialSets {
    pub phi: Vec<Potential>,
    pub psi: Vec<Potential>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

/// Visit every configuration of `cards` in table order, passing the linear
/// offsets into each of the given stride maps.
fn for_each_offset<const K: usize>(cards: &[usize], maps: [&[usize]; K], mut f: impl FnMut([usize; K])) {
    let total: usize = cards.iter().product();
    if total == 0 {
        return;
    }
    let n = cards.len();
    let mut counter = vec![0usize; n];
    let mut offs = [0usize; K];
    for _ in 0..total {
        f(offs);
        for i in (0..n).rev() {
            counter[i] += 1;
            for k in 0..K {
                offs[k] += maps[k][i];
            }
            if counter[i] < cards[i] {
                break;
            }
            for k in 0..K {
                offs[k] -= maps[k][i] * cards[i];
            }
            counter[i] = 0;
        }
    }
}

impl Potential {
    pub fn new(
        kind: PotentialKind,
        domain: Vec<VarId>,
        cards: Vec<usize>,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Self {
        assert_eq!(domain.len(), cards.len());
        assert_eq!(values.len(), cards.iter().product::<usize>(), "table length");
        Potential { kind, domain, cards, values, provenance }
    }

    pub fn scalar(kind: PotentialKind, value: f64, provenance: Provenance) -> Self {
        Potential::new(kind, vec![], vec![], vec![value], provenance)
    }

    /// All-ones probability potential.
    pub fn neutral(domain: Vec<VarId>, cards: Vec<usize>) -> Self {
        let len = cards.iter().product();
        Potential::new(PotentialKind::Probability, domain, cards, vec![1.0; len], Provenance::new("neutral"))
    }

    pub fn zero_utility(domain: Vec<VarId>, cards: Vec<usize>) -> Self {
        let len = cards.iter().product();
        Potential::new(PotentialKind::Utility, domain, cards, vec![0.0; len], Provenance::new("zero"))
    }

    pub fn from_table(uid: &Uid, kind: PotentialKind, table: &Table, provenance: Provenance) -> Self {
        let cards = table.domain.iter().map(|&v| uid.card(v)).collect();
        Potential::new(kind, table.domain.clone(), cards, table.values.clone(), provenance)
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.domain.contains(&v)
    }

    pub fn position(&self, v: VarId) -> Option<usize> {
        self.domain.iter().position(|&d| d == v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.cards)
    }

    /// Stride of each variable of `domain` inside `self` (0 when absent).
    fn stride_map(&self, domain: &[VarId]) -> Vec<usize> {
        let own = self.strides();
        domain
            .iter()
            .map(|v| self.position(*v).map_or(0, |i| own[i]))
            .collect()
    }

    /// Value at a full assignment indexed by variable id.
    pub fn value_at(&self, assignment: &[usize]) -> f64 {
        self.values[self.offset_of(|v| assignment[v.0])]
    }

    /// Linear offset of the configuration given by `state_of`.
    pub fn offset_of(&self, state_of: impl Fn(VarId) -> usize) -> usize {
        let s = self.strides();
        self.domain.iter().zip(&s).map(|(v, st)| state_of(*v) * st).sum()
    }

    /// Same table over a permuted domain.
    pub fn reorder(&self, order: &[VarId]) -> Potential {
        assert_eq!(order.len(), self.domain.len());
        let cards: Vec<usize> = order.iter().map(|v| self.cards[self.position(*v).expect("same variables")]).collect();
        let map = self.stride_map(order);
        let mut values = Vec::with_capacity(self.values.len());
        for_each_offset(&cards, [&map], |[o]| values.push(self.values[o]));
        Potential { kind: self.kind, domain: order.to_vec(), cards, values, provenance: self.provenance.clone() }
    }

    /// The potential with its domain sorted by variable id.
    pub fn canonical(&self) -> Potential {
        let mut order = self.domain.clone();
        order.sort();
        self.reorder(&order)
    }

    /// True when every value is within `tol` of one.
    pub fn is_neutral(&self, tol: f64) -> bool {
        self.values.iter().all(|v| (v - 1.0).abs() <= tol)
    }

    /// If the table does not depend on `x` (relative tolerance `tol`),
    /// return it with `x` removed.
    pub fn drop_constant(&self, x: VarId, tol: f64) -> Option<Potential> {
        let i = self.position(x)?;
        let own = self.strides();
        let stride = own[i];
        let (domain, cards, map) = self.without(i);
        let mut values = Vec::new();
        let mut constant = true;
        for_each_offset(&cards, [&map], |[o]| {
            let first = self.values[o];
            for s in 1..self.cards[i] {
                let v = self.values[o + s * stride];
                if (v - first).abs() > tol * (1.0 + first.abs().max(v.abs())) {
                    constant = false;
                }
            }
            values.push(first);
        });
        constant.then(|| Potential {
            kind: self.kind,
            domain,
            cards,
            values,
            provenance: Provenance::derived("drop", Some(x), &[&self.provenance]),
        })
    }

    fn without(&self, i: usize) -> (Vec<VarId>, Vec<usize>, Vec<usize>) {
        let own = self.strides();
        let mut domain = self.domain.clone();
        let mut cards = self.cards.clone();
        let mut map = own;
        domain.remove(i);
        cards.remove(i);
        map.remove(i);
        (domain, cards, map)
    }

    fn marginalize(&self, x: VarId, op: &str, reduce: impl Fn(&[f64]) -> (f64, usize)) -> Result<(Potential, Vec<usize>)> {
        let i = self.position(x).ok_or_else(|| Error::NotInDomain(format!("{x}")))?;
        let stride = self.strides()[i];
        let k = self.cards[i];
        let (domain, cards, map) = self.without(i);
        let mut values = Vec::new();
        let mut arg = Vec::new();
        let mut buf = vec![0.0; k];
        for_each_offset(&cards, [&map], |[o]| {
            for (s, b) in buf.iter_mut().enumerate() {
                *b = self.values[o + s * stride];
            }
            let (v, a) = reduce(&buf);
            values.push(v);
            arg.push(a);
        });
        let p = Potential {
            kind: self.kind,
            domain,
            cards,
            values,
            provenance: Provenance::derived(op, Some(x), &[&self.provenance]),
        };
        Ok((p, arg))
    }
}

fn union_domain(p: &Potential, q: &Potential) -> (Vec<VarId>, Vec<usize>) {
    let mut domain = p.domain.clone();
    let mut cards = p.cards.clone();
    for (v, c) in q.domain.iter().zip(&q.cards) {
        if !domain.contains(v) {
            domain.push(*v);
            cards.push(*c);
        }
    }
    (domain, cards)
}

fn combine(p: &Potential, q: &Potential, kind: PotentialKind, op: &str, f: impl Fn(f64, f64) -> f64) -> Potential {
    let (domain, cards) = union_domain(p, q);
    let mp = p.stride_map(&domain);
    let mq = q.stride_map(&domain);
    let mut values = Vec::with_capacity(cards.iter().product());
    for_each_offset(&cards, [&mp, &mq], |[a, b]| values.push(f(p.values[a], q.values[b])));
    Potential {
        kind,
        domain,
        cards,
        values,
        provenance: Provenance::derived(op, None, &[&p.provenance, &q.provenance]),
    }
}

/// Pointwise product over the ordered union of the domains. The product is
/// a utility potential if either factor is one.
pub fn multiply(p: &Potential, q: &Potential) -> Potential {
    let kind = if p.kind == PotentialKind::Utility || q.kind == PotentialKind::Utility {
        PotentialKind::Utility
    } else {
        PotentialKind::Probability
    };
    combine(p, q, kind, "mul", |a, b| a * b)
}

pub fn add(u: &Potential, v: &Potential) -> Potential {
    combine(u, v, PotentialKind::Utility, "add", |a, b| a + b)
}

pub fn sum_out(p: &Potential, x: VarId) -> Result<Potential> {
    p.marginalize(x, "sum", |xs| (xs.iter().sum(), 0)).map(|r| r.0)
}

/// Max-marginalise `d`, returning the argmax state for each residual
/// configuration. Ties go to the lowest state index.
pub fn max_out(u: &Potential, d: VarId) -> Result<(Potential, Vec<usize>)> {
    u.marginalize(d, "max", |xs| {
        let mut best = 0;
        for (i, &x) in xs.iter().enumerate().skip(1) {
            if x > xs[best] {
                best = i;
            }
        }
        (xs[best], best)
    })
}

/// Pointwise quotient with 0/0 = 0. `den`'s domain must be contained in
/// `num`'s.
pub fn divide(num: &Potential, den: &Potential) -> Result<Potential> {
    if let Some(v) = den.domain.iter().find(|v| !num.contains(**v)) {
        return Err(Error::NotInDomain(format!("{v}")));
    }
    let md = den.stride_map(&num.domain);
    let mn = strides(&num.cards);
    let mut values = Vec::with_capacity(num.values.len());
    let mut bad = false;
    for_each_offset(&num.cards, [&mn, &md], |[a, b]| {
        let (x, y) = (num.values[a], den.values[b]);
        values.push(if y == 0.0 {
            if x != 0.0 {
                bad = true;
            }
            0.0
        } else {
            x / y
        });
    });
    if bad {
        return Err(Error::InconsistentPotential);
    }
    Ok(Potential {
        kind: num.kind,
        domain: num.domain.clone(),
        cards: num.cards.clone(),
        values,
        provenance: Provenance::derived("div", None, &[&num.provenance, &den.provenance]),
    })
}

/// Pointwise maximum of several utility potentials, with the index of the
/// winning input per cell (ties go to the lowest index).
pub fn envelope_max(us: &[Potential]) -> (Potential, Vec<usize>) {
    assert!(!us.is_empty(), "envelope_max needs at least one potential");
    let mut domain: Vec<VarId> = Vec::new();
    let mut cards: Vec<usize> = Vec::new();
    for u in us {
        for (v, c) in u.domain.iter().zip(&u.cards) {
            if !domain.contains(v) {
                domain.push(*v);
                cards.push(*c);
            }
        }
    }
    let total: usize = cards.iter().product();
    let mut values = vec![f64::NEG_INFINITY; total];
    let mut choice = vec![0usize; total];
    let own = strides(&cards);
    for (k, u) in us.iter().enumerate() {
        let m = u.stride_map(&domain);
        for_each_offset(&cards, [&own, &m], |[o, a]| {
            if u.values[a] > values[o] || k == 0 {
                values[o] = u.values[a];
                choice[o] = k;
            }
        });
    }
    let provs: Vec<&Provenance> = us.iter().map(|u| &u.provenance).collect();
    let p = Potential {
        kind: PotentialKind::Utility,
        domain,
        cards,
        values,
        provenance: Provenance::derived("envelope", None, &provs),
    };
    (p, choice)
}

/// Same variables and, in canonical order, cells within `tol`.
pub fn approx_equal(a: &Potential, b: &Potential, tol: f64) -> bool {
    let mut da = a.domain.clone();
    let mut db = b.domain.clone();
    da.sort();
    db.sort();
    if da != db {
        return false;
    }
    let ca = a.reorder(&da);
    let cb = b.reorder(&da);
    ca.cards == cb.cards && ca.values.iter().zip(&cb.values).all(|(x, y)| (x - y).abs() <= tol)
}

/// Product of a list of potentials; the neutral scalar when empty.
pub fn product(ps: &[&Potential]) -> Potential {
    let mut it = ps.iter();
    match it.next() {
        None => Potential::neutral(vec![], vec![]),
        Some(first) => it.fold((*first).clone(), |acc, p| multiply(&acc, p)),
    }
}

/// Sum of a list of utility potentials; the zero scalar when empty.
pub fn sum(us: &[&Potential]) -> Potential {
    let mut it = us.iter();
    match it.next() {
        None => Potential::zero_utility(vec![], vec![]),
        Some(first) => it.fold((*first).clone(), |acc, u| add(&acc, u)),
    }
}
