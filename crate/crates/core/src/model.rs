//! Unconstrained influence diagrams: variables, tables, the JSON document
//! format and structural validation.
//!
//! Tables (CPTs, utility functions) are stored row-major with the last
//! domain variable varying fastest. A CPT's domain is the child's declared
//! parents followed by the child itself.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the per-row normalisation check of CPTs.
pub const CPT_SUM_TOLERANCE: f64 = 1e-12;

/// Dense index of a variable inside a [`Uid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarKind {
    Decision,
    ChanceObservable,
    ChanceHidden,
    Utility,
}

impl VarKind {
    pub fn is_chance(self) -> bool {
        matches!(self, VarKind::ChanceObservable | VarKind::ChanceHidden)
    }

    /// Decisions and observables are the variables that take part in the
    /// temporal order.
    pub fn is_temporal(self) -> bool {
        matches!(self, VarKind::Decision | VarKind::ChanceObservable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub id: String,
    pub name: String,
    pub kind: VarKind,
    pub states: Vec<String>,
    pub parents: Vec<VarId>,
}

impl Variable {
    pub fn cardinality(&self) -> usize {
        self.states.len()
    }
}

/// A dense table over an ordered domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub domain: Vec<VarId>,
    pub values: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Document format

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UidDocument {
    pub variables: Vec<VariableDoc>,
    #[serde(default)]
    pub cpts: Vec<CptDoc>,
    #[serde(default)]
    pub utilities: Vec<UtilityDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub costs: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDoc {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub kind: VarKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptDoc {
    pub child: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityDoc {
    pub id: String,
    pub domain: Vec<String>,
    pub values: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Violations

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    TooFewStates { var: String, count: usize },
    UtilityWithStates { var: String },
    SelfParent { var: String },
    Cycle { var: String },
    UtilityHasChild { utility: String, child: String },
    NonObservableDecisionParent { decision: String, parent: String },
    MissingCpt { var: String },
    UnexpectedCpt { var: String },
    DuplicateCpt { var: String },
    MissingUtilityTable { var: String },
    UnexpectedUtilityTable { var: String },
    DuplicateUtilityTable { var: String },
    UtilityDomainMismatch { var: String },
    NegativeProbability { var: String },
    NotNormalized { var: String, row: usize, sum: String },
    NonFiniteUtility { var: String },
    CostOnNonDecision { var: String },
    NonFiniteCost { var: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            TooFewStates { var, count } => {
                write!(f, "variable {var} has {count} state(s); at least 2 required")
            }
            UtilityWithStates { var } => write!(f, "utility {var} declares states"),
            SelfParent { var } => write!(f, "variable {var} is its own parent"),
            Cycle { var } => write!(f, "variable {var} lies on a directed cycle"),
            UtilityHasChild { utility, child } => write!(f, "utility {utility} has child {child}"),
            NonObservableDecisionParent { decision, parent } => {
                write!(f, "decision {decision} has non-observable parent {parent}")
            }
            MissingCpt { var } => write!(f, "chance variable {var} has no CPT"),
            UnexpectedCpt { var } => write!(f, "CPT given for non-chance variable {var}"),
            DuplicateCpt { var } => write!(f, "chance variable {var} has more than one CPT"),
            MissingUtilityTable { var } => write!(f, "utility {var} has no table"),
            UnexpectedUtilityTable { var } => {
                write!(f, "utility table given for non-utility variable {var}")
            }
            DuplicateUtilityTable { var } => write!(f, "utility {var} has more than one table"),
            UtilityDomainMismatch { var } => {
                write!(f, "utility {var}: table domain differs from its parents")
            }
            NegativeProbability { var } => write!(f, "CPT for {var} has a negative entry"),
            NotNormalized { var, row, sum } => {
                write!(f, "CPT not normalized: {var} row {row} sums to {sum}")
            }
            NonFiniteUtility { var } => write!(f, "utility {var} has a non-finite entry"),
            CostOnNonDecision { var } => write!(f, "cost given for non-decision variable {var}"),
            NonFiniteCost { var } => write!(f, "cost vector for {var} has a non-finite entry"),
        }
    }
}

// ---------------------------------------------------------------------------
// The diagram

#[derive(Debug, Clone)]
pub struct Uid {
    vars: Vec<Variable>,
    lookup: HashMap<String, VarId>,
    cpts: BTreeMap<VarId, Vec<Table>>,
    utilities: BTreeMap<VarId, Vec<Table>>,
    costs: BTreeMap<VarId, Vec<f64>>,
    children: Vec<Vec<VarId>>,
    descendants: Vec<BTreeSet<VarId>>,
}

impl PartialEq for Uid {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars
            && self.cpts == other.cpts
            && self.utilities == other.utilities
            && self.costs == other.costs
    }
}

/// Parse a UID document and validate it.
pub fn parse_uid(text: &str) -> Result<Uid> {
    let uid = Uid::from_document(parse_document(text)?)?;
    let violations = validate(&uid);
    if violations.is_empty() {
        Ok(uid)
    } else {
        Err(Error::Invalid(violations))
    }
}

pub fn parse_document(text: &str) -> Result<UidDocument> {
    serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn serialize_uid(uid: &Uid) -> String {
    serde_json::to_string_pretty(&uid.to_document()).expect("documents always serialize")
}

impl Uid {
    /// Resolve references and table lengths. Structural rules are left to
    /// [`validate`], so an invalid diagram can still be inspected.
    pub fn from_document(doc: UidDocument) -> Result<Uid> {
        let mut lookup = HashMap::new();
        for (i, v) in doc.variables.iter().enumerate() {
            if lookup.insert(v.id.clone(), VarId(i)).is_some() {
                return Err(Error::DuplicateId(v.id.clone()));
            }
        }
        let resolve = |id: &str, context: &str| -> Result<VarId> {
            lookup.get(id).copied().ok_or_else(|| Error::DanglingReference {
                context: context.to_string(),
                id: id.to_string(),
            })
        };

        let mut vars = Vec::with_capacity(doc.variables.len());
        for v in &doc.variables {
            let parents = v
                .parents
                .iter()
                .map(|p| resolve(p, &format!("parents of {}", v.id)))
                .collect::<Result<Vec<_>>>()?;
            vars.push(Variable {
                id: v.id.clone(),
                name: if v.name.is_empty() { v.id.clone() } else { v.name.clone() },
                kind: v.kind,
                states: v.states.clone(),
                parents,
            });
        }

        let table_len = |domain: &[VarId]| -> usize {
            domain.iter().map(|d| vars[d.0].states.len()).product()
        };

        let mut cpts: BTreeMap<VarId, Vec<Table>> = BTreeMap::new();
        for c in &doc.cpts {
            let child = resolve(&c.child, "cpt")?;
            let mut domain = vars[child.0].parents.clone();
            domain.push(child);
            let expected = table_len(&domain);
            if expected != c.values.len() {
                return Err(Error::TableLength {
                    table: format!("CPT of {}", c.child),
                    expected,
                    found: c.values.len(),
                });
            }
            cpts.entry(child).or_default().push(Table { domain, values: c.values.clone() });
        }

        let mut utilities: BTreeMap<VarId, Vec<Table>> = BTreeMap::new();
        for u in &doc.utilities {
            let id = resolve(&u.id, "utility")?;
            let domain = u
                .domain
                .iter()
                .map(|d| resolve(d, &format!("domain of utility {}", u.id)))
                .collect::<Result<Vec<_>>>()?;
            let expected = table_len(&domain);
            if expected != u.values.len() {
                return Err(Error::TableLength {
                    table: format!("utility {}", u.id),
                    expected,
                    found: u.values.len(),
                });
            }
            utilities.entry(id).or_default().push(Table { domain, values: u.values.clone() });
        }

        let mut costs = BTreeMap::new();
        for (id, values) in &doc.costs {
            let d = resolve(id, "costs")?;
            let expected = vars[d.0].states.len();
            if expected != values.len() {
                return Err(Error::TableLength {
                    table: format!("cost of {id}"),
                    expected,
                    found: values.len(),
                });
            }
            costs.insert(d, values.clone());
        }

        let mut children = vec![Vec::new(); vars.len()];
        for (i, v) in vars.iter().enumerate() {
            for p in &v.parents {
                children[p.0].push(VarId(i));
            }
        }
        let descendants = (0..vars.len())
            .map(|i| reach(VarId(i), |v| &children[v.0]))
            .collect();

        Ok(Uid { vars, lookup, cpts, utilities, costs, children, descendants })
    }

    pub fn to_document(&self) -> UidDocument {
        let ids = |list: &[VarId]| list.iter().map(|v| self.vars[v.0].id.clone()).collect();
        UidDocument {
            variables: self
                .vars
                .iter()
                .map(|v| VariableDoc {
                    id: v.id.clone(),
                    name: v.name.clone(),
                    kind: v.kind,
                    states: v.states.clone(),
                    parents: ids(&v.parents),
                })
                .collect(),
            cpts: self
                .cpts
                .iter()
                .flat_map(|(c, ts)| {
                    ts.iter().map(move |t| CptDoc {
                        child: self.vars[c.0].id.clone(),
                        values: t.values.clone(),
                    })
                })
                .collect(),
            utilities: self
                .utilities
                .iter()
                .flat_map(|(u, ts)| {
                    ts.iter().map(move |t| UtilityDoc {
                        id: self.vars[u.0].id.clone(),
                        domain: ids(&t.domain),
                        values: t.values.clone(),
                    })
                })
                .collect(),
            costs: self
                .costs
                .iter()
                .map(|(d, c)| (self.vars[d.0].id.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len()).map(VarId)
    }

    pub fn id_of(&self, name: &str) -> Option<VarId> {
        self.lookup.get(name).copied()
    }

    /// Like [`Uid::id_of`] but panics on unknown ids; for fixtures and tests.
    pub fn v(&self, name: &str) -> VarId {
        self.id_of(name).unwrap_or_else(|| panic!("unknown variable {name}"))
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.vars[v.0].id
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.vars[v.0].kind
    }

    pub fn card(&self, v: VarId) -> usize {
        self.vars[v.0].states.len()
    }

    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.vars[v.0].parents
    }

    pub fn children(&self, v: VarId) -> &[VarId] {
        &self.children[v.0]
    }

    /// Strict graph descendants.
    pub fn descendants(&self, v: VarId) -> &BTreeSet<VarId> {
        &self.descendants[v.0]
    }

    pub fn of_kind(&self, kind: VarKind) -> Vec<VarId> {
        self.ids().filter(|&v| self.kind(v) == kind).collect()
    }

    pub fn decisions(&self) -> Vec<VarId> {
        self.of_kind(VarKind::Decision)
    }

    pub fn observables(&self) -> Vec<VarId> {
        self.of_kind(VarKind::ChanceObservable)
    }

    pub fn hidden(&self) -> Vec<VarId> {
        self.of_kind(VarKind::ChanceHidden)
    }

    pub fn utility_vars(&self) -> Vec<VarId> {
        self.of_kind(VarKind::Utility)
    }

    pub fn chance(&self) -> Vec<VarId> {
        self.ids().filter(|&v| self.kind(v).is_chance()).collect()
    }

    pub fn temporal_vars(&self) -> Vec<VarId> {
        self.ids().filter(|&v| self.kind(v).is_temporal()).collect()
    }

    /// The CPT of a chance variable; domain is parents then child.
    pub fn cpt(&self, v: VarId) -> Option<&Table> {
        self.cpts.get(&v).and_then(|t| t.first())
    }

    pub fn utility(&self, v: VarId) -> Option<&Table> {
        self.utilities.get(&v).and_then(|t| t.first())
    }

    pub fn cost(&self, d: VarId) -> Option<&[f64]> {
        self.costs.get(&d).map(|c| c.as_slice())
    }

    /// Cost of taking state `s` of decision `d` (zero when no cost is given).
    pub fn cost_of(&self, d: VarId, s: usize) -> f64 {
        self.costs.get(&d).map_or(0.0, |c| c[s])
    }

    /// Decisions that are graph ancestors of `v`.
    pub fn decision_ancestors(&self, v: VarId) -> BTreeSet<VarId> {
        self.decisions()
            .into_iter()
            .filter(|d| self.descendants[d.0].contains(&v))
            .collect()
    }

    /// Observables that are graph descendants of `v`.
    pub fn observable_descendants(&self, v: VarId) -> BTreeSet<VarId> {
        self.descendants[v.0]
            .iter()
            .copied()
            .filter(|&d| self.kind(d) == VarKind::ChanceObservable)
            .collect()
    }

    /// Decisions that are graph descendants of `v`.
    pub fn decision_descendants(&self, v: VarId) -> BTreeSet<VarId> {
        self.descendants[v.0]
            .iter()
            .copied()
            .filter(|&d| self.kind(d) == VarKind::Decision)
            .collect()
    }

    /// Chance variables in a topological order (parents first).
    pub fn chance_topological(&self) -> Vec<VarId> {
        self.topological().into_iter().filter(|&v| self.kind(v).is_chance()).collect()
    }

    /// All variables in a topological order; ties broken by index. Variables
    /// on cycles are appended at the end.
    pub fn topological(&self) -> Vec<VarId> {
        let n = self.vars.len();
        let mut indeg: Vec<usize> = self.vars.iter().map(|v| v.parents.len()).collect();
        let mut ready: BTreeSet<VarId> = (0..n).filter(|&i| indeg[i] == 0).map(VarId).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            out.push(v);
            for c in &self.children[v.0] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    ready.insert(*c);
                }
            }
        }
        if out.len() < n {
            let seen: BTreeSet<VarId> = out.iter().copied().collect();
            out.extend((0..n).map(VarId).filter(|v| !seen.contains(v)));
        }
        out
    }

    pub fn names(&self, vs: impl IntoIterator<Item = VarId>) -> Vec<String> {
        vs.into_iter().map(|v| self.name(v).to_string()).collect()
    }
}

fn reach<'a>(start: VarId, next: impl Fn(VarId) -> &'a Vec<VarId>) -> BTreeSet<VarId> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<VarId> = next(start).clone();
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            stack.extend(next(v).iter().copied());
        }
    }
    seen
}

/// Check every structural and numeric invariant of a diagram.
pub fn validate(uid: &Uid) -> Vec<Violation> {
    let mut out = Vec::new();
    let name = |v: VarId| uid.name(v).to_string();

    for v in uid.ids() {
        let var = uid.var(v);
        match var.kind {
            VarKind::Utility => {
                if !var.states.is_empty() {
                    out.push(Violation::UtilityWithStates { var: name(v) });
                }
            }
            _ => {
                if var.states.len() < 2 {
                    out.push(Violation::TooFewStates { var: name(v), count: var.states.len() });
                }
            }
        }
        if var.parents.contains(&v) {
            out.push(Violation::SelfParent { var: name(v) });
        } else if uid.descendants(v).contains(&v) {
            out.push(Violation::Cycle { var: name(v) });
        }
        if var.kind == VarKind::Utility {
            for c in uid.children(v) {
                out.push(Violation::UtilityHasChild { utility: name(v), child: name(*c) });
            }
        }
        if var.kind == VarKind::Decision {
            for p in &var.parents {
                if !uid.kind(*p).is_temporal() {
                    out.push(Violation::NonObservableDecisionParent {
                        decision: name(v),
                        parent: name(*p),
                    });
                }
            }
        }
    }

    for v in uid.ids() {
        let kind = uid.kind(v);
        let cpts = uid.cpts.get(&v).map_or(0, |t| t.len());
        if kind.is_chance() {
            match cpts {
                0 => out.push(Violation::MissingCpt { var: name(v) }),
                1 => {}
                _ => out.push(Violation::DuplicateCpt { var: name(v) }),
            }
        } else if cpts > 0 {
            out.push(Violation::UnexpectedCpt { var: name(v) });
        }
        let tables = uid.utilities.get(&v).map_or(0, |t| t.len());
        if kind == VarKind::Utility {
            match tables {
                0 => out.push(Violation::MissingUtilityTable { var: name(v) }),
                1 => {}
                _ => out.push(Violation::DuplicateUtilityTable { var: name(v) }),
            }
        } else if tables > 0 {
            out.push(Violation::UnexpectedUtilityTable { var: name(v) });
        }
    }

    for (v, tables) in &uid.cpts {
        let Some(t) = tables.first() else { continue };
        if t.values.iter().any(|x| x.is_nan() || *x < 0.0 || !x.is_finite()) {
            out.push(Violation::NegativeProbability { var: name(*v) });
            continue;
        }
        let k = uid.card(*v).max(1);
        for (row, block) in t.values.chunks(k).enumerate() {
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > CPT_SUM_TOLERANCE {
                out.push(Violation::NotNormalized { var: name(*v), row, sum: format!("{sum}") });
                break;
            }
        }
    }

    for (v, tables) in &uid.utilities {
        let Some(t) = tables.first() else { continue };
        if t.values.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFiniteUtility { var: name(*v) });
        }
        let dom: BTreeSet<VarId> = t.domain.iter().copied().collect();
        let par: BTreeSet<VarId> = uid.parents(*v).iter().copied().collect();
        if dom != par || dom.len() != t.domain.len() {
            out.push(Violation::UtilityDomainMismatch { var: name(*v) });
        }
    }

    for (d, c) in &uid.costs {
        if uid.kind(*d) != VarKind::Decision {
            out.push(Violation::CostOnNonDecision { var: name(*d) });
        }
        if c.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFiniteCost { var: name(*d) });
        }
    }

    out
}

// ---------------------------------------------------------------------------
// Builder

/// Programmatic construction of UID documents.
#[derive(Debug, Default, Clone)]
pub struct ModelBuilder {
    doc: UidDocument,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, id: &str, kind: VarKind, states: &[&str], parents: &[&str]) {
        self.doc.variables.push(VariableDoc {
            id: id.to_string(),
            name: id.to_string(),
            kind,
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
        });
    }

    pub fn decision(&mut self, id: &str, states: &[&str], parents: &[&str]) -> &mut Self {
        self.push(id, VarKind::Decision, states, parents);
        self
    }

    pub fn observable(&mut self, id: &str, states: &[&str], parents: &[&str], cpt: Vec<f64>) -> &mut Self {
        self.push(id, VarKind::ChanceObservable, states, parents);
        self.doc.cpts.push(CptDoc { child: id.to_string(), values: cpt });
        self
    }

    pub fn hidden(&mut self, id: &str, states: &[&str], parents: &[&str], cpt: Vec<f64>) -> &mut Self {
        self.push(id, VarKind::ChanceHidden, states, parents);
        self.doc.cpts.push(CptDoc { child: id.to_string(), values: cpt });
        self
    }

    pub fn utility(&mut self, id: &str, domain: &[&str], values: Vec<f64>) -> &mut Self {
        self.push(id, VarKind::Utility, &[], domain);
        self.doc.utilities.push(UtilityDoc {
            id: id.to_string(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
            values,
        });
        self
    }

    pub fn cost(&mut self, id: &str, values: Vec<f64>) -> &mut Self {
        self.doc.costs.insert(id.to_string(), values);
        self
    }

    pub fn document(&self) -> UidDocument {
        self.doc.clone()
    }

    /// Build and validate.
    pub fn build(&self) -> Result<Uid> {
        let uid = Uid::from_document(self.doc.clone())?;
        let violations = validate(&uid);
        if violations.is_empty() {
            Ok(uid)
        } else {
            Err(Error::Invalid(violations))
        }
    }
}
