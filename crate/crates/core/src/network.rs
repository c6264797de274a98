//! Credal networks: a DAG plus one conditional set per variable and parent instantiation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ConjunctiveEvent, EventSpace, Variable};
use crate::solvers;

/// Tolerance for a point distribution to count as summing to one.
pub const SUM_TOL: f64 = 1e-9;
/// Tolerance for a vertex to count as lying on the probability simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Halfspace `a · r <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a, b }
    }
}

/// A finitely generated convex set of distributions over one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSpec {
    Vertices(Vec<Vec<f64>>),
    /// Intersected implicitly with the probability simplex.
    Halfspaces(Vec<Halfspace>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableBody {
    Point(Vec<f64>),
    Interval { lower: Vec<f64>, upper: Vec<f64> },
    Convex(ConvexSpec),
}

impl TableBody {
    pub fn is_point(&self) -> bool {
        matches!(self, TableBody::Point(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TableBody::Point(_) => "point",
            TableBody::Interval { .. } => "interval",
            TableBody::Convex(ConvexSpec::Vertices(_)) => "convex-v",
            TableBody::Convex(ConvexSpec::Halfspaces(_)) => "convex-h",
        }
    }

    fn dimension_mismatch(&self, d: usize) -> Option<String> {
        let bad = |len: usize, what: &str| (len != d).then(|| format!("{what} has length {len}, expected {d}"));
        match self {
            TableBody::Point(p) => bad(p.len(), "p"),
            TableBody::Interval { lower, upper } => bad(lower.len(), "l").or_else(|| bad(upper.len(), "u")),
            TableBody::Convex(ConvexSpec::Vertices(vs)) => {
                if vs.is_empty() {
                    return Some("vertex list is empty".into());
                }
                vs.iter().find_map(|v| bad(v.len(), "vertex"))
            }
            TableBody::Convex(ConvexSpec::Halfspaces(hs)) => hs.iter().find_map(|h| bad(h.a.len(), "halfspace normal")),
        }
    }

    /// Numeric conditions on the body that do not need a solver.
    fn numeric_violation(&self) -> Option<String> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            TableBody::Point(p) => {
                if !finite(p) || p.iter().any(|&x| x < 0.0) {
                    return Some("point entries must be non-negative".into());
                }
                let s: f64 = p.iter().sum();
                ((s - 1.0).abs() > SUM_TOL).then(|| format!("point entries sum to {s}, expected 1"))
            }
            TableBody::Interval { lower, upper } => {
                if !finite(lower) || !finite(upper) {
                    return Some("interval bounds must be finite".into());
                }
                for (j, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if !(0.0 <= *l && l <= u && *u <= 1.0) {
                        return Some(format!("bounds [{l}, {u}] at position {j} violate 0 <= l <= u <= 1"));
                    }
                }
                let sl: f64 = lower.iter().sum();
                let su: f64 = upper.iter().sum();
                if sl > 1.0 + SUM_TOL {
                    return Some(format!("Σl > 1 (Σl = {sl})"));
                }
                if su < 1.0 - SUM_TOL {
                    return Some(format!("Σu < 1 (Σu = {su})"));
                }
                None
            }
            TableBody::Convex(ConvexSpec::Vertices(vs)) => {
                for v in vs {
                    if !finite(v) || v.iter().any(|&x| x < -SIMPLEX_TOL) {
                        return Some("vertex entries must be non-negative".into());
                    }
                    let s: f64 = v.iter().sum();
                    if (s - 1.0).abs() > SIMPLEX_TOL {
                        return Some(format!("vertex {v:?} is not on the simplex"));
                    }
                }
                None
            }
            TableBody::Convex(ConvexSpec::Halfspaces(hs)) => hs
                .iter()
                .any(|h| !finite(&h.a) || !h.b.is_finite())
                .then(|| "halfspace coefficients must be finite".into()),
        }
    }
}

/// One conditional set `(X | pa(X) = given)[body]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSet {
    pub child: String,
    pub given: ConjunctiveEvent,
    pub body: TableBody,
}

impl ConditionalSet {
    pub fn new(child: impl Into<String>, given: ConjunctiveEvent, body: TableBody) -> Self {
        Self {
            child: child.into(),
            given,
            body,
        }
    }

    pub fn point(child: &str, given: ConjunctiveEvent, p: Vec<f64>) -> Self {
        Self::new(child, given, TableBody::Point(p))
    }

    pub fn interval(child: &str, given: ConjunctiveEvent, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self::new(child, given, TableBody::Interval { lower, upper })
    }
}

/// Bound of an event conditional `(d | c)[..]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Point(f64),
    Interval(f64, f64),
}

/// A conditional constraint over arbitrary conjunctive events.
#[derive(Debug, Clone, PartialEq)]
pub enum Conditional {
    Event {
        conclusion: ConjunctiveEvent,
        premise: ConjunctiveEvent,
        bound: Bound,
    },
    Convex {
        variable: String,
        premise: ConjunctiveEvent,
        spec: ConvexSpec,
    },
}

impl Conditional {
    pub fn point(conclusion: ConjunctiveEvent, premise: ConjunctiveEvent, r: f64) -> Self {
        Conditional::Event {
            conclusion,
            premise,
            bound: Bound::Point(r),
        }
    }

    pub fn interval(conclusion: ConjunctiveEvent, premise: ConjunctiveEvent, l: f64, u: f64) -> Self {
        Conditional::Event {
            conclusion,
            premise,
            bound: Bound::Interval(l, u),
        }
    }

    /// Every variable mentioned by the conditional.
    pub fn variables(&self) -> BTreeSet<&str> {
        match self {
            Conditional::Event { conclusion, premise, .. } => conclusion.variables().chain(premise.variables()).collect(),
            Conditional::Convex { variable, premise, .. } => std::iter::once(variable.as_str()).chain(premise.variables()).collect(),
        }
    }

    pub fn premise(&self) -> &ConjunctiveEvent {
        match self {
            Conditional::Event { premise, .. } | Conditional::Convex { premise, .. } => premise,
        }
    }
}

/// A set of conditionals over known variables.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub variables: Vec<Variable>,
    pub conditionals: Vec<Conditional>,
}

impl KnowledgeBase {
    pub fn new(variables: Vec<Variable>, conditionals: Vec<Conditional>) -> Result<Self> {
        let kb = Self { variables, conditionals };
        for c in &kb.conditionals {
            for var in c.variables() {
                if !kb.variables.iter().any(|v| v.name() == var) {
                    return Err(Error::UnknownVariable(var.to_string()));
                }
            }
        }
        Ok(kb)
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.variables
            .iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Cycle(Vec<String>),
    MissingTable { child: String, given: String },
    DuplicateTable { child: String, given: String },
    UnexpectedTable { child: String, given: String },
    InvalidBody { child: String, given: String, reason: String },
    EmptyConvexSet { child: String, given: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle(vars) => write!(f, "cycle through {}", vars.join(", ")),
            Violation::MissingTable { child, given } => write!(f, "missing table for {child} given {given}"),
            Violation::DuplicateTable { child, given } => write!(f, "duplicate table for {child} given {given}"),
            Violation::UnexpectedTable { child, given } => {
                write!(f, "table for {child} given {given} does not match a parent instantiation")
            }
            Violation::InvalidBody { child, given, reason } => write!(f, "{child} given {given}: {reason}"),
            Violation::EmptyConvexSet { child, given } => write!(f, "{child} given {given}: convex set is empty"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CredalNetwork {
    variables: Vec<Variable>,
    edges: Vec<(String, String)>,
    tables: Vec<ConditionalSet>,
}

impl CredalNetwork {
    /// Checks that every name and value resolves and that vector lengths match domains.
    /// Structural and numeric conditions are left to [`CredalNetwork::validate`].
    pub fn new(variables: Vec<Variable>, edges: Vec<(String, String)>, tables: Vec<ConditionalSet>) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name() == v.name()) {
                return Err(Error::invalid(format!("variable `{}` declared twice", v.name())));
            }
        }
        let net = Self {
            variables,
            edges: Vec::new(),
            tables: Vec::new(),
        };
        let mut dedup = Vec::new();
        for (p, c) in edges {
            net.variable(&p)?;
            net.variable(&c)?;
            if !dedup.contains(&(p.clone(), c.clone())) {
                dedup.push((p, c));
            }
        }
        for t in &tables {
            let child = net.variable(&t.child)?;
            for (var, value) in t.given.assignments() {
                net.variable(var)?.value_index(value)?;
            }
            if let Some(reason) = t.body.dimension_mismatch(child.size()) {
                return Err(Error::InvalidTable {
                    child: t.child.clone(),
                    given: t.given.to_string(),
                    reason,
                });
            }
        }
        Ok(Self {
            edges: dedup,
            tables,
            ..net
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn tables(&self) -> &[ConditionalSet] {
        &self.tables
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.variables
            .iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Same graph with a new table list.
    pub fn with_tables(&self, tables: Vec<ConditionalSet>) -> Result<Self> {
        Self::new(self.variables.clone(), self.edges.clone(), tables)
    }

    /// Parents of `var` in variable-declaration order.
    pub fn parents(&self, var: &str) -> Vec<&str> {
        self.variables
            .iter()
            .map(|v| v.name())
            .filter(|p| self.edges.iter().any(|(a, b)| a == p && b == var))
            .collect()
    }

    pub fn children(&self, var: &str) -> Vec<&str> {
        self.variables
            .iter()
            .map(|v| v.name())
            .filter(|c| self.edges.iter().any(|(a, b)| a == var && b == c))
            .collect()
    }

    /// Cross product of the parents' domains in mixed-radix order; `[⊤]` for roots.
    pub fn parent_instantiations(&self, var: &str) -> Result<Vec<ConjunctiveEvent>> {
        self.variable(var)?;
        let parents: Vec<&Variable> = self
            .parents(var)
            .into_iter()
            .map(|p| self.variable(p))
            .collect::<Result<_>>()?;
        let space = EventSpace::new(parents.into_iter().cloned().collect())?;
        Ok((0..space.size()).map(|i| space.assignment(i)).collect())
    }

    pub fn table(&self, child: &str, given: &ConjunctiveEvent) -> Option<&ConditionalSet> {
        self.tables.iter().find(|t| t.child == child && &t.given == given)
    }

    /// Tables of `var`, one per parent instantiation in mixed-radix order.
    pub fn tables_for(&self, var: &str) -> Result<Vec<&ConditionalSet>> {
        self.parent_instantiations(var)?
            .iter()
            .map(|g| {
                self.table(var, g).ok_or_else(|| Error::InvalidTable {
                    child: var.to_string(),
                    given: g.to_string(),
                    reason: "missing table".into(),
                })
            })
            .collect()
    }

    /// Kahn's algorithm; ties are broken by lexicographic variable name.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        let mut indegree: BTreeMap<&str, usize> = self.variables.iter().map(|v| (v.name(), 0)).collect();
        for (_, c) in &self.edges {
            *indegree.get_mut(c.as_str()).expect("edge endpoints exist") += 1;
        }
        let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut order = Vec::with_capacity(self.variables.len());
        while let Some(next) = ready.pop_first() {
            order.push(next.to_string());
            for (p, c) in &self.edges {
                if p == next {
                    let d = indegree.get_mut(c.as_str()).expect("edge endpoints exist");
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(c);
                    }
                }
            }
        }
        if order.len() != self.variables.len() {
            let stuck = indegree
                .into_iter()
                .filter(|(n, _)| !order.iter().any(|o| o == n))
                .map(|(n, _)| n.to_string())
                .collect();
            return Err(Error::Cycle(stuck));
        }
        Ok(order)
    }

    /// Variables in topological order.
    pub fn ordered_variables(&self) -> Result<Vec<Variable>> {
        self.topological_order()?
            .iter()
            .map(|n| self.variable(n).cloned())
            .collect()
    }

    pub fn is_consistent_order(&self, order: &[String]) -> bool {
        order.len() == self.variables.len()
            && self.variables.iter().all(|v| order.iter().filter(|o| *o == v.name()).count() == 1)
            && self.edges.iter().all(|(p, c)| {
                order.iter().position(|o| o == p) < order.iter().position(|o| o == c)
            })
    }

    /// `vars` together with all of their ancestors.
    pub fn ancestral_closure<'a>(&'a self, vars: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<&str> = vars.into_iter().collect();
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                stack.extend(self.parents(v));
            }
        }
        out
    }

    /// Strict descendants of `var`.
    pub fn descendants(&self, var: &str) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        let mut stack = self.children(var);
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                stack.extend(self.children(v));
            }
        }
        out
    }

    /// True when every variable has at most one parent.
    pub fn is_tree(&self) -> bool {
        self.variables.iter().all(|v| self.parents(v.name()).len() <= 1)
    }

    pub fn is_point(&self) -> bool {
        self.tables.iter().all(|t| t.body.is_point())
    }

    /// Conditionals expressed by the tables: one per child value for point and interval
    /// bodies, one convex conditional per convex body.
    pub fn to_kb(&self) -> KnowledgeBase {
        let mut conditionals = Vec::new();
        for t in &self.tables {
            let child = self.variable(&t.child).expect("checked at construction");
            let value = |j: usize| ConjunctiveEvent::assign(&t.child, &child.domain()[j]);
            match &t.body {
                TableBody::Point(p) => {
                    for (j, r) in p.iter().enumerate() {
                        conditionals.push(Conditional::point(value(j), t.given.clone(), *r));
                    }
                }
                TableBody::Interval { lower, upper } => {
                    for j in 0..lower.len() {
                        conditionals.push(Conditional::interval(value(j), t.given.clone(), lower[j], upper[j]));
                    }
                }
                TableBody::Convex(spec) => conditionals.push(Conditional::Convex {
                    variable: t.child.clone(),
                    premise: t.given.clone(),
                    spec: spec.clone(),
                }),
            }
        }
        KnowledgeBase {
            variables: self.variables.clone(),
            conditionals,
        }
    }

    /// Violations are returned as data; an empty report means the network is usable.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if let Err(Error::Cycle(vars)) = self.topological_order() {
            violations.push(Violation::Cycle(vars));
        }
        let mut seen: Vec<(&str, &ConjunctiveEvent)> = Vec::new();
        for t in &self.tables {
            let key = (t.child.as_str(), &t.given);
            let given = t.given.to_string();
            if seen.contains(&key) {
                violations.push(Violation::DuplicateTable {
                    child: t.child.clone(),
                    given,
                });
                continue;
            }
            seen.push(key);
            let parents: BTreeSet<&str> = self.parents(&t.child).into_iter().collect();
            let given_vars: BTreeSet<&str> = t.given.variables().collect();
            if parents != given_vars {
                violations.push(Violation::UnexpectedTable {
                    child: t.child.clone(),
                    given,
                });
                continue;
            }
            if let Some(v) = body_violation(t) {
                violations.push(v);
            }
        }
        for v in &self.variables {
            let Ok(insts) = self.parent_instantiations(v.name()) else {
                continue;
            };
            for g in insts {
                if self.table(v.name(), &g).is_none() {
                    violations.push(Violation::MissingTable {
                        child: v.name().to_string(),
                        given: g.to_string(),
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_clean() {
            Ok(())
        } else {
            Err(Error::Validation(report))
        }
    }
}

/// Numeric body checks, including a feasibility solve for halfspace sets.
pub(crate) fn body_violation(t: &ConditionalSet) -> Option<Violation> {
    if let Some(reason) = t.body.numeric_violation() {
        return Some(Violation::InvalidBody {
            child: t.child.clone(),
            given: t.given.to_string(),
            reason,
        });
    }
    if let TableBody::Convex(ConvexSpec::Halfspaces(hs)) = &t.body {
        let d = hs.first().map(|h| h.a.len()).unwrap_or(0);
        if d > 0 && !solvers::hrep_feasible(hs, d) {
            return Some(Violation::EmptyConvexSet {
                child: t.child.clone(),
                given: t.given.to_string(),
            });
        }
    }
    None
}

/// A network whose tables are all point distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBayesNet(CredalNetwork);

impl PointBayesNet {
    pub fn new(net: CredalNetwork) -> Result<Self> {
        if let Some(t) = net.tables().iter().find(|t| !t.body.is_point()) {
            return Err(Error::InvalidTable {
                child: t.child.clone(),
                given: t.given.to_string(),
                reason: format!("expected a point table, found {}", t.body.kind()),
            });
        }
        net.ensure_valid()?;
        Ok(Self(net))
    }

    pub fn network(&self) -> &CredalNetwork {
        &self.0
    }

    pub fn into_network(self) -> CredalNetwork {
        self.0
    }

    /// Conditional distribution of `child` given one parent instantiation.
    pub fn cpt(&self, child: &str, given: &ConjunctiveEvent) -> Option<&[f64]> {
        match &self.0.table(child, given)?.body {
            TableBody::Point(p) => Some(p),
            _ => None,
        }
    }
}

impl TryFrom<CredalNetwork> for PointBayesNet {
    type Error = Error;

    fn try_from(net: CredalNetwork) -> Result<Self> {
        Self::new(net)
    }
}
