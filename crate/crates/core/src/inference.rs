//! Exact queries over point networks and lower/upper query bounds over a credal network.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::imap::ci_gap;
use crate::model::{ConjunctiveEvent, EventMatcher, EventSpace, JointTable};
use crate::network::{ConditionalSet, ConvexSpec, CredalNetwork, PointBayesNet, TableBody};
use crate::solvers::{hrep_vertices, vertices_box_simplex, MAX_CONVERSION_DIM};

/// Largest number of vertex combinations [`credal_bounds`] will enumerate.
pub const MAX_COMBINATIONS: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub target: ConjunctiveEvent,
    pub evidence: ConjunctiveEvent,
}

impl Query {
    pub fn new(target: ConjunctiveEvent, evidence: ConjunctiveEvent) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::invalid("query target must assign at least one variable"));
        }
        Ok(Self { target, evidence })
    }

    /// Parses `F=f1` style target and evidence strings.
    pub fn parse(target: &str, evidence: &str) -> Result<Self> {
        Self::new(target.parse()?, evidence.parse()?)
    }

    fn variables(&self) -> impl Iterator<Item = &str> {
        self.target.variables().chain(self.evidence.variables())
    }
}

/// Where each variable of a space finds its conditional table for a given atom.
struct FactorLayout {
    /// Per space position: (parent positions and strides in the parent index, first slot).
    vars: Vec<(Vec<(usize, usize)>, usize)>,
    /// One entry per (variable, parent instantiation), in slot order.
    slots: Vec<ConditionalSet>,
}

impl FactorLayout {
    fn new(net: &CredalNetwork, space: &EventSpace) -> Result<Self> {
        let mut vars = Vec::new();
        let mut slots = Vec::new();
        for v in space.variables() {
            let parents = net.parents(v.name());
            let mut stride = 1;
            let mut layout = Vec::with_capacity(parents.len());
            for p in parents.iter().rev() {
                let pos = space.position(p).ok_or_else(|| {
                    Error::invalid(format!("parent `{p}` of `{}` is outside the query space", v.name()))
                })?;
                layout.push((pos, stride));
                stride *= space.variables()[pos].size();
            }
            layout.reverse();
            vars.push((layout, slots.len()));
            slots.extend(net.tables_for(v.name())?.into_iter().cloned());
        }
        Ok(Self { vars, slots })
    }

    #[inline]
    fn slot(&self, space: &EventSpace, atom: usize, pos: usize) -> usize {
        let (parents, first) = &self.vars[pos];
        first
            + parents
                .iter()
                .map(|&(p, s)| space.value_at(atom, p) * s)
                .sum::<usize>()
    }

    /// `Pr(ω) = Π_i rows[slot(i, ω)][x_i]`.
    fn atom_prob(&self, space: &EventSpace, atom: usize, rows: &[&[f64]]) -> f64 {
        (0..self.vars.len())
            .map(|pos| rows[self.slot(space, atom, pos)][space.value_at(atom, pos)])
            .product()
    }
}

/// Product-form joint of a point network over its variables in topological order.
pub fn joint_of_bn(bn: &PointBayesNet) -> Result<JointTable> {
    joint_of_bn_with(bn, Execution::default())
}

pub fn joint_of_bn_with(bn: &PointBayesNet, exec: Execution) -> Result<JointTable> {
    let net = bn.network();
    let space = EventSpace::new(net.ordered_variables()?)?;
    let layout = FactorLayout::new(net, &space)?;
    let rows: Vec<&[f64]> = layout
        .slots
        .iter()
        .map(|t| match &t.body {
            TableBody::Point(p) => p.as_slice(),
            _ => unreachable!("point network"),
        })
        .collect();
    let probs = exec.map_range(space.size(), |i| layout.atom_prob(&space, i, &rows));
    JointTable::new(space, probs)
}

/// `Pr(target | evidence)`; an error when the evidence has probability zero.
pub fn cond_prob(joint: &JointTable, query: &Query) -> Result<f64> {
    let both = match query.target.and(&query.evidence) {
        Some(e) => joint.prob(&e)?,
        None => 0.0,
    };
    let evidence = joint.prob(&query.evidence)?;
    if evidence <= 0.0 {
        return Err(Error::UndefinedConditional);
    }
    Ok(both / evidence)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexChoice {
    pub child: String,
    pub given: ConjunctiveEvent,
    pub vertex: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
    /// Vertex selections attaining `lo` and `hi`, for the tables that can affect the query.
    pub lo_witness: Vec<VertexChoice>,
    pub hi_witness: Vec<VertexChoice>,
    pub combinations: u128,
    /// Combinations under which the evidence had probability zero.
    pub skipped: u128,
}

/// Vertex set of one table body for bound enumeration.
pub fn table_vertices(body: &TableBody) -> Result<Vec<Vec<f64>>> {
    match body {
        TableBody::Point(p) => Ok(vec![p.clone()]),
        TableBody::Interval { lower, upper } => vertices_box_simplex(lower, upper),
        TableBody::Convex(ConvexSpec::Vertices(vs)) => {
            let mut out: Vec<Vec<f64>> = Vec::new();
            for v in vs {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Ok(out)
        }
        TableBody::Convex(ConvexSpec::Halfspaces(hs)) => {
            let d = hs.first().map(|h| h.a.len()).unwrap_or(0);
            if d == 0 {
                return Err(Error::invalid(
                    "halfspace set without halfspaces has no recorded dimension",
                ));
            }
            if d > MAX_CONVERSION_DIM {
                return Err(Error::CapExceeded {
                    what: "halfspace-to-vertex conversion dimension".into(),
                    size: d as u128,
                    cap: MAX_CONVERSION_DIM as u128,
                });
            }
            let vs = hrep_vertices(hs, d)?;
            if vs.is_empty() {
                return Err(Error::Infeasible("halfspace set is empty".into()));
            }
            Ok(vs)
        }
    }
}

/// Exact lower and upper bounds of `Pr(target | evidence)` over every network obtained by
/// choosing one vertex per conditional table.
///
/// For a fixed choice in all other tables the conditional probability is a ratio of two
/// functions linear in one table's vector, so both extremes are attained at vertices.
/// Only tables of ancestors of the query variables are enumerated.
pub fn credal_bounds(net: &CredalNetwork, query: &Query) -> Result<Bounds> {
    credal_bounds_with(net, query, Execution::default())
}

pub fn credal_bounds_with(net: &CredalNetwork, query: &Query, exec: Execution) -> Result<Bounds> {
    net.ensure_valid()?;
    for v in query.variables() {
        net.variable(v)?;
    }
    let relevant: BTreeSet<&str> = net.ancestral_closure(query.variables());
    let vars = net
        .topological_order()?
        .into_iter()
        .filter(|n| relevant.contains(n.as_str()))
        .map(|n| net.variable(&n).cloned())
        .collect::<Result<Vec<_>>>()?;
    let space = EventSpace::new(vars)?;
    let layout = FactorLayout::new(net, &space)?;
    let options: Vec<Vec<Vec<f64>>> = layout
        .slots
        .iter()
        .map(|t| table_vertices(&t.body))
        .collect::<Result<_>>()?;

    let total: u128 = options.iter().map(|o| o.len() as u128).product();
    if total > MAX_COMBINATIONS {
        return Err(Error::CapExceeded {
            what: "vertex combinations".into(),
            size: total,
            cap: MAX_COMBINATIONS,
        });
    }
    let target = space.matcher(&query.target)?;
    let evidence = space.matcher(&query.evidence)?;
    let conflict = query.target.and(&query.evidence).is_none();

    let decode = |mut k: usize| -> Vec<usize> {
        let mut choice = vec![0; options.len()];
        for (slot, opts) in options.iter().enumerate().rev() {
            choice[slot] = k % opts.len();
            k /= opts.len();
        }
        choice
    };
    let evaluate = |k: usize| -> Option<f64> {
        let choice = decode(k);
        let rows: Vec<&[f64]> = choice
            .iter()
            .zip(&options)
            .map(|(&c, opts)| opts[c].as_slice())
            .collect();
        conditional(&space, &layout, &rows, &target, &evidence, conflict)
    };

    // (lo, lo_index, hi, hi_index, skipped)
    type Acc = (f64, usize, f64, usize, u128);
    let identity: Acc = (f64::INFINITY, usize::MAX, f64::NEG_INFINITY, usize::MAX, 0);
    let (lo, lo_idx, hi, hi_idx, skipped) = exec.map_reduce(
        total as usize,
        identity,
        |k| match evaluate(k) {
            Some(v) => (v, k, v, k, 0),
            None => (f64::INFINITY, usize::MAX, f64::NEG_INFINITY, usize::MAX, 1),
        },
        |a, b| {
            // Ties resolve to the smaller combination index so results are deterministic.
            let (lo, lo_i) = if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { (b.0, b.1) } else { (a.0, a.1) };
            let (hi, hi_i) = if b.2 > a.2 || (b.2 == a.2 && b.3 < a.3) { (b.2, b.3) } else { (a.2, a.3) };
            (lo, lo_i, hi, hi_i, a.4 + b.4)
        },
    );
    if lo_idx == usize::MAX {
        return Err(Error::UndefinedConditional);
    }
    let witness = |k: usize| -> Vec<VertexChoice> {
        decode(k)
            .iter()
            .zip(&layout.slots)
            .zip(&options)
            .map(|((&c, t), opts)| VertexChoice {
                child: t.child.clone(),
                given: t.given.clone(),
                vertex: opts[c].clone(),
            })
            .collect()
    };
    Ok(Bounds {
        lo,
        hi,
        lo_witness: witness(lo_idx),
        hi_witness: witness(hi_idx),
        combinations: total,
        skipped,
    })
}

fn conditional(
    space: &EventSpace,
    layout: &FactorLayout,
    rows: &[&[f64]],
    target: &EventMatcher,
    evidence: &EventMatcher,
    conflict: bool,
) -> Option<f64> {
    let mut both = 0.0;
    let mut ev = 0.0;
    for atom in 0..space.size() {
        if !evidence.matches_index(atom) {
            continue;
        }
        let p = layout.atom_prob(space, atom, rows);
        ev += p;
        if !conflict && target.matches_index(atom) {
            both += p;
        }
    }
    (ev > 0.0).then(|| both / ev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovViolation {
    pub variable: String,
    pub gap: f64,
}

/// Checks the local Markov property of `net`'s graph in `joint`: every variable is
/// independent of its non-descendant non-parents given its parents (within `tol`).
pub fn markov_violations(joint: &JointTable, net: &CredalNetwork, tol: f64) -> Result<Vec<MarkovViolation>> {
    let mut out = Vec::new();
    for v in net.variables() {
        let name = v.name();
        let parents: Vec<&str> = net.parents(name);
        let desc = net.descendants(name);
        let others: Vec<&str> = net
            .variables()
            .iter()
            .map(|w| w.name())
            .filter(|w| *w != name && !parents.contains(w) && !desc.contains(w))
            .collect();
        if others.is_empty() {
            continue;
        }
        let gap = ci_gap(joint, &[name], &others, &parents, tol)?;
        if gap > tol {
            out.push(MarkovViolation {
                variable: name.to_string(),
                gap,
            });
        }
    }
    Ok(out)
}

/// `Pr(child | given)` for every table of `net`, `None` where the parent instantiation has
/// probability zero in `joint`.
pub fn local_conditionals(joint: &JointTable, net: &CredalNetwork) -> Result<Vec<(ConditionalSet, Option<Vec<f64>>)>> {
    let mut out = Vec::new();
    for t in net.tables() {
        let child = net.variable(&t.child)?;
        let given = joint.prob(&t.given)?;
        let row = if given > 0.0 {
            let mut r = Vec::with_capacity(child.size());
            for value in child.domain() {
                let e = t
                    .given
                    .and(&ConjunctiveEvent::assign(&t.child, value))
                    .ok_or_else(|| Error::invalid("table conditions on its own child"))?;
                r.push(joint.prob(&e)? / given);
            }
            Some(r)
        } else {
            None
        };
        out.push((t.clone(), row));
    }
    Ok(out)
}
