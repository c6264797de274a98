//! Maximum entropy over the full atomic-event simplex subject to linearized conditionals.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ConjunctiveEvent, EventSpace, JointTable, Variable};
use crate::network::{Bound, Conditional, ConvexSpec, Halfspace, KnowledgeBase};

use super::dual::{self, DualFailure, Row};
use super::polytope::vrep_facets;
use super::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Equal,
    LessEqual,
}

/// `Σ_ω coefficients[ω] · Pr(ω)  (= | <=)  0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedConstraint {
    pub coefficients: BTreeMap<usize, f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearizedConstraint {
    pub fn value(&self, probs: &[f64]) -> f64 {
        self.coefficients.iter().map(|(i, c)| c * probs[*i]).sum::<f64>() - self.rhs
    }

    /// Equality residual or inequality violation.
    pub fn violation(&self, probs: &[f64]) -> f64 {
        let v = self.value(probs);
        match self.relation {
            Relation::Equal => v.abs(),
            Relation::LessEqual => v.max(0.0),
        }
    }
}

/// Emits `Σ_{ω ⇒ premise} coef(ω) Pr(ω) rel 0`, dropping rows without nonzero coefficients.
fn push_row(
    out: &mut Vec<LinearizedConstraint>,
    space: &EventSpace,
    premise: &ConjunctiveEvent,
    relation: Relation,
    coef: impl Fn(usize) -> f64,
) -> Result<()> {
    let m = space.matcher(premise)?;
    let coefficients: BTreeMap<usize, f64> = (0..space.size())
        .filter(|&i| m.matches_index(i))
        .map(|i| (i, coef(i)))
        .filter(|(_, c)| *c != 0.0)
        .collect();
    if !coefficients.is_empty() {
        out.push(LinearizedConstraint {
            coefficients,
            relation,
            rhs: 0.0,
        });
    }
    Ok(())
}

/// Linearize every conditional of `kb` over `space`.
///
/// `(d|c)[r]` becomes `Pr(d∧c) - r·Pr(c) = 0`; `(d|c)[l,u]` becomes
/// `l·Pr(c) - Pr(c∧d) <= 0` and `Pr(c∧d) - u·Pr(c) <= 0`; a halfspace `a·r <= b` of a
/// convex conditional `(X|c)[K]` becomes `Σ_j a_j Pr(c ∧ X=x_j) - b·Pr(c) <= 0`.
/// Vertex sets are converted to facets first (dimension at most 4).
pub fn linearize(space: &EventSpace, kb: &KnowledgeBase) -> Result<Vec<LinearizedConstraint>> {
    let mut out = Vec::new();
    for cond in &kb.conditionals {
        match cond {
            Conditional::Event {
                conclusion,
                premise,
                bound,
            } => {
                let hit = space.matcher(conclusion)?;
                let ind = |i: usize| if hit.matches_index(i) { 1.0 } else { 0.0 };
                match *bound {
                    Bound::Point(r) => push_row(&mut out, space, premise, Relation::Equal, |i| ind(i) - r)?,
                    Bound::Interval(l, u) => {
                        push_row(&mut out, space, premise, Relation::LessEqual, |i| l - ind(i))?;
                        push_row(&mut out, space, premise, Relation::LessEqual, |i| ind(i) - u)?;
                    }
                }
            }
            Conditional::Convex { variable, premise, spec } => {
                let pos = space.require_position(variable)?;
                let d = space.variables()[pos].size();
                let (equalities, inequalities) = match spec {
                    ConvexSpec::Halfspaces(hs) => (Vec::new(), hs.clone()),
                    ConvexSpec::Vertices(vs) => {
                        let h = vrep_facets(vs)?;
                        (h.equalities, h.inequalities)
                    }
                };
                let rows = equalities
                    .iter()
                    .map(|h| (h, Relation::Equal))
                    .chain(inequalities.iter().map(|h| (h, Relation::LessEqual)));
                for (h, relation) in rows {
                    check_len(h, d)?;
                    push_row(&mut out, space, premise, relation, |i| {
                        h.a[space.value_at(i, pos)] - h.b
                    })?;
                }
            }
        }
    }
    Ok(out)
}

fn check_len(h: &Halfspace, d: usize) -> Result<()> {
    if h.a.len() != d {
        return Err(Error::invalid(format!("halfspace normal has length {}, expected {d}", h.a.len())));
    }
    Ok(())
}

/// Freezing rows `Pr(ω') - v·Pr(⊤) = 0` for every atom `ω'` of a joint over a prefix of
/// `space`'s variables, marginalized into `space`.
pub fn freezing_constraints(space: &EventSpace, previous: &JointTable) -> Result<Vec<LinearizedConstraint>> {
    let prev = previous.space();
    let positions: Vec<usize> = prev
        .variables()
        .iter()
        .map(|v| space.require_position(v.name()))
        .collect::<Result<_>>()?;
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); prev.size()];
    for i in 0..space.size() {
        let j: usize = positions
            .iter()
            .zip(prev.strides())
            .map(|(&pos, &s)| space.value_at(i, pos) * s)
            .sum();
        for (k, row) in rows.iter_mut().enumerate() {
            let c = if k == j { 1.0 } else { 0.0 } - previous.probs()[k];
            if c != 0.0 {
                row.insert(i, c);
            }
        }
    }
    Ok(rows
        .into_iter()
        .filter(|r| !r.is_empty())
        .map(|coefficients| LinearizedConstraint {
            coefficients,
            relation: Relation::Equal,
            rhs: 0.0,
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct JointSolution {
    pub joint: JointTable,
    /// Largest constraint residual at the returned table.
    pub residual: f64,
    /// Duality gap, an upper bound on the entropy shortfall.
    pub gap: f64,
    pub iterations: usize,
}

/// The maximum-entropy joint over `vars` satisfying every constraint.
pub fn maxent_joint(
    vars: &[Variable],
    constraints: &[LinearizedConstraint],
    config: &SolverConfig,
) -> Result<JointSolution> {
    let space = EventSpace::new(vars.to_vec())?;
    maxent_joint_in(space, constraints, config)
}

pub(crate) fn maxent_joint_in(
    space: EventSpace,
    constraints: &[LinearizedConstraint],
    config: &SolverConfig,
) -> Result<JointSolution> {
    let n = space.size();
    let mut rows = Vec::with_capacity(constraints.len());
    for c in constraints {
        if c.rhs != 0.0 {
            return Err(Error::invalid("linearized constraints must have a zero right-hand side"));
        }
        if let Some((&i, _)) = c.coefficients.iter().find(|(i, _)| **i >= n) {
            return Err(Error::invalid(format!("constraint references atom {i} outside 0..{n}")));
        }
        rows.push(Row {
            coef: c.coefficients.iter().map(|(i, v)| (*i, *v)).collect(),
            inequality: c.relation == Relation::LessEqual,
        });
    }
    match dual::solve(n, rows, config) {
        Ok(out) => {
            let residual = constraints
                .iter()
                .map(|c| c.violation(&out.probs))
                .fold(0.0, f64::max);
            Ok(JointSolution {
                joint: JointTable::new(space, out.probs)?,
                residual,
                gap: out.gap,
                iterations: out.iterations,
            })
        }
        Err(DualFailure::Infeasible { row, violation }) => Err(Error::Infeasible(format!(
            "constraints are unsatisfiable; constraint {row} is most violated ({violation:.3e})"
        ))),
        Err(DualFailure::NotConverged { residual, iterations }) => Err(Error::NotConverged(format!(
            "joint solve reached residual {residual:.3e} after {iterations} iterations"
        ))),
    }
}
