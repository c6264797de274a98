//! Sequential maximum-entropy selection.
//!
//! [`select_sequential`] replaces every conditional set by its own maximum-entropy member,
//! one small solve per (variable, parent instantiation). [`select_sequential_direct`]
//! instead runs the chain of joint maximizations over growing variable prefixes, freezing
//! the previous prefix at each step; it materializes the joint and serves as a cross-check.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{ConjunctiveEvent, EventSpace, JointTable};
use crate::network::{ConditionalSet, ConvexSpec, CredalNetwork, KnowledgeBase, PointBayesNet, TableBody};
use crate::solvers::{
    freezing_constraints, linearize, maxent_box, maxent_hrep, maxent_joint_in, maxent_vrep, SolverConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TableDiagnostics {
    pub child: String,
    pub given: ConjunctiveEvent,
    pub entropy: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub bayes_net: PointBayesNet,
    pub order_used: Vec<String>,
    pub per_table_diagnostics: Vec<TableDiagnostics>,
}

fn select_table(table: &ConditionalSet, config: &SolverConfig) -> Result<(ConditionalSet, TableDiagnostics)> {
    let name_error = |e: Error| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!("table {} given {}: {msg}", table.child, table.given)),
        Error::NotConverged(msg) => Error::NotConverged(format!("table {} given {}: {msg}", table.child, table.given)),
        other => other,
    };
    let (body, entropy, iterations) = match &table.body {
        TableBody::Point(p) => (TableBody::Point(p.clone()), crate::solvers::entropy(p), 0),
        TableBody::Interval { lower, upper } => {
            let s = maxent_box(lower, upper, config).map_err(name_error)?;
            (TableBody::Point(s.probs), s.entropy, s.iterations)
        }
        TableBody::Convex(ConvexSpec::Vertices(vs)) => {
            let s = maxent_vrep(vs, config).map_err(name_error)?;
            (TableBody::Point(s.probs), s.entropy, s.iterations)
        }
        TableBody::Convex(ConvexSpec::Halfspaces(hs)) => {
            let d = hs.first().map(|h| h.a.len()).unwrap_or(0);
            if d == 0 {
                return Err(Error::invalid(format!(
                    "table {} given {} has no halfspaces to fix its dimension",
                    table.child, table.given
                )));
            }
            let s = maxent_hrep(hs, d, config).map_err(name_error)?;
            (TableBody::Point(s.probs), s.entropy, s.iterations)
        }
    };
    Ok((
        ConditionalSet::new(table.child.clone(), table.given.clone(), body),
        TableDiagnostics {
            child: table.child.clone(),
            given: table.given.clone(),
            entropy,
            iterations,
        },
    ))
}

/// The point network whose joint is the sequential maximum-entropy model of `net`.
pub fn select_sequential(net: &CredalNetwork, config: &SolverConfig) -> Result<SelectionResult> {
    select_sequential_with(net, config, Execution::default())
}

pub fn select_sequential_with(net: &CredalNetwork, config: &SolverConfig, exec: Execution) -> Result<SelectionResult> {
    net.ensure_valid()?;
    let order_used = net.topological_order()?;
    let solved = exec.map(net.tables(), |t| select_table(t, config));
    let mut tables = Vec::with_capacity(solved.len());
    let mut per_table_diagnostics = Vec::with_capacity(solved.len());
    for s in solved {
        let (t, d) = s?;
        tables.push(t);
        per_table_diagnostics.push(d);
    }
    Ok(SelectionResult {
        bayes_net: PointBayesNet::new(net.with_tables(tables)?)?,
        order_used,
        per_table_diagnostics,
    })
}

/// Runs the prefix chain literally: step `i` maximizes entropy over the first `i`
/// variables of `order` subject to every conditional on `order[i]` and to freezing each
/// atom of the step `i-1` result. The returned joint is laid out in topological order.
pub fn select_sequential_direct(net: &CredalNetwork, order: &[String], config: &SolverConfig) -> Result<JointTable> {
    net.ensure_valid()?;
    if !net.is_consistent_order(order) {
        return Err(Error::InconsistentOrder(order.join(",")));
    }
    let kb = net.to_kb();
    let mut previous: Option<JointTable> = None;
    for i in 0..order.len() {
        let vars = order[..=i]
            .iter()
            .map(|n| net.variable(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        let space = EventSpace::new(vars.clone())?;
        let step_kb = KnowledgeBase {
            variables: vars,
            conditionals: kb
                .conditionals
                .iter()
                .filter(|c| match c {
                    crate::network::Conditional::Event { conclusion, .. } => conclusion.get(&order[i]).is_some(),
                    crate::network::Conditional::Convex { variable, .. } => variable == &order[i],
                })
                .cloned()
                .collect(),
        };
        let mut constraints = linearize(&space, &step_kb)?;
        if let Some(prev) = &previous {
            constraints.extend(freezing_constraints(&space, prev)?);
        }
        previous = Some(maxent_joint_in(space, &constraints, config)?.joint);
    }
    let joint = previous.ok_or_else(|| Error::invalid("network has no variables"))?;
    let topo = net.topological_order()?;
    joint.reorder(&topo.iter().map(String::as_str).collect::<Vec<_>>())
}

/// The (non-sequential) maximum-entropy model of all of `net`'s conditionals,
/// ignoring the independencies of its graph.
pub fn global_me_model(net: &CredalNetwork, config: &SolverConfig) -> Result<JointTable> {
    net.ensure_valid()?;
    let space = EventSpace::new(net.ordered_variables()?)?;
    let constraints = linearize(&space, &net.to_kb())?;
    Ok(maxent_joint_in(space, &constraints, config)?.joint)
}

/// The maximum-entropy model of an arbitrary knowledge base, over its variables in
/// declaration order.
pub fn me_model(kb: &KnowledgeBase, config: &SolverConfig) -> Result<JointTable> {
    let space = EventSpace::new(kb.variables.clone())?;
    let constraints = linearize(&space, kb)?;
    Ok(maxent_joint_in(space, &constraints, config)?.joint)
}

/// True when `r` lies in the table body's set within `tol`.
pub fn body_contains(body: &TableBody, r: &[f64], tol: f64) -> Result<bool> {
    let dot = |a: &[f64]| a.iter().zip(r).map(|(x, y)| x * y).sum::<f64>();
    Ok(match body {
        TableBody::Point(p) => p.iter().zip(r).all(|(a, b)| (a - b).abs() <= tol),
        TableBody::Interval { lower, upper } => r
            .iter()
            .zip(lower.iter().zip(upper))
            .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol),
        TableBody::Convex(ConvexSpec::Halfspaces(hs)) => hs.iter().all(|h| dot(&h.a) <= h.b + tol),
        TableBody::Convex(ConvexSpec::Vertices(vs)) => {
            let h = crate::solvers::vrep_facets(vs)?;
            h.inequalities.iter().all(|f| dot(&f.a) <= f.b + tol)
                && h.equalities.iter().all(|f| (dot(&f.a) - f.b).abs() <= tol)
        }
    } && r.len() == body_len(body))
}

fn body_len(body: &TableBody) -> usize {
    match body {
        TableBody::Point(p) => p.len(),
        TableBody::Interval { lower, .. } => lower.len(),
        TableBody::Convex(ConvexSpec::Vertices(vs)) => vs.first().map_or(0, Vec::len),
        TableBody::Convex(ConvexSpec::Halfspaces(hs)) => hs.first().map_or(0, |h| h.a.len()),
    }
}
