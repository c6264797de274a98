//! The undirected co-occurrence graph of a set of conditionals, graph separation, and a
//! numeric conditional-independence check against a joint table.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::JointTable;
use crate::network::KnowledgeBase;

/// Default tolerance for [`cond_independent`].
pub const CI_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    nodes: Vec<String>,
    edges: BTreeSet<(String, String)>,
}

impl UndirectedGraph {
    pub fn new(nodes: Vec<String>) -> Self {
        Self {
            nodes,
            edges: BTreeSet::new(),
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn add_edge(&mut self, a: &str, b: &str) -> Result<()> {
        for n in [a, b] {
            if !self.nodes.iter().any(|x| x == n) {
                return Err(Error::UnknownVariable(n.to_string()));
            }
        }
        if a != b {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            self.edges.insert((a.to_string(), b.to_string()));
        }
        Ok(())
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.edges.contains(&(a.to_string(), b.to_string()))
    }

    fn neighbours<'a>(&'a self, n: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter_map(move |(a, b)| {
            if a == n {
                Some(b.as_str())
            } else if b == n {
                Some(a.as_str())
            } else {
                None
            }
        })
    }
}

/// Edge `{X, Y}` iff `X != Y` occur together in some conditional.
pub fn build_gkb(kb: &KnowledgeBase) -> Result<UndirectedGraph> {
    let mut g = UndirectedGraph::new(kb.variables.iter().map(|v| v.name().to_string()).collect());
    for c in &kb.conditionals {
        let vars: Vec<&str> = c.variables().into_iter().collect();
        for (i, a) in vars.iter().enumerate() {
            for b in &vars[i + 1..] {
                g.add_edge(a, b)?;
            }
        }
    }
    Ok(g)
}

fn check_disjoint(x: &[&str], y: &[&str], z: &[&str]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for v in x.iter().chain(y).chain(z) {
        if !seen.insert(*v) {
            return Err(Error::invalid(format!("variable `{v}` appears in more than one set")));
        }
    }
    Ok(())
}

/// True iff every path from `x` to `y` passes through `z`.
pub fn separates(g: &UndirectedGraph, x: &[&str], y: &[&str], z: &[&str]) -> Result<bool> {
    check_disjoint(x, y, z)?;
    for v in x.iter().chain(y).chain(z) {
        if !g.nodes.iter().any(|n| n == v) {
            return Err(Error::UnknownVariable(v.to_string()));
        }
    }
    let blocked: BTreeSet<&str> = z.iter().copied().collect();
    let targets: BTreeSet<&str> = y.iter().copied().collect();
    let mut seen: BTreeSet<&str> = x.iter().copied().collect();
    let mut queue: VecDeque<&str> = x.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        for m in g.neighbours(n) {
            if targets.contains(m) {
                return Ok(false);
            }
            if !blocked.contains(m) && seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    Ok(true)
}

/// Largest `|Pr(x|y,z) - Pr(x|z)|` over instantiations with `Pr(y,z) > mass_floor`.
pub fn ci_gap(joint: &JointTable, x: &[&str], y: &[&str], z: &[&str], mass_floor: f64) -> Result<f64> {
    check_disjoint(x, y, z)?;
    if x.is_empty() || y.is_empty() {
        return Ok(0.0);
    }
    let order: Vec<&str> = x.iter().chain(y).chain(z).copied().collect();
    let m = joint.marginal(&order)?;
    let size = |vars: &[&str]| -> usize {
        vars.iter()
            .map(|v| joint.variables().iter().find(|w| w.name() == *v).map(|w| w.size()).unwrap_or(1))
            .product()
    };
    let (nx, ny, nz) = (size(x), size(y), size(z));
    let p = m.probs();
    // Layout is x-major, then y, then z.
    let at = |i: usize, j: usize, k: usize| p[(i * ny + j) * nz + k];
    let mut gap: f64 = 0.0;
    for k in 0..nz {
        let pz: f64 = (0..nx).flat_map(|i| (0..ny).map(move |j| (i, j))).map(|(i, j)| at(i, j, k)).sum();
        if pz <= 0.0 {
            continue;
        }
        for j in 0..ny {
            let pyz: f64 = (0..nx).map(|i| at(i, j, k)).sum();
            if pyz <= mass_floor {
                continue;
            }
            for i in 0..nx {
                let pxz: f64 = (0..ny).map(|jj| at(i, jj, k)).sum();
                gap = gap.max((at(i, j, k) / pyz - pxz / pz).abs());
            }
        }
    }
    Ok(gap)
}

/// `Pr(x|y,z) = Pr(x|z)` within `tol` wherever `Pr(y,z) > tol`.
pub fn cond_independent(joint: &JointTable, x: &[&str], y: &[&str], z: &[&str], tol: f64) -> Result<bool> {
    Ok(ci_gap(joint, x, y, z, tol)? <= tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImapViolation {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z: Vec<String>,
    pub max_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImapReport {
    pub checked: usize,
    pub separated: usize,
    pub violations: Vec<ImapViolation>,
}

/// Every assignment of variables to X, Y, Z or none, with X and Y non-empty.
fn all_triples(n: usize) -> Vec<Vec<u8>> {
    let total = 4usize.pow(n as u32);
    (0..total)
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let r = (k % 4) as u8;
                    k /= 4;
                    r
                })
                .collect::<Vec<u8>>()
        })
        .filter(|a| a.contains(&0) && a.contains(&1))
        .collect()
}

/// Checks that every triple separated in `G_KB` is conditionally independent in `joint`.
///
/// Exhaustive for fewer than four variables or when `trials` covers every triple;
/// otherwise `trials` triples are drawn uniformly (seeded, so reports are reproducible).
pub fn verify_imap(kb: &KnowledgeBase, joint: &JointTable, trials: usize, tol: f64) -> Result<ImapReport> {
    verify_imap_with(kb, joint, trials, tol, 0, Execution::default())
}

pub fn verify_imap_with(
    kb: &KnowledgeBase,
    joint: &JointTable,
    trials: usize,
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Result<ImapReport> {
    let g = build_gkb(kb)?;
    let names: Vec<&str> = g.nodes().iter().map(String::as_str).collect();
    for n in &names {
        joint.space().require_position(n)?;
    }
    let n = names.len();
    let exhaustive = n < 4 || 4u128.pow(n as u32) <= trials as u128;
    let triples: Vec<Vec<u8>> = if exhaustive {
        all_triples(n)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(trials);
        while out.len() < trials {
            let a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4u8)).collect();
            if a.contains(&0) && a.contains(&1) {
                out.push(a);
            }
        }
        out
    };
    let results = exec.map(&triples, |a| -> Result<Option<Option<ImapViolation>>> {
        let pick = |tag: u8| -> Vec<&str> { names.iter().zip(a).filter(|(_, t)| **t == tag).map(|(n, _)| *n).collect() };
        let (x, y, z) = (pick(0), pick(1), pick(2));
        if !separates(&g, &x, &y, &z)? {
            return Ok(None);
        }
        let gap = ci_gap(joint, &x, &y, &z, tol)?;
        let own = |v: Vec<&str>| v.into_iter().map(String::from).collect();
        Ok(Some((gap > tol).then(|| ImapViolation {
            x: own(x),
            y: own(y),
            z: own(z),
            max_gap: gap,
        })))
    });
    let mut report = ImapReport {
        checked: triples.len(),
        separated: 0,
        violations: Vec::new(),
    };
    for r in results {
        if let Some(v) = r? {
            report.separated += 1;
            report.violations.extend(v);
        }
    }
    Ok(report)
}
