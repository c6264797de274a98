#![allow(dead_code)]

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use seqme::model::{ConjunctiveEvent, Variable};
use seqme::network::{Conditional, ConditionalSet, ConvexSpec, CredalNetwork, KnowledgeBase, TableBody};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random point of the simplex with every coordinate at least `floor`.
pub fn simplex_point(rng: &mut ChaCha8Rng, d: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let total: f64 = raw.iter().sum();
    let spare = 1.0 - floor * d as f64;
    raw.iter().map(|x| floor + spare * x / total).collect()
}

fn variables(rng: &mut ChaCha8Rng, n: usize, max_domain: usize) -> Vec<Variable> {
    (0..n)
        .map(|i| {
            let name = ((b'A' + i as u8) as char).to_string();
            Variable::indexed(&name, rng.gen_range(2..=max_domain)).unwrap()
        })
        .collect()
}

/// Edges over variables `0..n` where node `i` draws up to `max_parents` parents from `0..i`.
fn random_edges(rng: &mut ChaCha8Rng, vars: &[Variable], max_parents: usize) -> Vec<(String, String)> {
    let mut edges = Vec::new();
    for i in 1..vars.len() {
        let k = rng.gen_range(0..=max_parents.min(i));
        let mut candidates: Vec<usize> = (0..i).collect();
        candidates.shuffle(rng);
        for &p in &candidates[..k] {
            edges.push((vars[p].name().to_string(), vars[i].name().to_string()));
        }
    }
    edges
}

fn parent_instantiations(vars: &[Variable], edges: &[(String, String)], child: &str) -> Vec<ConjunctiveEvent> {
    let parents: Vec<&Variable> = vars
        .iter()
        .filter(|v| edges.iter().any(|(p, c)| p == v.name() && c == child))
        .collect();
    if parents.is_empty() {
        return vec![ConjunctiveEvent::top()];
    }
    parents
        .iter()
        .map(|p| p.domain().iter().map(move |v| (p.name().to_string(), v.clone())))
        .multi_cartesian_product()
        .map(|pairs| ConjunctiveEvent::from_pairs(pairs).unwrap())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyKind {
    Point,
    Interval,
    Vertices,
}

pub fn point_body(rng: &mut ChaCha8Rng, d: usize) -> TableBody {
    TableBody::Point(simplex_point(rng, d, 0.05))
}

/// A box around a random simplex point, so it always meets the simplex.
pub fn interval_body(rng: &mut ChaCha8Rng, d: usize) -> TableBody {
    let (lower, upper) = random_box(rng, d);
    TableBody::Interval { lower, upper }
}

pub fn random_box(rng: &mut ChaCha8Rng, d: usize) -> (Vec<f64>, Vec<f64>) {
    let p = simplex_point(rng, d, 0.02);
    let lower = p.iter().map(|x| (x - rng.gen_range(0.0..0.3)).max(0.0)).collect();
    let upper = p.iter().map(|x| (x + rng.gen_range(0.0..0.3)).min(1.0)).collect();
    (lower, upper)
}

pub fn vertices_body(rng: &mut ChaCha8Rng, d: usize) -> TableBody {
    let k = rng.gen_range(1..=4);
    TableBody::Convex(ConvexSpec::Vertices((0..k).map(|_| simplex_point(rng, d, 0.02)).collect()))
}

fn body(rng: &mut ChaCha8Rng, kind: BodyKind, d: usize) -> TableBody {
    match kind {
        BodyKind::Point => point_body(rng, d),
        BodyKind::Interval => interval_body(rng, d),
        BodyKind::Vertices => vertices_body(rng, d),
    }
}

fn network(
    rng: &mut ChaCha8Rng,
    n: usize,
    max_domain: usize,
    max_parents: usize,
    kinds: &[BodyKind],
) -> CredalNetwork {
    let vars = variables(rng, n, max_domain);
    let edges = random_edges(rng, &vars, max_parents);
    let mut tables = Vec::new();
    for v in &vars {
        for given in parent_instantiations(&vars, &edges, v.name()) {
            let kind = *kinds.choose(rng).unwrap();
            tables.push(ConditionalSet::new(v.name(), given, body(rng, kind, v.size())));
        }
    }
    // Declaration order should not matter to anything downstream.
    let mut shuffled = vars.clone();
    shuffled.shuffle(rng);
    CredalNetwork::new(shuffled, edges, tables).unwrap()
}

/// Point network whose graph is a forest of directed trees.
pub fn point_tree(rng: &mut ChaCha8Rng) -> CredalNetwork {
    let n = rng.gen_range(2..=5);
    network(rng, n, 3, 1, &[BodyKind::Point])
}

/// DAG with up to two parents per node and a mix of point, interval and vertex tables.
pub fn mixed_network(rng: &mut ChaCha8Rng) -> CredalNetwork {
    let n = rng.gen_range(2..=4);
    network(rng, n, 3, 2, &[BodyKind::Point, BodyKind::Interval, BodyKind::Vertices])
}

pub fn interval_tree(rng: &mut ChaCha8Rng) -> CredalNetwork {
    let n = rng.gen_range(2..=4);
    network(rng, n, 3, 1, &[BodyKind::Interval])
}

/// Small binary interval DAG, cheap enough for exhaustive bound enumeration.
pub fn binary_interval_network(rng: &mut ChaCha8Rng) -> CredalNetwork {
    let n = rng.gen_range(2..=4);
    network(rng, n, 2, 2, &[BodyKind::Interval])
}

/// A single-assignment target and an evidence event on a different variable (or `true`).
pub fn random_query(rng: &mut ChaCha8Rng, net: &CredalNetwork) -> (ConjunctiveEvent, ConjunctiveEvent) {
    let vars = net.variables();
    let t = rng.gen_range(0..vars.len());
    let value = |rng: &mut ChaCha8Rng, v: &Variable| v.domain()[rng.gen_range(0..v.size())].clone();
    let target = ConjunctiveEvent::assign(vars[t].name(), value(rng, &vars[t]));
    let others: Vec<&Variable> = vars.iter().filter(|v| v.name() != vars[t].name()).collect();
    let evidence = if others.is_empty() || rng.gen_bool(0.3) {
        ConjunctiveEvent::top()
    } else {
        let e = others[rng.gen_range(0..others.len())];
        ConjunctiveEvent::assign(e.name(), value(rng, e))
    };
    (target, evidence)
}

pub fn point_network(rng: &mut ChaCha8Rng, n: usize, max_parents: usize) -> CredalNetwork {
    network(rng, n, 3, max_parents, &[BodyKind::Point])
}

/// A knowledge base with arbitrary premises that is satisfied by a random positive joint,
/// so it is always consistent.
pub fn satisfiable_kb(rng: &mut ChaCha8Rng) -> KnowledgeBase {
    satisfiable_kb_with(rng, true)
}

/// Like [`satisfiable_kb`] but every conditional is a point constraint.
pub fn satisfiable_point_kb(rng: &mut ChaCha8Rng) -> KnowledgeBase {
    satisfiable_kb_with(rng, false)
}

fn satisfiable_kb_with(rng: &mut ChaCha8Rng, intervals: bool) -> KnowledgeBase {
    let n = rng.gen_range(2..=4);
    let vars = variables(rng, n, 3);
    let sizes: Vec<usize> = vars.iter().map(Variable::size).collect();
    let atoms: usize = sizes.iter().product();
    let joint = simplex_point(rng, atoms, 0.2 / atoms as f64);
    let prob = |event: &[(usize, usize)]| -> f64 {
        (0..atoms)
            .filter(|&idx| {
                let mut rest = idx;
                let mut values = vec![0; n];
                for pos in (0..n).rev() {
                    values[pos] = rest % sizes[pos];
                    rest /= sizes[pos];
                }
                event.iter().all(|&(pos, val)| values[pos] == val)
            })
            .map(|idx| joint[idx])
            .sum()
    };
    let to_event = |pairs: &[(usize, usize)]| {
        ConjunctiveEvent::from_pairs(pairs.iter().map(|&(p, v)| (vars[p].name().to_string(), vars[p].domain()[v].clone())))
            .unwrap()
    };
    let count = rng.gen_range(1..=4);
    let mut conditionals = Vec::new();
    for _ in 0..count {
        let mut positions: Vec<usize> = (0..n).collect();
        positions.shuffle(rng);
        let nc = rng.gen_range(1..=2.min(n));
        let np = rng.gen_range(0..=(n - nc).min(2));
        let pick = |rng: &mut ChaCha8Rng, ps: &[usize]| -> Vec<(usize, usize)> {
            ps.iter().map(|&p| (p, rng.gen_range(0..sizes[p]))).collect()
        };
        let conclusion = pick(rng, &positions[..nc]);
        let premise = pick(rng, &positions[nc..nc + np]);
        let both: Vec<(usize, usize)> = conclusion.iter().chain(&premise).copied().collect();
        let r = prob(&both) / prob(&premise);
        let c = if !intervals || rng.gen_bool(0.5) {
            Conditional::point(to_event(&conclusion), to_event(&premise), r)
        } else {
            let l = (r - rng.gen_range(0.0..0.2)).max(0.0);
            let u = (r + rng.gen_range(0.0..0.2)).min(1.0);
            Conditional::interval(to_event(&conclusion), to_event(&premise), l, u)
        };
        conditionals.push(c);
    }
    KnowledgeBase::new(vars, conditionals).unwrap()
}

/// Every ordering of the network's variables that respects its edges.
pub fn consistent_orders(net: &CredalNetwork) -> Vec<Vec<String>> {
    let names: Vec<String> = net.variables().iter().map(|v| v.name().to_string()).collect();
    names
        .iter()
        .cloned()
        .permutations(names.len())
        .filter(|o| net.is_consistent_order(o))
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
