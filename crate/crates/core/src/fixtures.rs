//! Bundled networks used by the demos and the test suites.

use crate::error::Result;
use crate::format::parse_network;
use crate::model::{ConjunctiveEvent, Variable};
use crate::network::{ConditionalSet, CredalNetwork};

pub const EXAMPLE52_JSON: &str = include_str!("../fixtures/example52.json");
pub const COLLIDER_WITNESS_JSON: &str = include_str!("../fixtures/collider_witness.json");

/// Five-variable interval network with the chain A → C → F and isolated B, E.
pub fn example52() -> CredalNetwork {
    parse_network(EXAMPLE52_JSON).expect("bundled fixture parses")
}

/// Expected maximum-entropy selection for the interval tables of [`example52`]:
/// (child, parent instantiation, selected distribution).
pub fn example52_expected_selection() -> Vec<(&'static str, &'static str, Vec<f64>)> {
    vec![
        ("A", "true", vec![0.5, 0.5]),
        ("C", "A=a1", vec![0.4, 0.6]),
        ("C", "A=a2", vec![0.5, 0.5]),
        ("F", "C=c1", vec![0.7, 0.15, 0.15]),
        ("F", "C=c2", vec![0.6, 0.2, 0.2]),
    ]
}

/// Expected `Pr(F=f1 | A=a1)` under the selection, and its lower/upper credal bounds.
pub const EXAMPLE52_QUERY: (&str, &str) = ("F=f1", "A=a1");
pub const EXAMPLE52_SEQUENTIAL: f64 = 0.64;
pub const EXAMPLE52_BOUNDS: (f64, f64) = (0.63, 0.84);

/// Burglary chain A → B → C (burglary, alarm, call) where the only information is
/// `Pr(C=c | B=b) = u`; every other table is the vacuous interval `[0, 1]`.
pub fn burglary(u: f64) -> Result<CredalNetwork> {
    let vars = vec![
        Variable::new("A", ["a", "not_a"])?,
        Variable::new("B", ["b", "not_b"])?,
        Variable::new("C", ["c", "not_c"])?,
    ];
    let e = |s: &str| s.parse::<ConjunctiveEvent>();
    let vacuous = |child: &str, given: ConjunctiveEvent| ConditionalSet::interval(child, given, vec![0.0, 0.0], vec![1.0, 1.0]);
    let tables = vec![
        vacuous("A", e("true")?),
        vacuous("B", e("A=a")?),
        vacuous("B", e("A=not_a")?),
        ConditionalSet::interval("C", e("B=b")?, vec![u, 1.0 - u], vec![u, 1.0 - u]),
        vacuous("C", e("B=not_b")?),
    ];
    let edges = vec![("A".into(), "B".into()), ("B".into(), "C".into())];
    CredalNetwork::new(vars, edges, tables)
}

/// Closed form of `Pr(B=b | A=a)` in the global maximum-entropy model of [`burglary`].
pub fn burglary_global_closed_form(u: f64) -> f64 {
    1.0 / (1.0 + 2.0 * u.powf(u) * (1.0 - u).powf(1.0 - u))
}

/// Point collider A → C ← B whose global maximum-entropy model makes A and B dependent.
pub fn collider_witness() -> CredalNetwork {
    parse_network(COLLIDER_WITNESS_JSON).expect("bundled fixture parses")
}
