//! JSON network files and joint-table dumps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{ConjunctiveEvent, JointTable, Variable};
use crate::network::{body_violation, ConditionalSet, ConvexSpec, CredalNetwork, Halfspace, TableBody, Violation};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    variables: Vec<VariableDoc>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default)]
    tables: Vec<TableDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    domain: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableDoc {
    child: String,
    #[serde(default)]
    given: BTreeMap<String, String>,
    #[serde(flatten)]
    body: BodyDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
enum BodyDoc {
    #[serde(rename = "point")]
    Point { p: Vec<f64> },
    #[serde(rename = "interval")]
    Interval { l: Vec<f64>, u: Vec<f64> },
    #[serde(rename = "convex-v")]
    ConvexV { vertices: Vec<Vec<f64>> },
    #[serde(rename = "convex-h")]
    ConvexH { halfspaces: Vec<HalfspaceDoc> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfspaceDoc {
    a: Vec<f64>,
    b: f64,
}

/// Parses a network document.
///
/// Rejects malformed JSON (with its location), unknown variables or values, duplicate
/// tables and tables whose numbers are not admissible. Graph-level problems such as
/// cycles or missing tables are left to [`CredalNetwork::validate`].
pub fn parse_network(text: &str) -> Result<CredalNetwork> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let variables = doc
        .variables
        .into_iter()
        .map(|v| Variable::new(v.name, v.domain))
        .collect::<Result<Vec<_>>>()?;
    let tables = doc
        .tables
        .into_iter()
        .map(|t| {
            let given = ConjunctiveEvent::from_pairs(t.given)?;
            let body = match t.body {
                BodyDoc::Point { p } => TableBody::Point(p),
                BodyDoc::Interval { l, u } => TableBody::Interval { lower: l, upper: u },
                BodyDoc::ConvexV { vertices } => TableBody::Convex(ConvexSpec::Vertices(vertices)),
                BodyDoc::ConvexH { halfspaces } => TableBody::Convex(ConvexSpec::Halfspaces(
                    halfspaces.into_iter().map(|h| Halfspace::new(h.a, h.b)).collect(),
                )),
            };
            Ok(ConditionalSet::new(t.child, given, body))
        })
        .collect::<Result<Vec<_>>>()?;
    let net = CredalNetwork::new(variables, doc.edges, tables)?;
    for (i, t) in net.tables().iter().enumerate() {
        if net.tables()[..i].iter().any(|s| s.child == t.child && s.given == t.given) {
            return Err(Error::DuplicateTable {
                child: t.child.clone(),
                given: t.given.to_string(),
            });
        }
        match body_violation(t) {
            Some(Violation::InvalidBody { child, given, reason }) => {
                return Err(Error::InvalidTable { child, given, reason })
            }
            Some(Violation::EmptyConvexSet { child, given }) => {
                return Err(Error::InvalidTable {
                    child,
                    given,
                    reason: "convex set is empty".into(),
                })
            }
            _ => {}
        }
    }
    Ok(net)
}

/// Canonical rendering; `parse_network(&render_network(n))` reproduces `n`.
pub fn render_network(net: &CredalNetwork) -> String {
    let doc = NetworkDoc {
        variables: net
            .variables()
            .iter()
            .map(|v| VariableDoc {
                name: v.name().to_string(),
                domain: v.domain().to_vec(),
            })
            .collect(),
        edges: net.edges().to_vec(),
        tables: net
            .tables()
            .iter()
            .map(|t| TableDoc {
                child: t.child.clone(),
                given: t.given.assignments().clone(),
                body: match &t.body {
                    TableBody::Point(p) => BodyDoc::Point { p: p.clone() },
                    TableBody::Interval { lower, upper } => BodyDoc::Interval {
                        l: lower.clone(),
                        u: upper.clone(),
                    },
                    TableBody::Convex(ConvexSpec::Vertices(vs)) => BodyDoc::ConvexV { vertices: vs.clone() },
                    TableBody::Convex(ConvexSpec::Halfspaces(hs)) => BodyDoc::ConvexH {
                        halfspaces: hs
                            .iter()
                            .map(|h| HalfspaceDoc { a: h.a.clone(), b: h.b })
                            .collect(),
                    },
                },
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("network documents always serialize");
    s.push('\n');
    s
}

/// Rounds to 12 significant digits; printing the result with `{}` gives the shortest
/// string that round-trips to it.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

pub fn format_number(x: f64) -> String {
    let r = round_sig(x);
    if r != 0.0 && (r.abs() < 1e-4 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn rounded_value(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
}

/// JSON list of `{"assignment": {...}, "p": ...}` ordered by atom index.
pub fn render_joint(joint: &JointTable) -> String {
    let space = joint.space();
    let rows: Vec<Value> = joint
        .probs()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let assignment: Map<String, Value> = space
                .variables()
                .iter()
                .enumerate()
                .map(|(pos, v)| (v.name().to_string(), Value::String(v.domain()[space.value_at(i, pos)].clone())))
                .collect();
            let mut row = Map::new();
            row.insert("assignment".into(), Value::Object(assignment));
            row.insert("p".into(), rounded_value(*p));
            Value::Object(row)
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("serializable");
    s.push('\n');
    s
}

/// Network document with every probability rounded for output.
pub fn render_network_rounded(net: &CredalNetwork) -> Result<String> {
    let round_all = |v: &[f64]| v.iter().map(|x| round_sig(*x)).collect::<Vec<_>>();
    let tables = net
        .tables()
        .iter()
        .map(|t| {
            let body = match &t.body {
                TableBody::Point(p) => TableBody::Point(round_all(p)),
                TableBody::Interval { lower, upper } => TableBody::Interval {
                    lower: round_all(lower),
                    upper: round_all(upper),
                },
                other => other.clone(),
            };
            ConditionalSet::new(t.child.clone(), t.given.clone(), body)
        })
        .collect();
    Ok(render_network(&net.with_tables(tables)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{"variables":[{"name":"A","domain":["a1","a2"]}],
        "edges":[],
        "tables":[{"child":"A","given":{},"kind":"point","p":[0.5,0.5]}]}"#;

    #[test]
    fn parses_smallest_network() {
        let net = parse_network(SMALL).unwrap();
        assert_eq!(net.variables().len(), 1);
        assert!(net.validate().is_clean());
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        let err = parse_network("{\"variables\": [\n  {\"name\": }").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn interval_sum_violation_is_a_parse_error() {
        let doc = r#"{"variables":[{"name":"A","domain":["a1","a2"]}],
            "tables":[{"child":"A","given":{},"kind":"interval","l":[0.6,0.6],"u":[0.7,0.7]}]}"#;
        let err = parse_network(doc).unwrap_err();
        assert!(err.to_string().contains("Σl > 1"), "{err}");
    }

    #[test]
    fn unknown_names_and_duplicates() {
        let doc = r#"{"variables":[{"name":"A","domain":["a1","a2"]}],
            "tables":[{"child":"A","given":{"Z":"z"},"kind":"point","p":[0.5,0.5]}]}"#;
        assert!(matches!(parse_network(doc), Err(Error::UnknownVariable(_))));
        let doc = r#"{"variables":[{"name":"A","domain":["a1","a2"]}],
            "tables":[{"child":"A","given":{},"kind":"point","p":[0.5,0.5]},
                      {"child":"A","given":{},"kind":"point","p":[0.4,0.6]}]}"#;
        assert!(matches!(parse_network(doc), Err(Error::DuplicateTable { .. })));
        let doc = r#"{"variables":[{"name":"A","domain":["a1","a2"]}],
            "tables":[{"child":"A","given":{},"kind":"point","p":[0.5,0.5,0.0]}]}"#;
        assert!(matches!(parse_network(doc), Err(Error::InvalidTable { .. })));
    }

    #[test]
    fn all_body_kinds_round_trip() {
        let doc = r#"{"variables":[{"name":"X","domain":["x1","x2","x3"]},{"name":"Y","domain":["y1","y2"]}],
            "edges":[["Y","X"]],
            "tables":[
              {"child":"Y","given":{},"kind":"interval","l":[0.3,0.6],"u":[0.4,0.7]},
              {"child":"X","given":{"Y":"y1"},"kind":"convex-v","vertices":[[1,0,0],[0,1,0]]},
              {"child":"X","given":{"Y":"y2"},"kind":"convex-h","halfspaces":[{"a":[1,0,0],"b":0.4}]}]}"#;
        let net = parse_network(doc).unwrap();
        assert_eq!(parse_network(&render_network(&net)).unwrap(), net);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.6400000000000001), "0.64");
        assert_eq!(format_number(0.15), "0.15");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.1102230246251565e-16), "1.11022302463e-16");
    }
}
