//! Variables, conjunctive events and the dense enumeration of atomic events.
//!
//! An [`EventSpace`] fixes an ordered list of variables and enumerates every full
//! instantiation in mixed-radix order with the last variable varying fastest.
//! [`JointTable`] is a probability vector laid out over such a space.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest number of atomic events any operation is allowed to materialize.
pub const MAX_ATOMS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    name: String,
    domain: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, domain: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let domain: Vec<String> = domain.into_iter().map(Into::into).collect();
        if !is_identifier(&name) {
            return Err(Error::invalid(format!("`{name}` is not a valid variable name")));
        }
        if domain.len() < 2 {
            return Err(Error::invalid(format!(
                "variable `{name}` needs at least two values, got {}",
                domain.len()
            )));
        }
        for (i, v) in domain.iter().enumerate() {
            if !is_identifier(v) {
                return Err(Error::invalid(format!("`{v}` is not a valid value label")));
            }
            if domain[..i].contains(v) {
                return Err(Error::invalid(format!("duplicate value `{v}` in domain of `{name}`")));
            }
        }
        Ok(Self { name, domain })
    }

    /// Shorthand for a variable with values `<name>1 .. <name>k` in lower case.
    pub fn indexed(name: &str, size: usize) -> Result<Self> {
        let stem = name.to_lowercase();
        Self::new(name, (1..=size).map(|i| format!("{stem}{i}")))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn size(&self) -> usize {
        self.domain.len()
    }

    pub fn value_index(&self, value: &str) -> Result<usize> {
        self.domain
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| Error::UnknownValue {
                variable: self.name.clone(),
                value: value.to_string(),
            })
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '\'' || c == '.')
}

/// A conjunction of basic events `X = x`. The empty conjunction is the true event.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConjunctiveEvent {
    assignments: BTreeMap<String, String>,
}

impl ConjunctiveEvent {
    pub fn top() -> Self {
        Self::default()
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        for (k, v) in pairs {
            let k = k.into();
            if assignments.insert(k.clone(), v.into()).is_some() {
                return Err(Error::invalid(format!("variable `{k}` assigned twice")));
            }
        }
        Ok(Self { assignments })
    }

    pub fn assign(var: impl Into<String>, value: impl Into<String>) -> Self {
        let mut assignments = BTreeMap::new();
        assignments.insert(var.into(), value.into());
        Self { assignments }
    }

    pub fn is_top(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn assignments(&self) -> &BTreeMap<String, String> {
        &self.assignments
    }

    pub fn get(&self, var: &str) -> Option<&str> {
        self.assignments.get(var).map(String::as_str)
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.assignments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Conjunction of two events; `None` when they assign different values to a variable.
    pub fn and(&self, other: &ConjunctiveEvent) -> Option<ConjunctiveEvent> {
        let mut assignments = self.assignments.clone();
        for (k, v) in &other.assignments {
            match assignments.get(k) {
                Some(existing) if existing != v => return None,
                _ => {
                    assignments.insert(k.clone(), v.clone());
                }
            }
        }
        Some(Self { assignments })
    }
}

impl fmt::Display for ConjunctiveEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.assignments.is_empty() {
            return f.write_str("true");
        }
        let mut first = true;
        for (k, v) in &self.assignments {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for ConjunctiveEvent {
    type Err = Error;

    /// Parses `A=a1,C=c2`; `true` (or the empty string) is the true event.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "true" {
            return Ok(Self::top());
        }
        let mut pairs = Vec::new();
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected VAR=value, got `{part}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(Error::invalid(format!("expected VAR=value, got `{part}`")));
            }
            pairs.push((k.to_string(), v.to_string()));
        }
        Self::from_pairs(pairs)
    }
}

/// A full instantiation of the variables of an [`EventSpace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicEvent {
    pub index: usize,
    /// Value index per variable, in the space's variable order.
    pub values: Vec<usize>,
}

/// Mixed-radix enumeration of all atomic events over an ordered variable list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSpace {
    variables: Vec<Variable>,
    strides: Vec<usize>,
    size: usize,
}

impl EventSpace {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        Self::with_cap(variables, MAX_ATOMS)
    }

    pub fn with_cap(variables: Vec<Variable>, cap: usize) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::invalid(format!("variable `{}` listed twice", v.name)));
            }
        }
        let mut size: u128 = 1;
        for v in &variables {
            size *= v.size() as u128;
            if size > cap as u128 {
                let full: u128 = variables.iter().map(|v| v.size() as u128).product();
                return Err(Error::CapExceeded {
                    what: "atomic events".into(),
                    size: full,
                    cap: cap as u128,
                });
            }
        }
        let mut strides = vec![1usize; variables.len()];
        for i in (0..variables.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * variables[i + 1].size();
        }
        Ok(Self {
            variables,
            strides,
            size: size as usize,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name()).collect()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn position(&self, var: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == var)
    }

    pub fn require_position(&self, var: &str) -> Result<usize> {
        self.position(var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))
    }

    /// Value index of variable at `pos` within atom `index`.
    #[inline]
    pub fn value_at(&self, index: usize, pos: usize) -> usize {
        (index / self.strides[pos]) % self.variables[pos].size()
    }

    pub fn decode(&self, index: usize) -> AtomicEvent {
        let values = (0..self.variables.len())
            .map(|pos| self.value_at(index, pos))
            .collect();
        AtomicEvent { index, values }
    }

    pub fn encode(&self, values: &[usize]) -> usize {
        values
            .iter()
            .zip(&self.strides)
            .map(|(v, s)| v * s)
            .sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = AtomicEvent> + '_ {
        (0..self.size).map(|i| self.decode(i))
    }

    pub fn assignment(&self, index: usize) -> ConjunctiveEvent {
        let pairs = self.variables.iter().enumerate().map(|(pos, v)| {
            (v.name.clone(), v.domain[self.value_at(index, pos)].clone())
        });
        ConjunctiveEvent::from_pairs(pairs).expect("distinct variable names")
    }

    /// Resolve a conjunctive event against this space.
    pub fn matcher(&self, event: &ConjunctiveEvent) -> Result<EventMatcher> {
        let mut terms = Vec::with_capacity(event.len());
        for (var, value) in event.assignments() {
            let pos = self.require_position(var)?;
            let idx = self.variables[pos].value_index(value)?;
            terms.push((pos, idx));
        }
        Ok(EventMatcher {
            terms,
            strides: self.terms_strides(event)?,
            radices: self.terms_radices(event)?,
        })
    }

    fn terms_strides(&self, event: &ConjunctiveEvent) -> Result<Vec<usize>> {
        event
            .variables()
            .map(|v| self.require_position(v).map(|p| self.strides[p]))
            .collect()
    }

    fn terms_radices(&self, event: &ConjunctiveEvent) -> Result<Vec<usize>> {
        event
            .variables()
            .map(|v| self.require_position(v).map(|p| self.variables[p].size()))
            .collect()
    }

    /// True iff every basic event of `event` holds in `omega`.
    pub fn implies(&self, omega: &AtomicEvent, event: &ConjunctiveEvent) -> Result<bool> {
        Ok(self.matcher(event)?.matches_values(&omega.values))
    }
}

/// Enumerate the atomic events over `vars` (last variable fastest).
pub fn enumerate_atomic_events(vars: &[Variable]) -> Result<Vec<AtomicEvent>> {
    let space = EventSpace::new(vars.to_vec())?;
    Ok(space.atoms().collect())
}

/// A conjunctive event resolved to (position, value index) pairs of one space.
#[derive(Debug, Clone)]
pub struct EventMatcher {
    terms: Vec<(usize, usize)>,
    strides: Vec<usize>,
    radices: Vec<usize>,
}

impl EventMatcher {
    #[inline]
    pub fn matches_values(&self, values: &[usize]) -> bool {
        self.terms.iter().all(|&(pos, v)| values[pos] == v)
    }

    #[inline]
    pub fn matches_index(&self, index: usize) -> bool {
        self.terms
            .iter()
            .zip(self.strides.iter().zip(&self.radices))
            .all(|(&(_, v), (&s, &r))| (index / s) % r == v)
    }
}

/// A probability distribution over all atomic events of an [`EventSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    space: EventSpace,
    probs: Vec<f64>,
}

impl JointTable {
    /// Entries must be non-negative and sum to one within 1e-9; the stored table is renormalized.
    pub fn new(space: EventSpace, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.size() {
            return Err(Error::invalid(format!(
                "joint table has {} entries, expected {}",
                probs.len(),
                space.size()
            )));
        }
        if let Some(p) = probs.iter().find(|p| p.is_nan() || **p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid(format!("joint table entry {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("joint table sums to {total}")));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { space, probs })
    }

    pub fn uniform(space: EventSpace) -> Self {
        let n = space.size();
        Self {
            space,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn space(&self) -> &EventSpace {
        &self.space
    }

    pub fn variables(&self) -> &[Variable] {
        self.space.variables()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, event: &ConjunctiveEvent) -> Result<f64> {
        let m = self.space.matcher(event)?;
        Ok(self
            .probs
            .iter()
            .enumerate()
            .filter(|(i, _)| m.matches_index(*i))
            .map(|(_, p)| p)
            .sum())
    }

    /// Marginal over `vars`, laid out in the given order.
    pub fn marginal(&self, vars: &[&str]) -> Result<JointTable> {
        let positions: Vec<usize> = vars
            .iter()
            .map(|v| self.space.require_position(v))
            .collect::<Result<_>>()?;
        let sub_vars = positions
            .iter()
            .map(|&p| self.space.variables()[p].clone())
            .collect();
        let sub = EventSpace::new(sub_vars)?;
        let mut probs = vec![0.0; sub.size()];
        for (i, p) in self.probs.iter().enumerate() {
            let j: usize = positions
                .iter()
                .zip(sub.strides())
                .map(|(&pos, &s)| self.space.value_at(i, pos) * s)
                .sum();
            probs[j] += p;
        }
        Ok(JointTable { space: sub, probs })
    }

    /// Same distribution with the variables permuted into `order`.
    pub fn reorder(&self, order: &[&str]) -> Result<JointTable> {
        if order.len() != self.space.variables().len() {
            return Err(Error::invalid("reorder needs every variable exactly once"));
        }
        self.marginal(order)
    }

    /// Largest absolute difference between two joints over the same variable set.
    pub fn linf_distance(&self, other: &JointTable) -> Result<f64> {
        let other = other.reorder(&self.space.names())?;
        if other.variables() != self.variables() {
            return Err(Error::invalid("joint tables have different domains"));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(name: &str) -> Variable {
        let lower = name.to_lowercase();
        Variable::new(name, [lower.clone(), format!("not_{lower}")]).unwrap()
    }

    #[test]
    fn rejects_degenerate_domains() {
        assert!(Variable::new("A", ["a"]).is_err());
        assert!(Variable::new("A", ["a", "a"]).is_err());
        assert!(Variable::new("", ["a", "b"]).is_err());
    }

    #[test]
    fn enumerates_mixed_radix_last_fastest() {
        let vars = vec![binary("A"), binary("B")];
        let atoms = enumerate_atomic_events(&vars).unwrap();
        assert_eq!(atoms.len(), 4);
        assert_eq!(atoms[1].values, vec![0, 1]);
        assert_eq!(atoms[2].values, vec![1, 0]);
    }

    #[test]
    fn example52_has_48_atoms() {
        let vars = vec![
            Variable::indexed("A", 2).unwrap(),
            Variable::indexed("B", 2).unwrap(),
            Variable::indexed("C", 2).unwrap(),
            Variable::indexed("E", 2).unwrap(),
            Variable::indexed("F", 3).unwrap(),
        ];
        // 2 * 2 * 2 * 2 * 3
        assert_eq!(enumerate_atomic_events(&vars).unwrap().len(), 48);
    }

    #[test]
    fn cap_is_enforced() {
        let vars: Vec<Variable> = (0..21).map(|i| Variable::indexed(&format!("X{i}"), 2).unwrap()).collect();
        assert!(matches!(
            enumerate_atomic_events(&vars),
            Err(Error::CapExceeded { .. })
        ));
        assert!(EventSpace::new(vars[..20].to_vec()).is_ok());
    }

    #[test]
    fn implication() {
        let space = EventSpace::new(vec![binary("A"), binary("B"), binary("C")]).unwrap();
        let omega = space.decode(space.encode(&[0, 0, 0]));
        let c: ConjunctiveEvent = "B=b".parse().unwrap();
        assert!(space.implies(&omega, &c).unwrap());
        let omega = space.decode(space.encode(&[0, 1, 0]));
        assert!(!space.implies(&omega, &c).unwrap());
        assert!(space.implies(&omega, &ConjunctiveEvent::top()).unwrap());
        let bad: ConjunctiveEvent = "Z=z".parse().unwrap();
        assert!(matches!(space.implies(&omega, &bad), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn parses_event_strings() {
        let e: ConjunctiveEvent = "A=a1, C=c2".parse().unwrap();
        assert_eq!(e.get("A"), Some("a1"));
        assert_eq!(e.to_string(), "A=a1,C=c2");
        assert!("true".parse::<ConjunctiveEvent>().unwrap().is_top());
        assert!("A".parse::<ConjunctiveEvent>().is_err());
        assert!("A=a,A=b".parse::<ConjunctiveEvent>().is_err());
    }

    #[test]
    fn conjunction_detects_conflicts() {
        let a = ConjunctiveEvent::assign("A", "a");
        let b = ConjunctiveEvent::assign("B", "b");
        assert_eq!(a.and(&b).unwrap().len(), 2);
        assert!(a.and(&ConjunctiveEvent::assign("A", "x")).is_none());
    }

    #[test]
    fn marginal_and_reorder() {
        let space = EventSpace::new(vec![binary("A"), binary("B")]).unwrap();
        let joint = JointTable::new(space, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = joint.marginal(&["B"]).unwrap();
        assert!((m.probs()[0] - 0.4).abs() < 1e-15);
        let r = joint.reorder(&["B", "A"]).unwrap();
        assert_eq!(r.probs(), &[0.1, 0.3, 0.2, 0.4]);
        assert_eq!(joint.linf_distance(&r).unwrap(), 0.0);
    }
}
