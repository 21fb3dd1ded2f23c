//! Finite deterministic structural causal models.
//!
//! A [`CausalModel`] is a set of named variables, each with a finite
//! [`Range`], an explicit parent list and a structural [`Equation`]. Parent
//! sets must form a DAG. Variables without parents are inputs; their equation
//! is a constant default. Models can be evaluated under hard interventions,
//! queried for direct causal dependence and marginalized onto a subset of
//! variables by composing the equations of the removed ones.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a variable inside its model.
pub type VarId = usize;

/// A value of a model variable.
///
/// Ordering is total: integers sort before bit vectors, which sort before symbols.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    /// Integer.
    Int(i64),
    /// Fixed-width bit vector; bit `i` is component `i`.
    Bits {
        /// Number of components.
        width: u8,
        /// Packed components.
        mask: u64,
    },
    /// Opaque symbol, e.g. a word or a relation name.
    Sym(Arc<str>),
}

impl Value {
    /// Symbol value from a string.
    pub fn sym(s: &str) -> Self {
        Self::Sym(Arc::from(s))
    }

    /// One-hot bit vector of the given width with component `index` set.
    pub fn one_hot(width: u8, index: u8) -> Self {
        Self::Bits {
            width,
            mask: 1u64 << index,
        }
    }

    /// Integer payload, if any.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Self::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Symbol payload, if any.
    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Self::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Bit-vector payload as `(width, mask)`, if any.
    pub fn as_bits(&self) -> Option<(u8, u64)> {
        match self {
            Self::Bits { width, mask } => Some((*width, *mask)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Int(v) => write!(f, "{v}"),
            Self::Bits { width, mask } => {
                f.write_str("bits:")?;
                for i in 0..*width {
                    f.write_str(if mask >> i & 1 == 1 { "1" } else { "0" })?;
                }
                Ok(())
            }
            Self::Sym(s) => f.write_str(s),
        }
    }
}

impl FromStr for Value {
    type Err = Error;

    /// Inverse of `Display`: decimal integers, `bits:0101…`, anything else is a symbol.
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(v) = s.parse::<i64>() {
            return Ok(Self::Int(v));
        }
        if let Some(body) = s.strip_prefix("bits:") {
            if body.is_empty() || body.len() > 64 {
                return Err(Error::parse("value", format!("bad bit vector `{s}`")));
            }
            let mut mask = 0u64;
            for (i, c) in body.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => mask |= 1 << i,
                    _ => return Err(Error::parse("value", format!("bad bit vector `{s}`"))),
                }
            }
            return Ok(Self::Bits {
                width: body.len() as u8,
                mask,
            });
        }
        Ok(Self::sym(s))
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Int(v) => serializer.serialize_i64(*v),
            other => serializer.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(v) => Ok(Self::Int(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Finite set of values a variable may take.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Range {
    /// Integers `lo..=hi`.
    Ints {
        /// Smallest value.
        lo: i64,
        /// Largest value.
        hi: i64,
    },
    /// All bit vectors of the given width (at most 63).
    Bits {
        /// Number of components.
        width: u8,
    },
    /// An explicit list of values, kept in the given order.
    Values(Vec<Value>),
}

impl Range {
    /// `0..=hi`.
    pub fn upto(hi: i64) -> Self {
        Self::Ints { lo: 0, hi }
    }

    /// Explicit symbol list.
    pub fn symbols<S: AsRef<str>>(items: &[S]) -> Self {
        Self::Values(items.iter().map(|s| Value::sym(s.as_ref())).collect())
    }

    /// Number of values.
    pub fn len(&self) -> u128 {
        match self {
            Self::Ints { lo, hi } => {
                if hi < lo {
                    0
                } else {
                    (*hi as i128 - *lo as i128 + 1) as u128
                }
            }
            Self::Bits { width } => 1u128 << width,
            Self::Values(v) => v.len() as u128,
        }
    }

    /// Whether the range is empty.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Membership test.
    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Self::Ints { lo, hi }, Value::Int(v)) => lo <= v && v <= hi,
            (Self::Bits { width }, Value::Bits { width: w, mask }) => {
                w == width && (*width >= 64 || mask >> width == 0)
            }
            (Self::Values(vs), v) => vs.contains(v),
            _ => false,
        }
    }

    /// The `index`-th value in range order.
    ///
    /// # Panics
    ///
    /// Panics if `index >= self.len()`.
    pub fn nth(&self, index: u128) -> Value {
        assert!(index < self.len(), "range index {index} out of bounds");
        match self {
            Self::Ints { lo, .. } => Value::Int(*lo + index as i64),
            Self::Bits { width } => Value::Bits {
                width: *width,
                mask: index as u64,
            },
            Self::Values(vs) => vs[index as usize].clone(),
        }
    }

    /// Position of `value` in range order.
    pub fn index_of(&self, value: &Value) -> Option<u128> {
        if !self.contains(value) {
            return None;
        }
        match (self, value) {
            (Self::Ints { lo, .. }, Value::Int(v)) => Some((*v - *lo) as u128),
            (Self::Bits { .. }, Value::Bits { mask, .. }) => Some(*mask as u128),
            (Self::Values(vs), v) => vs.iter().position(|x| x == v).map(|p| p as u128),
            _ => None,
        }
    }

    /// Iterate over all values in range order.
    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.len()).map(move |i| self.nth(i))
    }

    /// Uniformly random member.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self {
            Self::Values(vs) => vs.choose(rng).expect("non-empty range").clone(),
            _ => self.nth(rng.random_range(0..self.len())),
        }
    }
}

type EqFn = dyn Fn(&[Value]) -> Value + Send + Sync;

/// A structural equation: a function of the parent values, in parent order.
#[derive(Clone)]
pub struct Equation {
    name: Arc<str>,
    func: Arc<EqFn>,
}

impl Equation {
    /// Wrap a closure. `name` is used in serialized models and diagnostics.
    pub fn new(name: &str, func: impl Fn(&[Value]) -> Value + Send + Sync + 'static) -> Self {
        Self {
            name: Arc::from(name),
            func: Arc::new(func),
        }
    }

    /// Constant equation, used for inputs.
    pub fn constant(value: Value) -> Self {
        let name = format!("const:{value}");
        Self::new(&name, move |_| value.clone())
    }

    /// Registered name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Apply to parent values.
    pub fn apply(&self, parents: &[Value]) -> Value {
        (self.func)(parents)
    }
}

impl fmt::Debug for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Equation({})", self.name)
    }
}

/// A hard intervention: a partial assignment of values to variables, sorted by variable.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Intervention {
    assignments: Vec<(VarId, Value)>,
}

impl Intervention {
    /// The empty intervention.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build from `(variable, value)` pairs; later duplicates overwrite earlier ones.
    pub fn from_ids(pairs: impl IntoIterator<Item = (VarId, Value)>) -> Self {
        let mut assignments: Vec<(VarId, Value)> = pairs.into_iter().collect();
        if assignments.windows(2).all(|w| w[0].0 < w[1].0) {
            return Self { assignments };
        }
        // Stable sort keeps insertion order among duplicates; keep the last one.
        assignments.sort_by_key(|(k, _)| *k);
        let mut out: Vec<(VarId, Value)> = Vec::with_capacity(assignments.len());
        for (k, v) in assignments {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 = v,
                _ => out.push((k, v)),
            }
        }
        Self { assignments: out }
    }

    /// Build from variable names, checking ranges.
    pub fn from_names(model: &CausalModel, pairs: &[(&str, Value)]) -> Result<Self> {
        let mut ids = Vec::with_capacity(pairs.len());
        for (name, value) in pairs {
            ids.push((model.var(name)?, value.clone()));
        }
        let iv = Self::from_ids(ids);
        model.check_intervention(&iv)?;
        Ok(iv)
    }

    /// Assigned `(variable, value)` pairs, sorted by variable.
    pub fn assignments(&self) -> &[(VarId, Value)] {
        &self.assignments
    }

    /// Value assigned to `var`, if any.
    pub fn get(&self, var: VarId) -> Option<&Value> {
        self.assignments
            .binary_search_by_key(&var, |(k, _)| *k)
            .ok()
            .map(|i| &self.assignments[i].1)
    }

    /// Number of assigned variables.
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    /// Whether nothing is assigned.
    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Render with variable names, e.g. `{X<-1, Y<-2}`.
    pub fn display(&self, model: &CausalModel) -> String {
        let parts: Vec<String> = self
            .assignments
            .iter()
            .map(|(k, v)| format!("{}<-{}", model.name(*k), v))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// A total setting: one value per variable, indexed by [`VarId`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Setting(pub Vec<Value>);

impl Setting {
    /// Value of `var`.
    pub fn get(&self, var: VarId) -> &Value {
        &self.0[var]
    }

    /// Render with variable names.
    pub fn display(&self, model: &CausalModel) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{}={}", model.name(k), v))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

#[derive(Debug)]
struct ModelInner {
    names: Vec<String>,
    index: HashMap<String, VarId>,
    ranges: Vec<Range>,
    parents: Vec<Vec<VarId>>,
    equations: Vec<Equation>,
    order: Vec<VarId>,
}

/// A finite deterministic causal model. Cheap to clone.
#[derive(Clone, Debug)]
pub struct CausalModel {
    inner: Arc<ModelInner>,
}

/// Incremental constructor for [`CausalModel`].
#[derive(Default)]
pub struct ModelBuilder {
    vars: Vec<(String, Range, Vec<String>, Equation)>,
}

impl ModelBuilder {
    /// Empty builder.
    pub fn new() -> Self {
        Self::default()
    }

    /// Add an input variable with a constant default.
    pub fn input(mut self, name: &str, range: Range, default: Value) -> Self {
        self.vars
            .push((name.to_string(), range, Vec::new(), Equation::constant(default)));
        self
    }

    /// Add a variable with parents and equation.
    pub fn var(mut self, name: &str, range: Range, parents: &[&str], equation: Equation) -> Self {
        self.vars.push((
            name.to_string(),
            range,
            parents.iter().map(|s| s.to_string()).collect(),
            equation,
        ));
        self
    }

    /// Validate and build.
    pub fn build(self) -> Result<CausalModel> {
        let mut index = HashMap::new();
        for (i, (name, range, _, _)) in self.vars.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate variable `{name}`")));
            }
            if range.is_empty() {
                return Err(Error::InvalidModel(format!("empty range for `{name}`")));
            }
        }
        let mut names = Vec::new();
        let mut ranges = Vec::new();
        let mut parents = Vec::new();
        let mut equations = Vec::new();
        for (name, range, ps, eq) in self.vars {
            let mut ids = Vec::with_capacity(ps.len());
            for p in &ps {
                let id = *index
                    .get(p)
                    .ok_or_else(|| Error::InvalidModel(format!("parent `{p}` of `{name}` is not a variable")))?;
                if ids.contains(&id) {
                    return Err(Error::InvalidModel(format!("repeated parent `{p}` of `{name}`")));
                }
                ids.push(id);
            }
            names.push(name);
            ranges.push(range);
            parents.push(ids);
            equations.push(eq);
        }
        let order = topological_order(&names, &parents)?;
        Ok(CausalModel {
            inner: Arc::new(ModelInner {
                names,
                index,
                ranges,
                parents,
                equations,
                order,
            }),
        })
    }
}

fn topological_order(names: &[String], parents: &[Vec<VarId>]) -> Result<Vec<VarId>> {
    let n = names.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (v, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(v);
        }
    }
    // Smallest ready index first, so the order is stable under declaration order.
    let mut ready: std::collections::BTreeSet<VarId> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        let stuck: Vec<&str> = (0..n).filter(|v| indegree[*v] > 0).map(|v| names[v].as_str()).collect();
        return Err(Error::InvalidModel(format!(
            "parent graph has a cycle through {}",
            stuck.join(", ")
        )));
    }
    Ok(order)
}

impl CausalModel {
    /// Number of variables.
    pub fn len(&self) -> usize {
        self.inner.names.len()
    }

    /// Whether the model has no variables.
    pub fn is_empty(&self) -> bool {
        self.inner.names.is_empty()
    }

    /// Look up a variable by name.
    pub fn var(&self, name: &str) -> Result<VarId> {
        self.inner
            .index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Name of a variable.
    pub fn name(&self, var: VarId) -> &str {
        &self.inner.names[var]
    }

    /// All names, in declaration order.
    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    /// Range of a variable.
    pub fn range(&self, var: VarId) -> &Range {
        &self.inner.ranges[var]
    }

    /// Parents of a variable, in equation argument order.
    pub fn parents(&self, var: VarId) -> &[VarId] {
        &self.inner.parents[var]
    }

    /// Structural equation of a variable.
    pub fn equation(&self, var: VarId) -> &Equation {
        &self.inner.equations[var]
    }

    /// Topological order used for evaluation.
    pub fn order(&self) -> &[VarId] {
        &self.inner.order
    }

    /// Variables without parents.
    pub fn inputs(&self) -> Vec<VarId> {
        (0..self.len()).filter(|&v| self.parents(v).is_empty()).collect()
    }

    /// Whether `var` has no parents.
    pub fn is_input(&self, var: VarId) -> bool {
        self.parents(var).is_empty()
    }

    /// Check that every assigned value lies in its variable's range.
    pub fn check_intervention(&self, iv: &Intervention) -> Result<()> {
        for (k, v) in iv.assignments() {
            if *k >= self.len() {
                return Err(Error::UnknownVariable(format!("#{k}")));
            }
            if !self.range(*k).contains(v) {
                return Err(Error::OutOfRange {
                    variable: self.name(*k).to_string(),
                    value: v.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Unique total setting produced by `iv`.
    pub fn evaluate(&self, iv: &Intervention) -> Result<Setting> {
        self.check_intervention(iv)?;
        Ok(self.evaluate_unchecked(iv))
    }

    /// Evaluate without validating the intervention's values.
    pub fn evaluate_unchecked(&self, iv: &Intervention) -> Setting {
        let inner = &*self.inner;
        let mut slots: Vec<Value> = vec![Value::Int(0); inner.names.len()];
        let mut fixed = vec![false; inner.names.len()];
        for (k, v) in iv.assignments() {
            slots[*k] = v.clone();
            fixed[*k] = true;
        }
        let mut args = Vec::with_capacity(inner.names.len());
        for &v in &inner.order {
            if fixed[v] {
                continue;
            }
            args.clear();
            args.extend(inner.parents[v].iter().map(|&p| slots[p].clone()));
            slots[v] = inner.equations[v].apply(&args);
        }
        Setting(slots)
    }

    /// Check that every equation maps parent settings into the variable's range.
    ///
    /// Exhaustive when the number of parent settings of a variable is within
    /// `budget`; otherwise `samples` uniformly random parent settings are tried.
    /// Returns the names of variables with a violation.
    pub fn check_ranges<R: Rng + ?Sized>(&self, budget: u128, samples: usize, rng: &mut R) -> Vec<String> {
        let mut bad = Vec::new();
        for v in 0..self.len() {
            let ps = self.parents(v);
            let total: u128 = ps.iter().map(|&p| self.range(p).len()).product();
            let ok = if total <= budget {
                (0..total).all(|idx| {
                    let args = self.decode_parent_setting(ps, idx);
                    self.range(v).contains(&self.equation(v).apply(&args))
                })
            } else {
                (0..samples).all(|_| {
                    let args: Vec<Value> = ps.iter().map(|&p| self.range(p).sample(rng)).collect();
                    self.range(v).contains(&self.equation(v).apply(&args))
                })
            };
            if !ok {
                bad.push(self.name(v).to_string());
            }
        }
        bad
    }

    fn decode_parent_setting(&self, parents: &[VarId], mut idx: u128) -> Vec<Value> {
        let mut out = vec![Value::Int(0); parents.len()];
        for (slot, &p) in parents.iter().enumerate().rev() {
            let r = self.range(p);
            let n = r.len();
            out[slot] = r.nth(idx % n);
            idx /= n;
        }
        out
    }

    /// Whether `y` directly depends on `x`.
    ///
    /// True iff `x` is a parent of `y` and there are two settings of the
    /// parents of `y`, differing only in `x`, on which the equation of `y`
    /// differs. Evaluates at most `budget` equation applications.
    pub fn causally_depends(&self, x: VarId, y: VarId, budget: u128) -> Result<bool> {
        if x == y {
            return Err(Error::InvalidModel(format!(
                "dependence of `{}` on itself is undefined",
                self.name(x)
            )));
        }
        let ps = self.parents(y);
        let Some(slot) = ps.iter().position(|&p| p == x) else {
            return Ok(false);
        };
        let others: Vec<VarId> = ps.iter().copied().filter(|&p| p != x).collect();
        let rest: u128 = others.iter().map(|&p| self.range(p).len()).product();
        let xs = self.range(x).len();
        let needed = rest.saturating_mul(xs);
        if needed > budget {
            return Err(Error::BudgetExceeded {
                what: format!("dependence of `{}` on `{}`", self.name(y), self.name(x)),
                needed,
                budget,
            });
        }
        let eq = self.equation(y);
        for idx in 0..rest {
            let other_vals = self.decode_parent_setting(&others, idx);
            let mut args = Vec::with_capacity(ps.len());
            args.extend_from_slice(&other_vals[..slot]);
            args.push(self.range(x).nth(0));
            args.extend_from_slice(&other_vals[slot..]);
            let first = eq.apply(&args);
            for xi in 1..xs {
                args[slot] = self.range(x).nth(xi);
                if eq.apply(&args) != first {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Marginalize onto `keep`: every removed variable is substituted into the
    /// equations of its kept descendants.
    ///
    /// Kept variables keep their ranges and relative order. Fails if a kept
    /// variable's composed equation would read a removed input.
    pub fn marginalize(&self, keep: &[&str]) -> Result<CausalModel> {
        let mut kept = vec![false; self.len()];
        for name in keep {
            kept[self.var(name)?] = true;
        }
        let mut builder = ModelBuilder::new();
        for v in 0..self.len() {
            if !kept[v] {
                continue;
            }
            let name = self.name(v);
            if self.is_input(v) {
                builder = builder.var(name, self.range(v).clone(), &[], self.equation(v).clone());
                continue;
            }
            // Collect the removed ancestors reachable without passing a kept variable.
            let mut removed = Vec::new();
            let mut new_parents = Vec::new();
            let mut seen = vec![false; self.len()];
            let mut stack: Vec<VarId> = self.parents(v).to_vec();
            while let Some(u) = stack.pop() {
                if seen[u] {
                    continue;
                }
                seen[u] = true;
                if kept[u] {
                    new_parents.push(u);
                } else if self.is_input(u) {
                    return Err(Error::NonComputable {
                        kept: name.to_string(),
                        removed: self.name(u).to_string(),
                    });
                } else {
                    removed.push(u);
                    stack.extend_from_slice(self.parents(u));
                }
            }
            if removed.is_empty() {
                let ps: Vec<&str> = self.parents(v).iter().map(|&p| self.name(p)).collect();
                builder = builder.var(name, self.range(v).clone(), &ps, self.equation(v).clone());
                continue;
            }
            let position: HashMap<VarId, usize> = self.order().iter().enumerate().map(|(i, &u)| (u, i)).collect();
            new_parents.sort_by_key(|u| position[u]);
            removed.sort_by_key(|u| position[u]);
            let original = self.clone();
            let plan_parents = new_parents.clone();
            let eq = Equation::new(&format!("composed:{name}"), move |args| {
                let mut slots: HashMap<VarId, Value> = HashMap::with_capacity(args.len() + removed.len());
                for (p, a) in plan_parents.iter().zip(args) {
                    slots.insert(*p, a.clone());
                }
                let mut buf = Vec::new();
                for &u in removed.iter().chain(std::iter::once(&v)) {
                    buf.clear();
                    for p in original.parents(u) {
                        buf.push(slots[p].clone());
                    }
                    let val = original.equation(u).apply(&buf);
                    slots.insert(u, val);
                }
                slots.remove(&v).expect("target computed")
            });
            let ps: Vec<&str> = new_parents.iter().map(|&p| self.name(p)).collect();
            builder = builder.var(name, self.range(v).clone(), &ps, eq);
        }
        builder.build()
    }
}

/// Serializable description of one variable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariableSpec {
    /// Variable name.
    pub name: String,
    /// Value range.
    pub range: Range,
    /// Parent names, in equation argument order.
    #[serde(default)]
    pub parents: Vec<String>,
    /// Registered equation reference, e.g. `sum` or `const:0`.
    pub equation: String,
}

/// Serializable description of a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Variables in declaration order.
    pub variables: Vec<VariableSpec>,
}

type EquationFactory = Arc<dyn Fn(Option<&str>) -> Result<Equation> + Send + Sync>;

/// Maps equation references in model files to closures.
///
/// A reference is `name` or `name:argument`; the factory registered under
/// `name` receives the argument.
#[derive(Clone)]
pub struct EquationRegistry {
    factories: HashMap<String, EquationFactory>,
}

impl Default for EquationRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl EquationRegistry {
    /// Registry with `const`, `identity` and `sum`.
    pub fn with_builtins() -> Self {
        let mut reg = Self {
            factories: HashMap::new(),
        };
        reg.register("const", |arg| {
            let arg = arg.ok_or_else(|| Error::parse("equation", "const needs a value"))?;
            Ok(Equation::constant(arg.parse()?))
        });
        reg.register("identity", |_| Ok(Equation::new("identity", |args| args[0].clone())));
        reg.register("sum", |_| {
            Ok(Equation::new("sum", |args| {
                Value::Int(args.iter().map(|a| a.as_int().expect("integer parent")).sum())
            }))
        });
        reg
    }

    /// Register a factory under `name`.
    pub fn register(&mut self, name: &str, factory: impl Fn(Option<&str>) -> Result<Equation> + Send + Sync + 'static) {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    /// Resolve a reference.
    pub fn resolve(&self, reference: &str) -> Result<Equation> {
        let (name, arg) = match reference.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (reference, None),
        };
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::parse("equation", format!("unregistered equation `{name}`")))?;
        let mut eq = factory(arg)?;
        eq.name = Arc::from(reference);
        Ok(eq)
    }
}

impl CausalModel {
    /// Build from a spec, resolving equations through `registry`.
    pub fn from_spec(spec: &ModelSpec, registry: &EquationRegistry) -> Result<Self> {
        let mut b = ModelBuilder::new();
        for var in &spec.variables {
            let eq = registry.resolve(&var.equation)?;
            let ps: Vec<&str> = var.parents.iter().map(String::as_str).collect();
            b = b.var(&var.name, var.range.clone(), &ps, eq);
        }
        b.build()
    }

    /// Describe the model; equations are emitted by registered name.
    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            variables: (0..self.len())
                .map(|v| VariableSpec {
                    name: self.name(v).to_string(),
                    range: self.range(v).clone(),
                    parents: self.parents(v).iter().map(|&p| self.name(p).to_string()).collect(),
                    equation: self.equation(v).name().to_string(),
                })
                .collect(),
        }
    }

    /// Parse a TOML model file.
    pub fn from_toml(text: &str, registry: &EquationRegistry) -> Result<Self> {
        let spec: ModelSpec = toml::from_str(text).map_err(|e| Error::parse("model file", e.to_string()))?;
        Self::from_spec(&spec, registry)
    }

    /// Render as a TOML model file.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_spec()).expect("model spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> CausalModel {
        ModelBuilder::new()
            .input("A", Range::upto(2), Value::Int(0))
            .var(
                "B",
                Range::upto(4),
                &["A"],
                Equation::new("double", |a| Value::Int(2 * a[0].as_int().unwrap())),
            )
            .var(
                "C",
                Range::upto(5),
                &["B"],
                Equation::new("inc", |a| Value::Int(a[0].as_int().unwrap() + 1)),
            )
            .build()
            .unwrap()
    }

    #[test]
    fn evaluates_in_topological_order() {
        let m = chain();
        let s = m
            .evaluate(&Intervention::from_names(&m, &[("A", Value::Int(2))]).unwrap())
            .unwrap();
        assert_eq!(s.0, vec![Value::Int(2), Value::Int(4), Value::Int(5)]);
    }

    #[test]
    fn intervention_overrides_equation() {
        let m = chain();
        let iv = Intervention::from_names(&m, &[("A", Value::Int(2)), ("B", Value::Int(1))]).unwrap();
        assert_eq!(m.evaluate(&iv).unwrap().0[2], Value::Int(2));
    }

    #[test]
    fn out_of_range_intervention_rejected() {
        let m = chain();
        let err = Intervention::from_names(&m, &[("A", Value::Int(7))]).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { .. }));
    }

    #[test]
    fn cycle_rejected() {
        let eq = Equation::new("id", |a| a[0].clone());
        let err = ModelBuilder::new()
            .var("P", Range::upto(1), &["Q"], eq.clone())
            .var("Q", Range::upto(1), &["P"], eq)
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn marginalize_composes_chain() {
        let m = chain().marginalize(&["A", "C"]).unwrap();
        assert_eq!(m.parents(m.var("C").unwrap()), &[m.var("A").unwrap()]);
        let s = m
            .evaluate(&Intervention::from_names(&m, &[("A", Value::Int(1))]).unwrap())
            .unwrap();
        assert_eq!(s.0[1], Value::Int(3));
    }

    #[test]
    fn marginalize_refuses_removed_input() {
        let err = chain().marginalize(&["B", "C"]).unwrap_err();
        assert!(matches!(err, Error::NonComputable { .. }));
    }

    #[test]
    fn non_parent_never_depended_on() {
        let m = chain();
        assert!(!m.causally_depends(0, 2, 1000).unwrap());
        assert!(m.causally_depends(0, 1, 1000).unwrap());
    }

    #[test]
    fn dependence_budget_enforced() {
        let m = chain();
        assert!(matches!(m.causally_depends(0, 1, 2), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn value_text_round_trip() {
        for v in [Value::Int(-3), Value::one_hot(10, 4), Value::sym("every")] {
            assert_eq!(v.to_string().parse::<Value>().unwrap(), v);
        }
    }

    #[test]
    fn toml_round_trip_with_registry() {
        let text = r#"
[[variables]]
name = "X"
range = { ints = { lo = 0, hi = 9 } }
equation = "const:0"

[[variables]]
name = "Y"
range = { ints = { lo = 0, hi = 9 } }
equation = "const:0"

[[variables]]
name = "S"
range = { ints = { lo = 0, hi = 18 } }
parents = ["X", "Y"]
equation = "sum"
"#;
        let reg = EquationRegistry::with_builtins();
        let m = CausalModel::from_toml(text, &reg).unwrap();
        let again = CausalModel::from_toml(&m.to_toml(), &reg).unwrap();
        let iv = Intervention::from_names(&again, &[("X", Value::Int(4)), ("Y", Value::Int(5))]).unwrap();
        assert_eq!(again.evaluate(&iv).unwrap().0[2], Value::Int(9));
    }

    #[test]
    fn range_checker_finds_violation() {
        let m = ModelBuilder::new()
            .input("A", Range::upto(3), Value::Int(0))
            .var(
                "B",
                Range::upto(3),
                &["A"],
                Equation::new("inc", |a| Value::Int(a[0].as_int().unwrap() + 1)),
            )
            .build()
            .unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        assert_eq!(m.check_ranges(1000, 10, &mut rng), vec!["B".to_string()]);
    }
}
