//! Constructive abstraction between a low-level and a high-level causal model.
//!
//! An [`Alignment`] partitions the low-level variables into one cell per
//! high-level variable plus an excluded remainder, and attaches a partial map
//! from cell settings to high-level values. The induced map on total settings
//! is applied cell-wise; the induced map on interventions assigns a high-level
//! variable exactly when its whole cell is assigned.
//!
//! [`AbstractionChecker`] decides the three conditions of a constructive
//! abstraction by enumeration: the setting map is surjective, the
//! intervention map is surjective onto the admissible high-level
//! interventions, and every admissible low-level intervention commutes with
//! the setting map.

use std::collections::{BTreeSet, HashSet};

use rustc_hash::{FxHashMap, FxHashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::causal::{CausalModel, Intervention, Setting, Value, VarId};
use crate::error::{Error, Result};

type ComponentFn = dyn Fn(&[Value]) -> Option<Value> + Send + Sync;

/// Partial map from the setting of one cell to a value of its high-level variable.
#[derive(Clone)]
pub struct TauComponent {
    name: Arc<str>,
    func: Arc<ComponentFn>,
}

impl std::fmt::Debug for TauComponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TauComponent({})", self.name)
    }
}

impl TauComponent {
    /// Wrap a closure over the cell values (in cell order). `None` means undefined.
    pub fn new(name: &str, func: impl Fn(&[Value]) -> Option<Value> + Send + Sync + 'static) -> Self {
        Self {
            name: Arc::from(name),
            func: Arc::new(func),
        }
    }

    /// Copies the single cell value. Values outside the target range are undefined.
    pub fn identity() -> Self {
        Self::new("identity", |v| (v.len() == 1).then(|| v[0].clone()))
    }

    /// Decodes a one-hot bit vector to the index of its set bit.
    pub fn one_hot_decode() -> Self {
        Self::new("one-hot", |v| match v {
            [Value::Bits { mask, .. }] if mask.count_ones() == 1 => Some(Value::Int(mask.trailing_zeros() as i64)),
            _ => None,
        })
    }

    /// Name used in reports.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Apply to a cell setting.
    pub fn apply(&self, cell: &[Value]) -> Option<Value> {
        (self.func)(cell)
    }
}

/// A partition of low-level variables into cells plus the per-cell maps.
#[derive(Clone, Debug)]
pub struct Alignment {
    /// `cells[h]` lists the low-level variables aligned with high-level variable `h`.
    cells: Vec<Vec<VarId>>,
    components: Vec<TauComponent>,
    excluded: Vec<VarId>,
    /// For each low-level variable, the high-level variable whose cell contains it.
    owner: Vec<Option<VarId>>,
}

impl Alignment {
    /// Build from `(high variable, low cell, component)` triples given by name.
    ///
    /// Every high-level variable needs exactly one non-empty cell and cells
    /// must be disjoint. Low-level variables in no cell are excluded.
    pub fn new(low: &CausalModel, high: &CausalModel, cells: Vec<(&str, Vec<&str>, TauComponent)>) -> Result<Self> {
        let mut cell_of: Vec<Option<(Vec<VarId>, TauComponent)>> = vec![None; high.len()];
        let mut owner = vec![None; low.len()];
        for (h_name, members, comp) in cells {
            let h = high.var(h_name)?;
            if cell_of[h].is_some() {
                return Err(Error::InvalidAlignment(format!("two cells for `{h_name}`")));
            }
            if members.is_empty() {
                return Err(Error::InvalidAlignment(format!("empty cell for `{h_name}`")));
            }
            let mut ids = Vec::new();
            for m in members {
                let l = low.var(m)?;
                if owner[l].is_some() {
                    return Err(Error::InvalidAlignment(format!("`{m}` is in two cells")));
                }
                owner[l] = Some(h);
                ids.push(l);
            }
            cell_of[h] = Some((ids, comp));
        }
        let mut out_cells = Vec::with_capacity(high.len());
        let mut components = Vec::with_capacity(high.len());
        for (h, c) in cell_of.into_iter().enumerate() {
            let (ids, comp) = c.ok_or_else(|| Error::InvalidAlignment(format!("no cell for `{}`", high.name(h))))?;
            out_cells.push(ids);
            components.push(comp);
        }
        let excluded = (0..low.len()).filter(|&l| owner[l].is_none()).collect();
        Ok(Self {
            cells: out_cells,
            components,
            excluded,
            owner,
        })
    }

    /// Cell of high-level variable `h`.
    pub fn cell(&self, h: VarId) -> &[VarId] {
        &self.cells[h]
    }

    /// Excluded low-level variables.
    pub fn excluded(&self) -> &[VarId] {
        &self.excluded
    }

    /// High-level variable owning low-level variable `l`, if any.
    pub fn owner(&self, l: VarId) -> Option<VarId> {
        self.owner[l]
    }
}

/// A set of admissible interventions.
#[derive(Clone, Debug)]
pub enum InterventionSet {
    /// An explicit list.
    Explicit(Vec<Intervention>),
    /// Every intervention that fixes at least the listed variables; any other
    /// variable may be fixed or left alone.
    FixingAtLeast(Vec<VarId>),
    /// Low-level only: every cell-wise preimage of an admissible high-level
    /// intervention, with excluded variables left alone.
    OmegaPreimage,
}

impl InterventionSet {
    /// Whether `iv` belongs to the set (not defined for [`Self::OmegaPreimage`]).
    pub fn contains(&self, model: &CausalModel, iv: &Intervention) -> bool {
        match self {
            Self::Explicit(list) => list.contains(iv),
            Self::FixingAtLeast(required) => {
                required.iter().all(|r| iv.get(*r).is_some())
                    && iv.assignments().iter().all(|(k, v)| model.range(*k).contains(v))
            }
            Self::OmegaPreimage => false,
        }
    }

    fn radices(model: &CausalModel, required: &[VarId]) -> Vec<(VarId, u128, bool)> {
        (0..model.len())
            .map(|v| {
                let req = required.contains(&v);
                let n = model.range(v).len();
                (v, if req { n } else { n + 1 }, req)
            })
            .collect()
    }

    fn count(&self, model: &CausalModel) -> u128 {
        match self {
            Self::Explicit(list) => list.len() as u128,
            Self::FixingAtLeast(required) => Self::radices(model, required)
                .iter()
                .fold(1u128, |acc, (_, r, _)| acc.saturating_mul(*r)),
            Self::OmegaPreimage => 0,
        }
    }

    fn nth(&self, model: &CausalModel, radices: &[(VarId, u128, bool)], mut idx: u128) -> Intervention {
        match self {
            Self::Explicit(list) => list[idx as usize].clone(),
            Self::FixingAtLeast(_) => {
                let mut out = Vec::with_capacity(radices.len());
                for &(v, r, req) in radices.iter().rev() {
                    // u128 division is slow; every enumerable set fits in u64.
                    let digit = match (u64::try_from(idx), u64::try_from(r)) {
                        (Ok(i), Ok(r)) => {
                            idx = u128::from(i / r);
                            u128::from(i % r)
                        }
                        _ => {
                            let d = idx % r;
                            idx /= r;
                            d
                        }
                    };
                    if req {
                        out.push((v, model.range(v).nth(digit)));
                    } else if digit > 0 {
                        out.push((v, model.range(v).nth(digit - 1)));
                    }
                }
                out.reverse();
                Intervention::from_ids(out)
            }
            Self::OmegaPreimage => unreachable!("preimage sets are enumerated by the checker"),
        }
    }
}

/// Which high-level settings the setting map must reach.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurjectivityScope {
    /// Settings produced by some admissible high-level intervention.
    Reachable,
    /// Every setting in the product of the high-level ranges.
    FullRange,
}

/// Knobs for [`AbstractionChecker::check`].
#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    /// Maximum number of interventions or settings enumerated per condition.
    pub budget: u128,
    /// Target of the surjectivity condition on settings.
    pub scope: SurjectivityScope,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            budget: 50_000_000,
            scope: SurjectivityScope::Reachable,
        }
    }
}

/// Verdict for one condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionResult {
    /// Whether the condition holds on everything checked.
    pub holds: bool,
    /// Items checked.
    pub checked: u64,
    /// Items violating the condition.
    pub failures: u64,
    /// Rendered first counterexample.
    pub counterexample: Option<String>,
}

/// Result of checking all three conditions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractionReport {
    /// Setting map surjective onto the target settings.
    pub setting_surjectivity: ConditionResult,
    /// Intervention map surjective onto the admissible high-level interventions.
    pub intervention_surjectivity: ConditionResult,
    /// Every admissible low-level intervention commutes with the setting map.
    pub commutation: ConditionResult,
    /// The commutation check restricted to interventions on low-level inputs only.
    pub commutation_inputs_only: ConditionResult,
    /// Low-level interventions skipped because their image is undefined or not admissible.
    pub skipped: u64,
}

impl AbstractionReport {
    /// Whether the alignment is a constructive abstraction.
    pub fn holds(&self) -> bool {
        self.setting_surjectivity.holds && self.intervention_surjectivity.holds && self.commutation.holds
    }

    /// Plain-text rendering, stable across runs.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, label: &str, c: &ConditionResult| {
            let _ = writeln!(
                s,
                "{label}: {} (checked {}, failures {})",
                if c.holds { "PASS" } else { "FAIL" },
                c.checked,
                c.failures
            );
            if let Some(ce) = &c.counterexample {
                let _ = writeln!(s, "  counterexample: {ce}");
            }
        };
        row(&mut s, "settings map surjective", &self.setting_surjectivity);
        row(&mut s, "interventions map surjective", &self.intervention_surjectivity);
        row(&mut s, "interventions commute", &self.commutation);
        row(&mut s, "input interventions commute", &self.commutation_inputs_only);
        let _ = writeln!(s, "skipped low-level interventions: {}", self.skipped);
        let _ = writeln!(
            s,
            "verdict: {}",
            if self.holds() {
                "ABSTRACTION"
            } else {
                "NOT AN ABSTRACTION"
            }
        );
        s
    }
}

/// Outcome of the commutation check for one low-level intervention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Commutation {
    /// The image intervention is undefined or not admissible.
    OutsideDomain,
    /// Abstracting the low-level result equals the high-level result.
    Holds,
    /// They differ; `abstracted` is `None` when the setting map is undefined there.
    Violated {
        /// Setting map applied to the low-level result.
        abstracted: Option<Setting>,
        /// High-level result under the image intervention.
        expected: Setting,
    },
}

/// Enumerative checker for one alignment.
pub struct AbstractionChecker<'a> {
    low: &'a CausalModel,
    high: &'a CausalModel,
    alignment: &'a Alignment,
    /// Per high-level variable: value -> cell settings mapping to it, in enumeration order.
    inverse: Vec<FxHashMap<Value, Vec<Vec<Value>>>>,
}

#[derive(Default, Clone)]
struct Tally {
    checked: u64,
    failures: u64,
    first: Option<Intervention>,
    inputs_checked: u64,
    inputs_failures: u64,
    inputs_first: Option<Intervention>,
    skipped: u64,
}

fn min_opt(a: Option<Intervention>, b: Option<Intervention>) -> Option<Intervention> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.checked += o.checked;
        self.failures += o.failures;
        self.first = min_opt(self.first, o.first);
        self.inputs_checked += o.inputs_checked;
        self.inputs_failures += o.inputs_failures;
        self.inputs_first = min_opt(self.inputs_first, o.inputs_first);
        self.skipped += o.skipped;
        self
    }
}

impl<'a> AbstractionChecker<'a> {
    /// Precompute inverse tables of every cell map. Each cell's setting space
    /// must have at most `cell_budget` elements.
    pub fn new(
        low: &'a CausalModel,
        high: &'a CausalModel,
        alignment: &'a Alignment,
        cell_budget: u128,
    ) -> Result<Self> {
        if alignment.cells.len() != high.len() || alignment.owner.len() != low.len() {
            return Err(Error::InvalidAlignment("alignment built for other models".into()));
        }
        let mut inverse = Vec::with_capacity(high.len());
        for h in 0..high.len() {
            let cell = &alignment.cells[h];
            let total: u128 = cell.iter().map(|&l| low.range(l).len()).product();
            if total > cell_budget {
                return Err(Error::BudgetExceeded {
                    what: format!("cell of `{}`", high.name(h)),
                    needed: total,
                    budget: cell_budget,
                });
            }
            let mut table: FxHashMap<Value, Vec<Vec<Value>>> = FxHashMap::default();
            for mut idx in 0..total {
                let mut vals = vec![Value::Int(0); cell.len()];
                for (slot, &l) in cell.iter().enumerate().rev() {
                    let n = low.range(l).len();
                    vals[slot] = low.range(l).nth(idx % n);
                    idx /= n;
                }
                if let Some(v) = alignment.components[h].apply(&vals) {
                    if high.range(h).contains(&v) {
                        table.entry(v).or_default().push(vals);
                    }
                }
            }
            inverse.push(table);
        }
        Ok(Self {
            low,
            high,
            alignment,
            inverse,
        })
    }

    fn component(&self, h: VarId, cell_values: &[Value]) -> Option<Value> {
        self.alignment.components[h]
            .apply(cell_values)
            .filter(|v| self.high.range(h).contains(v))
    }

    /// Setting map: `None` if any component is undefined.
    pub fn tau(&self, low_setting: &Setting) -> Option<Setting> {
        let mut out = Vec::with_capacity(self.high.len());
        let mut buf = Vec::with_capacity(self.low.len());
        for (h, cell) in self.alignment.cells.iter().enumerate() {
            buf.clear();
            buf.extend(cell.iter().map(|&l| low_setting.get(l).clone()));
            out.push(self.component(h, &buf)?);
        }
        Some(Setting(out))
    }

    /// Intervention map: `None` if a cell is partially assigned or its map is undefined.
    pub fn omega(&self, iv: &Intervention) -> Option<Intervention> {
        let mut out = Vec::with_capacity(iv.assignments().len());
        for (h, cell) in self.alignment.cells.iter().enumerate() {
            let assigned = cell.iter().filter(|&&l| iv.get(l).is_some()).count();
            if assigned == 0 {
                continue;
            }
            if assigned < cell.len() {
                return None;
            }
            let vals: Vec<Value> = cell.iter().map(|&l| iv.get(l).expect("assigned").clone()).collect();
            out.push((h, self.component(h, &vals)?));
        }
        Some(Intervention::from_ids(out))
    }

    /// A total low-level setting mapping to `high_setting`, if one exists.
    pub fn tau_preimage(&self, high_setting: &Setting) -> Option<Setting> {
        let mut vals: Vec<Value> = (0..self.low.len()).map(|l| self.low.range(l).nth(0)).collect();
        for (h, cell) in self.alignment.cells.iter().enumerate() {
            let pre = self.inverse[h].get(high_setting.get(h))?.first()?;
            for (&l, v) in cell.iter().zip(pre) {
                vals[l] = v.clone();
            }
        }
        Some(Setting(vals))
    }

    fn preimage_count(&self, ih: &Intervention) -> u128 {
        ih.assignments()
            .iter()
            .map(|(h, v)| self.inverse[*h].get(v).map_or(0, |p| p.len() as u128))
            .product()
    }

    fn preimage_nth(&self, ih: &Intervention, mut idx: u128) -> Intervention {
        let mut out = Vec::new();
        for (h, v) in ih.assignments().iter().rev() {
            let options = &self.inverse[*h][v];
            let choice = &options[(idx % options.len() as u128) as usize];
            idx /= options.len() as u128;
            for (&l, val) in self.alignment.cells[*h].iter().zip(choice) {
                out.push((l, val.clone()));
            }
        }
        Intervention::from_ids(out)
    }

    /// Commutation verdict for one low-level intervention.
    pub fn check_commutes(&self, il: &Intervention, high_set: &InterventionSet) -> Commutation {
        let Some(ih) = self.omega(il) else {
            return Commutation::OutsideDomain;
        };
        if !high_set.contains(self.high, &ih) {
            return Commutation::OutsideDomain;
        }
        let low_result = self.low.evaluate_unchecked(il);
        let expected = self.high.evaluate_unchecked(&ih);
        let abstracted = self.tau(&low_result);
        if abstracted.as_ref() == Some(&expected) {
            Commutation::Holds
        } else {
            Commutation::Violated { abstracted, expected }
        }
    }

    fn only_inputs(&self, il: &Intervention) -> bool {
        il.assignments().iter().all(|(l, _)| self.low.is_input(*l))
    }

    fn tally_one(&self, il: &Intervention, high_set: &InterventionSet) -> Tally {
        let mut t = Tally::default();
        match self.check_commutes(il, high_set) {
            Commutation::OutsideDomain => t.skipped = 1,
            verdict => {
                let bad = verdict != Commutation::Holds;
                t.checked = 1;
                if bad {
                    t.failures = 1;
                    t.first = Some(il.clone());
                }
                if self.only_inputs(il) {
                    t.inputs_checked = 1;
                    if bad {
                        t.inputs_failures = 1;
                        t.inputs_first = Some(il.clone());
                    }
                }
            }
        }
        t
    }

    fn budget_check(what: &str, needed: u128, budget: u128) -> Result<()> {
        if needed > budget {
            return Err(Error::BudgetExceeded {
                what: what.to_string(),
                needed,
                budget,
            });
        }
        Ok(())
    }

    /// Check all three conditions.
    ///
    /// `high_set` lists the admissible high-level interventions; `low_set` the
    /// admissible low-level ones. Enumeration runs on the current rayon pool;
    /// counterexamples are the lexicographically smallest failing item, so the
    /// report does not depend on the number of threads.
    pub fn check(
        &self,
        low_set: &InterventionSet,
        high_set: &InterventionSet,
        options: CheckOptions,
    ) -> Result<AbstractionReport> {
        if matches!(high_set, InterventionSet::OmegaPreimage) {
            return Err(Error::InvalidAlignment(
                "preimage sets are only meaningful on the low level".into(),
            ));
        }
        let high_count = high_set.count(self.high);
        Self::budget_check("high-level interventions", high_count, options.budget)?;
        let high_radices = match high_set {
            InterventionSet::FixingAtLeast(req) => InterventionSet::radices(self.high, req),
            _ => Vec::new(),
        };
        let high_nth = |i: u64| high_set.nth(self.high, &high_radices, i as u128);

        let setting_surjectivity = self.check_setting_surjectivity(high_count, &high_nth, options)?;
        let intervention_surjectivity = self.check_intervention_surjectivity(low_set, high_count, &high_nth);

        let tally = match low_set {
            InterventionSet::OmegaPreimage => {
                let total: u128 = (0..high_count as u64)
                    .into_par_iter()
                    .map(|i| self.preimage_count(&high_nth(i)))
                    .sum();
                Self::budget_check("low-level interventions", total, options.budget)?;
                (0..high_count as u64)
                    .into_par_iter()
                    .map(|i| {
                        let ih = high_nth(i);
                        let n = self.preimage_count(&ih);
                        (0..n).fold(Tally::default(), |acc, j| {
                            acc.merge(self.tally_one(&self.preimage_nth(&ih, j), high_set))
                        })
                    })
                    .reduce(Tally::default, Tally::merge)
            }
            other => {
                let n = other.count(self.low);
                Self::budget_check("low-level interventions", n, options.budget)?;
                let radices = match other {
                    InterventionSet::FixingAtLeast(req) => InterventionSet::radices(self.low, req),
                    _ => Vec::new(),
                };
                (0..n as u64)
                    .into_par_iter()
                    .map(|i| self.tally_one(&other.nth(self.low, &radices, i as u128), high_set))
                    .reduce(Tally::default, Tally::merge)
            }
        };
        let render = |iv: &Option<Intervention>| iv.as_ref().map(|i| i.display(self.low));
        Ok(AbstractionReport {
            setting_surjectivity,
            intervention_surjectivity,
            commutation: ConditionResult {
                holds: tally.failures == 0,
                checked: tally.checked,
                failures: tally.failures,
                counterexample: render(&tally.first),
            },
            commutation_inputs_only: ConditionResult {
                holds: tally.inputs_failures == 0,
                checked: tally.inputs_checked,
                failures: tally.inputs_failures,
                counterexample: render(&tally.inputs_first),
            },
            skipped: tally.skipped,
        })
    }

    /// The setting map is cell-wise, so it reaches a high-level setting iff
    /// each coordinate value has a preimage in its cell. It therefore suffices
    /// to check every value each variable takes in a target setting.
    fn check_setting_surjectivity(
        &self,
        high_count: u128,
        high_nth: &(dyn Fn(u64) -> Intervention + Sync),
        options: CheckOptions,
    ) -> Result<ConditionResult> {
        let targets: Vec<BTreeSet<Value>> = match options.scope {
            SurjectivityScope::FullRange => {
                for h in 0..self.high.len() {
                    Self::budget_check("high-level range", self.high.range(h).len(), options.budget)?;
                }
                (0..self.high.len())
                    .map(|h| self.high.range(h).iter().collect())
                    .collect()
            }
            SurjectivityScope::Reachable => (0..high_count as u64)
                .into_par_iter()
                .fold(
                    || vec![FxHashSet::default(); self.high.len()],
                    |mut acc: Vec<FxHashSet<Value>>, i| {
                        let s = self.high.evaluate_unchecked(&high_nth(i));
                        for (h, v) in s.0.into_iter().enumerate() {
                            acc[h].insert(v);
                        }
                        acc
                    },
                )
                .reduce(
                    || vec![FxHashSet::default(); self.high.len()],
                    |mut a, b| {
                        for (x, y) in a.iter_mut().zip(b) {
                            x.extend(y);
                        }
                        a
                    },
                )
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
        };
        let mut checked = 0u64;
        let mut failures = 0u64;
        let mut first = None;
        for (h, values) in targets.iter().enumerate() {
            for v in values {
                checked += 1;
                if !self.inverse[h].contains_key(v) {
                    failures += 1;
                    if first.is_none() {
                        first = Some(format!("{}={} has no preimage", self.high.name(h), v));
                    }
                }
            }
        }
        Ok(ConditionResult {
            holds: failures == 0,
            checked,
            failures,
            counterexample: first,
        })
    }

    fn check_intervention_surjectivity(
        &self,
        low_set: &InterventionSet,
        high_count: u128,
        high_nth: &(dyn Fn(u64) -> Intervention + Sync),
    ) -> ConditionResult {
        let image: Option<HashSet<Intervention>> = match low_set {
            InterventionSet::Explicit(list) => Some(list.iter().filter_map(|i| self.omega(i)).collect()),
            _ => None,
        };
        let has_preimage = |ih: &Intervention| -> bool {
            if let Some(img) = &image {
                return img.contains(ih);
            }
            if self.preimage_count(ih) == 0 {
                return false;
            }
            match low_set {
                InterventionSet::FixingAtLeast(required) => required
                    .iter()
                    .all(|&l| self.alignment.owner[l].is_none_or(|h| ih.get(h).is_some())),
                _ => true,
            }
        };
        let (failures, first) = (0..high_count as u64)
            .into_par_iter()
            .map(|i| {
                let ih = high_nth(i);
                if has_preimage(&ih) {
                    (0u64, None)
                } else {
                    (1, Some(ih))
                }
            })
            .reduce(|| (0, None), |a, b| (a.0 + b.0, min_opt(a.1, b.1)));
        ConditionResult {
            holds: failures == 0,
            checked: high_count as u64,
            failures,
            counterexample: first.map(|i| i.display(self.high)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::{Equation, ModelBuilder, Range};

    fn copy_pair() -> (CausalModel, CausalModel) {
        let id = Equation::new("identity", |a| a[0].clone());
        let low = ModelBuilder::new()
            .input("A", Range::upto(2), Value::Int(0))
            .var("B", Range::upto(2), &["A"], id.clone())
            .var("Junk", Range::upto(1), &[], Equation::constant(Value::Int(0)))
            .build()
            .unwrap();
        let high = ModelBuilder::new()
            .input("P", Range::upto(2), Value::Int(0))
            .var("Q", Range::upto(2), &["P"], id)
            .build()
            .unwrap();
        (low, high)
    }

    #[test]
    fn identity_alignment_is_abstraction() {
        let (low, high) = copy_pair();
        let al = Alignment::new(
            &low,
            &high,
            vec![
                ("P", vec!["A"], TauComponent::identity()),
                ("Q", vec!["B"], TauComponent::identity()),
            ],
        )
        .unwrap();
        assert_eq!(al.excluded(), &[2]);
        let ck = AbstractionChecker::new(&low, &high, &al, 1000).unwrap();
        let rep = ck
            .check(
                &InterventionSet::OmegaPreimage,
                &InterventionSet::FixingAtLeast(vec![0]),
                CheckOptions::default(),
            )
            .unwrap();
        assert!(rep.holds(), "{}", rep.to_text());
        assert_eq!(rep.commutation.checked, 12);
    }

    #[test]
    fn omega_requires_whole_cell() {
        let (low, high) = copy_pair();
        let al = Alignment::new(
            &low,
            &high,
            vec![
                (
                    "P",
                    vec!["A", "Junk"],
                    TauComponent::new("first", |v| Some(v[0].clone())),
                ),
                ("Q", vec!["B"], TauComponent::identity()),
            ],
        )
        .unwrap();
        let ck = AbstractionChecker::new(&low, &high, &al, 1000).unwrap();
        let partial = Intervention::from_ids([(0, Value::Int(1))]);
        assert_eq!(ck.omega(&partial), None);
        let whole = Intervention::from_ids([(0, Value::Int(1)), (2, Value::Int(0))]);
        assert_eq!(ck.omega(&whole), Some(Intervention::from_ids([(0, Value::Int(1))])));
    }

    #[test]
    fn overlapping_cells_rejected() {
        let (low, high) = copy_pair();
        let err = Alignment::new(
            &low,
            &high,
            vec![
                ("P", vec!["A"], TauComponent::identity()),
                ("Q", vec!["A"], TauComponent::identity()),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidAlignment(_)));
    }

    #[test]
    fn swapped_alignment_fails_commutation() {
        let (_, high) = copy_pair();
        let constant = Equation::new("zero", |_| Value::Int(0));
        let low = ModelBuilder::new()
            .input("A", Range::upto(2), Value::Int(0))
            .var("B", Range::upto(2), &["A"], constant)
            .build()
            .unwrap();
        let al = Alignment::new(
            &low,
            &high,
            vec![
                ("P", vec!["A"], TauComponent::identity()),
                ("Q", vec!["B"], TauComponent::identity()),
            ],
        )
        .unwrap();
        let ck = AbstractionChecker::new(&low, &high, &al, 1000).unwrap();
        let rep = ck
            .check(
                &InterventionSet::OmegaPreimage,
                &InterventionSet::FixingAtLeast(vec![0]),
                CheckOptions::default(),
            )
            .unwrap();
        assert!(!rep.commutation.holds);
        assert_eq!(rep.commutation.counterexample.as_deref(), Some("{A<-1}"));
    }
}
