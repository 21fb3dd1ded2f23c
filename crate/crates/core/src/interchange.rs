//! Interchange interventions: run a network on a base input with the
//! activations at some grid cells taken from a source input, and compare the
//! resulting label with the causal model under the matching node intervention.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::{AbstractionChecker, Commutation};
use crate::addition::{self, AdditionAlignment};
use crate::causal::{Intervention, Value};
use crate::error::{Error, Result};
use crate::mqnli::{node_positions, Example, Vocabulary, SPECIAL_POSITIONS};
use crate::natlog::{interchange_label, Label, Node, SignatureLibrary};
use crate::neural::{argmax, FixedAdditionNet, GridLocation, TokenGridNetwork};

fn patch(target: &mut Array2<f64>, donor: &Array2<f64>, loc: &GridLocation) {
    let (a, b) = loc.span(target.ncols());
    for p in &loc.positions {
        for u in a..b {
            target[[*p, u]] = donor[[*p, u]];
        }
    }
}

/// Label of `base` with the cells at `loc` replaced by their values on `source`.
pub fn interchange(net: &TokenGridNetwork, base: &[usize], source: &[usize], loc: &GridLocation) -> Result<usize> {
    if base.len() != source.len() {
        return Err(Error::Shape(format!(
            "base has {} tokens, source has {}",
            base.len(),
            source.len()
        )));
    }
    loc.validate(net)?;
    let donor = net.forward_to(source, loc.layer)?;
    let mut row = net.forward_to(base, loc.layer)?;
    patch(&mut row, &donor, loc);
    Ok(argmax(net.run_from(loc.layer, row).view()))
}

/// Activations at `loc`, position-major.
pub fn capture(net: &TokenGridNetwork, tokens: &[usize], loc: &GridLocation) -> Result<Vec<f64>> {
    loc.validate(net)?;
    let row = net.forward_to(tokens, loc.layer)?;
    let (a, b) = loc.span(row.ncols());
    Ok(loc
        .positions
        .iter()
        .flat_map(|p| (a..b).map(|u| row[[*p, u]]).collect::<Vec<_>>())
        .collect())
}

/// Label the causal model gives `base` with `node` set to its value on `source`.
pub fn intervene_node(lib: &SignatureLibrary, base: &Example, source: &Example, node: Node) -> Label {
    interchange_label(
        lib,
        (&base.premise, &base.hypothesis),
        (&source.premise, &source.hypothesis),
        node,
    )
}

/// Whether the node intervention changes the causal model's label of `base`.
pub fn impactful(lib: &SignatureLibrary, base: &Example, source: &Example, node: Node) -> bool {
    intervene_node(lib, base, source, node) != base.label
}

/// One evaluated pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterchangeResult {
    /// Index of the base example.
    pub base: usize,
    /// Index of the source example.
    pub source: usize,
    /// Intervened node.
    pub node: Node,
    /// Intervened cells.
    pub location: GridLocation,
    /// Causal label of the base.
    pub base_label: Label,
    /// Network label after the interchange.
    pub network_label: usize,
    /// Causal label after the node intervention.
    pub causal_label: Label,
    /// Network and causal labels agree.
    pub success: bool,
    /// The node intervention changes the causal label.
    pub impactful: bool,
}

/// Evaluate one pair of a sample.
pub fn evaluate_pair(
    net: &TokenGridNetwork,
    lib: &SignatureLibrary,
    vocab: &Vocabulary,
    sample: &[Example],
    (base, source): (usize, usize),
    node: Node,
    loc: &GridLocation,
) -> Result<InterchangeResult> {
    let (b, s) = (&sample[base], &sample[source]);
    let network_label = interchange(net, &vocab.encode(&b.tokens())?, &vocab.encode(&s.tokens())?, loc)?;
    let causal_label = intervene_node(lib, b, s, node);
    Ok(InterchangeResult {
        base,
        source,
        node,
        location: loc.clone(),
        base_label: b.label,
        network_label,
        causal_label,
        success: network_label == causal_label.index(),
        impactful: causal_label != b.label,
    })
}

/// Indices of examples the network labels correctly.
pub fn correctly_classified(net: &TokenGridNetwork, vocab: &Vocabulary, examples: &[Example]) -> Result<Vec<usize>> {
    let verdicts: Vec<bool> = examples
        .par_iter()
        .map(|e| Ok(net.forward(&vocab.encode(&e.tokens())?)?.label == e.label_index()))
        .collect::<Result<_>>()?;
    Ok(verdicts
        .iter()
        .enumerate()
        .filter(|(_, ok)| **ok)
        .map(|(i, _)| i)
        .collect())
}

/// Square boolean matrix indexed by (base, source).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    /// All-false n × n matrix.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            words: vec![0; (n * n).div_ceil(64)],
        }
    }

    /// Side length.
    pub fn len(&self) -> usize {
        self.n
    }

    /// Whether the matrix has no rows.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Entry (i, j).
    pub fn get(&self, i: usize, j: usize) -> bool {
        let k = i * self.n + j;
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    /// Set entry (i, j).
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let k = i * self.n + j;
        if value {
            self.words[k / 64] |= 1 << (k % 64);
        } else {
            self.words[k / 64] &= !(1 << (k % 64));
        }
    }

    /// Number of true entries.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Build from rows of booleans; errors unless square.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("matrix with {n} rows is not square")));
        }
        let mut m = Self::new(n);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        Ok(m)
    }
}

/// How candidate locations are generated for each node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocationPolicy {
    /// Grid rows to intervene on; empty means every row above the embeddings.
    pub layers: Vec<usize>,
    /// Single columns above each token the node reads.
    pub leaf_columns: bool,
    /// All of a phrasal node's token columns jointly.
    pub span_columns: bool,
    /// The `[CLS]` and `[SEP]` columns, one at a time.
    pub special_columns: bool,
}

impl Default for LocationPolicy {
    fn default() -> Self {
        Self {
            layers: Vec::new(),
            leaf_columns: true,
            span_columns: true,
            special_columns: true,
        }
    }
}

impl LocationPolicy {
    /// Candidate locations for `node` on a network with `rows` grid rows.
    pub fn locations(&self, node: Node, rows: usize) -> Result<Vec<GridLocation>> {
        let layers: Vec<usize> = if self.layers.is_empty() {
            (1..rows).collect()
        } else {
            self.layers.clone()
        };
        if let Some(bad) = layers.iter().find(|l| **l >= rows) {
            return Err(Error::Config(format!("layer {bad} outside 0..{rows}")));
        }
        let columns = node_positions(node);
        let mut sets: Vec<Vec<usize>> = Vec::new();
        if self.leaf_columns {
            sets.extend(columns.iter().map(|p| vec![*p]));
        }
        if self.span_columns && !node.is_leaf() {
            sets.push(columns.clone());
        }
        if self.special_columns {
            sets.extend(SPECIAL_POSITIONS.iter().map(|p| vec![*p]));
        }
        let mut out = Vec::new();
        for l in layers {
            for s in &sets {
                let loc = GridLocation::new(l, s);
                if !out.contains(&loc) {
                    out.push(loc);
                }
            }
        }
        Ok(out)
    }
}

/// Outcome of all ordered pairs at one (node, location).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepResult {
    /// Intervened node.
    pub node: Node,
    /// Intervened cells.
    pub location: GridLocation,
    /// `success[base][source]`.
    pub success: BitMatrix,
    /// `impactful[base][source]`; the same at every location of a node.
    pub impactful: BitMatrix,
}

impl SweepResult {
    /// Number of ordered pairs.
    pub fn pairs(&self) -> usize {
        self.success.len() * self.success.len()
    }

    /// Pairs that are both successful and impactful.
    pub fn impactful_successes(&self) -> usize {
        let n = self.success.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| self.success.get(*i, *j) && self.impactful.get(*i, *j))
            .count()
    }
}

/// Impactful matrix of a sample for one node.
pub fn impactful_matrix(lib: &SignatureLibrary, sample: &[Example], node: Node) -> BitMatrix {
    let rows: Vec<Vec<bool>> = sample
        .par_iter()
        .map(|b| sample.iter().map(|s| impactful(lib, b, s, node)).collect())
        .collect();
    BitMatrix::from_rows(&rows).expect("square by construction")
}

/// Interchange at one location for every ordered pair of a sample.
///
/// Each example's row at `loc.layer` is computed once and serves both as base
/// and as source.
pub fn sweep_location(
    net: &TokenGridNetwork,
    lib: &SignatureLibrary,
    tokens: &[Vec<usize>],
    sample: &[Example],
    node: Node,
    loc: &GridLocation,
    impactful: &BitMatrix,
) -> Result<SweepResult> {
    loc.validate(net)?;
    let rows: Vec<Array2<f64>> = tokens
        .par_iter()
        .map(|t| net.forward_to(t, loc.layer))
        .collect::<Result<_>>()?;
    let success: Vec<Vec<bool>> = (0..sample.len())
        .into_par_iter()
        .map(|b| {
            (0..sample.len())
                .map(|s| {
                    let mut row = rows[b].clone();
                    patch(&mut row, &rows[s], loc);
                    let label = argmax(net.run_from(loc.layer, row).view());
                    label == intervene_node(lib, &sample[b], &sample[s], node).index()
                })
                .collect()
        })
        .collect();
    Ok(SweepResult {
        node,
        location: loc.clone(),
        success: BitMatrix::from_rows(&success)?,
        impactful: impactful.clone(),
    })
}

/// Every (node, location) of the policy over every ordered pair of `sample`.
///
/// `sample` should already be restricted to correctly classified examples.
/// Fails before any work if the number of interchanges exceeds `budget`.
pub fn alignment_search(
    net: &TokenGridNetwork,
    lib: &SignatureLibrary,
    vocab: &Vocabulary,
    sample: &[Example],
    nodes: &[Node],
    policy: &LocationPolicy,
    budget: u128,
) -> Result<Vec<SweepResult>> {
    let plan: Vec<(Node, Vec<GridLocation>)> = nodes
        .iter()
        .map(|n| Ok((*n, policy.locations(*n, net.rows())?)))
        .collect::<Result<_>>()?;
    let needed: u128 = plan.iter().map(|(_, l)| l.len() as u128).sum::<u128>() * (sample.len() as u128).pow(2);
    if needed > budget {
        return Err(Error::BudgetExceeded {
            what: "interchange interventions".into(),
            needed,
            budget,
        });
    }
    let tokens: Vec<Vec<usize>> = sample
        .iter()
        .map(|e| vocab.encode(&e.tokens()))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (node, locations) in plan {
        let imp = impactful_matrix(lib, sample, node);
        for loc in &locations {
            out.push(sweep_location(net, lib, &tokens, sample, node, loc, &imp)?);
        }
    }
    Ok(out)
}

/// Write sweep results: a header per (node, location), then one line per base
/// with one digit per source (bit 0 success, bit 1 impactful).
pub fn write_bitmatrices(results: &[SweepResult], header: &str, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "interchange-bitmatrix v1 {header}");
    for r in results {
        let n = r.success.len();
        let _ = writeln!(out, "> {} {} {n}", r.node, r.location);
        for i in 0..n {
            let line: String = (0..n)
                .map(|j| char::from(b'0' + u8::from(r.success.get(i, j)) + 2 * u8::from(r.impactful.get(i, j))))
                .collect();
            let _ = writeln!(out, "{line}");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read [`write_bitmatrices`] output; returns the header text and results.
pub fn read_bitmatrices(path: &Path) -> Result<(String, Vec<SweepResult>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: &str| Error::parse("bitmatrix", format!("line {}: {msg}", line + 1));
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix("interchange-bitmatrix v1"))
        .ok_or_else(|| bad(0, "missing header"))?
        .trim()
        .to_string();
    let mut out = Vec::new();
    while let Some((i, line)) = lines.next() {
        let parts: Vec<&str> = line
            .strip_prefix("> ")
            .ok_or_else(|| bad(i, "expected a block header"))?
            .split(' ')
            .collect();
        let [node, loc, n] = parts[..] else {
            return Err(bad(i, "bad block header"));
        };
        let node: Node = node.parse()?;
        let location: GridLocation = loc.parse()?;
        let n: usize = n.parse().map_err(|_| bad(i, "bad size"))?;
        let mut success = BitMatrix::new(n);
        let mut imp = BitMatrix::new(n);
        for row in 0..n {
            let (j, line) = lines.next().ok_or_else(|| bad(i, "truncated block"))?;
            if line.len() != n {
                return Err(bad(j, "row length differs from the block size"));
            }
            for (col, c) in line.bytes().enumerate() {
                let v = c
                    .checked_sub(b'0')
                    .filter(|v| *v < 4)
                    .ok_or_else(|| bad(j, "bad cell"))?;
                success.set(row, col, v & 1 == 1);
                imp.set(row, col, v & 2 == 2);
            }
        }
        out.push(SweepResult {
            node,
            location,
            success,
            impactful: imp,
        });
    }
    Ok((header, out))
}

/// Tab-separated counts per (node, location).
pub fn summary_tsv(results: &[SweepResult]) -> String {
    let mut out = String::from("node\tlocation\tpairs\tsuccesses\timpactful\timpactful_successes\tsuccess_rate\n");
    for r in results {
        let pairs = r.pairs();
        let ok = r.success.count();
        let rate = if pairs == 0 { 0.0 } else { ok as f64 / pairs as f64 };
        let _ = writeln!(
            out,
            "{}\t{}\t{pairs}\t{ok}\t{}\t{}\t{rate:.6}",
            r.node,
            r.location,
            r.impactful.count(),
            r.impactful_successes()
        );
    }
    out
}

/// Sum-model variable targeted by an addition interchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdditionVariable {
    /// `S1 = X + Y`.
    PartialSum,
    /// `W = Z`.
    Carry,
}

impl AdditionVariable {
    /// Name in the sum model.
    pub fn name(self) -> &'static str {
        match self {
            AdditionVariable::PartialSum => "S1",
            AdditionVariable::Carry => "W",
        }
    }

    /// Hidden unit aligned with the variable.
    pub fn unit(self, which: AdditionAlignment) -> usize {
        match (which, self) {
            (AdditionAlignment::Corrected, AdditionVariable::PartialSum) => 0,
            (AdditionAlignment::Corrected, AdditionVariable::Carry) => 1,
            (AdditionAlignment::Swapped, AdditionVariable::PartialSum) => 2,
            (AdditionAlignment::Swapped, AdditionVariable::Carry) => 0,
        }
    }
}

/// Output of the one-hot addition network on `base` with hidden `unit` taken from `source`.
pub fn addition_interchange(base: [u8; 3], source: [u8; 3], unit: usize) -> f64 {
    let net = FixedAdditionNet::OneHot;
    let donor = net.hidden(&net.input(source))[unit];
    net.forward_with(base, &[(unit, donor)]).output
}

/// Whether an addition interchange agrees with the sum model on every aligned
/// variable (`S1`, `W`, `S2`), computed by direct arithmetic.
pub fn addition_success(which: AdditionAlignment, variable: AdditionVariable, base: [u8; 3], source: [u8; 3]) -> bool {
    let net = FixedAdditionNet::OneHot;
    let unit = variable.unit(which);
    let donor = net.hidden(&net.input(source))[unit];
    let trace = net.forward_with(base, &[(unit, donor)]);
    let read = |v: AdditionVariable| trace.hidden[v.unit(which)];
    let [x, y, z] = base.map(f64::from);
    let [sx, sy, sz] = source.map(f64::from);
    let (s1, w) = match variable {
        AdditionVariable::PartialSum => (sx + sy, z),
        AdditionVariable::Carry => (x + y, sz),
    };
    read(AdditionVariable::PartialSum) == s1 && read(AdditionVariable::Carry) == w && trace.output == s1 + w
}

/// Pair-for-pair comparison of [`addition_success`] with the abstraction
/// checker's commutation verdict on the same low-level intervention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditionAgreement {
    /// Pairs evaluated.
    pub pairs: usize,
    /// Pairs where the interchange succeeded.
    pub successes: usize,
    /// Pairs where the commutation check held.
    pub commuting: usize,
    /// First pair (in base-major order) where the two verdicts differ.
    pub first_disagreement: Option<([u8; 3], [u8; 3])>,
}

/// Compare interchange success and commutation for every (base, source) pair.
pub fn addition_agreement(
    which: AdditionAlignment,
    variable: AdditionVariable,
    bases: &[[u8; 3]],
    sources: &[[u8; 3]],
) -> Result<AdditionAgreement> {
    let low = addition::network_model();
    let high = addition::sum_model();
    let al = addition::alignment(&low, &high, which)?;
    let checker = AbstractionChecker::new(&low, &high, &al, 1 << 12)?;
    let high_set = addition::admissible_high(&high);
    let hidden_var = low.var(["H1", "H2", "H3"][variable.unit(which)])?;
    let inputs = [low.var("Dx")?, low.var("Dy")?, low.var("Dz")?];
    let net = FixedAdditionNet::OneHot;
    let verdicts: Vec<(bool, bool)> = bases
        .par_iter()
        .flat_map_iter(|b| sources.iter().map(move |s| (*b, *s)))
        .map(|(b, s)| {
            let donor = net.hidden(&net.input(s))[variable.unit(which)];
            let mut assignments: Vec<(usize, Value)> =
                inputs.iter().zip(b).map(|(v, d)| (*v, Value::one_hot(10, d))).collect();
            assignments.push((hidden_var, Value::Int(donor as i64)));
            let commutes =
                checker.check_commutes(&Intervention::from_ids(assignments), &high_set) == Commutation::Holds;
            (addition_success(which, variable, b, s), commutes)
        })
        .collect();
    let first_disagreement = verdicts
        .iter()
        .position(|(a, b)| a != b)
        .map(|k| (bases[k / sources.len()], sources[k % sources.len()]));
    Ok(AdditionAgreement {
        pairs: verdicts.len(),
        successes: verdicts.iter().filter(|v| v.0).count(),
        commuting: verdicts.iter().filter(|v| v.1).count(),
        first_disagreement,
    })
}

/// All 1000 digit triples in lexicographic order.
pub fn all_digit_triples() -> Vec<[u8; 3]> {
    (0..1000u16)
        .map(|k| [(k / 100) as u8, (k / 10 % 10) as u8, (k % 10) as u8])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitmatrix_set_get_count() {
        let mut m = BitMatrix::new(9);
        m.set(8, 8, true);
        m.set(0, 3, true);
        m.set(0, 3, true);
        assert!(m.get(8, 8) && m.get(0, 3) && !m.get(3, 0));
        assert_eq!(m.count(), 2);
        m.set(8, 8, false);
        assert_eq!(m.count(), 1);
        assert!(BitMatrix::from_rows(&[vec![true], vec![false]]).is_err());
    }

    #[test]
    fn worked_addition_interchange() {
        assert_eq!(addition_interchange([1, 2, 3], [4, 5, 6], 0), 12.0);
        assert_eq!(addition_interchange([1, 2, 3], [4, 5, 6], 2), 6.0);
    }
}
