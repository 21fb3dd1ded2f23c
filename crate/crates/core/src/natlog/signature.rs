//! Projectivity signatures of aligned operator pairs.
//!
//! A signature maps the relations between the arguments of a premise
//! operator and a hypothesis operator to the relation between the two
//! results. Signatures are derived by enumerating all set-theoretic models
//! over a small universe: an input relation is read as a constraint on the
//! truth-value combinations its arguments may realize, quantifier
//! restrictors are non-empty, and modifiers are intersective. The derived
//! tables are shipped as a versioned text file.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::natlog::relation::{combo, Relation};

/// A generalized quantifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantifier {
    /// `every`
    Every,
    /// `some`
    Some,
    /// `no`
    No,
    /// `not every`
    NotEvery,
}

impl Quantifier {
    /// All quantifiers in canonical order.
    pub const ALL: [Quantifier; 4] = [
        Quantifier::Every,
        Quantifier::Some,
        Quantifier::No,
        Quantifier::NotEvery,
    ];

    /// Surface form.
    pub fn word(self) -> &'static str {
        match self {
            Quantifier::Every => "every",
            Quantifier::Some => "some",
            Quantifier::No => "no",
            Quantifier::NotEvery => "not every",
        }
    }

    /// Index in [`Self::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Truth value of `Q(restrictor, scope)` over bitmask sets.
    pub fn holds(self, restrictor: u32, scope: u32) -> bool {
        match self {
            Quantifier::Every => restrictor & !scope == 0,
            Quantifier::Some => restrictor & scope != 0,
            Quantifier::No => restrictor & scope == 0,
            Quantifier::NotEvery => restrictor & !scope != 0,
        }
    }
}

impl FromStr for Quantifier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|q| q.word() == s)
            .ok_or_else(|| Error::parse("quantifier", format!("unknown quantifier `{s}`")))
    }
}

/// How an optional intersective modifier appears in premise and hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModifierPair {
    /// The same word on both sides.
    Same,
    /// Two different words.
    Different,
    /// A word in the premise only.
    PremiseOnly,
    /// A word in the hypothesis only.
    HypothesisOnly,
    /// No modifier on either side.
    Neither,
}

impl ModifierPair {
    /// All pairs in canonical order.
    pub const ALL: [ModifierPair; 5] = [
        ModifierPair::Same,
        ModifierPair::Different,
        ModifierPair::PremiseOnly,
        ModifierPair::HypothesisOnly,
        ModifierPair::Neither,
    ];

    /// Classify a pair of optional words.
    pub fn of(premise: Option<&str>, hypothesis: Option<&str>) -> Self {
        match (premise, hypothesis) {
            (Some(a), Some(b)) if a == b => ModifierPair::Same,
            (Some(_), Some(_)) => ModifierPair::Different,
            (Some(_), None) => ModifierPair::PremiseOnly,
            (None, Some(_)) => ModifierPair::HypothesisOnly,
            (None, None) => ModifierPair::Neither,
        }
    }

    /// Short name used in identifiers.
    pub fn name(self) -> &'static str {
        match self {
            ModifierPair::Same => "same",
            ModifierPair::Different => "different",
            ModifierPair::PremiseOnly => "premise-only",
            ModifierPair::HypothesisOnly => "hypothesis-only",
            ModifierPair::Neither => "neither",
        }
    }

    /// Index in [`Self::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

/// An aligned pair of operators, the value of a projection node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OperatorPair {
    /// Premise and hypothesis quantifiers.
    Quantifiers(Quantifier, Quantifier),
    /// Whether premise and hypothesis are negated.
    Negations(bool, bool),
    /// Modifier pair.
    Modifiers(ModifierPair),
}

fn neg_word(negated: bool) -> &'static str {
    if negated {
        "not"
    } else {
        "ε"
    }
}

impl OperatorPair {
    /// Every operator pair, in canonical order.
    pub fn all() -> Vec<OperatorPair> {
        let mut out = Vec::new();
        for a in Quantifier::ALL {
            for b in Quantifier::ALL {
                out.push(OperatorPair::Quantifiers(a, b));
            }
        }
        for a in [true, false] {
            for b in [true, false] {
                out.push(OperatorPair::Negations(a, b));
            }
        }
        for m in ModifierPair::ALL {
            out.push(OperatorPair::Modifiers(m));
        }
        out
    }

    /// Number of relation arguments.
    pub fn arity(self) -> usize {
        match self {
            OperatorPair::Quantifiers(..) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for OperatorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorPair::Quantifiers(a, b) => write!(f, "q:{}/{}", a.word(), b.word()),
            OperatorPair::Negations(a, b) => write!(f, "neg:{}/{}", neg_word(*a), neg_word(*b)),
            OperatorPair::Modifiers(m) => write!(f, "mod:{}", m.name()),
        }
    }
}

impl FromStr for OperatorPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("operator pair", format!("unknown operator pair `{s}`"));
        if let Some(rest) = s.strip_prefix("q:") {
            let (a, b) = rest.split_once('/').ok_or_else(bad)?;
            return Ok(OperatorPair::Quantifiers(a.parse()?, b.parse()?));
        }
        if let Some(rest) = s.strip_prefix("neg:") {
            let (a, b) = rest.split_once('/').ok_or_else(bad)?;
            let parse = |w: &str| match w {
                "not" => Ok(true),
                "ε" => Ok(false),
                _ => Err(bad()),
            };
            return Ok(OperatorPair::Negations(parse(a)?, parse(b)?));
        }
        if let Some(rest) = s.strip_prefix("mod:") {
            return ModifierPair::ALL
                .into_iter()
                .find(|m| m.name() == rest)
                .map(OperatorPair::Modifiers)
                .ok_or_else(bad);
        }
        Err(bad())
    }
}

/// Relation table of one operator pair; `None` marks an unsatisfiable input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    arity: usize,
    table: Vec<Option<Relation>>,
}

impl Signature {
    fn index(args: &[Relation]) -> usize {
        args.iter().fold(0, |acc, r| acc * 7 + r.index())
    }

    /// Output relation for the given argument relations.
    pub fn apply(&self, args: &[Relation]) -> Option<Relation> {
        assert_eq!(args.len(), self.arity, "signature arity");
        self.table[Self::index(args)]
    }

    /// Output when every argument is equivalent.
    pub fn on_equivalents(&self) -> Option<Relation> {
        self.apply(&vec![Relation::Equivalence; self.arity])
    }
}

/// Signatures for every operator pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignatureLibrary {
    universe_size: usize,
    signatures: BTreeMap<OperatorPair, Signature>,
}

const GOLDEN: &str = include_str!("../../data/signatures.tsv");
const HEADER: &str = "# projectivity signatures v1";

fn combos_of(a: u32, b: u32, full: u32) -> u8 {
    let mut c = 0;
    if a & b != 0 {
        c |= combo::TT;
    }
    if a & !b & full != 0 {
        c |= combo::TF;
    }
    if !a & b & full != 0 {
        c |= combo::FT;
    }
    if !a & !b & full != 0 {
        c |= combo::FF;
    }
    c
}

/// Relations whose permitted combinations include every combination in `realized`.
fn admitting(realized: u8) -> impl Iterator<Item = Relation> {
    Relation::ALL
        .into_iter()
        .filter(move |r| realized & !r.permitted() == 0)
}

impl SignatureLibrary {
    /// The shipped tables.
    pub fn golden() -> &'static SignatureLibrary {
        static LIB: std::sync::OnceLock<SignatureLibrary> = std::sync::OnceLock::new();
        LIB.get_or_init(|| SignatureLibrary::parse(GOLDEN).expect("shipped signature table parses"))
    }

    /// Universe size the tables were derived at.
    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    /// Signature of an operator pair.
    pub fn get(&self, pair: OperatorPair) -> &Signature {
        &self.signatures[&pair]
    }

    /// Apply the signature of `pair` to argument relations.
    pub fn apply(&self, pair: OperatorPair, args: &[Relation]) -> Option<Relation> {
        self.get(pair).apply(args)
    }

    /// Derive all signatures by enumerating models over a universe of `size` elements.
    pub fn derive(size: usize) -> Result<Self> {
        if !(3..=6).contains(&size) {
            return Err(Error::Config(format!("universe size {size} not in 3..=6")));
        }
        let full: u32 = (1 << size) - 1;
        let sets = 0..=full;
        let mut signatures = BTreeMap::new();

        // Quantifiers: acc[q1][q2][c_restrictor][c_scope] = realized output combos.
        let mut acc = [[[[0u8; 16]; 16]; 4]; 4];
        for a in 1..=full {
            for a2 in 1..=full {
                let c1 = combos_of(a, a2, full) as usize;
                for b in sets.clone() {
                    for b2 in sets.clone() {
                        let c2 = combos_of(b, b2, full) as usize;
                        for q1 in Quantifier::ALL {
                            let t1 = q1.holds(a, b);
                            for q2 in Quantifier::ALL {
                                acc[q1.index()][q2.index()][c1][c2] |= combo::of(t1, q2.holds(a2, b2));
                            }
                        }
                    }
                }
            }
        }
        for q1 in Quantifier::ALL {
            for q2 in Quantifier::ALL {
                let mut table = vec![None; 49];
                for r1 in Relation::ALL {
                    for r2 in Relation::ALL {
                        let mut out = 0u8;
                        for c1 in 1..16usize {
                            if c1 as u8 & !r1.permitted() != 0 {
                                continue;
                            }
                            for c2 in 1..16usize {
                                if c2 as u8 & !r2.permitted() == 0 {
                                    out |= acc[q1.index()][q2.index()][c1][c2];
                                }
                            }
                        }
                        table[Signature::index(&[r1, r2])] = Relation::from_combos(out);
                    }
                }
                signatures.insert(OperatorPair::Quantifiers(q1, q2), Signature { arity: 2, table });
            }
        }

        // Negation: acc[c_in] = realized output combos.
        for n1 in [true, false] {
            for n2 in [true, false] {
                let mut acc = [0u8; 16];
                for p in sets.clone() {
                    for h in sets.clone() {
                        let fp = if n1 { !p & full } else { p };
                        let gh = if n2 { !h & full } else { h };
                        acc[combos_of(p, h, full) as usize] |= combos_of(fp, gh, full);
                    }
                }
                signatures.insert(OperatorPair::Negations(n1, n2), unary(&acc));
            }
        }

        // Intersective modifiers.
        for m in ModifierPair::ALL {
            let mut acc = [0u8; 16];
            for n in sets.clone() {
                for n2 in sets.clone() {
                    let c = combos_of(n, n2, full) as usize;
                    for a in sets.clone() {
                        for a2 in sets.clone() {
                            let (x, y) = match m {
                                ModifierPair::Same => {
                                    if a2 != a {
                                        continue;
                                    }
                                    (a & n, a & n2)
                                }
                                ModifierPair::Different => (a & n, a2 & n2),
                                ModifierPair::PremiseOnly => (a & n, n2),
                                ModifierPair::HypothesisOnly => (n, a2 & n2),
                                ModifierPair::Neither => (n, n2),
                            };
                            acc[c] |= combos_of(x, y, full);
                        }
                    }
                }
            }
            signatures.insert(OperatorPair::Modifiers(m), unary(&acc));
        }
        Ok(Self {
            universe_size: size,
            signatures,
        })
    }

    /// Render as the versioned text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(HEADER);
        s.push('\n');
        s.push_str(&format!("# universe-size {}\n", self.universe_size));
        s.push_str("# conventions: input relations constrain truth-value combinations; quantifier restrictors non-empty; modifiers intersective\n");
        s.push_str("# columns: operator-pair, argument relations (comma separated), result relation or unsat\n");
        for (pair, sig) in &self.signatures {
            let args_list: Vec<Vec<Relation>> = if sig.arity == 2 {
                Relation::ALL
                    .iter()
                    .flat_map(|a| Relation::ALL.iter().map(move |b| vec![*a, *b]))
                    .collect()
            } else {
                Relation::ALL.iter().map(|a| vec![*a]).collect()
            };
            for args in args_list {
                let out = sig.apply(&args).map_or("unsat".to_string(), |r| r.to_string());
                let args: Vec<&str> = args.iter().map(|r| r.symbol()).collect();
                s.push_str(&format!("{pair}\t{}\t{out}\n", args.join(",")));
            }
        }
        s
    }

    /// Parse the versioned text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::parse("signature table", "missing or unknown version header"));
        }
        let mut universe_size = 0;
        let mut signatures: BTreeMap<OperatorPair, Signature> = BTreeMap::new();
        for (no, line) in text.lines().enumerate().skip(1) {
            let err = |m: String| Error::parse("signature table", format!("line {}: {m}", no + 1));
            if let Some(rest) = line.strip_prefix("# universe-size ") {
                universe_size = rest.trim().parse().map_err(|_| err("bad universe size".into()))?;
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err("expected three tab-separated columns".into()));
            }
            let pair: OperatorPair = cols[0].parse()?;
            let args: Vec<Relation> = cols[1].split(',').map(str::parse).collect::<Result<_>>()?;
            if args.len() != pair.arity() {
                return Err(err(format!("{pair} takes {} arguments", pair.arity())));
            }
            let out = match cols[2] {
                "unsat" => None,
                r => Some(r.parse()?),
            };
            let sig = signatures.entry(pair).or_insert_with(|| Signature {
                arity: pair.arity(),
                table: vec![None; 7usize.pow(pair.arity() as u32)],
            });
            sig.table[Signature::index(&args)] = out;
        }
        for pair in OperatorPair::all() {
            if !signatures.contains_key(&pair) {
                return Err(Error::parse("signature table", format!("missing {pair}")));
            }
        }
        Ok(Self {
            universe_size,
            signatures,
        })
    }

    /// Entries on which two libraries disagree, rendered one per line.
    pub fn diff(&self, other: &SignatureLibrary) -> Vec<String> {
        let mut out = Vec::new();
        for (pair, sig) in &self.signatures {
            let theirs = other.get(*pair);
            for (i, (a, b)) in sig.table.iter().zip(&theirs.table).enumerate() {
                if a != b {
                    let args: Vec<&str> = if sig.arity == 2 {
                        vec![Relation::ALL[i / 7].symbol(), Relation::ALL[i % 7].symbol()]
                    } else {
                        vec![Relation::ALL[i].symbol()]
                    };
                    let show = |r: &Option<Relation>| r.map_or("unsat".to_string(), |r| r.to_string());
                    out.push(format!("{pair}\t{}\t{} vs {}", args.join(","), show(a), show(b)));
                }
            }
        }
        out
    }
}

fn unary(acc: &[u8; 16]) -> Signature {
    let table = Relation::ALL
        .iter()
        .map(|r| {
            let out = (1..16u8)
                .filter(|c| admitting(*c).any(|x| x == *r))
                .fold(0u8, |o, c| o | acc[c as usize]);
            Relation::from_combos(out)
        })
        .collect();
    Signature { arity: 1, table }
}
