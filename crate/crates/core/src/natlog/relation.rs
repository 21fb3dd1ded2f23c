//! The seven basic entailment relations and their truth-value combinations.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Truth-value combination of a premise/hypothesis pair, as a bit.
pub mod combo {
    /// Both true.
    pub const TT: u8 = 1;
    /// Premise true, hypothesis false.
    pub const TF: u8 = 2;
    /// Premise false, hypothesis true.
    pub const FT: u8 = 4;
    /// Both false.
    pub const FF: u8 = 8;
    /// All four.
    pub const ALL: u8 = 15;

    /// Bit for a pair of truth values.
    pub fn of(premise: bool, hypothesis: bool) -> u8 {
        match (premise, hypothesis) {
            (true, true) => TT,
            (true, false) => TF,
            (false, true) => FT,
            (false, false) => FF,
        }
    }
}

/// A basic entailment relation between two expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    /// Equivalence.
    Equivalence,
    /// Forward entailment: the first is strictly included in the second.
    Forward,
    /// Reverse entailment.
    Reverse,
    /// Negation: exhaustive and exclusive.
    Negation,
    /// Alternation: exclusive, not exhaustive.
    Alternation,
    /// Cover: exhaustive, not exclusive.
    Cover,
    /// Independence.
    Independence,
}

/// Three-way inference label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// The premise entails the hypothesis.
    Entailment,
    /// The premise contradicts the hypothesis.
    Contradiction,
    /// Neither.
    Neutral,
}

impl Label {
    /// All labels in class-index order.
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Contradiction, Label::Neutral];

    /// Class index.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Inverse of [`Self::index`].
    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Contradiction => "contradiction",
            Label::Neutral => "neutral",
        }
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::parse("label", format!("unknown label `{s}`")))
    }
}

impl Relation {
    /// All relations in canonical order.
    pub const ALL: [Relation; 7] = [
        Relation::Equivalence,
        Relation::Forward,
        Relation::Reverse,
        Relation::Negation,
        Relation::Alternation,
        Relation::Cover,
        Relation::Independence,
    ];

    /// Index in [`Self::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Inverse of [`Self::index`].
    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Conventional symbol.
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Equivalence => "≡",
            Relation::Forward => "⊏",
            Relation::Reverse => "⊐",
            Relation::Negation => "^",
            Relation::Alternation => "|",
            Relation::Cover => "⌣",
            Relation::Independence => "#",
        }
    }

    /// Truth-value combinations a pair in this relation may realize.
    pub fn permitted(self) -> u8 {
        use combo::*;
        match self {
            Relation::Equivalence => TT | FF,
            Relation::Forward => ALL & !TF,
            Relation::Reverse => ALL & !FT,
            Relation::Negation => TF | FT,
            Relation::Alternation => TF | FT | FF,
            Relation::Cover => TT | TF | FT,
            Relation::Independence => ALL,
        }
    }

    /// The most informative relation compatible with the realized combinations.
    ///
    /// Returns `None` for the empty set. Priority: both mixed combinations
    /// missing gives equivalence, then a missing `TF` gives forward and a
    /// missing `FT` reverse; if both uniform combinations are missing it is
    /// negation, a missing `TT` alternation, a missing `FF` cover; otherwise
    /// independence.
    pub fn from_combos(realized: u8) -> Option<Relation> {
        use combo::*;
        if realized == 0 {
            return None;
        }
        let missing = |c: u8| realized & c == 0;
        Some(if missing(TF) && missing(FT) {
            Relation::Equivalence
        } else if missing(TF) {
            Relation::Forward
        } else if missing(FT) {
            Relation::Reverse
        } else if missing(TT) && missing(FF) {
            Relation::Negation
        } else if missing(TT) {
            Relation::Alternation
        } else if missing(FF) {
            Relation::Cover
        } else {
            Relation::Independence
        })
    }

    /// The relation after swapping premise and hypothesis.
    pub fn converse(self) -> Relation {
        match self {
            Relation::Forward => Relation::Reverse,
            Relation::Reverse => Relation::Forward,
            other => other,
        }
    }

    /// The relation after negating both sides.
    pub fn dual(self) -> Relation {
        match self {
            Relation::Forward => Relation::Reverse,
            Relation::Reverse => Relation::Forward,
            Relation::Alternation => Relation::Cover,
            Relation::Cover => Relation::Alternation,
            other => other,
        }
    }

    /// Three-way label of a sentence pair in this relation.
    pub fn label(self) -> Label {
        match self {
            Relation::Equivalence | Relation::Forward => Label::Entailment,
            Relation::Negation | Relation::Alternation => Label::Contradiction,
            Relation::Reverse | Relation::Cover | Relation::Independence => Label::Neutral,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Relation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.symbol() == s)
            .ok_or_else(|| Error::parse("relation", format!("unknown relation `{s}`")))
    }
}
