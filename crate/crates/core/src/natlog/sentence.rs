//! Sentences of the fixed template and the word lists they are built from.
//!
//! Every sentence has the shape
//! `Q_S Adj_S N_S Neg Adv V Q_O Adj_O N_O`, where adjectives, the adverb and
//! the negation are optional.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::natlog::relation::Relation;
use crate::natlog::signature::Quantifier;

/// Open lexical classes, one per word slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordClass {
    /// Subject nouns (never empty).
    SubjectNoun,
    /// Object nouns (never empty).
    ObjectNoun,
    /// Subject adjectives (may be empty).
    SubjectAdjective,
    /// Object adjectives (may be empty).
    ObjectAdjective,
    /// Transitive verbs (never empty).
    Verb,
    /// Adverbs (may be empty).
    Adverb,
}

impl WordClass {
    /// All classes.
    pub const ALL: [WordClass; 6] = [
        WordClass::SubjectNoun,
        WordClass::ObjectNoun,
        WordClass::SubjectAdjective,
        WordClass::ObjectAdjective,
        WordClass::Verb,
        WordClass::Adverb,
    ];

    /// Whether the slot may be left empty.
    pub fn optional(self) -> bool {
        matches!(
            self,
            WordClass::SubjectAdjective | WordClass::ObjectAdjective | WordClass::Adverb
        )
    }
}

/// Word lists per class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Subject nouns.
    pub subject_nouns: Vec<String>,
    /// Object nouns.
    pub object_nouns: Vec<String>,
    /// Subject adjectives.
    pub subject_adjectives: Vec<String>,
    /// Object adjectives.
    pub object_adjectives: Vec<String>,
    /// Transitive verbs, in the form used after `does not`.
    pub verbs: Vec<String>,
    /// Adverbs.
    pub adverbs: Vec<String>,
}

const NOUNS: &[&str] = &[
    "baker", "person", "doctor", "singer", "farmer", "pilot", "teacher", "dancer", "lawyer", "nurse", "artist",
    "driver", "sailor", "writer", "guard", "cook", "judge", "clerk", "miner", "tailor",
];
const ADJECTIVES: &[&str] = &[
    "happy", "tall", "quiet", "angry", "young", "clever", "brave", "lazy", "polite", "silly", "eager", "gentle",
    "rich", "proud", "calm", "bold", "shy", "kind", "grumpy", "lucky",
];
const VERBS: &[&str] = &[
    "see", "help", "know", "like", "meet", "call", "thank", "hire", "trust", "teach", "visit", "follow", "praise",
    "warn", "greet", "blame", "invite", "admire", "watch", "paint",
];
const ADVERBS: &[&str] = &[
    "quickly", "slowly", "happily", "quietly", "eagerly", "rarely", "gladly", "gently", "boldly", "calmly", "warmly",
    "coldly", "loudly", "softly", "openly", "wisely", "kindly", "badly", "fairly", "barely",
];

impl Lexicon {
    /// Built-in English words, `per_class` per class. Subject and object
    /// slots share their lists. Beyond the built-in lists, numbered synthetic
    /// words are appended.
    pub fn english(per_class: usize) -> Self {
        let take = |base: &[&str], stem: &str| -> Vec<String> {
            (0..per_class)
                .map(|i| base.get(i).map_or_else(|| format!("{stem}{i}"), |w| w.to_string()))
                .collect()
        };
        Self {
            subject_nouns: take(NOUNS, "noun"),
            object_nouns: take(NOUNS, "noun"),
            subject_adjectives: take(ADJECTIVES, "adj"),
            object_adjectives: take(ADJECTIVES, "adj"),
            verbs: take(VERBS, "verb"),
            adverbs: take(ADVERBS, "adv"),
        }
    }

    /// Words of a class.
    pub fn words(&self, class: WordClass) -> &[String] {
        match class {
            WordClass::SubjectNoun => &self.subject_nouns,
            WordClass::ObjectNoun => &self.object_nouns,
            WordClass::SubjectAdjective => &self.subject_adjectives,
            WordClass::ObjectAdjective => &self.object_adjectives,
            WordClass::Verb => &self.verbs,
            WordClass::Adverb => &self.adverbs,
        }
    }

    /// Check every list is non-empty and duplicate-free, and no word is a reserved token.
    pub fn validate(&self) -> Result<()> {
        for class in WordClass::ALL {
            let ws = self.words(class);
            if ws.is_empty() {
                return Err(Error::Config(format!("no words for {class:?}")));
            }
            let mut seen = std::collections::HashSet::new();
            for w in ws {
                let reserved = RESERVED.contains(&w.as_str());
                if w.is_empty() || w.contains(char::is_whitespace) || reserved || !seen.insert(w.as_str()) {
                    return Err(Error::Config(format!("bad or repeated word `{w}` in {class:?}")));
                }
            }
        }
        Ok(())
    }
}

/// Tokens with a fixed role that cannot be used as open-class words.
pub const RESERVED: &[&str] = &["ε", "not", "does", "every", "some", "no", "[CLS]", "[SEP]", "[PAD]"];

/// One sentence of the template.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sentence {
    /// Subject quantifier.
    pub subject_quantifier: Quantifier,
    /// Optional subject adjective.
    pub subject_adjective: Option<String>,
    /// Subject noun.
    pub subject_noun: String,
    /// Whether the verb phrase is negated.
    pub negated: bool,
    /// Optional adverb.
    pub adverb: Option<String>,
    /// Verb.
    pub verb: String,
    /// Object quantifier.
    pub object_quantifier: Quantifier,
    /// Optional object adjective.
    pub object_adjective: Option<String>,
    /// Object noun.
    pub object_noun: String,
}

/// Number of tokens a sentence occupies.
pub const SENTENCE_TOKENS: usize = 12;

/// Placeholder token for an empty slot.
pub const EMPTY: &str = "ε";

impl Sentence {
    /// Fixed-length token sequence: quantifiers and negation take two tokens,
    /// every other slot one, empty slots are [`EMPTY`].
    pub fn tokens(&self) -> [&str; SENTENCE_TOKENS] {
        let quant = |q: Quantifier| -> [&'static str; 2] {
            match q {
                Quantifier::NotEvery => ["not", "every"],
                other => [EMPTY, other.word()],
            }
        };
        fn opt(w: &Option<String>) -> &str {
            w.as_deref().unwrap_or(EMPTY)
        }
        let [qs0, qs1] = quant(self.subject_quantifier);
        let [qo0, qo1] = quant(self.object_quantifier);
        let [n0, n1] = if self.negated { ["does", "not"] } else { [EMPTY, EMPTY] };
        [
            qs0,
            qs1,
            opt(&self.subject_adjective),
            &self.subject_noun,
            n0,
            n1,
            opt(&self.adverb),
            &self.verb,
            qo0,
            qo1,
            opt(&self.object_adjective),
            &self.object_noun,
        ]
    }

    /// Parse the output of [`Self::tokens`].
    pub fn from_tokens(tokens: &[&str]) -> Result<Self> {
        if tokens.len() != SENTENCE_TOKENS {
            return Err(Error::parse("sentence", format!("expected {SENTENCE_TOKENS} tokens")));
        }
        let quant = |a: &str, b: &str| -> Result<Quantifier> {
            match (a, b) {
                ("not", "every") => Ok(Quantifier::NotEvery),
                (EMPTY, w) if w != "not every" => w.parse(),
                _ => Err(Error::parse("sentence", format!("bad quantifier `{a} {b}`"))),
            }
        };
        let opt = |w: &str| (w != EMPTY).then(|| w.to_string());
        let word = |w: &str| -> Result<String> {
            if w == EMPTY {
                Err(Error::parse("sentence", "empty noun or verb"))
            } else {
                Ok(w.to_string())
            }
        };
        let negated = match (tokens[4], tokens[5]) {
            ("does", "not") => true,
            (EMPTY, EMPTY) => false,
            (a, b) => return Err(Error::parse("sentence", format!("bad negation `{a} {b}`"))),
        };
        Ok(Self {
            subject_quantifier: quant(tokens[0], tokens[1])?,
            subject_adjective: opt(tokens[2]),
            subject_noun: word(tokens[3])?,
            negated,
            adverb: opt(tokens[6]),
            verb: word(tokens[7])?,
            object_quantifier: quant(tokens[8], tokens[9])?,
            object_adjective: opt(tokens[10]),
            object_noun: word(tokens[11])?,
        })
    }

    /// Whether every word belongs to the right class of `lex`.
    pub fn uses_lexicon(&self, lex: &Lexicon) -> bool {
        let has = |c: WordClass, w: &str| lex.words(c).iter().any(|x| x == w);
        let opt = |c: WordClass, w: &Option<String>| w.as_deref().is_none_or(|w| has(c, w));
        has(WordClass::SubjectNoun, &self.subject_noun)
            && has(WordClass::ObjectNoun, &self.object_noun)
            && has(WordClass::Verb, &self.verb)
            && opt(WordClass::SubjectAdjective, &self.subject_adjective)
            && opt(WordClass::ObjectAdjective, &self.object_adjective)
            && opt(WordClass::Adverb, &self.adverb)
    }
}

impl fmt::Display for Sentence {
    /// Readable surface form with empty slots dropped.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<&str> = self.tokens().into_iter().filter(|t| *t != EMPTY).collect();
        f.write_str(&words.join(" "))
    }
}

/// Lexical relation between two optional words of classes `a` and `b`:
/// equivalence for identical words (including two empty slots), independence
/// otherwise, since distinct words are unrelated by construction.
pub fn rel_lexical(a_class: WordClass, a: Option<&str>, b_class: WordClass, b: Option<&str>) -> Result<Relation> {
    if a_class != b_class {
        return Err(Error::CrossClass(format!("{a_class:?} vs {b_class:?}")));
    }
    if !a_class.optional() && (a.is_none() || b.is_none()) {
        return Err(Error::CrossClass(format!("{a_class:?} slot cannot be empty")));
    }
    Ok(if a == b {
        Relation::Equivalence
    } else {
        Relation::Independence
    })
}
