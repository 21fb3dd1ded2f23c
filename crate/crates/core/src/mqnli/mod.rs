//! Templatic sentence-pair inference data: examples, tokenization,
//! subphrase augmentation, generation and line-delimited storage.

mod generate;
mod io;

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::natlog::sentence::{EMPTY, SENTENCE_TOKENS};
use crate::natlog::{
    derive, Label, Lexicon, Node, NodeValue, Quantifier, Relation, Sentence, SignatureLibrary, WordClass,
};

pub use generate::{
    generate, generate_examples, DatasetSplit, GeneratorConfig, Provenance, QuantifierFrame, SplitMode,
};
pub use io::{load_jsonl, load_split, save_jsonl, save_split, Dataset, DEFAULT_VERIFY_SAMPLE};

/// Length of every token sequence: `[CLS] premise [SEP] hypothesis [SEP]`.
pub const SEQUENCE_LENGTH: usize = 2 * SENTENCE_TOKENS + 3;

/// Number of sentence-level labels; subphrase labels follow them.
pub const SENTENCE_LABELS: usize = 3;

/// Sentence labels plus one label per relation for subphrase examples.
pub const TOTAL_LABELS: usize = SENTENCE_LABELS + 7;

/// Sequence position of a premise token offset.
pub fn premise_position(offset: usize) -> usize {
    1 + offset
}

/// Sequence position of a hypothesis token offset.
pub fn hypothesis_position(offset: usize) -> usize {
    2 + SENTENCE_TOKENS + offset
}

/// Positions of `[CLS]` and the two separators.
pub const SPECIAL_POSITIONS: [usize; 3] = [0, SENTENCE_TOKENS + 1, SEQUENCE_LENGTH - 1];

/// Sequence positions covered by the leaves under `node`, premise first.
pub fn node_positions(node: Node) -> Vec<usize> {
    let offsets = node.token_offsets();
    offsets
        .iter()
        .map(|o| premise_position(*o))
        .chain(offsets.iter().map(|o| hypothesis_position(*o)))
        .collect()
}

/// A labeled sentence pair with every intermediate node annotated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Example {
    /// Premise.
    pub premise: Sentence,
    /// Hypothesis.
    pub hypothesis: Sentence,
    /// Gold label.
    pub label: Label,
    /// Values of the intermediate nodes, in [`Node::intermediates`] order.
    pub nodes: Vec<NodeValue>,
}

impl Example {
    /// Label and annotate a pair.
    pub fn new(lib: &SignatureLibrary, premise: Sentence, hypothesis: Sentence) -> Self {
        let d = derive(lib, &premise, &hypothesis);
        Self {
            label: d.label(),
            nodes: Node::intermediates().iter().map(|n| d.get(*n)).collect(),
            premise,
            hypothesis,
        }
    }

    /// Whether the stored label and annotations match a fresh derivation.
    pub fn is_consistent(&self, lib: &SignatureLibrary) -> bool {
        let fresh = Example::new(lib, self.premise.clone(), self.hypothesis.clone());
        fresh.label == self.label && fresh.nodes == self.nodes
    }

    /// Stored value of an intermediate node.
    pub fn node(&self, node: Node) -> NodeValue {
        let i = Node::intermediates()
            .iter()
            .position(|n| *n == node)
            .expect("intermediate node");
        self.nodes[i]
    }

    /// The full token sequence.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(SEQUENCE_LENGTH);
        out.push(CLS);
        out.extend(self.premise.tokens());
        out.push(SEP);
        out.extend(self.hypothesis.tokens());
        out.push(SEP);
        out
    }

    /// Class index of the gold label.
    pub fn label_index(&self) -> usize {
        self.label.index()
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {} => {}", self.premise, self.hypothesis, self.label.name())
    }
}

/// Classification token.
pub const CLS: &str = "[CLS]";
/// Separator token.
pub const SEP: &str = "[SEP]";
/// Token standing in for positions outside a subphrase.
pub const PAD: &str = "[PAD]";

/// Token ids for a lexicon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Special tokens, closed-class words, then every lexicon word once.
    pub fn new(lex: &Lexicon) -> Self {
        let mut tokens: Vec<String> = [PAD, CLS, SEP, EMPTY, "not", "does", "every", "some", "no"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for class in WordClass::ALL {
            for w in lex.words(class) {
                if !tokens.contains(w) {
                    tokens.push(w.clone());
                }
            }
        }
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, ids }
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: the special tokens are present.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of a token.
    pub fn id(&self, token: &str) -> Result<usize> {
        self.ids
            .get(token)
            .copied()
            .ok_or_else(|| Error::Config(format!("token `{token}` is not in the vocabulary")))
    }

    /// Token of an id.
    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Ids of a token sequence.
    pub fn encode(&self, tokens: &[&str]) -> Result<Vec<usize>> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// A subphrase pair taken from one node of an example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubphraseExample {
    /// Node the subphrase sits under.
    pub node: Node,
    /// Full-length sequence with positions outside the subphrase padded.
    pub tokens: Vec<String>,
    /// True at positions that belong to the subphrase.
    pub mask: Vec<bool>,
    /// Relation between the aligned subphrases.
    pub relation: Relation,
}

impl SubphraseExample {
    /// Class index: subphrase labels follow the sentence labels.
    pub fn label_index(&self) -> usize {
        SENTENCE_LABELS + self.relation.index()
    }
}

/// One subphrase example per intermediate node. Operator-pair nodes are
/// labeled with the relation their signature assigns to equivalent arguments.
pub fn augment(lib: &SignatureLibrary, example: &Example) -> Vec<SubphraseExample> {
    let full = example.tokens();
    Node::intermediates()
        .iter()
        .map(|&node| {
            let mut mask = vec![false; SEQUENCE_LENGTH];
            for p in node_positions(node) {
                mask[p] = true;
            }
            let tokens = full
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    if mask[i] || SPECIAL_POSITIONS.contains(&i) {
                        t.to_string()
                    } else {
                        PAD.to_string()
                    }
                })
                .collect();
            SubphraseExample {
                node,
                tokens,
                mask,
                relation: example.node(node).relation(lib),
            }
        })
        .collect()
}

/// The nine slot strings of a sentence in template order.
pub fn slots(s: &Sentence) -> [String; 9] {
    let opt = |w: &Option<String>| w.clone().unwrap_or_else(|| EMPTY.to_string());
    [
        s.subject_quantifier.word().to_string(),
        opt(&s.subject_adjective),
        s.subject_noun.clone(),
        if s.negated { "does not" } else { EMPTY }.to_string(),
        opt(&s.adverb),
        s.verb.clone(),
        s.object_quantifier.word().to_string(),
        opt(&s.object_adjective),
        s.object_noun.clone(),
    ]
}

/// Inverse of [`slots`].
pub fn from_slots(slots: &[String]) -> Result<Sentence> {
    if slots.len() != 9 {
        return Err(Error::parse(
            "sentence slots",
            format!("expected 9 slots, found {}", slots.len()),
        ));
    }
    let opt = |w: &str| (w != EMPTY).then(|| w.to_string());
    let word = |w: &str| -> Result<String> {
        if w == EMPTY || w.is_empty() {
            Err(Error::parse("sentence slots", "nouns and verbs cannot be empty"))
        } else {
            Ok(w.to_string())
        }
    };
    let negated = match slots[3].as_str() {
        "does not" => true,
        EMPTY => false,
        other => return Err(Error::parse("sentence slots", format!("bad negation `{other}`"))),
    };
    Ok(Sentence {
        subject_quantifier: slots[0].parse::<Quantifier>()?,
        subject_adjective: opt(&slots[1]),
        subject_noun: word(&slots[2])?,
        negated,
        adverb: opt(&slots[4]),
        verb: word(&slots[5])?,
        object_quantifier: slots[6].parse::<Quantifier>()?,
        object_adjective: opt(&slots[7]),
        object_noun: word(&slots[8])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> Example {
        let p = Sentence::from_tokens(&[
            "ε", "some", "happy", "baker", "does", "not", "ε", "see", "not", "every", "ε", "person",
        ])
        .unwrap();
        let h = Sentence::from_tokens(&[
            "ε", "no", "ε", "baker", "ε", "ε", "ε", "see", "ε", "some", "ε", "person",
        ])
        .unwrap();
        Example::new(SignatureLibrary::golden(), p, h)
    }

    #[test]
    fn token_layout() {
        let e = example();
        let toks = e.tokens();
        assert_eq!(toks.len(), SEQUENCE_LENGTH);
        assert_eq!(toks[0], CLS);
        assert_eq!(toks[13], SEP);
        assert_eq!(toks[26], SEP);
        assert_eq!(toks[premise_position(3)], "baker");
        assert_eq!(toks[hypothesis_position(1)], "no");
    }

    #[test]
    fn augmentation_masks_subphrases() {
        let e = example();
        let aug = augment(SignatureLibrary::golden(), &e);
        assert_eq!(aug.len(), 14);
        let adj = aug.iter().find(|a| a.node == Node::ObjectAdjective).unwrap();
        assert_eq!(adj.mask.iter().filter(|m| **m).count(), 2);
        assert_eq!(adj.tokens[premise_position(10)], EMPTY);
        assert_eq!(adj.tokens[premise_position(3)], PAD);
        let np = aug.iter().find(|a| a.node == Node::ObjectPhrase).unwrap();
        assert_eq!(NodeValue::Relation(np.relation), e.node(Node::ObjectPhrase));
        assert!(aug
            .iter()
            .all(|a| (SENTENCE_LABELS..TOTAL_LABELS).contains(&a.label_index())));
    }

    #[test]
    fn slots_round_trip() {
        let e = example();
        let s = slots(&e.premise);
        assert_eq!(s[3], "does not");
        assert_eq!(s[6], "not every");
        assert_eq!(from_slots(&s).unwrap(), e.premise);
    }

    #[test]
    fn vocabulary_covers_examples() {
        let vocab = Vocabulary::new(&Lexicon::english(4));
        let e = example();
        let ids = vocab.encode(&e.tokens()).unwrap();
        assert_eq!(ids[0], vocab.id(CLS).unwrap());
        assert_eq!(vocab.id(PAD).unwrap(), 0);
        assert!(vocab.id("unicorn").is_err());
    }
}
