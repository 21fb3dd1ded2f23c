//! Natural-logic inference over aligned sentence pairs.

pub mod relation;
pub mod sampling;
pub mod sentence;
pub mod signature;
pub mod tree;

pub use relation::{Label, Relation};
pub use sentence::{rel_lexical, Lexicon, Sentence, WordClass};
pub use signature::{ModifierPair, OperatorPair, Quantifier, SignatureLibrary};
pub use tree::{derive, derive_with, interchange_label, Derivation, Node, NodeValue};
