//! The composition tree that computes the relation between two aligned sentences.
//!
//! Leaves compare aligned words (relation nodes for nouns and verbs,
//! operator-pair nodes for quantifiers, negation and modifiers); inner nodes
//! apply the projectivity signature of their operator pair to the relations
//! of their arguments. The tree can be evaluated directly, with node values
//! overridden, or compiled into a [`CausalModel`].

use std::fmt;
use std::str::FromStr;

use crate::causal::{CausalModel, Equation, ModelBuilder, Range, Value};
use crate::error::{Error, Result};
use crate::natlog::relation::{Label, Relation};
use crate::natlog::sentence::{Lexicon, Sentence, WordClass, EMPTY};
use crate::natlog::signature::{ModifierPair, OperatorPair, Quantifier, SignatureLibrary};

/// A non-input node of the composition tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    /// Subject quantifier pair.
    SubjectQuantifier,
    /// Subject adjective pair.
    SubjectAdjective,
    /// Subject noun relation.
    SubjectNoun,
    /// Negation pair.
    Negation,
    /// Adverb pair.
    Adverb,
    /// Verb relation.
    Verb,
    /// Object quantifier pair.
    ObjectQuantifier,
    /// Object adjective pair.
    ObjectAdjective,
    /// Object noun relation.
    ObjectNoun,
    /// Subject noun phrase.
    SubjectPhrase,
    /// Verb phrase.
    VerbPhrase,
    /// Object noun phrase.
    ObjectPhrase,
    /// Object quantifier phrase.
    ObjectQuantifierPhrase,
    /// Negated verb phrase.
    NegationPhrase,
    /// The whole sentence pair.
    Root,
}

impl Node {
    /// Every node, children before parents.
    pub const ALL: [Node; 15] = [
        Node::SubjectQuantifier,
        Node::SubjectAdjective,
        Node::SubjectNoun,
        Node::Negation,
        Node::Adverb,
        Node::Verb,
        Node::ObjectQuantifier,
        Node::ObjectAdjective,
        Node::ObjectNoun,
        Node::SubjectPhrase,
        Node::VerbPhrase,
        Node::ObjectPhrase,
        Node::ObjectQuantifierPhrase,
        Node::NegationPhrase,
        Node::Root,
    ];

    /// The fourteen intermediate nodes analysed in sweeps.
    pub fn intermediates() -> &'static [Node] {
        &Self::ALL[..14]
    }

    /// Index in [`Self::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Short name, also the variable name in the compiled causal model.
    pub fn name(self) -> &'static str {
        match self {
            Node::SubjectQuantifier => "Q_Subj",
            Node::SubjectAdjective => "Adj_Subj",
            Node::SubjectNoun => "N_Subj",
            Node::Negation => "Neg",
            Node::Adverb => "Adv",
            Node::Verb => "V",
            Node::ObjectQuantifier => "Q_Obj",
            Node::ObjectAdjective => "Adj_Obj",
            Node::ObjectNoun => "N_Obj",
            Node::SubjectPhrase => "NP_Subj",
            Node::VerbPhrase => "VP",
            Node::ObjectPhrase => "NP_Obj",
            Node::ObjectQuantifierPhrase => "QP_Obj",
            Node::NegationPhrase => "NegP",
            Node::Root => "QP_Subj",
        }
    }

    /// Whether the node's value is an operator pair rather than a relation.
    pub fn is_operator(self) -> bool {
        matches!(
            self,
            Node::SubjectQuantifier
                | Node::SubjectAdjective
                | Node::Negation
                | Node::Adverb
                | Node::ObjectQuantifier
                | Node::ObjectAdjective
        )
    }

    /// Whether the node compares words directly.
    pub fn is_leaf(self) -> bool {
        self.index() < 9
    }

    /// Child nodes in argument order.
    pub fn children(self) -> &'static [Node] {
        match self {
            Node::SubjectPhrase => &[Node::SubjectAdjective, Node::SubjectNoun],
            Node::VerbPhrase => &[Node::Adverb, Node::Verb],
            Node::ObjectPhrase => &[Node::ObjectAdjective, Node::ObjectNoun],
            Node::ObjectQuantifierPhrase => &[Node::ObjectQuantifier, Node::ObjectPhrase, Node::VerbPhrase],
            Node::NegationPhrase => &[Node::Negation, Node::ObjectQuantifierPhrase],
            Node::Root => &[Node::SubjectQuantifier, Node::SubjectPhrase, Node::NegationPhrase],
            _ => &[],
        }
    }

    /// Sentence slots (token offsets within a 12-token sentence) the node reads, directly or through descendants.
    pub fn token_offsets(self) -> Vec<usize> {
        let own: &[usize] = match self {
            Node::SubjectQuantifier => &[0, 1],
            Node::SubjectAdjective => &[2],
            Node::SubjectNoun => &[3],
            Node::Negation => &[4, 5],
            Node::Adverb => &[6],
            Node::Verb => &[7],
            Node::ObjectQuantifier => &[8, 9],
            Node::ObjectAdjective => &[10],
            Node::ObjectNoun => &[11],
            _ => &[],
        };
        let mut out = own.to_vec();
        for c in self.children() {
            out.extend(c.token_offsets());
        }
        out.sort_unstable();
        out
    }

    /// Possible values, in canonical order.
    pub fn value_space(self) -> Vec<NodeValue> {
        use Relation::*;
        let rels = |rs: &[Relation]| rs.iter().map(|r| NodeValue::Relation(*r)).collect();
        match self {
            Node::SubjectQuantifier | Node::ObjectQuantifier => Quantifier::ALL
                .iter()
                .flat_map(|a| {
                    Quantifier::ALL
                        .iter()
                        .map(move |b| NodeValue::Operator(OperatorPair::Quantifiers(*a, *b)))
                })
                .collect(),
            Node::Negation => [true, false]
                .iter()
                .flat_map(|a| {
                    [true, false]
                        .iter()
                        .map(move |b| NodeValue::Operator(OperatorPair::Negations(*a, *b)))
                })
                .collect(),
            Node::SubjectAdjective | Node::Adverb | Node::ObjectAdjective => ModifierPair::ALL
                .iter()
                .map(|m| NodeValue::Operator(OperatorPair::Modifiers(*m)))
                .collect(),
            Node::SubjectNoun | Node::Verb | Node::ObjectNoun => rels(&[Independence, Equivalence]),
            Node::SubjectPhrase | Node::VerbPhrase | Node::ObjectPhrase => {
                rels(&[Independence, Equivalence, Forward, Reverse])
            }
            _ => rels(&Relation::ALL),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Node {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Node::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| Error::parse("node", format!("unknown node `{s}`")))
    }
}

/// Value of a node: an operator pair or a relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeValue {
    /// Operator pair (projection nodes).
    Operator(OperatorPair),
    /// Relation (all other nodes).
    Relation(Relation),
}

impl NodeValue {
    /// The relation this value stands for. Operator pairs are read as their
    /// signature applied to equivalent arguments.
    pub fn relation(self, lib: &SignatureLibrary) -> Relation {
        match self {
            NodeValue::Relation(r) => r,
            NodeValue::Operator(p) => lib.get(p).on_equivalents().unwrap_or(Relation::Independence),
        }
    }

    fn to_value(self) -> Value {
        match self {
            NodeValue::Operator(p) => Value::sym(&p.to_string()),
            NodeValue::Relation(r) => Value::sym(r.symbol()),
        }
    }

    fn from_value(node: Node, v: &Value) -> NodeValue {
        let s = v.as_sym().expect("symbolic node value");
        if node.is_operator() {
            NodeValue::Operator(s.parse().expect("operator pair symbol"))
        } else {
            NodeValue::Relation(s.parse().expect("relation symbol"))
        }
    }
}

impl fmt::Display for NodeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeValue::Operator(p) => write!(f, "{p}"),
            NodeValue::Relation(r) => write!(f, "{r}"),
        }
    }
}

/// Values of every node for one sentence pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Derivation {
    values: [NodeValue; 15],
}

impl Derivation {
    /// Value of `node`.
    pub fn get(&self, node: Node) -> NodeValue {
        self.values[node.index()]
    }

    /// Relation at the root.
    pub fn root(&self) -> Relation {
        match self.get(Node::Root) {
            NodeValue::Relation(r) => r,
            NodeValue::Operator(_) => unreachable!("root holds a relation"),
        }
    }

    /// Three-way label.
    pub fn label(&self) -> Label {
        self.root().label()
    }
}

fn leaf_value(node: Node, premise: &Sentence, hypothesis: &Sentence) -> NodeValue {
    let same = |a: &str, b: &str| {
        NodeValue::Relation(if a == b {
            Relation::Equivalence
        } else {
            Relation::Independence
        })
    };
    let modifier = |a: &Option<String>, b: &Option<String>| {
        NodeValue::Operator(OperatorPair::Modifiers(ModifierPair::of(a.as_deref(), b.as_deref())))
    };
    match node {
        Node::SubjectQuantifier => NodeValue::Operator(OperatorPair::Quantifiers(
            premise.subject_quantifier,
            hypothesis.subject_quantifier,
        )),
        Node::ObjectQuantifier => NodeValue::Operator(OperatorPair::Quantifiers(
            premise.object_quantifier,
            hypothesis.object_quantifier,
        )),
        Node::Negation => NodeValue::Operator(OperatorPair::Negations(premise.negated, hypothesis.negated)),
        Node::SubjectAdjective => modifier(&premise.subject_adjective, &hypothesis.subject_adjective),
        Node::ObjectAdjective => modifier(&premise.object_adjective, &hypothesis.object_adjective),
        Node::Adverb => modifier(&premise.adverb, &hypothesis.adverb),
        Node::SubjectNoun => same(&premise.subject_noun, &hypothesis.subject_noun),
        Node::ObjectNoun => same(&premise.object_noun, &hypothesis.object_noun),
        Node::Verb => same(&premise.verb, &hypothesis.verb),
        _ => unreachable!("not a leaf"),
    }
}

pub(crate) fn compose(lib: &SignatureLibrary, values: &[NodeValue]) -> NodeValue {
    let NodeValue::Operator(op) = values[0] else {
        unreachable!("first argument of a composition is an operator pair")
    };
    let args: Vec<Relation> = values[1..]
        .iter()
        .map(|v| match v {
            NodeValue::Relation(r) => *r,
            NodeValue::Operator(_) => unreachable!("arguments are relations"),
        })
        .collect();
    NodeValue::Relation(lib.apply(op, &args).unwrap_or(Relation::Independence))
}

/// Compute every node for a sentence pair.
pub fn derive(lib: &SignatureLibrary, premise: &Sentence, hypothesis: &Sentence) -> Derivation {
    derive_with(lib, premise, hypothesis, &[]).expect("no overrides")
}

/// Compute every node, replacing the values of the listed nodes.
///
/// Overridden values must have the node's kind (operator pair or relation).
pub fn derive_with(
    lib: &SignatureLibrary,
    premise: &Sentence,
    hypothesis: &Sentence,
    overrides: &[(Node, NodeValue)],
) -> Result<Derivation> {
    for (node, value) in overrides {
        if node.is_operator() != matches!(value, NodeValue::Operator(_)) {
            return Err(Error::OutOfRange {
                variable: node.name().to_string(),
                value: value.to_string(),
            });
        }
    }
    let mut values = [NodeValue::Relation(Relation::Independence); 15];
    for node in Node::ALL {
        let v = if let Some((_, v)) = overrides.iter().find(|(n, _)| *n == node) {
            *v
        } else if node.is_leaf() {
            leaf_value(node, premise, hypothesis)
        } else {
            let args: Vec<NodeValue> = node.children().iter().map(|c| values[c.index()]).collect();
            compose(lib, &args)
        };
        values[node.index()] = v;
    }
    Ok(Derivation { values })
}

/// Label of `base` with `node` set to its value on `source`.
pub fn interchange_label(
    lib: &SignatureLibrary,
    base: (&Sentence, &Sentence),
    source: (&Sentence, &Sentence),
    node: Node,
) -> Label {
    let donor = derive(lib, source.0, source.1).get(node);
    derive_with(lib, base.0, base.1, &[(node, donor)])
        .expect("value comes from the same node")
        .label()
}

/// Input variables of the compiled model: `(name, class)`, with `None` for
/// quantifier and negation slots.
fn input_slots() -> Vec<(String, Option<WordClass>, Node)> {
    let mut out = Vec::new();
    for side in ["P", "H"] {
        for (node, class) in [
            (Node::SubjectQuantifier, None),
            (Node::SubjectAdjective, Some(WordClass::SubjectAdjective)),
            (Node::SubjectNoun, Some(WordClass::SubjectNoun)),
            (Node::Negation, None),
            (Node::Adverb, Some(WordClass::Adverb)),
            (Node::Verb, Some(WordClass::Verb)),
            (Node::ObjectQuantifier, None),
            (Node::ObjectAdjective, Some(WordClass::ObjectAdjective)),
            (Node::ObjectNoun, Some(WordClass::ObjectNoun)),
        ] {
            out.push((format!("{}.{side}", node.name()), class, node));
        }
    }
    out
}

/// Compile the tree into a causal model with 18 word inputs and 15 node variables.
pub fn causal_model(lex: &Lexicon, lib: &SignatureLibrary) -> Result<CausalModel> {
    lex.validate()?;
    let mut b = ModelBuilder::new();
    for (name, class, node) in input_slots() {
        let range = match (class, node) {
            (None, Node::Negation) => Range::symbols(&["not", EMPTY]),
            (None, _) => Range::symbols(&Quantifier::ALL.map(|q| q.word())),
            (Some(c), _) => {
                let mut ws: Vec<&str> = lex.words(c).iter().map(String::as_str).collect();
                if c.optional() {
                    ws.push(EMPTY);
                }
                Range::symbols(&ws)
            }
        };
        let default = range.nth(0);
        b = b.input(&name, range, default);
    }
    for node in Node::ALL {
        let range = Range::Values(node.value_space().into_iter().map(NodeValue::to_value).collect());
        if node.is_leaf() {
            let p = format!("{}.P", node.name());
            let h = format!("{}.H", node.name());
            let eq = Equation::new(&format!("leaf:{}", node.name()), move |args| {
                let a = args[0].as_sym().expect("word");
                let b = args[1].as_sym().expect("word");
                fn word(w: &str) -> Option<&str> {
                    (w != EMPTY).then_some(w)
                }
                let v = match node {
                    Node::SubjectQuantifier | Node::ObjectQuantifier => NodeValue::Operator(OperatorPair::Quantifiers(
                        a.parse().expect("quantifier"),
                        b.parse().expect("quantifier"),
                    )),
                    Node::Negation => NodeValue::Operator(OperatorPair::Negations(a == "not", b == "not")),
                    Node::SubjectAdjective | Node::ObjectAdjective | Node::Adverb => {
                        NodeValue::Operator(OperatorPair::Modifiers(ModifierPair::of(word(a), word(b))))
                    }
                    _ => NodeValue::Relation(if a == b {
                        Relation::Equivalence
                    } else {
                        Relation::Independence
                    }),
                };
                v.to_value()
            });
            b = b.var(node.name(), range, &[&p, &h], eq);
        } else {
            let children = node.children();
            let lib = lib.clone();
            let eq = Equation::new(&format!("compose:{}", node.name()), move |args| {
                let vals: Vec<NodeValue> = children
                    .iter()
                    .zip(args)
                    .map(|(c, v)| NodeValue::from_value(*c, v))
                    .collect();
                compose(&lib, &vals).to_value()
            });
            let names: Vec<&str> = children.iter().map(|c| c.name()).collect();
            b = b.var(node.name(), range, &names, eq);
        }
    }
    b.build()
}

/// Intervention on the 18 word inputs of [`causal_model`] for a sentence pair.
pub fn input_intervention(
    model: &CausalModel,
    premise: &Sentence,
    hypothesis: &Sentence,
) -> Result<crate::causal::Intervention> {
    let mut pairs = Vec::new();
    for (sentence, side) in [(premise, "P"), (hypothesis, "H")] {
        let q = |q: Quantifier| Value::sym(q.word());
        let w = |w: &Option<String>| Value::sym(w.as_deref().unwrap_or(EMPTY));
        let vals = [
            q(sentence.subject_quantifier),
            w(&sentence.subject_adjective),
            Value::sym(&sentence.subject_noun),
            Value::sym(if sentence.negated { "not" } else { EMPTY }),
            w(&sentence.adverb),
            Value::sym(&sentence.verb),
            q(sentence.object_quantifier),
            w(&sentence.object_adjective),
            Value::sym(&sentence.object_noun),
        ];
        for (node, v) in Node::ALL[..9].iter().zip(vals) {
            pairs.push((format!("{}.{side}", node.name()), v));
        }
    }
    let refs: Vec<(&str, Value)> = pairs.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
    crate::causal::Intervention::from_names(model, &refs)
}

/// Names of the inputs of [`causal_model`].
pub fn input_names() -> Vec<String> {
    input_slots().into_iter().map(|(n, _, _)| n).collect()
}

/// The compiled model marginalized onto the inputs, `node` and the root.
pub fn submodel(full: &CausalModel, node: Node) -> Result<CausalModel> {
    if node == Node::Root {
        return Err(Error::InvalidModel(
            "the root is the output, not an intermediate node".into(),
        ));
    }
    let names = input_names();
    let mut keep: Vec<&str> = names.iter().map(String::as_str).collect();
    keep.push(node.name());
    keep.push(Node::Root.name());
    full.marginalize(&keep)
}

/// Read a node value back from an evaluated compiled model.
pub fn node_value(model: &CausalModel, setting: &crate::causal::Setting, node: Node) -> Result<NodeValue> {
    Ok(NodeValue::from_value(node, setting.get(model.var(node.name())?)))
}

/// Encode a node value as a compiled-model value.
pub fn encode_value(value: NodeValue) -> Value {
    value.to_value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(q: Quantifier, noun: &str, negated: bool, qo: Quantifier, adj: Option<&str>, obj: &str) -> Sentence {
        Sentence {
            subject_quantifier: q,
            subject_adjective: None,
            subject_noun: noun.into(),
            negated,
            adverb: None,
            verb: "see".into(),
            object_quantifier: qo,
            object_adjective: adj.map(Into::into),
            object_noun: obj.into(),
        }
    }

    #[test]
    fn identical_sentences_are_equivalent() {
        let lib = SignatureLibrary::golden();
        let s = sentence(Quantifier::Some, "baker", true, Quantifier::No, Some("happy"), "person");
        assert_eq!(derive(lib, &s, &s).root(), Relation::Equivalence);
    }

    #[test]
    fn some_versus_no_contradicts() {
        let lib = SignatureLibrary::golden();
        let p = sentence(
            Quantifier::Every,
            "baker",
            false,
            Quantifier::Some,
            Some("happy"),
            "baker",
        );
        let h = sentence(Quantifier::Every, "baker", false, Quantifier::No, None, "baker");
        let d = derive(lib, &p, &h);
        assert_eq!(
            d.get(Node::ObjectQuantifierPhrase),
            NodeValue::Relation(Relation::Alternation)
        );
        assert_eq!(d.label(), Label::Contradiction);
    }

    #[test]
    fn override_kind_is_checked() {
        let lib = SignatureLibrary::golden();
        let s = sentence(Quantifier::Some, "baker", false, Quantifier::Some, None, "baker");
        let err = derive_with(lib, &s, &s, &[(Node::Negation, NodeValue::Relation(Relation::Forward))]);
        assert!(err.is_err());
    }

    #[test]
    fn compiled_model_size() {
        let m = causal_model(&Lexicon::english(3), SignatureLibrary::golden()).unwrap();
        assert_eq!(m.len(), 33);
        assert_eq!(submodel(&m, Node::ObjectPhrase).unwrap().len(), 20);
    }

    #[test]
    fn token_offsets_cover_descendants() {
        assert_eq!(Node::ObjectPhrase.token_offsets(), vec![10, 11]);
        assert_eq!(Node::Root.token_offsets(), (0..12).collect::<Vec<_>>());
    }
}
