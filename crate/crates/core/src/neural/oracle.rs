//! A hand-built sparse token-grid network that computes the natural-logic
//! tree exactly.
//!
//! Every tree level uses two rows. The first holds conjunction units, one per
//! combination of child values (or per word pattern at the leaves); the second
//! holds the node's value as a one-hot vector at the node's home position.
//! Values needed further up are copied unchanged through the rows in between.
//! The root conjunctions feed a one-hot label at position 0 of the last row.

use std::collections::HashMap;

use ndarray::{Array1, Array2};

use super::grid::{Csr, GridLayer, GridLocation, Mixing, TokenGridNetwork};
use crate::error::{Error, Result};
use crate::mqnli::{hypothesis_position, premise_position, Example, Vocabulary, SENTENCE_LABELS, SEQUENCE_LENGTH};
use crate::natlog::sentence::EMPTY;
use crate::natlog::signature::{ModifierPair, OperatorPair, Quantifier};
use crate::natlog::tree::compose;
use crate::natlog::{Lexicon, Node, NodeValue, Relation, SignatureLibrary, WordClass};

const ROWS: usize = 11;

fn level(node: Node) -> usize {
    match node {
        Node::SubjectPhrase | Node::VerbPhrase | Node::ObjectPhrase => 2,
        Node::ObjectQuantifierPhrase => 3,
        Node::NegationPhrase => 4,
        Node::Root => 5,
        _ => 1,
    }
}

fn parent(node: Node) -> Option<Node> {
    Node::ALL.into_iter().find(|p| p.children().contains(&node))
}

/// Position holding a node's units: the premise position of a leaf's first
/// token, the home of the first child for phrases, 0 for the root.
fn home(node: Node) -> usize {
    match node {
        Node::Root => 0,
        n if n.is_leaf() => premise_position(n.token_offsets()[0]),
        n => home(n.children()[0]),
    }
}

fn word_class(node: Node) -> Option<WordClass> {
    Some(match node {
        Node::SubjectAdjective => WordClass::SubjectAdjective,
        Node::SubjectNoun => WordClass::SubjectNoun,
        Node::Adverb => WordClass::Adverb,
        Node::Verb => WordClass::Verb,
        Node::ObjectAdjective => WordClass::ObjectAdjective,
        Node::ObjectNoun => WordClass::ObjectNoun,
        _ => return None,
    })
}

/// A ReLU unit over cells `(position, unit)` of the previous row.
struct Unit {
    terms: Vec<(usize, usize, f64)>,
    bias: f64,
}

impl Unit {
    /// Fires (value 1) exactly when every positive cell is 1 and no negative cell is.
    fn and(positive: &[(usize, usize)], negative: &[(usize, usize)]) -> Self {
        let mut terms: Vec<(usize, usize, f64)> = positive.iter().map(|(p, u)| (*p, *u, 1.0)).collect();
        terms.extend(negative.iter().map(|(p, u)| (*p, *u, -1.0)));
        Unit {
            terms,
            bias: -(positive.len() as f64 - 1.0),
        }
    }

    fn sum(cells: &[(usize, usize)]) -> Self {
        Unit {
            terms: cells.iter().map(|(p, u)| (*p, *u, 1.0)).collect(),
            bias: 0.0,
        }
    }
}

#[derive(Default)]
struct Layout {
    /// `(row, position)` → owning node and its units in order.
    groups: HashMap<(usize, usize), (Node, Vec<Unit>)>,
}

impl Layout {
    fn place(&mut self, row: usize, position: usize, owner: Node, unit: usize, spec: Unit) -> Result<()> {
        let entry = self
            .groups
            .entry((row, position))
            .or_insert_with(|| (owner, Vec::new()));
        if entry.0 != owner {
            return Err(Error::Config(format!(
                "oracle layout: {} and {owner} both use row {row} position {position}",
                entry.0
            )));
        }
        if entry.1.len() <= unit {
            entry.1.resize_with(unit + 1, || Unit {
                terms: Vec::new(),
                bias: 0.0,
            });
        }
        entry.1[unit] = spec;
        Ok(())
    }

    fn push(&mut self, row: usize, position: usize, owner: Node, spec: Unit) -> Result<usize> {
        let unit = self.groups.get(&(row, position)).map_or(0, |g| g.1.len());
        self.place(row, position, owner, unit, spec)?;
        Ok(unit)
    }
}

/// The oracle network with the cell layout of its node values.
#[derive(Clone, Debug)]
pub struct OracleNetwork {
    /// The sparse network.
    pub net: TokenGridNetwork,
    /// Token ids it expects.
    pub vocabulary: Vocabulary,
    values: HashMap<Node, Vec<NodeValue>>,
}

impl OracleNetwork {
    /// Build the network for a lexicon and signature library.
    pub fn build(lex: &Lexicon, lib: &SignatureLibrary) -> Result<Self> {
        lex.validate()?;
        let vocabulary = Vocabulary::new(lex);
        let tok = |w: &str| vocabulary.id(w);
        let mut layout = Layout::default();
        let values: HashMap<Node, Vec<NodeValue>> = Node::ALL.into_iter().map(|n| (n, n.value_space())).collect();
        let slot = |node: Node, v: NodeValue| -> Result<usize> {
            values[&node]
                .iter()
                .position(|x| *x == v)
                .ok_or_else(|| Error::Config(format!("oracle: value {v} outside the value space of {node}")))
        };
        let mut reachable: HashMap<Node, Vec<NodeValue>> = HashMap::new();

        for node in Node::ALL.into_iter().filter(|n| n.is_leaf()) {
            let mut conj: Vec<(NodeValue, Unit)> = Vec::new();
            let offsets = node.token_offsets();
            let p = |o: usize, w: &str| -> Result<(usize, usize)> { Ok((premise_position(o), tok(w)?)) };
            let h = |o: usize, w: &str| -> Result<(usize, usize)> { Ok((hypothesis_position(o), tok(w)?)) };
            match node {
                Node::SubjectQuantifier | Node::ObjectQuantifier => {
                    let o = offsets[0];
                    let cells = |side: &dyn Fn(usize, &str) -> Result<(usize, usize)>,
                                 q: Quantifier|
                     -> Result<Vec<(usize, usize)>> {
                        Ok(match q {
                            Quantifier::Every => vec![side(o, EMPTY)?, side(o + 1, "every")?],
                            Quantifier::NotEvery => vec![side(o, "not")?],
                            other => vec![side(o + 1, other.word())?],
                        })
                    };
                    for a in Quantifier::ALL {
                        for b in Quantifier::ALL {
                            let mut pos = cells(&p, a)?;
                            pos.extend(cells(&h, b)?);
                            conj.push((
                                NodeValue::Operator(OperatorPair::Quantifiers(a, b)),
                                Unit::and(&pos, &[]),
                            ));
                        }
                    }
                }
                Node::Negation => {
                    let o = offsets[1];
                    let word = |neg: bool| if neg { "not" } else { EMPTY };
                    for a in [true, false] {
                        for b in [true, false] {
                            let unit = Unit::and(&[p(o, word(a))?, h(o, word(b))?], &[]);
                            conj.push((NodeValue::Operator(OperatorPair::Negations(a, b)), unit));
                        }
                    }
                }
                _ => {
                    let o = offsets[0];
                    let class = word_class(node).expect("word slot");
                    let words = lex.words(class);
                    if class.optional() {
                        let modifier = |m| NodeValue::Operator(OperatorPair::Modifiers(m));
                        for w in words {
                            conj.push((modifier(ModifierPair::Same), Unit::and(&[p(o, w)?, h(o, w)?], &[])));
                            conj.push((
                                modifier(ModifierPair::Different),
                                Unit::and(&[p(o, w)?], &[h(o, EMPTY)?, h(o, w)?]),
                            ));
                        }
                        conj.push((
                            modifier(ModifierPair::PremiseOnly),
                            Unit::and(&[h(o, EMPTY)?], &[p(o, EMPTY)?]),
                        ));
                        conj.push((
                            modifier(ModifierPair::HypothesisOnly),
                            Unit::and(&[p(o, EMPTY)?], &[h(o, EMPTY)?]),
                        ));
                        conj.push((
                            modifier(ModifierPair::Neither),
                            Unit::and(&[p(o, EMPTY)?, h(o, EMPTY)?], &[]),
                        ));
                    } else {
                        for w in words {
                            conj.push((
                                NodeValue::Relation(Relation::Equivalence),
                                Unit::and(&[p(o, w)?, h(o, w)?], &[]),
                            ));
                            conj.push((
                                NodeValue::Relation(Relation::Independence),
                                Unit::and(&[p(o, w)?], &[h(o, w)?]),
                            ));
                        }
                    }
                }
            }
            emit(&mut layout, node, conj, &slot, &mut reachable)?;
        }

        let mut upper: Vec<Node> = Node::ALL.into_iter().filter(|n| !n.is_leaf()).collect();
        upper.sort_by_key(|n| level(*n));
        for node in upper {
            let children = node.children();
            let and_row = 2 * level(node) - 1;
            for c in children {
                if level(*c) >= level(node) {
                    return Err(Error::Config(format!("oracle: {c} is not below {node}")));
                }
            }
            let mut combos: Vec<Vec<NodeValue>> = vec![Vec::new()];
            for c in children {
                combos = combos
                    .into_iter()
                    .flat_map(|prefix| {
                        reachable[c].iter().map(move |v| {
                            let mut next = prefix.clone();
                            next.push(*v);
                            next
                        })
                    })
                    .collect();
            }
            let mut conj = Vec::with_capacity(combos.len());
            for combo in combos {
                let cells: Vec<(usize, usize)> = children
                    .iter()
                    .zip(&combo)
                    .map(|(c, v)| Ok((home(*c), slot(*c, *v)?)))
                    .collect::<Result<_>>()?;
                conj.push((compose(lib, &combo), Unit::and(&cells, &[])));
            }
            if node == Node::Root {
                let mut by_label: Vec<Vec<(usize, usize)>> = vec![Vec::new(); SENTENCE_LABELS];
                for (value, unit) in conj {
                    let j = layout.push(and_row, home(node), node, unit)?;
                    by_label[value.relation(lib).label().index()].push((home(node), j));
                }
                for (k, cells) in by_label.iter().enumerate() {
                    layout.place(and_row + 1, 0, node, k, Unit::sum(cells))?;
                }
            } else {
                emit(&mut layout, node, conj, &slot, &mut reachable)?;
            }
        }

        for node in Node::intermediates() {
            let up = parent(*node).expect("intermediate nodes have parents");
            for row in 2 * level(*node) + 1..=2 * level(up) - 2 {
                for v in &reachable[node] {
                    let u = slot(*node, *v)?;
                    layout.place(row, home(*node), *node, u, Unit::sum(&[(home(*node), u)]))?;
                }
            }
        }

        let width = layout
            .groups
            .values()
            .map(|g| g.1.len())
            .max()
            .unwrap_or(0)
            .max(vocabulary.len());
        let m = SEQUENCE_LENGTH;
        let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); ROWS - 1];
        let mut biases: Vec<Array2<f64>> = vec![Array2::zeros((m, width)); ROWS - 1];
        for ((row, position), (_, units)) in &layout.groups {
            for (u, spec) in units.iter().enumerate() {
                let target = position * width + u;
                triplets[row - 1].extend(spec.terms.iter().map(|(p, q, w)| (target, p * width + q, *w)));
                biases[row - 1][[*position, u]] = spec.bias;
            }
        }
        let layers = triplets
            .into_iter()
            .zip(biases)
            .map(|(t, bias)| GridLayer {
                mixing: Mixing::Sparse(Csr::from_triplets(m * width, m * width, t)),
                bias,
            })
            .collect();
        let mut embedding = Array2::zeros((vocabulary.len(), width));
        for t in 0..vocabulary.len() {
            embedding[[t, t]] = 1.0;
        }
        let mut head_weight = Array2::zeros((SENTENCE_LABELS, width));
        for k in 0..SENTENCE_LABELS {
            head_weight[[k, k]] = 1.0;
        }
        let net = TokenGridNetwork {
            embedding,
            layers,
            head_weight,
            head_bias: Array2::zeros((1, SENTENCE_LABELS)),
            residual: false,
            positions: m,
        };
        Ok(Self {
            net,
            vocabulary,
            values,
        })
    }

    /// Cell holding the value of an intermediate node; nothing else is stored there.
    pub fn location(&self, node: Node) -> Result<GridLocation> {
        if node == Node::Root {
            return Err(Error::Config("the root has no stored value".into()));
        }
        Ok(GridLocation::new(2 * level(node), &[home(node)]))
    }

    /// Token ids of an example.
    pub fn encode(&self, example: &Example) -> Result<Vec<usize>> {
        self.vocabulary.encode(&example.tokens())
    }

    /// Decode a node's value from a forward grid, if exactly one of its units is on.
    pub fn read_value(&self, node: Node, grid: &[Array2<f64>]) -> Option<NodeValue> {
        let loc = self.location(node).ok()?;
        let cells: Array1<f64> = grid[loc.layer]
            .row(loc.positions[0])
            .slice(ndarray::s![0..self.values[&node].len()])
            .to_owned();
        let on: Vec<usize> = cells
            .iter()
            .enumerate()
            .filter(|(_, x)| (**x - 1.0).abs() < 1e-9)
            .map(|(i, _)| i)
            .collect();
        let off = cells.iter().filter(|x| x.abs() < 1e-9).count();
        (on.len() == 1 && off + 1 == cells.len()).then(|| self.values[&node][on[0]])
    }
}

/// Place a node's conjunction units and the one-hot value row above them.
fn emit(
    layout: &mut Layout,
    node: Node,
    conj: Vec<(NodeValue, Unit)>,
    slot: &dyn Fn(Node, NodeValue) -> Result<usize>,
    reachable: &mut HashMap<Node, Vec<NodeValue>>,
) -> Result<()> {
    let and_row = 2 * level(node) - 1;
    let mut by_value: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for (value, unit) in conj {
        let j = layout.push(and_row, home(node), node, unit)?;
        by_value.entry(slot(node, value)?).or_default().push((home(node), j));
    }
    let mut hit: Vec<usize> = by_value.keys().copied().collect();
    hit.sort_unstable();
    for u in &hit {
        layout.place(and_row + 1, home(node), node, *u, Unit::sum(&by_value[u]))?;
    }
    let space = node.value_space();
    reachable.insert(node, hit.into_iter().map(|u| space[u]).collect());
    Ok(())
}
