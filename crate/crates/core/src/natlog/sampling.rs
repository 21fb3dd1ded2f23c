//! Sentence-level truth evaluation in random finite models.
//!
//! Nouns and adjectives denote subsets of a small universe, verbs and adverbs
//! subsets of its square; modifiers intersect. Models in which a subject or
//! object noun phrase is empty are rejected, matching the non-empty
//! restrictor convention of the signature tables. The relation computed by
//! the composition tree must permit every truth-value combination realized
//! by the pair in an accepted model.

use rand::Rng;

use crate::natlog::relation::{combo, Relation};
use crate::natlog::sentence::Sentence;

/// Outcome of sampling models for one pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingReport {
    /// Accepted models.
    pub accepted: usize,
    /// Rejected models (an empty noun phrase).
    pub rejected: usize,
    /// Truth-value combinations realized across accepted models.
    pub realized: u8,
}

impl SamplingReport {
    /// Whether every realized combination is permitted by `relation`.
    pub fn consistent_with(&self, relation: Relation) -> bool {
        self.realized & !relation.permitted() == 0
    }
}

/// A sentence with its words replaced by slots in the sampled denotations.
struct Compiled {
    subject: (Option<usize>, usize),
    object: (Option<usize>, usize),
    predicate: (Option<usize>, usize),
    sentence: Sentence,
}

fn slot<'a>(words: &mut Vec<&'a str>, w: &'a str) -> usize {
    match words.iter().position(|x| *x == w) {
        Some(i) => i,
        None => {
            words.push(w);
            words.len() - 1
        }
    }
}

fn phrase(denotations: &[u64], (modifier, head): (Option<usize>, usize)) -> u64 {
    modifier.map_or(denotations[head], |m| denotations[head] & denotations[m])
}

impl Compiled {
    fn truth(&self, universe: usize, sets: &[u64], pairs: &[u64]) -> Option<bool> {
        let subject = phrase(sets, self.subject) as u32;
        let object = phrase(sets, self.object) as u32;
        if subject == 0 || object == 0 {
            return None;
        }
        let vp = phrase(pairs, self.predicate);
        let s = &self.sentence;
        let mut scope = 0u32;
        for x in 0..universe {
            let row = ((vp >> (x * universe)) & ((1u64 << universe) - 1)) as u32;
            if s.object_quantifier.holds(object, row) != s.negated {
                scope |= 1 << x;
            }
        }
        Some(s.subject_quantifier.holds(subject, scope))
    }
}

/// Sample models over a universe of `universe` elements until `accepted`
/// are accepted (or `max_tries` drawn) and record realized combinations.
pub fn sample_pair<R: Rng + ?Sized>(
    premise: &Sentence,
    hypothesis: &Sentence,
    universe: usize,
    accepted: usize,
    max_tries: usize,
    rng: &mut R,
) -> SamplingReport {
    assert!((1..=5).contains(&universe), "universe size 1..=5");
    let mut set_words: Vec<&str> = Vec::new();
    let mut pair_words: Vec<&str> = Vec::new();
    fn compile<'a>(s: &'a Sentence, set_words: &mut Vec<&'a str>, pair_words: &mut Vec<&'a str>) -> Compiled {
        let subject_adj = s.subject_adjective.as_deref().map(|w| slot(set_words, w));
        let subject = (subject_adj, slot(set_words, &s.subject_noun));
        let object_adj = s.object_adjective.as_deref().map(|w| slot(set_words, w));
        let object = (object_adj, slot(set_words, &s.object_noun));
        let adverb = s.adverb.as_deref().map(|w| slot(pair_words, w));
        let predicate = (adverb, slot(pair_words, &s.verb));
        Compiled {
            subject,
            object,
            predicate,
            sentence: s.clone(),
        }
    }
    let p = compile(premise, &mut set_words, &mut pair_words);
    let h = compile(hypothesis, &mut set_words, &mut pair_words);
    let set_mask = (1u64 << universe) - 1;
    let pair_mask = if universe * universe == 64 {
        u64::MAX
    } else {
        (1u64 << (universe * universe)) - 1
    };
    let mut sets = vec![0u64; set_words.len()];
    let mut pairs = vec![0u64; pair_words.len()];
    let mut report = SamplingReport {
        accepted: 0,
        rejected: 0,
        realized: 0,
    };
    for _ in 0..max_tries {
        if report.accepted >= accepted {
            break;
        }
        sets.iter_mut().for_each(|d| *d = rng.random::<u64>() & set_mask);
        pairs.iter_mut().for_each(|d| *d = rng.random::<u64>() & pair_mask);
        match (p.truth(universe, &sets, &pairs), h.truth(universe, &sets, &pairs)) {
            (Some(a), Some(b)) => {
                report.accepted += 1;
                report.realized |= combo::of(a, b);
            }
            _ => report.rejected += 1,
        }
    }
    report
}
