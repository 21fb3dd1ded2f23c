//! Line-delimited JSON storage of examples.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{from_slots, slots, DatasetSplit, Example, Provenance};
use crate::error::{Error, Result};
use crate::natlog::{Label, Node, NodeValue, OperatorPair, Relation, SignatureLibrary};

/// How many evenly spaced examples are re-labeled when loading.
pub const DEFAULT_VERIFY_SAMPLE: usize = 1000;

/// Examples read from one file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    /// Examples in file order.
    pub examples: Vec<Example>,
    /// Provenance of the first record, if any.
    pub provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    premise: Vec<String>,
    hypothesis: Vec<String>,
    tokens: Vec<String>,
    label: String,
    nodes: BTreeMap<String, String>,
    provenance: Provenance,
}

impl Record {
    fn of(e: &Example, provenance: &Provenance) -> Self {
        Self {
            premise: slots(&e.premise).to_vec(),
            hypothesis: slots(&e.hypothesis).to_vec(),
            tokens: e.tokens().iter().map(|t| t.to_string()).collect(),
            label: e.label.name().to_string(),
            nodes: Node::intermediates()
                .iter()
                .zip(&e.nodes)
                .map(|(n, v)| (n.name().to_string(), v.to_string()))
                .collect(),
            provenance: provenance.clone(),
        }
    }

    fn into_example(self, line: usize) -> Result<(Example, Provenance)> {
        let bad = |message: String| Error::Dataset { line, message };
        let premise = from_slots(&self.premise).map_err(|e| bad(e.to_string()))?;
        let hypothesis = from_slots(&self.hypothesis).map_err(|e| bad(e.to_string()))?;
        let label: Label = self.label.parse().map_err(|e: Error| bad(e.to_string()))?;
        let mut nodes = Vec::with_capacity(14);
        for node in Node::intermediates() {
            let text = self
                .nodes
                .get(node.name())
                .ok_or_else(|| bad(format!("missing annotation for {node}")))?;
            let value = if node.is_operator() {
                text.parse::<OperatorPair>().map(NodeValue::Operator)
            } else {
                text.parse::<Relation>().map(NodeValue::Relation)
            };
            nodes.push(value.map_err(|e| bad(e.to_string()))?);
        }
        if self.nodes.len() != nodes.len() {
            return Err(bad("unexpected node annotations".into()));
        }
        let example = Example {
            premise,
            hypothesis,
            label,
            nodes,
        };
        if example.tokens() != self.tokens.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(bad("tokens do not match slots".into()));
        }
        Ok((example, self.provenance))
    }
}

/// Write one record per line.
pub fn save_jsonl(examples: &[Example], provenance: &Provenance, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in examples {
        let line = serde_json::to_string(&Record::of(e, provenance)).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read records and re-label up to `verify` evenly spaced examples; any
/// disagreement with the stored label or annotations is an error.
pub fn load_jsonl(path: &Path, lib: &SignatureLibrary, verify: usize) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut examples = Vec::new();
    let mut provenance = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: i + 1,
            message: e.to_string(),
        })?;
        let (example, prov) = record.into_example(i + 1)?;
        provenance.get_or_insert(prov);
        examples.push((i + 1, example));
    }
    let n = examples.len();
    let checks = verify.min(n);
    for k in 0..checks {
        let (line, e) = &examples[k * n / checks];
        if !e.is_consistent(lib) {
            return Err(Error::Dataset {
                line: *line,
                message: "annotation mismatch: stored label or node values differ from re-labeling".into(),
            });
        }
    }
    Ok(Dataset {
        examples: examples.into_iter().map(|(_, e)| e).collect(),
        provenance,
    })
}

/// Write `train.jsonl`, `dev.jsonl` and `test.jsonl` under `dir`.
pub fn save_split(split: &DatasetSplit, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        save_jsonl(part, &split.provenance, &dir.join(format!("{name}.jsonl")))?;
    }
    Ok(())
}

/// Inverse of [`save_split`].
pub fn load_split(dir: &Path, lib: &SignatureLibrary, verify: usize) -> Result<DatasetSplit> {
    let mut parts = Vec::new();
    let mut provenance = None;
    for name in ["train", "dev", "test"] {
        let d = load_jsonl(&dir.join(format!("{name}.jsonl")), lib, verify)?;
        if let (Some(a), Some(b)) = (&provenance, &d.provenance) {
            if a != b {
                return Err(Error::Dataset {
                    line: 0,
                    message: format!("{name}.jsonl has different provenance"),
                });
            }
        }
        if provenance.is_none() {
            provenance = d.provenance;
        }
        parts.push(d.examples);
    }
    let test = parts.pop().unwrap_or_default();
    let dev = parts.pop().unwrap_or_default();
    let train = parts.pop().unwrap_or_default();
    let provenance = provenance.ok_or_else(|| Error::Dataset {
        line: 0,
        message: "split is empty; provenance unknown".into(),
    })?;
    Ok(DatasetSplit {
        train,
        dev,
        test,
        provenance,
    })
}
