//! Text checkpoints of trainable networks and their optimizer state.
//!
//! Floats are written in Rust's shortest round-trip form, so loading
//! reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::grid::{GridLayer, Mixing, TokenGridNetwork};
use super::train::TrainState;
use crate::error::{Error, Result};

const HEADER: &str = "token-grid-checkpoint v1";

fn write_tensor(out: &mut String, kind: &str, name: &str, t: &Array2<f64>) {
    let _ = writeln!(out, "{kind} {name} {} {}", t.nrows(), t.ncols());
    for row in t.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
}

/// Serialize a training state with free-form metadata.
pub fn to_text(state: &TrainState, meta: &BTreeMap<String, String>) -> Result<String> {
    if !state.net.is_trainable() {
        return Err(Error::Config("only factored networks can be checkpointed".into()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    for (k, v) in meta {
        if k.contains(char::is_whitespace) || v.contains('\n') {
            return Err(Error::Config(format!("bad metadata entry `{k}`")));
        }
        let _ = writeln!(out, "meta {k} {v}");
    }
    let net = &state.net;
    let _ = writeln!(out, "positions {}", net.positions);
    let _ = writeln!(out, "layers {}", net.layers.len());
    let _ = writeln!(out, "residual {}", net.residual);
    let _ = writeln!(out, "step {}", state.step);
    let _ = writeln!(out, "seed {}", state.seed);
    let _ = writeln!(out, "train_accuracy {:?}", state.train_accuracy);
    let _ = writeln!(out, "dev_accuracy {:?}", state.dev_accuracy);
    let losses: Vec<String> = state.loss_history.iter().map(|x| format!("{x:?}")).collect();
    let _ = writeln!(out, "loss_history {} {}", losses.len(), losses.join(" "));
    for ((name, t), v) in net.tensors().into_iter().zip(&state.velocity) {
        write_tensor(&mut out, "tensor", &name, t);
        write_tensor(&mut out, "velocity", &name, v);
    }
    Ok(out)
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Reader<'a> {
    fn err(line: usize, msg: impl Into<String>) -> Error {
        Error::parse("checkpoint", format!("line {}: {}", line + 1, msg.into()))
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .ok_or_else(|| Error::parse("checkpoint", "unexpected end of file"))
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (i, line) = self.next()?;
        let rest = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' ').or(if r.is_empty() { Some("") } else { None }))
            .ok_or_else(|| Self::err(i, format!("expected `{key}`")))?;
        Ok((i, rest))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (i, rest) = self.field(key)?;
        rest.trim()
            .parse()
            .map_err(|_| Self::err(i, format!("bad value for `{key}`")))
    }

    fn tensor(&mut self, kind: &str, name: &str) -> Result<Array2<f64>> {
        let (i, rest) = self.field(kind)?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        let [found, r, c] = parts[..] else {
            return Err(Self::err(i, "bad tensor header"));
        };
        if found != name {
            return Err(Self::err(i, format!("expected tensor `{name}`, found `{found}`")));
        }
        let rows: usize = r.parse().map_err(|_| Self::err(i, "bad row count"))?;
        let cols: usize = c.parse().map_err(|_| Self::err(i, "bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (j, line) = self.next()?;
            let before = data.len();
            for cell in line.split_whitespace() {
                data.push(
                    cell.parse::<f64>()
                        .map_err(|_| Self::err(j, format!("bad number `{cell}`")))?,
                );
            }
            if data.len() - before != cols {
                return Err(Self::err(j, "wrong number of columns"));
            }
        }
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::parse("checkpoint", e.to_string()))
    }
}

/// Parse [`to_text`] output.
pub fn from_text(text: &str) -> Result<(TrainState, BTreeMap<String, String>)> {
    let mut r = Reader {
        lines: text.lines().enumerate().peekable(),
    };
    let (i, header) = r.next()?;
    if header != HEADER {
        return Err(Reader::err(i, format!("expected `{HEADER}`")));
    }
    let mut meta = BTreeMap::new();
    while let Some((_, line)) = r.lines.peek() {
        let Some(rest) = line.strip_prefix("meta ") else { break };
        let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
        meta.insert(k.to_string(), v.to_string());
        r.lines.next();
    }
    let positions: usize = r.parsed("positions")?;
    let layers: usize = r.parsed("layers")?;
    let residual: bool = r.parsed("residual")?;
    let step: usize = r.parsed("step")?;
    let seed: u64 = r.parsed("seed")?;
    let train_accuracy: f64 = r.parsed("train_accuracy")?;
    let dev_accuracy: f64 = r.parsed("dev_accuracy")?;
    let (i, rest) = r.field("loss_history")?;
    let mut cells = rest.split_whitespace();
    let n: usize = cells
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Reader::err(i, "bad loss count"))?;
    let loss_history = cells
        .map(|c| c.parse::<f64>().map_err(|_| Reader::err(i, "bad loss value")))
        .collect::<Result<Vec<_>>>()?;
    if loss_history.len() != n {
        return Err(Reader::err(i, "loss count mismatch"));
    }

    let mut velocity = Vec::new();
    let mut pair = |r: &mut Reader, name: &str| -> Result<Array2<f64>> {
        let t = r.tensor("tensor", name)?;
        let v = r.tensor("velocity", name)?;
        if v.dim() != t.dim() {
            return Err(Error::parse(
                "checkpoint",
                format!("velocity shape differs for `{name}`"),
            ));
        }
        velocity.push(v);
        Ok(t)
    };
    let embedding = pair(&mut r, "embedding")?;
    let mut grid_layers = Vec::with_capacity(layers);
    for l in 0..layers {
        let positions_mix = pair(&mut r, &format!("layer{l}.positions"))?;
        let features = pair(&mut r, &format!("layer{l}.features"))?;
        let bias = pair(&mut r, &format!("layer{l}.bias"))?;
        grid_layers.push(GridLayer {
            mixing: Mixing::Factored {
                positions: positions_mix,
                features,
            },
            bias,
        });
    }
    let head_weight = pair(&mut r, "head.weight")?;
    let head_bias = pair(&mut r, "head.bias")?;
    let net = TokenGridNetwork {
        embedding,
        layers: grid_layers,
        head_weight,
        head_bias,
        residual,
        positions,
    };
    validate_shapes(&net)?;
    Ok((
        TrainState {
            net,
            velocity,
            step,
            seed,
            loss_history,
            train_accuracy,
            dev_accuracy,
        },
        meta,
    ))
}

fn validate_shapes(net: &TokenGridNetwork) -> Result<()> {
    let (m, d) = (net.positions, net.width());
    let bad = |what: &str| Err(Error::Shape(format!("checkpoint tensor `{what}` has the wrong shape")));
    for (l, layer) in net.layers.iter().enumerate() {
        let Mixing::Factored { positions, features } = &layer.mixing else {
            unreachable!()
        };
        if positions.dim() != (m, m) || features.dim() != (d, d) || layer.bias.dim() != (m, d) {
            return bad(&format!("layer{l}"));
        }
    }
    if net.head_weight.ncols() != d || net.head_bias.dim() != (1, net.classes()) {
        return bad("head");
    }
    Ok(())
}

/// Write a checkpoint file.
pub fn save(state: &TrainState, meta: &BTreeMap<String, String>, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(state, meta)?).map_err(|e| Error::io(path, e))
}

/// Read a checkpoint file.
pub fn load(path: &Path) -> Result<(TrainState, BTreeMap<String, String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}
