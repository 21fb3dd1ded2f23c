//! Token-grid classifier: an embedding row followed by layers in which every
//! position's vector is computed from all positions of the previous row.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    // Column-major copy, so products with mostly-zero vectors skip zero columns.
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_values: Vec<f64>,
}

impl Csr {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; rows + 1];
        let mut indices: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut col_ptr = vec![0; cols + 1];
        for c in &indices {
            col_ptr[c + 1] += 1;
        }
        for c in 0..cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut next = col_ptr.clone();
        let mut col_rows = vec![0; indices.len()];
        let mut col_values = vec![0.0; indices.len()];
        for r in 0..rows {
            for k in indptr[r]..indptr[r + 1] {
                let slot = &mut next[indices[k]];
                col_rows[*slot] = r;
                col_values[*slot] = values[k];
                *slot += 1;
            }
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
            col_ptr,
            col_rows,
            col_values,
        }
    }

    /// Stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `self · x`. Each output accumulates its terms in increasing column
    /// order, skipping zero entries of `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "csr operand length");
        let mut out = vec![0.0; self.rows];
        for (c, xc) in x.iter().enumerate() {
            if *xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                out[self.col_rows[k]] += self.col_values[k] * xc;
            }
        }
        out
    }

    /// `selfᵀ · x`.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "csr operand length");
        let mut out = vec![0.0; self.cols];
        for (r, xr) in x.iter().enumerate() {
            if *xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                out[self.indices[k]] += self.values[k] * xr;
            }
        }
        out
    }
}

/// How a layer combines the previous row.
#[derive(Clone, Debug, PartialEq)]
pub enum Mixing {
    /// `positions · (row · featuresᵀ)`: a position-mixing matrix (m × m) and
    /// a shared feature map (d × d). Trainable.
    Factored {
        /// Position mixing, m × m.
        positions: Array2<f64>,
        /// Feature map, d × d.
        features: Array2<f64>,
    },
    /// Arbitrary sparse map on the flattened row (m·d × m·d). Fixed weights.
    Sparse(Csr),
}

/// One layer: mixing, bias, ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct GridLayer {
    /// Mixing weights.
    pub mixing: Mixing,
    /// Bias, m × d.
    pub bias: Array2<f64>,
}

/// Architecture settings for a randomly initialized network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    /// Vector width d.
    pub width: usize,
    /// Number of mixing layers n.
    pub layers: usize,
    /// Add the layer input to its output.
    pub residual: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            width: 16,
            layers: 2,
            residual: true,
        }
    }
}

/// Embedding, mixing layers and a linear head on position 0 of the last row.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenGridNetwork {
    /// Token embeddings, vocabulary × d.
    pub embedding: Array2<f64>,
    /// Layers.
    pub layers: Vec<GridLayer>,
    /// Head weights, classes × d.
    pub head_weight: Array2<f64>,
    /// Head bias, 1 × classes.
    pub head_bias: Array2<f64>,
    /// Whether layers add their input.
    pub residual: bool,
    /// Sequence length m.
    pub positions: usize,
}

/// Output of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    /// Rows 0..=n, each m × d; row 0 holds the embeddings.
    pub grid: Vec<Array2<f64>>,
    /// Class scores.
    pub logits: Array1<f64>,
    /// Argmax of the logits, lowest index on ties.
    pub label: usize,
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, shape: (usize, usize), std: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn(shape, || normal.sample(rng))
}

impl TokenGridNetwork {
    /// Random initialization with scaled Gaussian weights and zero biases.
    pub fn random<R: Rng + ?Sized>(
        arch: &Architecture,
        vocabulary: usize,
        positions: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        let d = arch.width;
        let embedding = gaussian(rng, (vocabulary, d), 1.0);
        let layers = (0..arch.layers)
            .map(|_| GridLayer {
                mixing: Mixing::Factored {
                    positions: gaussian(rng, (positions, positions), 1.0 / (positions as f64).sqrt()),
                    features: gaussian(rng, (d, d), 1.0 / (d as f64).sqrt()),
                },
                bias: Array2::zeros((positions, d)),
            })
            .collect();
        Self {
            embedding,
            layers,
            head_weight: gaussian(rng, (classes, d), 1.0 / (d as f64).sqrt()),
            head_bias: Array2::zeros((1, classes)),
            residual: arch.residual,
            positions,
        }
    }

    /// Vector width d.
    pub fn width(&self) -> usize {
        self.embedding.ncols()
    }

    /// Number of grid rows including the embedding row.
    pub fn rows(&self) -> usize {
        self.layers.len() + 1
    }

    /// Number of output classes.
    pub fn classes(&self) -> usize {
        self.head_weight.nrows()
    }

    /// Vocabulary size.
    pub fn vocabulary(&self) -> usize {
        self.embedding.nrows()
    }

    /// Whether every layer is trainable.
    pub fn is_trainable(&self) -> bool {
        self.layers.iter().all(|l| matches!(l.mixing, Mixing::Factored { .. }))
    }

    /// Embedding row for a token sequence.
    pub fn embed(&self, tokens: &[usize]) -> Result<Array2<f64>> {
        if tokens.len() != self.positions {
            return Err(Error::Shape(format!(
                "expected {} tokens, got {}",
                self.positions,
                tokens.len()
            )));
        }
        let mut row = Array2::zeros((self.positions, self.width()));
        for (k, t) in tokens.iter().enumerate() {
            if *t >= self.vocabulary() {
                return Err(Error::Shape(format!(
                    "token id {t} outside vocabulary of {}",
                    self.vocabulary()
                )));
            }
            row.row_mut(k).assign(&self.embedding.row(*t));
        }
        Ok(row)
    }

    /// Pre-activation and output of layer `l` on `input`.
    pub(crate) fn layer_forward(&self, l: usize, input: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let layer = &self.layers[l];
        let pre = match &layer.mixing {
            Mixing::Factored { positions, features } => positions.dot(&input.dot(&features.t())) + &layer.bias,
            Mixing::Sparse(csr) => {
                let flat = input.as_standard_layout();
                let out = csr.mul_vec(flat.as_slice().expect("standard layout"));
                Array2::from_shape_vec(input.raw_dim(), out).expect("square sparse map") + &layer.bias
            }
        };
        let mut out = pre.mapv(relu);
        if self.residual {
            out += input;
        }
        (pre, out)
    }

    /// Class scores from the last row.
    pub fn head(&self, last: &Array2<f64>) -> Array1<f64> {
        self.head_weight.dot(&last.row(0)) + self.head_bias.row(0)
    }

    /// Full forward pass.
    pub fn forward(&self, tokens: &[usize]) -> Result<Forward> {
        let mut grid = vec![self.embed(tokens)?];
        for l in 0..self.layers.len() {
            let (_, out) = self.layer_forward(l, &grid[l]);
            grid.push(out);
        }
        let logits = self.head(grid.last().expect("embedding row"));
        let label = argmax(logits.view());
        Ok(Forward { grid, logits, label })
    }

    /// Recompute rows after `row` from the (possibly modified) grid and return the logits.
    pub fn resume(&self, grid: &mut [Array2<f64>], row: usize) -> Array1<f64> {
        for l in row..self.layers.len() {
            let (_, out) = self.layer_forward(l, &grid[l]);
            grid[l + 1] = out;
        }
        self.head(&grid[self.layers.len()])
    }

    /// Row `row` of the forward grid, computing nothing above it.
    pub fn forward_to(&self, tokens: &[usize], row: usize) -> Result<Array2<f64>> {
        if row >= self.rows() {
            return Err(Error::Shape(format!("row {row} outside 0..{}", self.rows())));
        }
        let mut state = self.embed(tokens)?;
        for l in 0..row {
            state = self.layer_forward(l, &state).1;
        }
        Ok(state)
    }

    /// Run layers `row..` starting from a single row and return the logits.
    pub fn run_from(&self, row: usize, mut state: Array2<f64>) -> Array1<f64> {
        for l in row..self.layers.len() {
            state = self.layer_forward(l, &state).1;
        }
        self.head(&state)
    }

    /// Logit of `class` for an embedding row, and its gradient with respect to that row.
    pub fn input_gradient(&self, input: &Array2<f64>, class: usize) -> (f64, Array2<f64>) {
        let mut rows = vec![input.clone()];
        let mut pres = Vec::with_capacity(self.layers.len());
        for l in 0..self.layers.len() {
            let (pre, out) = self.layer_forward(l, &rows[l]);
            pres.push(pre);
            rows.push(out);
        }
        let logit = self.head(rows.last().expect("embedding row"))[class];
        let mut d_row = Array2::zeros(input.raw_dim());
        d_row.row_mut(0).assign(&self.head_weight.row(class));
        for l in (0..self.layers.len()).rev() {
            let d_pre = &d_row * &pres[l].mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
            let mut d_input = match &self.layers[l].mixing {
                Mixing::Factored { positions, features } => positions.t().dot(&d_pre).dot(features),
                Mixing::Sparse(csr) => {
                    let flat = d_pre.as_standard_layout();
                    let back = csr.mul_vec_transposed(flat.as_slice().expect("standard layout"));
                    Array2::from_shape_vec(input.raw_dim(), back).expect("square sparse map")
                }
            };
            if self.residual {
                d_input += &d_row;
            }
            d_row = d_input;
        }
        (logit, d_row)
    }

    /// Trainable tensors with their names, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        for (l, layer) in self.layers.iter().enumerate() {
            if let Mixing::Factored { positions, features } = &layer.mixing {
                out.push((format!("layer{l}.positions"), positions));
                out.push((format!("layer{l}.features"), features));
            }
            out.push((format!("layer{l}.bias"), &layer.bias));
        }
        out.push(("head.weight".to_string(), &self.head_weight));
        out.push(("head.bias".to_string(), &self.head_bias));
        out
    }

    /// Mutable views of [`Self::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.embedding];
        for layer in &mut self.layers {
            if let Mixing::Factored { positions, features } = &mut layer.mixing {
                out.push(positions);
                out.push(features);
            }
            out.push(&mut layer.bias);
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }
}

/// A set of grid cells: one row, some positions, and optionally a unit span.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridLocation {
    /// Row index; 0 is the embedding row.
    pub layer: usize,
    /// Positions, sorted and distinct.
    pub positions: Vec<usize>,
    /// Half-open unit span; `None` means whole vectors.
    pub units: Option<(usize, usize)>,
}

impl GridLocation {
    /// Whole vectors at `positions` of row `layer`.
    pub fn new(layer: usize, positions: &[usize]) -> Self {
        let mut positions = positions.to_vec();
        positions.sort_unstable();
        positions.dedup();
        Self {
            layer,
            positions,
            units: None,
        }
    }

    /// Check the location fits a network.
    pub fn validate(&self, net: &TokenGridNetwork) -> Result<()> {
        let bad = |msg: String| Err(Error::Shape(format!("location {self}: {msg}")));
        if self.layer >= net.rows() {
            return bad(format!("row outside 0..{}", net.rows()));
        }
        if self.positions.is_empty() {
            return bad("no positions".into());
        }
        if self.positions.iter().any(|p| *p >= net.positions) {
            return bad(format!("position outside 0..{}", net.positions));
        }
        if let Some((a, b)) = self.units {
            if a >= b || b > net.width() {
                return bad(format!("unit span outside 0..{}", net.width()));
            }
        }
        Ok(())
    }

    /// Unit span, defaulting to the full width.
    pub fn span(&self, width: usize) -> (usize, usize) {
        self.units.unwrap_or((0, width))
    }
}

impl std::fmt::Display for GridLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ps: Vec<String> = self.positions.iter().map(|p| p.to_string()).collect();
        write!(f, "L{}:P{}", self.layer, ps.join("+"))?;
        if let Some((a, b)) = self.units {
            write!(f, ":U{a}-{b}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for GridLocation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("location", format!("bad location `{s}`, expected e.g. L2:P3+15"));
        let mut parts = s.split(':');
        let layer = parts
            .next()
            .and_then(|p| p.strip_prefix('L'))
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad)?;
        let positions: Vec<usize> = parts
            .next()
            .and_then(|p| p.strip_prefix('P'))
            .ok_or_else(bad)?
            .split('+')
            .map(|p| p.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let units = match parts.next() {
            None => None,
            Some(u) => {
                let (a, b) = u.strip_prefix('U').and_then(|u| u.split_once('-')).ok_or_else(bad)?;
                Some((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
            }
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        let mut loc = GridLocation::new(layer, &positions);
        loc.units = units;
        Ok(loc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn location_text_round_trip() {
        let loc: GridLocation = "L2:P15+3".parse().unwrap();
        assert_eq!(loc.positions, vec![3, 15]);
        assert_eq!(loc.to_string(), "L2:P3+15");
        let spanned: GridLocation = "L0:P1:U2-4".parse().unwrap();
        assert_eq!(spanned.units, Some((2, 4)));
        assert_eq!(spanned.to_string().parse::<GridLocation>().unwrap(), spanned);
        assert!("2:3".parse::<GridLocation>().is_err());
    }

    #[test]
    fn csr_sums_duplicates() {
        let m = Csr::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.mul_vec(&[1.0, 5.0, 2.0]), vec![2.0, 3.0]);
        assert_eq!(m.mul_vec_transposed(&[1.0, 2.0]), vec![2.0, 0.0, 3.0]);
    }

    #[test]
    fn csr_product_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let (rows, cols) = (rng.random_range(1..9), rng.random_range(1..9));
            let triplets: Vec<(usize, usize, f64)> = (0..rng.random_range(0..20))
                .map(|_| {
                    (
                        rng.random_range(0..rows),
                        rng.random_range(0..cols),
                        rng.random_range(-2.0..2.0),
                    )
                })
                .collect();
            let mut dense = vec![vec![0.0; cols]; rows];
            for (r, c, v) in &triplets {
                dense[*r][*c] += v;
            }
            let x: Vec<f64> = (0..cols)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        0.0
                    } else {
                        rng.random_range(-3.0..3.0)
                    }
                })
                .collect();
            let got = Csr::from_triplets(rows, cols, triplets).mul_vec(&x);
            for r in 0..rows {
                let want: f64 = dense[r].iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!((got[r] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(ndarray::arr1(&[1.0, 3.0, 3.0]).view()), 1);
        assert_eq!(argmax(ndarray::arr1(&[0.0, 0.0]).view()), 0);
    }

    #[test]
    fn forward_is_deterministic_and_shaped() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = TokenGridNetwork::random(&Architecture::default(), 10, 5, 3, &mut rng);
        let a = net.forward(&[1, 2, 3, 4, 0]).unwrap();
        let b = net.forward(&[1, 2, 3, 4, 0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.grid.len(), 3);
        assert_eq!(a.grid[2].dim(), (5, 16));
        assert!(net.forward(&[1, 2]).is_err());
        assert!(net.forward(&[1, 2, 3, 4, 99]).is_err());
    }

    #[test]
    fn zero_embeddings_stay_finite() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut net = TokenGridNetwork::random(&Architecture::default(), 10, 5, 3, &mut rng);
        net.embedding.fill(0.0);
        let f = net.forward(&[0; 5]).unwrap();
        assert!(f.grid.iter().all(|r| r.iter().all(|x| x.is_finite())));
        assert!(f.logits.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn resume_without_changes_reproduces_forward() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let net = TokenGridNetwork::random(&Architecture::default(), 10, 5, 3, &mut rng);
        let f = net.forward(&[3, 1, 4, 1, 5]).unwrap();
        let mut grid = f.grid.clone();
        assert_eq!(net.resume(&mut grid, 1), f.logits);
        assert_eq!(grid, f.grid);
    }
}
