//! Success graphs over interchange results and the largest clique that
//! contains an impactful edge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{BitMatrix, SweepResult};
use crate::natlog::Node;
use crate::neural::GridLocation;

/// Fixed-size set of vertex indices.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    fn first(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(k, w)| {
            let mut w = *w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }
}

/// Undirected graph of mutually successful example pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuccessGraph {
    /// Example id of each vertex.
    pub ids: Vec<usize>,
    adjacency: Vec<Bits>,
    impactful: Vec<Bits>,
}

impl SuccessGraph {
    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Whether the graph has no vertices.
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Whether `{i, j}` is an edge.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(j)
    }

    /// Whether `{i, j}` is an impactful edge.
    pub fn is_impactful(&self, i: usize, j: usize) -> bool {
        self.impactful[i].contains(j)
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .flat_map(|i| self.adjacency[i].iter().filter(move |j| *j > i).map(move |j| (i, j)))
            .collect()
    }

    /// Impactful edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn impactful_edges(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .flat_map(|i| self.impactful[i].iter().filter(move |j| *j > i).map(move |j| (i, j)))
            .collect()
    }

    /// Graph from explicit edges; used for tests and synthetic inputs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], impactful: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Bits::new(n); n];
        let mut imp = vec![Bits::new(n); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Shape(format!("bad edge ({a}, {b}) for {n} vertices")));
            }
            adjacency[a].insert(b);
            adjacency[b].insert(a);
        }
        for &(a, b) in impactful {
            if a >= n || b >= n || !adjacency[a].contains(b) {
                return Err(Error::Shape(format!("impactful pair ({a}, {b}) is not an edge")));
            }
            imp[a].insert(b);
            imp[b].insert(a);
        }
        Ok(Self {
            ids: (0..n).collect(),
            adjacency,
            impactful: imp,
        })
    }

    /// Adjacency edge list: a comment header, then `i j impactful` per edge, ids as labels.
    pub fn edge_list(&self) -> String {
        let mut out = format!(
            "# vertices {}\n# edge impactful iff either ordered pair is impactful\n",
            self.len()
        );
        for (i, j) in self.edges() {
            let _ = writeln!(
                out,
                "{} {} {}",
                self.ids[i],
                self.ids[j],
                u8::from(self.is_impactful(i, j))
            );
        }
        out
    }
}

/// Edge `{i, j}` iff both ordered pairs succeeded; impactful iff either ordered pair is.
pub fn build_graph(success: &BitMatrix, impactful: &BitMatrix) -> Result<SuccessGraph> {
    let n = success.len();
    if impactful.len() != n {
        return Err(Error::Shape(format!(
            "success matrix is {n}×{n}, impactful matrix is {0}×{0}",
            impactful.len()
        )));
    }
    let mut adjacency = vec![Bits::new(n); n];
    let mut imp = vec![Bits::new(n); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && success.get(i, j) && success.get(j, i) {
                adjacency[i].insert(j);
                if impactful.get(i, j) || impactful.get(j, i) {
                    imp[i].insert(j);
                }
            }
        }
    }
    Ok(SuccessGraph {
        ids: (0..n).collect(),
        adjacency,
        impactful: imp,
    })
}

/// [`build_graph`] from boolean rows; errors unless both are square and equal in size.
pub fn build_graph_from_rows(success: &[Vec<bool>], impactful: &[Vec<bool>]) -> Result<SuccessGraph> {
    build_graph(&BitMatrix::from_rows(success)?, &BitMatrix::from_rows(impactful)?)
}

/// Solver selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CliqueMode {
    /// Exact below the vertex bound, heuristic above it.
    Auto,
    /// Branch and bound; errors above the vertex bound.
    Exact,
    /// Greedy expansion with swaps.
    Heuristic,
}

/// Solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliqueConfig {
    /// Solver selection.
    pub mode: CliqueMode,
    /// Largest graph the exact solver accepts.
    pub exact_vertex_bound: usize,
    /// Seed of the heuristic's edge order.
    pub seed: u64,
    /// Impactful edges the heuristic starts from (0 = all).
    pub heuristic_starts: usize,
}

impl Default for CliqueConfig {
    fn default() -> Self {
        Self {
            mode: CliqueMode::Auto,
            exact_vertex_bound: 2000,
            seed: 0,
            heuristic_starts: 64,
        }
    }
}

/// A verified clique containing an impactful edge, or the empty result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliqueResult {
    /// Vertices, increasing.
    pub vertices: Vec<usize>,
    /// Impactful edge inside the clique; `None` when the graph has no impactful edge.
    pub witness: Option<(usize, usize)>,
    /// Solver that produced it.
    pub exact: bool,
}

impl CliqueResult {
    /// Clique size (0 when there is no impactful edge).
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    /// Whether the graph had no impactful edge at all.
    pub fn no_impactful_edge(&self) -> bool {
        self.witness.is_none()
    }
}

/// Check that `vertices` is a clique of `graph` and that `witness` is an impactful edge inside it.
pub fn verify_clique(graph: &SuccessGraph, vertices: &[usize], witness: Option<(usize, usize)>) -> Result<()> {
    let bad = |m: String| Err(Error::Config(format!("clique certificate rejected: {m}")));
    for (k, a) in vertices.iter().enumerate() {
        if *a >= graph.len() {
            return bad(format!("vertex {a} out of range"));
        }
        for b in &vertices[k + 1..] {
            if a >= b {
                return bad("vertices not strictly increasing".into());
            }
            if !graph.has_edge(*a, *b) {
                return bad(format!("{a} and {b} are not adjacent"));
            }
        }
    }
    match witness {
        None if vertices.is_empty() => Ok(()),
        None => bad("nonempty clique without a witness".into()),
        Some((a, b)) if vertices.contains(&a) && vertices.contains(&b) && graph.is_impactful(a, b) => Ok(()),
        Some((a, b)) => bad(format!("witness ({a}, {b}) is not an impactful edge of the clique")),
    }
}

fn witness_in(graph: &SuccessGraph, vertices: &[usize]) -> Option<(usize, usize)> {
    vertices
        .iter()
        .enumerate()
        .flat_map(|(k, a)| vertices[k + 1..].iter().map(move |b| (*a, *b)))
        .find(|(a, b)| graph.is_impactful(*a, *b))
}

/// Greedy colouring of `candidates`; returns vertices in colouring order with
/// the colour count needed up to each.
fn colour_sort(graph: &SuccessGraph, candidates: &Bits) -> Vec<(usize, usize)> {
    let mut uncoloured = candidates.clone();
    let mut out = Vec::with_capacity(candidates.len());
    let mut colour = 0;
    while !uncoloured.is_empty() {
        colour += 1;
        let mut available = uncoloured.clone();
        while let Some(v) = available.first() {
            available.remove(v);
            uncoloured.remove(v);
            out.push((v, colour));
            for w in graph.adjacency[v].iter() {
                available.remove(w);
            }
        }
    }
    out
}

/// Raise `best` to the size of the largest clique extending a `depth`-clique into `candidates`.
fn max_clique_size(graph: &SuccessGraph, candidates: Bits, depth: usize, best: &AtomicUsize) {
    let order = colour_sort(graph, &candidates);
    let mut remaining = candidates;
    for &(v, colour) in order.iter().rev() {
        if depth + colour <= best.load(Ordering::Relaxed) {
            return;
        }
        let next = remaining.and(&graph.adjacency[v]);
        if next.is_empty() {
            best.fetch_max(depth + 1, Ordering::Relaxed);
        } else {
            max_clique_size(graph, next, depth + 1, best);
        }
        remaining.remove(v);
    }
}

/// Whether `candidates` holds a clique of `need` vertices.
fn has_clique(graph: &SuccessGraph, candidates: &Bits, need: usize) -> bool {
    if need == 0 {
        return true;
    }
    if candidates.len() < need {
        return false;
    }
    let order = colour_sort(graph, candidates);
    let mut remaining = candidates.clone();
    for &(v, colour) in order.iter().rev() {
        if colour < need {
            return false;
        }
        if has_clique(graph, &remaining.and(&graph.adjacency[v]), need - 1) {
            return true;
        }
        remaining.remove(v);
    }
    false
}

/// Whether the clique `chosen` extends into `candidates` (common neighbours of
/// `chosen`) to `target` vertices including an impactful edge.
fn extends(graph: &SuccessGraph, chosen: &[usize], candidates: &Bits, target: usize) -> bool {
    let need = target.saturating_sub(chosen.len());
    if witness_in(graph, chosen).is_some() {
        return has_clique(graph, candidates, need);
    }
    // Close an impactful edge from a chosen vertex into the candidates.
    for a in chosen {
        for b in graph.impactful[*a].and(candidates).iter() {
            if need >= 1 && has_clique(graph, &candidates.and(&graph.adjacency[b]), need - 1) {
                return true;
            }
        }
    }
    // Or take both endpoints from the candidates.
    for a in candidates.iter() {
        let later = graph.impactful[a].and(candidates);
        for b in later.iter().filter(|b| *b > a) {
            let common = candidates.and(&graph.adjacency[a]).and(&graph.adjacency[b]);
            if need >= 2 && has_clique(graph, &common, need - 2) {
                return true;
            }
        }
    }
    false
}

/// Lexicographically smallest `target`-clique with an impactful edge, built one
/// vertex at a time: each vertex is kept iff the choice so far still extends.
fn first_clique(graph: &SuccessGraph, target: usize) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(target);
    let mut candidates = Bits::new(graph.len());
    for i in 0..graph.len() {
        candidates.insert(i);
    }
    while chosen.len() < target {
        let v = candidates.first().expect("a clique of the computed size exists");
        candidates.remove(v);
        chosen.push(v);
        let next = candidates.and(&graph.adjacency[v]);
        if extends(graph, &chosen, &next, target) {
            candidates = next;
        } else {
            chosen.pop();
        }
    }
    chosen
}

fn exact(graph: &SuccessGraph, edges: &[(usize, usize)]) -> CliqueResult {
    let best = AtomicUsize::new(2);
    edges.par_iter().for_each(|&(u, v)| {
        let common = graph.adjacency[u].and(&graph.adjacency[v]);
        if common.len() + 2 > best.load(Ordering::Relaxed) {
            max_clique_size(graph, common, 2, &best);
        }
    });
    let target = best.load(Ordering::Relaxed);
    let chosen = first_clique(graph, target);
    CliqueResult {
        witness: witness_in(graph, &chosen),
        vertices: chosen,
        exact: true,
    }
}

fn grow(graph: &SuccessGraph, mut clique: Vec<usize>) -> Vec<usize> {
    loop {
        let mut candidates = Bits::new(graph.len());
        for i in 0..graph.len() {
            candidates.insert(i);
        }
        for v in &clique {
            candidates = candidates.and(&graph.adjacency[*v]);
        }
        let pick = candidates
            .iter()
            .max_by_key(|v| (graph.adjacency[*v].and(&candidates).len(), std::cmp::Reverse(*v)));
        match pick {
            Some(v) => clique.push(v),
            None => break,
        }
    }
    clique.sort_unstable();
    clique
}

fn heuristic(graph: &SuccessGraph, edges: &[(usize, usize)], config: &CliqueConfig) -> CliqueResult {
    let mut order = edges.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    if config.heuristic_starts > 0 {
        order.truncate(config.heuristic_starts);
    }
    let candidates: Vec<Vec<usize>> = order
        .par_iter()
        .map(|&(u, v)| {
            let mut clique = grow(graph, vec![u, v]);
            // One-for-two swaps: drop a vertex other than the seed edge and regrow.
            let mut improved = true;
            while improved {
                improved = false;
                for k in 0..clique.len() {
                    if clique[k] == u || clique[k] == v {
                        continue;
                    }
                    let mut trial = clique.clone();
                    trial.remove(k);
                    let trial = grow(graph, trial);
                    if trial.len() > clique.len() {
                        clique = trial;
                        improved = true;
                        break;
                    }
                }
            }
            clique
        })
        .collect();
    let best = candidates
        .into_iter()
        .min_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)))
        .expect("at least one start");
    CliqueResult {
        witness: witness_in(graph, &best),
        vertices: best,
        exact: false,
    }
}

/// Largest clique containing at least one impactful edge, verified before returning.
///
/// Exact mode runs a colouring-bounded branch and bound on the common
/// neighbourhood of every impactful edge to find the optimum size, then
/// returns the lexicographically smallest optimal clique.
pub fn max_clique_impactful(graph: &SuccessGraph, config: &CliqueConfig) -> Result<CliqueResult> {
    let use_exact = match config.mode {
        CliqueMode::Exact if graph.len() > config.exact_vertex_bound => {
            return Err(Error::BudgetExceeded {
                what: "exact clique search vertices".into(),
                needed: graph.len() as u128,
                budget: config.exact_vertex_bound as u128,
            })
        }
        CliqueMode::Exact => true,
        CliqueMode::Auto => graph.len() <= config.exact_vertex_bound,
        CliqueMode::Heuristic => false,
    };
    let edges = graph.impactful_edges();
    let result = if edges.is_empty() {
        CliqueResult {
            vertices: Vec::new(),
            witness: None,
            exact: use_exact,
        }
    } else if use_exact {
        exact(graph, &edges)
    } else {
        heuristic(graph, &edges, config)
    };
    verify_clique(graph, &result.vertices, result.witness)?;
    Ok(result)
}

/// Clique result of one (node, location).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocationClique {
    /// Node.
    pub node: Node,
    /// Location.
    pub location: GridLocation,
    /// Vertices in the graph.
    pub vertices: usize,
    /// Result.
    pub clique: CliqueResult,
}

/// Graphs and cliques for every sweep result.
pub fn cliques_for(results: &[SweepResult], config: &CliqueConfig) -> Result<Vec<LocationClique>> {
    results
        .iter()
        .map(|r| {
            let graph = build_graph(&r.success, &r.impactful)?;
            Ok(LocationClique {
                node: r.node,
                location: r.location.clone(),
                vertices: graph.len(),
                clique: max_clique_impactful(&graph, config)?,
            })
        })
        .collect()
}

/// Report tables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Summary {
    /// Per node: best clique size and the first location attaining it.
    pub per_node: Vec<(Node, usize, GridLocation)>,
    /// Every (node, location, size).
    pub per_location: Vec<(Node, GridLocation, usize)>,
}

/// Per-node maxima and the per-location table. Nodes keep the order of their
/// first appearance; ties go to the earliest location.
pub fn summarize(results: &[LocationClique]) -> Summary {
    let mut per_node: Vec<(Node, usize, GridLocation)> = Vec::new();
    for r in results {
        match per_node.iter_mut().find(|e| e.0 == r.node) {
            Some(e) if r.clique.size() > e.1 => {
                e.1 = r.clique.size();
                e.2 = r.location.clone();
            }
            Some(_) => {}
            None => per_node.push((r.node, r.clique.size(), r.location.clone())),
        }
    }
    Summary {
        per_node,
        per_location: results
            .iter()
            .map(|r| (r.node, r.location.clone(), r.clique.size()))
            .collect(),
    }
}

impl Summary {
    /// Main table: node, best size, location.
    pub fn main_table(&self) -> String {
        let mut out = String::from("node\tmax_clique\tlocation\n");
        for (n, s, l) in &self.per_node {
            let _ = writeln!(out, "{n}\t{s}\t{l}");
        }
        out
    }

    /// Long-format table of every location.
    pub fn location_table(&self) -> String {
        let mut out = String::from("node\tlocation\tmax_clique\n");
        for (n, l, s) in &self.per_location {
            let _ = writeln!(out, "{n}\t{l}\t{s}");
        }
        out
    }

    /// Heatmap per node over single-column, whole-vector locations: one line
    /// per layer, one tab-separated cell per position (`-` where not swept).
    pub fn heatmaps(&self, positions: usize) -> String {
        let mut grids: BTreeMap<String, BTreeMap<usize, Vec<Option<usize>>>> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        for (n, l, s) in &self.per_location {
            if l.positions.len() != 1 || l.units.is_some() || l.positions[0] >= positions {
                continue;
            }
            let key = n.name().to_string();
            if !order.contains(&key) {
                order.push(key.clone());
            }
            let row = grids
                .entry(key)
                .or_default()
                .entry(l.layer)
                .or_insert_with(|| vec![None; positions]);
            row[l.positions[0]] = Some(*s);
        }
        let mut out = String::new();
        for key in order {
            let header: Vec<String> = (0..positions).map(|p| p.to_string()).collect();
            let _ = writeln!(out, "# {key}\nlayer\t{}", header.join("\t"));
            for (layer, row) in &grids[&key] {
                let cells: Vec<String> = row.iter().map(|c| c.map_or("-".into(), |v| v.to_string())).collect();
                let _ = writeln!(out, "{layer}\t{}", cells.join("\t"));
            }
        }
        out
    }
}
