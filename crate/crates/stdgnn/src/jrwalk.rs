//! Joint random walks over snapshot graphs.
//!
//! Each node carries two transition distributions over its
//! out-neighbors: edge preference `P_e(i->j) = w_ij / sum_p w_ip` and
//! degree preference `P_v(i->j) = d_j / sum_{p in N(i)} d_p` with `d`
//! the total unweighted degree. A walk step flips a biased coin: with
//! probability `alpha` it samples from the edge-preference alias table
//! of the current node, otherwise from the degree-preference table.
//! Walks that reach a sink stop and are padded with the reserved index
//! `n` (one past the vocabulary) up to the requested length.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::ingest::Snapshot;
use crate::{seed, Error, Result};

// ---------------------------------------------------------------------------
// Alias table
// ---------------------------------------------------------------------------

/// Walker alias table: O(n) construction, O(1) sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Build from a probability vector summing to 1 (within 1e-9).
    pub fn new(p: &[f64]) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Config("alias table over empty support".into()));
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Config(format!("alias table weight {bad} is invalid")));
        }
        let total: f64 = p.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("alias table weights sum to zero".into()));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "alias table input sums to {total}, expected 1"
            )));
        }
        let n = p.len();
        let mut prob = vec![0.0; n];
        let mut alias = vec![0usize; n];
        let mut scaled: Vec<f64> = p.iter().map(|&v| v * n as f64).collect();
        let mut small: Vec<usize> = Vec::with_capacity(n);
        let mut large: Vec<usize> = Vec::with_capacity(n);
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for &i in small.iter().chain(large.iter()) {
            prob[i] = 1.0;
            alias[i] = i;
        }
        Ok(AliasTable { prob, alias })
    }

    pub fn support(&self) -> usize {
        self.prob.len()
    }

    /// Draw one index.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let n = self.prob.len();
        let k = rng.gen_range(0..n);
        if rng.gen::<f64>() < self.prob[k] {
            k
        } else {
            self.alias[k]
        }
    }

    /// The distribution this table actually samples:
    /// `p_k = (prob[k] + sum_{j: alias[j]=k} (1 - prob[j])) / n`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.prob.len();
        let mut p = vec![0.0; n];
        for k in 0..n {
            p[k] += self.prob[k];
            if self.alias[k] != k {
                p[self.alias[k]] += 1.0 - self.prob[k];
            }
        }
        p.iter_mut().for_each(|v| *v /= n as f64);
        p
    }
}

// ---------------------------------------------------------------------------
// Transition tables
// ---------------------------------------------------------------------------

/// Per-node neighbor lists, both transition distributions, and their
/// alias tables. Immutable after construction; cheap to share.
#[derive(Debug, Clone)]
pub struct TransitionTables {
    pub neighbors: Vec<Vec<u32>>,
    pub edge_probs: Vec<Vec<f64>>,
    pub degree_probs: Vec<Vec<f64>>,
    pub edge_alias: Vec<Option<AliasTable>>,
    pub degree_alias: Vec<Option<AliasTable>>,
    /// Nodes with no out-neighbors.
    pub sinks: Vec<bool>,
}

impl TransitionTables {
    pub fn n_nodes(&self) -> usize {
        self.neighbors.len()
    }
}

/// Build both transition distributions for every node of a snapshot.
pub fn build_transition(snap: &Snapshot) -> Result<TransitionTables> {
    let n = snap.n_nodes();
    let mut neighbors = Vec::with_capacity(n);
    let mut edge_probs = Vec::with_capacity(n);
    let mut degree_probs = Vec::with_capacity(n);
    let mut edge_alias = Vec::with_capacity(n);
    let mut degree_alias = Vec::with_capacity(n);
    let mut sinks = vec![false; n];

    for i in 0..n {
        let row = &snap.adjacency[i];
        if row.is_empty() {
            sinks[i] = true;
            neighbors.push(Vec::new());
            edge_probs.push(Vec::new());
            degree_probs.push(Vec::new());
            edge_alias.push(None);
            degree_alias.push(None);
            continue;
        }
        let targets: Vec<u32> = row.iter().map(|(j, _)| *j).collect();
        let weight_sum: f64 = row.iter().map(|(_, w)| *w as f64).sum();
        let pe: Vec<f64> = row.iter().map(|(_, w)| *w as f64 / weight_sum).collect();
        let degree_sum: f64 = targets.iter().map(|&j| snap.total_degree(j) as f64).sum();
        let pv: Vec<f64> = targets
            .iter()
            .map(|&j| snap.total_degree(j) as f64 / degree_sum)
            .collect();
        edge_alias.push(Some(AliasTable::new(&pe)?));
        degree_alias.push(Some(AliasTable::new(&pv)?));
        neighbors.push(targets);
        edge_probs.push(pe);
        degree_probs.push(pv);
    }
    Ok(TransitionTables {
        neighbors,
        edge_probs,
        degree_probs,
        edge_alias,
        degree_alias,
        sinks,
    })
}

// ---------------------------------------------------------------------------
// Walks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub alpha: f64,
    /// Walks per start node.
    pub walks_per_node: usize,
    /// Nodes per walk.
    pub walk_len: usize,
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} not in [0,1]", self.alpha)));
        }
        if self.walks_per_node == 0 || self.walk_len == 0 {
            return Err(Error::Config("walk count and length must be >= 1".into()));
        }
        Ok(())
    }
}

/// The r walks of one start node; every walk has exactly `walk_len`
/// entries, padded with the snapshot's pad index (`n_nodes`).
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSet {
    pub start: u32,
    pub walks: Vec<Vec<u32>>,
}

/// Run the joint random walk from one start node.
pub fn jrwalk(
    tables: &TransitionTables,
    start: u32,
    params: &WalkParams,
    rng: &mut impl Rng,
) -> Result<WalkSet> {
    params.validate()?;
    let n = tables.n_nodes();
    if start as usize >= n {
        return Err(Error::UnknownNode(start));
    }
    let pad = n as u32;
    let mut walks = Vec::with_capacity(params.walks_per_node);
    for _ in 0..params.walks_per_node {
        let mut walk = Vec::with_capacity(params.walk_len);
        walk.push(start);
        let mut current = start as usize;
        for _ in 1..params.walk_len {
            if tables.sinks[current] {
                break;
            }
            let table = if params.alpha > rng.gen::<f64>() {
                tables.edge_alias[current].as_ref().unwrap()
            } else {
                tables.degree_alias[current].as_ref().unwrap()
            };
            let next = tables.neighbors[current][table.sample(rng)];
            walk.push(next);
            current = next as usize;
        }
        walk.resize(params.walk_len, pad);
        walks.push(walk);
    }
    Ok(WalkSet { start, walks })
}

/// Walks for every node of a snapshot. Each node draws from its own
/// RNG stream derived from `(walk_seed, stream, node)`, so the parallel
/// and sequential paths produce identical output; `stream` should
/// identify the snapshot (series and slice) being sampled.
pub fn walk_all_nodes(
    tables: &TransitionTables,
    params: &WalkParams,
    walk_seed: u64,
    stream: u64,
    parallel: bool,
) -> Result<Vec<WalkSet>> {
    params.validate()?;
    let node_walk = |node: usize| {
        let s = seed::mix(seed::mix(walk_seed, seed::WALKS, stream), node as u64, 0);
        let mut rng = ChaCha20Rng::seed_from_u64(s);
        jrwalk(tables, node as u32, params, &mut rng)
    };
    if parallel {
        (0..tables.n_nodes()).into_par_iter().map(node_walk).collect()
    } else {
        (0..tables.n_nodes()).map(node_walk).collect()
    }
}

/// Debug CSV dump: `node,walk_idx,step,visited` with pads as -1.
pub fn dump_walks_csv<W: Write>(mut out: W, sets: &[WalkSet], pad: u32) -> Result<()> {
    writeln!(out, "node,walk_idx,step,visited")?;
    for set in sets {
        for (w, walk) in set.walks.iter().enumerate() {
            for (step, &v) in walk.iter().enumerate() {
                let visited = if v == pad { -1 } else { v as i64 };
                writeln!(out, "{},{},{},{}", set.start, w, step, visited)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Walk tensors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkEncoding {
    /// Rows are unit vectors of width `n_nodes`; pads are zero rows.
    OneHot,
    /// Rows are node indices to be resolved by a learned lookup table;
    /// pads keep the reserved index `n_nodes`.
    EmbeddingIndex,
}

/// All walks of one snapshot packed model-ready: node `v`'s
/// `walks_per_node` walks are concatenated into a `(walk_len *
/// walks_per_node, width)` row block.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkTensor {
    pub n_nodes: usize,
    /// Rows per node block: `walk_len * walks_per_node`.
    pub rows: usize,
    /// One-hot width (`n_nodes`) or embedding width.
    pub width: usize,
    pub encoding: WalkEncoding,
    /// OneHot: `n_nodes * rows * width` values.
    pub dense: Vec<f64>,
    /// EmbeddingIndex: `n_nodes * rows` indices.
    pub indices: Vec<u32>,
}

impl WalkTensor {
    pub fn pad_index(&self) -> u32 {
        self.n_nodes as u32
    }

    pub fn node_block(&self, node: usize) -> &[f64] {
        let len = self.rows * self.width;
        &self.dense[node * len..(node + 1) * len]
    }

    pub fn node_indices(&self, node: usize) -> &[u32] {
        &self.indices[node * self.rows..(node + 1) * self.rows]
    }
}

/// Pack per-node walk sets into a tensor. For `OneHot` the row width is
/// the vocabulary size; for `EmbeddingIndex` pass the embedding width.
pub fn walks_to_tensor(
    sets: &[WalkSet],
    encoding: WalkEncoding,
    embed_width: usize,
) -> Result<WalkTensor> {
    if sets.is_empty() {
        return Err(Error::EmptyInput("no walk sets to pack".into()));
    }
    let n_nodes = sets.len();
    let walks_per_node = sets[0].walks.len();
    let walk_len = sets[0].walks.first().map(|w| w.len()).unwrap_or(0);
    for set in sets {
        if set.walks.len() != walks_per_node || set.walks.iter().any(|w| w.len() != walk_len) {
            return Err(Error::Shape(
                "walk sets disagree on walks per node or walk length".into(),
            ));
        }
    }
    let rows = walk_len * walks_per_node;
    let pad = n_nodes as u32;
    match encoding {
        WalkEncoding::OneHot => {
            let width = n_nodes;
            let mut dense = vec![0.0; n_nodes * rows * width];
            for (node, set) in sets.iter().enumerate() {
                let base = node * rows * width;
                for (w, walk) in set.walks.iter().enumerate() {
                    for (step, &v) in walk.iter().enumerate() {
                        if v == pad {
                            continue;
                        }
                        let row = w * walk_len + step;
                        dense[base + row * width + v as usize] = 1.0;
                    }
                }
            }
            Ok(WalkTensor {
                n_nodes,
                rows,
                width,
                encoding,
                dense,
                indices: Vec::new(),
            })
        }
        WalkEncoding::EmbeddingIndex => {
            if embed_width == 0 {
                return Err(Error::Config("embedding width must be >= 1".into()));
            }
            let mut indices = Vec::with_capacity(n_nodes * rows);
            for set in sets {
                for walk in &set.walks {
                    indices.extend_from_slice(walk);
                }
            }
            Ok(WalkTensor {
                n_nodes,
                rows,
                width: embed_width,
                encoding,
                dense: Vec::new(),
                indices,
            })
        }
    }
}
