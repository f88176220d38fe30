//! Aggregation strategies, registered by name.
//!
//! `agg1` reduces the neighbor states of one edge type into a single vector
//! per destination; `agg2` combines the per-edge-type results of a node.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Incoming edges of one type grouped by destination (CSR layout).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Adjacency {
    /// Destinations with at least one incoming edge, ascending.
    pub dsts: Vec<usize>,
    /// `srcs[offsets[i]..offsets[i+1]]` are the sources of `dsts[i]`, ascending.
    pub offsets: Vec<usize>,
    pub srcs: Vec<usize>,
}

impl Adjacency {
    pub fn from_edges(edges: &[(usize, usize)]) -> Self {
        let mut sorted: Vec<(usize, usize)> = edges.iter().map(|&(s, d)| (d, s)).collect();
        sorted.sort_unstable();
        let mut adj = Adjacency {
            offsets: vec![0],
            ..Default::default()
        };
        for (d, s) in sorted {
            if adj.dsts.last() != Some(&d) {
                if !adj.dsts.is_empty() {
                    adj.offsets.push(adj.srcs.len());
                }
                adj.dsts.push(d);
            }
            adj.srcs.push(s);
        }
        if !adj.dsts.is_empty() {
            adj.offsets.push(adj.srcs.len());
        }
        adj
    }

    pub fn is_empty(&self) -> bool {
        self.dsts.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.srcs[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn num_edges(&self) -> usize {
        self.srcs.len()
    }
}

/// Whatever a neighbor aggregator needs to replay its forward pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AggregateCache {
    /// Source row chosen per output element (max aggregation only).
    pub argmax: Vec<usize>,
}

pub trait NeighborAggregator: Send + Sync {
    fn name(&self) -> &'static str;

    /// One output row per `adj.dsts` entry, aggregating rows of `src`.
    fn forward(&self, src: &Tensor, adj: &Adjacency) -> (Tensor, AggregateCache);

    /// Accumulates into `grad_src` the gradient of the aggregated rows.
    fn backward(&self, adj: &Adjacency, cache: &AggregateCache, grad_out: &Tensor, grad_src: &mut Tensor);
}

struct SumAggregator;
struct MeanAggregator;
struct MaxAggregator;

fn weighted_sum(src: &Tensor, adj: &Adjacency, mean: bool) -> Tensor {
    let d = src.cols();
    let mut out = Tensor::zeros(adj.dsts.len(), d);
    for i in 0..adj.dsts.len() {
        let nb = adj.neighbors(i);
        let row = out.row_mut(i);
        for &u in nb {
            for (o, v) in row.iter_mut().zip(src.row(u)) {
                *o += v;
            }
        }
        if mean {
            let inv = 1.0 / nb.len() as f64;
            row.iter_mut().for_each(|o| *o *= inv);
        }
    }
    out
}

fn scatter_sum(adj: &Adjacency, grad_out: &Tensor, grad_src: &mut Tensor, mean: bool) {
    for i in 0..adj.dsts.len() {
        let nb = adj.neighbors(i);
        let scale = if mean { 1.0 / nb.len() as f64 } else { 1.0 };
        let g = grad_out.row(i);
        for &u in nb {
            for (o, v) in grad_src.row_mut(u).iter_mut().zip(g) {
                *o += scale * v;
            }
        }
    }
}

impl NeighborAggregator for SumAggregator {
    fn name(&self) -> &'static str {
        "sum"
    }

    fn forward(&self, src: &Tensor, adj: &Adjacency) -> (Tensor, AggregateCache) {
        (weighted_sum(src, adj, false), AggregateCache::default())
    }

    fn backward(&self, adj: &Adjacency, _: &AggregateCache, grad_out: &Tensor, grad_src: &mut Tensor) {
        scatter_sum(adj, grad_out, grad_src, false);
    }
}

impl NeighborAggregator for MeanAggregator {
    fn name(&self) -> &'static str {
        "mean"
    }

    fn forward(&self, src: &Tensor, adj: &Adjacency) -> (Tensor, AggregateCache) {
        (weighted_sum(src, adj, true), AggregateCache::default())
    }

    fn backward(&self, adj: &Adjacency, _: &AggregateCache, grad_out: &Tensor, grad_src: &mut Tensor) {
        scatter_sum(adj, grad_out, grad_src, true);
    }
}

impl NeighborAggregator for MaxAggregator {
    fn name(&self) -> &'static str {
        "max"
    }

    /// Elementwise max; ties go to the lowest source index.
    fn forward(&self, src: &Tensor, adj: &Adjacency) -> (Tensor, AggregateCache) {
        let d = src.cols();
        let mut out = Tensor::zeros(adj.dsts.len(), d);
        let mut argmax = vec![0usize; adj.dsts.len() * d];
        for i in 0..adj.dsts.len() {
            let nb = adj.neighbors(i);
            let row = out.row_mut(i);
            row.copy_from_slice(src.row(nb[0]));
            argmax[i * d..(i + 1) * d].iter_mut().for_each(|a| *a = nb[0]);
            for &u in &nb[1..] {
                for (c, v) in src.row(u).iter().enumerate() {
                    if *v > row[c] {
                        row[c] = *v;
                        argmax[i * d + c] = u;
                    }
                }
            }
        }
        (out, AggregateCache { argmax })
    }

    fn backward(&self, adj: &Adjacency, cache: &AggregateCache, grad_out: &Tensor, grad_src: &mut Tensor) {
        let d = grad_out.cols();
        for i in 0..adj.dsts.len() {
            for c in 0..d {
                let u = cache.argmax[i * d + c];
                let g = grad_out.get(i, c);
                grad_src.row_mut(u)[c] += g;
            }
        }
    }
}

static NEIGHBOR_AGGREGATORS: [&dyn NeighborAggregator; 3] = [&SumAggregator, &MeanAggregator, &MaxAggregator];

pub fn neighbor_aggregator(name: &str) -> Result<&'static dyn NeighborAggregator> {
    NEIGHBOR_AGGREGATORS
        .iter()
        .copied()
        .find(|a| a.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "neighbor aggregator",
            name: name.to_string(),
            known: neighbor_aggregator_names().join(", "),
        })
}

pub fn neighbor_aggregator_names() -> Vec<&'static str> {
    NEIGHBOR_AGGREGATORS.iter().map(|a| a.name()).collect()
}

/// Combines the per-edge-type intermediate states of one node.
pub trait EdgeTypeAggregator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Factor applied to the sum of `count` per-type terms; the combination
    /// is linear so the same factor scales the backward pass.
    fn scale(&self, count: usize) -> f64;
}

struct SumTypes;
struct MeanTypes;

impl EdgeTypeAggregator for SumTypes {
    fn name(&self) -> &'static str {
        "sum"
    }

    fn scale(&self, _: usize) -> f64 {
        1.0
    }
}

impl EdgeTypeAggregator for MeanTypes {
    fn name(&self) -> &'static str {
        "mean"
    }

    fn scale(&self, count: usize) -> f64 {
        1.0 / count.max(1) as f64
    }
}

static EDGE_TYPE_AGGREGATORS: [&dyn EdgeTypeAggregator; 2] = [&SumTypes, &MeanTypes];

pub fn edge_type_aggregator(name: &str) -> Result<&'static dyn EdgeTypeAggregator> {
    EDGE_TYPE_AGGREGATORS
        .iter()
        .copied()
        .find(|a| a.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "edge-type aggregator",
            name: name.to_string(),
            known: EDGE_TYPE_AGGREGATORS
                .iter()
                .map(|a| a.name())
                .collect::<Vec<_>>()
                .join(", "),
        })
}
