//! Sliding-window construction of heterogeneous flow graphs.
//!
//! Time is tiled into non-overlapping windows of `window_size` seconds
//! starting at the earliest flow start. A flow belongs to every window that
//! contains its start or its end, so a long flow shows up in (at most) two
//! windows and is absent from the windows it merely spans. Each window holds
//! IP nodes and flow nodes joined by four spatial edge types; flows sharing a
//! source (or destination) IP are chained in start order, each flow receiving
//! edges from at most `flow_memory` immediate predecessors.

mod dump;
mod encoding;
mod temporal;

pub use dump::{dump_graph, dump_snapshot};
pub use encoding::cyclical_encode;
pub use temporal::{assemble_all, assemble_temporal_graph, InterEdge, TemporalGraph};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::flow::{precedes, FlowRecord};
use crate::kv::KvText;

#[derive(Clone, Debug, PartialEq)]
pub struct GraphBuildConfig {
    /// Seconds, > 0.
    pub window_size: f64,
    /// Windows visible to a prediction, the target window included.
    pub window_memory: usize,
    /// Max predecessors per flow in each intra-window chain.
    pub flow_memory: usize,
    pub flow_encoding_dim: usize,
    pub window_encoding_dim: usize,
}

impl Default for GraphBuildConfig {
    fn default() -> Self {
        GraphBuildConfig {
            window_size: 5.0,
            window_memory: 5,
            flow_memory: 20,
            flow_encoding_dim: 30,
            window_encoding_dim: 16,
        }
    }
}

impl GraphBuildConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_size.is_finite() && self.window_size > 0.0) {
            return Err(Error::Config(format!(
                "window_size must be > 0, got {}",
                self.window_size
            )));
        }
        if self.window_memory == 0 || self.flow_memory == 0 {
            return Err(Error::Config("window_memory and flow_memory must be >= 1".into()));
        }
        for (name, d) in [
            ("flow_encoding_dim", self.flow_encoding_dim),
            ("window_encoding_dim", self.window_encoding_dim),
        ] {
            if d == 0 || d % 2 != 0 {
                return Err(Error::Config(format!("{name} must be a positive even number, got {d}")));
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvText {
        let mut kv = KvText::new();
        kv.set("window_size", self.window_size);
        kv.set("window_memory", self.window_memory);
        kv.set("flow_memory", self.flow_memory);
        kv.set("flow_encoding_dim", self.flow_encoding_dim);
        kv.set("window_encoding_dim", self.window_encoding_dim);
        kv
    }

    /// Overrides fields named in `kv`; unknown keys are an error.
    pub fn apply_kv(&mut self, kv: &KvText) -> Result<()> {
        for (k, _) in kv.iter() {
            match k {
                "window_size" => self.window_size = kv.require_value(k)?,
                "window_memory" => self.window_memory = kv.require_value(k)?,
                "flow_memory" => self.flow_memory = kv.require_value(k)?,
                "flow_encoding_dim" => self.flow_encoding_dim = kv.require_value(k)?,
                "window_encoding_dim" => self.window_encoding_dim = kv.require_value(k)?,
                other => return Err(Error::Config(format!("unknown graph setting `{other}`"))),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowNode {
    pub flow_id: u64,
    pub start_time: f64,
    /// Position in the window's `(start_time, flow_id)` order.
    pub ordinal: usize,
    pub features: Vec<f64>,
    pub label: Option<usize>,
    /// Index into [`WindowSnapshot::ip_nodes`].
    pub src_ip: usize,
    pub dst_ip: usize,
}

/// Spatial edges as `(source index, destination index)` pairs. Flow indices
/// refer to `flow_nodes`, IP indices to `ip_nodes`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpatialEdges {
    pub flow_to_src: Vec<(usize, usize)>,
    pub src_to_flow: Vec<(usize, usize)>,
    pub flow_to_dst: Vec<(usize, usize)>,
    pub dst_to_flow: Vec<(usize, usize)>,
}

/// Flow → flow edges, earlier flow first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntraTemporalEdges {
    pub same_src: Vec<(usize, usize)>,
    pub same_dst: Vec<(usize, usize)>,
}

impl IntraTemporalEdges {
    pub fn is_empty(&self) -> bool {
        self.same_src.is_empty() && self.same_dst.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSnapshot {
    pub window_index: usize,
    pub window_start: f64,
    pub window_end: f64,
    pub ip_nodes: Vec<String>,
    pub flow_nodes: Vec<FlowNode>,
    pub spatial: SpatialEdges,
    pub intra_temporal: IntraTemporalEdges,
}

impl WindowSnapshot {
    pub fn is_empty(&self) -> bool {
        self.flow_nodes.is_empty()
    }
}

/// Window grid anchored at `origin`. Window `i` covers
/// `[origin + i·size, origin + (i+1)·size)`, and membership is decided
/// against exactly those computed bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowGrid {
    pub origin: f64,
    pub size: f64,
}

impl WindowGrid {
    pub fn start(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.size
    }

    pub fn end(&self, i: usize) -> f64 {
        self.start(i + 1)
    }

    /// Index of the window containing `t` (`t ≥ origin`).
    pub fn index_of(&self, t: f64) -> usize {
        let mut i = ((t - self.origin) / self.size).floor().max(0.0) as usize;
        while i > 0 && t < self.start(i) {
            i -= 1;
        }
        while t >= self.start(i + 1) {
            i += 1;
        }
        i
    }
}

/// Builds one snapshot per window, including intra-window temporal edges.
///
/// `flows` must be sorted by `(start_time, flow_id)`. `encode` produces the
/// feature vector of each flow; a flow present in two windows carries the
/// same vector in both.
pub fn build_snapshots<F>(flows: &[FlowRecord], config: &GraphBuildConfig, encode: F) -> Result<Vec<WindowSnapshot>>
where
    F: Fn(&FlowRecord) -> Vec<f64>,
{
    config.validate()?;
    if let Some(pos) = flows.windows(2).position(|w| !precedes(&w[0], &w[1])) {
        return Err(Error::Unsorted(pos + 1));
    }
    let Some(first) = flows.first() else {
        return Ok(Vec::new());
    };
    build_on_grid(flows, config, first.start_time, encode)
}

/// Like [`build_snapshots`] but on a grid anchored at `origin` instead of the
/// first flow, so that separately built segments of one capture share window
/// boundaries and indices. Windows before the first flow are empty.
pub fn build_snapshots_on_grid<F>(
    flows: &[FlowRecord],
    config: &GraphBuildConfig,
    origin: f64,
    encode: F,
) -> Result<Vec<WindowSnapshot>>
where
    F: Fn(&FlowRecord) -> Vec<f64>,
{
    config.validate()?;
    if let Some(pos) = flows.windows(2).position(|w| !precedes(&w[0], &w[1])) {
        return Err(Error::Unsorted(pos + 1));
    }
    match flows.first() {
        None => Ok(Vec::new()),
        Some(f) if f.start_time < origin => Err(Error::Config(format!(
            "grid origin {origin} lies after the first flow start {}",
            f.start_time
        ))),
        Some(_) => build_on_grid(flows, config, origin, encode),
    }
}

fn build_on_grid<F>(
    flows: &[FlowRecord],
    config: &GraphBuildConfig,
    origin: f64,
    encode: F,
) -> Result<Vec<WindowSnapshot>>
where
    F: Fn(&FlowRecord) -> Vec<f64>,
{
    let grid = WindowGrid {
        origin,
        size: config.window_size,
    };
    let max_end = flows.iter().map(|f| f.end_time).fold(f64::NEG_INFINITY, f64::max);
    let n_windows = grid.index_of(max_end) + 1;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_windows];
    for (i, f) in flows.iter().enumerate() {
        let s = grid.index_of(f.start_time);
        let e = grid.index_of(f.end_time);
        members[s].push(i);
        if e != s {
            members[e].push(i);
        }
    }

    let features: Vec<Vec<f64>> = flows.iter().map(&encode).collect();
    let snapshots = members
        .iter()
        .enumerate()
        .map(|(w, idx)| {
            let mut snap = spatial_snapshot(w, &grid, flows, &features, idx);
            add_intra_temporal_edges(&mut snap, config);
            snap
        })
        .collect();
    Ok(snapshots)
}

fn spatial_snapshot(
    window: usize,
    grid: &WindowGrid,
    flows: &[FlowRecord],
    features: &[Vec<f64>],
    members: &[usize],
) -> WindowSnapshot {
    let mut ip_nodes: Vec<String> = Vec::new();
    let mut ip_index: HashMap<&str, usize> = HashMap::new();
    let mut flow_nodes = Vec::with_capacity(members.len());
    let mut spatial = SpatialEdges::default();
    for (ordinal, &fi) in members.iter().enumerate() {
        let f = &flows[fi];
        let src = intern(&mut ip_index, &mut ip_nodes, &f.src_ip);
        let dst = intern(&mut ip_index, &mut ip_nodes, &f.dst_ip);
        spatial.flow_to_src.push((ordinal, src));
        spatial.src_to_flow.push((src, ordinal));
        spatial.flow_to_dst.push((ordinal, dst));
        spatial.dst_to_flow.push((dst, ordinal));
        flow_nodes.push(FlowNode {
            flow_id: f.flow_id,
            start_time: f.start_time,
            ordinal,
            features: features[fi].clone(),
            label: f.label,
            src_ip: src,
            dst_ip: dst,
        });
    }
    WindowSnapshot {
        window_index: window,
        window_start: grid.start(window),
        window_end: grid.end(window),
        ip_nodes,
        flow_nodes,
        spatial,
        intra_temporal: IntraTemporalEdges::default(),
    }
}

fn intern<'a>(index: &mut HashMap<&'a str, usize>, nodes: &mut Vec<String>, key: &'a str) -> usize {
    *index.entry(key).or_insert_with(|| {
        nodes.push(key.to_string());
        nodes.len() - 1
    })
}

/// Rebuilds the same-source and same-destination chains of a snapshot.
///
/// Flow nodes are already in temporal order, so each flow receives edges
/// from its (at most `flow_memory`) nearest predecessors sharing the IP.
/// Edge lists are sorted by `(source, destination)`.
pub fn add_intra_temporal_edges(snapshot: &mut WindowSnapshot, config: &GraphBuildConfig) {
    let chains = |key: fn(&FlowNode) -> usize| {
        let mut by_ip: Vec<Vec<usize>> = vec![Vec::new(); snapshot.ip_nodes.len()];
        for n in &snapshot.flow_nodes {
            by_ip[key(n)].push(n.ordinal);
        }
        let mut edges = Vec::new();
        for chain in by_ip {
            for (j, &dst) in chain.iter().enumerate() {
                let lo = j.saturating_sub(config.flow_memory);
                edges.extend(chain[lo..j].iter().map(|&src| (src, dst)));
            }
        }
        edges.sort_unstable();
        edges
    };
    snapshot.intra_temporal = IntraTemporalEdges {
        same_src: chains(|n| n.src_ip),
        same_dst: chains(|n| n.dst_ip),
    };
}
