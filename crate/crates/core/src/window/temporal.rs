use std::collections::HashMap;
use std::sync::Arc;

use super::{GraphBuildConfig, WindowSnapshot};

/// Edge between two occurrences of the same key in different windows.
/// Window positions index [`TemporalGraph::snapshots`]; `src_window < dst_window`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InterEdge {
    pub src_window: usize,
    pub src_node: usize,
    pub dst_window: usize,
    pub dst_node: usize,
}

/// A target window together with the preceding windows of its memory and the
/// recurrence edges joining them.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalGraph {
    /// Oldest first; the last entry is the target window.
    pub snapshots: Vec<Arc<WindowSnapshot>>,
    pub inter_ip_edges: Vec<InterEdge>,
    pub inter_flow_edges: Vec<InterEdge>,
    pub window_memory: usize,
}

impl TemporalGraph {
    /// Position of the target window inside `snapshots`.
    pub fn target_position(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn target(&self) -> &WindowSnapshot {
        self.snapshots.last().expect("temporal graph has at least one snapshot")
    }

    /// Offset of snapshot `pos` inside the memory, `window_memory − 1` for
    /// the target and decreasing towards older windows.
    pub fn memory_offset(&self, pos: usize) -> usize {
        self.window_memory - 1 - (self.target_position() - pos)
    }

    pub fn num_ip_nodes(&self) -> usize {
        self.snapshots.iter().map(|s| s.ip_nodes.len()).sum()
    }

    pub fn num_flow_nodes(&self) -> usize {
        self.snapshots.iter().map(|s| s.flow_nodes.len()).sum()
    }

    pub fn has_temporal_edges(&self) -> bool {
        !self.inter_ip_edges.is_empty()
            || !self.inter_flow_edges.is_empty()
            || self.snapshots.iter().any(|s| !s.intra_temporal.is_empty())
    }

    /// Same nodes and spatial edges, every temporal edge list emptied.
    pub fn without_temporal_edges(&self) -> TemporalGraph {
        TemporalGraph {
            snapshots: self
                .snapshots
                .iter()
                .map(|s| {
                    let mut s = (**s).clone();
                    s.intra_temporal = Default::default();
                    Arc::new(s)
                })
                .collect(),
            inter_ip_edges: Vec::new(),
            inter_flow_edges: Vec::new(),
            window_memory: self.window_memory,
        }
    }
}

/// Joins snapshots `max(0, t − window_memory + 1) ..= t`.
///
/// Every occurrence of an IP key (or flow id) is connected to all of its
/// later occurrences inside the memory. Edge lists are sorted by
/// `(src_window, src_node, dst_window, dst_node)`.
pub fn assemble_temporal_graph(
    snapshots: &[Arc<WindowSnapshot>],
    t: usize,
    config: &GraphBuildConfig,
) -> TemporalGraph {
    assert!(t < snapshots.len(), "target window {t} out of range");
    let lo = (t + 1).saturating_sub(config.window_memory);
    let window: Vec<Arc<WindowSnapshot>> = snapshots[lo..=t].to_vec();

    let mut ip_seen: HashMap<&str, Vec<(usize, usize)>> = HashMap::new();
    let mut flow_seen: HashMap<u64, Vec<(usize, usize)>> = HashMap::new();
    for (w, snap) in window.iter().enumerate() {
        for (i, key) in snap.ip_nodes.iter().enumerate() {
            ip_seen.entry(key.as_str()).or_default().push((w, i));
        }
        for (i, node) in snap.flow_nodes.iter().enumerate() {
            flow_seen.entry(node.flow_id).or_default().push((w, i));
        }
    }
    let recurrences = |occurrences: Vec<Vec<(usize, usize)>>| {
        let mut edges = Vec::new();
        for occ in occurrences {
            for (a, &(wa, ia)) in occ.iter().enumerate() {
                for &(wb, ib) in &occ[a + 1..] {
                    debug_assert!(wa < wb);
                    edges.push(InterEdge {
                        src_window: wa,
                        src_node: ia,
                        dst_window: wb,
                        dst_node: ib,
                    });
                }
            }
        }
        edges.sort_unstable();
        edges
    };
    let inter_ip_edges = recurrences(ip_seen.into_values().collect());
    let inter_flow_edges = recurrences(flow_seen.into_values().collect());
    TemporalGraph {
        snapshots: window,
        inter_ip_edges,
        inter_flow_edges,
        window_memory: config.window_memory,
    }
}

/// One temporal graph per window that has at least one flow node.
pub fn assemble_all(snapshots: &[Arc<WindowSnapshot>], config: &GraphBuildConfig) -> Vec<TemporalGraph> {
    (0..snapshots.len())
        .filter(|&t| !snapshots[t].is_empty())
        .map(|t| assemble_temporal_graph(snapshots, t, config))
        .collect()
}
