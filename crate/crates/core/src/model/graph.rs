use super::{Adjacency, EdgeType};
use crate::tensor::Tensor;
use crate::window::{cyclical_encode, GraphBuildConfig, TemporalGraph};

/// Edge type, local `(src, dst)` pairs, and the row offsets of both endpoint kinds.
type LocalEdges<'a> = (EdgeType, &'a [(usize, usize)], usize, usize);

/// A [`TemporalGraph`] flattened into model inputs: one row per IP node
/// occurrence and per flow node occurrence across the memory, and eight typed
/// edge lists over those rows.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroGraph {
    /// `[features ‖ flow order encoding]` per flow node.
    pub flow_inputs: Tensor,
    /// `[1 ‖ window position encoding]` per IP node.
    pub ip_inputs: Tensor,
    /// Edge lists indexed by [`EdgeType::index`], as `(src row, dst row)`.
    pub edges: [Vec<(usize, usize)>; 8],
    pub adjacency: [Adjacency; 8],
    pub flow_ids: Vec<u64>,
    /// Rows of the target window's flow nodes.
    pub target_flows: Vec<usize>,
    pub target_labels: Vec<Option<usize>>,
    /// Window index of the target snapshot.
    pub target_window: usize,
    /// Position inside the memory (0 = oldest) of every flow row / IP row.
    pub flow_window: Vec<usize>,
    pub ip_window: Vec<usize>,
}

impl HeteroGraph {
    pub fn from_temporal(g: &TemporalGraph, config: &GraphBuildConfig) -> HeteroGraph {
        let mut flow_off = Vec::with_capacity(g.snapshots.len());
        let mut ip_off = Vec::with_capacity(g.snapshots.len());
        let (mut nf, mut ni) = (0, 0);
        for s in &g.snapshots {
            flow_off.push(nf);
            ip_off.push(ni);
            nf += s.flow_nodes.len();
            ni += s.ip_nodes.len();
        }
        let feature_dim = g
            .snapshots
            .iter()
            .flat_map(|s| s.flow_nodes.first())
            .map(|n| n.features.len())
            .next()
            .unwrap_or(0);

        let mut flow_rows = Vec::with_capacity(nf);
        let mut flow_ids = Vec::with_capacity(nf);
        let mut ip_rows = Vec::with_capacity(ni);
        let mut edges: [Vec<(usize, usize)>; 8] = Default::default();
        let mut flow_window = Vec::with_capacity(nf);
        let mut ip_window = Vec::with_capacity(ni);
        for (pos, s) in g.snapshots.iter().enumerate() {
            let count = s.flow_nodes.len();
            flow_window.extend(std::iter::repeat_n(pos, count));
            ip_window.extend(std::iter::repeat_n(pos, s.ip_nodes.len()));
            for n in &s.flow_nodes {
                let mut row = n.features.clone();
                row.extend(cyclical_encode(n.ordinal, count, config.flow_encoding_dim));
                flow_rows.push(row);
                flow_ids.push(n.flow_id);
            }
            let mut ip_row = vec![1.0];
            ip_row.extend(cyclical_encode(
                g.memory_offset(pos),
                g.window_memory,
                config.window_encoding_dim,
            ));
            ip_rows.extend(std::iter::repeat_n(ip_row, s.ip_nodes.len()));

            let (fo, io) = (flow_off[pos], ip_off[pos]);
            let sp = &s.spatial;
            let lists: [LocalEdges; 6] = [
                (EdgeType::FlowToSrc, &sp.flow_to_src, fo, io),
                (EdgeType::SrcToFlow, &sp.src_to_flow, io, fo),
                (EdgeType::FlowToDst, &sp.flow_to_dst, fo, io),
                (EdgeType::DstToFlow, &sp.dst_to_flow, io, fo),
                (EdgeType::SameSrc, &s.intra_temporal.same_src, fo, fo),
                (EdgeType::SameDst, &s.intra_temporal.same_dst, fo, fo),
            ];
            for (ty, list, so, dof) in lists {
                edges[ty.index()].extend(list.iter().map(|&(a, b)| (a + so, b + dof)));
            }
        }
        for e in &g.inter_ip_edges {
            edges[EdgeType::IpRecurrence.index()]
                .push((ip_off[e.src_window] + e.src_node, ip_off[e.dst_window] + e.dst_node));
        }
        for e in &g.inter_flow_edges {
            edges[EdgeType::FlowRecurrence.index()]
                .push((flow_off[e.src_window] + e.src_node, flow_off[e.dst_window] + e.dst_node));
        }

        let tp = g.target_position();
        let target = g.target();
        let target_flows: Vec<usize> = (0..target.flow_nodes.len()).map(|i| flow_off[tp] + i).collect();
        let target_labels = target.flow_nodes.iter().map(|n| n.label).collect();

        let flow_inputs = Tensor::from_rows(&flow_rows, feature_dim + config.flow_encoding_dim)
            .expect("flow feature vectors share one length");
        let ip_inputs = Tensor::from_rows(&ip_rows, 1 + config.window_encoding_dim).expect("fixed width");
        HeteroGraph::from_parts(
            flow_inputs,
            ip_inputs,
            edges,
            flow_ids,
            target_flows,
            target_labels,
            target.window_index,
        )
        .with_windows(flow_window, ip_window)
    }

    pub fn from_parts(
        flow_inputs: Tensor,
        ip_inputs: Tensor,
        edges: [Vec<(usize, usize)>; 8],
        flow_ids: Vec<u64>,
        target_flows: Vec<usize>,
        target_labels: Vec<Option<usize>>,
        target_window: usize,
    ) -> HeteroGraph {
        let adjacency = std::array::from_fn(|i| Adjacency::from_edges(&edges[i]));
        let (nf, ni) = (flow_inputs.rows(), ip_inputs.rows());
        HeteroGraph {
            flow_window: vec![0; nf],
            ip_window: vec![0; ni],
            flow_inputs,
            ip_inputs,
            edges,
            adjacency,
            flow_ids,
            target_flows,
            target_labels,
            target_window,
        }
    }

    /// Sets the memory position of every row (defaults to all 0).
    pub fn with_windows(mut self, flow_window: Vec<usize>, ip_window: Vec<usize>) -> Self {
        assert_eq!(flow_window.len(), self.num_flows());
        assert_eq!(ip_window.len(), self.num_ips());
        self.flow_window = flow_window;
        self.ip_window = ip_window;
        self
    }

    pub fn window_of(&self, kind: super::NodeKind, row: usize) -> usize {
        match kind {
            super::NodeKind::Flow => self.flow_window[row],
            super::NodeKind::Ip => self.ip_window[row],
        }
    }

    pub fn num_nodes(&self, kind: super::NodeKind) -> usize {
        match kind {
            super::NodeKind::Flow => self.num_flows(),
            super::NodeKind::Ip => self.num_ips(),
        }
    }

    pub fn num_flows(&self) -> usize {
        self.flow_inputs.rows()
    }

    pub fn num_ips(&self) -> usize {
        self.ip_inputs.rows()
    }

    pub fn adjacency(&self, e: EdgeType) -> &Adjacency {
        &self.adjacency[e.index()]
    }

    pub fn target_flow_ids(&self) -> Vec<u64> {
        self.target_flows.iter().map(|&r| self.flow_ids[r]).collect()
    }

    /// Same graph with the temporal edge lists removed.
    pub fn without_temporal_edges(&self) -> HeteroGraph {
        let mut edges = self.edges.clone();
        for e in EdgeType::TEMPORAL {
            edges[e.index()].clear();
        }
        HeteroGraph::from_parts(
            self.flow_inputs.clone(),
            self.ip_inputs.clone(),
            edges,
            self.flow_ids.clone(),
            self.target_flows.clone(),
            self.target_labels.clone(),
            self.target_window,
        )
        .with_windows(self.flow_window.clone(), self.ip_window.clone())
    }

    /// Relabels node rows: new row `flow_perm[i]` holds old flow row `i`,
    /// likewise for IPs. Edges and targets follow their nodes.
    pub fn permuted(&self, flow_perm: &[usize], ip_perm: &[usize]) -> HeteroGraph {
        assert_eq!(flow_perm.len(), self.num_flows());
        assert_eq!(ip_perm.len(), self.num_ips());
        let invert = |p: &[usize]| {
            let mut inv = vec![0; p.len()];
            for (old, &new) in p.iter().enumerate() {
                inv[new] = old;
            }
            inv
        };
        let (finv, iinv) = (invert(flow_perm), invert(ip_perm));
        let flow_inputs = self.flow_inputs.gather_rows(&finv);
        let ip_inputs = self.ip_inputs.gather_rows(&iinv);
        let remap = |kind: super::NodeKind, i: usize| match kind {
            super::NodeKind::Flow => flow_perm[i],
            super::NodeKind::Ip => ip_perm[i],
        };
        let edges = std::array::from_fn(|t| {
            let ty = EdgeType::ALL[t];
            self.edges[t]
                .iter()
                .map(|&(s, d)| (remap(ty.src_kind(), s), remap(ty.dst_kind(), d)))
                .collect()
        });
        let flow_ids = finv.iter().map(|&old| self.flow_ids[old]).collect();
        HeteroGraph::from_parts(
            flow_inputs,
            ip_inputs,
            edges,
            flow_ids,
            self.target_flows.iter().map(|&r| flow_perm[r]).collect(),
            self.target_labels.clone(),
            self.target_window,
        )
        .with_windows(
            finv.iter().map(|&old| self.flow_window[old]).collect(),
            iinv.iter().map(|&old| self.ip_window[old]).collect(),
        )
    }
}
