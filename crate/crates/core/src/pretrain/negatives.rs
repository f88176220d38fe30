use std::collections::HashSet;

use crate::model::{EdgeType, HeteroGraph, NodeKind};
use crate::tensor::Rng;

/// Corruption attempts per wanted negative before giving up on it.
pub const MAX_ATTEMPTS: usize = 100;

/// Positive and sampled negative edges of one graph, per edge type
/// (indexed by [`EdgeType::index`]).
#[derive(Clone, Debug, PartialEq)]
pub struct LinkPredTask {
    pub positives: [Vec<(usize, usize)>; 8],
    pub negatives: [Vec<(usize, usize)>; 8],
    /// Wanted minus obtained negatives.
    pub shortfall: [usize; 8],
    pub negative_ratio: f64,
}

impl LinkPredTask {
    pub fn num_examples(&self) -> usize {
        self.positives.iter().chain(&self.negatives).map(Vec::len).sum()
    }

    pub fn total_shortfall(&self) -> usize {
        self.shortfall.iter().sum()
    }

    /// Edge types that received fewer negatives than asked for.
    pub fn shortfall_report(&self) -> Vec<(EdgeType, usize)> {
        EdgeType::ALL
            .into_iter()
            .filter(|e| self.shortfall[e.index()] > 0)
            .map(|e| (e, self.shortfall[e.index()]))
            .collect()
    }
}

/// Rows of one node kind sorted by (memory position, row).
struct KindIndex {
    rows: Vec<usize>,
    /// `rows[starts[w]..starts[w + 1]]` are the rows in memory position `w`.
    starts: Vec<usize>,
}

impl KindIndex {
    fn new(graph: &HeteroGraph, kind: NodeKind) -> Self {
        let n = graph.num_nodes(kind);
        let mut rows: Vec<usize> = (0..n).collect();
        rows.sort_by_key(|&r| (graph.window_of(kind, r), r));
        let windows = rows.last().map_or(0, |&r| graph.window_of(kind, r) + 1);
        let starts = (0..=windows)
            .map(|w| rows.partition_point(|&r| graph.window_of(kind, r) < w))
            .collect();
        KindIndex { rows, starts }
    }

    fn window(&self, w: usize) -> &[usize] {
        let lo = self.starts.get(w).copied().unwrap_or(self.rows.len());
        let hi = self.starts.get(w + 1).copied().unwrap_or(self.rows.len());
        &self.rows[lo..hi]
    }

    fn before(&self, w: usize) -> &[usize] {
        &self.rows[..self.starts.get(w).copied().unwrap_or(self.rows.len())]
    }

    fn after(&self, w: usize) -> &[usize] {
        &self.rows[self.starts.get(w + 1).copied().unwrap_or(self.rows.len())..]
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Relation {
    /// Both endpoints in one window (spatial types).
    SameWindow,
    /// Same window, source earlier in flow order than destination.
    Forward,
    /// Source window strictly older than destination window.
    Later,
}

fn relation(e: EdgeType) -> Relation {
    match e {
        EdgeType::SameSrc | EdgeType::SameDst => Relation::Forward,
        EdgeType::IpRecurrence | EdgeType::FlowRecurrence => Relation::Later,
        _ => Relation::SameWindow,
    }
}

/// Candidate replacements for one endpoint of `e` given the other, fixed, endpoint.
fn candidates(index: &KindIndex, e: EdgeType, fixed_row: usize, fixed_window: usize, replace_dst: bool) -> &[usize] {
    match (relation(e), replace_dst) {
        (Relation::SameWindow, _) => index.window(fixed_window),
        (Relation::Forward, true) => {
            let w = index.window(fixed_window);
            &w[w.partition_point(|&r| r <= fixed_row)..]
        }
        (Relation::Forward, false) => {
            let w = index.window(fixed_window);
            &w[..w.partition_point(|&r| r < fixed_row)]
        }
        (Relation::Later, true) => index.after(fixed_window),
        (Relation::Later, false) => index.before(fixed_window),
    }
}

/// Endpoint corruption: for each wanted negative, pick a positive edge,
/// replace one endpoint by a uniformly drawn type-compatible node, and reject
/// the result if it is a positive or an already drawn negative. Rows of one
/// window are taken to be in temporal order, as [`HeteroGraph::from_temporal`]
/// lays them out.
pub fn sample_negatives(graph: &HeteroGraph, ratio: f64, rng: &mut Rng) -> LinkPredTask {
    let index = [
        KindIndex::new(graph, NodeKind::Ip),
        KindIndex::new(graph, NodeKind::Flow),
    ];
    let idx = |k: NodeKind| match k {
        NodeKind::Ip => &index[0],
        NodeKind::Flow => &index[1],
    };
    let mut task = LinkPredTask {
        positives: graph.edges.clone(),
        negatives: Default::default(),
        shortfall: [0; 8],
        negative_ratio: ratio,
    };
    for e in EdgeType::ALL {
        let pos = &graph.edges[e.index()];
        let wanted = (ratio * pos.len() as f64).floor() as usize;
        if wanted == 0 {
            continue;
        }
        let positive: HashSet<(usize, usize)> = pos.iter().copied().collect();
        let mut drawn = HashSet::with_capacity(wanted);
        let out = &mut task.negatives[e.index()];
        for _ in 0..wanted {
            for _ in 0..MAX_ATTEMPTS {
                let (s, d) = pos[rng.below(pos.len())];
                let replace_dst = rng.below(2) == 0;
                let (kind, fixed) = if replace_dst {
                    (e.dst_kind(), s)
                } else {
                    (e.src_kind(), d)
                };
                let fixed_kind = if replace_dst { e.src_kind() } else { e.dst_kind() };
                let pool = candidates(idx(kind), e, fixed, graph.window_of(fixed_kind, fixed), replace_dst);
                if pool.is_empty() {
                    continue;
                }
                let pick = pool[rng.below(pool.len())];
                let cand = if replace_dst { (s, pick) } else { (pick, d) };
                if !positive.contains(&cand) && drawn.insert(cand) {
                    out.push(cand);
                    break;
                }
            }
        }
        task.shortfall[e.index()] = wanted - out.len();
    }
    task
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn graph(edges: [Vec<(usize, usize)>; 8], flows: usize, ips: usize) -> HeteroGraph {
        HeteroGraph::from_parts(
            Tensor::zeros(flows, 1),
            Tensor::zeros(ips, 1),
            edges,
            (0..flows as u64).collect(),
            vec![],
            vec![],
            0,
        )
    }

    #[test]
    fn saturated_bipartite_block_has_no_negatives() {
        // 2 flows × 2 IPs, every flow→IP pair present.
        let mut edges: [Vec<(usize, usize)>; 8] = Default::default();
        edges[EdgeType::FlowToSrc.index()] = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
        let t = sample_negatives(&graph(edges, 2, 2), 1.0, &mut Rng::new(1));
        assert!(t.negatives[EdgeType::FlowToSrc.index()].is_empty());
        assert_eq!(t.shortfall_report(), vec![(EdgeType::FlowToSrc, 4)]);
    }

    #[test]
    fn ten_positives_give_ten_fresh_negatives() {
        let mut edges: [Vec<(usize, usize)>; 8] = Default::default();
        edges[EdgeType::FlowToDst.index()] = (0..10).map(|f| (f, f % 3)).collect();
        let g = graph(edges, 10, 8);
        let t = sample_negatives(&g, 1.0, &mut Rng::new(4));
        let neg = &t.negatives[EdgeType::FlowToDst.index()];
        assert_eq!(neg.len(), 10);
        let pos: HashSet<_> = g.edges[EdgeType::FlowToDst.index()].iter().collect();
        let uniq: HashSet<_> = neg.iter().collect();
        assert_eq!(uniq.len(), 10);
        assert!(neg.iter().all(|e| !pos.contains(e)));
        assert_eq!(t, sample_negatives(&g, 1.0, &mut Rng::new(4)));
    }

    #[test]
    fn inter_window_negatives_point_forward() {
        let mut edges: [Vec<(usize, usize)>; 8] = Default::default();
        edges[EdgeType::FlowRecurrence.index()] = vec![(0, 3), (1, 4)];
        edges[EdgeType::SameSrc.index()] = vec![(3, 4)];
        let g = graph(edges, 6, 0).with_windows(vec![0, 0, 0, 1, 1, 1], vec![]);
        for seed in 0..20 {
            let t = sample_negatives(&g, 1.0, &mut Rng::new(seed));
            for &(s, d) in &t.negatives[EdgeType::FlowRecurrence.index()] {
                assert!(g.flow_window[s] < g.flow_window[d]);
            }
            for &(s, d) in &t.negatives[EdgeType::SameSrc.index()] {
                assert_eq!(g.flow_window[s], g.flow_window[d]);
                assert!(s < d);
            }
        }
    }
}
