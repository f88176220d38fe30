//! Shared fixtures and independent reference implementations for the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use pptgnn::flow::{fit_codec, sort_flows, FeatureCodec, FlowRecord};
use pptgnn::model::{HeteroGraph, ModelConfig};
use pptgnn::tensor::Rng;
use pptgnn::train::{chronological_split, prepare_graphs, ChronoSplit};
use pptgnn::window::{assemble_all, build_snapshots, GraphBuildConfig, TemporalGraph};

pub fn flow(id: u64, start: f64, end: f64, src: &str, dst: &str) -> FlowRecord {
    FlowRecord {
        flow_id: id,
        start_time: start,
        end_time: end,
        src_ip: src.into(),
        dst_ip: dst.into(),
        src_port: 40000 + (id % 1000) as u16,
        dst_port: 443,
        protocol: 6,
        in_bytes: 100 + id * 7 % 900,
        out_bytes: 50 + id * 13 % 400,
        in_pkts: 1 + id % 9,
        out_pkts: 1 + id % 5,
        tcp_flags: (id % 256) as u8,
        duration: end - start,
        label: None,
        attack_name: None,
    }
}

/// Up to `max_n` flows over roughly `span` seconds, a small IP pool so that
/// recurrences are common, occasional long flows crossing several windows and
/// exact start-time ties.
pub fn random_flows(rng: &mut Rng, max_n: usize, span: f64) -> Vec<FlowRecord> {
    let n = rng.below(max_n + 1);
    let pool = 2 + rng.below(6);
    let mut flows: Vec<FlowRecord> = (0..n)
        .map(|i| {
            let mut start = rng.uniform(0.0, span);
            if i > 0 && rng.unit() < 0.1 {
                start = (start * 4.0).round() / 4.0;
            }
            let dur = match rng.below(10) {
                0 => rng.uniform(0.0, span),
                1 => 0.0,
                _ => rng.uniform(0.0, span / 20.0),
            };
            let src = format!("10.0.0.{}", rng.below(pool));
            let dst = format!("10.0.1.{}", rng.below(pool));
            let mut f = flow(i as u64 * 3 + 1, start, start + dur, &src, &dst);
            f.label = Some(rng.below(3));
            f
        })
        .collect();
    sort_flows(&mut flows);
    flows
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Node {
    Flow(u64),
    Ip(String),
}

/// `(target window, edge type, (window, node), (window, node))` with window
/// indices on the global grid.
pub type EdgeKey = (usize, &'static str, (usize, Node), (usize, Node));

/// The construction rules applied pair by pair, with no shared code.
pub fn brute_force_edges(flows: &[FlowRecord], cfg: &GraphBuildConfig) -> BTreeSet<EdgeKey> {
    let mut out = BTreeSet::new();
    let Some(first) = flows.first() else {
        return out;
    };
    let origin = first.start_time;
    let lo = |i: usize| origin + i as f64 * cfg.window_size;
    let inside = |t: f64, i: usize| lo(i) <= t && t < lo(i + 1);
    let max_end = flows.iter().map(|f| f.end_time).fold(f64::MIN, f64::max);
    let mut n_windows = 0;
    while lo(n_windows) <= max_end {
        n_windows += 1;
    }
    // members[w]: flows starting or ending in window w
    let members: Vec<Vec<&FlowRecord>> = (0..n_windows)
        .map(|w| {
            flows
                .iter()
                .filter(|f| inside(f.start_time, w) || inside(f.end_time, w))
                .collect()
        })
        .collect();
    let before = |a: &FlowRecord, b: &FlowRecord| (a.start_time, a.flow_id) < (b.start_time, b.flow_id);

    for t in 0..n_windows {
        if members[t].is_empty() {
            continue;
        }
        let memory: Vec<usize> = ((t + 1).saturating_sub(cfg.window_memory)..=t).collect();
        for &w in &memory {
            for f in &members[w] {
                let fl = (w, Node::Flow(f.flow_id));
                let s = (w, Node::Ip(f.src_ip.clone()));
                let d = (w, Node::Ip(f.dst_ip.clone()));
                out.insert((t, "flow_to_src", fl.clone(), s.clone()));
                out.insert((t, "src_to_flow", s, fl.clone()));
                out.insert((t, "flow_to_dst", fl.clone(), d.clone()));
                out.insert((t, "dst_to_flow", d, fl));
            }
            for a in &members[w] {
                for b in &members[w] {
                    if !before(a, b) {
                        continue;
                    }
                    for (name, key) in [
                        (
                            "same_src",
                            (|f: &FlowRecord| f.src_ip.clone()) as fn(&FlowRecord) -> String,
                        ),
                        ("same_dst", |f: &FlowRecord| f.dst_ip.clone()),
                    ] {
                        if key(a) != key(b) {
                            continue;
                        }
                        let between = members[w]
                            .iter()
                            .filter(|h| key(h) == key(a) && before(a, h) && before(h, b))
                            .count();
                        if between < cfg.flow_memory {
                            out.insert((t, name, (w, Node::Flow(a.flow_id)), (w, Node::Flow(b.flow_id))));
                        }
                    }
                }
            }
        }
        for &a in &memory {
            for &b in &memory {
                if a >= b {
                    continue;
                }
                let ips = |w: usize| -> BTreeSet<String> {
                    members[w]
                        .iter()
                        .flat_map(|f| [f.src_ip.clone(), f.dst_ip.clone()])
                        .collect()
                };
                for ip in ips(a).intersection(&ips(b)) {
                    out.insert((t, "ip_recur", (a, Node::Ip(ip.clone())), (b, Node::Ip(ip.clone()))));
                }
                for fa in &members[a] {
                    if members[b].iter().any(|fb| fb.flow_id == fa.flow_id) {
                        out.insert((
                            t,
                            "flow_recur",
                            (a, Node::Flow(fa.flow_id)),
                            (b, Node::Flow(fa.flow_id)),
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Edge set of the library's graphs in the oracle's vocabulary.
pub fn graph_edge_keys(g: &TemporalGraph, out: &mut BTreeSet<EdgeKey>) {
    let t = g.target().window_index;
    let win = |pos: usize| g.snapshots[pos].window_index;
    let flow_node = |pos: usize, i: usize| (win(pos), Node::Flow(g.snapshots[pos].flow_nodes[i].flow_id));
    let ip_node = |pos: usize, i: usize| (win(pos), Node::Ip(g.snapshots[pos].ip_nodes[i].clone()));
    for (pos, s) in g.snapshots.iter().enumerate() {
        let sp = &s.spatial;
        for &(f, i) in &sp.flow_to_src {
            out.insert((t, "flow_to_src", flow_node(pos, f), ip_node(pos, i)));
        }
        for &(i, f) in &sp.src_to_flow {
            out.insert((t, "src_to_flow", ip_node(pos, i), flow_node(pos, f)));
        }
        for &(f, i) in &sp.flow_to_dst {
            out.insert((t, "flow_to_dst", flow_node(pos, f), ip_node(pos, i)));
        }
        for &(i, f) in &sp.dst_to_flow {
            out.insert((t, "dst_to_flow", ip_node(pos, i), flow_node(pos, f)));
        }
        for &(a, b) in &s.intra_temporal.same_src {
            out.insert((t, "same_src", flow_node(pos, a), flow_node(pos, b)));
        }
        for &(a, b) in &s.intra_temporal.same_dst {
            out.insert((t, "same_dst", flow_node(pos, a), flow_node(pos, b)));
        }
    }
    for e in &g.inter_ip_edges {
        out.insert((
            t,
            "ip_recur",
            ip_node(e.src_window, e.src_node),
            ip_node(e.dst_window, e.dst_node),
        ));
    }
    for e in &g.inter_flow_edges {
        out.insert((
            t,
            "flow_recur",
            flow_node(e.src_window, e.src_node),
            flow_node(e.dst_window, e.dst_node),
        ));
    }
}

pub fn builder_edges(flows: &[FlowRecord], cfg: &GraphBuildConfig) -> BTreeSet<EdgeKey> {
    let snaps: Vec<_> = build_snapshots(flows, cfg, |_| Vec::new())
        .unwrap()
        .into_iter()
        .map(Arc::new)
        .collect();
    let mut out = BTreeSet::new();
    for g in assemble_all(&snaps, cfg) {
        graph_edge_keys(&g, &mut out);
    }
    out
}

pub fn graph_config(window_size: f64, window_memory: usize) -> GraphBuildConfig {
    GraphBuildConfig {
        window_size,
        window_memory,
        flow_memory: 20,
        flow_encoding_dim: 4,
        window_encoding_dim: 2,
    }
}

/// Precision/recall first, F1 as their harmonic mean; one pass per class.
pub fn naive_f1(truth: &[usize], pred: &[usize]) -> (f64, f64) {
    let mut classes: Vec<usize> = truth.iter().chain(pred).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return (0.0, 0.0);
    }
    let mut macro_sum = 0.0;
    let mut weighted_sum = 0.0;
    for &c in &classes {
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        let actual = truth.iter().filter(|&&t| t == c).count() as f64;
        let hits = truth.iter().zip(pred).filter(|(&t, &p)| t == c && p == c).count() as f64;
        let p = if predicted > 0.0 { hits / predicted } else { 0.0 };
        let r = if actual > 0.0 { hits / actual } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        macro_sum += f;
        weighted_sum += f * actual;
    }
    let n = truth.len() as f64;
    (weighted_sum / n.max(1.0), macro_sum / classes.len() as f64)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// A model small enough for quick experiments.
pub fn small_model(codec: &FeatureCodec, graph: &GraphBuildConfig, num_classes: usize, hidden: usize) -> ModelConfig {
    ModelConfig {
        hidden_size: hidden,
        classifier_hidden: hidden,
        num_classes,
        feature_dim: codec.feature_dim(),
        flow_encoding_dim: graph.flow_encoding_dim,
        window_encoding_dim: graph.window_encoding_dim,
        ..ModelConfig::default()
    }
}

pub struct Prepared {
    pub split: ChronoSplit,
    pub codec: FeatureCodec,
    pub train: Vec<HeteroGraph>,
    pub val: Vec<HeteroGraph>,
    pub test: Vec<HeteroGraph>,
}

pub fn prepare(flows: &[FlowRecord], ratios: [f64; 3], graph: &GraphBuildConfig) -> Prepared {
    let split = chronological_split(flows, ratios, graph.window_size).unwrap();
    let codec = fit_codec(&split.train).unwrap();
    let build = |f: &[FlowRecord]| prepare_graphs(f, &codec, graph, split.origin).unwrap();
    Prepared {
        train: build(&split.train),
        val: build(&split.val),
        test: build(&split.test),
        codec,
        split,
    }
}

/// Class histogram of labelled flows.
pub fn class_counts(flows: &[FlowRecord]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for f in flows {
        if let Some(l) = f.label {
            *m.entry(l).or_insert(0) += 1;
        }
    }
    m
}
