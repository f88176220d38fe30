mod common;

use std::collections::BTreeMap;

use common::{flow, graph_config, random_flows};
use pptgnn::flow::LabelVocabulary;
use pptgnn::flow::{fit_codec, FlowRecord};
use pptgnn::kv::KvText;
use pptgnn::model::{
    edge_param_name, read_checkpoint_from, write_checkpoint_to, CheckpointMeta, EdgeType, HeteroGraph, ModelConfig,
    NodeKind, NodeState, StGnn, StepKind,
};
use pptgnn::pretrain::{init_pretrain_params, transfer_weights};
use pptgnn::tensor::{Activation, ParameterSet, Rng, Tensor};
use pptgnn::train::prepare_graphs;
use pptgnn::window::{GraphBuildConfig, WindowGrid};

fn identity_model(hidden: usize, agg1: &str) -> StGnn {
    StGnn::new(ModelConfig {
        num_layers: 1,
        hidden_size: hidden,
        classifier_hidden: 2,
        neighbor_aggregator: agg1.into(),
        edge_type_aggregator: "sum".into(),
        activation: Activation::Identity,
        feature_dim: 1,
        flow_encoding_dim: 2,
        window_encoding_dim: 2,
        ..ModelConfig::default()
    })
    .unwrap()
}

/// Every edge weight zeroed, so a test can switch on exactly what it needs.
fn zero_edge_params(model: &StGnn) -> ParameterSet {
    let mut p = model.init_params(&mut Rng::new(0));
    for (name, t) in p.iter_mut() {
        if name.starts_with("layer") {
            t.scale(0.0);
        }
    }
    p
}

fn set_identity(p: &mut ParameterSet, name: &str) {
    let t = p.get_mut(name).unwrap();
    let n = t.rows();
    *t = Tensor::identity(n);
}

fn edges_with(list: &[(EdgeType, Vec<(usize, usize)>)]) -> [Vec<(usize, usize)>; 8] {
    let mut e: [Vec<(usize, usize)>; 8] = Default::default();
    for (t, l) in list {
        e[t.index()] = l.clone();
    }
    e
}

fn state(ip: &[&[f64]], flow: &[&[f64]], d: usize) -> NodeState {
    NodeState {
        ip: Tensor::from_rows(ip, d).unwrap(),
        flow: Tensor::from_rows(flow, d).unwrap(),
    }
}

fn graph(n_flows: usize, n_ips: usize, edges: [Vec<(usize, usize)>; 8]) -> HeteroGraph {
    let ramp =
        |n: usize, k: f64| Tensor::from_vec(n, 3, (0..n * 3).map(|i| ((i as f64 + k) * 0.37).sin()).collect()).unwrap();
    HeteroGraph::from_parts(
        ramp(n_flows, 0.5),
        ramp(n_ips, 1.5),
        edges,
        (0..n_flows as u64).collect(),
        (0..n_flows).collect(),
        vec![None; n_flows],
        0,
    )
}

fn assert_close(a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < 1e-9, "{a:?} vs {b:?}");
    }
}

#[test]
fn temporal_single_edge_copies_neighbour() {
    let model = identity_model(3, "mean");
    let mut p = zero_edge_params(&model);
    set_identity(&mut p, &edge_param_name(0, EdgeType::SameSrc, "W2"));
    let g = graph(2, 0, edges_with(&[(EdgeType::SameSrc, vec![(0, 1)])]));
    let input = state(&[], &[&[0.3, -1.2, 2.5], &[7.0, 8.0, 9.0]], 3);
    let out = model.step(StepKind::Temporal, 0, &g, &p, input).unwrap().output;
    assert_close(out.flow.row(1), &[0.3, -1.2, 2.5]);
    assert_close(out.flow.row(0), &[0.3, -1.2, 2.5]);
}

#[test]
fn temporal_two_edge_types_sum() {
    let model = identity_model(2, "mean");
    let mut p = zero_edge_params(&model);
    set_identity(&mut p, &edge_param_name(0, EdgeType::SameSrc, "W2"));
    set_identity(&mut p, &edge_param_name(0, EdgeType::FlowRecurrence, "W2"));
    // flow 2 gets x from flow 0 (same_src) and y from flow 1 (recurrence)
    let g = graph(
        3,
        0,
        edges_with(&[
            (EdgeType::SameSrc, vec![(0, 2)]),
            (EdgeType::FlowRecurrence, vec![(1, 2)]),
        ]),
    );
    let input = state(&[], &[&[1.0, 2.0], &[10.0, -20.0], &[0.0, 0.0]], 2);
    let out = model.step(StepKind::Temporal, 0, &g, &p, input).unwrap().output;
    assert_close(out.flow.row(2), &[11.0, -18.0]);
}

#[test]
fn spatial_flow_between_two_ips() {
    let model = identity_model(2, "sum");
    let mut p = zero_edge_params(&model);
    for e in [EdgeType::SrcToFlow, EdgeType::DstToFlow] {
        set_identity(&mut p, &edge_param_name(0, e, "W1"));
        set_identity(&mut p, &edge_param_name(0, e, "W2"));
    }
    let g = graph(
        1,
        2,
        edges_with(&[
            (EdgeType::SrcToFlow, vec![(0, 0)]),
            (EdgeType::DstToFlow, vec![(1, 0)]),
            (EdgeType::FlowToSrc, vec![(0, 0)]),
            (EdgeType::FlowToDst, vec![(0, 1)]),
        ]),
    );
    let input = state(&[&[1.0, 2.0], &[3.0, 5.0]], &[&[0.5, -0.5]], 2);
    let out = model.step(StepKind::Spatial, 0, &g, &p, input).unwrap().output;
    // (I·h_f + I·h_src) + (I·h_f + I·h_dst)
    assert_close(out.flow.row(0), &[2.0 * 0.5 + 1.0 + 3.0, 2.0 * -0.5 + 2.0 + 5.0]);
}

#[test]
fn spatial_step_consumes_temporal_output() {
    let model = identity_model(1, "sum");
    let mut p = zero_edge_params(&model);
    set_identity(&mut p, &edge_param_name(0, EdgeType::IpRecurrence, "W2"));
    set_identity(&mut p, &edge_param_name(0, EdgeType::SrcToFlow, "W2"));
    let g = graph(
        1,
        2,
        edges_with(&[
            (EdgeType::IpRecurrence, vec![(0, 1)]),
            (EdgeType::SrcToFlow, vec![(1, 0)]),
        ]),
    );
    let trunk = model.trunk_forward(&g, &p).unwrap();
    let (t, s) = (&trunk.steps[0], &trunk.steps[1]);
    assert_eq!(s.input, t.output);
    // ip 1 takes ip 0's initial state in the temporal step, then feeds the flow
    assert_close(t.output.ip.row(1), t.input.ip.row(0));
    assert_close(s.output.flow.row(0), t.output.ip.row(1));
}

fn random_graphs(seed: u64, cfg: &GraphBuildConfig) -> (Vec<FlowRecord>, Vec<HeteroGraph>, pptgnn::flow::FeatureCodec) {
    let mut rng = Rng::new(seed);
    let mut flows = random_flows(&mut rng, 40, cfg.window_size * 6.0);
    while flows.len() < 5 {
        flows = random_flows(&mut rng, 40, cfg.window_size * 6.0);
    }
    let codec = fit_codec(&flows).unwrap();
    let graphs = prepare_graphs(&flows, &codec, cfg, flows[0].start_time).unwrap();
    (flows, graphs, codec)
}

fn model_for(codec: &pptgnn::flow::FeatureCodec, cfg: &GraphBuildConfig, agg1: &str) -> StGnn {
    StGnn::new(ModelConfig {
        hidden_size: 6,
        classifier_hidden: 5,
        neighbor_aggregator: agg1.into(),
        num_classes: 3,
        feature_dim: codec.feature_dim(),
        flow_encoding_dim: cfg.flow_encoding_dim,
        window_encoding_dim: cfg.window_encoding_dim,
        ..ModelConfig::default()
    })
    .unwrap()
}

fn logits_by_id(model: &StGnn, g: &HeteroGraph, p: &ParameterSet) -> BTreeMap<u64, Vec<f64>> {
    model
        .predict(g, p)
        .unwrap()
        .into_iter()
        .map(|(id, _, l)| (id, l))
        .collect()
}

#[test]
fn relabelling_nodes_leaves_logits_unchanged() {
    let aggs = ["mean", "sum", "max"];
    for seed in 0..50u64 {
        let cfg = graph_config(1.0, 3);
        let (_, graphs, codec) = random_graphs(seed, &cfg);
        let model = model_for(&codec, &cfg, aggs[seed as usize % 3]);
        let params = model.init_params(&mut Rng::new(seed));
        let mut rng = Rng::new(seed ^ 0xabc);
        for g in &graphs {
            let mut fp: Vec<usize> = (0..g.num_flows()).collect();
            let mut ip: Vec<usize> = (0..g.num_ips()).collect();
            rng.shuffle(&mut fp);
            rng.shuffle(&mut ip);
            let a = logits_by_id(&model, g, &params);
            let b = logits_by_id(&model, &g.permuted(&fp, &ip), &params);
            assert_eq!(a.len(), b.len());
            for (id, la) in &a {
                let lb = &b[id];
                assert!(
                    la.iter().zip(lb).all(|(x, y)| (x - y).abs() < 1e-9),
                    "seed {seed} flow {id}"
                );
            }
        }
    }
}

#[test]
fn logits_ignore_windows_outside_memory() {
    let mut checked = 0;
    for seed in 0..50u64 {
        let cfg = graph_config(1.0, 2);
        let (flows, graphs, codec) = random_graphs(seed + 100, &cfg);
        let model = model_for(&codec, &cfg, "mean");
        let params = model.init_params(&mut Rng::new(seed));
        let origin = flows[0].start_time;
        let grid = WindowGrid {
            origin,
            size: cfg.window_size,
        };
        let Some(target) = graphs.iter().rfind(|g| g.target_window >= cfg.window_memory) else {
            continue;
        };
        let oldest = target.target_window + 1 - cfg.window_memory;
        // drop or disturb every flow living only before the memory
        let mut rng = Rng::new(seed);
        let disturbed: Vec<FlowRecord> = flows
            .iter()
            .filter(|f| grid.index_of(f.end_time) >= oldest || rng.unit() < 0.5)
            .map(|f| {
                let mut f = f.clone();
                if grid.index_of(f.end_time) < oldest {
                    f.in_bytes = f.in_bytes * 3 + 17;
                    f.src_ip = format!("{}x", f.src_ip);
                }
                f
            })
            .collect();
        let rebuilt = prepare_graphs(&disturbed, &codec, &cfg, origin).unwrap();
        let same = rebuilt
            .iter()
            .find(|g| g.target_window == target.target_window)
            .unwrap();
        assert_eq!(
            logits_by_id(&model, target, &params),
            logits_by_id(&model, same, &params),
            "seed {seed}"
        );
        checked += 1;
    }
    assert!(checked >= 25, "only {checked} graphs had a window outside memory");
}

#[test]
fn without_temporal_edges_the_temporal_step_is_identity() {
    let cfg = graph_config(1.0, 3);
    let (_, graphs, codec) = random_graphs(7, &cfg);
    let model = model_for(&codec, &cfg, "mean");
    let params = model.init_params(&mut Rng::new(1));
    for g in graphs.iter().map(HeteroGraph::without_temporal_edges) {
        let trunk = model.trunk_forward(&g, &params).unwrap();
        for step in trunk.steps.iter().filter(|s| s.kind == StepKind::Temporal) {
            assert_eq!(step.input, step.output);
            assert!(step.updated(NodeKind::Flow).is_empty());
        }
    }
}

#[test]
fn ips_of_one_window_start_identical() {
    let cfg = graph_config(1.0, 1);
    let flows = vec![flow(1, 0.1, 0.2, "a", "b"), flow(2, 0.3, 0.4, "c", "d")];
    let codec = fit_codec(&flows).unwrap();
    let g = &prepare_graphs(&flows, &codec, &cfg, 0.0).unwrap()[0];
    let model = model_for(&codec, &cfg, "mean");
    let params = model.init_params(&mut Rng::new(4));
    let init = &model.trunk_forward(g, &params).unwrap().initial;
    assert_eq!(init.ip.cols(), 6);
    for r in 1..init.ip.rows() {
        assert_eq!(init.ip.row(r), init.ip.row(0));
    }
}

#[test]
fn empty_target_gives_empty_logits() {
    let model = identity_model(2, "mean");
    let p = model.init_params(&mut Rng::new(0));
    let g = graph(0, 0, Default::default());
    assert!(model.predict(&g, &p).unwrap().is_empty());
    assert_eq!(model.forward(&g, &p).unwrap().logits.rows(), 0);
}

#[test]
fn forward_identical_after_checkpoint_round_trip() {
    let cfg = graph_config(1.0, 3);
    let (_, graphs, codec) = random_graphs(11, &cfg);
    let model = model_for(&codec, &cfg, "mean");
    let params = model.init_params(&mut Rng::new(2));
    let meta = CheckpointMeta {
        model: model.config.clone(),
        graph: cfg.clone(),
        codec_hash: codec.hash(),
        vocabulary: LabelVocabulary::from_names(["Benign", "A", "B"]),
        extra: KvText::new(),
    };
    let mut bytes = Vec::new();
    write_checkpoint_to(&mut bytes, &params, &meta).unwrap();
    let (loaded, meta2) = read_checkpoint_from(&bytes[..]).unwrap();
    assert_eq!(meta2, meta);
    let mut again = Vec::new();
    write_checkpoint_to(&mut again, &loaded, &meta2).unwrap();
    assert_eq!(bytes, again);
    for g in &graphs {
        assert_eq!(logits_by_id(&model, g, &params), logits_by_id(&model, g, &loaded));
    }
}

#[test]
fn transfer_copies_trunk_and_redraws_head() {
    let cfg = graph_config(1.0, 3);
    let (_, _, codec) = random_graphs(3, &cfg);
    let model = model_for(&codec, &cfg, "mean");
    let pre = init_pretrain_params(&model, &mut Rng::new(5));
    let moved = transfer_weights(&pre, &model, &mut Rng::new(6)).unwrap();
    model.check_params(&moved).unwrap();
    for (name, t) in moved.iter() {
        if StGnn::is_trunk_param(name) {
            assert_eq!(t, pre.get(name).unwrap());
        } else {
            assert!(name.starts_with("classifier."));
            assert!(
                pre.iter().all(|(_, p)| p != t),
                "{name} copied from the pre-trained set"
            );
        }
    }
    assert!(moved.names().all(|n| !n.starts_with("scorer.")));

    let mut narrow = model.config.clone();
    narrow.feature_dim += 1;
    let err = transfer_weights(&pre, &StGnn::new(narrow).unwrap(), &mut Rng::new(6)).unwrap_err();
    assert!(err.to_string().contains("encoder.flow.W"), "{err}");
}
