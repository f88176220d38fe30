mod common;

use std::collections::HashSet;

use common::{graph_config, median, random_flows, small_model};
use pptgnn::flow::{fit_codec, strip_labels, FlowRecord};
use pptgnn::model::{EdgeType, HeteroGraph, NodeKind, StGnn};
use pptgnn::pretrain::{pretrain, sample_negatives, CorpusEntry, CorpusMode, PretrainConfig, PretrainCorpus};
use pptgnn::synth::{synth_generator, SynthSpec};
use pptgnn::tensor::Rng;
use pptgnn::train::prepare_graphs;
use proptest::prelude::*;

fn graphs_of(flows: &[FlowRecord], window: f64, memory: usize) -> (StGnn, Vec<HeteroGraph>) {
    let cfg = graph_config(window, memory);
    let codec = fit_codec(flows).unwrap();
    let graphs = prepare_graphs(flows, &codec, &cfg, flows[0].start_time).unwrap();
    (StGnn::new(small_model(&codec, &cfg, 3, 8)).unwrap(), graphs)
}

fn synth(name: &str, seed: u64) -> Vec<FlowRecord> {
    let spec = SynthSpec {
        flows: 240,
        duration: 24.0,
        ..SynthSpec::default()
    };
    synth_generator(name)
        .unwrap()
        .generate(&spec, &mut Rng::new(seed))
        .records
}

fn config(epochs: usize, seed: u64) -> PretrainConfig {
    PretrainConfig {
        epochs,
        lr: 0.005,
        batch_size: 4,
        seed,
        ..PretrainConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn negatives_are_fresh_and_type_compatible(
        seed in any::<u64>(),
        ratio in prop::sample::select(vec![0.5, 1.0, 2.0, 5.0]),
        memory in 1usize..4,
    ) {
        let flows = random_flows(&mut Rng::new(seed), 40, 4.0);
        prop_assume!(!flows.is_empty());
        let (_, graphs) = graphs_of(&flows, 1.0, memory);
        for g in &graphs {
            let task = sample_negatives(g, ratio, &mut Rng::new(seed));
            for e in EdgeType::ALL {
                let pos: HashSet<_> = g.edges[e.index()].iter().copied().collect();
                let neg = &task.negatives[e.index()];
                let unique: HashSet<_> = neg.iter().copied().collect();
                prop_assert_eq!(unique.len(), neg.len(), "duplicate {} negative", e.name());
                prop_assert!(unique.is_disjoint(&pos), "{} negative is a positive", e.name());
                let wanted = (ratio * pos.len() as f64).floor() as usize;
                prop_assert_eq!(neg.len() + task.shortfall[e.index()], wanted);
                for &(s, d) in neg {
                    prop_assert!(s < g.num_nodes(e.src_kind()) && d < g.num_nodes(e.dst_kind()));
                    let (ws, wd) = (g.window_of(e.src_kind(), s), g.window_of(e.dst_kind(), d));
                    match e {
                        EdgeType::IpRecurrence | EdgeType::FlowRecurrence => prop_assert!(ws < wd),
                        EdgeType::SameSrc | EdgeType::SameDst => prop_assert!(ws == wd && s < d),
                        _ => prop_assert_eq!(ws, wd),
                    }
                }
            }
        }
    }
}

#[test]
fn labels_never_reach_pretraining() {
    let flows = synth("temporal-pattern", 3);
    let mut shuffled = flows.clone();
    let mut rng = Rng::new(8);
    for f in &mut shuffled {
        f.label = Some(rng.below(3));
    }
    let (model, a) = graphs_of(&flows, 1.0, 2);
    let (_, b) = graphs_of(&shuffled, 1.0, 2);
    let (_, c) = graphs_of(&strip_labels(&flows), 1.0, 2);
    let run = |g: &[HeteroGraph]| pretrain(&model, g, &config(2, 1)).unwrap();
    let (ra, rb, rc) = (run(&a), run(&b), run(&c));
    assert_eq!(ra.params, rb.params);
    assert_eq!(ra.params, rc.params);
    assert_eq!(ra.log, rb.log);
}

#[test]
fn first_epoch_lowers_link_loss() {
    let flows = synth("topology-only", 5);
    let (model, graphs) = graphs_of(&flows, 1.0, 2);
    let mut drops = Vec::new();
    for seed in 0..5 {
        let log = pretrain(&model, &graphs, &config(1, seed)).unwrap().log;
        drops.push(log[0].loss - log[1].loss);
    }
    assert!(median(drops.clone()) > 0.0, "loss drops {drops:?}");
}

#[test]
fn untrained_scorers_are_at_chance() {
    let flows = synth("feature-only", 2);
    let (model, graphs) = graphs_of(&flows, 1.0, 3);
    let accs: Vec<f64> = (0..7)
        .map(|seed| pretrain(&model, &graphs, &config(0, seed)).unwrap().log[0].accuracy)
        .collect();
    let m = median(accs.clone());
    assert!((m - 0.5).abs() <= 0.1, "untrained accuracy {accs:?}");
}

#[test]
fn training_beats_chance_on_structured_traffic() {
    let flows = synth("temporal-pattern", 4);
    let (model, graphs) = graphs_of(&flows, 1.0, 2);
    let log = pretrain(&model, &graphs, &config(15, 0)).unwrap().log;
    let last = log.last().unwrap();
    assert!(last.accuracy > 0.6 && last.loss < log[0].loss, "{log:?}");
    assert!(log.iter().all(|e| e.loss.is_finite()));
}

#[test]
fn pretraining_is_reproducible() {
    let flows = synth("topology-only", 6);
    let (model, graphs) = graphs_of(&flows, 1.0, 2);
    let a = pretrain(&model, &graphs, &config(2, 42)).unwrap();
    let b = pretrain(&model, &graphs, &config(2, 42)).unwrap();
    assert_eq!(a.params, b.params);
    let c = pretrain(&model, &graphs, &config(2, 43)).unwrap();
    assert_ne!(a.params, c.params);
    for name in a.params.names() {
        assert!(StGnn::is_trunk_param(name) || name.starts_with("scorer."), "{name}");
    }
}

#[test]
fn negative_pools_follow_window_memory() {
    // one window only: recurrence types have no positives and hence no negatives
    let flows = random_flows(&mut Rng::new(1), 30, 0.9);
    let (_, graphs) = graphs_of(&flows, 1.0, 3);
    for g in &graphs {
        let task = sample_negatives(g, 3.0, &mut Rng::new(0));
        assert!(task.negatives[EdgeType::IpRecurrence.index()].is_empty());
        assert!(task.negatives[EdgeType::FlowRecurrence.index()].is_empty());
        assert!(g.num_nodes(NodeKind::Flow) > 0);
    }
}

#[test]
fn corpus_isolation_is_enforced() {
    let entry = |id: &str| CorpusEntry {
        id: id.into(),
        path: format!("{id}.csv"),
    };
    let err = PretrainCorpus::new(CorpusMode::OutOfContext, "lab", vec![entry("campus"), entry("lab")]).unwrap_err();
    assert!(err.to_string().contains("lab"));
    assert!(PretrainCorpus::new(CorpusMode::InContext, "lab", vec![entry("campus")]).is_err());
    assert!(PretrainCorpus::new(CorpusMode::OutOfContext, "lab", vec![]).is_err());

    let ok = PretrainCorpus::new(CorpusMode::OutOfContext, "lab", vec![entry("campus"), entry("isp")]).unwrap();
    assert!(!ok.contains("lab"));
    assert_eq!(PretrainCorpus::from_manifest(&ok.manifest()).unwrap(), ok);
}
