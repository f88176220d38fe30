//! Self-supervised link-prediction pre-training.
//!
//! Every edge of a graph is a positive example of its type; negatives are
//! produced by corrupting one endpoint of a positive edge. A small
//! per-edge-type scorer reads the concatenated final states of both
//! endpoints and predicts whether the edge exists. The trunk learnt this way
//! is later copied into a classifier ([`transfer_weights`]).

mod corpus;
mod negatives;

pub use corpus::{CorpusEntry, CorpusMode, PretrainCorpus};
pub use negatives::{sample_negatives, LinkPredTask, MAX_ATTEMPTS};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EdgeType, HeteroGraph, Mlp, ModelConfig, NodeState, StGnn};
use crate::tensor::{adam_step, binary_cross_entropy, AdamConfig, AdamState, ParameterSet, Rng, Tensor};

pub const DEFAULT_PRETRAIN_LR: f64 = 0.0001;
pub const DEFAULT_NEGATIVE_RATIO: f64 = 1.0;

/// Name prefix of the scorer for `edge`, e.g. `scorer.same_src`.
pub fn scorer_prefix(edge: EdgeType) -> String {
    format!("scorer.{}", edge.name())
}

pub fn scorer(edge: EdgeType, config: &ModelConfig) -> Mlp {
    let h = config.hidden_size;
    Mlp::new(scorer_prefix(edge), vec![2 * h, h, 1], config.activation)
}

/// Trunk plus one scorer per edge type.
pub fn init_pretrain_params(model: &StGnn, rng: &mut Rng) -> ParameterSet {
    let mut p = model.init_trunk(rng);
    for e in EdgeType::ALL {
        scorer(e, &model.config).init(rng, &mut p);
    }
    p
}

/// Summed BCE over every scored edge of one graph.
#[derive(Clone, Debug, Default)]
pub struct LinkOutcome {
    pub loss_sum: f64,
    pub edges: usize,
    pub correct: usize,
    pub grads: ParameterSet,
}

/// Scores positives and negatives of `task` and, if `with_grad`, backpropagates.
pub fn link_loss_and_grad(
    model: &StGnn,
    graph: &HeteroGraph,
    task: &LinkPredTask,
    params: &ParameterSet,
    with_grad: bool,
) -> Result<LinkOutcome> {
    let mut out = LinkOutcome::default();
    if task.num_examples() == 0 {
        return Ok(out);
    }
    let trunk = model.trunk_forward(graph, params)?;
    let fin = trunk.final_state();
    let h = model.config.hidden_size;
    let mut grad_state = with_grad.then(|| NodeState {
        ip: Tensor::zeros(fin.ip.rows(), h),
        flow: Tensor::zeros(fin.flow.rows(), h),
    });
    for e in EdgeType::ALL {
        let (pos, neg) = (&task.positives[e.index()], &task.negatives[e.index()]);
        if pos.is_empty() && neg.is_empty() {
            continue;
        }
        let pairs: Vec<(usize, usize)> = pos.iter().chain(neg).copied().collect();
        let targets: Vec<f64> = std::iter::repeat_n(1.0, pos.len())
            .chain(std::iter::repeat_n(0.0, neg.len()))
            .collect();
        let srcs: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let dsts: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let x = fin
            .get(e.src_kind())
            .gather_rows(&srcs)
            .hcat(&fin.get(e.dst_kind()).gather_rows(&dsts));
        let mlp = scorer(e, &model.config);
        let (logits, trace) = mlp.forward(params, &x)?;
        let (mean, mut dlogits) = binary_cross_entropy(&logits, &targets)?;
        let n = targets.len();
        out.loss_sum += mean * n as f64;
        out.edges += n;
        out.correct += logits
            .data()
            .iter()
            .zip(&targets)
            .filter(|(l, t)| (**l > 0.0) == (**t > 0.5))
            .count();
        if let Some(gs) = grad_state.as_mut() {
            dlogits.scale(n as f64);
            let dx = mlp.backward(params, &trace, &dlogits, &mut out.grads)?;
            let (ds, dd) = dx.split_cols(h);
            for (rows, g, kind) in [(&srcs, &ds, e.src_kind()), (&dsts, &dd, e.dst_kind())] {
                let target = gs.get_mut(kind);
                for (i, &r) in rows.iter().enumerate() {
                    for (o, v) in target.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
            }
        }
    }
    if let Some(gs) = grad_state {
        model.trunk_backward(graph, params, &trunk, gs, &mut out.grads)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub negative_ratio: f64,
    /// Graphs per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 50,
            lr: DEFAULT_PRETRAIN_LR,
            negative_ratio: DEFAULT_NEGATIVE_RATIO,
            batch_size: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainEpoch {
    /// 0 is an evaluation pass before any update.
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub negative_shortfall: usize,
}

#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    /// Trunk and scorers.
    pub params: ParameterSet,
    pub log: Vec<PretrainEpoch>,
}

/// Draws fresh negatives for every graph, one seed per graph from `rng`
/// (sequentially, so the result does not depend on thread scheduling).
fn sample_all(graphs: &[HeteroGraph], ratio: f64, rng: &mut Rng) -> Vec<LinkPredTask> {
    let seeds: Vec<u64> = graphs.iter().map(|_| rng.next_u64()).collect();
    graphs
        .par_iter()
        .zip(seeds)
        .map(|(g, s)| sample_negatives(g, ratio, &mut Rng::new(s)))
        .collect()
}

/// Reduces per-item outcomes in input order.
fn reduce(outcomes: Vec<LinkOutcome>) -> LinkOutcome {
    let mut total = LinkOutcome::default();
    for o in outcomes {
        total.loss_sum += o.loss_sum;
        total.edges += o.edges;
        total.correct += o.correct;
        total.grads.accumulate(&o.grads);
    }
    total
}

/// Trains trunk and scorers on link existence over unlabeled graphs.
pub fn pretrain(model: &StGnn, graphs: &[HeteroGraph], config: &PretrainConfig) -> Result<PretrainOutcome> {
    if graphs.is_empty() {
        return Err(Error::EmptyData("pre-training corpus has no graphs".into()));
    }
    if config.batch_size == 0 || config.lr <= 0.0 {
        return Err(Error::Config("batch_size and lr must be positive".into()));
    }
    let mut rng = Rng::new(config.seed);
    let mut params = init_pretrain_params(model, &mut rng);
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr));
    let mut log = Vec::with_capacity(config.epochs + 1);

    let evaluate = |params: &ParameterSet, tasks: &[LinkPredTask]| -> Result<LinkOutcome> {
        let outs = graphs
            .par_iter()
            .zip(tasks)
            .map(|(g, t)| link_loss_and_grad(model, g, t, params, false))
            .collect::<Result<Vec<_>>>()?;
        Ok(reduce(outs))
    };
    let entry = |epoch, o: &LinkOutcome, tasks: &[LinkPredTask]| PretrainEpoch {
        epoch,
        loss: o.loss_sum / o.edges.max(1) as f64,
        accuracy: o.correct as f64 / o.edges.max(1) as f64,
        negative_shortfall: tasks.iter().map(LinkPredTask::total_shortfall).sum(),
    };

    let tasks = sample_all(graphs, config.negative_ratio, &mut rng);
    log.push(entry(0, &evaluate(&params, &tasks)?, &tasks));

    let mut order: Vec<usize> = (0..graphs.len()).collect();
    for epoch in 1..=config.epochs {
        let tasks = sample_all(graphs, config.negative_ratio, &mut rng);
        rng.shuffle(&mut order);
        let mut epoch_total = LinkOutcome::default();
        for batch in order.chunks(config.batch_size) {
            let outs = batch
                .par_iter()
                .map(|&i| link_loss_and_grad(model, &graphs[i], &tasks[i], &params, true))
                .collect::<Result<Vec<_>>>()?;
            let mut b = reduce(outs);
            if b.edges == 0 {
                continue;
            }
            b.grads.scale(1.0 / b.edges as f64);
            adam_step(&mut params, &b.grads, &mut adam)?;
            epoch_total.loss_sum += b.loss_sum;
            epoch_total.edges += b.edges;
            epoch_total.correct += b.correct;
        }
        log.push(entry(epoch, &epoch_total, &tasks));
    }
    Ok(PretrainOutcome { params, log })
}

/// Copies encoders and all edge-type weights from `pretrained` and draws a
/// fresh classifier head. Scorers are dropped.
pub fn transfer_weights(pretrained: &ParameterSet, target: &StGnn, rng: &mut Rng) -> Result<ParameterSet> {
    let mut out = ParameterSet::new();
    let mut mismatched = Vec::new();
    for (name, r, c) in target.trunk_shapes() {
        match pretrained.get(&name) {
            Some(t) if t.shape() == (r, c) => {
                out.insert(name, t.clone());
            }
            Some(t) => mismatched.push(format!("{name} ({}x{} vs expected {r}x{c})", t.rows(), t.cols())),
            None => mismatched.push(format!("{name} (missing)")),
        }
    }
    if !mismatched.is_empty() {
        return Err(Error::Incompatible(format!(
            "pre-trained trunk does not fit the target model: {}",
            mismatched.join(", ")
        )));
    }
    target.init_classifier(rng, &mut out);
    Ok(out)
}

/// True for parameters that belong to a link scorer.
pub fn is_scorer_param(name: &str) -> bool {
    name.starts_with("scorer.")
}
