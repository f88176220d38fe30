//! Supervised training, evaluation and the experiment harnesses built on them.

mod ablation;
mod baseline;
mod fewshot;
mod metrics;
mod report;
mod split;

pub use ablation::{ablation_suite, AblationRow, AblationVariant};
pub use baseline::mlp_baseline;
pub use fewshot::{
    fewshot, undersample, FewShotOutcome, FewShotPlan, FewShotRow, PretrainMode, Undersampling, FEWSHOT_FRACTIONS,
};
pub use metrics::{f1_scores, to_binary, ClassScore, ConfusionMatrix, F1Summary, MetricsReport};
pub use report::{
    ablation_csv, confusion_csv, epoch_log_csv, fewshot_csv, metrics_csv, metrics_summary, per_class_csv,
    pretrain_log_csv, timing_csv, TimingEntry,
};
pub use split::{chronological_split, ChronoSplit};

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{FeatureCodec, FlowRecord};
use crate::model::{HeteroGraph, StGnn};
use crate::tensor::{adam_step, class_weights, AdamConfig, AdamState, ParameterSet, Rng};
use crate::window::{assemble_all, build_snapshots_on_grid, GraphBuildConfig};

pub const SCRATCH_EPOCHS: usize = 200;
pub const SCRATCH_LR: f64 = 0.001;
pub const FINETUNE_EPOCHS: usize = 50;
pub const FINETUNE_LR: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Inverse-frequency class weights from the training targets.
    pub weighted_loss: bool,
    pub seed: u64,
    /// Temporal graphs per optimizer step.
    pub batch_size: usize,
}

impl TrainConfig {
    pub fn scratch() -> Self {
        TrainConfig {
            epochs: SCRATCH_EPOCHS,
            lr: SCRATCH_LR,
            weighted_loss: true,
            seed: 0,
            batch_size: 8,
        }
    }

    pub fn finetune() -> Self {
        TrainConfig {
            epochs: FINETUNE_EPOCHS,
            lr: FINETUNE_LR,
            ..Self::scratch()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::Config("epochs, batch_size and lr must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::scratch()
    }
}

/// One model input per non-empty window of `flows`, on the grid anchored at `origin`.
pub fn prepare_graphs(
    flows: &[FlowRecord],
    codec: &FeatureCodec,
    config: &GraphBuildConfig,
    origin: f64,
) -> Result<Vec<HeteroGraph>> {
    let snapshots: Vec<_> = build_snapshots_on_grid(flows, config, origin, |r| codec.encode(r))?
        .into_iter()
        .map(Arc::new)
        .collect();
    Ok(assemble_all(&snapshots, config)
        .par_iter()
        .map(|g| HeteroGraph::from_temporal(g, config))
        .collect())
}

pub fn target_labels(graphs: &[HeteroGraph]) -> Vec<usize> {
    graphs
        .iter()
        .flat_map(|g| g.target_labels.iter().flatten().copied())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean weighted cross-entropy over the epoch's labelled targets.
    pub train_loss: f64,
    pub val_macro_f1: Option<f64>,
    /// Whether this epoch became the selected checkpoint.
    pub selected: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the selected epoch.
    pub params: ParameterSet,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    /// Wall-clock seconds; kept out of every deterministic artifact.
    pub seconds: f64,
}

/// Adam on (optionally class-weighted) cross-entropy over target-window
/// labels. The epoch with the best validation macro F1 is kept; without
/// labelled validation targets the last epoch is.
pub fn train(
    model: &StGnn,
    train_graphs: &[HeteroGraph],
    val_graphs: &[HeteroGraph],
    init: ParameterSet,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    model.check_params(&init)?;
    let labels = target_labels(train_graphs);
    if labels.is_empty() {
        return Err(Error::EmptyData("training split has no labelled target flows".into()));
    }
    let weights = config
        .weighted_loss
        .then(|| class_weights(&labels, model.config.num_classes));
    let has_val = !target_labels(val_graphs).is_empty();

    let started = Instant::now();
    let mut rng = Rng::new(config.seed);
    let mut params = init;
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr));
    let mut best: Option<(f64, usize, ParameterSet)> = None;
    let mut log = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_graphs.len()).collect();
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let (mut loss_sum, mut count) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let outs = batch
                .par_iter()
                .map(|&i| model.loss_and_grad(&train_graphs[i], &params, weights.as_deref()))
                .collect::<Result<Vec<_>>>()?;
            let mut grads = ParameterSet::new();
            let mut n = 0;
            for (l, k, g) in outs {
                loss_sum += l;
                n += k;
                grads.accumulate(&g);
            }
            if n == 0 {
                continue;
            }
            count += n;
            grads.scale(1.0 / n as f64);
            adam_step(&mut params, &grads, &mut adam)?;
        }
        let val = if has_val {
            Some(evaluate(model, &params, val_graphs)?.multiclass_macro_f1())
        } else {
            None
        };
        let score = val.unwrap_or(f64::NEG_INFINITY);
        let selected = match &best {
            None => true,
            Some((b, _, _)) => has_val && score > *b,
        } || !has_val;
        if selected {
            best = Some((score, epoch, params.clone()));
        }
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / count.max(1) as f64,
            val_macro_f1: val,
            selected,
        });
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        log,
        best_epoch,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Per-flow `(flow_id, predicted, label)`. A flow predicted in several
/// target windows keeps its chronologically last prediction.
pub fn predict_flows(
    model: &StGnn,
    params: &ParameterSet,
    graphs: &[HeteroGraph],
) -> Result<Vec<(u64, usize, Option<usize>)>> {
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.sort_by_key(|&i| graphs[i].target_window);
    let preds = order
        .par_iter()
        .map(|&i| model.predict(&graphs[i], params))
        .collect::<Result<Vec<_>>>()?;
    let mut last: BTreeMap<u64, (usize, Option<usize>)> = BTreeMap::new();
    for (&gi, p) in order.iter().zip(preds) {
        for ((id, class, _), label) in p.into_iter().zip(&graphs[gi].target_labels) {
            last.insert(id, (class, *label));
        }
    }
    Ok(last.into_iter().map(|(id, (p, l))| (id, p, l)).collect())
}

/// Metrics over the labelled flows of `graphs`.
pub fn evaluate(model: &StGnn, params: &ParameterSet, graphs: &[HeteroGraph]) -> Result<MetricsReport> {
    let preds = predict_flows(model, params, graphs)?;
    let (truth, pred): (Vec<usize>, Vec<usize>) = preds.iter().filter_map(|&(_, p, l)| l.map(|l| (l, p))).unzip();
    Ok(MetricsReport::new(model.config.num_classes, &truth, &pred))
}
