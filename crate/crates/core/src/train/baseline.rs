use std::time::Instant;

use super::{EpochLog, MetricsReport, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::flow::{FeatureCodec, FlowRecord};
use crate::model::Mlp;
use crate::tensor::{
    adam_step, class_weights, cross_entropy, Activation, AdamConfig, AdamState, ParameterSet, Rng, Tensor,
};

/// Flows per optimizer step.
const BATCH_FLOWS: usize = 64;

fn encode(records: &[FlowRecord], codec: &FeatureCodec) -> (Tensor, Vec<usize>) {
    let labelled: Vec<&FlowRecord> = records.iter().filter(|r| r.label.is_some()).collect();
    let rows: Vec<Vec<f64>> = labelled.iter().map(|r| codec.encode(r)).collect();
    let x = Tensor::from_rows(&rows, codec.feature_dim()).expect("codec output has feature_dim columns");
    (x, labelled.iter().map(|r| r.label.unwrap()).collect())
}

fn predict(mlp: &Mlp, params: &ParameterSet, x: &Tensor) -> Result<Vec<usize>> {
    let (logits, _) = mlp.forward(params, x)?;
    Ok((0..logits.rows())
        .map(|i| crate::model::argmax(logits.row(i)))
        .collect())
}

/// Two-layer perceptron on encoded flow features alone (no graph).
/// Returns test metrics and the training record of the selected epoch.
pub fn mlp_baseline(
    train: &[FlowRecord],
    val: &[FlowRecord],
    test: &[FlowRecord],
    codec: &FeatureCodec,
    num_classes: usize,
    hidden: usize,
    config: &TrainConfig,
) -> Result<(MetricsReport, TrainOutcome)> {
    config.validate()?;
    let (x, y) = encode(train, codec);
    if y.is_empty() {
        return Err(Error::EmptyData("training split has no labelled flows".into()));
    }
    let (xv, yv) = encode(val, codec);
    let (xt, yt) = encode(test, codec);
    let weights = config.weighted_loss.then(|| class_weights(&y, num_classes));
    let mlp = Mlp::new(
        "mlp",
        vec![codec.feature_dim(), hidden, num_classes],
        Activation::default(),
    );
    let mut rng = Rng::new(config.seed);
    let mut params = ParameterSet::new();
    mlp.init(&mut rng, &mut params);
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr));

    let started = Instant::now();
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut best: Option<(f64, usize, ParameterSet)> = None;
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(BATCH_FLOWS) {
            let xb = x.gather_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (logits, trace) = mlp.forward(&params, &xb)?;
            let (loss, dlogits) = cross_entropy(&logits, &yb, weights.as_deref())?;
            loss_sum += loss * yb.len() as f64;
            let mut grads = ParameterSet::new();
            mlp.backward(&params, &trace, &dlogits, &mut grads)?;
            adam_step(&mut params, &grads, &mut adam)?;
        }
        let val_f1 = if yv.is_empty() {
            None
        } else {
            Some(super::f1_scores(&yv, &predict(&mlp, &params, &xv)?).macro_avg)
        };
        let selected = match (&best, val_f1) {
            (None, _) | (_, None) => true,
            (Some((b, _, _)), Some(v)) => v > *b,
        };
        if selected {
            best = Some((val_f1.unwrap_or(f64::NEG_INFINITY), epoch, params.clone()));
        }
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / y.len() as f64,
            val_macro_f1: val_f1,
            selected,
        });
    }
    let seconds = started.elapsed().as_secs_f64();
    let (_, best_epoch, params) = best.expect("at least one epoch");
    let pred = if yt.is_empty() {
        Vec::new()
    } else {
        predict(&mlp, &params, &xt)?
    };
    Ok((
        MetricsReport::new(num_classes, &yt, &pred),
        TrainOutcome {
            params,
            log,
            best_epoch,
            seconds,
        },
    ))
}
