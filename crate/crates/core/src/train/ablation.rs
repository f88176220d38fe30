use std::fmt;
use std::str::FromStr;

use super::{evaluate, prepare_graphs, train, ChronoSplit, MetricsReport, TrainConfig};
use crate::error::{Error, Result};
use crate::flow::{strip_labels, FeatureCodec, FlowRecord};
use crate::model::{HeteroGraph, ModelConfig, StGnn};
use crate::pretrain::{pretrain, transfer_weights, PretrainConfig};
use crate::tensor::Rng;
use crate::window::GraphBuildConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AblationVariant {
    /// Temporal edges removed; every window stands alone.
    SpatialOnly,
    Temporal,
    /// Temporal, initialised from link-prediction pre-training on the
    /// label-stripped training split.
    TemporalPretrained,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 3] = [
        AblationVariant::SpatialOnly,
        AblationVariant::Temporal,
        AblationVariant::TemporalPretrained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::SpatialOnly => "spatial",
            AblationVariant::Temporal => "temporal",
            AblationVariant::TemporalPretrained => "temporal+pretrain",
        }
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation variant `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub metrics: MetricsReport,
    pub best_epoch: usize,
    /// Target windows of the test graphs, identical across variants.
    pub test_windows: Vec<usize>,
    pub seconds: f64,
}

/// Trains every variant on the same split with the same seed and scores it on
/// the same test windows.
pub fn ablation_suite(
    model_config: &ModelConfig,
    graph_config: &GraphBuildConfig,
    split: &ChronoSplit,
    codec: &FeatureCodec,
    train_config: &TrainConfig,
    pretrain_config: &PretrainConfig,
    variants: &[AblationVariant],
) -> Result<Vec<AblationRow>> {
    let model = StGnn::new(model_config.clone())?;
    let build = |flows: &[FlowRecord]| prepare_graphs(flows, codec, graph_config, split.origin);
    let (train_g, val_g, test_g) = (build(&split.train)?, build(&split.val)?, build(&split.test)?);
    let spatial = |gs: &[HeteroGraph]| gs.iter().map(HeteroGraph::without_temporal_edges).collect::<Vec<_>>();

    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let mut rng = Rng::new(train_config.seed);
        let (tr, va, te, init) = match variant {
            AblationVariant::SpatialOnly => (
                spatial(&train_g),
                spatial(&val_g),
                spatial(&test_g),
                model.init_params(&mut rng),
            ),
            AblationVariant::Temporal => (
                train_g.clone(),
                val_g.clone(),
                test_g.clone(),
                model.init_params(&mut rng),
            ),
            AblationVariant::TemporalPretrained => {
                let corpus = build(&strip_labels(&split.train))?;
                let pre = pretrain(&model, &corpus, pretrain_config)?;
                let init = transfer_weights(&pre.params, &model, &mut rng)?;
                (train_g.clone(), val_g.clone(), test_g.clone(), init)
            }
        };
        let outcome = train(&model, &tr, &va, init, train_config)?;
        rows.push(AblationRow {
            variant,
            metrics: evaluate(&model, &outcome.params, &te)?,
            best_epoch: outcome.best_epoch,
            test_windows: te.iter().map(|g| g.target_window).collect(),
            seconds: outcome.seconds,
        });
    }
    if let Some(first) = rows.first() {
        assert!(rows.iter().all(|r| r.test_windows == first.test_windows));
    }
    Ok(rows)
}
