use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::{evaluate, prepare_graphs, train, ChronoSplit, TrainConfig};
use crate::error::{Error, Result};
use crate::flow::{strip_labels, FeatureCodec, FlowRecord};
use crate::model::{HeteroGraph, ModelConfig, StGnn};
use crate::pretrain::{pretrain, transfer_weights, PretrainConfig};
use crate::tensor::{ParameterSet, Rng};
use crate::window::{GraphBuildConfig, WindowGrid};

pub const FEWSHOT_FRACTIONS: [f64; 4] = [0.05, 0.1, 0.2, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PretrainMode {
    None,
    /// Pre-trained on the label-stripped training split of the same capture.
    InContext,
    /// Pre-trained on other captures only.
    OutOfContext,
}

impl PretrainMode {
    pub const ALL: [PretrainMode; 3] = [PretrainMode::None, PretrainMode::InContext, PretrainMode::OutOfContext];

    pub fn name(self) -> &'static str {
        match self {
            PretrainMode::None => "none",
            PretrainMode::InContext => "in-context",
            PretrainMode::OutOfContext => "out-of-context",
        }
    }
}

impl fmt::Display for PretrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PretrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pre-training mode `{s}`")))
    }
}

/// A window order for label-budget experiments. Prefixes of `order` keep the
/// class mix as close as possible to the whole split's; `fixed` holds the first
/// window (in that order) containing each class and is added to every
/// selection so no class disappears at small budgets.
#[derive(Clone, Debug, PartialEq)]
pub struct Undersampling {
    pub order: Vec<usize>,
    /// Labelled flows per class for each window of `order`.
    pub counts: BTreeMap<usize, Vec<usize>>,
    pub fixed: BTreeSet<usize>,
    pub total: usize,
}

fn max_deviation(counts: &[usize], n: usize, target: &[f64]) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    counts
        .iter()
        .zip(target)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .fold(0.0, f64::max)
}

/// Windows are indexed by flow start time on `grid`. Only labelled flows count.
pub fn undersample(flows: &[FlowRecord], grid: WindowGrid, num_classes: usize, seed: u64) -> Undersampling {
    let mut counts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut global = vec![0usize; num_classes];
    for f in flows {
        if let Some(l) = f.label.filter(|&l| l < num_classes) {
            counts
                .entry(grid.index_of(f.start_time))
                .or_insert_with(|| vec![0; num_classes])[l] += 1;
            global[l] += 1;
        }
    }
    let total: usize = global.iter().sum();
    let target: Vec<f64> = global.iter().map(|&c| c as f64 / total.max(1) as f64).collect();

    let mut remaining: Vec<usize> = counts.keys().copied().collect();
    Rng::new(seed).shuffle(&mut remaining);
    let mut cum = vec![0usize; num_classes];
    let mut n = 0;
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best = (f64::INFINITY, 0);
        for (i, w) in remaining.iter().enumerate() {
            let c = &counts[w];
            let merged: Vec<usize> = cum.iter().zip(c).map(|(a, b)| a + b).collect();
            let dev = max_deviation(&merged, n + c.iter().sum::<usize>(), &target);
            if dev < best.0 {
                best = (dev, i);
            }
        }
        let w = remaining.remove(best.1);
        for (a, b) in cum.iter_mut().zip(&counts[&w]) {
            *a += b;
        }
        n += counts[&w].iter().sum::<usize>();
        order.push(w);
    }

    let fixed: BTreeSet<usize> = (0..num_classes)
        .filter_map(|class| order.iter().find(|&w| counts[w][class] > 0).copied())
        .collect();
    Undersampling {
        order,
        counts,
        fixed,
        total,
    }
}

impl Undersampling {
    /// Shortest prefix holding at least `fraction` of the labelled flows, plus
    /// the fixed windows. The flag reports fixed windows outside that prefix.
    pub fn select(&self, fraction: f64) -> (BTreeSet<usize>, bool) {
        let need = fraction * self.total as f64;
        let mut got = 0usize;
        let mut chosen = BTreeSet::new();
        for &w in &self.order {
            if got as f64 >= need && !chosen.is_empty() {
                break;
            }
            got += self.counts[&w].iter().sum::<usize>();
            chosen.insert(w);
        }
        let violation = !self.fixed.is_subset(&chosen);
        chosen.extend(&self.fixed);
        (chosen, violation)
    }

    pub fn labelled_flows(&self, windows: &BTreeSet<usize>) -> usize {
        windows
            .iter()
            .filter_map(|w| self.counts.get(w))
            .map(|c| c.iter().sum::<usize>())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FewShotPlan {
    pub fractions: Vec<f64>,
    pub modes: Vec<PretrainMode>,
    /// Full-data reference run.
    pub reference: TrainConfig,
    /// Every reduced-label run, pre-trained or not.
    pub finetune: TrainConfig,
    pub pretrain: PretrainConfig,
    pub seed: u64,
}

impl Default for FewShotPlan {
    fn default() -> Self {
        FewShotPlan {
            fractions: FEWSHOT_FRACTIONS.to_vec(),
            modes: PretrainMode::ALL.to_vec(),
            reference: TrainConfig::scratch(),
            finetune: TrainConfig::finetune(),
            pretrain: PretrainConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FewShotRow {
    pub mode: PretrainMode,
    pub fraction: f64,
    pub windows: usize,
    pub labelled_flows: usize,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub binary_f1: f64,
    /// `100 · (reference − macro_f1) / reference`; `None` if the reference is 0.
    pub loss_pct: Option<f64>,
    /// A fixed first-occurrence window lay outside the proportional prefix.
    pub violation: bool,
    pub best_epoch: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct FewShotOutcome {
    /// All training windows, no pre-training.
    pub reference: FewShotRow,
    pub rows: Vec<FewShotRow>,
    pub undersampling: Undersampling,
}

/// Label-budget sweep. `external` is the out-of-context pre-training corpus,
/// required only when that mode is requested.
pub fn fewshot(
    model_config: &ModelConfig,
    graph_config: &GraphBuildConfig,
    split: &ChronoSplit,
    codec: &FeatureCodec,
    plan: &FewShotPlan,
    external: &[HeteroGraph],
) -> Result<FewShotOutcome> {
    if plan.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::Config(format!(
            "few-shot fractions must be in (0, 1], got {:?}",
            plan.fractions
        )));
    }
    if plan.modes.contains(&PretrainMode::OutOfContext) && external.is_empty() {
        return Err(Error::Config(
            "out-of-context mode needs a non-empty pre-training corpus".into(),
        ));
    }
    let model = StGnn::new(model_config.clone())?;
    let build = |flows: &[FlowRecord]| prepare_graphs(flows, codec, graph_config, split.origin);
    let (train_g, val_g, test_g) = (build(&split.train)?, build(&split.val)?, build(&split.test)?);
    let grid = WindowGrid {
        origin: split.origin,
        size: graph_config.window_size,
    };
    let under = undersample(&split.train, grid, model_config.num_classes, plan.seed);

    let run = |mode, fraction, windows: &BTreeSet<usize>, init: ParameterSet, config: &TrainConfig, reference| {
        let subset: Vec<HeteroGraph> = train_g
            .iter()
            .filter(|g| windows.contains(&g.target_window))
            .cloned()
            .collect();
        let outcome = train(&model, &subset, &val_g, init, config)?;
        let m = evaluate(&model, &outcome.params, &test_g)?;
        Ok::<_, Error>(FewShotRow {
            mode,
            fraction,
            windows: windows.len(),
            labelled_flows: under.labelled_flows(windows),
            macro_f1: m.multiclass.macro_avg,
            weighted_f1: m.multiclass.weighted,
            binary_f1: m.binary.macro_avg,
            loss_pct: match reference {
                Some(r) if r > 0.0 => Some(100.0 * (r - m.multiclass.macro_avg) / r),
                _ => None,
            },
            violation: false,
            best_epoch: outcome.best_epoch,
            seconds: outcome.seconds,
        })
    };

    let all: BTreeSet<usize> = under.order.iter().copied().collect();
    let mut reference = run(
        PretrainMode::None,
        1.0,
        &all,
        model.init_params(&mut Rng::new(plan.seed)),
        &plan.reference,
        None,
    )?;
    reference.loss_pct = Some(0.0);
    let ref_score = reference.macro_f1;

    let mut rows = Vec::new();
    for &mode in &plan.modes {
        let pretrained = match mode {
            PretrainMode::None => None,
            PretrainMode::InContext => Some(pretrain(&model, &build(&strip_labels(&split.train))?, &plan.pretrain)?),
            PretrainMode::OutOfContext => Some(pretrain(&model, external, &plan.pretrain)?),
        };
        for &fraction in &plan.fractions {
            let (windows, violation) = under.select(fraction);
            let mut rng = Rng::new(plan.seed);
            let init = match &pretrained {
                None => model.init_params(&mut rng),
                Some(p) => transfer_weights(&p.params, &model, &mut rng)?,
            };
            let mut row = run(mode, fraction, &windows, init, &plan.finetune, Some(ref_score))?;
            row.violation = violation;
            rows.push(row);
        }
    }
    Ok(FewShotOutcome {
        reference,
        rows,
        undersampling: under,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::sample_flow;

    fn labelled(t: f64, label: usize) -> FlowRecord {
        let mut f = sample_flow(0, t, t, "a", "b");
        f.label = Some(label);
        f
    }

    #[test]
    fn selections_are_nested_and_keep_every_class() {
        let mut flows = Vec::new();
        for w in 0..40 {
            for k in 0..5 {
                let label = if w == 33 && k == 0 {
                    2
                } else {
                    usize::from(w % 4 == 0 && k < 2)
                };
                flows.push(labelled(w as f64 + k as f64 * 0.1, label));
            }
        }
        let grid = WindowGrid { origin: 0.0, size: 1.0 };
        let u = undersample(&flows, grid, 3, 7);
        assert_eq!(u.order.len(), 40);
        assert_eq!(u.total, 200);
        assert!(u.fixed.contains(&33));
        let mut prev = BTreeSet::new();
        for f in [0.05, 0.1, 0.2, 0.5, 1.0] {
            let (s, _) = u.select(f);
            assert!(prev.is_subset(&s));
            assert!(u.labelled_flows(&s) as f64 >= f * 200.0);
            prev = s;
        }
        assert_eq!(prev.len(), 40);
        assert_eq!(u, undersample(&flows, grid, 3, 7));
    }

    #[test]
    fn greedy_order_tracks_global_mix() {
        // windows alternate pure-0 / pure-1 with equal mass: prefixes of two
        // windows must hold one of each.
        let flows: Vec<FlowRecord> = (0..20).map(|w| labelled(w as f64, w % 2)).collect();
        let u = undersample(&flows, WindowGrid { origin: 0.0, size: 1.0 }, 2, 1);
        for pair in u.order.chunks(2) {
            assert_ne!(pair[0] % 2, pair[1] % 2);
        }
    }
}
