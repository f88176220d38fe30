use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::kv::KvText;
use crate::model::ModelConfig;
use crate::pretrain::PretrainConfig;
use crate::train::{PretrainMode, TrainConfig, FEWSHOT_FRACTIONS};
use crate::window::GraphBuildConfig;

pub const SEED_ENV: &str = "PPT_SEED";

/// Model keys derived from the data or the graph section, never configured directly.
const DERIVED_MODEL_KEYS: [&str; 4] = ["num_classes", "feature_dim", "flow_encoding_dim", "window_encoding_dim"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Default,
    Env,
    File,
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::Env => "env",
            Source::File => "config file",
            Source::Flag => "flag",
        })
    }
}

/// Every setting of a run, resolved as flag > config file > `PPT_SEED`
/// (seed only) > default, with where each value came from.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub values: KvText,
    pub sources: BTreeMap<String, Source>,
    pub graph: GraphBuildConfig,
    /// `num_classes` and `feature_dim` are filled in from data.
    pub model: ModelConfig,
    /// Training from scratch.
    pub train: TrainConfig,
    pub finetune: TrainConfig,
    pub pretrain: PretrainConfig,
    pub split: [f64; 3],
    pub fewshot_fractions: Vec<f64>,
    pub fewshot_modes: Vec<PretrainMode>,
    pub seed: u64,
}

fn train_kv(c: &TrainConfig) -> KvText {
    let mut kv = KvText::new();
    kv.set("epochs", c.epochs);
    kv.set("lr", c.lr);
    kv.set("weighted_loss", c.weighted_loss);
    kv.set("batch_size", c.batch_size);
    kv
}

fn apply_train(c: &mut TrainConfig, kv: &KvText, section: &str) -> Result<()> {
    for (k, _) in kv.iter() {
        match k {
            "epochs" => c.epochs = kv.require_value(k)?,
            "lr" => c.lr = kv.require_value(k)?,
            "weighted_loss" => c.weighted_loss = kv.require_value(k)?,
            "batch_size" => c.batch_size = kv.require_value(k)?,
            other => return Err(Error::Config(format!("unknown setting `{section}.{other}`"))),
        }
    }
    Ok(())
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`")))
        })
        .collect()
}

impl RunConfig {
    pub fn defaults() -> KvText {
        let mut kv = KvText::new();
        kv.merge_section("graph", &GraphBuildConfig::default().to_kv());
        let mut model = ModelConfig::default().to_kv();
        for k in DERIVED_MODEL_KEYS {
            model.remove(k);
        }
        kv.merge_section("model", &model);
        kv.merge_section("train", &train_kv(&TrainConfig::scratch()));
        kv.merge_section("finetune", &train_kv(&TrainConfig::finetune()));
        let p = PretrainConfig::default();
        kv.set("pretrain.epochs", p.epochs);
        kv.set("pretrain.lr", p.lr);
        kv.set("pretrain.negative_ratio", p.negative_ratio);
        kv.set("pretrain.batch_size", p.batch_size);
        kv.set("split.train", 0.7);
        kv.set("split.val", 0.15);
        kv.set("split.test", 0.15);
        let fr: Vec<String> = FEWSHOT_FRACTIONS.iter().map(f64::to_string).collect();
        kv.set("fewshot.fractions", fr.join(","));
        let modes: Vec<&str> = PretrainMode::ALL.iter().map(|m| m.name()).collect();
        kv.set("fewshot.modes", modes.join(","));
        kv.set("seed", 0);
        kv
    }

    pub fn resolve(file: Option<&KvText>, env_seed: Option<&str>, flags: &KvText) -> Result<Self> {
        let mut values = Self::defaults();
        let mut sources: BTreeMap<String, Source> =
            values.iter().map(|(k, _)| (k.to_string(), Source::Default)).collect();
        let mut overlay = |kv: &KvText, source: Source| -> Result<()> {
            for (k, v) in kv.iter() {
                if !sources.contains_key(k) {
                    return Err(Error::Config(format!("unknown setting `{k}` ({source})")));
                }
                values.set(k, v);
                sources.insert(k.to_string(), source);
            }
            Ok(())
        };
        if let Some(s) = env_seed {
            let mut kv = KvText::new();
            kv.set("seed", s.trim());
            overlay(&kv, Source::Env)?;
        }
        if let Some(file) = file {
            overlay(file, Source::File)?;
        }
        overlay(flags, Source::Flag)?;

        let mut graph = GraphBuildConfig::default();
        graph.apply_kv(&values.section("graph"))?;
        graph.validate()?;
        let mut model = ModelConfig::default();
        model.apply_kv(&values.section("model"))?;
        model.flow_encoding_dim = graph.flow_encoding_dim;
        model.window_encoding_dim = graph.window_encoding_dim;
        let seed: u64 = values.require_value("seed").map_err(|_| {
            Error::Config(format!(
                "seed must be a non-negative integer, got `{}`",
                values.get("seed").unwrap_or("")
            ))
        })?;
        let mut train = TrainConfig {
            seed,
            ..TrainConfig::scratch()
        };
        apply_train(&mut train, &values.section("train"), "train")?;
        train.validate()?;
        let mut finetune = TrainConfig {
            seed,
            ..TrainConfig::finetune()
        };
        apply_train(&mut finetune, &values.section("finetune"), "finetune")?;
        finetune.validate()?;
        let pretrain = PretrainConfig {
            epochs: values.require_value("pretrain.epochs")?,
            lr: values.require_value("pretrain.lr")?,
            negative_ratio: values.require_value("pretrain.negative_ratio")?,
            batch_size: values.require_value("pretrain.batch_size")?,
            seed,
        };
        let split = [
            values.require_value("split.train")?,
            values.require_value("split.val")?,
            values.require_value("split.test")?,
        ];
        let fewshot_fractions = list("fewshot.fractions", values.require("fewshot.fractions")?)?;
        let fewshot_modes = list("fewshot.modes", values.require("fewshot.modes")?)?;
        Ok(RunConfig {
            values,
            sources,
            graph,
            model,
            train,
            finetune,
            pretrain,
            split,
            fewshot_fractions,
            fewshot_modes,
            seed,
        })
    }

    /// Loadable with `--config`; provenance rides along as comments.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved run configuration\n");
        out.push_str(&self.values.to_text());
        out.push_str("\n# provenance\n");
        for (k, s) in &self.sources {
            out.push_str(&format!("# {k}: {s}\n"));
        }
        out
    }

    pub fn source(&self, key: &str) -> Option<Source> {
        self.sources.get(key).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> KvText {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn precedence_flag_over_file_over_env_over_default() {
        let file = kv(&[("seed", "5"), ("train.lr", "0.5")]);
        let flags = kv(&[("seed", "9")]);
        let c = RunConfig::resolve(Some(&file), Some("3"), &flags).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.source("seed"), Some(Source::Flag));
        assert_eq!(c.train.lr, 0.5);
        assert_eq!(c.source("train.lr"), Some(Source::File));
        assert_eq!(c.finetune.lr, 0.01);
        assert_eq!(c.finetune.epochs, 50);
        assert_eq!(c.train.epochs, 200);
        let c = RunConfig::resolve(None, Some("3"), &KvText::new()).unwrap();
        assert_eq!((c.seed, c.source("seed")), (3, Some(Source::Env)));
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::resolve(None, None, &kv(&[("graph.window_size", "2.5")])).unwrap();
        let again = RunConfig::resolve(Some(&KvText::parse(&c.to_text()).unwrap()), None, &KvText::new()).unwrap();
        assert_eq!(again.values, c.values);
        assert_eq!(again.graph.window_size, 2.5);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::resolve(Some(&kv(&[("graph.windw", "1")])), None, &KvText::new()).unwrap_err();
        assert!(err.to_string().contains("graph.windw"));
    }
}
