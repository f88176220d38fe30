use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KvText;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusMode {
    /// Unlabeled data from the network the model will be fine-tuned on.
    InContext,
    /// Only data from other networks; the target never enters pre-training.
    OutOfContext,
}

impl fmt::Display for CorpusMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusMode::InContext => "in-context",
            CorpusMode::OutOfContext => "out-of-context",
        })
    }
}

impl FromStr for CorpusMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in-context" => Ok(CorpusMode::InContext),
            "out-of-context" => Ok(CorpusMode::OutOfContext),
            _ => Err(Error::Config(format!(
                "unknown corpus mode `{s}` (expected in-context or out-of-context)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: String,
    pub path: String,
}

/// Which datasets feed pre-training, relative to a fine-tuning target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PretrainCorpus {
    pub mode: CorpusMode,
    pub target: String,
    pub entries: Vec<CorpusEntry>,
}

impl PretrainCorpus {
    pub fn new(mode: CorpusMode, target: impl Into<String>, entries: Vec<CorpusEntry>) -> Result<Self> {
        let c = PretrainCorpus {
            mode,
            target: target.into(),
            entries,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyData("pre-training corpus lists no datasets".into()));
        }
        let has_target = self.entries.iter().any(|e| e.id == self.target);
        match self.mode {
            CorpusMode::OutOfContext if has_target => Err(Error::Config(format!(
                "out-of-context corpus must not contain the target dataset `{}`",
                self.target
            ))),
            CorpusMode::InContext if !has_target => Err(Error::Config(format!(
                "in-context corpus must contain the target dataset `{}`",
                self.target
            ))),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    /// Canonical manifest, stored in pre-trained checkpoints.
    pub fn manifest(&self) -> KvText {
        let mut kv = KvText::new();
        kv.set("corpus.mode", self.mode);
        kv.set("corpus.target", &self.target);
        for (i, e) in self.entries.iter().enumerate() {
            kv.set(format!("corpus.dataset.{i:04}.id"), &e.id);
            kv.set(format!("corpus.dataset.{i:04}.path"), &e.path);
        }
        kv
    }

    pub fn from_manifest(kv: &KvText) -> Result<Self> {
        let mode = kv.require("corpus.mode")?.parse()?;
        let target = kv.require("corpus.target")?.to_string();
        let mut entries = Vec::new();
        for i in 0.. {
            let Some(id) = kv.get(&format!("corpus.dataset.{i:04}.id")) else {
                break;
            };
            let path = kv.require(&format!("corpus.dataset.{i:04}.path"))?;
            entries.push(CorpusEntry {
                id: id.to_string(),
                path: path.to_string(),
            });
        }
        PretrainCorpus::new(mode, target, entries)
    }
}
