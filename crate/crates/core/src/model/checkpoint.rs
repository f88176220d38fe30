//! Binary checkpoint files. All integers little-endian.
//!
//! ```text
//! magic "PPTG" | version u32 | meta_len u64 | meta (UTF-8 key = value text)
//! tensor_count u32
//! per tensor: name_len u16 | name | dtype u8 (0 = f64, 1 = f32) | rank u8
//!             | dims u64 × rank | row-major payload
//! ```
//!
//! Tensors are written in name order, always as f64; f32 payloads are
//! accepted on read and widened.

use std::io::{Read, Write};
use std::path::Path;

use super::ModelConfig;
use crate::binio::ByteReader;
use crate::error::{Error, Result};
use crate::flow::LabelVocabulary;
use crate::kv::KvText;
use crate::tensor::{ParameterSet, Tensor};
use crate::window::GraphBuildConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PPTG";
pub const CHECKPOINT_VERSION: u32 = 1;

const DTYPE_F64: u8 = 0;
const DTYPE_F32: u8 = 1;

/// Everything needed to rebuild the inputs a checkpoint was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub graph: GraphBuildConfig,
    /// Hash of the feature codec the flow features were encoded with.
    pub codec_hash: String,
    pub vocabulary: LabelVocabulary,
    /// Free-form provenance (stage, seed, source checkpoint, corpus manifest).
    pub extra: KvText,
}

impl CheckpointMeta {
    pub fn to_kv(&self) -> KvText {
        let mut kv = self.extra.clone();
        kv.merge_section("model", &self.model.to_kv());
        kv.merge_section("graph", &self.graph.to_kv());
        kv.set("codec.hash", &self.codec_hash);
        kv.set("labels.classes", self.vocabulary.canonical());
        kv
    }

    pub fn from_kv(kv: &KvText) -> Result<Self> {
        let mut model = ModelConfig::default();
        model.apply_kv(&kv.section("model"))?;
        let mut graph = GraphBuildConfig::default();
        graph.apply_kv(&kv.section("graph"))?;
        let codec_hash = kv.require("codec.hash")?.to_string();
        let vocabulary = LabelVocabulary::parse_canonical(kv.require("labels.classes")?)?;
        let extra = kv
            .iter()
            .filter(|(k, _)| {
                !(k.starts_with("model.") || k.starts_with("graph.") || *k == "codec.hash" || *k == "labels.classes")
            })
            .collect();
        Ok(CheckpointMeta {
            model,
            graph,
            codec_hash,
            vocabulary,
            extra,
        })
    }

    /// Checks that data prepared as `expected` can be fed to this checkpoint.
    pub fn check_compatible(&self, expected: &ModelConfig) -> Result<()> {
        let m = &self.model;
        let pairs = [
            ("feature_dim", m.feature_dim, expected.feature_dim),
            ("flow_encoding_dim", m.flow_encoding_dim, expected.flow_encoding_dim),
            (
                "window_encoding_dim",
                m.window_encoding_dim,
                expected.window_encoding_dim,
            ),
            ("num_classes", m.num_classes, expected.num_classes),
        ];
        for (name, have, want) in pairs {
            if have != want {
                return Err(Error::Incompatible(format!(
                    "{name} mismatch: checkpoint has {have}, data has {want}"
                )));
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, params: &ParameterSet, meta: &CheckpointMeta) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint_to(&mut buf, params, meta)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_checkpoint_to<W: Write>(mut out: W, params: &ParameterSet, meta: &CheckpointMeta) -> Result<()> {
    let text = meta.to_kv().to_text();
    let mut buf = Vec::with_capacity(64 + text.len() + params.num_scalars() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(text.len() as u64).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        let len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("tensor name too long: {name}")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(DTYPE_F64);
        buf.push(2);
        buf.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| Error::io("<checkpoint>", e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ParameterSet, CheckpointMeta)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint_from(std::io::BufReader::new(file))
}

pub fn read_checkpoint_from<R: Read>(mut input: R) -> Result<(ParameterSet, CheckpointMeta)> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<checkpoint>", e))?;
    let mut c = ByteReader::new(&bytes, "checkpoint");
    if &c.array::<4>()? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Incompatible(format!(
            "checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )));
    }
    let meta_len = c.u64()? as usize;
    let text =
        std::str::from_utf8(c.take(meta_len)?).map_err(|_| Error::Format("checkpoint metadata is not UTF-8".into()))?;
    let meta = CheckpointMeta::from_kv(&KvText::parse(text)?)?;

    let count = c.u32()?;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let name_len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let dtype = c.u8()?;
        let rank = c.u8()?;
        let dims = (0..rank)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let (rows, cols) = match dims[..] {
            [] => (1, 1),
            [n] => (1, n),
            [r, k] => (r, k),
            _ => return Err(Error::Format(format!("tensor {name} has unsupported rank {rank}"))),
        };
        let n = rows
            .checked_mul(cols)
            .filter(|&n| n.saturating_mul(4) <= c.remaining())
            .ok_or_else(|| Error::Format(format!("tensor {name} larger than the file")))?;
        let data = match dtype {
            DTYPE_F64 => (0..n).map(|_| c.f64()).collect::<Result<Vec<_>>>()?,
            DTYPE_F32 => (0..n).map(|_| c.f32().map(f64::from)).collect::<Result<Vec<_>>>()?,
            other => return Err(Error::Format(format!("tensor {name} has unknown dtype tag {other}"))),
        };
        if params
            .insert(name.clone(), Tensor::from_vec(rows, cols, data)?)
            .is_some()
        {
            return Err(Error::Format(format!("duplicate tensor {name}")));
        }
    }
    if c.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes in checkpoint", c.remaining())));
    }
    Ok((params, meta))
}
