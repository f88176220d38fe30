use sha2::{Digest, Sha256};

use super::FlowRecord;
use crate::error::{Error, Result};

/// Numeric features, in encoding order.
pub const NUMERIC_FEATURES: [&str; 7] = [
    "duration",
    "in_bytes",
    "out_bytes",
    "in_pkts",
    "out_pkts",
    "src_port",
    "dst_port",
];

const STD_FLOOR: f64 = 1e-8;
const FLAG_BITS: usize = 8;

fn numeric_values(r: &FlowRecord) -> [f64; 7] {
    [
        r.duration,
        r.in_bytes as f64,
        r.out_bytes as f64,
        r.in_pkts as f64,
        r.out_pkts as f64,
        f64::from(r.src_port),
        f64::from(r.dst_port),
    ]
}

/// Dense feature layout `[z-scored numerics | protocol one-hot | 8 flag bits]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCodec {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub protocol_vocab: Vec<u8>,
}

/// Population statistics over `records` only, std clamped to `1e-8`.
pub fn fit_codec(records: &[FlowRecord]) -> Result<FeatureCodec> {
    if records.is_empty() {
        return Err(Error::EmptySplit);
    }
    let n = records.len() as f64;
    let mut means = [0.0; 7];
    for r in records {
        for (m, v) in means.iter_mut().zip(numeric_values(r)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = [0.0; 7];
    for r in records {
        for ((s, v), m) in vars.iter_mut().zip(numeric_values(r)).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds = vars.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    let mut protocol_vocab: Vec<u8> = records.iter().map(|r| r.protocol).collect();
    protocol_vocab.sort_unstable();
    protocol_vocab.dedup();
    Ok(FeatureCodec {
        means: means.to_vec(),
        stds,
        protocol_vocab,
    })
}

impl FeatureCodec {
    pub fn feature_dim(&self) -> usize {
        NUMERIC_FEATURES.len() + self.protocol_vocab.len() + FLAG_BITS
    }

    pub fn encode(&self, r: &FlowRecord) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_dim());
        for ((v, m), s) in numeric_values(r).iter().zip(&self.means).zip(&self.stds) {
            out.push((v - m) / s);
        }
        out.extend(
            self.protocol_vocab
                .iter()
                .map(|&p| if p == r.protocol { 1.0 } else { 0.0 }),
        );
        out.extend((0..FLAG_BITS).map(|b| f64::from((r.tcp_flags >> b) & 1)));
        out
    }

    /// Line-oriented text form; floats use the shortest round-trip repr.
    pub fn canonical_text(&self) -> String {
        let mut s = String::from("# feature codec v1\n");
        for ((name, m), sd) in NUMERIC_FEATURES.iter().zip(&self.means).zip(&self.stds) {
            s.push_str(&format!("numeric.{name} = {m:?} {sd:?}\n"));
        }
        let protos: Vec<String> = self.protocol_vocab.iter().map(u8::to_string).collect();
        s.push_str(&format!("protocols = {}\n", protos.join(",")));
        s
    }

    pub fn parse_canonical(text: &str) -> Result<Self> {
        let mut means = vec![f64::NAN; NUMERIC_FEATURES.len()];
        let mut stds = vec![f64::NAN; NUMERIC_FEATURES.len()];
        let mut protocol_vocab = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("codec line `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(name) = k.strip_prefix("numeric.") {
                let i = NUMERIC_FEATURES
                    .iter()
                    .position(|n| *n == name)
                    .ok_or_else(|| Error::Format(format!("unknown codec feature `{name}`")))?;
                let mut parts = v.split_whitespace().map(str::parse::<f64>);
                match (parts.next(), parts.next()) {
                    (Some(Ok(m)), Some(Ok(s))) => {
                        means[i] = m;
                        stds[i] = s;
                    }
                    _ => return Err(Error::Format(format!("codec line `{line}`"))),
                }
            } else if k == "protocols" {
                let vocab: std::result::Result<Vec<u8>, _> =
                    v.split(',').filter(|s| !s.is_empty()).map(str::parse::<u8>).collect();
                protocol_vocab = Some(vocab.map_err(|e| Error::Format(format!("protocols: {e}")))?);
            }
        }
        if means.iter().chain(&stds).any(|v| v.is_nan()) {
            return Err(Error::Format("codec text is missing numeric statistics".into()));
        }
        Ok(FeatureCodec {
            means,
            stds,
            protocol_vocab: protocol_vocab.ok_or_else(|| Error::Format("codec text has no protocols".into()))?,
        })
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}
