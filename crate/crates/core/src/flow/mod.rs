//! Flow records restricted to NetFlow v9 fields, their CSV ingestion,
//! feature encoding and the binary `PPTF` flow cache.
//!
//! The canonical schema is the intersection of standard NetFlow v9 fields:
//! start/end time, source/destination address, source/destination port,
//! protocol, in/out bytes, in/out packets, cumulative TCP flags and duration.
//! Dataset adapters map their columns onto these names. Addresses are opaque
//! keys for graph construction and are never part of a feature vector.

mod cache;
mod codec;
mod ingest;

pub use cache::{
    read_flow_cache, read_flow_cache_from, write_flow_cache, write_flow_cache_to, CACHE_MAGIC, CACHE_RECORD_BYTES,
    CACHE_VERSION,
};
pub use codec::{fit_codec, FeatureCodec, NUMERIC_FEATURES};
pub use ingest::{
    load_flow_csv, load_flow_csv_from, write_flow_csv, ColumnSchema, LoadOutcome, RowDiagnostic, TimestampFormat,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Tolerance for `duration == end_time − start_time`.
pub const DURATION_TOLERANCE: f64 = 1e-6;

pub const BENIGN: &str = "Benign";

#[derive(Clone, Debug, PartialEq)]
pub struct FlowRecord {
    pub flow_id: u64,
    pub start_time: f64,
    pub end_time: f64,
    pub src_ip: String,
    pub dst_ip: String,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
    pub in_bytes: u64,
    pub out_bytes: u64,
    pub in_pkts: u64,
    pub out_pkts: u64,
    pub tcp_flags: u8,
    pub duration: f64,
    /// Class index into a [`LabelVocabulary`]; `None` for unlabeled flows.
    pub label: Option<usize>,
    pub attack_name: Option<String>,
}

impl FlowRecord {
    /// Checks the invariants that the integer field types cannot express.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.start_time.is_finite() || !self.end_time.is_finite() || !self.duration.is_finite() {
            return Err("non-finite timestamp or duration".into());
        }
        if self.end_time < self.start_time {
            return Err(format!(
                "end_time {} precedes start_time {}",
                self.end_time, self.start_time
            ));
        }
        let span = self.end_time - self.start_time;
        if (self.duration - span).abs() > DURATION_TOLERANCE {
            return Err(format!(
                "duration {} disagrees with end_time - start_time = {span}",
                self.duration
            ));
        }
        Ok(())
    }

    /// Sort key: ascending start time, ties broken by flow id.
    pub fn order_key(&self) -> (f64, u64) {
        (self.start_time, self.flow_id)
    }

    pub fn without_label(&self) -> FlowRecord {
        FlowRecord {
            label: None,
            attack_name: None,
            ..self.clone()
        }
    }
}

/// `true` if `a` sorts strictly before `b` under [`FlowRecord::order_key`].
pub fn precedes(a: &FlowRecord, b: &FlowRecord) -> bool {
    a.start_time < b.start_time || (a.start_time == b.start_time && a.flow_id < b.flow_id)
}

pub fn sort_flows(flows: &mut [FlowRecord]) {
    flows.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then(a.flow_id.cmp(&b.flow_id)));
}

pub fn strip_labels(flows: &[FlowRecord]) -> Vec<FlowRecord> {
    flows.iter().map(FlowRecord::without_label).collect()
}

/// Class names with index 0 reserved for benign traffic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVocabulary {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Default for LabelVocabulary {
    fn default() -> Self {
        Self::from_names(std::iter::empty::<&str>())
    }
}

impl LabelVocabulary {
    /// Benign first, then the remaining distinct names in ascending order.
    pub fn from_names<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        let mut rest: Vec<String> = names
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .filter(|s| !is_benign_name(s))
            .collect();
        rest.sort();
        rest.dedup();
        let mut all = vec![BENIGN.to_string()];
        all.extend(rest);
        Self::from_ordered(all).expect("benign first")
    }

    /// Takes the class list verbatim; index 0 must be the benign class.
    pub fn from_ordered(names: Vec<String>) -> Result<Self> {
        match names.first() {
            Some(first) if is_benign_name(first) => {}
            _ => {
                return Err(Error::Format(
                    "label vocabulary must start with the benign class".into(),
                ))
            }
        }
        let mut index = BTreeMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate class name `{n}`")));
            }
        }
        Ok(LabelVocabulary { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, idx: usize) -> Option<&str> {
        self.names.get(idx).map(String::as_str)
    }

    /// Index of a raw attack-category string; benign aliases map to 0.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        if is_benign_name(name) {
            return Some(0);
        }
        self.index.get(name).copied()
    }

    /// Single-line canonical form, e.g. `Benign,DoS,Scan`.
    pub fn canonical(&self) -> String {
        self.names.join(",")
    }

    pub fn parse_canonical(s: &str) -> Result<Self> {
        Self::from_ordered(s.split(',').map(str::to_string).collect())
    }
}

/// Empty strings and the usual benign spellings of public datasets.
pub fn is_benign_name(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "-" || t == "0" || t.eq_ignore_ascii_case("benign") || t.eq_ignore_ascii_case("normal")
}

#[cfg(test)]
pub(crate) fn sample_flow(flow_id: u64, start: f64, end: f64, src: &str, dst: &str) -> FlowRecord {
    FlowRecord {
        flow_id,
        start_time: start,
        end_time: end,
        src_ip: src.to_string(),
        dst_ip: dst.to_string(),
        src_port: 40000,
        dst_port: 80,
        protocol: 6,
        in_bytes: 100,
        out_bytes: 200,
        in_pkts: 2,
        out_pkts: 3,
        tcp_flags: 0b0001_1000,
        duration: end - start,
        label: Some(0),
        attack_name: None,
    }
}
