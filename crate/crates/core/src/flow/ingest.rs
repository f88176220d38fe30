use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use super::{sort_flows, FlowRecord, LabelVocabulary};
use crate::error::{Error, Result};

/// Canonical field names a column mapping may target.
const REQUIRED_FIELDS: &[&str] = &[
    "start_time",
    "src_ip",
    "dst_ip",
    "src_port",
    "dst_port",
    "protocol",
    "in_bytes",
    "out_bytes",
    "in_pkts",
    "out_pkts",
    "tcp_flags",
];
const OPTIONAL_FIELDS: &[&str] = &["end_time", "duration", "flow_id", "attack"];

/// Maps canonical field names onto CSV header names.
///
/// At least one of `end_time` / `duration` must be mapped. `flow_id` defaults
/// to the 0-based data row number and `attack` (the class name column) is
/// optional; without it every flow is unlabeled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSchema {
    columns: BTreeMap<String, String>,
}

impl Default for ColumnSchema {
    /// Identity mapping onto the canonical names, as written by [`write_flow_csv`].
    fn default() -> Self {
        let columns = REQUIRED_FIELDS
            .iter()
            .chain(OPTIONAL_FIELDS)
            .map(|f| (f.to_string(), f.to_string()))
            .collect();
        ColumnSchema { columns }
    }
}

impl ColumnSchema {
    pub fn new(columns: BTreeMap<String, String>) -> Result<Self> {
        for k in columns.keys() {
            if !REQUIRED_FIELDS.contains(&k.as_str()) && !OPTIONAL_FIELDS.contains(&k.as_str()) {
                return Err(Error::Schema(format!("unknown canonical field `{k}`")));
            }
        }
        for f in REQUIRED_FIELDS {
            if !columns.contains_key(*f) {
                return Err(Error::Schema(format!("no column mapped for required field `{f}`")));
            }
        }
        if !columns.contains_key("end_time") && !columns.contains_key("duration") {
            return Err(Error::Schema("one of `end_time` or `duration` must be mapped".into()));
        }
        Ok(ColumnSchema { columns })
    }

    /// Parses `field = column` lines; `#` starts a comment. Fields not
    /// mentioned keep their identity mapping unless `field = -` drops them.
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = ColumnSchema::default().columns;
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("line {}: expected `field = column`", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if v == "-" {
                columns.remove(k);
            } else {
                columns.insert(k.to_string(), v.to_string());
            }
        }
        ColumnSchema::new(columns)
    }

    pub fn column(&self, field: &str) -> Option<&str> {
        self.columns.get(field).map(String::as_str)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimestampFormat {
    EpochSeconds,
    Iso8601,
}

impl TimestampFormat {
    fn detect(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        if raw.parse::<f64>().is_ok() {
            Some(TimestampFormat::EpochSeconds)
        } else if parse_iso8601(raw).is_some() {
            Some(TimestampFormat::Iso8601)
        } else {
            None
        }
    }

    fn parse(self, raw: &str) -> Option<f64> {
        let raw = raw.trim();
        match self {
            TimestampFormat::EpochSeconds => raw.parse::<f64>().ok().filter(|v| v.is_finite()),
            TimestampFormat::Iso8601 => parse_iso8601(raw),
        }
    }
}

fn parse_iso8601(raw: &str) -> Option<f64> {
    let to_secs = |secs: i64, nanos: u32| secs as f64 + f64::from(nanos / 1000) * 1e-6;
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(to_secs(dt.timestamp(), dt.timestamp_subsec_nanos()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            let utc = dt.and_utc();
            return Some(to_secs(utc.timestamp(), utc.timestamp_subsec_nanos()));
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowDiagnostic {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadOutcome {
    pub records: Vec<FlowRecord>,
    pub vocabulary: LabelVocabulary,
    pub accepted: usize,
    pub rejected: usize,
    pub diagnostics: Vec<RowDiagnostic>,
}

pub fn load_flow_csv(path: &Path, schema: &ColumnSchema) -> Result<LoadOutcome> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_flow_csv_from(file, schema)
}

struct RawRow {
    record: FlowRecord,
    attack: Option<String>,
}

/// Reads a flow CSV, rejecting rows that violate [`FlowRecord`] invariants
/// and returning the accepted rows sorted by `(start_time, flow_id)`.
pub fn load_flow_csv_from<R: Read>(reader: R, schema: &ColumnSchema) -> Result<LoadOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let empty = LoadOutcome {
        records: Vec::new(),
        vocabulary: LabelVocabulary::default(),
        accepted: 0,
        rejected: 0,
        diagnostics: Vec::new(),
    };
    let headers = match rdr.headers() {
        Ok(h) if h.is_empty() || (h.len() == 1 && h[0].is_empty()) => return Ok(empty),
        Ok(h) => h.clone(),
        Err(e) => return Err(e.into()),
    };
    let mut col_of = BTreeMap::new();
    for (field, column) in &schema.columns {
        let idx = headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::MissingColumn { column: column.clone() })?;
        col_of.insert(field.as_str(), idx);
    }

    let mut formats: BTreeMap<&str, TimestampFormat> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut rejected = 0usize;
    let mut seen_ids = HashSet::new();

    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row_no as u64 + 2, |p| p.line());
        let parsed =
            parse_row(&rec, &col_of, &mut formats, row_no as u64).and_then(|raw| raw.record.validate().map(|_| raw));
        match parsed {
            Ok(raw) if seen_ids.insert(raw.record.flow_id) => rows.push(raw),
            Ok(raw) => {
                rejected += 1;
                diagnostics.push(RowDiagnostic {
                    line,
                    message: format!("duplicate flow_id {}", raw.record.flow_id),
                });
            }
            Err(message) => {
                rejected += 1;
                diagnostics.push(RowDiagnostic { line, message });
            }
        }
    }

    let labeled = col_of.contains_key("attack");
    let vocabulary = LabelVocabulary::from_names(rows.iter().filter_map(|r| r.attack.as_deref()));
    let mut records: Vec<FlowRecord> = rows
        .into_iter()
        .map(|mut r| {
            if labeled {
                let name = r.attack.take().unwrap_or_default();
                let idx = vocabulary.index_of(&name).expect("vocabulary built from these rows");
                r.record.label = Some(idx);
                r.record.attack_name = (idx != 0).then_some(name);
            }
            r.record
        })
        .collect();
    sort_flows(&mut records);
    Ok(LoadOutcome {
        accepted: records.len(),
        records,
        vocabulary,
        rejected,
        diagnostics,
    })
}

fn parse_row<'a>(
    rec: &csv::StringRecord,
    col_of: &BTreeMap<&'a str, usize>,
    formats: &mut BTreeMap<&'a str, TimestampFormat>,
    row_no: u64,
) -> std::result::Result<RawRow, String> {
    let get = |field: &str| col_of.get(field).and_then(|&i| rec.get(i));
    let required = |field: &str| get(field).ok_or_else(|| format!("missing value for `{field}`"));

    let mut timestamp = |field: &'a str| -> std::result::Result<Option<f64>, String> {
        let Some(raw) = get(field) else { return Ok(None) };
        let fmt = match formats.get(field) {
            Some(f) => *f,
            None => {
                let f = TimestampFormat::detect(raw)
                    .ok_or_else(|| format!("unparseable timestamp `{raw}` in `{field}`"))?;
                formats.insert(field, f);
                f
            }
        };
        fmt.parse(raw)
            .map(Some)
            .ok_or_else(|| format!("unparseable timestamp `{raw}` in `{field}`"))
    };

    let start_time = timestamp("start_time")?.expect("required field");
    let end_time = timestamp("end_time")?;
    let duration = match get("duration") {
        Some(raw) => Some(
            raw.parse::<f64>()
                .ok()
                .filter(|d| d.is_finite())
                .ok_or_else(|| format!("bad duration `{raw}`"))?,
        ),
        None => None,
    };
    let (end_time, duration) = match (end_time, duration) {
        (Some(e), Some(d)) => (e, d),
        (Some(e), None) => (e, e - start_time),
        (None, Some(d)) => (start_time + d, d),
        (None, None) => unreachable!("schema guarantees end_time or duration"),
    };

    let int = |field: &str, max: u64| -> std::result::Result<u64, String> {
        let raw = required(field)?;
        let v: i128 = raw
            .parse::<i128>()
            .or_else(|_| raw.parse::<f64>().map(|f| f as i128).map_err(|_| ()))
            .map_err(|_| format!("`{field}` is not an integer: `{raw}`"))?;
        if v < 0 || v as u128 > max as u128 {
            return Err(format!("`{field}` = {v} outside [0, {max}]"));
        }
        Ok(v as u64)
    };

    let flow_id = match get("flow_id") {
        Some(_) => int("flow_id", u64::MAX)?,
        None => row_no,
    };
    let attack = get("attack").map(|s| s.to_string());
    let record = FlowRecord {
        flow_id,
        start_time,
        end_time,
        src_ip: required("src_ip")?.to_string(),
        dst_ip: required("dst_ip")?.to_string(),
        src_port: int("src_port", 65535)? as u16,
        dst_port: int("dst_port", 65535)? as u16,
        protocol: int("protocol", 255)? as u8,
        in_bytes: int("in_bytes", u64::MAX)?,
        out_bytes: int("out_bytes", u64::MAX)?,
        in_pkts: int("in_pkts", u64::MAX)?,
        out_pkts: int("out_pkts", u64::MAX)?,
        tcp_flags: int("tcp_flags", 255)? as u8,
        duration,
        label: None,
        attack_name: None,
    };
    Ok(RawRow { record, attack })
}

/// Writes records with the canonical header, epoch-second timestamps and
/// shortest round-trip float formatting. Unlabeled flows get an empty
/// `attack` cell, which reads back as benign; only labeled data should be
/// round-tripped through this format.
pub fn write_flow_csv<W: Write>(records: &[FlowRecord], vocabulary: &LabelVocabulary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "flow_id",
        "start_time",
        "end_time",
        "duration",
        "src_ip",
        "dst_ip",
        "src_port",
        "dst_port",
        "protocol",
        "in_bytes",
        "out_bytes",
        "in_pkts",
        "out_pkts",
        "tcp_flags",
        "attack",
    ])?;
    for r in records {
        let attack = r
            .label
            .and_then(|l| vocabulary.name(l))
            .filter(|_| r.label != Some(0))
            .unwrap_or("");
        w.write_record([
            r.flow_id.to_string(),
            r.start_time.to_string(),
            r.end_time.to_string(),
            r.duration.to_string(),
            r.src_ip.clone(),
            r.dst_ip.clone(),
            r.src_port.to_string(),
            r.dst_port.to_string(),
            r.protocol.to_string(),
            r.in_bytes.to_string(),
            r.out_bytes.to_string(),
            r.in_pkts.to_string(),
            r.out_pkts.to_string(),
            r.tcp_flags.to_string(),
            attack.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
