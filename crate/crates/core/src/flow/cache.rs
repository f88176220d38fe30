//! Binary flow cache. All integers little-endian.
//!
//! ```text
//! header   magic "PPTF" | version u32 | record_count u64
//! records  record_count × 88-byte fixed-width records
//! strings  count u32, then per string: len u32 | UTF-8 bytes
//! vocab    count u32, then per class: string index u32 (class 0 = benign)
//! ```
//!
//! Record layout (byte offsets):
//!
//! ```text
//!  0 flow_id u64      8 start_time f64   16 end_time f64    24 duration f64
//! 32 src_ip u32*     36 dst_ip u32*     40 src_port u16    42 dst_port u16
//! 44 protocol u8     45 tcp_flags u8    46 reserved u16 (0)
//! 48 in_bytes u64    56 out_bytes u64   64 in_pkts u64     72 out_pkts u64
//! 80 label u32 (0xFFFFFFFF = unlabeled) 84 attack_name u32* (0xFFFFFFFF = none)
//! ```
//!
//! `*` marks indices into the string table.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{FlowRecord, LabelVocabulary};
use crate::binio::ByteReader;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"PPTF";
pub const CACHE_VERSION: u32 = 1;
pub const CACHE_RECORD_BYTES: usize = 88;
const NONE: u32 = u32::MAX;

#[derive(Default)]
struct StringTable {
    strings: Vec<String>,
    index: HashMap<String, u32>,
}

impl StringTable {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

pub fn write_flow_cache(path: &Path, records: &[FlowRecord], vocabulary: &LabelVocabulary) -> Result<()> {
    let mut buf = Vec::new();
    write_flow_cache_to(&mut buf, records, vocabulary)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_flow_cache_to<W: Write>(mut out: W, records: &[FlowRecord], vocabulary: &LabelVocabulary) -> Result<()> {
    let mut table = StringTable::default();
    let mut buf = Vec::with_capacity(16 + records.len() * CACHE_RECORD_BYTES);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        let start = buf.len();
        buf.extend_from_slice(&r.flow_id.to_le_bytes());
        buf.extend_from_slice(&r.start_time.to_le_bytes());
        buf.extend_from_slice(&r.end_time.to_le_bytes());
        buf.extend_from_slice(&r.duration.to_le_bytes());
        buf.extend_from_slice(&table.intern(&r.src_ip).to_le_bytes());
        buf.extend_from_slice(&table.intern(&r.dst_ip).to_le_bytes());
        buf.extend_from_slice(&r.src_port.to_le_bytes());
        buf.extend_from_slice(&r.dst_port.to_le_bytes());
        buf.push(r.protocol);
        buf.push(r.tcp_flags);
        buf.extend_from_slice(&0u16.to_le_bytes());
        for v in [r.in_bytes, r.out_bytes, r.in_pkts, r.out_pkts] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let label = r.label.map_or(NONE, |l| l as u32);
        buf.extend_from_slice(&label.to_le_bytes());
        let name = r.attack_name.as_deref().map_or(NONE, |n| table.intern(n));
        buf.extend_from_slice(&name.to_le_bytes());
        debug_assert_eq!(buf.len() - start, CACHE_RECORD_BYTES);
    }
    let vocab_idx: Vec<u32> = vocabulary.names().iter().map(|n| table.intern(n)).collect();
    buf.extend_from_slice(&(table.strings.len() as u32).to_le_bytes());
    for s in &table.strings {
        buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
        buf.extend_from_slice(s.as_bytes());
    }
    buf.extend_from_slice(&(vocab_idx.len() as u32).to_le_bytes());
    for i in vocab_idx {
        buf.extend_from_slice(&i.to_le_bytes());
    }
    out.write_all(&buf).map_err(|e| Error::io("<flow cache>", e))
}

pub fn read_flow_cache(path: &Path) -> Result<(Vec<FlowRecord>, LabelVocabulary)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_flow_cache_from(std::io::BufReader::new(file))
}

pub fn read_flow_cache_from<R: Read>(mut input: R) -> Result<(Vec<FlowRecord>, LabelVocabulary)> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<flow cache>", e))?;
    let mut c = ByteReader::new(&bytes, "flow cache");
    if &c.array::<4>()? != CACHE_MAGIC {
        return Err(Error::Format("not a flow cache (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!(
            "flow cache version {version} unsupported (expected {CACHE_VERSION})"
        )));
    }
    let count = c.u64()? as usize;
    if count.saturating_mul(CACHE_RECORD_BYTES) > bytes.len() {
        return Err(Error::Format(format!(
            "flow cache declares {count} records but is too short"
        )));
    }

    struct Pending {
        record: FlowRecord,
        src: u32,
        dst: u32,
        name: u32,
    }
    let mut pending = Vec::with_capacity(count);
    for _ in 0..count {
        let flow_id = c.u64()?;
        let start_time = c.f64()?;
        let end_time = c.f64()?;
        let duration = c.f64()?;
        let src = c.u32()?;
        let dst = c.u32()?;
        let src_port = c.u16()?;
        let dst_port = c.u16()?;
        let protocol = c.u8()?;
        let tcp_flags = c.u8()?;
        let _reserved = c.u16()?;
        let in_bytes = c.u64()?;
        let out_bytes = c.u64()?;
        let in_pkts = c.u64()?;
        let out_pkts = c.u64()?;
        let label = c.u32()?;
        let name = c.u32()?;
        pending.push(Pending {
            record: FlowRecord {
                flow_id,
                start_time,
                end_time,
                src_ip: String::new(),
                dst_ip: String::new(),
                src_port,
                dst_port,
                protocol,
                in_bytes,
                out_bytes,
                in_pkts,
                out_pkts,
                tcp_flags,
                duration,
                label: (label != NONE).then_some(label as usize),
                attack_name: None,
            },
            src,
            dst,
            name,
        });
    }
    let n_strings = c.u32()? as usize;
    let mut strings = Vec::with_capacity(n_strings.min(bytes.len()));
    for _ in 0..n_strings {
        let len = c.u32()? as usize;
        let s = std::str::from_utf8(c.take(len)?).map_err(|e| Error::Format(format!("flow cache string: {e}")))?;
        strings.push(s.to_string());
    }
    let lookup = |i: u32| -> Result<String> {
        strings
            .get(i as usize)
            .cloned()
            .ok_or_else(|| Error::Format(format!("string index {i} out of range")))
    };
    let n_vocab = c.u32()? as usize;
    let mut names = Vec::with_capacity(n_vocab.min(bytes.len()));
    for _ in 0..n_vocab {
        names.push(lookup(c.u32()?)?);
    }
    if c.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes in flow cache", c.remaining())));
    }
    let vocabulary = LabelVocabulary::from_ordered(names)?;
    let records = pending
        .into_iter()
        .map(|p| {
            let mut r = p.record;
            r.src_ip = lookup(p.src)?;
            r.dst_ip = lookup(p.dst)?;
            if p.name != NONE {
                r.attack_name = Some(lookup(p.name)?);
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, vocabulary))
}
