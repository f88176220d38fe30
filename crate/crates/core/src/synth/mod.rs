//! Synthetic flow datasets with planted, documented labelling rules.
//!
//! Each generator is registered by name and produces time-sorted, labelled
//! flow records. `variant` selects a member of a family: the address space,
//! host counts and port mix change with it while the labelling rule stays
//! the same, which makes other variants usable as out-of-context data.
//!
//! | name               | label depends on                          |
//! |--------------------|-------------------------------------------|
//! | `feature-only`     | per-flow features (bytes, packets, flags)  |
//! | `topology-only`    | fan-out of the source host; features iid   |
//! | `temporal-pattern` | whether a flow opens a same-source burst   |

use crate::error::{Error, Result};
use crate::flow::{sort_flows, FlowRecord, LabelVocabulary};
use crate::tensor::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    /// Approximate number of flows (generators stop at the first complete
    /// unit of structure past it).
    pub flows: usize,
    /// Seconds of traffic.
    pub duration: f64,
    /// Window size the planted structure is aligned to.
    pub window_size: f64,
    pub variant: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            flows: 400,
            duration: 40.0,
            window_size: 1.0,
            variant: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub records: Vec<FlowRecord>,
    pub vocabulary: LabelVocabulary,
}

pub trait SyntheticGenerator: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn generate(&self, spec: &SynthSpec, rng: &mut Rng) -> SynthDataset;
}

struct FeatureOnly;
struct TopologyOnly;
struct TemporalPattern;

static GENERATORS: [&dyn SyntheticGenerator; 3] = [&FeatureOnly, &TopologyOnly, &TemporalPattern];

pub fn synth_generator(name: &str) -> Result<&'static dyn SyntheticGenerator> {
    GENERATORS
        .iter()
        .copied()
        .find(|g| g.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "synthetic generator",
            name: name.to_string(),
            known: synth_generator_names().join(", "),
        })
}

pub fn synth_generator_names() -> Vec<&'static str> {
    GENERATORS.iter().map(|g| g.name()).collect()
}

/// Shape of one generated flow; everything not listed is derived.
struct Draft {
    start: f64,
    duration: f64,
    src: String,
    dst: String,
    src_port: u16,
    dst_port: u16,
    protocol: u8,
    in_bytes: u64,
    out_bytes: u64,
    in_pkts: u64,
    out_pkts: u64,
    tcp_flags: u8,
    class: usize,
}

impl Draft {
    fn finish(self, flow_id: u64, vocabulary: &LabelVocabulary) -> FlowRecord {
        let name = vocabulary.name(self.class).expect("class in vocabulary").to_string();
        FlowRecord {
            flow_id,
            start_time: self.start,
            end_time: self.start + self.duration,
            src_ip: self.src,
            dst_ip: self.dst,
            src_port: self.src_port,
            dst_port: self.dst_port,
            protocol: self.protocol,
            in_bytes: self.in_bytes,
            out_bytes: self.out_bytes,
            in_pkts: self.in_pkts,
            out_pkts: self.out_pkts,
            tcp_flags: self.tcp_flags,
            duration: self.duration,
            label: Some(self.class),
            attack_name: (self.class != 0).then_some(name),
        }
    }
}

fn range(rng: &mut Rng, lo: u64, hi: u64) -> u64 {
    lo + rng.below((hi - lo + 1) as usize) as u64
}

fn ephemeral_port(rng: &mut Rng) -> u16 {
    range(rng, 32768, 60999) as u16
}

fn finish_all(drafts: Vec<Draft>, vocabulary: LabelVocabulary) -> SynthDataset {
    let mut records: Vec<FlowRecord> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.finish(i as u64, &vocabulary))
        .collect();
    // Ids follow time order so that ties are broken the same way everywhere.
    records.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then(a.flow_id.cmp(&b.flow_id)));
    for (i, r) in records.iter_mut().enumerate() {
        r.flow_id = i as u64;
    }
    sort_flows(&mut records);
    SynthDataset { records, vocabulary }
}

/// Start time inside window `w`, keeping `span` seconds of room before the
/// window closes and a small margin after it opens.
fn start_in_window(rng: &mut Rng, spec: &SynthSpec, w: usize, span: f64) -> f64 {
    let margin = 0.01 * spec.window_size;
    let lo = w as f64 * spec.window_size + margin;
    let hi = (w + 1) as f64 * spec.window_size - margin - span;
    rng.uniform(lo, hi.max(lo))
}

fn num_windows(spec: &SynthSpec) -> usize {
    ((spec.duration / spec.window_size).floor() as usize).max(1)
}

impl SyntheticGenerator for FeatureOnly {
    fn name(&self) -> &'static str {
        "feature-only"
    }

    fn description(&self) -> &'static str {
        "random host pairs; Exfil flows move megabytes outbound, Scan flows are single SYN packets, Benign flows are mid-sized sessions"
    }

    fn generate(&self, spec: &SynthSpec, rng: &mut Rng) -> SynthDataset {
        let vocab = LabelVocabulary::from_names(["Exfil", "Scan"]);
        let hosts = 8 + (spec.variant as usize % 5);
        let windows = num_windows(spec);
        let mut drafts = Vec::with_capacity(spec.flows);
        for _ in 0..spec.flows {
            let u = rng.unit();
            let class = if u < 0.6 {
                0
            } else if u < 0.8 {
                1
            } else {
                2
            };
            let w = rng.below(windows);
            let src = format!("172.{}.0.{}", 16 + spec.variant, rng.below(hosts));
            let dst = format!("172.{}.1.{}", 16 + spec.variant, rng.below(hosts));
            let (duration, in_bytes, out_bytes, in_pkts, out_pkts, flags, dport) = match class {
                0 => (
                    rng.uniform(0.01, 0.3) * spec.window_size,
                    range(rng, 500, 5000),
                    range(rng, 1000, 20000),
                    range(rng, 5, 30),
                    range(rng, 5, 30),
                    0x18,
                    [80u16, 443][rng.below(2)],
                ),
                1 => (
                    rng.uniform(0.3, 0.6) * spec.window_size,
                    range(rng, 200, 2000),
                    range(rng, 1_000_000, 5_000_000),
                    range(rng, 20, 60),
                    range(rng, 700, 3000),
                    0x18,
                    443,
                ),
                _ => (0.0, range(rng, 40, 60), 0, 1, 0, 0x02, range(rng, 1, 1024) as u16),
            };
            let start = start_in_window(rng, spec, w, duration);
            drafts.push(Draft {
                start,
                duration,
                src,
                dst,
                src_port: ephemeral_port(rng),
                dst_port: dport,
                protocol: 6,
                in_bytes,
                out_bytes,
                in_pkts,
                out_pkts,
                tcp_flags: flags,
                class,
            });
        }
        finish_all(drafts, vocab)
    }
}

/// Every flow draws its features from one class-independent distribution.
fn iid_features(rng: &mut Rng) -> (u64, u64, u64, u64, u16) {
    (
        range(rng, 200, 2000),
        range(rng, 200, 4000),
        range(rng, 2, 10),
        range(rng, 2, 10),
        [80u16, 443, 22, 53][rng.below(4)],
    )
}

impl SyntheticGenerator for TopologyOnly {
    fn name(&self) -> &'static str {
        "topology-only"
    }

    fn description(&self) -> &'static str {
        "per window a few scanners each contact 5-8 previously unseen hosts (Scan); other clients send 1-2 flows to a small set of popular servers (Benign); features are identically distributed"
    }

    fn generate(&self, spec: &SynthSpec, rng: &mut Rng) -> SynthDataset {
        let vocab = LabelVocabulary::from_names(["Scan"]);
        let windows = num_windows(spec);
        let servers = 4 + spec.variant as usize % 4;
        let net = 20 + spec.variant;
        let mut drafts = Vec::with_capacity(spec.flows);
        let mut fresh = 0usize;
        let mut w = 0;
        while drafts.len() < spec.flows {
            let window = w % windows;
            w += 1;
            let push = |rng: &mut Rng, src: String, dst: String, class: usize, drafts: &mut Vec<Draft>| {
                let (ib, ob, ip, op, dport) = iid_features(rng);
                let duration = rng.uniform(0.0, 0.05) * spec.window_size;
                let start = start_in_window(rng, spec, window, duration);
                drafts.push(Draft {
                    start,
                    duration,
                    src,
                    dst,
                    src_port: ephemeral_port(rng),
                    dst_port: dport,
                    protocol: 6,
                    in_bytes: ib,
                    out_bytes: ob,
                    in_pkts: ip,
                    out_pkts: op,
                    tcp_flags: 0x18,
                    class,
                });
            };
            for s in 0..1 + rng.below(2) {
                let scanner = format!("10.{net}.9.{}", (window * 2 + s) % 250);
                for _ in 0..range(rng, 5, 8) {
                    fresh += 1;
                    let target = format!("10.{net}.{}.{}", 100 + fresh / 250, fresh % 250);
                    push(rng, scanner.clone(), target, 1, &mut drafts);
                }
            }
            for c in 0..6 + rng.below(5) {
                let client = format!("10.{net}.2.{}", (window * 11 + c) % 250);
                for _ in 0..1 + rng.below(2) {
                    let server = format!("10.{net}.1.{}", rng.below(servers));
                    push(rng, client.clone(), server, 0, &mut drafts);
                }
            }
        }
        finish_all(drafts, vocab)
    }
}

impl SyntheticGenerator for TemporalPattern {
    fn name(&self) -> &'static str {
        "temporal-pattern"
    }

    fn description(&self) -> &'static str {
        "all traffic comes in same-source bursts of 3-6 flows inside one window; the first flow of each burst is BurstStart, the rest Benign; features are identically distributed"
    }

    fn generate(&self, spec: &SynthSpec, rng: &mut Rng) -> SynthDataset {
        let vocab = LabelVocabulary::from_names(["BurstStart"]);
        let windows = num_windows(spec);
        let sources = 10 + spec.variant as usize % 6;
        let servers = 4 + spec.variant as usize % 3;
        let net = 30 + spec.variant;
        let mut used = std::collections::HashSet::new();
        let mut drafts = Vec::with_capacity(spec.flows);
        let gap = 0.02 * spec.window_size;
        let mut first = true;
        while drafts.len() < spec.flows {
            let size = range(rng, 3, 6) as usize;
            let w = if first { 0 } else { rng.below(windows) };
            let src = rng.below(sources);
            // At most one burst per source and window, or a later burst's
            // opener would inherit predecessors from an earlier one.
            if used.len() >= windows * sources || !used.insert((w, src)) {
                if used.len() >= windows * sources {
                    break;
                }
                continue;
            }
            let span = gap * size as f64;
            let t0 = if first {
                0.0
            } else {
                start_in_window(rng, spec, w, span)
            };
            first = false;
            for k in 0..size {
                let (ib, ob, ip, op, dport) = iid_features(rng);
                let start = t0 + k as f64 * rng.uniform(0.5, 1.0) * gap;
                drafts.push(Draft {
                    start,
                    duration: 0.001 * spec.window_size,
                    src: format!("10.{net}.0.{src}"),
                    dst: format!("10.{net}.1.{}", rng.below(servers)),
                    src_port: ephemeral_port(rng),
                    dst_port: dport,
                    protocol: 6,
                    in_bytes: ib,
                    out_bytes: ob,
                    in_pkts: ip,
                    out_pkts: op,
                    tcp_flags: 0x18,
                    class: usize::from(k == 0),
                });
            }
        }
        finish_all(drafts, vocab)
    }
}
