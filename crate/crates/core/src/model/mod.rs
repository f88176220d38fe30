//! The spatio-temporal message-passing network.
//!
//! Every layer runs a temporal step over the four temporal edge types and
//! then a spatial step over the four flow/IP edge types. For a destination
//! node `v` and edge type `e` with at least one incoming edge:
//!
//! ```text
//! h_{v,e} = W1_e · h_v + W2_e · agg1({h_u : u → v of type e})
//! h_v'    = σ(agg2({h_{v,e}}))
//! ```
//!
//! Nodes with no incoming edge in a step keep their state. The spatial step
//! consumes the temporal step's output. Final flow states of the target
//! window go through an MLP classifier.

mod aggregate;
mod checkpoint;
mod graph;
mod mlp;
mod stgnn;

pub use aggregate::{
    edge_type_aggregator, neighbor_aggregator, neighbor_aggregator_names, Adjacency, AggregateCache,
    EdgeTypeAggregator, NeighborAggregator,
};
pub use checkpoint::{
    load_checkpoint, read_checkpoint_from, save_checkpoint, write_checkpoint_to, CheckpointMeta, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use graph::HeteroGraph;
pub use mlp::{Mlp, MlpTrace};
pub use stgnn::{argmax, ForwardTrace, NodeState, StGnn, StepKind, StepTrace, TrunkTrace};

use crate::error::{Error, Result};
use crate::kv::KvText;
use crate::tensor::Activation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Ip,
    Flow,
}

/// The eight edge types. The first four are consumed by the temporal step,
/// the last four by the spatial step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    SameSrc,
    SameDst,
    IpRecurrence,
    FlowRecurrence,
    FlowToSrc,
    SrcToFlow,
    FlowToDst,
    DstToFlow,
}

impl EdgeType {
    pub const ALL: [EdgeType; 8] = [
        EdgeType::SameSrc,
        EdgeType::SameDst,
        EdgeType::IpRecurrence,
        EdgeType::FlowRecurrence,
        EdgeType::FlowToSrc,
        EdgeType::SrcToFlow,
        EdgeType::FlowToDst,
        EdgeType::DstToFlow,
    ];
    pub const TEMPORAL: [EdgeType; 4] = [
        EdgeType::SameSrc,
        EdgeType::SameDst,
        EdgeType::IpRecurrence,
        EdgeType::FlowRecurrence,
    ];
    pub const SPATIAL: [EdgeType; 4] = [
        EdgeType::FlowToSrc,
        EdgeType::SrcToFlow,
        EdgeType::FlowToDst,
        EdgeType::DstToFlow,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::SameSrc => "same_src",
            EdgeType::SameDst => "same_dst",
            EdgeType::IpRecurrence => "ip_recur",
            EdgeType::FlowRecurrence => "flow_recur",
            EdgeType::FlowToSrc => "flow_to_src",
            EdgeType::SrcToFlow => "src_to_flow",
            EdgeType::FlowToDst => "flow_to_dst",
            EdgeType::DstToFlow => "dst_to_flow",
        }
    }

    pub fn is_temporal(self) -> bool {
        self.index() < 4
    }

    pub fn src_kind(self) -> NodeKind {
        match self {
            EdgeType::IpRecurrence | EdgeType::SrcToFlow | EdgeType::DstToFlow => NodeKind::Ip,
            _ => NodeKind::Flow,
        }
    }

    pub fn dst_kind(self) -> NodeKind {
        match self {
            EdgeType::IpRecurrence | EdgeType::FlowToSrc | EdgeType::FlowToDst => NodeKind::Ip,
            _ => NodeKind::Flow,
        }
    }
}

/// Name of a per-layer, per-edge-type weight, e.g. `layer0.temporal.same_src.W1`.
pub fn edge_param_name(layer: usize, edge: EdgeType, which: &str) -> String {
    let step = if edge.is_temporal() { "temporal" } else { "spatial" };
    format!("layer{layer}.{step}.{}.{which}", edge.name())
}

pub const FLOW_ENCODER: &str = "encoder.flow";
pub const IP_ENCODER: &str = "encoder.ip";
pub const CLASSIFIER: &str = "classifier";

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub classifier_layers: usize,
    pub classifier_hidden: usize,
    /// Registered name of the within-type neighbor aggregator (sum, mean, max).
    pub neighbor_aggregator: String,
    /// Registered name of the across-type aggregator (sum, mean).
    pub edge_type_aggregator: String,
    pub activation: Activation,
    pub num_classes: usize,
    /// Length of encoded flow feature vectors.
    pub feature_dim: usize,
    pub flow_encoding_dim: usize,
    pub window_encoding_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_layers: 2,
            hidden_size: 128,
            classifier_layers: 2,
            classifier_hidden: 128,
            neighbor_aggregator: "mean".into(),
            edge_type_aggregator: "sum".into(),
            activation: Activation::default(),
            num_classes: 2,
            feature_dim: 0,
            flow_encoding_dim: 30,
            window_encoding_dim: 16,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_size == 0 || self.classifier_hidden == 0 || self.classifier_layers == 0 {
            return Err(Error::Config("layer counts and sizes must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        neighbor_aggregator(&self.neighbor_aggregator)?;
        edge_type_aggregator(&self.edge_type_aggregator)?;
        Ok(())
    }

    pub fn flow_input_dim(&self) -> usize {
        self.feature_dim + self.flow_encoding_dim
    }

    pub fn ip_input_dim(&self) -> usize {
        1 + self.window_encoding_dim
    }

    pub fn to_kv(&self) -> KvText {
        let mut kv = KvText::new();
        kv.set("num_layers", self.num_layers);
        kv.set("hidden_size", self.hidden_size);
        kv.set("classifier_layers", self.classifier_layers);
        kv.set("classifier_hidden", self.classifier_hidden);
        kv.set("neighbor_aggregator", &self.neighbor_aggregator);
        kv.set("edge_type_aggregator", &self.edge_type_aggregator);
        kv.set("activation", self.activation.name());
        kv.set("num_classes", self.num_classes);
        kv.set("feature_dim", self.feature_dim);
        kv.set("flow_encoding_dim", self.flow_encoding_dim);
        kv.set("window_encoding_dim", self.window_encoding_dim);
        kv
    }

    /// Overrides fields named in `kv`; unknown keys are an error.
    pub fn apply_kv(&mut self, kv: &KvText) -> Result<()> {
        for (k, v) in kv.iter() {
            match k {
                "num_layers" => self.num_layers = kv.require_value(k)?,
                "hidden_size" => self.hidden_size = kv.require_value(k)?,
                "classifier_layers" => self.classifier_layers = kv.require_value(k)?,
                "classifier_hidden" => self.classifier_hidden = kv.require_value(k)?,
                "neighbor_aggregator" => self.neighbor_aggregator = v.to_string(),
                "edge_type_aggregator" => self.edge_type_aggregator = v.to_string(),
                "activation" => self.activation = v.parse()?,
                "num_classes" => self.num_classes = kv.require_value(k)?,
                "feature_dim" => self.feature_dim = kv.require_value(k)?,
                "flow_encoding_dim" => self.flow_encoding_dim = kv.require_value(k)?,
                "window_encoding_dim" => self.window_encoding_dim = kv.require_value(k)?,
                other => return Err(Error::Config(format!("unknown model setting `{other}`"))),
            }
        }
        Ok(())
    }

    /// Layer widths of the classifier MLP, input to output.
    pub fn classifier_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.hidden_size];
        dims.extend(std::iter::repeat_n(self.classifier_hidden, self.classifier_layers - 1));
        dims.push(self.num_classes);
        dims
    }
}
