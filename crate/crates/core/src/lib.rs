//! Spatio-temporal heterogeneous graph neural network for flow-level network
//! intrusion detection.
//!
//! Flow records are cut into fixed-duration windows; each window becomes a
//! heterogeneous graph of IP and flow nodes, and consecutive windows inside a
//! bounded memory are joined by temporal recurrence edges. A stacked
//! temporal-then-spatial message-passing network classifies the flows of the
//! newest window. The trunk can be pre-trained without labels on a
//! link-prediction task and fine-tuned on a small labeled budget.

mod binio;
pub mod cli;
pub mod error;
pub mod flow;
pub mod kv;
pub mod model;
pub mod pretrain;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod window;

pub use error::{Error, Result};
