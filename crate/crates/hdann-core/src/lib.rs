//! Deep additive neural networks and hybrids, with the training protocol
//! and grid-search harness used in their evaluation.
//!
//! The crate is organized along the pipeline:
//!
//! - [`basis`] / [`activation`]: the fixed nonlinearities.
//! - [`network`]: architecture descriptors, parameter layout, Xavier
//!   initialization and the forward pass.
//! - [`training`]: reverse-mode gradients, ADAM and the plateau
//!   early-stopping rule.
//! - [`data`]: synthetic generators, scalers, splits and CSV ingestion.
//! - [`harness`]: grid expansion, best/small model selection,
//!   Monte-Carlo and k-fold studies, and CSV report emission.

pub mod activation;
pub mod basis;
pub mod data;
pub mod harness;
pub mod network;
pub mod rng;
pub mod training;

pub use activation::ActivationKind;
pub use basis::BasisFamily;
pub use network::{param_count, Network, NetworkKind, NetworkSpec, ParamStore};
pub use training::{AdamState, StopReason, TrainConfig, TrainReport};
