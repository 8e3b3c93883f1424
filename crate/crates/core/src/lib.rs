//! Error-correcting and lossy-compression codes built from multilayer
//! perceptrons, decoded by approximate message passing.
//!
//! The crate is layered bottom-up: [`spin`] primitives, [`network`]
//! encoders, [`channel`] models and reference bounds, [`kernels`] for the
//! per-factor Gaussian averages, the reduced [`engine`], a small-system
//! [`oracle`], and the [`experiment`] harness.

pub mod channel;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod network;
pub mod oracle;
pub mod special;
pub mod spin;

pub use channel::{ChannelParams, SourceModel};
pub use error::{Error, Result};
pub use network::{Codebook, NetworkKind, NetworkSpec};
pub use spin::{SeededStream, SpinVector, StreamId};
