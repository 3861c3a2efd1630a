//! Compression for neural-network weight tensors.
//!
//! The lossless pipeline regroups the bytes of floating-point parameters by
//! position before handing them to an entropy coder. On top of that sit an
//! optional sign-bit split, a tunable fixed-point cast for near-lossless
//! compression, and XOR or quantized-residual deltas between model versions.
//! Results are stored in the `.mtc` archive format.

pub mod cli;
pub mod codec;
pub mod container;
pub mod delta;
pub mod error;
pub mod ingest;
pub mod model;
pub mod transforms;

pub use error::{Error, Result};
