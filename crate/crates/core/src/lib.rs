//! Merging of fine-tuned checkpoints in a shared singular subspace.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`] and [`store`]: dense tensors, checkpoints, the on-disk
//!   container and per-domain deltas.
//! * [`linalg`]: SVD, truncation, polar orthogonalization, change of basis.
//! * [`metrics`]: subspace alignment ratio, principal angles, conflict maps.
//! * [`merge`]: the subspace conflict-resolving merge and baseline operators.
//! * [`harness`]: synthetic multi-domain data, toy models and the
//!   leave-one-domain-out evaluation.
//! * [`config`]: layered JSON configuration shared by the CLI and harness.

pub mod config;
pub mod error;
pub mod harness;
mod exec;
pub mod linalg;
pub mod merge;
pub mod metrics;
pub mod store;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::{SharedBasis, SvdFactors};
pub use merge::{MergeConfig, Method, ScoreVariant, TrimStats};
pub use store::{Checkpoint, DeltaSet, Deltas, VectorDeltaSet};
pub use tensor::{Tensor, WeightMatrix, WeightVector};
