//! Cooperative BEV feature fusion built on selective state-space scans.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense `f64` tensors and the few neural primitives needed.
//! - [`ssm`]: zero-order-hold discretization and scan evaluators with a
//!   verified gradient.
//! - [`mamba`]: one gated selective-SSM block.
//! - [`fusion`]: four-direction multi-agent scan, agent pooling, and the
//!   full fusion network.
//! - [`attention`]: quadratic global-attention fusion used as the scaling
//!   comparator.
//! - [`pipeline`]: point clouds to detections around the fusion network.
//! - [`bench`], [`io`], [`verify`], [`config`], [`demo`]: measurement,
//!   persistence, the self-check suite and the other pieces behind the CLI.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attention;
pub mod bench;
pub mod config;
pub mod demo;
mod error;
pub mod flops;
pub mod fusion;
pub mod io;
pub mod mamba;
pub mod memtrack;
pub mod oracle;
pub mod pipeline;
pub mod random;
pub mod ssm;
pub mod tensor;
pub mod verify;

pub use attention::AttnWeights;
pub use bench::{BenchRecord, Method};
pub use config::Config;
pub use error::{Error, Result};
pub use fusion::{DirectionCode, FeatureStack, FusionWeights};
pub use mamba::MambaBlockWeights;
pub use pipeline::{Detection, GridConfig, PointCloud, Pose};
pub use tensor::Tensor;

/// Layer-norm epsilon used throughout the network.
pub const LN_EPS: f64 = 1e-5;
