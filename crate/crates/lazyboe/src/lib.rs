//! Multi-query kinodynamic motion planning with lazy propagation and
//! lazy collision checking.
//!
//! The toolkit builds a reusable bundle of dynamically-feasible rollouts of a
//! planar n-link manipulator, annotates every rollout with empirically
//! estimated lazy-propagation and collision probabilities, and plans over the
//! annotated bundle with deferred simulation and collision checking. RRT, SST
//! and a non-lazy bundle search are provided as baselines, together with a
//! benchmark harness.
//!
//! Typical flow:
//! 1. [`bundle::build_bundle`] — Monte Carlo propagation of random velocity
//!    sequences, validated against limits, torques and collisions.
//! 2. [`perturbation::annotate_bundle`] — per-edge probability estimation.
//! 3. [`planner::plan`] — anytime lazy search over the annotated bundle.
//! 4. [`bench`] — comparison against the baselines with significance tests.

pub mod baselines;
pub mod bench;
pub mod bundle;
pub mod check;
pub mod collision;
pub mod config;
pub mod dynamics;
pub mod kdtree;
pub mod persist;
pub mod perturbation;
pub mod planner;
pub mod rng;
pub mod stats;

use thiserror::Error;

/// Joint-space vector: configuration (rad), velocity (rad/s),
/// acceleration (rad/s²) or torque (N·m) depending on role.
pub type JointVector = nalgebra::DVector<f64>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered during {0}")]
    NonFinite(&'static str),
    #[error("bundle generation exhausted attempt budget ({attempts} attempts): {diagnostics}")]
    AttemptBudgetExhausted { attempts: usize, diagnostics: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("bundle file format error: {0}")]
    Format(String),
    #[error("bundle checksum mismatch")]
    ChecksumMismatch,
    #[error("bundle schema version mismatch: file has {file}, supported {supported}")]
    SchemaVersionMismatch { file: u32, supported: u32 },
    #[error("config digest mismatch: bundle was built for a different {0} configuration")]
    DigestMismatch(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
