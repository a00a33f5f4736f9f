//! Error type shared by all core modules.

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// Experiment definition violates an invariant (width, key range, ...).
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    /// Noise parameters out of range.
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    /// A shot's bit record does not match the declared register layout.
    #[error("malformed shot: expected {expected} bits, got {got}")]
    MalformedShot { expected: usize, got: usize },

    /// A key label not present in the experiment spec.
    #[error("key {key} not in spec")]
    UnknownKey { key: u32 },

    /// Operation requires at least one shot.
    #[error("no shots")]
    EmptyDataset,

    /// Calibration target outside the attainable ridge-hit range.
    #[error("target p_hit {target} infeasible; attainable range is ({floor}, {ceiling}]")]
    InfeasibleTarget {
        target: f64,
        floor: f64,
        ceiling: f64,
    },

    /// Catch-all for per-operation argument violations.
    #[error("invalid argument: {0}")]
    InvalidParam(String),
}
