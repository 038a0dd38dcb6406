//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by encoding, simulation and the receiver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration rejected; the message lists offending key paths.
    #[error("config error: {0}")]
    Config(String),

    /// No pixels survived rate filtering; the stream carries no usable signal.
    #[error("no signal: {0}")]
    NoSignal(String),

    /// Sync correlation produced no peak clear of its sidelobes.
    #[error("sync not found: margin {margin:.3} <= {threshold:.3}")]
    SyncNotFound { margin: f64, threshold: f64 },

    /// A cluster had no grid weight above the threshold for a frame.
    #[error("cluster {cluster_id} lost: no grid weight above threshold")]
    ClusterLost { cluster_id: usize },

    /// A pilot window contained no events to track.
    #[error("tracking lost: {0}")]
    TrackingLost(String),

    /// The trajectory reached the transmitter before the timeline ended.
    #[error("simulation horizon: distance {distance_m} m non-positive at t = {t_us} us")]
    SimulationHorizon { t_us: u64, distance_m: f64 },

    /// Malformed event file.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
