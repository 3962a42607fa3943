use thiserror::Error;

use crate::geometry::CameraModel;

/// Errors produced by the solvers and the synthetic generator.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Fewer correspondences than the chosen solver needs.
    #[error("{model} needs at least {needed} correspondences, got {got}")]
    InsufficientPoints {
        model: CameraModel,
        needed: usize,
        got: usize,
    },
    /// The data does not constrain the estimate (rank-deficient design, coincident points, ...).
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    /// The quadratic completion of an atomic essential matrix has no real root.
    #[error("atomic essential matrix completion has no real solution")]
    NoRealSolution,
    /// Translational velocity is too small for the rolling-shutter atoms to be recovered.
    #[error("translational velocity is numerically zero; use the perspective model")]
    NearZeroVelocity,
    /// No pose candidate places a majority of points in front of both cameras.
    #[error("cheirality check is ambiguous: best candidate has {in_front} of {total} points in front")]
    CheiralityAmbiguous { in_front: usize, total: usize },
    /// The objective became NaN or infinite during optimization.
    #[error("non-finite objective during optimization at iteration {iteration}")]
    NonFinite { iteration: usize },
    /// Best objective after all restarts is above the acceptance threshold.
    #[error("convergence failed: best objective {objective:e} above threshold {threshold:e}")]
    ConvergenceFailed { objective: f64, threshold: f64 },
    /// RANSAC did not find a large enough consensus set.
    #[error("no consensus: best inlier ratio {ratio:.4} below required {required:.4}")]
    NoConsensus { ratio: f64, required: f64 },
    /// The scene generator could not place enough points.
    #[error("frustum exhausted after {attempts} attempts ({placed} of {requested} points placed)")]
    FrustumExhausted {
        attempts: usize,
        placed: usize,
        requested: usize,
    },
    #[error("zero-length vector")]
    ZeroVector,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable kebab-case identifier, used in reports and machine-readable error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InsufficientPoints { .. } => "insufficient-points",
            Error::DegenerateConfiguration(_) => "degenerate-configuration",
            Error::NoRealSolution => "no-real-solution",
            Error::NearZeroVelocity => "near-zero-velocity",
            Error::CheiralityAmbiguous { .. } => "cheirality-ambiguous",
            Error::NonFinite { .. } => "non-finite",
            Error::ConvergenceFailed { .. } => "convergence-failed",
            Error::NoConsensus { .. } => "no-consensus",
            Error::FrustumExhausted { .. } => "frustum-exhausted",
            Error::ZeroVector => "zero-vector",
            Error::InvalidInput(_) => "invalid-input",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
