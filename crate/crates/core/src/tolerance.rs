//! Numerical thresholds shared by the solvers.

/// Every decision threshold used by the linear and nonlinear solvers lives here so that
/// callers can tighten or relax them in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `σ_{k-1} / σ_1` of the design matrix below which the null space is not one-dimensional.
    pub rank_deficiency: f64,
    /// Read-off velocity atoms smaller than this fraction of `‖F‖` are treated as zero.
    pub near_zero_velocity: f64,
    /// Sampson terms whose denominator falls below this value are skipped.
    pub sampson_denominator: f64,
    /// Clamp for slightly negative squares in the atomic completion (relative to the root scale).
    pub negative_square_slack: f64,
    /// Minimum spread of lifted points before normalization is refused.
    pub normalization_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_deficiency: 1e-10,
            near_zero_velocity: 1e-8,
            sampson_denominator: 1e-300,
            negative_square_slack: 1e-6,
            normalization_spread: 1e-12,
        }
    }
}
