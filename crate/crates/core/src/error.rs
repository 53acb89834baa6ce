use thiserror::Error;

/// Errors produced by the solvers in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected} sites, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("system too large for {what}: {n} sites (limit {limit})")]
    TooLarge {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("unsupported coupling for {0}")]
    Coupling(&'static str),

    #[error("integration failed at t = {last_valid_time}: {reason}")]
    Integration {
        last_valid_time: f64,
        reason: String,
    },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("degenerate stationary space: {zero_modes} near-zero modes")]
    Degenerate { zero_modes: usize },

    #[error("state is not stationary: residual {residual:.3e}")]
    NotStationary { residual: f64 },

    #[error("quantum jump step failed at t = {time}: dp = {dp} after {halvings} halvings")]
    JumpStep { time: f64, dp: f64, halvings: u32 },

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("too few switching events: observed {observed}, need {required}")]
    TooFewSwitches { observed: usize, required: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
