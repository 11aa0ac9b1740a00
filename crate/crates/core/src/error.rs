use thiserror::Error;

use crate::measures::RejectionReport;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("argument {name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("grid must have at least 2 points, got {0}")]
    GridTooSmall(usize),

    #[error(
        "aliasing: {m_points} collocation points cannot resolve {n_modes} modes (need m >= 2n)"
    )]
    Aliasing { m_points: usize, n_modes: usize },

    #[error("field must carry at least one nonconstant mode, got {0} coefficients")]
    FieldTooSmall(usize),

    #[error("mismatched sizes: {left} vs {right} ({context})")]
    SizeMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("rejection budget of {} proposals exhausted ({} accepted); the target set is too small for this budget", report.proposals, report.accepted)]
    RejectionBudget { report: RejectionReport },

    #[error("initial condition average {got} differs from configured conserved average {want}")]
    AverageMismatch { got: f64, want: f64 },

    #[error("time step {dt} violates the stability guard dt <= {guard} * eps = {max_dt}")]
    UnstableTimeStep { dt: f64, guard: f64, max_dt: f64 },

    #[error("state became non-finite at step {step} (t = {time})")]
    NonFiniteState { step: usize, time: f64 },

    #[error("effective sample size {ess:.1} under kernel weighting is below {min}; increase n_samples or the bandwidth")]
    KernelStarved { ess: f64, min: f64 },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

/// Rejects non-finite values as well as nonpositive ones.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(CoreError::OutOfRange {
            name,
            value,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        })
    }
}
