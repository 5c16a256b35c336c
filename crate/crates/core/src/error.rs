//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (allowed {min}..={max})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        min: usize,
        max: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("structure constants cover orders up to {available}, but order {needed} is required")]
    MissingStructConstants { needed: usize, available: usize },

    #[error("unstable configuration: {0}")]
    Unstable(String),

    #[error("conductivity {value} outside [{c1}, {c2}] at t = {t}")]
    ConductivityBound { value: f64, c1: f64, c2: f64, t: f64 },

    #[error("nonlinear iteration did not converge at t = {t} after {iterations} iterations (update {update:e})")]
    NonConvergence { t: f64, iterations: usize, update: f64 },

    #[error("ellipticity lost at t = {t}: diffusion coefficient {value} <= 0")]
    EllipticityLoss { t: f64, value: f64 },

    #[error("psi' = {value} < 0 at lambda = {lambda}; the umbilical flow is backward parabolic")]
    PsiSignViolation { lambda: f64, value: f64 },

    #[error("target mean curvature has nonzero average {mean:e} along the N-curve")]
    NonZeroAverage { mean: f64 },

    #[error("metric block is not positive definite at node {node}")]
    SingularMetric { node: usize },

    #[error("volume became non-positive ({vol}) at t = {t}")]
    NonPositiveVolume { vol: f64, t: f64 },

    #[error("degenerate decay series: {0}")]
    DegenerateSeries(String),
}

pub(crate) fn check_index(what: &'static str, index: usize, min: usize, max: usize) -> Result<()> {
    if index < min || index > max {
        Err(Error::IndexOutOfRange {
            what,
            index,
            min,
            max,
        })
    } else {
        Ok(())
    }
}

impl Error {
    /// Process exit status for the command-line runner: 3 for input the run
    /// refuses up front, 4 for failures while stepping.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IndexOutOfRange { .. }
            | Error::InvalidInput(_)
            | Error::MissingStructConstants { .. }
            | Error::Unstable(_)
            | Error::PsiSignViolation { .. }
            | Error::NonZeroAverage { .. }
            | Error::SingularMetric { .. } => 3,
            Error::ConductivityBound { .. }
            | Error::NonConvergence { .. }
            | Error::EllipticityLoss { .. }
            | Error::NonPositiveVolume { .. }
            | Error::DegenerateSeries(_) => 4,
        }
    }
}
