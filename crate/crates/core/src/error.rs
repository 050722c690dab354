use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("design matrix is rank deficient (rank {rank} < p = {p})")]
    RankDeficient { rank: usize, p: usize },

    #[error("all observations are censored")]
    AllCensored,

    #[error("too few observations: n = {n} but at least p + 1 = {} are required", p + 1)]
    TooFewObservations { n: usize, p: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("psi is not defined for the {0} loss")]
    NotDifferentiable(&'static str),

    #[error("could not draw {wanted} nonsingular subsamples in {attempts} attempts")]
    SingularSubsamples { wanted: usize, attempts: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("probe failed at magnitude {magnitude}: {source}")]
    Probe { magnitude: f64, source: Box<Error> },

    #[error("estimator {estimator} failed on {failures} of {replicates} replicates")]
    FailureRate { estimator: String, failures: usize, replicates: usize },
}

impl Error {
    /// Short machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::AllCensored => "all_censored",
            Error::TooFewObservations { .. } => "too_few_observations",
            Error::InvalidInput(_) => "invalid_input",
            Error::NonFinite(_) => "non_finite",
            Error::NotDifferentiable(_) => "not_differentiable",
            Error::SingularSubsamples { .. } => "singular_subsamples",
            Error::Numerical(_) => "numerical",
            Error::FailureRate { .. } => "failure_rate",
            Error::Probe { source, .. } => source.kind(),
        }
    }

    /// True for errors caused by the data or arguments rather than by the
    /// numerics. The CLI maps these to exit code 2.
    pub fn is_usage(&self) -> bool {
        if let Error::Probe { source, .. } = self {
            return source.is_usage();
        }
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidInput(_)
                | Error::TooFewObservations { .. }
                | Error::NotDifferentiable(_)
                | Error::RankDeficient { .. }
                | Error::AllCensored
        )
    }
}
