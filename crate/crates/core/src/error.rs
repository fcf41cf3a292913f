use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input at period {period}, field `{field}`: {reason}")]
    Validation {
        period: String,
        field: &'static str,
        reason: String,
    },

    #[error("degenerate period {period}: {reason}")]
    DegeneratePeriod { period: String, reason: String },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("date grids do not align: {0}")]
    Alignment(String),

    #[error("incomplete data: {0}")]
    IncompleteData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate polynomial: {0}")]
    DegeneratePolynomial(String),

    #[error("insufficient or malformed data: {0}")]
    Data(String),

    #[error("unidentified shock: {0}")]
    Identification(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sampler diverged at iteration {iteration}: {reason}")]
    SamplerDivergence { iteration: usize, reason: String },

    #[error("transform failed at period {period}: {reason}")]
    Transform { period: String, reason: String },

    #[error("calendar gap: {0}")]
    Gap(String),

    #[error("no admissible draws: {0}")]
    EmptyBand(String),

    #[error("cannot parse `{input}` as {what}")]
    Parse { input: String, what: &'static str },
}

impl Error {
    /// True for errors that originate in numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SamplerDivergence { .. } | Error::EmptyBand(_) | Error::DegeneratePolynomial(_)
        )
    }

    /// True for configuration problems.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Identification(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
