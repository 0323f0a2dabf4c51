use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid weight: {0}")]
    Weight(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("nonlinearity contract violated: f({u}, {s}) = {value}")]
    Nonlinearity { u: f64, s: f64, value: f64 },

    #[error(
        "iterate left the box after a pure T step at iteration {iteration} \
         (lower {lower_margin:e}, upper {upper_margin:e}, slope {slope_margin:e})"
    )]
    BoxViolation {
        iteration: usize,
        lower_margin: f64,
        upper_margin: f64,
        slope_margin: f64,
    },

    #[error("value {value} exceeds the admissible maximum {max}")]
    OutOfRange { value: f64, max: f64 },

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
