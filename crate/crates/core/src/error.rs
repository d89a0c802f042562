use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("below lasing threshold: pumping power {p_in} W does not exceed threshold {p_th} W")]
    BelowThreshold { p_in: f64, p_th: f64 },

    #[error("A_target violates the amplitude bound: w = {w} at symbol {index} of frame {frame}")]
    AmplitudeBound { frame: usize, index: usize, w: f64 },

    #[error("infeasible reference point: {0}")]
    Infeasible(String),

    #[error("invalid value for `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("solver failure: {0}")]
    Solver(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { field: field.into(), msg: msg.into() }
    }
}
