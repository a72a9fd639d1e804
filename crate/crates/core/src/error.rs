use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("disorder law must have mean 0 and variance 1 (got mean {mean}, variance {variance})")]
    NotStandardized { mean: f64, variance: f64 },
    #[error("invalid disorder law: {0}")]
    BadDisorder(String),
    #[error("value {y} lies outside the range [0, {chi}) of the slope function")]
    SlopeDomain { y: f64, chi: f64 },
    #[error("invalid excursion law: {0}")]
    BadExcursionLaw(String),
    #[error("tilt parameter must be positive for this quantity (got {0})")]
    NonPositiveTilt(f64),
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("partition sum vanishes at the endpoint")]
    EmptyEndpoint,
}

pub type Result<T> = std::result::Result<T, Error>;
