use thiserror::Error;

use crate::bcd::BcdError;
use crate::config::ConfigError;
use crate::conic::ConicError;
use crate::rates::RateError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Bcd(#[from] Box<BcdError>),
    #[error("passive RIS with {elements} elements exceeds the circuit power budget (at most {max_elements} elements for P_tot = {total_power_w} W)")]
    PassiveElementCap {
        elements: usize,
        max_elements: usize,
        total_power_w: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<BcdError> for Error {
    fn from(e: BcdError) -> Self {
        Error::Bcd(Box::new(e))
    }
}
