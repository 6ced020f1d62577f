use thiserror::Error;

use crate::model::Parameter;

/// Errors raised by the modelling, information and estimation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parameter {param} = {value} sits at (or within one differencing step of) its domain edge")]
    Boundary { param: Parameter, value: f64 },

    #[error("counts are incompatible with the measurement configuration: {0}")]
    IncompatibleCounts(String),

    #[error("likelihood is flat over the search region; the data carry no information about {0}")]
    FlatLikelihood(String),

    #[error("information matrix for {params} has rank {rank}; the request is not identifiable")]
    SingularInformation { params: String, rank: usize },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {value}, error {error} after {subdivisions} subdivisions")]
    Quadrature {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("rejection sampler exceeded {0} consecutive rejections")]
    RejectionGuard(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
