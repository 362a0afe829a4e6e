use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::wavebasis::Family;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("field evaluated at the expansion center of an outgoing wave")]
    Singularity,

    #[error("near-resonance denominator at order n = {n}, channel {channel:?} (|denominator| = {magnitude:.3e})")]
    Resonance { n: usize, channel: Family, magnitude: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("scattering-matrix format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("scattering matrix has order {file} but order {requested} was requested")]
    OrderMismatch { file: usize, requested: usize },

    #[error("GMRES did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
