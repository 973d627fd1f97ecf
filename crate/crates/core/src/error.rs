use thiserror::Error;

use crate::expr::ParseError;
use crate::jet::JetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("metric not positive definite at {point:?} (eigenvalues {eigenvalues:?})")]
    NonPositiveDefinite {
        point: [f64; 4],
        eigenvalues: Vec<f64>,
    },
    #[error("point {point:?} lies outside the chart domain")]
    OutOfDomain { point: [f64; 4] },
    #[error("point {point:?} is not on the boundary face")]
    NotOnBoundary { point: [f64; 4] },
    #[error("{what} needs jets of order {need}, have {have}")]
    InsufficientOrder {
        what: &'static str,
        need: usize,
        have: usize,
    },
    #[error("chart is not in normal form (residual {residual:.3e})")]
    NotNormalForm { residual: f64 },
    #[error("precondition failed: {what} (residual {residual:.3e})")]
    Precondition { what: String, residual: f64 },
    #[error("scalar curvature is not the constant {c} (|R - c| = {residual:.3e})")]
    NotConstantScalar { c: f64, residual: f64 },
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("chart domain too small: {0}")]
    DomainTooSmall(String),
    #[error("invalid metric definition: {0}")]
    InvalidMetric(String),
    #[error("unknown model \"{0}\"")]
    UnknownModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("evaluation failed at {point:?}: {source}")]
    AtNode {
        point: [f64; 4],
        #[source]
        source: Box<GeomError>,
    },
}

impl GeomError {
    pub fn at(self, point: [f64; 4]) -> GeomError {
        match self {
            GeomError::AtNode { .. } => self,
            other => GeomError::AtNode {
                point,
                source: Box::new(other),
            },
        }
    }

    /// True for errors that are the input's fault rather than an evaluation
    /// failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            GeomError::Parse(_)
                | GeomError::InvalidMetric(_)
                | GeomError::UnknownModel(_)
                | GeomError::InvalidParameter(_)
        )
    }
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
