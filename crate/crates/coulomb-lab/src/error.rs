use crate::solver::SolveReport;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("resolution too small: {0}")]
    Resolution(String),
    #[error("unsupported form degree {0}")]
    Degree(usize),
    #[error("solver did not converge: {iterations} iterations, relative residual {residual:.3e}", iterations = .0.iterations, residual = .0.final_residual)]
    Solver(SolveReport),
    #[error("gauge fixing did not converge after {iterations} iterations (residual {residual:.3e})")]
    GaugeFix { iterations: usize, residual: f64 },
    #[error("support error: {0}")]
    Support(String),
    #[error("boundary compatibility violated: {0}")]
    Compatibility(String),
    #[error("degenerate normal derivative: {0}")]
    Degeneracy(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("horizontal lift failed at step {step}: {source}")]
    Lift {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}
