use thiserror::Error;

/// Errors surfaced by the transform calculus, path engine and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("bracket growth failed after {doublings} doublings; last bracket [{lo:.6e}, {hi:.6e}]")]
    BracketFailed { doublings: usize, lo: f64, hi: f64 },

    #[error("root finder hit the {cap}-iteration cap; last bracket [{lo:.6e}, {hi:.6e}]")]
    RootIterationCap { cap: usize, lo: f64, hi: f64 },

    #[error("quadrature on [{a:.6e}, {b:.6e}] did not converge: error estimate {err:.3e}")]
    QuadratureDiverged { a: f64, b: f64, err: f64 },

    #[error("point outside the admissible set: H(F^-1(x,c)) - eta = {deficit:.6e} at {context}")]
    NotAdmissible { deficit: f64, context: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("barrier violation: {0}")]
    Barrier(String),
}

pub type Result<T> = std::result::Result<T, Error>;
