use thiserror::Error;

use crate::market::ThetaPoint;

pub type Result<T> = std::result::Result<T, Error>;

/// Which side of the saddle inequality failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SaddleSide {
    /// H(b*, rho) exceeded H(theta*).
    Upper,
    /// H(b, rho*) fell below H(theta*).
    Lower,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("correlation matrix is not positive definite (pivot {pivot} failed)")]
    NotPositiveDefinite { pivot: usize },
    #[error("no positive definite point found in the correlation box")]
    NoFeasiblePoint,
    #[error("sampler gave up after {0} consecutive rejections")]
    SamplingExhausted(usize),
    #[error("risk premium has no minimum: {0}")]
    NoMinimum(String),
    #[error("drift anchor is zero; the optimal strategy is to never trade")]
    ZeroDrift,
    #[error("correlation box corner {corner:?} is not positive definite")]
    BoxNotPD { corner: Vec<f64> },
    #[error("projected gradient did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },
    #[error("grid of {points} points exceeds the evaluation limit")]
    GridTooLarge { points: f64 },
    #[error("saddle inequality violated on the {side:?} side by {margin:e} at {theta:?}")]
    SaddleViolated {
        theta: ThetaPoint,
        side: SaddleSide,
        margin: f64,
    },
    #[error("weak optimality principle violated by probe '{probe}' (margin {margin:e})")]
    PrincipleViolated { probe: String, margin: f64 },
}
