use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid OFDM grid: {0}")]
    InvalidGrid(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    #[error("subcarrier {index} carries data but is not allocated to this transmitter")]
    OutsideAllocation { index: usize },

    #[error("{taps} channel taps do not fit in a block of {block} samples")]
    TapsExceedBlock { taps: usize, block: usize },

    #[error("numerical null space has dimension {found}, expected {expected}")]
    NullspaceDimensionMismatch { expected: usize, found: usize },

    #[error("covariance is not positive definite (eigenvalue {eigenvalue:e} below floor {floor:e})")]
    NotPositiveDefinite { eigenvalue: f64, floor: f64 },

    #[error("water-filling needs at least one positive channel gain")]
    AllGainsZero,

    #[error("receive chain is saturated, decoding is impossible")]
    SaturatedRegime,

    #[error("rate anchors are equal or non-positive, no two-point fit exists")]
    DegenerateAnchors,

    #[error("crossover interval requires P_th < P <= P_sat")]
    OutOfScopeRegime,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}
