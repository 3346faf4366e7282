//! Link-level models for an energy-recycling single-antenna full-duplex radio
//! operating in a hybrid FD/HD four-node OFDMA network.
//!
//! Two full-duplex server nodes (SN) serve one half-duplex attached node (AN)
//! each over OFDMA while exchanging signaling in-band. The signaling is
//! precoded into the null space of the OFDMA receivers so it never disturbs
//! them. A variable power divider in front of the receive chain sends a
//! fraction `rho` of the circulator output to the decoder and the rest to an
//! RF energy harvester.
//!
//! The crate is `no_std` (it needs `alloc`) and is organized bottom-up:
//!
//! - [`signal`]: DFT, cyclic prefix insertion/removal and subcarrier selectors.
//! - [`channel`]: exponential power delay profiles, tap sampling, convolution
//!   matrices and link-budget conversions.
//! - [`precoding`]: null-space precoders for the SN-to-SN signaling.
//! - [`whitening`]: residual self-interference model, equivalent-noise
//!   covariances and their whitening.
//! - [`rates`]: water-filling and the achievable-rate formulas.
//! - [`energy`]: recycled energy per symbol.
//! - [`approx`]: two-point rate fits, crossover intervals and the optimal
//!   splitting ratio.
#![no_std]

extern crate alloc;

pub mod approx;
pub mod channel;
pub mod energy;
mod error;
pub mod linalg;
pub mod precoding;
pub mod rates;
pub mod signal;
pub mod whitening;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// The two halves of a TDD frame. Forward: SN to AN OFDMA. Backward: AN to
/// SN OFDMA. SN-to-SN signaling runs in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Forward,
    Backward,
}
