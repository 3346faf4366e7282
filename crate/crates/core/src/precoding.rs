//! Null-space precoders that keep the SN-to-SN signaling invisible to the
//! OFDMA receivers.
//!
//! In the forward phase SN `i` must not disturb AN `i` (through `H_ii`) nor
//! AN `j` (through `H_ij`) on their subcarriers, which leaves `L` free
//! dimensions. In the backward phase SN `i` only has to stay clear of the
//! subcarriers SN `j` decodes from its AN, leaving `N + L - |N_j|`.

use crate::channel::ConvolutionPair;
use crate::linalg::{max_abs, null_space, scaled_identity};
use crate::signal::{dft_matrix, OfdmGrid, Side};
use crate::whitening::WhiteningDecomposition;
use crate::{CMatrix, Error, Phase, Result};

/// Semi-unitary basis of the admissible signaling subspace and the rotation
/// applied to the streams inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    /// `(N+L) x K`, orthonormal columns.
    pub gamma: CMatrix,
    /// `K x K` unitary.
    pub rotation: CMatrix,
    pub phase: Phase,
}

impl Precoder {
    fn from_basis(gamma: CMatrix, phase: Phase) -> Self {
        let k = gamma.ncols();
        Self { gamma, rotation: scaled_identity(k, 1.0), phase }
    }

    pub fn streams(&self) -> usize {
        self.gamma.ncols()
    }

    /// Replace the stream rotation. It must be `K x K`.
    pub fn with_rotation(mut self, rotation: CMatrix) -> Result<Self> {
        if rotation.shape() != (self.streams(), self.streams()) {
            return Err(Error::DimensionMismatch { expected: self.streams(), found: rotation.nrows() });
        }
        self.rotation = rotation;
        Ok(self)
    }

    /// `Gamma * C`, the full precoding matrix.
    pub fn matrix(&self) -> CMatrix {
        &self.gamma * &self.rotation
    }

    /// `max|M Gamma| / max|M|` for a constraint operator `M`.
    pub fn relative_residual(&self, constraint: &CMatrix) -> f64 {
        let scale = max_abs(constraint);
        if scale == 0.0 {
            return 0.0;
        }
        max_abs(&(constraint * &self.gamma)) / scale
    }
}

/// `D_side F B H^lower`, the component of a transmission that lands on the
/// side's subcarriers after OFDM demodulation. `N x (N+L)`.
pub fn demodulated_leakage(grid: &OfdmGrid, side: Side, channel: &ConvolutionPair) -> CMatrix {
    grid.selector(side) * dft_matrix(grid.n()) * grid.cp_removal() * &channel.lower
}

fn reduced_leakage(grid: &OfdmGrid, side: Side, channel: &ConvolutionPair) -> CMatrix {
    grid.reduced_selector(side) * dft_matrix(grid.n()) * grid.cp_removal() * &channel.lower
}

fn check_block(grid: &OfdmGrid, channel: &ConvolutionPair) -> Result<()> {
    if channel.block_len() != grid.block_len() {
        return Err(Error::DimensionMismatch { expected: grid.block_len(), found: channel.block_len() });
    }
    Ok(())
}

/// The two forward-phase constraint operators for SN `side`:
/// `[D_i F B H_ii, D_j F B H_ij]`.
pub fn forward_constraints(
    own: &ConvolutionPair,
    cross: &ConvolutionPair,
    grid: &OfdmGrid,
    side: Side,
) -> [CMatrix; 2] {
    [demodulated_leakage(grid, side, own), demodulated_leakage(grid, side.other(), cross)]
}

/// Forward-phase precoder for SN `side`. `own` is its channel to its AN,
/// `cross` its channel to the other AN.
///
/// Both constraints are stacked rather than summed, so each holds on its
/// own. The null space comes from a rank-revealing QR, see
/// [`crate::linalg::null_space`].
pub fn forward_nullspace(
    own: &ConvolutionPair,
    cross: &ConvolutionPair,
    grid: &OfdmGrid,
    side: Side,
) -> Result<Precoder> {
    check_block(grid, own)?;
    check_block(grid, cross)?;
    let top = reduced_leakage(grid, side, own);
    let bottom = reduced_leakage(grid, side.other(), cross);
    let mut stacked = CMatrix::zeros(top.nrows() + bottom.nrows(), grid.block_len());
    stacked.rows_mut(0, top.nrows()).copy_from(&top);
    stacked.rows_mut(top.nrows(), bottom.nrows()).copy_from(&bottom);
    let gamma = null_space(&stacked, grid.cp())?;
    Ok(Precoder::from_basis(gamma, Phase::Forward))
}

/// Backward-phase constraint operator `D_j F B H_s` protecting the
/// subcarriers of side `protect` at the peer SN.
pub fn backward_constraint(hs: &ConvolutionPair, grid: &OfdmGrid, protect: Side) -> CMatrix {
    demodulated_leakage(grid, protect, hs)
}

/// Backward-phase precoder of the SN transmitting to the peer on side
/// `protect`, whose AN subcarriers must stay clean.
pub fn backward_nullspace(hs: &ConvolutionPair, grid: &OfdmGrid, protect: Side) -> Result<Precoder> {
    check_block(grid, hs)?;
    let m = reduced_leakage(grid, protect, hs);
    let expected = grid.block_len() - grid.set(protect).len();
    let gamma = null_space(&m, expected)?;
    Ok(Precoder::from_basis(gamma, Phase::Backward))
}

/// Stream rotation that turns the whitened link into parallel channels: the
/// right singular basis of `cov^{-1/2} H Gamma`.
pub fn rotation_from_svd(whitening: &WhiteningDecomposition) -> CMatrix {
    whitening.right_basis.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::ComplexField;
    use crate::channel::{sample_taps, ChannelTaps, PowerDelayProfile};
    use crate::linalg::real_diag;
    use crate::C64;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_pair(rng: &mut ChaCha8Rng, block: usize) -> ConvolutionPair {
        let pdp = PowerDelayProfile::exponential(16, 2.0).unwrap();
        ConvolutionPair::new(&sample_taps(&pdp, rng), block).unwrap()
    }

    fn unit_gram_error(g: &CMatrix) -> f64 {
        max_abs(&(g.adjoint() * g - scaled_identity(g.ncols(), 1.0)))
    }

    #[test]
    fn identity_channels_leave_cp_dimensions() {
        let grid = OfdmGrid::contiguous(16, 4).unwrap();
        let flat = ConvolutionPair::new(&ChannelTaps(vec![C64::new(1.0, 0.0)]), 20).unwrap();
        let pre = forward_nullspace(&flat, &flat, &grid, Side::First).unwrap();
        assert_eq!(pre.streams(), 4);
        // with a flat channel F B x = 0 means the data part is zero: only the
        // prefix samples are free
        let data_rows = pre.gamma.rows(4, 16);
        assert!(max_abs(&data_rows.into_owned()) < 1e-12);
        assert!(unit_gram_error(&pre.gamma) < 1e-10);
    }

    #[test]
    fn random_forward_precoder() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let own = random_pair(&mut rng, 80);
        let cross = random_pair(&mut rng, 80);
        let pre = forward_nullspace(&own, &cross, &grid, Side::First).unwrap();
        assert_eq!(pre.streams(), 16);
        assert!(unit_gram_error(&pre.gamma) <= 1e-10);
        for c in forward_constraints(&own, &cross, &grid, Side::First) {
            assert!(pre.relative_residual(&c) <= 1e-9);
        }
    }

    #[test]
    fn random_backward_precoders() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let hs = random_pair(&mut rng, 80);
            let pre = backward_nullspace(&hs, &grid, Side::Second).unwrap();
            assert_eq!(pre.streams(), 48);
            assert!(pre.relative_residual(&backward_constraint(&hs, &grid, Side::Second)) <= 1e-9);
            assert!(unit_gram_error(&pre.gamma) <= 1e-10);
        }
    }

    #[test]
    fn block_mismatch_is_rejected() {
        let grid = OfdmGrid::contiguous(16, 4).unwrap();
        let flat = ConvolutionPair::new(&ChannelTaps(vec![C64::new(1.0, 0.0)]), 21).unwrap();
        assert!(backward_nullspace(&flat, &grid, Side::First).is_err());
    }

    #[test]
    fn scalar_rotation() {
        let g = CMatrix::from_element(1, 1, C64::new(0.0, -3.0));
        let w = WhiteningDecomposition::new(scaled_identity(1, 1.0), &g).unwrap();
        assert_eq!(w.gains, vec![3.0]);
        let c = rotation_from_svd(&w);
        assert!((c[(0, 0)].modulus() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_diagonalizes_whitened_link() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut draw = || C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let a = CMatrix::from_fn(12, 12, |_, _| draw());
        let cov = &a * a.adjoint() + scaled_identity(12, 0.1);
        let g = CMatrix::from_fn(12, 4, |_, _| draw());
        let w = WhiteningDecomposition::new(cov, &g).unwrap();
        let c = rotation_from_svd(&w);
        assert!(unit_gram_error(&c) < 1e-10);
        let composed = w.left_basis.adjoint() * &w.inv_sqrt * &g * &c;
        let sigma_max = w.gains[0];
        let diag = real_diag(&w.gains);
        assert!(max_abs(&(composed - diag)) <= 1e-9 * sigma_max);
        assert!(w.gains.windows(2).all(|p| p[0] >= p[1]));
    }
}
