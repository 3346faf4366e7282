//! Residual self-interference model, equivalent-noise covariances of the
//! signaling and backward OFDM receivers, and their whitening.
//!
//! Every covariance here has the form `N0 I + rho * S` where `S` collects the
//! interference reaching the decoder once the divider has passed a fraction
//! `rho` of the power. [`NoiseCovariance`] keeps that split so a sweep over
//! `rho` inside one regime does not rebuild `S`.

use alloc::vec::Vec;

use crate::channel::ConvolutionPair;
use crate::linalg::{hermitian_eigen, hermitian_part, real_diag, scaled_identity, svd};
use crate::signal::{dft_matrix, OfdmGrid, Side};
use crate::{CMatrix, Error, Result, C64};

/// Relative eigenvalue floor under which a covariance is reported as not
/// positive definite.
pub const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `rho <= P_th / P`: the canceller removes all self-interference.
    NoResidualSi,
    /// `P_th / P < rho <= min(1, P_sat / P)`: residual SI at power
    /// `rho * P * N0 / P_th`.
    ResidualSi,
    /// `rho > P_sat / P`: the receive chain saturates, nothing is decoded.
    Saturated,
}

/// Splitting ratio, thresholds and the resulting residual-SI gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSiModel {
    pub rho: f64,
    pub p: f64,
    pub p_th: f64,
    pub p_sat: f64,
    /// Residual SI power per unit of received self-signal power.
    pub alpha_eq: f64,
    pub regime: Regime,
}

impl ResidualSiModel {
    /// `P_th / P`, the largest `rho` without residual SI.
    pub fn rho_threshold(&self) -> f64 {
        self.p_th / self.p
    }

    /// `min(1, P_sat / P)`, the largest decodable `rho`.
    pub fn rho_saturation(&self) -> f64 {
        (self.p_sat / self.p).min(1.0)
    }

    /// Same powers and regime at another `rho`. The regime is not
    /// re-evaluated, which lets a caller probe one branch up to its boundary.
    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..*self }
    }
}

/// Classify `rho` for transmit power `p` (all powers in watts).
pub fn residual_si(rho: f64, p: f64, p_th: f64, p_sat: f64, n0: f64) -> ResidualSiModel {
    let (regime, alpha_eq) = if rho <= p_th / p {
        (Regime::NoResidualSi, 0.0)
    } else if rho <= (p_sat / p).min(1.0) {
        (Regime::ResidualSi, n0 / p_th)
    } else {
        (Regime::Saturated, n0 / p_th)
    };
    ResidualSiModel { rho, p, p_th, p_sat, alpha_eq, regime }
}

/// `N0 I + rho * shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    pub n0: f64,
    pub rho: f64,
    pub shape: CMatrix,
}

impl NoiseCovariance {
    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    pub fn matrix(&self) -> CMatrix {
        self.at_rho(self.rho)
    }

    /// Covariance at another `rho` with the same interference shape.
    pub fn at_rho(&self, rho: f64) -> CMatrix {
        &self.shape * C64::new(rho, 0.0) + scaled_identity(self.dim(), self.n0)
    }
}

/// Hermitian inverse square root through an eigendecomposition.
pub fn inv_sqrt(cov: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eigen(cov);
    let lambda_max = eig.values.first().copied().unwrap_or(0.0);
    let floor = EIGEN_FLOOR * lambda_max;
    let lambda_min = eig.values.last().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 || lambda_min <= floor {
        return Err(Error::NotPositiveDefinite { eigenvalue: lambda_min, floor });
    }
    let scales: Vec<f64> = eig.values.iter().map(|&v| 1.0 / libm::sqrt(v)).collect();
    Ok(hermitian_part(&(&eig.vectors * real_diag(&scales) * eig.vectors.adjoint())))
}

/// SVD of the whitened effective channel `cov^{-1/2} G = U diag(gains) Q^H`.
#[derive(Debug, Clone)]
pub struct WhiteningDecomposition {
    pub cov: CMatrix,
    pub inv_sqrt: CMatrix,
    pub left_basis: CMatrix,
    /// Singular values, nonincreasing.
    pub gains: Vec<f64>,
    /// Right singular basis `Q`.
    pub right_basis: CMatrix,
}

impl WhiteningDecomposition {
    pub fn new(cov: CMatrix, channel: &CMatrix) -> Result<Self> {
        if cov.nrows() != channel.nrows() {
            return Err(Error::DimensionMismatch { expected: cov.nrows(), found: channel.nrows() });
        }
        let w = inv_sqrt(&cov)?;
        let dec = svd(&(&w * channel));
        Ok(Self { cov, inv_sqrt: w, left_basis: dec.u, gains: dec.singular_values, right_basis: dec.v })
    }

    pub fn squared_gains(&self) -> Vec<f64> {
        self.gains.iter().map(|g| g * g).collect()
    }
}

/// Time-domain covariance `A F^H diag(p) F A^H` of one OFDM block with
/// per-subcarrier powers `p`.
pub fn ofdm_time_covariance(grid: &OfdmGrid, p: &[f64]) -> Result<CMatrix> {
    if p.len() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), found: p.len() });
    }
    ofdm_time_covariance_full(grid, &real_diag(p))
}

/// Time-domain covariance `A F^H P F A^H` for a full `N x N` subcarrier
/// covariance `P`.
pub fn ofdm_time_covariance_full(grid: &OfdmGrid, freq_cov: &CMatrix) -> Result<CMatrix> {
    if freq_cov.shape() != (grid.n(), grid.n()) {
        return Err(Error::DimensionMismatch { expected: grid.n(), found: freq_cov.nrows() });
    }
    let modulator = grid.cp_insertion() * dft_matrix(grid.n()).adjoint();
    Ok(hermitian_part(&(&modulator * freq_cov * modulator.adjoint())))
}

/// Subcarrier covariance `D^H V diag(p) V^H D` of an OFDM transmitter on
/// `side` that precodes its streams with `basis` (`|N_side| x K`).
pub fn subcarrier_covariance(grid: &OfdmGrid, side: Side, basis: &CMatrix, p: &[f64]) -> Result<CMatrix> {
    let set = grid.set(side);
    if basis.nrows() != set.len() || basis.ncols() != p.len() {
        return Err(Error::DimensionMismatch { expected: set.len(), found: basis.nrows() });
    }
    let reduced = basis * real_diag(p) * basis.adjoint();
    let mut full = CMatrix::zeros(grid.n(), grid.n());
    for (r, &kr) in set.iter().enumerate() {
        for (c, &kc) in set.iter().enumerate() {
            full[(kr, kc)] = reduced[(r, c)];
        }
    }
    Ok(hermitian_part(&full))
}

/// Covariance `(power / K) Gamma Gamma^H` of `K` equal-power streams sharing
/// a per-block budget `power`.
pub fn uniform_signaling_covariance(gamma: &CMatrix, power: f64) -> CMatrix {
    let k = gamma.ncols().max(1) as f64;
    gamma * gamma.adjoint() * C64::new(power / k, 0.0)
}

/// Received covariance through a channel when the current and the previous
/// block carry independent signals of covariance `tx`:
/// `H^lower tx H^lower^H + H^upper tx H^upper^H`.
pub fn through_channel(channel: &ConvolutionPair, tx: &CMatrix) -> CMatrix {
    &channel.lower * tx * channel.lower.adjoint() + &channel.upper * tx * channel.upper.adjoint()
}

fn decodable(model: &ResidualSiModel) -> Result<()> {
    if model.regime == Regime::Saturated {
        return Err(Error::SaturatedRegime);
    }
    Ok(())
}

/// Forward phase, signaling decoded at SN `j` from SN `i`.
///
/// `peer_rx` is the peer SN's OFDM block as received over `hs` at unit gain
/// (see [`through_channel`] and [`OfdmLeakage`]); it arrives with gain
/// `alpha_b`. With residual SI, SN `j`'s own OFDM block `own_ofdm_tx` and its
/// own signaling (uniform over `own_gamma`, total `(N+L) P_b`) add at gain
/// `alpha_eq`.
#[allow(clippy::too_many_arguments)]
pub fn forward_signaling_covariance(
    grid: &OfdmGrid,
    peer_rx: &CMatrix,
    own_ofdm_tx: &CMatrix,
    own_gamma: &CMatrix,
    p_b: f64,
    alpha_b: f64,
    n0: f64,
    model: &ResidualSiModel,
) -> Result<NoiseCovariance> {
    decodable(model)?;
    let n = grid.block_len();
    for m in [peer_rx, own_ofdm_tx] {
        if m.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
        }
    }
    let mut shape = peer_rx * C64::new(alpha_b, 0.0);
    if model.alpha_eq > 0.0 {
        let own = own_ofdm_tx + uniform_signaling_covariance(own_gamma, n as f64 * p_b);
        shape += own * C64::new(model.alpha_eq, 0.0);
    }
    Ok(NoiseCovariance { n0, rho: model.rho, shape: hermitian_part(&shape) })
}

/// Backward phase, OFDM decoded at SN `side` on its subcarriers. With
/// residual SI its own signaling (uniform over `own_gamma`, total `(N+L) P`)
/// lands on those subcarriers. `|N_side| x |N_side|`.
pub fn backward_ofdm_covariance(
    grid: &OfdmGrid,
    side: Side,
    own_gamma: &CMatrix,
    p: f64,
    n0: f64,
    model: &ResidualSiModel,
) -> Result<NoiseCovariance> {
    decodable(model)?;
    let dim = grid.set(side).len();
    let mut shape = CMatrix::zeros(dim, dim);
    if model.alpha_eq > 0.0 {
        let demod = grid.reduced_selector(side) * dft_matrix(grid.n()) * grid.cp_removal();
        let own = uniform_signaling_covariance(own_gamma, grid.block_len() as f64 * p);
        shape = &demod * own * demod.adjoint() * C64::new(model.alpha_eq, 0.0);
    }
    Ok(NoiseCovariance { n0, rho: model.rho, shape: hermitian_part(&shape) })
}

/// Backward phase, signaling decoded at SN `j` from SN `i`. `peer_an_rx` is
/// the OFDM block of SN `i`'s AN as received at SN `j` at unit gain; it
/// arrives with gain `alpha_ji`. With residual SI SN `j`'s own signaling
/// (uniform over `own_gamma`, total `(N+L) P`) adds at gain `alpha_eq`.
#[allow(clippy::too_many_arguments)]
pub fn backward_signaling_covariance(
    grid: &OfdmGrid,
    peer_an_rx: &CMatrix,
    own_gamma: &CMatrix,
    p: f64,
    alpha_ji: f64,
    n0: f64,
    model: &ResidualSiModel,
) -> Result<NoiseCovariance> {
    decodable(model)?;
    let n = grid.block_len();
    if peer_an_rx.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: peer_an_rx.nrows() });
    }
    let mut shape = peer_an_rx * C64::new(alpha_ji, 0.0);
    if model.alpha_eq > 0.0 {
        let own = uniform_signaling_covariance(own_gamma, n as f64 * p);
        shape += own * C64::new(model.alpha_eq, 0.0);
    }
    Ok(NoiseCovariance { n0, rho: model.rho, shape: hermitian_part(&shape) })
}

/// Image of one side's OFDM modulator after a channel:
/// `H^lower A F^H D^H` and `H^upper A F^H D^H`, each `(N+L) x |N_side|`.
/// Received covariances of that side's transmissions then cost two thin
/// products instead of four square ones.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmLeakage {
    pub lower: CMatrix,
    pub upper: CMatrix,
}

impl OfdmLeakage {
    pub fn new(grid: &OfdmGrid, side: Side, channel: &ConvolutionPair) -> Self {
        let modulator = grid.cp_insertion() * dft_matrix(grid.n()).adjoint() * grid.reduced_selector(side).adjoint();
        Self { lower: &channel.lower * &modulator, upper: &channel.upper * &modulator }
    }

    /// Received covariance for a `|N_side| x |N_side|` subcarrier covariance.
    pub fn received(&self, reduced_cov: &CMatrix) -> CMatrix {
        let out = &self.lower * reduced_cov * self.lower.adjoint() + &self.upper * reduced_cov * self.upper.adjoint();
        hermitian_part(&out)
    }

    /// Received covariance for per-subcarrier powers on the side's set.
    pub fn received_diag(&self, p: &[f64]) -> CMatrix {
        let scale = |m: &CMatrix| {
            let mut m = m.clone();
            for (mut col, &pk) in m.column_iter_mut().zip(p) {
                col *= C64::new(libm::sqrt(pk), 0.0);
            }
            m
        };
        let (l, u) = (scale(&self.lower), scale(&self.upper));
        hermitian_part(&(&l * l.adjoint() + &u * u.adjoint()))
    }
}

/// `D_side diag(h) D_side^H`, the backward OFDM channel on one side's
/// subcarriers.
pub fn subcarrier_channel(grid: &OfdmGrid, side: Side, h_tilde: &crate::CVector) -> CMatrix {
    let set = grid.set(side);
    CMatrix::from_fn(set.len(), set.len(), |r, c| if r == c { h_tilde[set[r]] } else { C64::new(0.0, 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{dbm_to_watts, sample_taps, PowerDelayProfile};
    use crate::linalg::{max_abs, real_trace};
    use crate::precoding::{backward_nullspace, forward_nullspace};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn whitening_error(cov: &CMatrix) -> f64 {
        let w = inv_sqrt(cov).unwrap();
        max_abs(&(&w * cov * w.adjoint() - scaled_identity(cov.nrows(), 1.0)))
    }

    fn pair(rng: &mut ChaCha8Rng) -> ConvolutionPair {
        let pdp = PowerDelayProfile::exponential(16, 2.0).unwrap();
        ConvolutionPair::new(&sample_taps(&pdp, rng), 80).unwrap()
    }

    fn half_powers(grid: &OfdmGrid, side: Side, p: f64) -> Vec<f64> {
        let mut out = vec![0.0; grid.n()];
        for &k in grid.set(side) {
            out[k] = p;
        }
        out
    }

    #[test]
    fn regime_table() {
        let n0 = 1e-12;
        let p_th = dbm_to_watts(20.0);
        let p_sat = dbm_to_watts(28.0);
        let m = residual_si(1.0, p_th, p_th, p_sat, n0);
        assert_eq!((m.regime, m.alpha_eq), (Regime::NoResidualSi, 0.0));
        let m = residual_si(0.5, dbm_to_watts(24.0), p_th, p_sat, n0);
        assert_eq!(m.regime, Regime::ResidualSi);
        assert_eq!(m.alpha_eq, n0 / p_th);
        assert!((m.rho_threshold() - 0.398).abs() < 1e-3);
        let m = residual_si(1.0, p_sat, p_th, p_sat, n0);
        assert_eq!(m.regime, Regime::ResidualSi);
        let m = residual_si(0.9, dbm_to_watts(30.0), p_th, p_sat, n0);
        assert_eq!(m.regime, Regime::Saturated);
        // the threshold itself belongs to the lower regime
        let p = dbm_to_watts(24.0);
        assert_eq!(residual_si(p_th / p, p, p_th, p_sat, n0).regime, Regime::NoResidualSi);
    }

    #[test]
    fn inv_sqrt_examples() {
        let w = inv_sqrt(&scaled_identity(3, 4.0)).unwrap();
        assert!(max_abs(&(w - scaled_identity(3, 0.5))) < 1e-15);
        let w = inv_sqrt(&real_diag(&[1.0, 9.0])).unwrap();
        assert!(max_abs(&(w - real_diag(&[1.0, 1.0 / 3.0]))) < 1e-15);
        assert!(matches!(inv_sqrt(&real_diag(&[1.0, 0.0])), Err(Error::NotPositiveDefinite { .. })));
        assert!(matches!(inv_sqrt(&real_diag(&[1.0, -1.0])), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn inv_sqrt_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let a = CMatrix::from_fn(10, 10, |_, _| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)));
            let cov = &a * a.adjoint() + scaled_identity(10, 0.01);
            assert!(whitening_error(&cov) < 1e-8);
        }
    }

    #[test]
    fn forward_covariance_examples() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let hs = pair(&mut rng);
        let gamma = forward_nullspace(&pair(&mut rng), &pair(&mut rng), &grid, Side::Second).unwrap().gamma;
        let n0 = 1e-12;
        let (p, p_th, p_sat) = (dbm_to_watts(24.0), dbm_to_watts(20.0), dbm_to_watts(28.0));
        let peer = half_powers(&grid, Side::First, p / 2.0);
        let own = half_powers(&grid, Side::Second, p / 2.0);

        let peer_rx = through_channel(&hs, &ofdm_time_covariance(&grid, &peer).unwrap());
        let own = ofdm_time_covariance(&grid, &own).unwrap();
        let silent_rx = CMatrix::zeros(80, 80);
        let m0 = residual_si(0.0, p, p_th, p_sat, n0);
        let cov = forward_signaling_covariance(&grid, &peer_rx, &own, &gamma, p / 2.0, 1e-6, n0, &m0).unwrap();
        assert!(max_abs(&(cov.matrix() - scaled_identity(80, n0))) == 0.0);

        let m = residual_si(0.3, p, p_th, p_sat, n0);
        let cov = forward_signaling_covariance(&grid, &silent_rx, &own, &gamma, p / 2.0, 1e-6, n0, &m).unwrap();
        assert!(max_abs(&(cov.matrix() - scaled_identity(80, n0))) == 0.0);

        // residual SI: trace of the signaling term is rho N0 (N+L) P_b / P_th
        let m = residual_si(0.6, p, p_th, p_sat, n0);
        let with = forward_signaling_covariance(&grid, &silent_rx, &silent_rx, &gamma, p / 2.0, 1e-6, n0, &m).unwrap();
        let expected = 0.6 * n0 * 80.0 * (p / 2.0) / p_th;
        let got = real_trace(&with.matrix()) - 80.0 * n0;
        assert!((got - expected).abs() < 1e-9 * expected);
        let lambda_min = *hermitian_eigen(&with.matrix()).values.last().unwrap();
        assert!(lambda_min >= n0 * (1.0 - 1e-9));

        // zero residual terms make the two branches agree at the boundary
        let above = residual_si(p_th / p * (1.0 + 1e-9), p, p_th, p_sat, n0);
        let a = forward_signaling_covariance(&grid, &peer_rx, &silent_rx, &gamma, 0.0, 1e-6, n0, &above).unwrap();
        let below = residual_si(p_th / p, p, p_th, p_sat, n0);
        let b = forward_signaling_covariance(&grid, &peer_rx, &silent_rx, &gamma, 0.0, 1e-6, n0, &below).unwrap();
        assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-8 * max_abs(&b.matrix()));

        let sat = residual_si(1.0, dbm_to_watts(30.0), p_th, p_sat, n0);
        assert_eq!(
            forward_signaling_covariance(&grid, &peer_rx, &own, &gamma, 0.0, 1e-6, n0, &sat).unwrap_err(),
            Error::SaturatedRegime
        );
    }

    #[test]
    fn backward_covariance_examples() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let hs = pair(&mut rng);
        let gamma = backward_nullspace(&hs, &grid, Side::Second).unwrap().gamma;
        let n0 = 1e-12;
        let (p, p_th, p_sat) = (dbm_to_watts(23.0), dbm_to_watts(20.0), dbm_to_watts(28.0));

        let low = residual_si(0.3, p, p_th, p_sat, n0);
        let cov = backward_ofdm_covariance(&grid, Side::First, &gamma, p, n0, &low).unwrap();
        assert_eq!(cov.dim(), 32);
        assert!(max_abs(&(cov.matrix() - scaled_identity(32, n0))) == 0.0);
        let high = residual_si(0.9, p, p_th, p_sat, n0);
        let cov = backward_ofdm_covariance(&grid, Side::First, &gamma, p, n0, &high).unwrap();
        assert!(whitening_error(&cov.matrix()) < 1e-8);

        let h_ji = pair(&mut rng);
        let zero = residual_si(0.0, p, p_th, p_sat, n0);
        let an = OfdmLeakage::new(&grid, Side::First, &h_ji).received_diag(&[1e-3; 32]);
        let cov = backward_signaling_covariance(&grid, &an, &gamma, p, 1e-6, n0, &zero).unwrap();
        assert!(max_abs(&(cov.matrix() - scaled_identity(80, n0))) == 0.0);
        let silent = CMatrix::zeros(80, 80);
        let cov = backward_signaling_covariance(&grid, &silent, &gamma, p, 1e-6, n0, &low).unwrap();
        assert!(max_abs(&(cov.matrix() - scaled_identity(80, n0))) == 0.0);
        let cov = backward_signaling_covariance(&grid, &silent, &gamma, p, 1e-6, n0, &high).unwrap();
        let expected = 0.9 * 80.0 * p * n0 / p_th;
        let got = real_trace(&cov.matrix()) - 80.0 * n0;
        assert!((got - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn leakage_matches_dense_propagation() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let h = pair(&mut rng);
        let leak = OfdmLeakage::new(&grid, Side::Second, &h);
        let p: Vec<f64> = (0..32).map(|k| 0.1 * (1 + k % 5) as f64).collect();
        let mut full = vec![0.0; 64];
        full[32..].copy_from_slice(&p);
        let dense = through_channel(&h, &ofdm_time_covariance(&grid, &full).unwrap());
        let scale = max_abs(&dense);
        assert!(max_abs(&(leak.received_diag(&p) - &dense)) < 1e-12 * scale);
        assert!(max_abs(&(leak.received(&real_diag(&p)) - &dense)) < 1e-12 * scale);
        let b = CMatrix::from_fn(32, 3, |_, _| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)));
        let sub = subcarrier_covariance(&grid, Side::Second, &b, &[1.0, 2.0, 0.5]).unwrap();
        let reduced = &b * real_diag(&[1.0, 2.0, 0.5]) * b.adjoint();
        let dense = through_channel(&h, &ofdm_time_covariance_full(&grid, &sub).unwrap());
        assert!(max_abs(&(leak.received(&reduced) - &dense)) < 1e-12 * max_abs(&dense));
    }

    #[test]
    fn ofdm_covariance_trace() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let p = half_powers(&grid, Side::First, 2.0);
        let c = ofdm_time_covariance(&grid, &p).unwrap();
        // the prefix repeats L of the N data samples, each at average power 1
        assert!((real_trace(&c) - 80.0).abs() < 1e-9);
        assert!(ofdm_time_covariance(&grid, &p[..10]).is_err());
    }

    #[test]
    fn more_interference_never_raises_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let draw = |rng: &mut ChaCha8Rng| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
        for _ in 0..50 {
            let a = CMatrix::from_fn(12, 12, |_, _| draw(&mut rng));
            let b = CMatrix::from_fn(12, 3, |_, _| draw(&mut rng));
            let g = CMatrix::from_fn(12, 5, |_, _| draw(&mut rng));
            let base = &a * a.adjoint() + scaled_identity(12, rng.random_range(0.1..1.0));
            let more = &base + &b * b.adjoint();
            let lo = WhiteningDecomposition::new(more, &g).unwrap();
            let hi = WhiteningDecomposition::new(base, &g).unwrap();
            for (x, y) in lo.gains.iter().zip(&hi.gains) {
                assert!(*x <= y * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn decomposition_rejects_shape_mismatch() {
        let g = CMatrix::zeros(3, 2);
        assert!(WhiteningDecomposition::new(scaled_identity(4, 1.0), &g).is_err());
    }
}
