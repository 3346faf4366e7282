//! Energy recycled per symbol by the harvester behind the power divider.
//!
//! The harvester sees a fraction `1 - rho` of everything leaving the
//! circulator towards the receiver: the signals of the other nodes, the
//! circulator leakage of the node's own transmission (gain `alpha_c`) and
//! the multipath echo of that transmission (gain `alpha_m`).

use crate::channel::ConvolutionPair;
use alloc::vec::Vec;

use crate::linalg::{real_diag, scaled_identity, trace_product};
use crate::{CMatrix, Error, Result, C64};

/// RF-to-DC efficiency and self-interference gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harvester {
    pub beta: f64,
    pub alpha_c: f64,
    pub alpha_m: f64,
}

/// A signal arriving at the antenna: path gain, channel and the transmit
/// covariance of one block at the source.
#[derive(Debug, Clone, Copy)]
pub struct Incoming<'a> {
    pub gain: f64,
    pub channel: &'a ConvolutionPair,
    pub tx_cov: &'a CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// Joules per symbol from the full trace expression.
    pub exact: f64,
    /// `beta alpha_c (1 - rho) P`.
    pub approx: f64,
    /// `exact / e_tx`.
    pub eta_e: f64,
    /// Transmitted energy per symbol.
    pub e_tx: f64,
    pub beta: f64,
}

/// Gram form of the self-interference path: the echo of the previous block
/// `alpha_m H^upper^H H^upper` plus leakage and echo of the current block
/// `(sqrt(alpha_c) I + sqrt(alpha_m) H^lower)^H (...)`.
pub fn self_interference_gram(multipath: &ConvolutionPair, alpha_c: f64, alpha_m: f64) -> CMatrix {
    let n = multipath.block_len();
    let current = scaled_identity(n, libm::sqrt(alpha_c)) + &multipath.lower * C64::new(libm::sqrt(alpha_m), 0.0);
    current.adjoint() * &current + multipath.upper.adjoint() * &multipath.upper * C64::new(alpha_m, 0.0)
}

/// Transmit covariance `Gamma C diag(p) C^H Gamma^H` of precoded streams.
pub fn stream_covariance(gamma: &CMatrix, rotation: &CMatrix, powers: &[f64]) -> Result<CMatrix> {
    if rotation.shape() != (gamma.ncols(), gamma.ncols()) || powers.len() != gamma.ncols() {
        return Err(Error::DimensionMismatch { expected: gamma.ncols(), found: powers.len() });
    }
    let g = gamma * rotation;
    Ok(&g * real_diag(powers) * g.adjoint())
}

fn check_square(m: &CMatrix, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
    }
    Ok(())
}

/// One contribution to the harvested energy: `gain Tr(gram tx_cov)`.
#[derive(Debug, Clone, Copy)]
pub struct EnergyTerm<'a> {
    pub gain: f64,
    /// Gram form of the propagation path, e.g. [`ConvolutionPair::energy_gram`]
    /// or [`self_interference_gram`].
    pub gram: &'a CMatrix,
    pub tx_cov: &'a CMatrix,
}

/// `beta (1 - rho) / block_len` times the sum of the terms, with the
/// propagation Gram forms supplied by the caller.
pub fn recycled_energy_from_terms(
    terms: &[EnergyTerm<'_>],
    block_len: usize,
    harvester: &Harvester,
    rho: f64,
    e_tx: f64,
) -> Result<EnergyReport> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument("rho must lie in [0, 1]"));
    }
    let mut received = 0.0;
    for t in terms {
        check_square(t.gram, block_len)?;
        check_square(t.tx_cov, block_len)?;
        received += t.gain * trace_product(t.gram, t.tx_cov).re;
    }
    let exact = harvester.beta * (1.0 - rho) * received / block_len as f64;
    Ok(EnergyReport {
        exact,
        approx: harvester.beta * harvester.alpha_c * (1.0 - rho) * e_tx,
        eta_e: exact / e_tx,
        e_tx,
        beta: harvester.beta,
    })
}

/// `beta (1 - rho) / (N + L)` times the energy entering the divider in one
/// block: every incoming signal plus the node's own self-interference.
pub fn recycled_energy(
    incoming: &[Incoming<'_>],
    own_tx_cov: &CMatrix,
    multipath: &ConvolutionPair,
    harvester: &Harvester,
    rho: f64,
    e_tx: f64,
) -> Result<EnergyReport> {
    let n = multipath.block_len();
    let si = self_interference_gram(multipath, harvester.alpha_c, harvester.alpha_m);
    let grams: Vec<CMatrix> = incoming.iter().map(|s| s.channel.energy_gram()).collect();
    let mut terms: Vec<EnergyTerm<'_>> = Vec::with_capacity(incoming.len() + 1);
    terms.push(EnergyTerm { gain: 1.0, gram: &si, tx_cov: own_tx_cov });
    for (s, g) in incoming.iter().zip(&grams) {
        terms.push(EnergyTerm { gain: s.gain, gram: g, tx_cov: s.tx_cov });
    }
    recycled_energy_from_terms(&terms, n, harvester, rho, e_tx)
}

/// Forward phase at an SN transmitting `own_tx_cov` (its OFDM block plus its
/// signaling, per-symbol power `p`) while the peer SN's block `peer_tx_cov`
/// arrives over `hs` with gain `alpha_b`.
#[allow(clippy::too_many_arguments)]
pub fn energy_forward(
    hs: &ConvolutionPair,
    alpha_b: f64,
    peer_tx_cov: &CMatrix,
    own_tx_cov: &CMatrix,
    multipath: &ConvolutionPair,
    harvester: &Harvester,
    rho: f64,
    p: f64,
) -> Result<EnergyReport> {
    let incoming = [Incoming { gain: alpha_b, channel: hs, tx_cov: peer_tx_cov }];
    recycled_energy(&incoming, own_tx_cov, multipath, harvester, rho, p)
}

/// Backward phase at an SN transmitting its signaling `own_tx_cov`
/// (per-symbol power `p`) while its own AN, the other AN and the peer SN's
/// signaling arrive.
#[allow(clippy::too_many_arguments)]
pub fn energy_backward(
    own_an: Incoming<'_>,
    other_an: Incoming<'_>,
    peer_signaling: Incoming<'_>,
    own_tx_cov: &CMatrix,
    multipath: &ConvolutionPair,
    harvester: &Harvester,
    rho: f64,
    p: f64,
) -> Result<EnergyReport> {
    recycled_energy(&[own_an, other_an, peer_signaling], own_tx_cov, multipath, harvester, rho, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_taps, ChannelTaps, PowerDelayProfile};
    use crate::precoding::{backward_nullspace, forward_nullspace};
    use crate::signal::{OfdmGrid, Side};
    use crate::whitening::{ofdm_time_covariance, uniform_signaling_covariance};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(rng: &mut ChaCha8Rng) -> ConvolutionPair {
        let pdp = PowerDelayProfile::exponential(16, 2.0).unwrap();
        ConvolutionPair::new(&sample_taps(&pdp, rng), 80).unwrap()
    }

    fn side_powers(grid: &OfdmGrid, side: Side, p: f64) -> Vec<f64> {
        let mut out = vec![0.0; grid.n()];
        for &k in grid.set(side) {
            out[k] = p;
        }
        out
    }

    struct ForwardSetup {
        grid: OfdmGrid,
        hs: ConvolutionPair,
        multipath: ConvolutionPair,
        own: CMatrix,
        peer: CMatrix,
        p: f64,
    }

    fn forward_setup(seed: u64) -> ForwardSetup {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 0.25;
        let g1 = forward_nullspace(&pair(&mut rng), &pair(&mut rng), &grid, Side::First).unwrap().gamma;
        let g2 = forward_nullspace(&pair(&mut rng), &pair(&mut rng), &grid, Side::Second).unwrap().gamma;
        // N P_o over |N_i| subcarriers and (N+L) P_b over the streams
        let own = ofdm_time_covariance(&grid, &side_powers(&grid, Side::First, p)).unwrap()
            + uniform_signaling_covariance(&g1, 80.0 * p / 2.0);
        let peer = ofdm_time_covariance(&grid, &side_powers(&grid, Side::Second, p)).unwrap()
            + uniform_signaling_covariance(&g2, 80.0 * p / 2.0);
        ForwardSetup { grid, hs: pair(&mut rng), multipath: pair(&mut rng), own, peer, p }
    }

    #[test]
    fn full_divider_recycles_nothing() {
        let s = forward_setup(41);
        let h = Harvester { beta: 0.7, alpha_c: 0.1, alpha_m: 10f64.powf(-3.5) };
        let r = energy_forward(&s.hs, 1e-6, &s.peer, &s.own, &s.multipath, &h, 1.0, s.p).unwrap();
        assert_eq!((r.exact, r.approx, r.eta_e), (0.0, 0.0, 0.0));
    }

    #[test]
    fn forward_collapses_to_leakage() {
        let s = forward_setup(42);
        let h = Harvester { beta: 0.7, alpha_c: 0.1, alpha_m: 0.0 };
        for rho in [0.0, 0.3, 0.9] {
            let r = energy_forward(&s.hs, 0.0, &s.peer, &s.own, &s.multipath, &h, rho, s.p).unwrap();
            let want = 0.7 * (1.0 - rho) * 0.1 * s.p;
            assert!((r.exact - want).abs() <= 1e-10 * want);
            assert!((r.approx - want).abs() <= 1e-15 * want.max(1e-300));
        }
        assert_eq!(s.grid.block_len(), 80);
    }

    #[test]
    fn backward_collapses_to_leakage() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let hs = pair(&mut rng);
        let gamma = backward_nullspace(&hs, &grid, Side::Second).unwrap().gamma;
        let p = 0.1;
        let own = uniform_signaling_covariance(&gamma, 80.0 * p);
        let silent = CMatrix::zeros(80, 80);
        let (a, b, m) = (pair(&mut rng), pair(&mut rng), pair(&mut rng));
        let h = Harvester { beta: 0.7, alpha_c: 0.1, alpha_m: 0.0 };
        let r = energy_backward(
            Incoming { gain: 1e-6, channel: &a, tx_cov: &silent },
            Incoming { gain: 1e-6, channel: &b, tx_cov: &silent },
            Incoming { gain: 0.0, channel: &hs, tx_cov: &own },
            &own,
            &m,
            &h,
            0.4,
            p,
        )
        .unwrap();
        let want = 0.7 * 0.6 * 0.1 * p;
        assert!((r.exact - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn linear_in_one_minus_rho() {
        let s = forward_setup(44);
        let h = Harvester { beta: 0.7, alpha_c: 0.1, alpha_m: 10f64.powf(-3.5) };
        let base = energy_forward(&s.hs, 1e-6, &s.peer, &s.own, &s.multipath, &h, 0.0, s.p).unwrap().exact;
        assert!(base > 0.0);
        for rho in [0.1, 0.5, 0.75] {
            let r = energy_forward(&s.hs, 1e-6, &s.peer, &s.own, &s.multipath, &h, rho, s.p).unwrap();
            assert!((r.exact / (1.0 - rho) - base).abs() <= 1e-12 * base);
            assert!(r.eta_e > 0.0 && r.eta_e <= h.beta);
        }
    }

    #[test]
    fn flat_multipath_gram() {
        // a single echo tap a at delay 0: (sqrt(ac) + sqrt(am) a)^2 I
        let a = 0.5;
        let m = ConvolutionPair::new(&ChannelTaps(vec![C64::new(a, 0.0)]), 4).unwrap();
        let g = self_interference_gram(&m, 0.1, 0.01);
        let want = (0.1f64.sqrt() + 0.1 * a).powi(2);
        assert!((g - scaled_identity(4, want)).iter().all(|z| z.norm_sqr() < 1e-30));
    }

    #[test]
    fn shape_checks() {
        let s = forward_setup(45);
        let h = Harvester { beta: 0.7, alpha_c: 0.1, alpha_m: 0.0 };
        let small = CMatrix::zeros(10, 10);
        assert!(energy_forward(&s.hs, 1e-6, &small, &s.own, &s.multipath, &h, 0.5, s.p).is_err());
        assert!(energy_forward(&s.hs, 1e-6, &s.peer, &small, &s.multipath, &h, 0.5, s.p).is_err());
        assert!(energy_forward(&s.hs, 1e-6, &s.peer, &s.own, &s.multipath, &h, 1.5, s.p).is_err());
        assert!(stream_covariance(&CMatrix::zeros(4, 2), &scaled_identity(2, 1.0), &[1.0]).is_err());
    }
}
