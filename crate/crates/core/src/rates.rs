//! Water-filling and the achievable rates of the OFDMA and signaling links.
//!
//! Every rate is in bits per channel use including the cyclic prefix, so
//! each carries a `1 / (N + L)` factor.

use alloc::vec;
use alloc::vec::Vec;

use crate::signal::{OfdmGrid, Side};
use crate::whitening::Regime;
use crate::{CVector, Error, Phase, Result};

/// Per-channel powers and the common water level.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub per_channel: Vec<f64>,
    /// `kappa` for water-filling; the common per-channel power for a uniform
    /// allocation.
    pub water_level: f64,
    pub budget: f64,
}

impl PowerAllocation {
    fn silent(n: usize, budget: f64) -> Self {
        Self { per_channel: vec![0.0; n], water_level: 0.0, budget }
    }

    pub fn total(&self) -> f64 {
        self.per_channel.iter().sum()
    }
}

/// Capacity-optimal allocation `p_n = (kappa - 1/g_n)^+` with
/// `sum p_n = budget`.
///
/// The water level is found exactly: channels are ranked by gain and the
/// active set grows while the resulting level stays above the next inverse
/// gain. Equal gains always receive equal power.
pub fn waterfill(gains: &[f64], budget: f64) -> Result<PowerAllocation> {
    if budget.is_nan() || budget < 0.0 || gains.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(Error::InvalidArgument("gains and budget must be nonnegative"));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&k| gains[k] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::AllGainsZero);
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut inv_sum = 0.0;
    let mut kappa = 0.0;
    for (k, &idx) in order.iter().enumerate() {
        let inv = 1.0 / gains[idx];
        let candidate = (budget + inv_sum + inv) / (k + 1) as f64;
        if k > 0 && candidate <= inv {
            break;
        }
        inv_sum += inv;
        kappa = candidate;
    }
    let per_channel = gains
        .iter()
        .map(|&g| if g > 0.0 { (kappa - 1.0 / g).max(0.0) } else { 0.0 })
        .collect();
    Ok(PowerAllocation { per_channel, water_level: kappa, budget })
}

/// `budget / n` on every channel.
pub fn uniform(n: usize, budget: f64) -> PowerAllocation {
    let each = if n == 0 { 0.0 } else { budget / n as f64 };
    PowerAllocation { per_channel: vec![each; n], water_level: each, budget }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocationPolicy {
    WaterFilling,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    Ofdma,
    Signaling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rate: f64,
    pub phase: Phase,
    pub link: LinkKind,
    pub regime: Regime,
    pub rho: f64,
    pub allocation: PowerAllocation,
}

/// `(1 / block_len) sum log2(1 + g_n p_n)` under the given policy. A zero
/// budget or an all-zero gain vector yields rate 0 with a silent allocation.
pub fn parallel_rate(
    gains: &[f64],
    budget: f64,
    policy: AllocationPolicy,
    block_len: usize,
) -> Result<(f64, PowerAllocation)> {
    if budget == 0.0 || gains.iter().all(|&g| g == 0.0) {
        return Ok((0.0, PowerAllocation::silent(gains.len(), budget)));
    }
    let alloc = match policy {
        AllocationPolicy::WaterFilling => waterfill(gains, budget)?,
        AllocationPolicy::Uniform => uniform(gains.len(), budget),
    };
    let bits: f64 = gains.iter().zip(&alloc.per_channel).map(|(g, p)| libm::log1p(g * p)).sum::<f64>()
        / core::f64::consts::LN_2;
    Ok((bits / block_len as f64, alloc))
}

fn decodable(regime: Regime) -> Result<()> {
    if regime == Regime::Saturated {
        return Err(Error::SaturatedRegime);
    }
    Ok(())
}

fn subcarrier_snr(h_tilde: &CVector, grid: &OfdmGrid, side: Side, scale: f64) -> Result<Vec<f64>> {
    if h_tilde.len() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), found: h_tilde.len() });
    }
    Ok(grid.set(side).iter().map(|&k| scale * h_tilde[k].norm_sqr()).collect())
}

/// Forward OFDMA link from SN `side` to its AN, water-filling a per-block
/// budget `N P_o` over the side's subcarriers. Not affected by the divider.
pub fn rate_forward_ofdma(
    h_tilde: &CVector,
    alpha_ii: f64,
    p_o: f64,
    n0: f64,
    grid: &OfdmGrid,
    side: Side,
) -> Result<RateReport> {
    let gains = subcarrier_snr(h_tilde, grid, side, alpha_ii / n0)?;
    let (rate, allocation) =
        parallel_rate(&gains, grid.n() as f64 * p_o, AllocationPolicy::WaterFilling, grid.block_len())?;
    Ok(RateReport { rate, phase: Phase::Forward, link: LinkKind::Ofdma, regime: Regime::NoResidualSi, rho: 1.0, allocation })
}

/// Channel description of a backward OFDM link.
#[derive(Debug, Clone, Copy)]
pub enum OfdmChannel<'a> {
    /// Frequency response on all `N` subcarriers; the noise is white.
    Frequency(&'a CVector),
    /// Singular values of the whitened subcarrier channel, on the side's
    /// subcarriers.
    Whitened(&'a [f64]),
}

/// Backward OFDMA link from the AN of `side` to its SN, water-filling a
/// per-block budget `N P_A`.
#[allow(clippy::too_many_arguments)]
pub fn rate_backward_ofdm(
    channel: OfdmChannel<'_>,
    rho: f64,
    alpha_ii: f64,
    p_a: f64,
    n0: f64,
    grid: &OfdmGrid,
    regime: Regime,
    side: Side,
) -> Result<RateReport> {
    decodable(regime)?;
    let gains = match channel {
        OfdmChannel::Frequency(h) => subcarrier_snr(h, grid, side, rho * alpha_ii / n0)?,
        OfdmChannel::Whitened(s) => {
            if s.len() != grid.set(side).len() {
                return Err(Error::DimensionMismatch { expected: grid.set(side).len(), found: s.len() });
            }
            s.iter().map(|x| rho * alpha_ii * x * x).collect()
        }
    };
    let (rate, allocation) =
        parallel_rate(&gains, grid.n() as f64 * p_a, AllocationPolicy::WaterFilling, grid.block_len())?;
    Ok(RateReport { rate, phase: Phase::Backward, link: LinkKind::Ofdma, regime, rho, allocation })
}

/// Signaling rate over the whitened streams with singular values
/// `singular_values`. Water-filling without residual SI, uniform with it;
/// either way the per-block budget is `(N+L) power`.
pub fn signaling_rate(
    phase: Phase,
    singular_values: &[f64],
    rho: f64,
    alpha_b: f64,
    power: f64,
    grid: &OfdmGrid,
    regime: Regime,
) -> Result<RateReport> {
    decodable(regime)?;
    let policy = match regime {
        Regime::NoResidualSi => AllocationPolicy::WaterFilling,
        _ => AllocationPolicy::Uniform,
    };
    let gains: Vec<f64> = singular_values.iter().map(|s| rho * alpha_b * s * s).collect();
    let (rate, allocation) = parallel_rate(&gains, grid.block_len() as f64 * power, policy, grid.block_len())?;
    Ok(RateReport { rate, phase, link: LinkKind::Signaling, regime, rho, allocation })
}

/// Forward signaling between the SNs with per-symbol power `P_b`.
pub fn rate_forward_signaling(
    singular_values: &[f64],
    rho: f64,
    alpha_b: f64,
    p_b: f64,
    grid: &OfdmGrid,
    regime: Regime,
) -> Result<RateReport> {
    signaling_rate(Phase::Forward, singular_values, rho, alpha_b, p_b, grid, regime)
}

/// Backward signaling between the SNs with per-symbol power `P`.
pub fn rate_backward_signaling(
    singular_values: &[f64],
    rho: f64,
    alpha_b: f64,
    p: f64,
    grid: &OfdmGrid,
    regime: Regime,
) -> Result<RateReport> {
    signaling_rate(Phase::Backward, singular_values, rho, alpha_b, p, grid, regime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use proptest::prelude::*;

    #[test]
    fn waterfill_examples() {
        let a = waterfill(&[1.0, 1.0], 2.0).unwrap();
        assert_eq!(a.per_channel, vec![1.0, 1.0]);
        assert_eq!(a.water_level, 2.0);
        let a = waterfill(&[1.0, 1e-9], 1.0).unwrap();
        assert_eq!(a.per_channel, vec![1.0, 0.0]);
        let a = waterfill(&[2.0, 1.0], 1.0).unwrap();
        assert!((a.water_level - 1.25).abs() < 1e-15);
        assert!((a.per_channel[0] - 0.75).abs() < 1e-15);
        assert!((a.per_channel[1] - 0.25).abs() < 1e-15);
        assert_eq!(waterfill(&[0.0, 0.0], 1.0).unwrap_err(), Error::AllGainsZero);
        assert!(waterfill(&[1.0, -1.0], 1.0).is_err());
        assert!(waterfill(&[1.0], f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn waterfill_kkt(gains in prop::collection::vec(0.0f64..10.0, 1..12), budget in 1e-3f64..50.0) {
            prop_assume!(gains.iter().any(|&g| g > 0.0));
            let a = waterfill(&gains, budget).unwrap();
            prop_assert!((a.total() - budget).abs() <= 1e-9 * budget);
            for (g, p) in gains.iter().zip(&a.per_channel) {
                if *g == 0.0 {
                    prop_assert_eq!(*p, 0.0);
                } else if *p > 0.0 {
                    prop_assert!((a.water_level - 1.0 / g - p).abs() <= 1e-12 * a.water_level.max(1.0));
                } else {
                    prop_assert!(a.water_level <= 1.0 / g);
                }
            }
        }

        #[test]
        fn waterfill_beats_uniform(gains in prop::collection::vec(1e-3f64..10.0, 1..12), budget in 1e-3f64..50.0) {
            let (wf, _) = parallel_rate(&gains, budget, AllocationPolicy::WaterFilling, 1).unwrap();
            let (un, _) = parallel_rate(&gains, budget, AllocationPolicy::Uniform, 1).unwrap();
            prop_assert!(wf >= un - 1e-12);
        }

        #[test]
        fn equal_gains_get_equal_power(g in 1e-2f64..10.0, n in 1usize..8, budget in 1e-3f64..10.0) {
            let a = waterfill(&vec![g; n], budget).unwrap();
            for p in &a.per_channel {
                prop_assert_eq!(*p, a.per_channel[0]);
            }
        }
    }

    #[test]
    fn flat_forward_ofdma() {
        let grid = OfdmGrid::new(64, 16, (0..64).collect(), vec![]).unwrap();
        let h = CVector::from_element(64, C64::new(1.0, 0.0));
        let r = rate_forward_ofdma(&h, 2.0, 0.5, 1.0, &grid, Side::First).unwrap();
        assert!((r.rate - 0.8).abs() < 1e-14);
        let r = rate_forward_ofdma(&h, 2.0, 0.0, 1.0, &grid, Side::First).unwrap();
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn forward_ofdma_decreases_with_noise() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let h = CVector::from_fn(64, |k, _| C64::new(1.0 + (k as f64 * 0.3).sin(), 0.2));
        let mut last = f64::INFINITY;
        for e in 0..10 {
            let r = rate_forward_ofdma(&h, 1.0, 1.0, 0.1 * 2f64.powi(e), &grid, Side::Second).unwrap().rate;
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn signaling_examples() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let r = rate_forward_signaling(&[1.0; 16], 0.0, 1.0, 1.0, &grid, Regime::NoResidualSi).unwrap();
        assert_eq!(r.rate, 0.0);
        // one stream with rho alpha_b p sigma^2 = 1 carries one bit per block
        let r = rate_forward_signaling(&[1.0], 1.0, 1.0 / 80.0, 1.0, &grid, Regime::ResidualSi).unwrap();
        assert!((r.rate - 1.0 / 80.0).abs() < 1e-15);
        assert_eq!(
            rate_backward_signaling(&[1.0], 1.0, 1.0, 1.0, &grid, Regime::Saturated).unwrap_err(),
            Error::SaturatedRegime
        );
    }

    #[test]
    fn signaling_policy_follows_regime() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let s: Vec<f64> = (0..48).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let wf = rate_backward_signaling(&s, 0.5, 1.0, 0.01, &grid, Regime::NoResidualSi).unwrap();
        let un = rate_backward_signaling(&s, 0.5, 1.0, 0.01, &grid, Regime::ResidualSi).unwrap();
        assert!(wf.rate >= un.rate);
        assert_eq!(un.allocation.per_channel.len(), 48);
        assert!((un.allocation.per_channel[0] - 80.0 * 0.01 / 48.0).abs() < 1e-15);
        let mut last = 0.0;
        for k in 1..=20 {
            let r = rate_backward_signaling(&s, k as f64 / 20.0, 1.0, 0.01, &grid, Regime::NoResidualSi).unwrap().rate;
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn backward_ofdm_inputs_agree_on_white_noise() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let n0 = 0.5;
        let h = CVector::from_fn(64, |k, _| C64::new((k as f64 * 0.7).cos(), 0.3));
        let a = rate_backward_ofdm(OfdmChannel::Frequency(&h), 0.7, 2.0, 1.0, n0, &grid, Regime::NoResidualSi, Side::First)
            .unwrap();
        let s: Vec<f64> = (0..32).map(|k| h[k].norm_sqr().sqrt() / n0.sqrt()).collect();
        let b = rate_backward_ofdm(OfdmChannel::Whitened(&s), 0.7, 2.0, 1.0, n0, &grid, Regime::ResidualSi, Side::First)
            .unwrap();
        assert!((a.rate - b.rate).abs() < 1e-12);
        let z = rate_backward_ofdm(OfdmChannel::Frequency(&h), 0.0, 2.0, 1.0, n0, &grid, Regime::NoResidualSi, Side::First)
            .unwrap();
        assert_eq!(z.rate, 0.0);
        let z = rate_backward_ofdm(OfdmChannel::Frequency(&h), 0.5, 2.0, 0.0, n0, &grid, Regime::NoResidualSi, Side::First)
            .unwrap();
        assert_eq!(z.rate, 0.0);
    }
}
