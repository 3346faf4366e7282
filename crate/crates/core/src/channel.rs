//! Frequency-selective block-fading channels and link budgets.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::signal::{dft_matrix, OfdmGrid};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Exponentially decaying tap variances `exp(-n * Ts/tau)`, normalized to
/// unit total power so that average link power is carried by the path-loss
/// factors alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    variances: Vec<f64>,
    decay_ratio: f64,
}

impl PowerDelayProfile {
    /// Profile with `max_delay + 1` taps.
    pub fn exponential(max_delay: usize, decay_ratio: f64) -> Result<Self> {
        if !decay_ratio.is_finite() || decay_ratio <= 0.0 {
            return Err(Error::InvalidArgument("PDP decay ratio must be positive"));
        }
        let raw: Vec<f64> = (0..=max_delay).map(|n| libm::exp(-(n as f64) * decay_ratio)).collect();
        let total: f64 = raw.iter().sum();
        Ok(Self { variances: raw.into_iter().map(|v| v / total).collect(), decay_ratio })
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn decay_ratio(&self) -> f64 {
        self.decay_ratio
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }
}

/// Channel impulse response `h(0), ..., h(l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTaps(pub Vec<C64>);

impl ChannelTaps {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Draw each tap as an independent circularly-symmetric complex Gaussian
/// with the profile's variance.
pub fn sample_taps<R: Rng + ?Sized>(pdp: &PowerDelayProfile, rng: &mut R) -> ChannelTaps {
    ChannelTaps(
        pdp.variances
            .iter()
            .map(|&var| {
                let s = libm::sqrt(var / 2.0);
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re * s, im * s)
            })
            .collect(),
    )
}

/// Block convolution matrix split into its causal part (inter-symbol
/// interference, applied to the current block) and its wrap-around part
/// (inter-block interference, applied to the previous block).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionPair {
    pub full: CMatrix,
    pub lower: CMatrix,
    pub upper: CMatrix,
}

impl ConvolutionPair {
    /// `full[m][k] = h((m - k) mod block)` when that delay is a valid tap.
    pub fn new(taps: &ChannelTaps, block: usize) -> Result<Self> {
        if taps.is_empty() || taps.len() > block {
            return Err(Error::TapsExceedBlock { taps: taps.len(), block });
        }
        let mut lower = CMatrix::zeros(block, block);
        let mut upper = CMatrix::zeros(block, block);
        for m in 0..block {
            for (d, &h) in taps.0.iter().enumerate() {
                if d <= m {
                    lower[(m, m - d)] = h;
                } else {
                    upper[(m, block + m - d)] = h;
                }
            }
        }
        let full = &lower + &upper;
        Ok(Self { full, lower, upper })
    }

    pub fn block_len(&self) -> usize {
        self.full.nrows()
    }

    /// `lower^H lower + upper^H upper`, the Gram form that maps a transmit
    /// covariance to received energy when consecutive blocks are independent.
    pub fn energy_gram(&self) -> CMatrix {
        self.lower.adjoint() * &self.lower + self.upper.adjoint() * &self.upper
    }
}

/// Frequency response `sqrt(N) F [h; 0]` on the grid's `N` subcarriers.
pub fn freq_response(taps: &ChannelTaps, grid: &OfdmGrid) -> Result<CVector> {
    let n = grid.n();
    if taps.len() > n {
        return Err(Error::TapsExceedBlock { taps: taps.len(), block: n });
    }
    let mut padded = CVector::zeros(n);
    for (k, &h) in taps.0.iter().enumerate() {
        padded[k] = h;
    }
    Ok(dft_matrix(n) * padded * C64::new(libm::sqrt(n as f64), 0.0))
}

/// Distance-dependent indoor path loss
/// `PL(dB) = 20 log10(f_MHz) + slope log10(d_m) + constant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndoorPathLoss {
    /// Distance power loss coefficient in dB per decade; 20 gives the
    /// free-space slope of about 6 dB per doubling of distance.
    pub slope_db: f64,
    pub constant_db: f64,
}

impl Default for IndoorPathLoss {
    fn default() -> Self {
        Self { slope_db: 20.0, constant_db: -28.0 }
    }
}

impl IndoorPathLoss {
    pub fn loss_db(&self, carrier_hz: f64, distance_m: f64) -> Result<f64> {
        if carrier_hz.is_nan() || carrier_hz <= 0.0 {
            return Err(Error::InvalidArgument("carrier frequency must be positive"));
        }
        if distance_m.is_nan() || distance_m < 1.0 {
            return Err(Error::InvalidArgument("indoor path loss model is valid for d >= 1 m"));
        }
        Ok(20.0 * libm::log10(carrier_hz / 1e6) + self.slope_db * libm::log10(distance_m) + self.constant_db)
    }

    /// Linear power gain `10^(-PL/10)`.
    pub fn gain(&self, carrier_hz: f64, distance_m: f64) -> Result<f64> {
        Ok(db_to_linear(-self.loss_db(carrier_hz, distance_m)?))
    }
}

/// Linear gain of the default indoor model.
pub fn indoor_path_loss(carrier_hz: f64, distance_m: f64) -> Result<f64> {
    IndoorPathLoss::default().gain(carrier_hz, distance_m)
}

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts) + 30.0
}

/// Linear power gains of every link in the four-node scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// SN to AN path loss, shared by the direct (`ii`) and cross (`ij`) links.
    pub alpha_sa: f64,
    /// SN to SN path loss.
    pub alpha_b: f64,
    /// Circulator leakage ratio.
    pub alpha_c: f64,
    /// Multipath self-interference attenuation.
    pub alpha_m: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| a > 0.0 && a <= 1.0;
        if ok(self.alpha_sa) && ok(self.alpha_b) && ok(self.alpha_c) && ok(self.alpha_m) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("link gains must lie in (0, 1]"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::ComplexField;
    use crate::linalg::max_abs;
    use crate::signal::Side;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_tap_profile() {
        assert_eq!(PowerDelayProfile::exponential(0, 2.5).unwrap().variances(), &[1.0]);
    }

    #[test]
    fn profile_decay_and_normalization() {
        let p = PowerDelayProfile::exponential(16, 2.0).unwrap();
        assert_eq!(p.len(), 17);
        assert!((p.variances()[1] / p.variances()[0] - (-2.0f64).exp()).abs() < 1e-15);
        assert!((p.variances()[1] / p.variances()[0] - 0.1353).abs() < 1e-4);
        assert!((p.variances().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.variances().windows(2).all(|w| w[0] > w[1]));

        let p = PowerDelayProfile::exponential(2, 1.0).unwrap();
        let z = 1.0 + (-1.0f64).exp() + (-2.0f64).exp();
        let want = [1.0 / z, (-1.0f64).exp() / z, (-2.0f64).exp() / z];
        for (a, b) in p.variances().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_rejects_bad_ratio() {
        assert!(PowerDelayProfile::exponential(4, 0.0).is_err());
        assert!(PowerDelayProfile::exponential(4, -1.0).is_err());
    }

    #[test]
    fn tap_sampling_is_seeded() {
        let p = PowerDelayProfile::exponential(0, 1.0).unwrap();
        let a = sample_taps(&p, &mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_taps(&p, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn tap_statistics() {
        let p = PowerDelayProfile::exponential(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 100_000;
        let mut var0 = 0.0;
        let mut cross = C64::new(0.0, 0.0);
        for _ in 0..draws {
            let t = sample_taps(&p, &mut rng);
            var0 += t.0[0].norm_sqr();
            cross += t.0[0] * t.0[1].conj();
        }
        var0 /= draws as f64;
        cross /= draws as f64;
        assert!((var0 / p.variances()[0] - 1.0).abs() < 0.02, "var0={var0}");
        assert!(cross.modulus() < 0.02, "cross={cross}");
    }

    #[test]
    fn flat_channel_matrices() {
        let pair = ConvolutionPair::new(&ChannelTaps(vec![c(1.0, 0.0)]), 5).unwrap();
        assert_eq!(pair.full, CMatrix::identity(5, 5));
        assert_eq!(pair.lower, CMatrix::identity(5, 5));
        assert_eq!(pair.upper, CMatrix::zeros(5, 5));
    }

    #[test]
    fn two_tap_layout() {
        let (a, b) = (c(1.0, 2.0), c(-3.0, 0.5));
        let pair = ConvolutionPair::new(&ChannelTaps(vec![a, b]), 3).unwrap();
        let z = c(0.0, 0.0);
        let want = CMatrix::from_row_slice(3, 3, &[a, z, b, b, a, z, z, b, a]);
        assert_eq!(pair.full, want);
        let mut up = CMatrix::zeros(3, 3);
        up[(0, 2)] = b;
        assert_eq!(pair.upper, up);
        assert_eq!(&pair.lower + &pair.upper, pair.full);
    }

    #[test]
    fn rejects_taps_longer_than_block() {
        let taps = ChannelTaps(vec![c(1.0, 0.0); 4]);
        assert_eq!(ConvolutionPair::new(&taps, 3).unwrap_err(), Error::TapsExceedBlock { taps: 4, block: 3 });
        let grid = OfdmGrid::contiguous(2, 1).unwrap();
        assert!(freq_response(&ChannelTaps(vec![c(1.0, 0.0); 3]), &grid).is_err());
    }

    #[test]
    fn full_matrix_is_cyclic_convolution() {
        // oracle: direct modular-index sum
        let p = PowerDelayProfile::exponential(16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let taps = sample_taps(&p, &mut rng);
            let pair = ConvolutionPair::new(&taps, 80).unwrap();
            assert_eq!(&pair.lower + &pair.upper, pair.full);
            let x = CVector::from_fn(80, |k, _| c((k as f64 * 0.37).sin(), (k as f64 * 1.3).cos()));
            let y = &pair.full * &x;
            for m in 0..80 {
                let mut acc = c(0.0, 0.0);
                for (d, h) in taps.0.iter().enumerate() {
                    acc += h * x[(m + 80 - d) % 80];
                }
                assert!((acc - y[m]).modulus() < 1e-10);
            }
        }
    }

    #[test]
    fn freq_response_examples() {
        let grid = OfdmGrid::contiguous(2, 1).unwrap();
        let h = freq_response(&ChannelTaps(vec![c(0.5, 0.0), c(0.5, 0.0)]), &grid).unwrap();
        assert!((h[0] - c(1.0, 0.0)).modulus() < 1e-15);
        assert!(h[1].modulus() < 1e-15);

        let grid = OfdmGrid::contiguous(16, 4).unwrap();
        let h = freq_response(&ChannelTaps(vec![c(1.0, 0.0)]), &grid).unwrap();
        assert!(h.iter().all(|z| (z - c(1.0, 0.0)).modulus() < 1e-14));
    }

    #[test]
    fn parseval() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let p = PowerDelayProfile::exponential(16, 2.0).unwrap();
        let taps = sample_taps(&p, &mut ChaCha8Rng::seed_from_u64(11));
        let h = freq_response(&taps, &grid).unwrap();
        let lhs = h.norm_squared() / 64.0;
        assert!((lhs - taps.energy()).abs() <= 1e-12 * taps.energy());
    }

    #[test]
    fn ofdm_diagonalizes_causal_part() {
        let grid = OfdmGrid::contiguous(64, 16).unwrap();
        let p = PowerDelayProfile::exponential(16, 2.0).unwrap();
        let taps = sample_taps(&p, &mut ChaCha8Rng::seed_from_u64(12));
        let pair = ConvolutionPair::new(&taps, 80).unwrap();
        let f = dft_matrix(64);
        let m = &f * grid.cp_removal() * &pair.lower * grid.cp_insertion() * f.adjoint();
        let h = freq_response(&taps, &grid).unwrap();
        let mut off = m.clone();
        for k in 0..64 {
            assert!((m[(k, k)] - h[k]).modulus() < 1e-10);
            off[(k, k)] = c(0.0, 0.0);
        }
        assert!(max_abs(&off) < 1e-10);
        // the wrap-around part never reaches the data portion when l <= L
        let ibi = grid.cp_removal() * &pair.upper;
        assert!(max_abs(&ibi) == 0.0);
        let _ = Side::First;
    }

    #[test]
    fn path_loss_values() {
        let pl10 = IndoorPathLoss::default().loss_db(1800e6, 10.0).unwrap();
        assert!((pl10 - 57.1).abs() < 0.05, "{pl10}");
        let pl20 = IndoorPathLoss::default().loss_db(1800e6, 20.0).unwrap();
        assert!((pl20 - pl10 - 20.0 * 2.0f64.log10()).abs() < 1e-12);
        assert!((pl20 - pl10 - 6.02).abs() < 0.001);
        let pl15 = IndoorPathLoss::default().loss_db(1800e6, 15.0).unwrap();
        assert!((pl15 - 60.6).abs() < 0.05, "{pl15}");
        assert!((indoor_path_loss(1800e6, 10.0).unwrap() - db_to_linear(-pl10)).abs() < 1e-20);
        assert!(indoor_path_loss(1800e6, 0.5).is_err());
    }

    #[test]
    fn power_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(20.0) - 0.1).abs() < 1e-15);
        assert!((dbm_to_watts(28.0) - 0.631).abs() < 1e-3);
        for p in [-95.0, 0.0, 17.3, 28.0] {
            assert!((watts_to_dbm(dbm_to_watts(p)) - p).abs() < 1e-12);
        }
    }
}
