//! One channel realization of the four-node network and the per-phase models
//! evaluated on it.
//!
//! SN `i` serves AN `i` on subcarrier side `i`. `an[i][j]` is the reciprocal
//! channel between SN `i` and AN `j`, `hs` the SN-to-SN channel and
//! `multipath[i]` the self-interference echo at SN `i`. Both SNs use the same
//! splitting ratio. Reported metrics are those of SN 1 (index 0); the other
//! SN is modeled in full because its allocations shape what SN 1 receives.

use fdsim_core::approx::optimal_rho;
use fdsim_core::channel::{freq_response, sample_taps, ChannelTaps, ConvolutionPair, PowerDelayProfile};
use fdsim_core::energy::{self_interference_gram, stream_covariance, EnergyReport, EnergyTerm};
use fdsim_core::linalg::{real_diag, scaled_identity, whitened_gram_eigen, HermitianEigen};
use fdsim_core::precoding::{backward_nullspace, forward_constraints, forward_nullspace, backward_constraint};
use fdsim_core::rates::{
    rate_backward_ofdm, rate_backward_signaling, rate_forward_ofdma, rate_forward_signaling, OfdmChannel,
    PowerAllocation, RateReport,
};
use fdsim_core::signal::{dft_matrix, OfdmGrid, Side};
use fdsim_core::whitening::{
    backward_ofdm_covariance, backward_signaling_covariance, forward_signaling_covariance, residual_si,
    subcarrier_channel, through_channel, OfdmLeakage, Regime, ResidualSiModel, WhiteningDecomposition,
};
use fdsim_core::{CMatrix, CVector, Error, C64};
use rand::Rng;

use crate::config::{Budget, ScenarioConfig};
use crate::SimError;

const SIDES: [Side; 2] = [Side::First, Side::Second];

/// Everything derived from the configuration alone.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: ScenarioConfig,
    pub grid: OfdmGrid,
    pub pdp: PowerDelayProfile,
    pub budget: Budget,
    /// `A F^H D_side^H`, `(N+L) x |N_side|`.
    modulators: [CMatrix; 2],
}

impl Context {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let pdp = PowerDelayProfile::exponential(cfg.max_delay, cfg.decay_ratio)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let base = grid.cp_insertion() * dft_matrix(grid.n()).adjoint();
        let modulators = SIDES.map(|s| &base * grid.reduced_selector(s).adjoint());
        Ok(Self { cfg: cfg.clone(), grid, pdp, budget: cfg.budget(), modulators })
    }

    /// Time-domain covariance of an OFDM transmitter on `side` with reduced
    /// subcarrier covariance `reduced`.
    pub fn ofdm_tx(&self, side: Side, reduced: &CMatrix) -> CMatrix {
        let m = &self.modulators[side.index()];
        m * reduced * m.adjoint()
    }

    pub fn residual(&self, rho: f64, p: f64) -> ResidualSiModel {
        residual_si(rho, p, self.budget.p_th, self.budget.p_sat, self.budget.n0)
    }

    /// Residual-SI model of the `ResidualSi` branch regardless of `rho`.
    fn si_branch(&self, p: f64) -> ResidualSiModel {
        let b = &self.budget;
        ResidualSiModel {
            rho: 1.0,
            p,
            p_th: b.p_th,
            p_sat: b.p_sat,
            alpha_eq: b.n0 / b.p_th,
            regime: Regime::ResidualSi,
        }
    }

    fn no_si_branch(&self, p: f64) -> ResidualSiModel {
        self.residual(0.0, p)
    }

    /// Forward-phase SN power at the configured operating point.
    pub fn p_forward(&self) -> f64 {
        fdsim_core::channel::dbm_to_watts(self.cfg.p_dbm)
    }

    /// Backward-phase SN power for a forward-phase power in dBm.
    pub fn backward_power(&self, p_dbm: f64) -> f64 {
        fdsim_core::channel::dbm_to_watts(p_dbm - self.cfg.backward_offset_db)
    }
}

/// Raw tap vectors of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub an: [[ChannelTaps; 2]; 2],
    pub hs: ChannelTaps,
    pub multipath: [ChannelTaps; 2],
}

impl Draw {
    /// Samples in a fixed order: `an[0][0], an[0][1], an[1][0], an[1][1],
    /// hs, multipath[0], multipath[1]`.
    pub fn sample<R: Rng + ?Sized>(pdp: &PowerDelayProfile, rng: &mut R) -> Self {
        let mut next = || sample_taps(pdp, rng);
        let an = [[next(), next()], [next(), next()]];
        let hs = next();
        let multipath = [next(), next()];
        Self { an, hs, multipath }
    }
}

/// Convolution matrices, frequency responses, precoders and propagation
/// Gram forms of one realization.
#[derive(Debug, Clone)]
pub struct Realization {
    pub draw: Draw,
    pub an: [[ConvolutionPair; 2]; 2],
    pub hs: ConvolutionPair,
    pub multipath: [ConvolutionPair; 2],
    /// `h_tilde` of SN `i` to its own AN.
    pub own_freq: [CVector; 2],
    pub gamma_fwd: [CMatrix; 2],
    /// Backward precoder of SN `i`, protecting the other side.
    pub gamma_bwd: [CMatrix; 2],
    pub si_gram: [CMatrix; 2],
    pub hs_gram: CMatrix,
    pub an_gram: [[CMatrix; 2]; 2],
}

impl Realization {
    /// Fails with the core error when a precoder has the wrong dimension,
    /// which callers treat as a degenerate draw.
    pub fn new(ctx: &Context, draw: Draw) -> Result<Self, Error> {
        let block = ctx.grid.block_len();
        let conv = |t: &ChannelTaps| ConvolutionPair::new(t, block);
        let an = [
            [conv(&draw.an[0][0])?, conv(&draw.an[0][1])?],
            [conv(&draw.an[1][0])?, conv(&draw.an[1][1])?],
        ];
        let hs = conv(&draw.hs)?;
        let multipath = [conv(&draw.multipath[0])?, conv(&draw.multipath[1])?];
        let own_freq = [freq_response(&draw.an[0][0], &ctx.grid)?, freq_response(&draw.an[1][1], &ctx.grid)?];
        let mut gamma_fwd = Vec::with_capacity(2);
        let mut gamma_bwd = Vec::with_capacity(2);
        for (i, side) in SIDES.into_iter().enumerate() {
            gamma_fwd.push(forward_nullspace(&an[i][i], &an[i][1 - i], &ctx.grid, side)?.gamma);
            gamma_bwd.push(backward_nullspace(&hs, &ctx.grid, side.other())?.gamma);
        }
        let h = &ctx.budget.harvester;
        let si_gram = [
            self_interference_gram(&multipath[0], h.alpha_c, h.alpha_m),
            self_interference_gram(&multipath[1], h.alpha_c, h.alpha_m),
        ];
        let an_gram = [[an[0][0].energy_gram(), an[0][1].energy_gram()], [an[1][0].energy_gram(), an[1][1].energy_gram()]];
        let hs_gram = hs.energy_gram();
        let [g0, g1]: [CMatrix; 2] = gamma_fwd.try_into().expect("two sides");
        let [b0, b1]: [CMatrix; 2] = gamma_bwd.try_into().expect("two sides");
        Ok(Self {
            draw,
            an,
            hs,
            multipath,
            own_freq,
            gamma_fwd: [g0, g1],
            gamma_bwd: [b0, b1],
            si_gram,
            hs_gram,
            an_gram,
        })
    }

    /// Relative constraint residuals of the three precoder families:
    /// forward own AN, forward other AN, backward peer subcarriers.
    pub fn constraint_residuals(&self, grid: &OfdmGrid) -> [f64; 3] {
        let rel = |m: &CMatrix, g: &CMatrix| {
            let scale = fdsim_core::linalg::max_abs(m);
            fdsim_core::linalg::max_abs(&(m * g)) / scale
        };
        let mut out = [0.0f64; 3];
        for (i, side) in SIDES.into_iter().enumerate() {
            let [own, cross] = forward_constraints(&self.an[i][i], &self.an[i][1 - i], grid, side);
            out[0] = out[0].max(rel(&own, &self.gamma_fwd[i]));
            out[1] = out[1].max(rel(&cross, &self.gamma_fwd[i]));
            let b = backward_constraint(&self.hs, grid, side.other());
            out[2] = out[2].max(rel(&b, &self.gamma_bwd[i]));
        }
        out
    }
}

/// `N0 I + rho * shape`.
fn covariance(n0: f64, rho: f64, shape: &CMatrix) -> CMatrix {
    shape * C64::new(rho, 0.0) + scaled_identity(shape.nrows(), n0)
}

/// Per-channel powers a transmitter actually radiates: the allocation, or
/// the budget spread evenly when nothing is decodable (`rho = 0`).
pub fn radiated_powers(alloc: &PowerAllocation) -> Vec<f64> {
    let n = alloc.per_channel.len();
    if alloc.total() > 0.0 || n == 0 {
        alloc.per_channel.clone()
    } else {
        vec![alloc.budget / n as f64; n]
    }
}

fn silent_policy_regime(ctx: &Context, rho: f64, p: f64) -> Result<Regime, Error> {
    let regime = ctx.residual(rho, p).regime;
    if regime == Regime::Saturated {
        return Err(Error::SaturatedRegime);
    }
    Ok(regime)
}

/// Metrics of SN 1 at one splitting ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub rho: f64,
    pub regime: Regime,
    /// Forward: SN to AN OFDMA (independent of `rho`). Backward: AN to SN.
    pub ofdm: RateReport,
    pub signaling: RateReport,
    pub energy: EnergyReport,
}

/// Forward phase of one realization at SN power `p`.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub p: f64,
    pub p_o: f64,
    pub p_b: f64,
    pub ofdma: [RateReport; 2],
    pub ofdm_tx: [CMatrix; 2],
    /// `H_s^lower Gamma_peer`, the signaling channel seen by decoder `k`.
    pub channel: [CMatrix; 2],
    shape_none: [CMatrix; 2],
    shape_si: [CMatrix; 2],
}

impl ForwardModel {
    pub fn new(ctx: &Context, r: &Realization, p: f64) -> Result<Self, Error> {
        let b = &ctx.budget;
        let p_o = ctx.cfg.power_split_fwd * p;
        let p_b = p - p_o;
        let mut ofdma = Vec::with_capacity(2);
        let mut ofdm_tx = Vec::with_capacity(2);
        for (i, side) in SIDES.into_iter().enumerate() {
            let report = rate_forward_ofdma(&r.own_freq[i], b.alpha_sa, p_o, b.n0, &ctx.grid, side)?;
            ofdm_tx.push(ctx.ofdm_tx(side, &real_diag(&radiated_powers(&report.allocation))));
            ofdma.push(report);
        }
        let none = ctx.no_si_branch(p);
        let si = ctx.si_branch(p);
        let mut channel = Vec::with_capacity(2);
        let mut shape_none = Vec::with_capacity(2);
        let mut shape_si = Vec::with_capacity(2);
        for k in 0..2 {
            let peer = 1 - k;
            let peer_rx = through_channel(&r.hs, &ofdm_tx[peer]);
            channel.push(&r.hs.lower * &r.gamma_fwd[peer]);
            let assemble = |m: &ResidualSiModel| {
                forward_signaling_covariance(&ctx.grid, &peer_rx, &ofdm_tx[k], &r.gamma_fwd[k], p_b, b.alpha_b, b.n0, m)
            };
            shape_none.push(assemble(&none)?.shape);
            shape_si.push(assemble(&si)?.shape);
        }
        Ok(Self {
            p,
            p_o,
            p_b,
            ofdma: pair(ofdma),
            ofdm_tx: pair(ofdm_tx),
            channel: pair(channel),
            shape_none: pair(shape_none),
            shape_si: pair(shape_si),
        })
    }

    /// Interference shape at decoder `k`: the covariance is `N0 I + rho
    /// shape`.
    pub fn shape(&self, k: usize, regime: Regime) -> &CMatrix {
        if regime == Regime::NoResidualSi {
            &self.shape_none[k]
        } else {
            &self.shape_si[k]
        }
    }

    /// Equivalent-noise covariance at decoder `k` for a regime.
    pub fn covariance(&self, ctx: &Context, k: usize, rho: f64, regime: Regime) -> CMatrix {
        covariance(ctx.budget.n0, rho, self.shape(k, regime))
    }

    fn decode(&self, ctx: &Context, k: usize, rho: f64, regime: Regime) -> Result<(RateReport, HermitianEigen), Error> {
        let eig = whitened_gram_eigen(&self.covariance(ctx, k, rho, regime), &self.channel[k])?;
        let sv: Vec<f64> = eig.values.iter().map(|v| v.sqrt()).collect();
        let report = rate_forward_signaling(&sv, rho, ctx.budget.alpha_b, self.p_b, &ctx.grid, regime)?;
        Ok((report, eig))
    }

    /// Signaling rate into SN 1 only.
    pub fn signaling_rate(&self, ctx: &Context, rho: f64) -> Result<f64, Error> {
        let regime = silent_policy_regime(ctx, rho, self.p)?;
        Ok(self.decode(ctx, 0, rho, regime)?.0.rate)
    }

    /// Signaling rate into SN 1 with the regime forced, for probing one
    /// branch.
    pub fn signaling_rate_in(&self, ctx: &Context, rho: f64, regime: Regime) -> Result<f64, Error> {
        Ok(self.decode(ctx, 0, rho, regime)?.0.rate)
    }

    pub fn eval(&self, ctx: &Context, r: &Realization, rho: f64) -> Result<PhasePoint, Error> {
        let regime = silent_policy_regime(ctx, rho, self.p)?;
        let mut signaling = Vec::with_capacity(2);
        let mut sig_tx = Vec::with_capacity(2);
        // decoder k receives from SN 1 - k, so the stream covariance it
        // chooses is the one SN 1 - k radiates
        for k in 0..2 {
            let (report, eig) = self.decode(ctx, k, rho, regime)?;
            let tx = stream_covariance(&r.gamma_fwd[1 - k], &eig.vectors, &radiated_powers(&report.allocation))?;
            signaling.push(report);
            sig_tx.push(tx);
        }
        let sig_tx_by_sender = [&sig_tx[1], &sig_tx[0]];
        let own = &self.ofdm_tx[0] + sig_tx_by_sender[0];
        let peer = &self.ofdm_tx[1] + sig_tx_by_sender[1];
        let terms = [
            EnergyTerm { gain: 1.0, gram: &r.si_gram[0], tx_cov: &own },
            EnergyTerm { gain: ctx.budget.alpha_b, gram: &r.hs_gram, tx_cov: &peer },
        ];
        let energy = fdsim_core::energy::recycled_energy_from_terms(
            &terms,
            ctx.grid.block_len(),
            &ctx.budget.harvester,
            rho,
            self.p,
        )?;
        let signaling = signaling.swap_remove(0);
        Ok(PhasePoint { rho, regime, ofdm: self.ofdma[0].clone(), signaling, energy })
    }
}

/// Backward phase of one realization at SN power `p`.
#[derive(Debug, Clone)]
pub struct BackwardModel {
    pub p: f64,
    /// `D diag(h_tilde) D^H` of AN `i` to SN `i`.
    subchannel: [CMatrix; 2],
    /// Residual-SI shape of the OFDM decoder at SN `i`.
    ofdm_shape_si: [CMatrix; 2],
    /// `H_s^lower Gamma_peer` at signaling decoder `i`.
    pub channel: [CMatrix; 2],
    /// Image of the other AN's modulator at SN `i`.
    other_an: [OfdmLeakage; 2],
    /// Own-signaling residual-SI shape at signaling decoder `i`.
    sig_shape_si: [CMatrix; 2],
}

/// AN link of one SN at one `rho`: the rate and the reduced subcarrier
/// covariance the AN radiates.
#[derive(Debug, Clone)]
pub struct AnLink {
    pub report: RateReport,
    pub reduced_cov: CMatrix,
}

impl BackwardModel {
    pub fn new(ctx: &Context, r: &Realization, p: f64) -> Result<Self, Error> {
        let b = &ctx.budget;
        let si = ctx.si_branch(p);
        let n = ctx.grid.block_len();
        let zeros = CMatrix::zeros(n, n);
        let mut subchannel = Vec::with_capacity(2);
        let mut ofdm_shape_si = Vec::with_capacity(2);
        let mut channel = Vec::with_capacity(2);
        let mut other_an = Vec::with_capacity(2);
        let mut sig_shape_si = Vec::with_capacity(2);
        for (i, side) in SIDES.into_iter().enumerate() {
            subchannel.push(subcarrier_channel(&ctx.grid, side, &r.own_freq[i]));
            ofdm_shape_si.push(backward_ofdm_covariance(&ctx.grid, side, &r.gamma_bwd[i], p, b.n0, &si)?.shape);
            channel.push(&r.hs.lower * &r.gamma_bwd[1 - i]);
            other_an.push(OfdmLeakage::new(&ctx.grid, side.other(), &r.an[i][1 - i]));
            let own = backward_signaling_covariance(&ctx.grid, &zeros, &r.gamma_bwd[i], p, b.alpha_cross, b.n0, &si)?;
            sig_shape_si.push(own.shape);
        }
        Ok(Self {
            p,
            subchannel: pair(subchannel),
            ofdm_shape_si: pair(ofdm_shape_si),
            channel: pair(channel),
            other_an: pair(other_an),
            sig_shape_si: pair(sig_shape_si),
        })
    }

    /// OFDM covariance at SN `i` (`|N_i| x |N_i|`).
    pub fn ofdm_covariance(&self, ctx: &Context, i: usize, rho: f64, regime: Regime) -> CMatrix {
        let shape = if regime == Regime::NoResidualSi {
            CMatrix::zeros(self.ofdm_shape_si[i].nrows(), self.ofdm_shape_si[i].ncols())
        } else {
            self.ofdm_shape_si[i].clone()
        };
        covariance(ctx.budget.n0, rho, &shape)
    }

    /// AN `i` to SN `i`.
    pub fn an_link(&self, ctx: &Context, r: &Realization, i: usize, rho: f64, regime: Regime) -> Result<AnLink, Error> {
        let b = &ctx.budget;
        let side = SIDES[i];
        if regime == Regime::NoResidualSi {
            let report = rate_backward_ofdm(
                OfdmChannel::Frequency(&r.own_freq[i]),
                rho,
                b.alpha_sa,
                b.p_a,
                b.n0,
                &ctx.grid,
                regime,
                side,
            )?;
            let reduced_cov = real_diag(&radiated_powers(&report.allocation));
            return Ok(AnLink { report, reduced_cov });
        }
        let wd = WhiteningDecomposition::new(self.ofdm_covariance(ctx, i, rho, regime), &self.subchannel[i])?;
        let report =
            rate_backward_ofdm(OfdmChannel::Whitened(&wd.gains), rho, b.alpha_sa, b.p_a, b.n0, &ctx.grid, regime, side)?;
        let v = &wd.right_basis;
        let reduced_cov = v * real_diag(&radiated_powers(&report.allocation)) * v.adjoint();
        Ok(AnLink { report, reduced_cov })
    }

    /// Signaling covariance at SN `i` given what the other AN radiates.
    pub fn signaling_covariance(
        &self,
        ctx: &Context,
        i: usize,
        rho: f64,
        regime: Regime,
        other_an_cov: &CMatrix,
    ) -> CMatrix {
        let mut shape = self.other_an[i].received(other_an_cov) * C64::new(ctx.budget.alpha_cross, 0.0);
        if regime == Regime::ResidualSi {
            shape += &self.sig_shape_si[i];
        }
        covariance(ctx.budget.n0, rho, &shape)
    }

    fn decode(
        &self,
        ctx: &Context,
        i: usize,
        rho: f64,
        regime: Regime,
        other_an_cov: &CMatrix,
    ) -> Result<(RateReport, HermitianEigen), Error> {
        let cov = self.signaling_covariance(ctx, i, rho, regime, other_an_cov);
        let eig = whitened_gram_eigen(&cov, &self.channel[i])?;
        let sv: Vec<f64> = eig.values.iter().map(|v| v.sqrt()).collect();
        let report = rate_backward_signaling(&sv, rho, ctx.budget.alpha_b, self.p, &ctx.grid, regime)?;
        Ok((report, eig))
    }

    /// OFDM rate of AN 1 into SN 1.
    pub fn ofdm_rate(&self, ctx: &Context, r: &Realization, rho: f64) -> Result<f64, Error> {
        let regime = silent_policy_regime(ctx, rho, self.p)?;
        Ok(self.an_link(ctx, r, 0, rho, regime)?.report.rate)
    }

    /// Signaling rate into SN 1.
    pub fn signaling_rate(&self, ctx: &Context, r: &Realization, rho: f64) -> Result<f64, Error> {
        let regime = silent_policy_regime(ctx, rho, self.p)?;
        self.signaling_rate_in(ctx, r, rho, regime)
    }

    pub fn signaling_rate_in(&self, ctx: &Context, r: &Realization, rho: f64, regime: Regime) -> Result<f64, Error> {
        let other = self.an_link(ctx, r, 1, rho, regime)?;
        Ok(self.decode(ctx, 0, rho, regime, &other.reduced_cov)?.0.rate)
    }

    pub fn ofdm_rate_in(&self, ctx: &Context, r: &Realization, rho: f64, regime: Regime) -> Result<f64, Error> {
        Ok(self.an_link(ctx, r, 0, rho, regime)?.report.rate)
    }

    pub fn eval(&self, ctx: &Context, r: &Realization, rho: f64) -> Result<PhasePoint, Error> {
        let regime = silent_policy_regime(ctx, rho, self.p)?;
        let links = [self.an_link(ctx, r, 0, rho, regime)?, self.an_link(ctx, r, 1, rho, regime)?];
        let mut signaling = Vec::with_capacity(2);
        let mut sig_tx = Vec::with_capacity(2);
        for i in 0..2 {
            let (report, eig) = self.decode(ctx, i, rho, regime, &links[1 - i].reduced_cov)?;
            sig_tx.push(stream_covariance(&r.gamma_bwd[1 - i], &eig.vectors, &radiated_powers(&report.allocation))?);
            signaling.push(report);
        }
        // sig_tx[i] is radiated by SN 1 - i
        let own_an_tx = ctx.ofdm_tx(SIDES[0], &links[0].reduced_cov);
        let other_an_tx = ctx.ofdm_tx(SIDES[1], &links[1].reduced_cov);
        let b = &ctx.budget;
        let terms = [
            EnergyTerm { gain: 1.0, gram: &r.si_gram[0], tx_cov: &sig_tx[1] },
            EnergyTerm { gain: b.alpha_sa, gram: &r.an_gram[0][0], tx_cov: &own_an_tx },
            EnergyTerm { gain: b.alpha_cross, gram: &r.an_gram[0][1], tx_cov: &other_an_tx },
            EnergyTerm { gain: b.alpha_b, gram: &r.hs_gram, tx_cov: &sig_tx[0] },
        ];
        let energy =
            fdsim_core::energy::recycled_energy_from_terms(&terms, ctx.grid.block_len(), &b.harvester, rho, self.p)?;
        let [own_link, _] = links;
        Ok(PhasePoint { rho, regime, ofdm: own_link.report, signaling: signaling.swap_remove(0), energy })
    }
}

fn pair<T>(v: Vec<T>) -> [T; 2] {
    v.try_into().unwrap_or_else(|_| unreachable!("built for both sides"))
}

/// Candidate optimal splitting ratios: the no-residual-SI one and, when it
/// differs and is decodable, the residual-SI one.
pub fn rho_candidates(ctx: &Context, p: f64) -> Vec<(f64, Regime)> {
    let b = &ctx.budget;
    let mut out = vec![(optimal_rho(p, b.p_th, b.p_sat, Regime::NoResidualSi), Regime::NoResidualSi)];
    let with_si = optimal_rho(p, b.p_th, b.p_sat, Regime::ResidualSi);
    if p > b.p_th && p <= b.p_sat && with_si > out[0].0 {
        out.push((with_si, Regime::ResidualSi));
    }
    out
}
