//! Invariant checks run by the `validate` subcommand on a few realizations.

use fdsim_core::channel::{dbm_to_watts, ChannelTaps, ConvolutionPair};
use fdsim_core::energy::{recycled_energy, stream_covariance, Harvester};
use fdsim_core::linalg::{max_abs, scaled_identity};
use fdsim_core::signal::Side;
use fdsim_core::whitening::{inv_sqrt, Regime};
use fdsim_core::{Error, Phase, C64};

use crate::model::{BackwardModel, Context, ForwardModel, Realization};
use crate::sweep::{phase_power_dbm, with_realization, PhaseModel};
use crate::SimError;

/// Outcome of one invariant over all checked realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub limit: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.limit
    }
}

fn whitening_error(cov: &fdsim_core::CMatrix) -> Result<f64, Error> {
    let w = inv_sqrt(cov)?;
    Ok(max_abs(&(&w * cov * w.adjoint() - scaled_identity(cov.nrows(), 1.0))))
}

#[derive(Default)]
struct Worst {
    residual: f64,
    dims: f64,
    whitening: f64,
    baseline: f64,
    collapse: f64,
}

fn check_one(ctx: &Context, r: &Realization, w: &mut Worst) -> Result<(), Error> {
    let grid = &ctx.grid;
    let cp = grid.cp();
    for res in r.constraint_residuals(grid) {
        w.residual = w.residual.max(res);
    }
    let sides = [Side::First, Side::Second];
    let dims_ok = r.gamma_fwd.iter().all(|g| g.ncols() == cp)
        && (0..2).all(|i| r.gamma_bwd[i].ncols() == grid.block_len() - grid.set(sides[1 - i]).len());
    w.dims = w.dims.max(if dims_ok { 0.0 } else { 1.0 });

    let p = ctx.p_forward();
    let pb = ctx.backward_power(ctx.cfg.p_dbm);
    let fwd = ForwardModel::new(ctx, r, p)?;
    let bwd = BackwardModel::new(ctx, r, pb)?;
    let rho_si = (ctx.budget.p_sat / p).min(1.0);
    for regime in [Regime::NoResidualSi, Regime::ResidualSi] {
        let rho = if regime == Regime::NoResidualSi { ctx.budget.p_th / p } else { rho_si };
        w.whitening = w.whitening.max(whitening_error(&fwd.covariance(ctx, 0, rho, regime))?);
        w.whitening = w.whitening.max(whitening_error(&bwd.ofdm_covariance(ctx, 0, rho, regime))?);
        let other = bwd.an_link(ctx, r, 1, rho, regime)?;
        w.whitening = w.whitening.max(whitening_error(&bwd.signaling_covariance(ctx, 0, rho, regime, &other.reduced_cov))?);
    }

    for phase in [Phase::Forward, Phase::Backward] {
        let model = PhaseModel::new(ctx, r, phase, dbm_to_watts(phase_power_dbm(ctx, phase, ctx.cfg.p_dbm)))?;
        let baseline = model.eval(ctx, r, 1.0)?;
        let at_one = model.eval(ctx, r, 1.0)?;
        for (rate, base) in [(at_one.signaling.rate, baseline.signaling.rate), (at_one.ofdm.rate, baseline.ofdm.rate)] {
            w.baseline = w.baseline.max((rate / base - 1.0).abs());
        }
        w.baseline = w.baseline.max(at_one.energy.eta_e.abs());
    }

    let silent = Harvester { alpha_m: 0.0, ..ctx.budget.harvester };
    let flat = ConvolutionPair::new(&ChannelTaps(vec![C64::new(1.0, 0.0)]), grid.block_len())?;
    let per_stream = grid.block_len() as f64 * p / cp as f64;
    let own = stream_covariance(&r.gamma_fwd[0], &scaled_identity(cp, 1.0), &vec![per_stream; cp])?;
    for rho in [0.0, 0.3, 0.7] {
        let e = recycled_energy(&[], &own, &flat, &silent, rho, p)?;
        let want = silent.beta * silent.alpha_c * (1.0 - rho) * p;
        w.collapse = w.collapse.max((e.exact - want).abs() / want);
    }
    Ok(())
}

/// Run the invariant suite on `draws` realizations.
pub fn run(ctx: &Context, draws: u64) -> Result<Vec<Check>, SimError> {
    let mut w = Worst::default();
    for k in 0..draws {
        with_realization(ctx, k, |r| check_one(ctx, r, &mut w))?;
    }
    Ok(vec![
        Check { name: "null-space constraint residual", worst: w.residual, limit: 1e-8 },
        Check { name: "precoder dimensions", worst: w.dims, limit: 0.0 },
        Check { name: "whitening identity", worst: w.whitening, limit: 1e-8 },
        Check { name: "baseline identity", worst: w.baseline, limit: 0.0 },
        Check { name: "energy collapse", worst: w.collapse, limit: 1e-10 },
    ])
}
