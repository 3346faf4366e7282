//! Monte Carlo sweeps over the splitting ratio and over the transmit power.
//!
//! Realization `k` draws its channels from a ChaCha8 stream seeded with the
//! run seed and positioned on stream `k`, so results do not depend on how
//! realizations are spread over threads. Per-realization outputs are
//! collected in index order and reduced sequentially.

use fdsim_core::approx::{anchors, crossover_interval, RateFit};
use fdsim_core::channel::dbm_to_watts;
use fdsim_core::linalg::whitened_gram_eigen;
use fdsim_core::rates::{parallel_rate, rate_backward_ofdm, AllocationPolicy, OfdmChannel};
use fdsim_core::signal::Side;
use fdsim_core::whitening::{OfdmLeakage, Regime};
use fdsim_core::{CMatrix, CVector, Error, Phase, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{rho_candidates, BackwardModel, Context, Draw, ForwardModel, PhasePoint, Realization};
use crate::SimError;

/// Bisection steps of the crossover oracle.
const BISECTION_STEPS: usize = 40;
/// Resampled draws above this fraction flag the run.
pub const RESAMPLE_FLAG_FRACTION: f64 = 1e-3;

/// A rate-carrying link of SN 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    ForwardSignaling,
    ForwardOfdma,
    BackwardSignaling,
    BackwardOfdm,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::ForwardSignaling => "fwd_signaling",
            Link::ForwardOfdma => "fwd_ofdma",
            Link::BackwardSignaling => "bwd_signaling",
            Link::BackwardOfdm => "bwd_ofdm",
        }
    }

    /// Whether the divider affects the link.
    pub fn rho_dependent(self) -> bool {
        self != Link::ForwardOfdma
    }

    pub fn of_phase(phase: Phase) -> [Link; 2] {
        match phase {
            Phase::Forward => [Link::ForwardSignaling, Link::ForwardOfdma],
            Phase::Backward => [Link::BackwardSignaling, Link::BackwardOfdm],
        }
    }

    fn rate(self, point: &PhasePoint) -> f64 {
        match self {
            Link::ForwardSignaling | Link::BackwardSignaling => point.signaling.rate,
            Link::ForwardOfdma | Link::BackwardOfdm => point.ofdm.rate,
        }
    }
}

pub fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Forward => "forward",
        Phase::Backward => "backward",
    }
}

/// Both phase models behind one interface.
#[derive(Debug, Clone)]
pub enum PhaseModel {
    Forward(ForwardModel),
    Backward(BackwardModel),
}

impl PhaseModel {
    pub fn new(ctx: &Context, r: &Realization, phase: Phase, p: f64) -> Result<Self, Error> {
        Ok(match phase {
            Phase::Forward => Self::Forward(ForwardModel::new(ctx, r, p)?),
            Phase::Backward => Self::Backward(BackwardModel::new(ctx, r, p)?),
        })
    }

    pub fn p(&self) -> f64 {
        match self {
            Self::Forward(m) => m.p,
            Self::Backward(m) => m.p,
        }
    }

    pub fn eval(&self, ctx: &Context, r: &Realization, rho: f64) -> Result<PhasePoint, Error> {
        match self {
            Self::Forward(m) => m.eval(ctx, r, rho),
            Self::Backward(m) => m.eval(ctx, r, rho),
        }
    }

    /// Rate of `link` with the regime forced.
    pub fn rate_in(&self, ctx: &Context, r: &Realization, link: Link, rho: f64, regime: Regime) -> Result<f64, Error> {
        match (self, link) {
            (Self::Forward(m), Link::ForwardSignaling) => m.signaling_rate_in(ctx, rho, regime),
            (Self::Forward(m), Link::ForwardOfdma) => Ok(m.ofdma[0].rate),
            (Self::Backward(m), Link::BackwardSignaling) => m.signaling_rate_in(ctx, r, rho, regime),
            (Self::Backward(m), Link::BackwardOfdm) => m.ofdm_rate_in(ctx, r, rho, regime),
            _ => Err(Error::InvalidArgument("link does not belong to this phase")),
        }
    }

    /// Lightweight evaluator of the no-residual-SI rate of `link`.
    pub fn probe(&self, ctx: &Context, r: &Realization, link: Link) -> Option<Probe> {
        match (self, link) {
            (Self::Forward(m), Link::ForwardSignaling) => Some(Probe::ForwardSignaling {
                shape: m.shape(0, Regime::NoResidualSi).clone(),
                channel: m.channel[0].clone(),
                p_b: m.p_b,
            }),
            (Self::Backward(m), Link::BackwardSignaling) => Some(Probe::BackwardSignaling {
                other_freq: r.own_freq[1].clone(),
                leakage: OfdmLeakage::new(&ctx.grid, Side::Second, &r.an[0][1]),
                channel: m.channel[0].clone(),
                p: m.p,
            }),
            (Self::Backward(_), Link::BackwardOfdm) => Some(Probe::BackwardOfdm { freq: r.own_freq[0].clone() }),
            _ => None,
        }
    }
}

/// What the crossover oracle keeps of one realization to re-evaluate a
/// no-residual-SI rate at arbitrary `rho`.
#[derive(Debug, Clone)]
pub enum Probe {
    ForwardSignaling { shape: CMatrix, channel: CMatrix, p_b: f64 },
    BackwardSignaling { other_freq: CVector, leakage: OfdmLeakage, channel: CMatrix, p: f64 },
    BackwardOfdm { freq: CVector },
}

impl Probe {
    pub fn rate(&self, ctx: &Context, rho: f64) -> Result<f64, Error> {
        let b = &ctx.budget;
        let grid = &ctx.grid;
        let regime = Regime::NoResidualSi;
        let signaling = |cov: CMatrix, channel: &CMatrix, power: f64| -> Result<f64, Error> {
            let eig = whitened_gram_eigen(&cov, channel)?;
            let gains: Vec<f64> = eig.values.iter().map(|v| rho * b.alpha_b * v).collect();
            let budget = grid.block_len() as f64 * power;
            Ok(parallel_rate(&gains, budget, AllocationPolicy::WaterFilling, grid.block_len())?.0)
        };
        match self {
            Probe::ForwardSignaling { shape, channel, p_b } => {
                signaling(with_noise(shape * C64::new(rho, 0.0), b.n0), channel, *p_b)
            }
            Probe::BackwardSignaling { other_freq, leakage, channel, p } => {
                let other = rate_backward_ofdm(
                    OfdmChannel::Frequency(other_freq),
                    rho,
                    b.alpha_sa,
                    b.p_a,
                    b.n0,
                    grid,
                    regime,
                    Side::Second,
                )?;
                let powers = crate::model::radiated_powers(&other.allocation);
                let shape = leakage.received_diag(&powers) * C64::new(rho * b.alpha_cross, 0.0);
                signaling(with_noise(shape, b.n0), channel, *p)
            }
            Probe::BackwardOfdm { freq } => Ok(rate_backward_ofdm(
                OfdmChannel::Frequency(freq),
                rho,
                b.alpha_sa,
                b.p_a,
                b.n0,
                grid,
                regime,
                Side::First,
            )?
            .rate),
        }
    }
}

fn with_noise(mut m: CMatrix, n0: f64) -> CMatrix {
    for k in 0..m.nrows() {
        m[(k, k)] += C64::new(n0, 0.0);
    }
    m
}

/// The random stream of realization `index`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn degenerate(e: &Error) -> bool {
    matches!(e, Error::NullspaceDimensionMismatch { .. } | Error::NotPositiveDefinite { .. })
}

/// Draws realization `index` and runs `work` on it, redrawing from the same
/// stream while the draw is degenerate. Returns the output and the number of
/// redraws.
pub fn with_realization<T, F>(ctx: &Context, index: u64, mut work: F) -> Result<(T, usize), SimError>
where
    F: FnMut(&Realization) -> Result<T, Error>,
{
    let mut rng = realization_rng(ctx.cfg.seed, index);
    let mut attempts = 0;
    loop {
        let draw = Draw::sample(&ctx.pdp, &mut rng);
        let outcome = Realization::new(ctx, draw).and_then(|r| work(&r));
        match outcome {
            Ok(v) => return Ok((v, attempts)),
            Err(e) if degenerate(&e) && attempts < ctx.cfg.max_resamples => attempts += 1,
            Err(e) if degenerate(&e) => return Err(SimError::Resample { index, attempts: attempts + 1, source: e }),
            Err(e) => return Err(SimError::Numerical(e)),
        }
    }
}

/// Runs `f` on a pool with `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, SimError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| SimError::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// Mean and standard error over the finite samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    m2: f64,
}

impl Stats {
    pub fn push(&mut self, x: f64) {
        if !x.is_finite() {
            return;
        }
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut s = Self::default();
        for v in values {
            s.push(v);
        }
        s
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// One link of one realization along the `rho` grid.
#[derive(Debug, Clone)]
pub struct LinkTrace {
    pub link: Link,
    /// Rates on the grid; NaN where the receiver saturates.
    pub rates: Vec<f64>,
    /// Rate at `rho = 1`.
    pub baseline: f64,
    /// Per-regime fits (no residual SI, residual SI) when they exist.
    pub fit_none: Option<RateFit>,
    pub fit_si: Option<RateFit>,
}

impl LinkTrace {
    /// Fitted rate at `rho` from the fit of `rho`'s regime.
    pub fn fitted(&self, ctx: &Context, p: f64, rho: f64) -> f64 {
        let fit = match ctx.residual(rho, p).regime {
            Regime::NoResidualSi => self.fit_none.as_ref(),
            Regime::ResidualSi => self.fit_si.as_ref(),
            Regime::Saturated => None,
        };
        fit.map_or(f64::NAN, |f| f.eval(rho))
    }
}

/// One realization of a `rho` sweep.
#[derive(Debug, Clone)]
pub struct RhoRecord {
    pub index: u64,
    pub resamples: usize,
    pub regimes: Vec<Option<Regime>>,
    pub links: Vec<LinkTrace>,
    pub energy_exact: Vec<f64>,
    pub energy_approx: Vec<f64>,
    pub eta_e: Vec<f64>,
    pub probes: Vec<(Link, Probe)>,
}

/// Per-realization `rho` sweep outputs and the context they ran in.
#[derive(Debug, Clone)]
pub struct RhoRun {
    pub phase: Phase,
    pub p: f64,
    pub p_dbm: f64,
    pub rho_grid: Vec<f64>,
    pub records: Vec<RhoRecord>,
}

fn rate_or_nan(model: &PhaseModel, ctx: &Context, r: &Realization, rho: f64) -> Result<Option<PhasePoint>, Error> {
    match model.eval(ctx, r, rho) {
        Ok(pt) => Ok(Some(pt)),
        Err(Error::SaturatedRegime) => Ok(None),
        Err(e) => Err(e),
    }
}

fn fit_link(
    ctx: &Context,
    model: &PhaseModel,
    r: &Realization,
    link: Link,
    regime: Regime,
) -> Result<Option<RateFit>, Error> {
    let b = &ctx.budget;
    let p = model.p();
    let eps = ctx.cfg.epsilon_rel * b.p_th;
    let usable = match regime {
        Regime::NoResidualSi => true,
        _ => p > b.p_th && p <= b.p_sat,
    };
    if !usable {
        return Ok(None);
    }
    let [ra, rb] = anchors(regime, p, b.p_th, b.p_sat, eps)?;
    let ya = model.rate_in(ctx, r, link, ra, regime)?;
    let yb = model.rate_in(ctx, r, link, rb, regime)?;
    let eps = if regime == Regime::ResidualSi { eps } else { 0.0 };
    match RateFit::through((ra, ya), (rb, yb), regime, eps) {
        Ok(fit) => Ok(Some(fit)),
        Err(Error::DegenerateAnchors) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Evaluate one realization on the `rho` grid.
pub fn rho_record(
    ctx: &Context,
    phase: Phase,
    p: f64,
    index: u64,
    keep_probes: bool,
) -> Result<RhoRecord, SimError> {
    let grid = &ctx.cfg.rho_grid;
    let (rec, resamples) = with_realization(ctx, index, |r| {
        let model = PhaseModel::new(ctx, r, phase, p)?;
        let points: Vec<Option<PhasePoint>> =
            grid.iter().map(|&rho| rate_or_nan(&model, ctx, r, rho)).collect::<Result<_, _>>()?;
        let base = rate_or_nan(&model, ctx, r, 1.0)?;
        let mut links = Vec::new();
        let mut probes = Vec::new();
        for link in Link::of_phase(phase) {
            let rates = points.iter().map(|pt| pt.as_ref().map_or(f64::NAN, |pt| link.rate(pt))).collect();
            let baseline = base.as_ref().map_or(f64::NAN, |pt| link.rate(pt));
            let (fit_none, fit_si) = if link.rho_dependent() {
                (
                    fit_link(ctx, &model, r, link, Regime::NoResidualSi)?,
                    fit_link(ctx, &model, r, link, Regime::ResidualSi)?,
                )
            } else {
                (None, None)
            };
            if keep_probes {
                if let Some(pr) = model.probe(ctx, r, link) {
                    probes.push((link, pr));
                }
            }
            links.push(LinkTrace { link, rates, baseline, fit_none, fit_si });
        }
        let energy = |f: fn(&PhasePoint) -> f64| -> Vec<f64> {
            points.iter().map(|pt| pt.as_ref().map_or(f64::NAN, f)).collect()
        };
        Ok(RhoRecord {
            index,
            resamples: 0,
            regimes: points.iter().map(|pt| pt.as_ref().map(|pt| pt.regime)).collect(),
            links,
            energy_exact: energy(|pt| pt.energy.exact),
            energy_approx: energy(|pt| pt.energy.approx),
            eta_e: energy(|pt| pt.energy.eta_e),
            probes,
        })
    })?;
    Ok(RhoRecord { resamples, ..rec })
}

/// Per-realization records of a `rho` sweep at power `p_dbm`.
pub fn run_rho(ctx: &Context, phase: Phase, p_dbm: f64, keep_probes: bool) -> Result<RhoRun, SimError> {
    let p = dbm_to_watts(p_dbm);
    let n = ctx.cfg.n_realizations as u64;
    let records = (0..n).into_par_iter().map(|k| rho_record(ctx, phase, p, k, keep_probes)).collect::<Result<Vec<_>, _>>()?;
    Ok(RhoRun { phase, p, p_dbm, rho_grid: ctx.cfg.rho_grid.clone(), records })
}

/// Mean no-residual-SI rate of `link` over the probes of a run.
pub fn mean_probe_rate(ctx: &Context, run: &RhoRun, link: Link, rho: f64) -> Result<f64, SimError> {
    let rates: Vec<f64> = run
        .records
        .par_iter()
        .filter_map(|rec| rec.probes.iter().find(|(l, _)| *l == link).map(|(_, p)| p))
        .map(|probe| probe.rate(ctx, rho))
        .collect::<Result<_, _>>()?;
    Ok(Stats::of(rates).mean())
}

/// Crossover of the mean rate curve with the mean `rho = 1` rate, two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    /// Closed form from the two-point fit of the mean curve.
    pub fitted: f64,
    pub fitted_valid: bool,
    /// Bisection on the mean no-residual-SI curve; NaN when the curve stays
    /// below the baseline up to the threshold.
    pub numeric: f64,
    pub upper: f64,
}

pub fn crossover(ctx: &Context, run: &RhoRun, link: Link) -> Result<Option<Crossover>, SimError> {
    let b = &ctx.budget;
    if !(run.p > b.p_th && run.p <= b.p_sat) {
        return Ok(None);
    }
    let baseline = Stats::of(run.records.iter().filter_map(|r| trace(r, link)).map(|t| t.baseline)).mean();
    let upper = b.p_th / run.p;
    let [ra, rb] = anchors(Regime::NoResidualSi, run.p, b.p_th, b.p_sat, 0.0)?;
    let ya = mean_probe_rate(ctx, run, link, ra)?;
    let yb = mean_probe_rate(ctx, run, link, rb)?;
    let fit = RateFit::through((ra, ya), (rb, yb), Regime::NoResidualSi, 0.0)?;
    let interval = crossover_interval(&fit, baseline, run.p, b.p_th, b.p_sat)?;
    let numeric = if ya < baseline {
        f64::NAN
    } else {
        let (mut lo, mut hi) = (0.0, upper);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mean_probe_rate(ctx, run, link, mid)? >= baseline {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(Some(Crossover { fitted: interval.lower, fitted_valid: interval.valid, numeric, upper }))
}

fn trace(rec: &RhoRecord, link: Link) -> Option<&LinkTrace> {
    rec.links.iter().find(|t| t.link == link)
}

/// Named column of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub description: String,
    #[serde(with = "crate::emit::nan_vec")]
    pub mean: Vec<f64>,
    #[serde(with = "crate::emit::nan_vec")]
    pub stderr: Vec<f64>,
}

/// Named scalar summary of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub name: String,
    #[serde(with = "crate::emit::nan_f64")]
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Rho,
    Power,
}

/// Aggregated output of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub phase: String,
    pub axis_name: String,
    #[serde(with = "crate::emit::nan_vec")]
    pub axis: Vec<f64>,
    pub series: Vec<Series>,
    pub scalars: Vec<Scalar>,
    pub realizations: usize,
    pub resamples: usize,
    /// Set when more than 0.1% of the draws had to be redrawn.
    pub resample_flag: bool,
}

impl SweepResult {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|s| s.name == name).map(|s| s.value)
    }
}

fn series(name: String, description: String, stats: &[Stats]) -> Series {
    Series {
        name,
        description,
        mean: stats.iter().map(Stats::mean).collect(),
        stderr: stats.iter().map(Stats::stderr).collect(),
    }
}

fn column_stats(rows: usize, records: &[RhoRecord], value: impl Fn(&RhoRecord, usize) -> f64) -> Vec<Stats> {
    (0..rows).map(|k| Stats::of(records.iter().map(|r| value(r, k)))).collect()
}

fn resample_accounting(records: usize, resamples: usize) -> bool {
    records > 0 && resamples as f64 > RESAMPLE_FLAG_FRACTION * (records + resamples) as f64
}

/// Aggregate a `rho` run: numeric and fitted `eta_R` per link, `eta_E`, and
/// the crossover bounds when `P_th < P <= P_sat`.
pub fn summarize_rho(ctx: &Context, run: &RhoRun, with_crossover: bool) -> Result<SweepResult, SimError> {
    let n = run.rho_grid.len();
    let mut out = Vec::new();
    let mut scalars = vec![Scalar { name: "power_dbm".into(), value: run.p_dbm }];
    for link in Link::of_phase(run.phase) {
        let eta = column_stats(n, &run.records, |r, k| {
            let t = trace(r, link).expect("link traced");
            t.rates[k] / t.baseline
        });
        out.push(series(format!("eta_r_{}", link.name()), format!("mean R(rho)/R(1) of {}", link.name()), &eta));
        if link.rho_dependent() {
            let fit = column_stats(n, &run.records, |r, k| {
                let t = trace(r, link).expect("link traced");
                t.fitted(ctx, run.p, run.rho_grid[k]) / t.baseline
            });
            out.push(series(
                format!("eta_r_{}_fit", link.name()),
                format!("mean fitted R(rho)/R(1) of {}", link.name()),
                &fit,
            ));
            if with_crossover {
                if let Some(c) = crossover(ctx, run, link)? {
                    let name = link.name();
                    scalars.push(Scalar { name: format!("crossover_{name}_numeric"), value: c.numeric });
                    scalars.push(Scalar { name: format!("crossover_{name}_fitted"), value: c.fitted });
                    scalars.push(Scalar { name: format!("crossover_{name}_upper"), value: c.upper });
                }
            }
        }
    }
    let eta_e = column_stats(n, &run.records, |r, k| r.eta_e[k]);
    out.push(series("eta_e".into(), "mean E(rho)/E_tx".into(), &eta_e));
    let resamples = run.records.iter().map(|r| r.resamples).sum();
    Ok(SweepResult {
        kind: SweepKind::Rho,
        phase: phase_name(run.phase).into(),
        axis_name: "rho".into(),
        axis: run.rho_grid.clone(),
        series: out,
        scalars,
        realizations: run.records.len(),
        resamples,
        resample_flag: resample_accounting(run.records.len(), resamples),
    })
}

/// Power of a phase's `rho` sweep: the configured `P`, lowered by the
/// backward offset for the backward phase.
pub fn phase_power_dbm(ctx: &Context, phase: Phase, p_dbm: f64) -> f64 {
    match phase {
        Phase::Forward => p_dbm,
        Phase::Backward => p_dbm - ctx.cfg.backward_offset_db,
    }
}

/// `rho` sweep of one phase at the configured power.
pub fn sweep_rho(ctx: &Context, phase: Phase) -> Result<SweepResult, SimError> {
    let run = run_rho(ctx, phase, phase_power_dbm(ctx, phase, ctx.cfg.p_dbm), true)?;
    summarize_rho(ctx, &run, true)
}

/// Optimal operating point of one link in one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalPoint {
    pub rho: f64,
    pub eta_r: f64,
    pub eta_e: f64,
    pub energy_exact: f64,
    pub energy_approx: f64,
}

/// One realization of a power sweep: per power, per `rho`-dependent link.
#[derive(Debug, Clone)]
pub struct PowerRecord {
    pub index: u64,
    pub resamples: usize,
    /// `[power][link]`.
    pub optimal: Vec<Vec<OptimalPoint>>,
}

#[derive(Debug, Clone)]
pub struct PowerRun {
    pub phase: Phase,
    pub powers_dbm: Vec<f64>,
    pub links: Vec<Link>,
    pub records: Vec<PowerRecord>,
}

/// For each power, evaluate the candidate optimal ratios and keep, per link,
/// the one with the larger rate.
pub fn power_record(ctx: &Context, phase: Phase, powers_dbm: &[f64], index: u64) -> Result<PowerRecord, SimError> {
    let links: Vec<Link> = Link::of_phase(phase).into_iter().filter(|l| l.rho_dependent()).collect();
    let (optimal, resamples) = with_realization(ctx, index, |r| {
        let mut per_power = Vec::with_capacity(powers_dbm.len());
        for &p_dbm in powers_dbm {
            let p = dbm_to_watts(p_dbm);
            let model = PhaseModel::new(ctx, r, phase, p)?;
            let base = rate_or_nan(&model, ctx, r, 1.0)?;
            let candidates: Vec<PhasePoint> = rho_candidates(ctx, p)
                .into_iter()
                .map(|(rho, _)| model.eval(ctx, r, rho))
                .collect::<Result<_, _>>()?;
            let mut row = Vec::with_capacity(links.len());
            for &link in &links {
                let best = candidates
                    .iter()
                    .fold(None::<&PhasePoint>, |acc, pt| match acc {
                        Some(a) if link.rate(a) >= link.rate(pt) => Some(a),
                        _ => Some(pt),
                    })
                    .expect("at least one candidate");
                let baseline = base.as_ref().map_or(f64::NAN, |pt| link.rate(pt));
                row.push(OptimalPoint {
                    rho: best.rho,
                    eta_r: link.rate(best) / baseline,
                    eta_e: best.energy.eta_e,
                    energy_exact: best.energy.exact,
                    energy_approx: best.energy.approx,
                });
            }
            per_power.push(row);
        }
        Ok(per_power)
    })?;
    Ok(PowerRecord { index, resamples, optimal })
}

/// Forward powers of the sweep, lowered by the offset for the backward phase.
pub fn phase_powers_dbm(ctx: &Context, phase: Phase) -> Vec<f64> {
    ctx.cfg.power_grid_dbm.iter().map(|&p| phase_power_dbm(ctx, phase, p)).collect()
}

pub fn run_power(ctx: &Context, phase: Phase) -> Result<PowerRun, SimError> {
    let powers_dbm = phase_powers_dbm(ctx, phase);
    let n = ctx.cfg.n_realizations as u64;
    let records =
        (0..n).into_par_iter().map(|k| power_record(ctx, phase, &powers_dbm, k)).collect::<Result<Vec<_>, _>>()?;
    let links = Link::of_phase(phase).into_iter().filter(|l| l.rho_dependent()).collect();
    Ok(PowerRun { phase, powers_dbm, links, records })
}

pub fn summarize_power(run: &PowerRun) -> SweepResult {
    let n = run.powers_dbm.len();
    let mut out = Vec::new();
    let mut max_ratio = 0.0f64;
    for (j, link) in run.links.iter().enumerate() {
        let name = link.name();
        let col = |f: fn(&OptimalPoint) -> f64| -> Vec<Stats> {
            (0..n).map(|k| Stats::of(run.records.iter().map(|r| f(&r.optimal[k][j])))).collect()
        };
        out.push(series(format!("rho_star_{name}"), format!("mean optimal rho of {name}"), &col(|o| o.rho)));
        out.push(series(format!("eta_r_star_{name}"), format!("mean eta_R at the optimal rho of {name}"), &col(|o| o.eta_r)));
        out.push(series(format!("eta_e_star_{name}"), format!("mean eta_E at the optimal rho of {name}"), &col(|o| o.eta_e)));
        let rel = |o: &OptimalPoint| {
            if o.energy_exact > 0.0 {
                (o.energy_exact - o.energy_approx).abs() / o.energy_exact
            } else {
                f64::NAN
            }
        };
        out.push(series(
            format!("energy_rel_err_{name}"),
            format!("mean |exact - approx| / exact energy at the optimal rho of {name}"),
            &col(rel),
        ));
        for r in &run.records {
            for row in &r.optimal {
                max_ratio = max_ratio.max(row[j].eta_e);
            }
        }
    }
    let resamples = run.records.iter().map(|r| r.resamples).sum();
    SweepResult {
        kind: SweepKind::Power,
        phase: phase_name(run.phase).into(),
        axis_name: "power_dbm".into(),
        axis: run.powers_dbm.clone(),
        series: out,
        scalars: vec![Scalar { name: "max_eta_e_star".into(), value: max_ratio }],
        realizations: run.records.len(),
        resamples,
        resample_flag: resample_accounting(run.records.len(), resamples),
    }
}

pub fn sweep_power(ctx: &Context, phase: Phase) -> Result<SweepResult, SimError> {
    Ok(summarize_power(&run_power(ctx, phase)?))
}

/// Both phases at one `rho` for realization `index`, with the `rho = 1`
/// baseline on the same draw.
#[derive(Debug, Clone)]
pub struct SingleReport {
    pub index: u64,
    pub resamples: usize,
    pub draw: Draw,
    pub phases: Vec<(Phase, f64, PhasePoint, PhasePoint)>,
}

pub fn run_single(ctx: &Context, index: u64, rho: f64, phases: &[Phase]) -> Result<SingleReport, SimError> {
    let ((draw, points), resamples) = with_realization(ctx, index, |r| {
        let mut out = Vec::new();
        for &phase in phases {
            let p = dbm_to_watts(phase_power_dbm(ctx, phase, ctx.cfg.p_dbm));
            let model = PhaseModel::new(ctx, r, phase, p)?;
            out.push((phase, p, model.eval(ctx, r, rho)?, model.eval(ctx, r, 1.0)?));
        }
        Ok((r.draw.clone(), out))
    })?;
    Ok(SingleReport { index, resamples, draw, phases: points })
}
