//! Two-point fits `R(rho) ~ log2(1 + c rho^phi)` of rate curves, the
//! interval of `rho` in which the divider beats the `rho = 1` baseline, and
//! the optimal splitting ratio.

use crate::whitening::Regime;
use crate::{Error, Result};

/// Relative offset placing the residual-SI anchor just above the threshold.
pub const DEFAULT_EPSILON_REL: f64 = 1e-3;

/// Fitted curve `log2(1 + c rho^phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub c: f64,
    pub phi: f64,
    pub regime: Regime,
    /// The two `(rho, rate)` samples the curve passes through.
    pub anchors: [(f64, f64); 2],
    /// Offset above `P_th` used for the residual-SI anchor, 0 otherwise.
    pub epsilon: f64,
}

impl RateFit {
    /// Curve through two samples with distinct `rho` and distinct positive
    /// rates.
    pub fn through(a: (f64, f64), b: (f64, f64), regime: Regime, epsilon: f64) -> Result<Self> {
        let ya = libm::exp2(a.1) - 1.0;
        let yb = libm::exp2(b.1) - 1.0;
        let degenerate = !(ya > 0.0 && yb > 0.0 && a.0 > 0.0 && b.0 > 0.0) || ya == yb || a.0 == b.0;
        if degenerate || !ya.is_finite() || !yb.is_finite() {
            return Err(Error::DegenerateAnchors);
        }
        let phi = libm::log(ya / yb) / libm::log(a.0 / b.0);
        let c = ya / libm::pow(a.0, phi);
        Ok(Self { c, phi, regime, anchors: [a, b], epsilon })
    }

    pub fn eval(&self, rho: f64) -> f64 {
        libm::log1p(self.c * libm::pow(rho, self.phi)) / core::f64::consts::LN_2
    }

    /// `rho` at which the curve reaches `rate`.
    pub fn inverse(&self, rate: f64) -> f64 {
        libm::pow((libm::exp2(rate) - 1.0) / self.c, 1.0 / self.phi)
    }
}

/// Anchor points of the fit. Without residual SI: `P_th / P` and
/// `P_th / (2P)`. With residual SI: `(P_th + eps) / P` and
/// `min(1, P_sat / P)`.
pub fn anchors(regime: Regime, p: f64, p_th: f64, p_sat: f64, epsilon: f64) -> Result<[f64; 2]> {
    match regime {
        Regime::NoResidualSi => Ok([p_th / p, p_th / (2.0 * p)]),
        Regime::ResidualSi => Ok([(p_th + epsilon) / p, (p_sat / p).min(1.0)]),
        Regime::Saturated => Err(Error::SaturatedRegime),
    }
}

/// Fit `rate` (a rate-vs-`rho` evaluator) at the regime's anchors.
pub fn fit_rate_curve<F>(mut rate: F, regime: Regime, p: f64, p_th: f64, p_sat: f64, epsilon: f64) -> Result<RateFit>
where
    F: FnMut(f64) -> Result<f64>,
{
    let [ra, rb] = anchors(regime, p, p_th, p_sat, epsilon)?;
    let eps = if regime == Regime::ResidualSi { epsilon } else { 0.0 };
    RateFit::through((ra, rate(ra)?), (rb, rate(rb)?), regime, eps)
}

/// Interval `[lower, upper]` of splitting ratios for which the fitted rate
/// beats the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverInterval {
    pub lower: f64,
    pub upper: f64,
    pub valid: bool,
}

/// Crossover of a no-residual-SI fit with the `rho = 1` baseline rate:
/// `lower = ((2^R(1) - 1) / c)^(1/phi)`, `upper = P_th / P`. Only defined
/// for `P_th < P <= P_sat`.
pub fn crossover_interval(fit: &RateFit, baseline_rate: f64, p: f64, p_th: f64, p_sat: f64) -> Result<CrossoverInterval> {
    if p <= p_th || p > p_sat {
        return Err(Error::OutOfScopeRegime);
    }
    if fit.regime != Regime::NoResidualSi {
        return Err(Error::InvalidArgument("crossover needs a fit without residual SI"));
    }
    let lower = fit.inverse(baseline_rate);
    let upper = p_th / p;
    // a baseline equal to the fitted rate at the threshold gives a single
    // point; rounding in the inversion must not turn it into an empty set
    Ok(CrossoverInterval { lower, upper, valid: lower <= upper * (1.0 + 1e-12) })
}

/// Optimal splitting ratio within a regime: `min(1, P_th / P)` without
/// residual SI, `min(1, P_sat / P)` with it.
pub fn optimal_rho(p: f64, p_th: f64, p_sat: f64, regime: Regime) -> f64 {
    match regime {
        Regime::NoResidualSi => (p_th / p).min(1.0),
        _ => (p_sat / p).min(1.0),
    }
}
