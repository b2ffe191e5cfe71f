//! The service provider's profit and its maximization.
//!
//! With `M` consumers whose nominal willingness-to-pay is uniform on `[0, W']`,
//! a provider that buys `n` data items at unit price `p_b` and charges a
//! subscription fee `p_s` earns
//!
//! ```text
//! F(n, p_s) = p_s M (phi(n) W' - p_s) - p_b n
//! ```
//!
//! For fixed `n` this is a downward parabola in `p_s` peaking at `phi(n) W' / 2`,
//! which reduces the joint problem to the one-dimensional
//! `M (phi(n) W')^2 / 4 - p_b n`. [`optimize_numeric`] solves that reduced
//! problem and is the reference answer; the closed forms in [`closed_form`]
//! are checked against it.

pub mod closed_form;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{log_spaced, scan_then_refine};
use crate::utility::UtilityParams;

pub use closed_form::{closed_form_case1, closed_form_case2};

/// Grid points used by the coarse scan in [`optimize_numeric`].
pub const SCAN_POINTS: usize = 2001;
/// Golden-section stopping width in data items.
pub const N_TOLERANCE: f64 = 1e-8;
/// Utility gap `1 - phi(n_hi)` defining the default upper end of the data-size search.
pub const SATURATION_GAP: f64 = 1e-6;
/// Absolute cap on the default upper end of the data-size search.
pub const MAX_DATA_SIZE: f64 = 1e7;

const DECISION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WtpDistribution {
    /// Nominal willingness-to-pay uniform on `[0, W']`.
    #[default]
    Uniform,
}

/// Market constants seen by the provider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Number of potential subscribers `M`.
    pub users: u64,
    /// Maximum nominal willingness-to-pay `W'`.
    pub max_nominal_wtp: f64,
    /// Unit price of raw data `p_b`.
    pub data_price: f64,
    #[serde(default)]
    pub wtp_distribution: WtpDistribution,
}

impl MarketParams {
    /// Market with unit maximum nominal willingness-to-pay.
    pub fn new(users: u64, data_price: f64) -> Result<Self> {
        let m = MarketParams {
            users,
            max_nominal_wtp: 1.0,
            data_price,
            wtp_distribution: WtpDistribution::Uniform,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_max_nominal_wtp(mut self, w: f64) -> Result<Self> {
        self.max_nominal_wtp = w;
        self.validate()?;
        Ok(self)
    }

    pub fn with_data_price(mut self, p_b: f64) -> Result<Self> {
        self.data_price = p_b;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users < 1 {
            return Err(Error::InvalidMarket("user count must be >= 1".into()));
        }
        if !(self.max_nominal_wtp.is_finite() && self.max_nominal_wtp > 0.0) {
            return Err(Error::InvalidMarket(format!(
                "max nominal WTP must be > 0, got {}",
                self.max_nominal_wtp
            )));
        }
        if !(self.data_price.is_finite() && self.data_price >= 0.0) {
            return Err(Error::InvalidMarket(format!("data price must be >= 0, got {}", self.data_price)));
        }
        Ok(())
    }

    pub(crate) fn m(&self) -> f64 {
        self.users as f64
    }
}

/// Requested data size and subscription fee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProviderDecision {
    pub n: f64,
    pub p_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Numeric,
    FixedN,
    FixedPs,
}

/// One closed-form candidate `(n, p_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub n: f64,
    pub p_s: f64,
    /// Profit at the candidate; absent when `n` lies outside the utility's domain.
    pub profit: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSolution {
    pub decision: ProviderDecision,
    pub profit: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub closed_form_roots: Option<Vec<Candidate>>,
    /// Whether the closed-form answer matches the numeric optimizer's profit to 1e-4 relative.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub closed_form_agrees: Option<bool>,
    /// Set when a complex intermediate left an imaginary part above `1e-6 |value|`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub imaginary_residual: Option<bool>,
}

impl ProviderSolution {
    pub(crate) fn plain(decision: ProviderDecision, profit: f64, method: Method) -> Self {
        ProviderSolution {
            decision,
            profit,
            method,
            closed_form_roots: None,
            closed_form_agrees: None,
            imaginary_residual: None,
        }
    }
}

/// `F(n, p_s)` evaluated literally for any fee, including fees above the
/// willingness-to-pay ceiling (negative revenue). Only `n` is checked.
pub fn profit_literal(market: &MarketParams, params: &UtilityParams, n: f64, p_s: f64) -> Result<f64> {
    let phi = params.eval(n)?;
    Ok(p_s * market.m() * (phi * market.max_nominal_wtp - p_s) - market.data_price * n)
}

/// Provider profit at a valid decision (`0 <= p_s <= phi(n) W'`).
pub fn profit(market: &MarketParams, params: &UtilityParams, decision: &ProviderDecision) -> Result<f64> {
    market.validate()?;
    let ceiling = params.eval(decision.n)? * market.max_nominal_wtp;
    let slack = DECISION_SLACK * ceiling.abs().max(1.0);
    if !(decision.p_s >= 0.0 && decision.p_s <= ceiling + slack) {
        return Err(Error::InvalidDecision(format!(
            "fee {} outside [0, {ceiling}] at n = {}",
            decision.p_s, decision.n
        )));
    }
    profit_literal(market, params, decision.n, decision.p_s)
}

/// Analytic second derivatives `(d2F/dp_s^2, d2F/dn^2)`: `-2M` and
/// `p_s M W' phi''(n)`, both nonpositive for nonnegative fees.
pub fn profit_second_derivatives(
    market: &MarketParams,
    params: &UtilityParams,
    decision: &ProviderDecision,
) -> Result<(f64, f64)> {
    market.validate()?;
    let curvature = params.deriv2(decision.n)?;
    let m = market.m();
    Ok((-2.0 * m, decision.p_s * m * market.max_nominal_wtp * curvature))
}

/// Profit after choosing the optimal fee for `n`: `M (phi(n) W')^2 / 4 - p_b n`.
pub fn reduced_profit(market: &MarketParams, params: &UtilityParams, n: f64) -> Result<f64> {
    let w = params.eval(n)? * market.max_nominal_wtp;
    Ok(market.m() * w * w / 4.0 - market.data_price * n)
}

/// Default data-size search interval `[n_min, n_hi]`, where `phi(n_hi) = 1 - 1e-6`
/// (capped at `1e7`). Beyond `n_hi` the reduced profit can only fall when data costs anything.
pub fn default_bracket(params: &UtilityParams) -> Result<(f64, f64)> {
    let n_min = params.feasible_domain()?;
    let n_hi = params.saturation_size(SATURATION_GAP).min(MAX_DATA_SIZE).max(n_min);
    Ok((n_min, n_hi))
}

fn check_bracket(params: &UtilityParams, bracket: (f64, f64)) -> Result<()> {
    let (lo, hi) = bracket;
    params.validate()?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidBracket { lo, hi });
    }
    params.check_feasible(lo).map_err(|_| Error::InvalidBracket { lo, hi })
}

/// Joint maximization of `F(n, p_s)` over `n` in `bracket` (default
/// [`default_bracket`]) and `p_s` in `[0, phi(n) W']`.
///
/// Substitutes the inner optimum `p_s = phi(n) W' / 2`, scans the reduced
/// profit on a log-spaced grid, then golden-section refines next to the best
/// grid point.
pub fn optimize_numeric(
    market: &MarketParams,
    params: &UtilityParams,
    bracket: Option<(f64, f64)>,
) -> Result<ProviderSolution> {
    market.validate()?;
    let bracket = match bracket {
        Some(b) => b,
        None => default_bracket(params)?,
    };
    check_bracket(params, bracket)?;
    let (lo, hi) = bracket;
    let lo = lo.max(params.n_min_unchecked());
    let hi = hi.max(lo);

    let m = market.m();
    let w = market.max_nominal_wtp;
    let p_b = market.data_price;
    let reduced = |n: f64| {
        let q = params.eval_unchecked(n) * w;
        m * q * q / 4.0 - p_b * n
    };
    let n_star = if hi > lo {
        let grid = log_spaced(lo, hi, SCAN_POINTS);
        scan_then_refine(reduced, &grid, N_TOLERANCE).0.x
    } else {
        lo
    };
    let p_s = params.eval(n_star)? * w / 2.0;
    let decision = ProviderDecision { n: n_star, p_s };
    let value = profit_literal(market, params, n_star, p_s)?;
    Ok(ProviderSolution::plain(decision, value, Method::Numeric))
}

/// Optimal fee for a fixed data size: `p_s = phi(n) W' / 2`, the unique
/// maximizer of the concave parabola `F(n, .)`.
pub fn optimize_fixed_n(market: &MarketParams, params: &UtilityParams, n: f64) -> Result<ProviderSolution> {
    market.validate()?;
    let p_s = params.eval(n)? * market.max_nominal_wtp / 2.0;
    let value = profit_literal(market, params, n, p_s)?;
    Ok(ProviderSolution::plain(ProviderDecision { n, p_s }, value, Method::FixedN))
}

/// Optimal data size for a fixed fee, from the first-order condition
/// `p_s M W' phi'(n) = p_b`; clamped to the domain minimum when the root lies below it.
pub fn optimize_fixed_ps(market: &MarketParams, params: &UtilityParams, p_s: f64) -> Result<ProviderSolution> {
    market.validate()?;
    params.validate()?;
    let w = market.max_nominal_wtp;
    if !(p_s.is_finite() && (0.0..=w).contains(&p_s)) {
        return Err(Error::InvalidDecision(format!("fixed fee must lie in [0, {w}], got {p_s}")));
    }
    let p_b = market.data_price;
    if p_b == 0.0 {
        return Err(Error::UnboundedDemand);
    }
    let scale = market.m() * w * p_s / p_b;
    let root = match *params {
        UtilityParams::Fraction { kappa, g } => ((g * kappa * scale).sqrt() - 1.0) / g,
        UtilityParams::Exponential { mu, h } => (h * mu * scale).ln() / h,
    };
    let n_min = params.n_min_unchecked();
    let n = if root.is_nan() || root < n_min { n_min } else { root };
    let value = profit_literal(market, params, n, p_s)?;
    Ok(ProviderSolution::plain(ProviderDecision { n, p_s }, value, Method::FixedPs))
}

/// Price above which the provider's demand sits at the domain minimum:
/// `M W'^2 phi'(n_min) / 2`, since `phi <= 1` and `phi'` is decreasing.
pub fn shutoff_price(market: &MarketParams, params: &UtilityParams) -> Result<f64> {
    market.validate()?;
    let n_min = params.feasible_domain()?;
    let w = market.max_nominal_wtp;
    Ok(market.m() * w * w * params.deriv1_unchecked(n_min) / 2.0)
}
