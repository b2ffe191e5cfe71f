//! Closed-form joint optima for unit maximum nominal willingness-to-pay.
//!
//! Exponential utility: the first-order conditions reduce to a quadratic in
//! the fee, giving two paired roots
//!
//! ```text
//! p_s = 1/4 ± sqrt(1 - 8 p_b / (h M)) / 4
//! n   = ln(h mu M / (4 p_b) ± h mu M sqrt(1/4 - 2 p_b / (h M)) / (2 p_b)) / h
//! ```
//!
//! Fraction utility: the first-order conditions reduce to a cubic in the fee.
//! [`case1_roots`] evaluates the reference root expressions term by term in
//! complex arithmetic (the cube roots of `A10` are principal values), taking
//! real parts where the reference form does. Those expressions are not
//! trusted: every fraction-family answer is compared with
//! [`optimize_numeric`](super::optimize_numeric) and the outcome recorded in
//! `closed_form_agrees`.

use num_complex::Complex64;

use super::{optimize_numeric, profit_literal, Candidate, MarketParams, Method, ProviderDecision, ProviderSolution};
use crate::error::{Error, Result};
use crate::utility::UtilityParams;

/// Relative profit difference within which a closed-form answer counts as
/// agreeing with the numeric optimizer.
pub const AGREEMENT_TOLERANCE: f64 = 1e-4;
/// Imaginary parts above this fraction of the magnitude are reported.
pub const IMAGINARY_TOLERANCE: f64 = 1e-6;
/// Candidates whose profits differ by less than this are tied; the smaller `n` wins.
const TIE_TOLERANCE: f64 = 1e-12;

fn require_unit_wtp(market: &MarketParams) -> Result<()> {
    market.validate()?;
    if market.max_nominal_wtp != 1.0 {
        return Err(Error::UnitWtpRequired(market.max_nominal_wtp));
    }
    Ok(())
}

fn candidate(market: &MarketParams, params: &UtilityParams, n: f64, p_s: f64) -> Candidate {
    let profit = if params.check_feasible(n).is_ok() && p_s.is_finite() {
        profit_literal(market, params, n, p_s).ok()
    } else {
        None
    };
    let feasible = profit.is_some() && {
        let ceiling = params.eval_unchecked(n) * market.max_nominal_wtp;
        p_s >= 0.0 && p_s <= ceiling
    };
    Candidate { n, p_s, profit, feasible }
}

/// Feasible candidate of highest profit; near-ties go to the smaller `n`.
fn select(candidates: &[Candidate]) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for c in candidates.iter().filter(|c| c.feasible) {
        let value = c.profit.unwrap_or(f64::NEG_INFINITY);
        best = match best {
            None => Some(*c),
            Some(b) => {
                let bv = b.profit.unwrap_or(f64::NEG_INFINITY);
                if value > bv + TIE_TOLERANCE || ((value - bv).abs() <= TIE_TOLERANCE && c.n < b.n) {
                    Some(*c)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

fn agrees_with_numeric(market: &MarketParams, params: &UtilityParams, profit: f64) -> Result<bool> {
    let reference = optimize_numeric(market, params, None)?;
    let scale = reference.profit.abs().max(f64::MIN_POSITIVE);
    Ok((profit - reference.profit).abs() <= AGREEMENT_TOLERANCE * scale)
}

/// Exponential-utility closed form: both sign choices are evaluated and the
/// feasible one with the higher profit returned.
pub fn closed_form_case2(market: &MarketParams, params: &UtilityParams) -> Result<ProviderSolution> {
    require_unit_wtp(market)?;
    params.validate()?;
    let UtilityParams::Exponential { mu, h } = *params else {
        return Err(Error::WrongFamily("fraction"));
    };
    let m = market.m();
    let p_b = market.data_price;
    let discriminant = 1.0 - 8.0 * p_b / (h * m);
    if discriminant < 0.0 {
        return Err(Error::NegativeDiscriminant { discriminant });
    }
    let root_fee = discriminant.sqrt();
    let root_size = (0.25 - 2.0 * p_b / (h * m)).max(0.0).sqrt();
    let roots: Vec<Candidate> = [1.0, -1.0]
        .into_iter()
        .map(|sign: f64| {
            let p_s = 0.25 + sign * root_fee / 4.0;
            let arg = h * mu * m / (4.0 * p_b) + sign * h * mu * m * root_size / (2.0 * p_b);
            let n = arg.ln() / h;
            candidate(market, params, n, p_s)
        })
        .collect();
    let best = select(&roots).ok_or(Error::NoFeasibleCandidate)?;
    let decision = ProviderDecision { n: best.n, p_s: best.p_s };
    let profit = profit_literal(market, params, best.n, best.p_s)?;
    Ok(ProviderSolution {
        closed_form_roots: Some(roots),
        closed_form_agrees: Some(agrees_with_numeric(market, params, profit)?),
        ..ProviderSolution::plain(decision, profit, Method::ClosedForm)
    })
}

/// Raw fraction-family roots: three data sizes, three fees, and `B1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case1Roots {
    pub n: [Complex64; 3],
    pub p_s: [Complex64; 3],
    pub b1: Complex64,
}

impl Case1Roots {
    /// Real parts of the data-size roots and fee roots, and whether any
    /// imaginary part exceeded [`IMAGINARY_TOLERANCE`] of its value.
    pub fn real_parts(&self) -> ([f64; 3], [f64; 3], bool) {
        let residual = self
            .n
            .iter()
            .chain(self.p_s.iter())
            .any(|z| z.im.abs() > IMAGINARY_TOLERANCE * z.norm());
        (self.n.map(|z| z.re), self.p_s.map(|z| z.re), residual)
    }
}

/// Evaluates the reference fraction-family root expressions.
///
/// `n_3`'s two displayed terms have no operator between them; they are summed,
/// mirroring `n_2`. The fee roots `p_s2` and `p_s3` keep only their real
/// leading terms `1/3 - B1/2 - 1/(72 B1)`.
pub fn case1_roots(kappa: f64, g: f64, users: f64, p_b: f64) -> Case1Roots {
    let i = Complex64::i();
    let sqrt3 = 3f64.sqrt();
    let m = users;
    let third = 1.0 / 216.0;

    let a12 = p_b * kappa / (8.0 * g * m);
    let a11 = Complex64::new((a12 - third).powi(2) - 1.0 / 46656.0, 0.0).sqrt();
    let a10 = a11 + a12 - third;
    let c13 = a10.powf(1.0 / 3.0);
    let c23 = c13 * c13;
    let c43 = c23 * c23;

    let a1 = sqrt3 * kappa * i / 48.0;
    let a2 = 1.0 / (36.0 * c13) + c13 + 1.0 / 3.0;
    let a3 = sqrt3 * g * m * c13 * i / 216.0;
    let a4 = sqrt3 * g * m * c43 * i;
    let a5 = g * m * c13 / 216.0;
    let a6 = sqrt3 * g * m * a11 * i / 6.0;
    let a7 = p_b * g * c23;
    let a8 = g * m * c43;
    let a9 = g * c23;

    let n1 = m * a2 / p_b - 2.0 * m * a2 * a2 / p_b - 1.0 / g;
    let n2 = (kappa / 48.0 - c23 + a1) / a9 + (g * m * a11 / 6.0 + a5 + a8 - a3 - a4 + a6) / a7;
    let n3 = -(c23 - kappa / 48.0 + a1) / a9 + (g * m * a11 / 6.0 + a5 + a8 + a3 + a4 - a6) / a7;

    let b1 = (Complex64::new((a12 - third).powi(2) - 1.0 / 46656.0, 0.0).sqrt() + a12 - third).powf(1.0 / 3.0);
    let ps1 = (6.0 * b1 + 1.0).powi(2) / (36.0 * b1);
    let ps23 = 1.0 / 3.0 - b1 / 2.0 - 1.0 / (72.0 * b1);

    Case1Roots {
        n: [n1, n2, n3],
        p_s: [ps1, ps23, ps23],
        b1,
    }
}

/// Fraction-utility closed form over the 3 x 3 grid of reference roots,
/// cross-checked against the numeric optimizer.
pub fn closed_form_case1(market: &MarketParams, params: &UtilityParams) -> Result<ProviderSolution> {
    require_unit_wtp(market)?;
    params.validate()?;
    let UtilityParams::Fraction { kappa, g } = *params else {
        return Err(Error::WrongFamily("exponential"));
    };
    let roots = case1_roots(kappa, g, market.m(), market.data_price);
    let (ns, fees, residual) = roots.real_parts();
    let candidates: Vec<Candidate> = ns
        .iter()
        .flat_map(|&n| fees.iter().map(move |&p_s| (n, p_s)))
        .map(|(n, p_s)| candidate(market, params, n, p_s))
        .collect();
    let best = select(&candidates).ok_or(Error::NoFeasibleCandidate)?;
    let decision = ProviderDecision { n: best.n, p_s: best.p_s };
    let profit = profit_literal(market, params, best.n, best.p_s)?;

    Ok(ProviderSolution {
        closed_form_roots: Some(candidates),
        closed_form_agrees: Some(agrees_with_numeric(market, params, profit)?),
        imaginary_residual: Some(residual),
        ..ProviderSolution::plain(decision, profit, Method::ClosedForm)
    })
}
