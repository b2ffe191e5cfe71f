//! Reference formulas written out independently of the library, plus a
//! brute-force profit grid.

#![allow(dead_code)]

use datamarket::UtilityParams;

pub fn phi(params: &UtilityParams, n: f64) -> f64 {
    match *params {
        UtilityParams::Fraction { kappa, g } => 1.0 - kappa / (1.0 + g * n),
        UtilityParams::Exponential { mu, h } => 1.0 - mu * (-h * n).exp(),
    }
}

/// Predicted classification error `1 - phi(n)`, computed without cancellation.
pub fn model_error(params: &UtilityParams, n: f64) -> f64 {
    match *params {
        UtilityParams::Fraction { kappa, g } => kappa / (1.0 + g * n),
        UtilityParams::Exponential { mu, h } => mu * (-h * n).exp(),
    }
}

/// `p_s M (phi(n) W - p_s) - p_b n`
pub fn profit(params: &UtilityParams, users: f64, wtp: f64, p_b: f64, n: f64, p_s: f64) -> f64 {
    p_s * users * (phi(params, n) * wtp - p_s) - p_b * n
}

#[derive(Debug, Clone, Copy)]
pub struct GridBest {
    pub n: f64,
    pub p_s: f64,
    pub profit: f64,
}

/// Exhaustive search over `n = n_lo + i dn`, `p_s = j dp` with `p_s <= phi(n) W`.
pub fn brute_force(
    params: &UtilityParams,
    users: f64,
    wtp: f64,
    p_b: f64,
    (n_lo, n_hi): (f64, f64),
    dn: f64,
    dp: f64,
) -> GridBest {
    let mut best = GridBest { n: f64::NAN, p_s: f64::NAN, profit: f64::NEG_INFINITY };
    let steps = ((n_hi - n_lo) / dn).round() as usize;
    for i in 0..=steps {
        let n = n_lo + i as f64 * dn;
        let ceiling = phi(params, n) * wtp;
        if ceiling < 0.0 {
            continue;
        }
        let fee_steps = (ceiling / dp).floor() as usize;
        for j in 0..=fee_steps {
            let p_s = j as f64 * dp;
            let value = p_s * users * (ceiling - p_s) - p_b * n;
            if value > best.profit {
                best = GridBest { n, p_s, profit: value };
            }
        }
    }
    best
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
