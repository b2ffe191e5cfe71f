//! The provider's joint choice of data size and subscription fee, plus the
//! two one-variable special cases.
//!
//!     cargo run --example provider_optimum [p_b]

use datamarket::provider::{optimize_fixed_n, optimize_fixed_ps, optimize_numeric, shutoff_price, MarketParams};
use datamarket::UtilityParams;

fn main() -> datamarket::Result<()> {
    let p_b: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let market = MarketParams::new(500, p_b)?;

    for params in [UtilityParams::fraction(1.109, 0.271)?, UtilityParams::exponential(0.457, 0.039)?] {
        let s = optimize_numeric(&market, &params, None)?;
        let d = s.decision;
        println!("{params}, M = 500, p_b = {p_b}");
        println!("  joint optimum   n = {:9.4}  p_s = {:.6}  F = {:.6}", d.n, d.p_s, s.profit);

        let n_fixed = (d.n * 2.0).round();
        let a = optimize_fixed_n(&market, &params, n_fixed)?;
        println!("  n fixed at {n_fixed:<4} p_s = {:.6}  F = {:.6}", a.decision.p_s, a.profit);
        let b = optimize_fixed_ps(&market, &params, 0.4)?;
        println!("  p_s fixed at 0.4  n = {:.4}  F = {:.6}", b.decision.n, b.profit);
        println!("  demand vanishes above p_b = {:.4}", shutoff_price(&market, &params)?);
    }
    Ok(())
}
