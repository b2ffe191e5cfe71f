//! Demand and equilibrium as the fraction family's rate `g` grows.
//!
//!     cargo run --example g_sweep

use datamarket::provider::MarketParams;
use datamarket::stackelberg::sweep_g;

fn main() -> datamarket::Result<()> {
    for p_b in [0.1, 0.5, 1.0] {
        let market = MarketParams::new(500, p_b)?;
        let rows = sweep_g(&market, 1.109, &[0.1, 0.2, 0.3, 0.4], 200)?;
        println!("p_b = {p_b}");
        for r in &rows {
            let e = &r.equilibrium;
            println!(
                "  g = {:.1}  n = {:8.3}   equilibrium p_b* = {:.4} n* = {:.3} leader profit = {:.4}",
                r.g, r.n_at_price, e.p_b_star, e.n_star, e.leader_profit
            );
        }
    }
    Ok(())
}
