//! Provider profit over a data-size by fee grid, printed as a coarse text map.
//!
//!     cargo run --example profit_surface

use datamarket::provider::{optimize_numeric, profit_literal, MarketParams};
use datamarket::search::linspace;
use datamarket::UtilityParams;

const SHADES: &[u8] = b" .:-=+*#%@";

fn main() -> datamarket::Result<()> {
    let market = MarketParams::new(500, 0.5)?;
    let params = UtilityParams::fraction(1.109, 0.271)?;
    let ns = linspace(1.0, 120.0, 60);
    let fees = linspace(0.0, 1.0, 21);

    let mut grid = Vec::new();
    for &p_s in fees.iter().rev() {
        let row: Vec<f64> = ns.iter().map(|&n| profit_literal(&market, &params, n, p_s)).collect::<Result<_, _>>()?;
        grid.push((p_s, row));
    }
    let best = grid.iter().flat_map(|(_, r)| r.iter().copied()).fold(f64::NEG_INFINITY, f64::max);

    // negative profit is blank; the top decile of the positive range is '@'
    for (p_s, row) in &grid {
        let line: String = row
            .iter()
            .map(|&v| {
                let level = if v <= 0.0 { 0 } else { ((v / best) * 9.0).round() as usize };
                SHADES[level.min(9)] as char
            })
            .collect();
        println!("{p_s:4.2} |{line}|");
    }
    println!("      n = 1 .. 120");

    let s = optimize_numeric(&market, &params, None)?;
    println!("maximum {:.4} at n = {:.3}, p_s = {:.4}", s.profit, s.decision.n, s.decision.p_s);
    Ok(())
}
