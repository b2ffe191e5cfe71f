//! Leader-follower pricing: the data source picks p_b knowing the provider's
//! demand curve.
//!
//!     cargo run --example stackelberg_equilibrium

use datamarket::provider::MarketParams;
use datamarket::stackelberg::{default_price_bracket, search_equilibrium};
use datamarket::UtilityParams;

fn main() -> datamarket::Result<()> {
    let market = MarketParams::new(500, 0.0)?;
    let params = UtilityParams::fraction(1.109, 0.271)?;
    let bracket = default_price_bracket(&market, &params)?;
    let search = search_equilibrium(&market, &params, bracket, 200)?;

    println!("{:>8} {:>10} {:>10}", "p_b", "n(p_b)", "p_b n");
    for d in search.curve.iter().step_by(20) {
        println!("{:8.4} {:10.4} {:10.4}", d.p_b, d.n, d.leader_profit());
    }
    let e = search.equilibrium;
    println!(
        "\nequilibrium: p_b* = {:.6}, n* = {:.4}, p_s* = {:.4}\nleader profit {:.4}, provider profit {:.4}",
        e.p_b_star, e.n_star, e.p_s_star, e.leader_profit, e.follower_profit
    );
    Ok(())
}
