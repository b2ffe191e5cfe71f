//! Closed-form optima against the numeric optimizer.
//!
//! The exponential family's two roots reproduce the numeric answer. The
//! reference fraction-family roots are evaluated as written and usually do not;
//! the candidate table shows where they land.
//!
//!     cargo run --example closed_form_audit

use datamarket::provider::closed_form::case1_roots;
use datamarket::provider::{closed_form_case1, closed_form_case2, optimize_numeric, MarketParams};
use datamarket::UtilityParams;

fn main() -> datamarket::Result<()> {
    let market = MarketParams::new(500, 0.5)?;

    let exp = UtilityParams::exponential(0.457, 0.039)?;
    let closed = closed_form_case2(&market, &exp)?;
    let numeric = optimize_numeric(&market, &exp, None)?;
    println!("{exp}");
    for c in closed.closed_form_roots.as_deref().unwrap_or_default() {
        println!("  root n = {:10.4}  p_s = {:.6}  feasible = {}", c.n, c.p_s, c.feasible);
    }
    println!("  closed  {:?}  F = {:.6}", closed.decision, closed.profit);
    println!("  numeric {:?}  F = {:.6}", numeric.decision, numeric.profit);

    let frac = UtilityParams::fraction(1.109, 0.271)?;
    let roots = case1_roots(1.109, 0.271, 500.0, 0.5);
    let (ns, fees, imaginary) = roots.real_parts();
    println!("\n{frac}");
    println!("  n roots   {ns:?}");
    println!("  fee roots {fees:?}");
    println!("  B1 = {}  imaginary parts left = {imaginary}", roots.b1);
    let s = closed_form_case1(&market, &frac)?;
    let numeric = optimize_numeric(&market, &frac, None)?;
    println!("  best candidate {:?}  F = {:.6}", s.decision, s.profit);
    println!("  numeric        {:?}  F = {:.6}", numeric.decision, numeric.profit);
    println!("  agrees: {:?}", s.closed_form_agrees);
    Ok(())
}
