//! Fit both utility families to a noisy learning curve and compare them.
//!
//!     cargo run --example fit_learning_curve

use datamarket::calibration::{fit, generate_synthetic, residual_sse, FitOptions};
use datamarket::search::linspace;
use datamarket::{Family, UtilityParams};

fn main() -> datamarket::Result<()> {
    let truth = UtilityParams::exponential(0.457, 0.039)?;
    let sizes = linspace(5.0, 150.0, 30);
    let points = generate_synthetic(&truth, &sizes, 0.005, 7)?;
    println!("{} points from {truth}, sigma = 0.005", points.len());
    println!("sse at the generating parameters: {:.6e}", residual_sse(&points, &truth)?);

    for family in [Family::Exponential, Family::Fraction] {
        let r = fit(&points, family, &FitOptions::default())?;
        println!(
            "{family:<12} {}  sse = {:.6e}  iterations = {}  converged = {}",
            r.params, r.sse, r.iterations, r.converged
        );
    }
    Ok(())
}
