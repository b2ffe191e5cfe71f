//! Data-utility calibration and optimal pricing for a three-tier data market:
//! a data source sells raw data to a service provider, which trains a model on
//! it and sells subscriptions to consumers.
//!
//! * [`utility`]: learning-curve families mapping data size to model quality.
//! * [`calibration`]: least-squares fitting of those families to accuracy measurements.
//! * [`provider`]: the provider's profit and its joint maximization over data size and fee.
//! * [`stackelberg`]: the data source's price as leader against the provider's best response.
//! * [`cli`]: the command-line front end.

pub mod calibration;
pub mod cli;
pub mod error;
pub mod numfmt;
pub mod provider;
pub mod search;
pub mod stackelberg;
pub mod utility;

pub use calibration::{fit, generate_synthetic, load_points, residual_sse, ExperimentPoint, FitOptions, FitResult};
pub use error::{Error, Result};
pub use utility::{Family, UtilityParams};
pub use provider::{
    closed_form_case1, closed_form_case2, optimize_fixed_n, optimize_fixed_ps, optimize_numeric, profit, MarketParams,
    ProviderDecision, ProviderSolution,
};
pub use stackelberg::{demand, demand_curve, leader_profit, solve_equilibrium, DemandPoint, StackelbergEquilibrium};
