//! Leader pricing by the data source against the provider's best response.
//!
//! The data source picks a unit price `p_b`; the provider answers with its
//! profit-maximizing `(n, p_s)`, so demand is `n(p_b)` and the leader earns
//! `P(p_b) = p_b n(p_b)`. `P` is not known to be unimodal, so the leader
//! problem is solved by a grid scan with golden-section refinement inside the
//! best grid cell.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::fmt_sig;
use crate::provider::{optimize_numeric, shutoff_price, MarketParams};
use crate::search::{linspace, scan_then_refine};
use crate::utility::UtilityParams;

pub const MIN_RESOLUTION: usize = 100;
pub const DEMAND_CURVE_HEADER: &str = "p_b,n,leader_profit,follower_profit";

/// Demand above the domain minimum by less than this counts as no purchase.
const NO_TRADE_TOLERANCE: f64 = 1e-9;
/// Allowed numerical slack in demand monotonicity.
const MONOTONE_SLACK: f64 = 1e-6;

/// The provider's best response at one data price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub p_b: f64,
    pub n: f64,
    pub p_s: f64,
    pub follower_profit: f64,
}

impl DemandPoint {
    pub fn leader_profit(&self) -> f64 {
        self.p_b * self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackelbergEquilibrium {
    pub p_b_star: f64,
    pub n_star: f64,
    pub p_s_star: f64,
    pub leader_profit: f64,
    pub follower_profit: f64,
}

/// Provider demand at data price `p_b`; `market.data_price` is ignored.
pub fn demand(market: &MarketParams, params: &UtilityParams, p_b: f64) -> Result<DemandPoint> {
    let priced = market.with_data_price(p_b)?;
    let s = optimize_numeric(&priced, params, None)?;
    Ok(DemandPoint { p_b, n: s.decision.n, p_s: s.decision.p_s, follower_profit: s.profit })
}

fn check_price_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("price grid is empty".into()));
    }
    if grid.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidGrid("prices must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("prices must be strictly increasing".into()));
    }
    Ok(())
}

/// Demand at every price of a strictly increasing grid.
///
/// Demand is nonincreasing in price; a violation beyond numerical slack is a bug
/// in the optimizer and panics.
pub fn demand_curve(market: &MarketParams, params: &UtilityParams, grid: &[f64]) -> Result<Vec<DemandPoint>> {
    check_price_grid(grid)?;
    let curve = grid.iter().map(|&p| demand(market, params, p)).collect::<Result<Vec<_>>>()?;
    for w in curve.windows(2) {
        assert!(
            w[1].n <= w[0].n + MONOTONE_SLACK,
            "demand rose from {} to {} between p_b = {} and {}",
            w[0].n,
            w[1].n,
            w[0].p_b,
            w[1].p_b
        );
    }
    Ok(curve)
}

/// Leader revenue `p_b n(p_b)` for a demand point computed at `p_b`.
pub fn leader_profit(p_b: f64, point: &DemandPoint) -> Result<f64> {
    if p_b != point.p_b {
        return Err(Error::PriceMismatch { requested: p_b, point: point.p_b });
    }
    Ok(point.leader_profit())
}

/// Leader price search interval `[0, shutoff]`.
pub fn default_price_bracket(market: &MarketParams, params: &UtilityParams) -> Result<(f64, f64)> {
    Ok((0.0, shutoff_price(market, params)?))
}

/// Equilibrium together with the demand curve scanned to find it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSearch {
    pub equilibrium: StackelbergEquilibrium,
    pub curve: Vec<DemandPoint>,
}

/// Leader-optimal price over `bracket`, scanned at `resolution` evenly
/// spaced prices and refined next to the best one.
pub fn solve_equilibrium(
    market: &MarketParams,
    params: &UtilityParams,
    bracket: (f64, f64),
    resolution: usize,
) -> Result<StackelbergEquilibrium> {
    Ok(search_equilibrium(market, params, bracket, resolution)?.equilibrium)
}

pub fn search_equilibrium(
    market: &MarketParams,
    params: &UtilityParams,
    bracket: (f64, f64),
    resolution: usize,
) -> Result<EquilibriumSearch> {
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidBracket { lo, hi });
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidGrid(format!(
            "resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let grid = linspace(lo, hi, resolution);
    let curve = demand_curve(market, params, &grid)?;
    let n_min = params.feasible_domain()?;
    if curve.iter().all(|d| d.n <= n_min + NO_TRADE_TOLERANCE) {
        return Err(Error::NoTrade);
    }

    let mut failure = None;
    let revenue = |p: f64| match demand(market, params, p) {
        Ok(d) => d.leader_profit(),
        Err(e) => {
            failure.get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    let tol = 1e-12 * hi.max(1.0);
    let (best, _) = scan_then_refine(revenue, &grid, tol);
    if let Some(e) = failure {
        return Err(e);
    }

    let at = demand(market, params, best.x)?;
    let equilibrium = StackelbergEquilibrium {
        p_b_star: at.p_b,
        n_star: at.n,
        p_s_star: at.p_s,
        leader_profit: at.leader_profit(),
        follower_profit: at.follower_profit,
    };
    Ok(EquilibriumSearch { equilibrium, curve })
}

/// One row of a sweep over the fraction family's rate parameter `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub g: f64,
    /// Data price at which `n_at_price` was computed.
    pub p_b: f64,
    /// Provider demand at the fixed price `p_b`.
    pub n_at_price: f64,
    pub equilibrium: StackelbergEquilibrium,
}

/// For each `g`, demand at the fixed `market.data_price` and the equilibrium over
/// `[0, shutoff]` of the fraction utility with that `g` and the given `kappa`.
pub fn sweep_g(market: &MarketParams, kappa: f64, gs: &[f64], resolution: usize) -> Result<Vec<SweepRow>> {
    gs.iter()
        .map(|&g| {
            let params = UtilityParams::fraction(kappa, g)?;
            let at_price = demand(market, &params, market.data_price)?;
            let bracket = default_price_bracket(market, &params)?;
            let equilibrium = solve_equilibrium(market, &params, bracket, resolution)?;
            Ok(SweepRow { g, p_b: market.data_price, n_at_price: at_price.n, equilibrium })
        })
        .collect()
}

pub fn write_demand_curve<W: Write>(writer: W, curve: &[DemandPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(DEMAND_CURVE_HEADER.split(','))?;
    for d in curve {
        wtr.write_record([fmt_sig(d.p_b), fmt_sig(d.n), fmt_sig(d.leader_profit()), fmt_sig(d.follower_profit)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// A demand-curve CSV row: `(p_b, n, leader_profit, follower_profit)`.
pub type CurveRow = (f64, f64, f64, f64);

pub fn read_demand_curve<R: Read>(reader: R) -> Result<Vec<CurveRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if !header.iter().eq(DEMAND_CURVE_HEADER.split(',')) {
        return Err(Error::Parse { line: 1, message: format!("expected header `{DEMAND_CURVE_HEADER}`") });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = [0.0; 4];
        for (slot, field) in values.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("cannot parse `{field}`") })?;
        }
        rows.push((values[0], values[1], values[2], values[3]));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::default_bracket;

    fn expo() -> UtilityParams {
        UtilityParams::exponential(0.457, 0.039).unwrap()
    }

    fn market() -> MarketParams {
        MarketParams::new(500, 0.0).unwrap()
    }

    #[test]
    fn demand_examples() {
        let e = expo();
        let free = demand(&market(), &e, 0.0).unwrap();
        assert_eq!(free.n, default_bracket(&e).unwrap().1);
        let shut = shutoff_price(&market(), &e).unwrap();
        let off = demand(&market(), &e, shut * 1.01).unwrap();
        assert_eq!(off.n, 0.0);
        let worked = demand(&market(), &e, 0.5).unwrap();
        assert!((worked.n - 54.656_284).abs() < 1e-5);
    }

    #[test]
    fn demand_curve_examples() {
        let e = expo();
        let single = demand_curve(&market(), &e, &[0.5]).unwrap();
        assert_eq!(single[0], demand(&market(), &e, 0.5).unwrap());
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.2).collect();
        let curve = demand_curve(&market(), &e, &grid).unwrap();
        assert!(curve.windows(2).all(|w| w[1].n <= w[0].n));
        let doubled: Vec<f64> = grid.iter().map(|p| 2.0 * p).collect();
        let curve2 = demand_curve(&market(), &e, &doubled).unwrap();
        for (a, b) in curve.iter().zip(&curve2) {
            assert!(b.n <= a.n + 1e-9);
        }
        assert!(demand_curve(&market(), &e, &[0.5, 0.4]).is_err());
        assert!(demand_curve(&market(), &e, &[]).is_err());
        assert!(demand_curve(&market(), &e, &[-0.1, 0.4]).is_err());
    }

    #[test]
    fn leader_profit_examples() {
        let p = DemandPoint { p_b: 0.0, n: 10.0, p_s: 0.4, follower_profit: 1.0 };
        assert_eq!(leader_profit(0.0, &p).unwrap(), 0.0);
        let p = DemandPoint { p_b: 0.7, n: 0.0, p_s: 0.4, follower_profit: 1.0 };
        assert_eq!(leader_profit(0.7, &p).unwrap(), 0.0);
        let p = DemandPoint { p_b: 0.5, n: 54.66, p_s: 0.47, follower_profit: 1.0 };
        assert!((leader_profit(0.5, &p).unwrap() - 27.33).abs() < 1e-12);
        assert!(matches!(leader_profit(0.6, &p), Err(Error::PriceMismatch { .. })));
    }

    #[test]
    fn equilibrium_dominates_grid() {
        let e = expo();
        let search = search_equilibrium(&market(), &e, (0.01, 0.039 * 500.0 / 8.0), 120).unwrap();
        let eq = search.equilibrium;
        for d in &search.curve {
            assert!(eq.leader_profit >= d.leader_profit() - 1e-9);
        }
        assert_eq!(eq.leader_profit, eq.p_b_star * eq.n_star);
        let again = demand(&market(), &e, eq.p_b_star).unwrap();
        assert!((again.n - eq.n_star).abs() < 1e-6);
    }

    #[test]
    fn no_trade_and_bad_brackets() {
        let e = expo();
        let shut = shutoff_price(&market(), &e).unwrap();
        assert!(matches!(
            solve_equilibrium(&market(), &e, (shut * 1.1, shut * 2.0), 100),
            Err(Error::NoTrade)
        ));
        assert!(matches!(solve_equilibrium(&market(), &e, (1.0, 0.5), 100), Err(Error::InvalidBracket { .. })));
        assert!(matches!(solve_equilibrium(&market(), &e, (0.0, 0.5), 10), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn larger_g_buys_less() {
        let m = market().with_data_price(0.5).unwrap();
        let rows = sweep_g(&m, 1.109, &[0.1, 0.2, 0.3], 100).unwrap();
        assert!(rows.windows(2).all(|w| w[1].n_at_price <= w[0].n_at_price));
    }

    #[test]
    fn curve_csv_round_trip() {
        let e = expo();
        let curve = demand_curve(&market(), &e, &[0.1, 0.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_demand_curve(&mut buf, &curve).unwrap();
        assert!(buf.starts_with(b"p_b,n,leader_profit,follower_profit\n"));
        let rows = read_demand_curve(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, d) in rows.iter().zip(&curve) {
            assert_eq!(row.0, d.p_b);
            assert!((row.1 - d.n).abs() <= 1e-8 * d.n.abs().max(1.0));
        }
    }
}
