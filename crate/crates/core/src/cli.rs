//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 fit did not converge,
//! 3 closed form unavailable (numeric result still written), 4 no trade.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::calibration::{fit, generate_synthetic, load_points, write_points, FitOptions, FitResult};
use crate::error::{Error, Result};
use crate::numfmt::{fmt_sig, to_json_string};
use crate::provider::{
    closed_form_case1, closed_form_case2, optimize_fixed_n, optimize_fixed_ps, optimize_numeric, profit_literal,
    MarketParams, ProviderSolution,
};
use crate::search::linspace;
use crate::stackelberg::{default_price_bracket, search_equilibrium, sweep_g, write_demand_curve, SweepRow};
use crate::utility::{Family, UtilityParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_CLOSED_FORM_UNAVAILABLE: i32 = 3;
pub const EXIT_NO_TRADE: i32 = 4;

/// User count used by the figure presets.
pub const PRESET_USERS: u64 = 500;
/// Fraction-family fit used by the figure presets.
pub const PRESET_KAPPA: f64 = 1.109;
pub const PRESET_G: f64 = 0.271;
/// Data price used by presets that need a fixed price.
pub const PRESET_DATA_PRICE: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "datamarket", version, about = "Data-utility calibration and data-market pricing")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit utility parameters to an `n,error` CSV.
    Fit(FitArgs),
    /// Generate synthetic `n,error` points from known parameters.
    Synth(SynthArgs),
    /// Maximize the provider's profit.
    Optimize(OptimizeArgs),
    /// Tabulate provider profit over an (n, p_s) grid.
    Surface(SurfaceArgs),
    /// Solve for the data source's leader price.
    Equilibrium(EquilibriumArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyChoice {
    Fraction,
    Exponential,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Fig4,
    Fig5,
    Fig6,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    family: FamilyChoice,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    params: PathBuf,
    /// Data sizes as `LO,HI,COUNT` (evenly spaced).
    #[arg(long)]
    sizes: String,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MarketArgs {
    /// Utility parameters JSON (bare parameters or `fit` output).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    users: Option<u64>,
    #[arg(long)]
    data_price: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    max_wtp: f64,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long, conflicts_with = "fix_ps")]
    fix_n: Option<f64>,
    #[arg(long)]
    fix_ps: Option<f64>,
    /// Use the family's closed form instead of the numeric optimizer.
    #[arg(long)]
    closed_form: bool,
    /// Data-size interval `LO,HI` for the numeric optimizer.
    #[arg(long)]
    bracket: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// Data-size grid `LO,HI,COUNT`.
    #[arg(long)]
    n_grid: Option<String>,
    /// Fee grid `LO,HI,COUNT`.
    #[arg(long)]
    ps_grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EquilibriumArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// Leader price interval `LO,HI`; defaults to `[0, shutoff price]`.
    #[arg(long)]
    bracket: Option<String>,
    /// Number of prices scanned.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Fraction-family `g` values to sweep (`A,B,C`); demand is reported at `--data-price`.
    #[arg(long)]
    sweep_g: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Demand-curve CSV (or sweep CSV with `--sweep-g`).
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Surface(a) => cmd_surface(a),
        Command::Equilibrium(a) => cmd_equilibrium(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NoTrade => EXIT_NO_TRADE,
                _ => EXIT_INPUT,
            }
        }
    }
}

/// Replaces `--config FILE` with the flags its JSON object spells out.
///
/// Keys map to `--key` (underscores become dashes); `true` becomes a bare
/// flag, `false`/`null` are dropped, arrays are comma-joined. The expanded
/// flags are inserted before the remaining arguments, so explicit flags win.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "--config needs a file path"))?;
            config = Some(PathBuf::from(path));
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let value: Value = serde_json::from_reader(File::open(&path)?)?;
    let Value::Object(map) = value else {
        return Err(Error::Parse { line: 1, message: "config must be a JSON object".into() });
    };
    let mut flags: Vec<OsString> = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => flags.push(flag.into()),
            Value::Array(items) => {
                flags.push(flag.into());
                flags.push(items.iter().map(scalar).collect::<Vec<_>>().join(",").into());
            }
            other => {
                flags.push(flag.into());
                flags.push(scalar(&other).into());
            }
        }
    }
    // program name and subcommand stay in front
    let split = rest.len().min(2);
    let mut out: Vec<OsString> = rest[..split].to_vec();
    out.extend(flags);
    out.extend(rest[split..].iter().cloned());
    Ok(out)
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidGrid(format!("cannot parse {what} value `{t}`")))
        })
        .collect()
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    match parse_list(text, what)?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(Error::InvalidGrid(format!("{what} must be `LO,HI`"))),
    }
}

fn parse_grid(text: &str, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(Error::InvalidGrid(format!("{what} must be `LO,HI,COUNT`")));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| Error::InvalidGrid(format!("bad {what} start `{lo}`")))?;
    let hi: f64 = hi.trim().parse().map_err(|_| Error::InvalidGrid(format!("bad {what} end `{hi}`")))?;
    let count: usize =
        count.trim().parse().map_err(|_| Error::InvalidGrid(format!("bad {what} count `{count}`")))?;
    if !(lo.is_finite() && hi.is_finite()) || count == 0 || hi < lo || (count > 1 && hi == lo) {
        return Err(Error::InvalidGrid(format!("{what} `{text}` is empty or reversed")));
    }
    Ok(linspace(lo, hi, count))
}

/// Reads utility parameters from bare parameter JSON, a single `fit` result,
/// or a `fit --family both` result (its best fit).
pub fn load_params(path: &Path) -> Result<UtilityParams> {
    let value: Value = serde_json::from_reader(File::open(path)?)?;
    let params = if value.get("family").is_some() {
        serde_json::from_value::<UtilityParams>(value)?
    } else if let Some(p) = value.get("params") {
        serde_json::from_value::<UtilityParams>(p.clone())?
    } else if let (Some(best), Some(fits)) = (value.get("best").and_then(Value::as_str), value.get("fits")) {
        let p = fits
            .get(best)
            .and_then(|f| f.get("params"))
            .ok_or_else(|| Error::InvalidParams(format!("fit output has no `{best}` entry")))?;
        serde_json::from_value::<UtilityParams>(p.clone())?
    } else {
        return Err(Error::InvalidParams(format!("{} holds no utility parameters", path.display())));
    };
    params.validate()?;
    Ok(params)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

fn resolve_market(args: &MarketArgs, needs_price: bool) -> Result<(MarketParams, UtilityParams)> {
    let params = match (&args.params, args.preset) {
        (Some(path), _) => load_params(path)?,
        (None, Some(_)) => UtilityParams::fraction(PRESET_KAPPA, PRESET_G)?,
        (None, None) => return Err(Error::InvalidParams("either --params or --preset is required".into())),
    };
    let users = match (args.users, args.preset) {
        (Some(u), _) => u,
        (None, Some(_)) => PRESET_USERS,
        (None, None) => return Err(Error::InvalidMarket("--users is required".into())),
    };
    let data_price = match (args.data_price, args.preset) {
        (Some(p), _) => p,
        (None, Some(_)) => PRESET_DATA_PRICE,
        (None, None) if needs_price => return Err(Error::InvalidMarket("--data-price is required".into())),
        (None, None) => 0.0,
    };
    let market = MarketParams::new(users, data_price)?.with_max_nominal_wtp(args.max_wtp)?;
    Ok((market, params))
}

#[derive(Serialize)]
struct BothFits {
    fits: std::collections::BTreeMap<&'static str, FitResult>,
    best: &'static str,
}

fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let loaded = load_points(&args.input)?;
    let options = FitOptions { max_iterations: args.max_iterations, ..FitOptions::default() };
    let families: &[Family] = match args.family {
        FamilyChoice::Fraction => &[Family::Fraction],
        FamilyChoice::Exponential => &[Family::Exponential],
        FamilyChoice::Both => &[Family::Fraction, Family::Exponential],
    };
    let mut results = Vec::new();
    for &family in families {
        let r = fit(&loaded.points, family, &options)?;
        println!(
            "{family}: {} sse={} iterations={} converged={}",
            r.params,
            fmt_sig(r.sse),
            r.iterations,
            r.converged
        );
        results.push((family, r));
    }
    if let [(_, single)] = results.as_slice() {
        write_json(&args.out, single)?;
    } else {
        let best = results
            .iter()
            .min_by(|a, b| a.1.sse.total_cmp(&b.1.sse))
            .map(|(f, _)| f.name())
            .unwrap_or("fraction");
        let fits = results.iter().map(|(f, r)| (f.name(), *r)).collect();
        write_json(&args.out, &BothFits { fits, best })?;
    }
    let converged = results.iter().all(|(_, r)| r.converged);
    Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let params = load_params(&args.params)?;
    let sizes = parse_grid(&args.sizes, "sizes")?;
    let points = generate_synthetic(&params, &sizes, args.sigma, args.seed)?;
    write_points(BufWriter::new(File::create(&args.out)?), &points)?;
    println!("wrote {} points", points.len());
    Ok(EXIT_OK)
}

fn print_solution(s: &ProviderSolution) {
    println!(
        "n* = {}  p_s* = {}  profit = {}  ({:?})",
        fmt_sig(s.decision.n),
        fmt_sig(s.decision.p_s),
        fmt_sig(s.profit),
        s.method
    );
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<i32> {
    let (market, params) = resolve_market(&args.market, true)?;
    let bracket = args.bracket.as_deref().map(|b| parse_pair(b, "bracket")).transpose()?;

    if let Some(n) = args.fix_n {
        let s = optimize_fixed_n(&market, &params, n)?;
        print_solution(&s);
        write_json(&args.out, &s)?;
        return Ok(EXIT_OK);
    }
    if let Some(p_s) = args.fix_ps {
        let s = optimize_fixed_ps(&market, &params, p_s)?;
        print_solution(&s);
        write_json(&args.out, &s)?;
        return Ok(EXIT_OK);
    }

    let numeric = optimize_numeric(&market, &params, bracket)?;
    if !args.closed_form {
        print_solution(&numeric);
        write_json(&args.out, &numeric)?;
        return Ok(EXIT_OK);
    }
    let closed = match params.family() {
        Family::Fraction => closed_form_case1(&market, &params),
        Family::Exponential => closed_form_case2(&market, &params),
    };
    match closed {
        Ok(s) => {
            print_solution(&s);
            if s.closed_form_agrees == Some(false) {
                eprintln!("warning: closed form disagrees with the numeric optimum (profit {})", fmt_sig(numeric.profit));
            }
            write_json(&args.out, &s)?;
            Ok(EXIT_OK)
        }
        Err(e @ (Error::NegativeDiscriminant { .. } | Error::NoFeasibleCandidate | Error::UnitWtpRequired(_))) => {
            eprintln!("closed form unavailable: {e}; writing the numeric optimum");
            print_solution(&numeric);
            write_json(&args.out, &numeric)?;
            Ok(EXIT_CLOSED_FORM_UNAVAILABLE)
        }
        Err(e) => Err(e),
    }
}

fn cmd_surface(args: &SurfaceArgs) -> Result<i32> {
    let (market, params) = resolve_market(&args.market, true)?;
    let fig4 = args.market.preset == Some(Preset::Fig4);
    let n_text = match (&args.n_grid, fig4) {
        (Some(t), _) => t.clone(),
        (None, true) => "1,120,239".to_string(),
        (None, false) => return Err(Error::InvalidGrid("--n-grid is required".into())),
    };
    let ps_text = match (&args.ps_grid, fig4) {
        (Some(t), _) => t.clone(),
        (None, true) => "0,1,201".to_string(),
        (None, false) => return Err(Error::InvalidGrid("--ps-grid is required".into())),
    };
    let ns = parse_grid(&n_text, "n grid")?;
    let fees = parse_grid(&ps_text, "fee grid")?;
    if let Some(&bad) = ns.iter().find(|&&n| params.check_feasible(n).is_err()) {
        return Err(Error::InvalidGrid(format!("data size {bad} is outside the utility's domain")));
    }

    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(&args.out)?));
    wtr.write_record(["n", "p_s", "profit", "feasible"])?;
    for &n in &ns {
        let ceiling = params.eval(n)? * market.max_nominal_wtp;
        for &p_s in &fees {
            let value = profit_literal(&market, &params, n, p_s)?;
            let feasible = (0.0..=ceiling).contains(&p_s);
            wtr.write_record([fmt_sig(n), fmt_sig(p_s), fmt_sig(value), feasible.to_string()])?;
        }
    }
    wtr.flush()?;
    let s = optimize_numeric(&market, &params, None)?;
    print_solution(&s);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    kappa: f64,
    users: u64,
    rows: &'a [SweepRow],
}

fn cmd_equilibrium(args: &EquilibriumArgs) -> Result<i32> {
    let fig6 = args.market.preset == Some(Preset::Fig6);
    let sweep = match (&args.sweep_g, fig6) {
        (Some(t), _) => Some(parse_list(t, "g")?),
        (None, true) => Some(vec![0.1, 0.2, 0.3, 0.4]),
        (None, false) => None,
    };
    let (market, params) = resolve_market(&args.market, sweep.is_some())?;

    if let Some(gs) = sweep {
        let UtilityParams::Fraction { kappa, .. } = params else {
            return Err(Error::InvalidParams("--sweep-g needs fraction-family parameters".into()));
        };
        let rows = sweep_g(&market, kappa, &gs, args.grid)?;
        for r in &rows {
            println!(
                "g = {}  n(p_b = {}) = {}  p_b* = {}  n* = {}",
                fmt_sig(r.g),
                fmt_sig(r.p_b),
                fmt_sig(r.n_at_price),
                fmt_sig(r.equilibrium.p_b_star),
                fmt_sig(r.equilibrium.n_star)
            );
        }
        write_json(&args.out, &SweepOutput { kappa, users: market.users, rows: &rows })?;
        if let Some(path) = &args.curve_out {
            let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
            wtr.write_record(["g", "p_b", "n", "p_b_star", "n_star", "p_s_star", "leader_profit", "follower_profit"])?;
            for r in &rows {
                let e = &r.equilibrium;
                wtr.write_record([
                    fmt_sig(r.g),
                    fmt_sig(r.p_b),
                    fmt_sig(r.n_at_price),
                    fmt_sig(e.p_b_star),
                    fmt_sig(e.n_star),
                    fmt_sig(e.p_s_star),
                    fmt_sig(e.leader_profit),
                    fmt_sig(e.follower_profit),
                ])?;
            }
            wtr.flush()?;
        }
        return Ok(EXIT_OK);
    }

    let bracket = match &args.bracket {
        Some(b) => parse_pair(b, "bracket")?,
        None => default_price_bracket(&market, &params)?,
    };
    let search = search_equilibrium(&market, &params, bracket, args.grid)?;
    let e = &search.equilibrium;
    println!(
        "p_b* = {}  n* = {}  p_s* = {}  leader profit = {}  follower profit = {}",
        fmt_sig(e.p_b_star),
        fmt_sig(e.n_star),
        fmt_sig(e.p_s_star),
        fmt_sig(e.leader_profit),
        fmt_sig(e.follower_profit)
    );
    write_json(&args.out, e)?;
    if let Some(path) = &args.curve_out {
        write_demand_curve(BufWriter::new(File::create(path)?), &search.curve)?;
    }
    Ok(EXIT_OK)
}
