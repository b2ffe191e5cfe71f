//! Fitting utility parameters to measured (data size, classification error) points.
//!
//! The model predicts the error at size `n` as `1 - phi(n)`; parameters are chosen
//! to minimize the sum of squared differences to the measured errors. The solver
//! is a damped Gauss-Newton iteration (Marquardt diagonal scaling) over the two
//! family coefficients with analytic Jacobians, restarted from a fixed set of
//! jittered initial guesses.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::{Family, UtilityParams};

/// Header line required by the experiment-point CSV format.
pub const CSV_HEADER: &str = "n,error";

/// Multipliers applied to the two initial coefficients, one pair per start.
const JITTER_SCHEDULE: [(f64, f64); 4] = [(1.0, 1.0), (0.7, 2.0), (1.3, 0.5), (0.9, 4.0)];

const INITIAL_DAMPING: f64 = 1e-3;
/// A small gradient only stops the iteration once the undamped Gauss-Newton
/// step is also below this fraction of the parameters. On nearly flat
/// objectives (errors of order 1e-12) the gradient test alone fires far from
/// the minimizer.
const STEP_TOLERANCE: f64 = 1e-10;
const MAX_DAMPING: f64 = 1e20;
/// Damping is scaled by `diag(J^T J)`, so this must stay far below the squared
/// ratio of the Jacobian's singular values for near-degenerate data.
const MIN_DAMPING: f64 = 1e-30;

/// One accuracy measurement: classification error `epsilon` after training on `n` items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPoint {
    pub n: f64,
    pub epsilon: f64,
}

impl ExperimentPoint {
    pub fn new(n: f64, epsilon: f64) -> Self {
        ExperimentPoint { n, epsilon }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(self.n.is_finite() && self.n >= 0.0) {
            return Err(format!("data size must be a finite value >= 0, got {}", self.n));
        }
        if !(self.epsilon.is_finite() && (0.0..=1.0).contains(&self.epsilon)) {
            return Err(format!("error must lie in [0, 1], got {}", self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop once the infinity norm of the sse gradient falls to this value.
    pub gradient_tolerance: f64,
    /// Stop once an accepted step improves sse by at most this fraction without
    /// reducing the gradient norm.
    pub relative_sse_tolerance: f64,
    pub max_iterations: usize,
    /// Run every start of the jitter schedule instead of only the first.
    pub multi_start: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gradient_tolerance: 1e-10,
            relative_sse_tolerance: 1e-12,
            max_iterations: 500,
            multi_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: UtilityParams,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the sse gradient at `params`.
    pub gradient_norm: f64,
}

/// Sum of squared residuals `eps_j - (1 - phi(n_j))`.
pub fn residual_sse(points: &[ExperimentPoint], params: &UtilityParams) -> Result<f64> {
    let mut sse = 0.0;
    for p in points {
        let r = p.epsilon - params.shortfall(p.n)?;
        sse += r * r;
    }
    Ok(sse)
}

/// Residuals `eps_j - (1 - phi(n_j))` for every point.
pub fn residuals(points: &[ExperimentPoint], params: &UtilityParams) -> Result<Vec<f64>> {
    points.iter().map(|p| Ok(p.epsilon - params.shortfall(p.n)?)).collect()
}

/// Jacobian of the residuals with respect to the two family coefficients,
/// one row per point.
pub fn residual_jacobian(points: &[ExperimentPoint], params: &UtilityParams) -> Result<Vec<[f64; 2]>> {
    params.validate()?;
    points
        .iter()
        .map(|p| {
            params.check_feasible(p.n)?;
            Ok(jacobian_row(params, p.n))
        })
        .collect()
}

fn jacobian_row(params: &UtilityParams, n: f64) -> [f64; 2] {
    match *params {
        UtilityParams::Fraction { kappa, g } => {
            let x = 1.0 + g * n;
            [-1.0 / x, kappa * n / (x * x)]
        }
        UtilityParams::Exponential { mu, h } => {
            let e = (-h * n).exp();
            [-e, mu * n * e]
        }
    }
}

/// Residuals, Jacobian and sse at `params`, or `None` when `params` is
/// outside the family's bounds or leaves some point infeasible.
struct Linearization {
    residuals: Vec<f64>,
    jacobian: Vec<[f64; 2]>,
    sse: f64,
}

fn linearize(points: &[ExperimentPoint], params: &UtilityParams) -> Option<Linearization> {
    if params.validate().is_err() {
        return None;
    }
    let mut residuals = Vec::with_capacity(points.len());
    let mut jacobian = Vec::with_capacity(points.len());
    let mut sse = 0.0;
    for p in points {
        if params.check_feasible(p.n).is_err() {
            return None;
        }
        let r = p.epsilon - params.shortfall_unchecked(p.n);
        sse += r * r;
        residuals.push(r);
        jacobian.push(jacobian_row(params, p.n));
    }
    sse.is_finite().then_some(Linearization { residuals, jacobian, sse })
}

/// Gradient of sse, `2 J^T r`.
fn sse_gradient(lin: &Linearization) -> [f64; 2] {
    let mut grad = [0.0; 2];
    for (row, r) in lin.jacobian.iter().zip(&lin.residuals) {
        grad[0] += 2.0 * row[0] * r;
        grad[1] += 2.0 * row[1] * r;
    }
    grad
}

fn inf_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

fn step_negligible(lin: &Linearization, params: &UtilityParams) -> bool {
    let Some(step) = damped_step(lin, 0.0) else { return true };
    let (p0, p1) = params.pair();
    step[0].abs() <= STEP_TOLERANCE * p0.abs() && step[1].abs() <= STEP_TOLERANCE * p1.abs()
}

/// Least-squares solution of the augmented system `[J; sqrt(lambda D)] delta = [-r; 0]`,
/// i.e. of `(J^T J + lambda D) delta = -J^T r` with `D = diag(J^T J)`, by
/// Gram-Schmidt QR with one reorthogonalization pass. Working on `J` directly
/// instead of the normal equations keeps steps accurate when the two
/// Jacobian columns are nearly parallel.
fn damped_step(lin: &Linearization, lambda: f64) -> Option<[f64; 2]> {
    let (mut d0, mut d1) = (0.0, 0.0);
    for row in &lin.jacobian {
        d0 += row[0] * row[0];
        d1 += row[1] * row[1];
    }
    let floor = 1e-12 * d0.max(d1).max(f64::MIN_POSITIVE);
    let mut a0: Vec<f64> = lin.jacobian.iter().map(|row| row[0]).collect();
    let mut a1: Vec<f64> = lin.jacobian.iter().map(|row| row[1]).collect();
    let mut b: Vec<f64> = lin.residuals.iter().map(|r| -r).collect();
    if lambda > 0.0 {
        a0.extend([(lambda * d0.max(floor)).sqrt(), 0.0]);
        a1.extend([0.0, (lambda * d1.max(floor)).sqrt()]);
        b.extend([0.0, 0.0]);
    }

    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let r00 = dot(&a0, &a0).sqrt();
    if !(r00.is_finite() && r00 > 0.0) {
        return None;
    }
    let q0: Vec<f64> = a0.iter().map(|v| v / r00).collect();
    let mut r01 = 0.0;
    let mut v = a1;
    for _ in 0..2 {
        let s = dot(&q0, &v);
        r01 += s;
        v.iter_mut().zip(&q0).for_each(|(vi, qi)| *vi -= s * qi);
    }
    let r11 = dot(&v, &v).sqrt();
    if !(r11.is_finite() && r11 > 1e-15 * r00) {
        return None;
    }
    let step1 = dot(&v, &b) / (r11 * r11);
    let step0 = (dot(&q0, &b) - r01 * step1) / r00;
    let step = [step0, step1];
    (step[0].is_finite() && step[1].is_finite()).then_some(step)
}

/// Unjittered starting parameters: `mu_0 = max eps`, `h_0 = 1 / median n` for the
/// exponential family; `g_0 = 1 / median n`, `kappa_0 = max eps (1 + g_0 n_1)` for
/// the fraction family, with `n_1` the smallest data size.
pub fn initial_params(points: &[ExperimentPoint], family: Family) -> UtilityParams {
    jittered_start(points, family, initial_guess(points, family), JITTER_SCHEDULE[0])
}

fn initial_guess(points: &[ExperimentPoint], family: Family) -> (f64, f64) {
    let mut ns: Vec<f64> = points.iter().map(|p| p.n).collect();
    ns.sort_by(f64::total_cmp);
    let median = ns[ns.len() / 2];
    let scale = if median > 0.0 { median } else { ns[ns.len() - 1] };
    let rate = 1.0 / scale;
    let max_eps = points.iter().map(|p| p.epsilon).fold(0.0, f64::max);
    match family {
        Family::Exponential => (max_eps, rate),
        Family::Fraction => (max_eps * (1.0 + rate * ns[0]), rate),
    }
}

/// Applies a jitter pair and pulls the guess back inside the family bounds.
fn jittered_start(points: &[ExperimentPoint], family: Family, base: (f64, f64), jitter: (f64, f64)) -> UtilityParams {
    let first = base.0 * jitter.0;
    let second = base.1 * jitter.1;
    match family {
        Family::Exponential => UtilityParams::Exponential { mu: first.clamp(0.0, 1.0), h: second },
        Family::Fraction => {
            let n_lo = points.iter().map(|p| p.n).fold(f64::INFINITY, f64::min);
            UtilityParams::Fraction { kappa: first.clamp(0.0, 1.0 + second * n_lo), g: second }
        }
    }
}

fn levenberg_marquardt(points: &[ExperimentPoint], start: UtilityParams, options: &FitOptions) -> FitResult {
    let family = start.family();
    let mut params = start;
    let mut lin = linearize(points, &params).expect("initial guess is feasible by construction");
    let mut lambda = INITIAL_DAMPING;
    let mut iterations = 0;

    'outer: while iterations < options.max_iterations {
        if inf_norm(sse_gradient(&lin)) <= options.gradient_tolerance && step_negligible(&lin, &params) {
            break;
        }
        iterations += 1;
        loop {
            if lambda > MAX_DAMPING {
                break 'outer;
            }
            let Some(step) = damped_step(&lin, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let (p0, p1) = params.pair();
            let candidate = UtilityParams::from_pair(family, p0 + step[0], p1 + step[1]);
            let gradient_before = inf_norm(sse_gradient(&lin));
            let accept = |next: &Linearization| {
                // sse differences of a few ulps are rounding noise; the gradient decides there
                next.sse < lin.sse
                    || (next.sse <= lin.sse * (1.0 + 4.0 * f64::EPSILON)
                        && inf_norm(sse_gradient(next)) < gradient_before)
            };
            match linearize(points, &candidate) {
                Some(next) if accept(&next) => {
                    let improvement = ((lin.sse - next.sse) / lin.sse).max(0.0);
                    params = candidate;
                    lin = next;
                    lambda = (lambda / 10.0).max(MIN_DAMPING);
                    // a negligible sse gain alone is not enough: near the minimum the
                    // gain shrinks like the squared gradient and would stop the
                    // iteration long before the gradient test can pass
                    let stalled = inf_norm(sse_gradient(&lin)) >= gradient_before;
                    if improvement <= options.relative_sse_tolerance && stalled {
                        break 'outer;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
    }

    let gradient_norm = inf_norm(sse_gradient(&lin));
    FitResult {
        params,
        sse: lin.sse,
        iterations,
        converged: gradient_norm <= options.gradient_tolerance,
        gradient_norm,
    }
}

/// Least-squares fit of `family` to `points`.
///
/// Non-convergence is not an error: the best parameters found are returned
/// with `converged = false`.
pub fn fit(points: &[ExperimentPoint], family: Family, options: &FitOptions) -> Result<FitResult> {
    for p in points {
        p.validate().map_err(Error::DegenerateInput)?;
    }
    let mut ns: Vec<f64> = points.iter().map(|p| p.n).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 distinct data sizes, got {}",
            ns.len()
        )));
    }

    let base = initial_guess(points, family);
    let starts = if options.multi_start { JITTER_SCHEDULE.len() } else { 1 };
    let mut best: Option<FitResult> = None;
    for jitter in &JITTER_SCHEDULE[..starts] {
        let start = jittered_start(points, family, base, *jitter);
        let result = levenberg_marquardt(points, start, options);
        log::debug!(
            "start {start}: sse={:e} iterations={} converged={}",
            result.sse,
            result.iterations,
            result.converged
        );
        if best.as_ref().is_none_or(|b| result.sse < b.sse) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Points with `eps_j = clamp(1 - phi(n_j) + noise, 0, 1)`, noise drawn from
/// `N(0, noise_sigma^2)` with a deterministic generator seeded by `seed`.
pub fn generate_synthetic(
    params: &UtilityParams,
    n_values: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<ExperimentPoint>> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::DegenerateInput(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::DegenerateInput(e.to_string()))?;
    n_values
        .iter()
        .map(|&n| {
            let clean = params.shortfall(n)?;
            let noise = if noise_sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            Ok(ExperimentPoint::new(n, (clean + noise).clamp(0.0, 1.0)))
        })
        .collect()
}

/// Non-fatal observation made while loading a point file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// Rows were not in ascending order of data size and have been sorted.
    Reordered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPoints {
    /// Points sorted by strictly increasing data size.
    pub points: Vec<ExperimentPoint>,
    pub warnings: Vec<LoadWarning>,
}

/// Reads an experiment-point CSV file (header `n,error`).
pub fn load_points<P: AsRef<Path>>(path: P) -> Result<LoadedPoints> {
    let file = std::fs::File::open(path)?;
    parse_points(file)
}

pub fn parse_points<R: Read>(reader: R) -> Result<LoadedPoints> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();

    let header = records.next().transpose()?;
    match header {
        Some(h) if h.iter().eq(CSV_HEADER.split(',')) => {}
        Some(h) => {
            return Err(Error::Parse {
                line: h.position().map_or(1, |p| p.line()),
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
        None => return Err(Error::Parse { line: 1, message: format!("missing header `{CSV_HEADER}`") }),
    }

    let mut rows: Vec<(u64, ExperimentPoint)> = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 fields, found {}", record.len()) });
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse {name} `{}`", &record[i]),
            })
        };
        let point = ExperimentPoint::new(field(0, "n")?, field(1, "error")?);
        point.validate().map_err(|message| Error::Parse { line, message })?;
        rows.push((line, point));
    }

    let mut warnings = Vec::new();
    if rows.windows(2).any(|w| w[1].1.n < w[0].1.n) {
        log::warn!("experiment points are not sorted by data size; sorting");
        warnings.push(LoadWarning::Reordered);
        rows.sort_by(|a, b| a.1.n.total_cmp(&b.1.n));
    }
    if let Some(w) = rows.windows(2).find(|w| w[1].1.n == w[0].1.n) {
        let line = w[0].0.max(w[1].0);
        return Err(Error::Parse { line, message: format!("duplicate data size {}", w[1].1.n) });
    }

    Ok(LoadedPoints { points: rows.into_iter().map(|(_, p)| p).collect(), warnings })
}

/// Writes points in the `n,error` CSV format.
/// Writes points in the format [`parse_points`] reads. Values use the shortest
/// representation that parses back to the same `f64`, so reloading is exact.
pub fn write_points<W: Write>(writer: W, points: &[ExperimentPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER.split(','))?;
    for p in points {
        wtr.write_record([p.n.to_string(), p.epsilon.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
