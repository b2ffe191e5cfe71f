//! Scalar maximization: grid scan followed by golden-section refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Location and value of a maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`, assuming `f`
/// is unimodal there. Stops once the bracket is narrower than `tol`.
///
/// The endpoints are not evaluated; callers that care about corner maxima
/// compare against them separately.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Maximum {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // the bracket shrinks by a constant factor; cap iterations for tol below ulp(x)
    for _ in 0..200 {
        if (b - a) <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        Maximum { x: c, value: fc }
    } else {
        Maximum { x: d, value: fd }
    }
}

/// Index of the grid maximum; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Scans `f` over `grid` (sorted ascending), then golden-section refines
/// inside the cells adjacent to the best grid point.
///
/// The refined point only replaces the grid maximum when strictly better,
/// so the result always dominates every grid value.
pub fn scan_then_refine<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64], tol: f64) -> (Maximum, Vec<f64>) {
    assert!(!grid.is_empty(), "scan grid must not be empty");
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let i = argmax(&values).unwrap_or(0);
    let mut best = Maximum { x: grid[i], value: values[i] };
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    if hi > lo {
        let refined = golden_section_max(&mut f, lo, hi, tol);
        if refined.value > best.value {
            best = refined;
        }
    }
    (best, values)
}

/// `count` points spread over `[lo, hi]` uniformly in `ln(1 + x - lo)`.
///
/// Dense near `lo`, sparse far away; suits objectives whose interesting
/// structure sits near the lower end of a very wide interval.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    let span = (hi - lo).ln_1p();
    let mut out: Vec<f64> = (0..count)
        .map(|i| lo + (span * i as f64 / (count - 1) as f64).exp_m1())
        .collect();
    out[0] = lo;
    out[count - 1] = hi;
    out
}

/// `count` equally spaced points on `[lo, hi]`, endpoints exact.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            let mut out: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
            out[count - 1] = hi;
            out
        }
    }
}
