//! Bounded one-dimensional minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping when the
/// bracket is narrower than `tol`. Returns `(x, f(x))`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Scans `steps + 1` equally spaced points on `[lo, hi]` to bracket the
/// global minimum, refines inside the bracket with golden-section search and
/// keeps whichever of the scan minimum and the refined point is lower.
pub(crate) fn bracketed_minimum(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize, tol: f64) -> (f64, f64) {
    let h = (hi - lo) / steps as f64;
    let xs: Vec<f64> = (0..=steps).map(|k| if k == steps { hi } else { lo + k as f64 * h }).collect();
    let (best_i, best_f) = xs
        .iter()
        .map(|&x| f(x))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let a = xs[best_i.saturating_sub(1)];
    let b = xs[(best_i + 1).min(steps)];
    let (x, fx) = golden_section(&f, a, b, tol);
    if fx < best_f {
        (x, fx)
    } else {
        (xs[best_i], best_f)
    }
}
