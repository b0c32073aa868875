//! Scalar root finding and minimization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Bisection for the last point where `below(x)` holds, given `below(lo)` and
/// `!below(hi)`. Stops when the bracket is narrower than `tol`.
pub(crate) fn bisect_boundary(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut below: impl FnMut(f64) -> bool,
) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Outcome of a golden-section search.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GoldenMin {
    pub arg: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search on `[a, b]` for a unimodal (possibly extended-valued)
/// objective.
pub(crate) fn golden_section(
    mut a: f64,
    mut b: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> f64,
) -> GoldenMin {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while (b - a).abs() > tol {
        if fc <= fd {
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
        evaluations += 1;
        if evaluations > 500 {
            break;
        }
    }
    let (arg, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    GoldenMin {
        arg,
        value,
        evaluations,
    }
}

/// Sum with Neumaier compensation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
