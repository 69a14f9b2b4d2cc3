//! One-dimensional searches used for the dual multiplier.

/// `(3 - sqrt(5)) / 2`, the golden-section interior fraction.
const INV_PHI_SQ: f64 = 0.381_966_011_250_105_1;

/// Minimum found by [`golden_section`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub arg: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `tol`. The endpoints are
/// evaluated as well, so a minimum sitting exactly on the boundary (the
/// common case for the dual multiplier at large radii) is returned exactly.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut evaluations = 0;
    let mut eval = |t: f64, n: &mut usize| {
        *n += 1;
        f(t)
    };

    let f_lo = eval(a, &mut evaluations);
    let f_hi = eval(b, &mut evaluations);
    let mut best = if f_hi < f_lo { (b, f_hi) } else { (a, f_lo) };

    let mut c = a + INV_PHI_SQ * (b - a);
    let mut d = b - INV_PHI_SQ * (b - a);
    let mut fc = eval(c, &mut evaluations);
    let mut fd = eval(d, &mut evaluations);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = a + INV_PHI_SQ * (b - a);
            fc = eval(c, &mut evaluations);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = b - INV_PHI_SQ * (b - a);
            fd = eval(d, &mut evaluations);
        }
        if c >= d {
            break;
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (t, v);
        }
    }
    Minimum {
        arg: best.0,
        value: best.1,
        evaluations,
    }
}

/// Root of a nondecreasing function on `[lo, hi]` by bisection.
///
/// Returns `lo` if `g(lo) >= 0` and `hi` if `g(hi) <= 0`; otherwise halves
/// the bracket until it cannot shrink further in floating point or
/// `max_iter` halvings have been done.
pub fn bisect_nondecreasing<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64, max_iter: usize) -> f64 {
    if g(lo) >= 0.0 {
        return lo;
    }
    if g(hi) <= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) >= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}
