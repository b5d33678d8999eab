//! Bracketed root finding for monotone scalar functions.

/// Relative bracket width at which bisection hands over to the secant polish.
pub const BISECTION_WIDTH: f64 = 1e-13;

/// Solves `f(z) = target` for `f` strictly decreasing on `[lo, hi]` with the
/// root inside the bracket. `f` may be infinite at an endpoint (a pole).
///
/// Bisects to width `1e-13·(1 + max|z|)`, then takes one secant step between
/// the final endpoints and returns whichever candidate has the smaller residual.
pub fn solve_decreasing<F>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    debug_assert!(lo <= hi);
    loop {
        let tol = BISECTION_WIDTH * (1.0 + lo.abs().max(hi.abs()));
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mid = 0.5 * (lo + hi);
    let mut best = (mid, (f(mid) - target).abs());
    let mut consider = |z: f64| {
        let r = (f(z) - target).abs();
        if r.is_finite() && r < best.1 {
            best = (z, r);
        }
    };
    consider(lo);
    consider(hi);
    let (flo, fhi) = (f(lo) - target, f(hi) - target);
    if flo.is_finite() && fhi.is_finite() && flo != fhi {
        let secant = (lo + (hi - lo) * flo / (flo - fhi)).clamp(lo, hi);
        consider(secant);
    }
    best.0
}

/// Grows `start` away from `anchor` geometrically until `accept` holds, giving
/// up after `max_steps` doublings.
pub fn expand_until<F>(anchor: f64, start: f64, max_steps: usize, accept: F) -> Option<f64>
where
    F: Fn(f64) -> bool,
{
    let mut z = start;
    for _ in 0..=max_steps {
        if accept(z) {
            return Some(z);
        }
        z = anchor + 2.0 * (z - anchor);
    }
    None
}
