//! Scalar root bracketing helpers.

use crate::scalar::Real;

/// Finds a root of `f` in `[lo, hi]` given `f(lo)` and `f(hi)` of opposite
/// sign. `f` returns the value and derivative; Newton steps are taken when
/// they stay inside the bracket and bisection otherwise.
pub(crate) fn newton_bracketed<T: Real>(
    mut f: impl FnMut(T) -> (T, T),
    mut lo: T,
    mut hi: T,
    rel_tol: T,
    max_iter: usize,
) -> T {
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == T::zero() {
        return lo;
    }
    if fhi == T::zero() {
        return hi;
    }
    // No sign change, which rounding produces at a bracket end that is itself
    // the root: take the end closer to zero.
    if (flo < T::zero()) == (fhi < T::zero()) {
        return if flo.abs() <= fhi.abs() { lo } else { hi };
    }
    let lo_negative = flo < T::zero();
    let two = T::of(2.0);
    let mut x = (lo + hi) / two;
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == T::zero() {
            return x;
        }
        if (fx < T::zero()) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let width = (hi - lo).abs();
        if width <= rel_tol * x.abs().max(T::min_positive_value()) {
            return x;
        }
        let step = fx / dfx;
        let cand = x - step;
        let inside = cand.is_finite() && (cand - lo) * (cand - hi) < T::zero();
        let next = if inside { cand } else { (lo + hi) / two };
        if next == x || (inside && step.abs() <= rel_tol * x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Plain bisection for a sign change in `[lo, hi]`.
pub(crate) fn bisect<T: Real>(mut f: impl FnMut(T) -> T, mut lo: T, mut hi: T, max_iter: usize) -> T {
    let lo_negative = f(lo) < T::zero();
    let two = T::of(2.0);
    for _ in 0..max_iter {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < T::zero()) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

/// Golden-section minimizer of a unimodal function on `(lo, hi)`.
pub(crate) fn golden_min<T: Real>(mut f: impl FnMut(T) -> T, mut lo: T, mut hi: T, max_iter: usize) -> (T, T) {
    let g = T::of(0.618_033_988_749_894_8);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo <= T::epsilon() * T::of(4.0) * hi.abs() {
            break;
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_bracketed_finds_cube_root() {
        let r = newton_bracketed(|x: f64| (x * x * x - 2.0, 3.0 * x * x), 0.0, 3.0, 1e-15, 200);
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn bisection_and_golden() {
        let r = bisect(|x: f64| x.cos(), 0.0, 3.0, 200);
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        let (xm, fm) = golden_min(|x: f64| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 200);
        assert!((xm - 0.3).abs() < 1e-7 && (fm - 1.0).abs() < 1e-14);
    }
}
