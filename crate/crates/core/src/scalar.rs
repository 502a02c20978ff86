use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar used by the analytic parts of the crate.
///
/// Implemented for `f32` and `f64`. The Monte Carlo side (sampling and
/// eigensolves) is `f64` only.
pub trait Real:
    'static
    + Send
    + Sync
    + Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
{
    /// Converts an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn of_usize(k: usize) -> Self {
        Self::from_usize(k).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over [`Real`].
pub type Cx<T> = Complex<T>;

#[inline]
pub(crate) fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Complex::new(re, im)
}

/// `exp(w) - 1` without cancellation for small `|w|`.
pub(crate) fn cexpm1<T: Real>(w: Cx<T>) -> Cx<T> {
    let ea = w.re.exp();
    let (s, c) = w.im.sin_cos();
    let half = (w.im * T::of(0.5)).sin();
    let re = w.re.exp_m1() * c - T::of(2.0) * half * half;
    cx(re, ea * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm1_matches_direct_away_from_zero() {
        let w = cx(0.3_f64, -1.1);
        let d = w.exp() - 1.0;
        assert!((cexpm1(w) - d).norm() < 1e-15);
    }

    #[test]
    fn expm1_small_argument_keeps_relative_precision() {
        let w = cx(1e-12_f64, 2e-12);
        let r = cexpm1(w);
        assert!((r - w).norm() / w.norm() < 1e-11);
    }
}
