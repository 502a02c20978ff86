use serde::Serialize;

use super::equation::SaddleEquation;
use crate::error::{LabError, Result};
use crate::scalar::{cx, Cx, Real};

/// `S(z) = λ0 z − ln z + c⁻¹ Σ_k w_k ln(z − τ_k) − S*`, normalized so that
/// `Re S` vanishes at the saddle point `z0 = z_n(λ0)`.
///
/// Logarithms are principal and summed term by term; the ambiguity in
/// `Im S` is a multiple of `2π/m`, invisible after `exp(m S)`.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseFn<T> {
    pub lambda0: T,
    pub s_star: T,
    #[serde(skip)]
    poles: Vec<T>,
    #[serde(skip)]
    weights: Vec<T>,
    inv_c: T,
}

impl<T: Real> PhaseFn<T> {
    pub fn new(eq: &SaddleEquation<T>, lambda0: T, z0: Cx<T>) -> Result<Self> {
        let mut p = Self { lambda0, s_star: T::zero(), poles: eq.poles().to_vec(), weights: eq.weights().to_vec(), inv_c: eq.inv_c() };
        p.s_star = p.raw(z0)?.re;
        Ok(p)
    }

    fn raw(&self, z: Cx<T>) -> Result<Cx<T>> {
        if z.norm() == T::zero() {
            return Err(LabError::Singular(0.0));
        }
        let mut s = cx(T::zero(), T::zero());
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            let d = z - t;
            if d.norm() == T::zero() {
                return Err(LabError::Singular(t.as_f64()));
            }
            s += d.ln() * w;
        }
        Ok(z * self.lambda0 - z.ln() + s * self.inv_c)
    }

    pub fn eval(&self, z: Cx<T>) -> Result<Cx<T>> {
        Ok(self.raw(z)? - self.s_star)
    }

    /// `Re S` only; cheaper and free of branch questions.
    pub fn re(&self, z: Cx<T>) -> T {
        let mut s = T::zero();
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            s += w * (z - t).norm().ln();
        }
        self.lambda0 * z.re - z.norm().ln() + self.inv_c * s - self.s_star
    }

    /// `m S(z)`, with the imaginary part reduced modulo `2π` wherever the
    /// coefficient is an integer (always the case for `m c⁻¹ w_k` when the
    /// poles come from an `n`-point spectrum).
    pub fn scaled(&self, z: Cx<T>, m: usize) -> Result<Cx<T>> {
        let mf = T::of_usize(m);
        if z.norm() == T::zero() {
            return Err(LabError::Singular(0.0));
        }
        let two_pi = T::PI() * T::of(2.0);
        let mut re = mf * (self.lambda0 * z.re - z.norm().ln() - self.s_star);
        let reduce = |a: T| a - two_pi * (a / two_pi).round();
        let mut im = reduce(mf * self.lambda0 * z.im) - reduce(mf * z.im.atan2(z.re));
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            let d = z - t;
            if d.norm() == T::zero() {
                return Err(LabError::Singular(t.as_f64()));
            }
            let k = mf * self.inv_c * w;
            re += k * d.norm().ln();
            let arg = d.im.atan2(d.re);
            im += if (k - k.round()).abs() <= T::of(1e-9) * k { reduce(k.round() * arg) } else { k * arg };
        }
        Ok(cx(re, reduce(im)))
    }

    pub fn derivative(&self, z: Cx<T>) -> Cx<T> {
        let mut s = cx(T::zero(), T::zero());
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            s += (z - t).inv() * w;
        }
        -z.inv() + s * self.inv_c + self.lambda0
    }
}
