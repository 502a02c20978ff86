//! The saddle equation `V(z) = 1/z + c⁻¹ Σ_k w_k/(τ_k − z) = λ`.
//!
//! The upper-half-plane root `z(λ)` traces a curve whose abscissa `x(λ)`
//! decreases strictly from `+∞` to `0` as `λ` runs over `(0, ∞)`. Away from
//! the real axis the curve is the graph `y = Y(x)` over the finitely many
//! intervals `(a_k, b_k)` where `V'(x) > 0`; elsewhere the root is real.
//! Roots are found by monotone bracketing in `x` followed by complex Newton.

use crate::error::{invalid, LabError, Result};
use crate::linalg::Square;
use crate::roots::{bisect, golden_min, newton_bracketed};
use crate::scalar::{cx, Cx, Real};

/// Finite-pole saddle equation with aggregated pole weights.
#[derive(Debug, Clone)]
pub struct SaddleEquation<T> {
    poles: Vec<T>,
    weights: Vec<T>,
    inv_c: T,
    /// Zeros of `V'` on `(0, ∞)`, ascending: `a_1 < b_1 < a_2 < … < b_K`.
    critical: Vec<T>,
}

/// One interval `(a, b)` of abscissae where the root leaves the real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loop<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> SaddleEquation<T> {
    /// Builds the equation from the `τ_j` (with multiplicity) and `c = m/n`.
    pub fn from_taus(taus: &[T], c: T) -> Result<Self> {
        if taus.is_empty() {
            return Err(invalid("empty pole list"));
        }
        let w = T::one() / T::of_usize(taus.len());
        let atoms: Vec<(T, T)> = taus.iter().map(|&t| (t, w)).collect();
        Self::from_atoms(atoms, c)
    }

    /// Builds the equation from weighted poles `(τ_k, w_k)`.
    pub fn from_atoms(mut atoms: Vec<(T, T)>, c: T) -> Result<Self> {
        if !(c > T::one()) {
            return Err(LabError::UnsupportedRatio(c.as_f64()));
        }
        if atoms.is_empty() {
            return Err(invalid("empty pole list"));
        }
        if atoms.iter().any(|&(t, w)| !(t > T::zero()) || !t.is_finite() || w < T::zero()) {
            return Err(invalid("poles must be positive and finite with nonnegative weights"));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite poles"));
        let merge_tol = T::of(1e-14);
        let mut poles: Vec<T> = Vec::new();
        let mut weights: Vec<T> = Vec::new();
        for (t, w) in atoms {
            if w == T::zero() {
                continue;
            }
            match poles.last() {
                Some(&p) if (t - p).abs() <= merge_tol * p => {
                    *weights.last_mut().expect("paired with poles") += w;
                }
                _ => {
                    poles.push(t);
                    weights.push(w);
                }
            }
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(invalid("total pole weight must be positive"));
        }
        for w in &mut weights {
            *w /= total;
        }
        let mut eq = Self { poles, weights, inv_c: T::one() / c, critical: Vec::new() };
        eq.critical = eq.find_critical_points();
        Ok(eq)
    }

    pub fn poles(&self) -> &[T] {
        &self.poles
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn c(&self) -> T {
        T::one() / self.inv_c
    }

    pub fn inv_c(&self) -> T {
        self.inv_c
    }

    /// Zeros of `V'` on the positive axis, ascending.
    pub fn critical_points(&self) -> &[T] {
        &self.critical
    }

    pub fn loops(&self) -> Vec<Loop<T>> {
        self.critical.chunks_exact(2).map(|p| Loop { a: p[0], b: p[1] }).collect()
    }

    /// `λ`-intervals `(V(b_k), V(a_k))` on which the root is non-real,
    /// ascending in `λ`.
    pub fn bulk_lambda_intervals(&self) -> Vec<(T, T)> {
        let mut v: Vec<(T, T)> = self.loops().iter().map(|l| (self.v_real(l.b), self.v_real(l.a))).collect();
        v.reverse();
        v
    }

    pub fn v(&self, z: Cx<T>) -> Cx<T> {
        let mut s = cx(T::zero(), T::zero());
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            s += (cx(t, T::zero()) - z).inv() * w;
        }
        z.inv() + s * self.inv_c
    }

    pub fn dv(&self, z: Cx<T>) -> Cx<T> {
        let mut s = cx(T::zero(), T::zero());
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            let d = (cx(t, T::zero()) - z).inv();
            s += d * d * w;
        }
        let zi = z.inv();
        -(zi * zi) + s * self.inv_c
    }

    pub fn v_real(&self, x: T) -> T {
        let mut s = T::zero();
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            s += w / (t - x);
        }
        T::one() / x + self.inv_c * s
    }

    fn dv_real(&self, x: T) -> T {
        let mut s = T::zero();
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            let d = T::one() / (t - x);
            s += w * d * d;
        }
        -T::one() / (x * x) + self.inv_c * s
    }

    /// `x² V'(x)`, convex on every pole-free interval.
    fn h0(&self, x: T) -> T {
        let mut s = T::zero();
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            let r = x / (t - x);
            s += w * r * r;
        }
        self.inv_c * s - T::one()
    }

    fn find_critical_points(&self) -> Vec<T> {
        let iters = 200;
        let mut out = Vec::new();
        let first = self.poles[0];
        out.push(bisect(|x| self.h0(x), T::zero(), first, iters));
        for pair in self.poles.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let (xm, hm) = golden_min(|x| self.h0(x), lo, hi, iters);
            if hm < T::zero() {
                out.push(bisect(|x| self.h0(x), lo, xm, iters));
                out.push(bisect(|x| self.h0(x), xm, hi, iters));
            }
        }
        let last = *self.poles.last().expect("nonempty");
        let mut hi = last * T::of(2.0);
        while self.h0(hi) >= T::zero() {
            hi *= T::of(2.0);
        }
        out.push(bisect(|x| self.h0(x), last, hi, iters));
        out
    }

    /// Height `Y(x) > 0` of the curve `Im V = 0` above an abscissa inside a
    /// loop; zero outside the loops.
    pub fn height(&self, x: T) -> T {
        if self.h0(x) <= T::zero() {
            return T::zero();
        }
        // g(s) = c⁻¹ Σ w (x² + s)/((x − τ)² + s) − 1 has a unique root s > 0.
        let x2 = x * x;
        let g = |y: T| -> (T, T) {
            let s = y * y;
            let mut val = T::zero();
            let mut der = T::zero();
            for (&t, &w) in self.poles.iter().zip(&self.weights) {
                let d2 = (x - t) * (x - t);
                let den = T::one() / (d2 + s);
                val += w * (x2 + s) * den;
                der += w * (d2 - x2) * den * den;
            }
            (self.inv_c * val - T::one(), self.inv_c * der * T::of(2.0) * y)
        };
        let mut hi = x.abs().max(T::one());
        while g(hi).0 >= T::zero() {
            hi *= T::of(2.0);
        }
        newton_bracketed(g, T::zero(), hi, T::epsilon() * T::of(4.0), 300)
    }

    /// Point of the curve above `x` together with `λ = Re V`.
    pub fn curve_point(&self, x: T) -> (Cx<T>, T) {
        let z = cx(x, self.height(x));
        let lambda = if z.im > T::zero() { self.v(z).re } else { self.v_real(x) };
        (z, lambda)
    }

    /// The tracked root of `V(z) = λ` with `Im z ≥ 0`.
    pub fn root_at(&self, lambda: T) -> Result<Cx<T>> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        let crit = &self.critical;
        let k = crit.len();
        // Walk the segments from the right: (b_K, ∞), loop K, (b_{K-1}, a_K), ...
        let mut seg_hi: Option<T> = None;
        for idx in (0..=k).rev() {
            let seg_lo = if idx == 0 { T::zero() } else { crit[idx - 1] };
            let lam_lo = match seg_hi {
                None => T::zero(),
                Some(h) => self.v_real(h),
            };
            let lam_hi = if idx == 0 { T::infinity() } else { self.v_real(seg_lo) };
            if lambda >= lam_lo && lambda <= lam_hi {
                let on_loop = idx % 2 == 1;
                return if on_loop {
                    self.loop_root(lambda, seg_lo, seg_hi.expect("loop has right end"))
                } else {
                    Ok(cx(self.real_root(lambda, seg_lo, seg_hi), T::zero()))
                };
            }
            seg_hi = Some(seg_lo);
        }
        Err(LabError::BranchTracking { lambda: lambda.as_f64(), last_good: None, reason: "no segment contains lambda".into() })
    }

    fn real_root(&self, lambda: T, lo: T, hi: Option<T>) -> T {
        let lo = if lo == T::zero() { (self.critical[0].min(T::one() / lambda)) * T::of(0.5) } else { lo };
        let lo = if lo == T::zero() { T::min_positive_value() } else { lo };
        let hi = match hi {
            Some(h) => h,
            None => {
                let mut h = (lo * T::of(2.0)).max(T::of(2.0) / lambda);
                while self.v_real(h) > lambda {
                    h *= T::of(2.0);
                }
                h
            }
        };
        let f = |x: T| (self.v_real(x) - lambda, self.dv_real(x));
        let mut lo = lo;
        while f(lo).0 < T::zero() && lo > T::min_positive_value() {
            lo *= T::of(0.5);
        }
        newton_bracketed(f, lo, hi, T::epsilon() * T::of(2.0), 300)
    }

    fn loop_root(&self, lambda: T, a: T, b: T) -> Result<Cx<T>> {
        // λ(x) decreases on (a, b); dλ/dx = |V'|²/Re V' along the curve.
        let f = |x: T| -> (T, T) {
            let (z, lam) = self.curve_point(x);
            if z.im > T::zero() {
                let d = self.dv(z);
                (lam - lambda, d.norm_sqr() / d.re)
            } else {
                (self.v_real(x) - lambda, self.dv_real(x))
            }
        };
        let x = newton_bracketed(f, a, b, T::epsilon() * T::of(8.0), 300);
        let mut z = cx(x, self.height(x));
        // Polish the complex root.
        for _ in 0..3 {
            let r = self.v(z) - lambda;
            let d = self.dv(z);
            if d.norm() == T::zero() {
                break;
            }
            let cand = z - r / d;
            if cand.im >= T::zero() && (cand - z).norm() <= T::of(1e-6) * z.norm() && self.residual(cand, lambda) < self.residual(z, lambda) {
                z = cand;
            } else {
                break;
            }
        }
        Ok(z)
    }

    /// `|V(z) − λ|` relative to `|λ|`.
    pub fn residual(&self, z: Cx<T>, lambda: T) -> T {
        (self.v(z) - lambda).norm() / lambda.abs().max(T::one())
    }

    /// Residual of the imaginary-part identity
    /// `c⁻¹ Σ w/((x−τ)² + y²) = 1/(x² + y²)`, relative to the right side.
    pub fn imaginary_identity_residual(&self, z: Cx<T>) -> T {
        let (x, y) = (z.re, z.im);
        let mut s = T::zero();
        for (&t, &w) in self.poles.iter().zip(&self.weights) {
            s += w / ((x - t) * (x - t) + y * y);
        }
        let rhs = T::one() / (x * x + y * y);
        (self.inv_c * s - rhs).abs() / rhs
    }

    /// All roots of `V(z) = λ` from the secular companion matrix
    /// `diag(0, τ) + 1·vᵀ`, Newton-polished, sorted by real part.
    pub fn all_roots(&self, lambda: T) -> Result<Vec<Cx<T>>> {
        let n = self.poles.len() + 1;
        let mut d = vec![T::zero()];
        d.extend_from_slice(&self.poles);
        let mut v = vec![T::one() / lambda];
        v.extend(self.weights.iter().map(|&w| -self.inv_c * w / lambda));
        let m = Square::from_fn(n, |i, j| if i == j { d[i] + v[j] } else { v[j] });
        let mut roots = m.eigenvalues()?;
        for z in &mut roots {
            for _ in 0..4 {
                let r = self.v(*z) - lambda;
                let dz = r / self.dv(*z);
                if !dz.re.is_finite() || !dz.im.is_finite() {
                    break;
                }
                let cand = *z - dz;
                if self.residual(cand, lambda) < self.residual(*z, lambda) {
                    *z = cand;
                } else {
                    break;
                }
            }
        }
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap_or(std::cmp::Ordering::Equal));
        Ok(roots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(c: f64) -> SaddleEquation<f64> {
        SaddleEquation::from_taus(&[1.0; 8], c).unwrap()
    }

    // Quadratic oracle for τ ≡ 1: λ z² − (λ + 1 − 1/c) z + 1 = 0.
    fn quadratic_root(lambda: f64, c: f64) -> Cx<f64> {
        let b = lambda + 1.0 - 1.0 / c;
        let disc = b * b - 4.0 * lambda;
        if disc < 0.0 {
            cx(b / (2.0 * lambda), (-disc).sqrt() / (2.0 * lambda))
        } else {
            // Real roots: the tracked one is the smaller for λ above the bulk
            // and the larger below it.
            let r1 = (b - disc.sqrt()) / (2.0 * lambda);
            let r2 = (b + disc.sqrt()) / (2.0 * lambda);
            if lambda > 1.0 { cx(r1, 0.0) } else { cx(r2, 0.0) }
        }
    }

    #[test]
    fn duplicate_poles_are_merged() {
        let eq = identity(2.0);
        assert_eq!(eq.poles(), &[1.0]);
        assert_eq!(eq.weights(), &[1.0]);
    }

    #[test]
    fn rejects_small_ratio() {
        assert!(matches!(SaddleEquation::from_taus(&[1.0], 1.0), Err(LabError::UnsupportedRatio(_))));
        assert!(SaddleEquation::from_taus(&[1.0, -1.0], 2.0).is_err());
    }

    #[test]
    fn identity_touchdowns() {
        let eq = identity(2.0);
        let cr = eq.critical_points();
        assert_eq!(cr.len(), 2);
        let s = 0.5f64.sqrt();
        assert!((cr[0] - 1.0 / (1.0 + s)).abs() < 1e-13, "{}", cr[0]);
        assert!((cr[1] - 1.0 / (1.0 - s)).abs() < 1e-12, "{}", cr[1]);
        let iv = eq.bulk_lambda_intervals();
        assert!((iv[0].0 - (1.0 - s).powi(2)).abs() < 1e-12);
        assert!((iv[0].1 - (1.0 + s).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn identity_root_at_one() {
        let z = identity(2.0).root_at(1.0).unwrap();
        assert!((z - cx(0.75, 0.661_437_827_766_147_8)).norm() < 1e-12);
    }

    #[test]
    fn identity_matches_quadratic_everywhere() {
        let eq = identity(2.0);
        for k in 1..400 {
            let lambda = 0.02 * k as f64;
            let z = eq.root_at(lambda).unwrap();
            let want = quadratic_root(lambda, 2.0);
            assert!((z - want).norm() < 1e-9 * want.norm().max(1.0), "λ={lambda}: {z} vs {want}");
            assert!(eq.residual(z, lambda) < 1e-12);
        }
    }

    #[test]
    fn far_field_root() {
        let eq = SaddleEquation::from_taus(&[0.3, 1.7, 2.2, 4.0], 3.0).unwrap();
        let z = eq.root_at(100.0).unwrap();
        assert!((z - cx(0.01, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn companion_roots_contain_branch_root() {
        let taus = [0.3_f64, 0.5, 0.9, 1.7, 2.2, 4.0];
        let eq = SaddleEquation::from_taus(&taus, 2.0).unwrap();
        for &lambda in &[0.2, 0.7, 1.3, 3.0, 9.0] {
            let roots = eq.all_roots(lambda).unwrap();
            assert_eq!(roots.len(), taus.len() + 1);
            for r in &roots {
                assert!(eq.residual(*r, lambda) < 1e-10, "{r}");
            }
            let z = eq.root_at(lambda).unwrap();
            let best = roots.iter().map(|r| (r - z).norm().min((r.conj() - z).norm())).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9, "λ={lambda}: {z} not among {roots:?}");
        }
    }

    #[test]
    fn separated_two_point_has_two_loops() {
        let eq = SaddleEquation::from_atoms(vec![(1.0, 0.5), (0.1, 0.5)], 2.0).unwrap();
        assert_eq!(eq.loops().len(), 2);
        let iv = eq.bulk_lambda_intervals();
        let mid = 0.5 * (iv[0].1 + iv[1].0);
        assert!(iv[0].1 < iv[1].0);
        assert_eq!(eq.root_at(mid).unwrap().im, 0.0);
    }
}
