//! Limiting spectral density from the self-consistent equation.
//!
//! Conventions: `f(z) = ∫ N(dλ)/(λ − z)`, so `f(z) ~ −1/z` at infinity and
//! `Im f > 0` in the upper half-plane. The solver works with the companion
//! transform `w = c⁻¹ f − (1 − c⁻¹)/z`, which satisfies
//!
//! ```text
//! w = −1 / (z − c⁻¹ Σ_k p_k t_k / (1 + t_k w))
//! ```
//!
//! for `N⁽⁰⁾ = Σ p_k δ_{t_k}`, and recovers `f = c w + (c − 1)/z`. The limit
//! saddle point is `z(λ) = −w(λ − i0)`, so `ρ(λ) = c Im z(λ)/π`.

use log::{debug, warn};
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::saddle_contour::SaddleEquation;
use crate::scalar::{cx, Cx, Real};

/// Atomic probability measure on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure<T> {
    atoms: Vec<(T, T)>,
}

impl<T: Real> Measure<T> {
    /// Validates and normalizes `(location, weight)` pairs. Equal locations
    /// are merged; zero weights are dropped.
    pub fn new(atoms: Vec<(T, T)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("measure needs at least one atom"));
        }
        for &(x, w) in &atoms {
            if !(x > T::zero()) || !x.is_finite() {
                return Err(invalid(format!("atom location must be positive, got {x}")));
            }
            if !(w >= T::zero()) || !w.is_finite() {
                return Err(invalid(format!("atom weight must be nonnegative, got {w}")));
            }
        }
        let total: T = atoms.iter().map(|a| a.1).sum();
        let tol = T::epsilon() * T::of_usize(atoms.len() + 10) * T::of(64.0);
        if (total - T::one()).abs() > tol.max(T::of(1e-14)) {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite locations"));
        let mut merged: Vec<(T, T)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            if w == T::zero() {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let total: T = merged.iter().map(|a| a.1).sum();
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(Self { atoms: merged })
    }

    pub fn delta(t: T) -> Result<Self> {
        Self::new(vec![(t, T::one())])
    }

    /// `p δ_{t1} + (1 − p) δ_{t2}`.
    pub fn two_point(t1: T, t2: T, p: T) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(invalid(format!("two-point weight must lie in [0, 1], got {p}")));
        }
        Self::new(vec![(t1, p), (t2, T::one() - p)])
    }

    /// Empirical measure with equal weights.
    pub fn empirical(locations: &[T]) -> Result<Self> {
        if locations.is_empty() {
            return Err(invalid("empirical measure of an empty list"));
        }
        let w = T::one() / T::of_usize(locations.len());
        let mut atoms: Vec<(T, T)> = locations.iter().map(|&x| (x, w)).collect();
        // Renormalize exactly so that rounding in 1/n does not trip validation.
        let total: T = atoms.iter().map(|a| a.1).sum();
        for a in &mut atoms {
            a.1 /= total;
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    /// Mass of the closed interval `[a, b]`.
    pub fn mass(&self, a: T, b: T) -> T {
        self.atoms.iter().filter(|(x, _)| *x >= a && *x <= b).map(|a| a.1).sum()
    }

    /// Saddle equation of the limit: poles at `1/t_k` with weights `p_k`.
    pub fn saddle_equation(&self, c: T) -> Result<SaddleEquation<T>> {
        SaddleEquation::from_atoms(self.atoms.iter().map(|&(t, w)| (T::one() / t, w)).collect(), c)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StieltjesSolution<T> {
    pub z: Cx<T>,
    pub f: Cx<T>,
    /// Companion transform `w = c⁻¹ f − (1 − c⁻¹)/z`.
    pub w: Cx<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Fixed-point controls.
#[derive(Debug, Clone, Copy)]
pub struct FixedPoint {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FixedPoint {
    fn default() -> Self {
        Self { damping: 0.5, max_iter: 20_000, tol: 1e-12 }
    }
}

struct Companion<'a, T> {
    atoms: &'a [(T, T)],
    inv_c: T,
    z: Cx<T>,
}

impl<T: Real> Companion<'_, T> {
    fn map(&self, w: Cx<T>) -> Cx<T> {
        -(self.z - self.sum(w)).inv()
    }

    fn sum(&self, w: Cx<T>) -> Cx<T> {
        let mut s = cx(T::zero(), T::zero());
        for &(t, p) in self.atoms {
            s += (w * t + T::one()).inv() * (p * t);
        }
        s * self.inv_c
    }

    /// `F(w) = w (z − c⁻¹ Σ p t/(1 + t w)) + 1` and its derivative.
    fn newton_fn(&self, w: Cx<T>) -> (Cx<T>, Cx<T>) {
        let mut s = cx(T::zero(), T::zero());
        let mut ds = cx(T::zero(), T::zero());
        for &(t, p) in self.atoms {
            let d = (w * t + T::one()).inv();
            s += d * (p * t);
            ds += d * d * (p * t * t);
        }
        let inner = self.z - s * self.inv_c;
        (w * inner + T::one(), inner + w * ds * self.inv_c)
    }

    fn residual(&self, w: Cx<T>) -> T {
        (w - self.map(w)).norm() / w.norm().max(T::min_positive_value())
    }

    /// Newton on `F`; also stops once the step stops shrinking, which is
    /// where rounding takes over near a double root at a spectral edge.
    fn newton(&self, mut w: Cx<T>, max_iter: usize, tol: T) -> Option<(Cx<T>, usize)> {
        let mut prev = T::infinity();
        for it in 0..max_iter {
            let (f, df) = self.newton_fn(w);
            let step = f / df;
            if !step.re.is_finite() || !step.im.is_finite() {
                return None;
            }
            let size = step.norm();
            if it >= 4 && size >= prev && size <= T::of(1e-6) * w.norm() {
                return Some((w, it));
            }
            w -= step;
            if size <= tol * w.norm() {
                return Some((w, it + 1));
            }
            prev = size;
        }
        None
    }
}

fn solve_companion<T: Real>(z: Cx<T>, measure: &Measure<T>, c: T, warm: Option<Cx<T>>, opts: FixedPoint) -> Result<(Cx<T>, usize, T)> {
    let sys = Companion { atoms: measure.atoms(), inv_c: T::one() / c, z };
    let tol = T::of(opts.tol);
    let damping = T::of(opts.damping);
    let upper = |w: Cx<T>| w.im >= T::zero();
    let mut w = warm.filter(|w| upper(*w)).unwrap_or_else(|| -z.inv());
    if !upper(w) {
        w = cx(T::zero(), T::one());
    }
    let mut iters = 0;
    let fp_budget = 200.min(opts.max_iter);
    for _ in 0..fp_budget {
        let next = w * (T::one() - damping) + sys.map(w) * damping;
        iters += 1;
        let delta = (next - w).norm();
        w = if upper(next) { next } else { cx(T::zero(), T::one()) };
        if delta <= tol * T::of(1e-2) * w.norm() {
            break;
        }
    }
    // Damped iteration stalls as Im z → 0; finish with Newton on the
    // polynomial form, keeping only the Herglotz root.
    if let Some((wn, k)) = sys.newton(w, 60, T::epsilon() * T::of(4.0)) {
        let r = sys.residual(wn);
        if wn.im >= -T::epsilon() * wn.norm() && r <= tol {
            return Ok((cx(wn.re, wn.im.max(T::zero())), iters + k, r));
        }
    }
    for _ in fp_budget..opts.max_iter {
        let next = w * (T::one() - damping) + sys.map(w) * damping;
        iters += 1;
        w = if upper(next) { next } else { cx(T::zero(), T::one()) };
        if sys.residual(w) <= tol {
            return Ok((w, iters, sys.residual(w)));
        }
    }
    Err(LabError::NoConvergence { what: "Stieltjes fixed point", iterations: iters, residual: sys.residual(w).as_f64() })
}

/// Solves the self-consistent equation at `z` with `Im z > 0`.
pub fn solve_f<T: Real>(z: Cx<T>, measure: &Measure<T>, c: T) -> Result<StieltjesSolution<T>> {
    solve_f_with(z, measure, c, None, FixedPoint::default())
}

pub fn solve_f_with<T: Real>(z: Cx<T>, measure: &Measure<T>, c: T, warm: Option<Cx<T>>, opts: FixedPoint) -> Result<StieltjesSolution<T>> {
    check_ratio(c)?;
    if !(z.im > T::zero()) {
        return Err(invalid(format!("solve_f needs Im z > 0, got {z}")));
    }
    let (w, iterations, residual) = solve_companion(z, measure, c, warm, opts)?;
    let f = w * c + z.inv() * (c - T::one());
    Ok(StieltjesSolution { z, f, w, iterations, residual })
}

fn check_ratio<T: Real>(c: T) -> Result<()> {
    if c > T::one() && c.is_finite() {
        Ok(())
    } else {
        Err(LabError::UnsupportedRatio(c.as_f64()))
    }
}

/// `ρ(λ) = lim Im f(λ + iε)/π` by geometric ε-continuation from `1e-1` to
/// `1e-9`, then a Newton solve on the real axis seeded by the last step.
pub fn density<T: Real>(lambda: T, measure: &Measure<T>, c: T) -> Result<T> {
    check_ratio(c)?;
    if !(lambda > T::zero()) {
        return Err(invalid(format!("density needs lambda > 0, got {lambda}")));
    }
    let mut warm = None;
    let mut last = None;
    let mut eps = T::of(1e-1);
    let stop = T::of(1e-9);
    while eps >= stop * T::of(0.5) {
        let sol = solve_f_with(cx(lambda, eps), measure, c, warm, FixedPoint::default())?;
        warm = Some(sol.w);
        last = Some(sol);
        eps *= T::of(0.1);
    }
    let last = last.expect("continuation ran");
    let sys = Companion { atoms: measure.atoms(), inv_c: T::one() / c, z: cx(lambda, T::zero()) };
    let limit = sys.newton(last.w, 60, T::epsilon() * T::of(4.0)).map(|(w, _)| w).filter(|w| {
        let (fw, _) = sys.newton_fn(*w);
        fw.norm() <= T::of(1e-12) && w.im >= -T::of(1e-12) && (*w - last.w).norm() <= T::of(1e-3) * (T::one() + w.norm())
    });
    let im_w = match limit {
        Some(w) => w.im,
        None => {
            debug!("real-axis Newton rejected at lambda = {lambda}; using eps = 1e-9 value");
            last.w.im
        }
    };
    let rho = c * im_w / T::PI();
    if rho < -T::of(1e-12) {
        warn!("negative density {rho} at lambda = {lambda} clipped");
    }
    Ok(rho.max(T::zero()))
}

/// Root of the limiting saddle equation `1/z + c⁻¹ f⁽⁰⁾(z) = λ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitSaddle<T> {
    pub lambda: T,
    pub z: Cx<T>,
}

pub fn limit_saddle<T: Real>(lambda: T, measure: &Measure<T>, c: T) -> Result<LimitSaddle<T>> {
    let eq = measure.saddle_equation(c)?;
    let z = eq.root_at(lambda)?;
    Ok(LimitSaddle { lambda, z })
}

/// True when `Im z > eps_bulk` on the five points `λ + k·5e-4`, `|k| ≤ 2`.
pub fn bulk_membership<T: Real>(lambda: T, measure: &Measure<T>, c: T, eps_bulk: T) -> Result<bool> {
    let eq = measure.saddle_equation(c)?;
    in_bulk(&eq, lambda, eps_bulk)
}

pub(crate) fn in_bulk<T: Real>(eq: &SaddleEquation<T>, lambda: T, eps_bulk: T) -> Result<bool> {
    for k in -2i32..=2 {
        let l = lambda + T::of(5e-4 * f64::from(k));
        if !(l > T::zero()) || !(eq.root_at(l)?.im > eps_bulk) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Support components `[lo, hi]` of the limiting density, ascending.
///
/// Edges come from the critical values of the saddle map and are then
/// confirmed by bisection on the bulk predicate to `1e-6`.
pub fn support<T: Real>(measure: &Measure<T>, c: T) -> Result<Vec<(T, T)>> {
    let eq = measure.saddle_equation(c)?;
    let tol = T::of(1e-6);
    let eps = T::of(1e-8);
    let is_complex = |l: T| -> Result<bool> { Ok(eq.root_at(l)?.im > eps) };
    let mut out = Vec::new();
    for (lo, hi) in eq.bulk_lambda_intervals() {
        let mid = (lo + hi) * T::of(0.5);
        if !is_complex(mid)? {
            continue;
        }
        let refine = |mut inside: T, mut outside: T| -> Result<T> {
            while (inside - outside).abs() > tol {
                let m = (inside + outside) * T::of(0.5);
                if is_complex(m)? {
                    inside = m;
                } else {
                    outside = m;
                }
            }
            Ok((inside + outside) * T::of(0.5))
        };
        let pad = tol * T::of(4.0);
        let left = refine(mid, (lo - pad).max(T::min_positive_value()))?;
        let right = refine(mid, hi + pad)?;
        out.push((left, right));
    }
    Ok(out)
}

/// One row of a density curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DensityPoint {
    pub lambda: f64,
    pub rho: f64,
    pub im_z: f64,
    pub re_z: f64,
    pub in_bulk: bool,
}

pub fn density_curve(grid: &[f64], measure: &Measure<f64>, c: f64, eps_bulk: f64) -> Result<Vec<DensityPoint>> {
    use rayon::prelude::*;
    let eq = measure.saddle_equation(c)?;
    grid.par_iter()
        .map(|&lambda| {
            let rho = density(lambda, measure, c)?;
            let z = eq.root_at(lambda)?;
            Ok(DensityPoint { lambda, rho, im_z: z.im, re_z: z.re, in_bulk: in_bulk(&eq, lambda, eps_bulk)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    const RHO_AT_ONE: f64 = 0.421_084_399_347_792_4;

    // Companion quadratic for N0 = δ_t: z t w² + (z − t/c + t) w + 1 = 0.
    fn oracle_w(z: Cx<f64>, t: f64, c: f64) -> Cx<f64> {
        let a = z * t;
        let b = z + (t - t / c);
        let disc = (b * b - a * 4.0).sqrt();
        let r1 = (-b + disc) / (a * 2.0);
        let r2 = (-b - disc) / (a * 2.0);
        if r1.im >= r2.im { r1 } else { r2 }
    }

    #[test]
    fn oracle_constant_is_consistent() {
        // ρ(1) = c Im z(1)/π with z² − 1.5 z + 1 = 0.
        let y = (1.0 - 0.75f64 * 0.75).sqrt();
        assert!((2.0 * y / std::f64::consts::PI - RHO_AT_ONE).abs() < 1e-15);
    }

    #[test]
    fn measure_validation() {
        assert!(Measure::new(vec![(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(Measure::new(vec![(-1.0, 1.0)]).is_err());
        assert!(Measure::<f64>::new(vec![]).is_err());
        let m = Measure::new(vec![(2.0, 0.25), (1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(m.atoms(), &[(1.0, 0.5), (2.0, 0.5)]);
        assert!(Measure::two_point(1.0, 4.0, 1.5).is_err());
    }

    #[test]
    fn far_field() {
        let m = Measure::two_point(1.0, 4.0, 0.5).unwrap();
        let z = cx(1e6, 1.0);
        let s = solve_f(z, &m, 2.0).unwrap();
        assert!((s.f + z.inv()).norm() / z.inv().norm() < 1e-5);
    }

    #[test]
    fn identity_density_near_axis() {
        let m = Measure::delta(1.0).unwrap();
        let s = solve_f(cx(1.0, 1e-8), &m, 2.0).unwrap();
        assert!((s.f.im / std::f64::consts::PI - RHO_AT_ONE).abs() < 1e-4);
        assert!(s.residual <= 1e-12);
        let out = solve_f(cx(10.0, 1e-8), &m, 2.0).unwrap();
        assert!(out.f.im <= 1e-6);
        assert!(solve_f(cx(1.0, 0.0), &m, 2.0).is_err());
        assert!(solve_f(cx(1.0, 0.1), &m, 1.0).is_err());
    }

    #[test]
    fn density_matches_oracle() {
        let m = Measure::delta(1.0).unwrap();
        assert!((density(1.0, &m, 2.0).unwrap() - RHO_AT_ONE).abs() < 1e-6);
        assert!(density(10.0, &m, 2.0).unwrap() < 1e-8);
        for t in [0.5, 1.0, 3.0] {
            for c in [1.5_f64, 2.0, 5.0] {
                let (lo, hi): (f64, f64) = ((1.0 - c.powf(-0.5)).powi(2) * t, (1.0 + c.powf(-0.5)).powi(2) * t);
                for k in 0..100 {
                    let l = lo + (hi - lo) * (k as f64 + 0.5) / 100.0;
                    let want = c * oracle_w(cx(l, 0.0), t, c).im / std::f64::consts::PI;
                    let got = density(l, &Measure::delta(t).unwrap(), c).unwrap();
                    assert!((got - want).abs() < 1e-10, "t={t} c={c} λ={l}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for m in [Measure::delta(1.0).unwrap(), Measure::two_point(1.0, 4.0, 0.5).unwrap()] {
            let supp = support(&m, 2.0).unwrap();
            let gl = GaussLegendre::<f64>::new(200);
            let mass: f64 = supp.iter().map(|&(a, b)| gl.integrate(a, b, |l| density(l, &m, 2.0).unwrap())).sum();
            assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
        }
    }

    #[test]
    fn saddle_matches_transform() {
        let m = Measure::two_point(1.0, 4.0, 0.5).unwrap();
        for (lo, hi) in support(&m, 2.0).unwrap() {
            for k in 1..20 {
                let l = lo + (hi - lo) * k as f64 / 20.0;
                let z = limit_saddle(l, &m, 2.0).unwrap().z;
                let rho = density(l, &m, 2.0).unwrap();
                assert!((2.0 * z.im / std::f64::consts::PI - rho).abs() < 1e-8);
                // z(λ) = −c⁻¹ f(λ − i0) + (1 − c⁻¹)/λ
                let s = solve_f(cx(l, 1e-12), &m, 2.0).unwrap();
                let zz = -(s.f.conj()) * 0.5 + 0.5 / l;
                assert!((zz - z).norm() < 1e-6, "{zz} vs {z}");
            }
        }
    }

    #[test]
    fn limit_saddle_identity() {
        let m = Measure::delta(1.0).unwrap();
        let z: Cx<f64> = limit_saddle(1.0, &m, 2.0).unwrap().z;
        assert!((z - cx(0.75, 0.661_438)).norm() < 1e-6);
        assert!((z.norm() - 1.0).abs() < 1e-13);
        assert!((limit_saddle(100.0, &m, 2.0).unwrap().z - cx(0.01, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn bulk_predicate() {
        let d = Measure::delta(1.0).unwrap();
        assert!(bulk_membership(1.0, &d, 2.0, 1e-8).unwrap());
        assert!(!bulk_membership(10.0, &d, 2.0, 1e-8).unwrap());
        let tp = Measure::two_point(1.0, 10.0, 0.5).unwrap();
        let supp = support(&tp, 2.0).unwrap();
        assert_eq!(supp.len(), 2);
        let gap_mid = 0.5 * (supp[0].1 + supp[1].0);
        assert!(!bulk_membership(gap_mid, &tp, 2.0, 1e-8).unwrap());
        assert!(density(gap_mid, &tp, 2.0).unwrap() < 1e-8);
    }

    #[test]
    fn identity_support_edges() {
        let s = support(&Measure::delta(1.0).unwrap(), 2.0).unwrap();
        let r = 0.5f64.sqrt();
        assert_eq!(s.len(), 1);
        assert!((s[0].0 - (1.0 - r).powi(2)).abs() < 2e-6);
        assert!((s[0].1 - (1.0 + r).powi(2)).abs() < 2e-6);
    }

    #[test]
    fn single_precision_density() {
        let m = Measure::<f32>::delta(1.0).unwrap();
        let z = limit_saddle(1.0_f32, &m, 2.0).unwrap().z;
        assert!((z.re - 0.75).abs() < 1e-5 && (z.im - 0.661_438).abs() < 1e-5);
    }
}
