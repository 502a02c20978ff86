//! Contours `L` (the closed saddle curve) and `ω` (circle `|u| = |z0|`).
//!
//! Each loop `(a, b)` of `L` is parametrized by `θ ∈ [0, 2π)` through
//! `x(θ) = a + (b − a)(1 − cos θ)/2`, `y = −sign(sin θ)·Y(x)`, which runs
//! counterclockwise with the lower arc first. Along `Im V = 0` the tangent is
//! `dz/dθ = x'(θ)·conj(V'(z))/Re V'(z)`, exact up to the height solve.

use std::f64::consts::PI;

use serde::Serialize;

use super::branch::SaddleBranch;
use super::equation::{Loop, SaddleEquation};
use crate::error::{LabError, Result};
use crate::scalar::{cx, Cx, Real};

#[derive(Debug, Clone, Copy)]
pub struct LoopPoint<T> {
    pub theta: T,
    pub z: Cx<T>,
    /// `dz/dθ`.
    pub dz: Cx<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourPair<T> {
    pub lambda0: T,
    pub z0: Cx<T>,
    /// Radius `r = |z0|` of `ω`.
    pub radius: T,
    #[serde(skip)]
    pub loops: Vec<Loop<T>>,
    /// Index of the loop through `z0`.
    pub main_loop: usize,
    /// Parameter of `z0` on the main loop, in `(π, 2π)`.
    pub theta0: T,
    /// Closed polylines of the loops, for plotting and winding checks.
    #[serde(skip)]
    pub polyline: Vec<Vec<Cx<T>>>,
    #[serde(skip)]
    equation: SaddleEquation<T>,
}

impl<T: Real> ContourPair<T> {
    pub fn equation(&self) -> &SaddleEquation<T> {
        &self.equation
    }

    pub fn point(&self, loop_idx: usize, theta: T) -> LoopPoint<T> {
        loop_point(&self.equation, self.loops[loop_idx], theta)
    }

    /// Winding number of `L` about `p`, from the polylines.
    pub fn winding_about(&self, p: Cx<T>) -> i64 {
        self.polyline.iter().map(|poly| winding(poly, p)).sum()
    }

    /// Winding number of `ω` about `p`.
    pub fn omega_winding_about(&self, p: Cx<T>) -> i64 {
        i64::from(p.norm() < self.radius)
    }

    /// Staggered circle nodes `u_k = r e^{i(arg z0 + (k + ½)2π/N)}` and
    /// trapezoid weights `du_k = i u_k 2π/N`.
    pub fn omega_nodes(&self, n: usize, radius: T) -> (Vec<Cx<T>>, Vec<Cx<T>>) {
        let h = T::of(2.0 * PI) / T::of_usize(n);
        let phi0 = self.z0.im.atan2(self.z0.re);
        let mut u = Vec::with_capacity(n);
        let mut du = Vec::with_capacity(n);
        for k in 0..n {
            let phi = phi0 + h * (T::of_usize(k) + T::of(0.5));
            let p = cx(phi.cos(), phi.sin()) * radius;
            u.push(p);
            du.push(cx(T::zero(), h) * p);
        }
        (u, du)
    }

    /// Distance from a point to the circle `ω`.
    pub fn distance_to_omega(&self, p: Cx<T>) -> T {
        (p.norm() - self.radius).abs()
    }
}

pub(crate) fn loop_point<T: Real>(eq: &SaddleEquation<T>, lp: Loop<T>, theta: T) -> LoopPoint<T> {
    let half = (lp.b - lp.a) * T::of(0.5);
    let (s, c) = theta.sin_cos();
    let x = lp.a + half * (T::one() - c);
    let dx = half * s;
    let y = eq.height(x);
    if y > T::zero() {
        let z = cx(x, if s > T::zero() { -y } else { y });
        let d = eq.dv(z);
        let dz = d.conj() * (dx / d.re);
        LoopPoint { theta, z, dz }
    } else {
        LoopPoint { theta, z: cx(x, T::zero()), dz: cx(dx, T::zero()) }
    }
}

fn winding<T: Real>(poly: &[Cx<T>], p: Cx<T>) -> i64 {
    let mut total = T::zero();
    for k in 0..poly.len() {
        let a = poly[k] - p;
        let b = poly[(k + 1) % poly.len()] - p;
        total += (b / a).arg();
    }
    (total / T::of(2.0 * PI)).round().to_i64().unwrap_or(0)
}

/// Builds `L` and `ω` for `λ0` from the branch's equation.
pub fn build_contours<T: Real>(branch: &SaddleBranch<T>, lambda0: T) -> Result<ContourPair<T>> {
    contours_for(branch.equation(), lambda0)
}

pub(crate) fn contours_for<T: Real>(eq: &SaddleEquation<T>, lambda0: T) -> Result<ContourPair<T>> {
    let z0 = eq.root_at(lambda0)?;
    if !(z0.im > T::of(1e-8)) {
        return Err(LabError::NotInBulk { lambda0: lambda0.as_f64(), im_z: z0.im.as_f64() });
    }
    let loops = eq.loops();
    let main_loop = loops
        .iter()
        .position(|l| z0.re > l.a && z0.re < l.b)
        .ok_or(LabError::NotInBulk { lambda0: lambda0.as_f64(), im_z: z0.im.as_f64() })?;
    let lp = loops[main_loop];
    let cos0 = T::one() - T::of(2.0) * (z0.re - lp.a) / (lp.b - lp.a);
    let theta0 = T::of(2.0 * PI) - cos0.max(-T::one()).min(T::one()).acos();
    let samples = 1024;
    let h = T::of(2.0 * PI) / T::of_usize(samples);
    let polyline: Vec<Vec<Cx<T>>> = loops
        .iter()
        .map(|&l| (0..samples).map(|k| loop_point(eq, l, h * (T::of_usize(k) + T::of(0.5))).z).collect())
        .collect();
    let pair = ContourPair { lambda0, z0, radius: z0.norm(), loops, main_loop, theta0, polyline, equation: eq.clone() };
    for &t in eq.poles() {
        let w = pair.winding_about(cx(t, T::zero()));
        if w != 1 {
            return Err(LabError::BranchTracking {
                lambda: lambda0.as_f64(),
                last_good: None,
                reason: format!("contour winds {w} times about pole {t}"),
            });
        }
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle_contour::{build_branch, default_grid};

    #[test]
    fn identity_contours() {
        let eq = SaddleEquation::<f64>::from_taus(&[1.0; 4], 2.0).unwrap();
        let br = build_branch(&eq, &default_grid(&eq, 1.0, 256)).unwrap();
        let cp = build_contours(&br, 1.0).unwrap();
        assert!((cp.radius - 1.0).abs() < 1e-12);
        assert_eq!(cp.winding_about(cx(1.0, 0.0)), 1);
        assert_eq!(cp.winding_about(cx(0.0, 0.0)), 0);
        assert_eq!(cp.omega_winding_about(cx(0.0, 0.0)), 1);
        let p = cp.point(cp.main_loop, cp.theta0);
        assert!((p.z - cp.z0).norm() < 1e-10);
        assert!(matches!(build_contours(&br, 5.0), Err(LabError::NotInBulk { .. })));
    }

    #[test]
    fn omega_misses_small_pole() {
        let taus = [2.0, 2.5, 3.0];
        let eq = SaddleEquation::from_taus(&taus, 2.0).unwrap();
        let iv = eq.bulk_lambda_intervals();
        let l0 = 0.5 * (iv[0].0 + iv[0].1);
        let cp = contours_for(&eq, l0).unwrap();
        if cp.radius < 2.0 {
            assert_eq!(cp.omega_winding_about(cx(2.0, 0.0)), 0);
        }
        for &t in &taus {
            assert_eq!(cp.winding_about(cx(t, 0.0)), 1);
        }
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let taus = [0.3_f64, 0.8, 1.0, 1.9];
        let eq = SaddleEquation::from_taus(&taus, 2.0).unwrap();
        let lp = eq.loops()[0];
        for &th in &[0.4, 1.3, 2.9, 3.6, 5.1] {
            let h = 1e-6;
            let p = loop_point(&eq, lp, th);
            let fd = (loop_point(&eq, lp, th + h).z - loop_point(&eq, lp, th - h).z) / (2.0 * h);
            assert!((p.dz - fd).norm() < 1e-6 * fd.norm().max(1.0), "θ={th}: {} vs {fd}", p.dz);
        }
    }
}
