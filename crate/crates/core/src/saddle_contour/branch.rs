use serde::Serialize;

use super::equation::SaddleEquation;
use crate::error::{invalid, LabError, Result};
use crate::scalar::{Cx, Real};

/// Residual bound for every tracked root.
pub const ROOT_TOL: f64 = 1e-10;
/// `|Im z|` below which a branch point counts as touching the real axis.
pub const TOUCHDOWN_TOL: f64 = 1e-9;

/// Tracked root `z_n(λ)` on an increasing `λ` grid.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleBranch<T> {
    pub lambdas: Vec<T>,
    pub z: Vec<Cx<T>>,
    /// Real grid points adjacent to a non-real one.
    pub touchdowns: Vec<usize>,
    #[serde(skip)]
    equation: SaddleEquation<T>,
}

impl<T: Real> SaddleBranch<T> {
    pub fn equation(&self) -> &SaddleEquation<T> {
        &self.equation
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Exact touchdown abscissae `a_k, b_k` and their `λ` values.
    pub fn touchdown_points(&self) -> Vec<(T, T)> {
        self.equation.critical_points().iter().map(|&x| (self.equation.v_real(x), x)).collect()
    }
}

/// Root with `Im ≥ 0` of `1/z + c⁻¹ n⁻¹ Σ 1/(τ_j − z) = λ` on the branch
/// that tends to `0` as `λ → ∞`.
pub fn finite_saddle<T: Real>(lambda: T, taus: &[T], c_mn: T) -> Result<Cx<T>> {
    let eq = SaddleEquation::from_taus(taus, c_mn)?;
    let z = eq.root_at(lambda)?;
    check_root(&eq, z, lambda, None)?;
    Ok(z)
}

fn check_root<T: Real>(eq: &SaddleEquation<T>, z: Cx<T>, lambda: T, last_good: Option<T>) -> Result<()> {
    let r = eq.residual(z, lambda);
    if r <= T::of(ROOT_TOL) && z.im >= T::zero() {
        Ok(())
    } else {
        Err(LabError::BranchTracking {
            lambda: lambda.as_f64(),
            last_good: last_good.map(Real::as_f64),
            reason: format!("root {z} has residual {r:e}"),
        })
    }
}

/// Solves the saddle equation along `grid` (strictly increasing, positive).
///
/// Each root is located independently by monotone bracketing in `x`, so
/// continuation cannot hop branches; the monotonicity of `x_n(λ)` is then
/// verified along the grid.
pub fn build_branch<T: Real>(eq: &SaddleEquation<T>, grid: &[T]) -> Result<SaddleBranch<T>> {
    if grid.is_empty() {
        return Err(invalid("empty lambda grid"));
    }
    if !(grid[0] > T::zero()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("lambda grid must be positive and strictly increasing"));
    }
    let mut z = Vec::with_capacity(grid.len());
    let mut last_good: Option<T> = None;
    for &lambda in grid {
        let root = eq.root_at(lambda)?;
        check_root(eq, root, lambda, last_good)?;
        if let Some(prev) = z.last() {
            let prev: &Cx<T> = prev;
            if !(root.re < prev.re) {
                return Err(LabError::BranchTracking {
                    lambda: lambda.as_f64(),
                    last_good: last_good.map(Real::as_f64),
                    reason: format!("Re z not decreasing ({} then {})", prev.re, root.re),
                });
            }
        }
        z.push(root);
        last_good = Some(lambda);
    }
    let tol = T::of(TOUCHDOWN_TOL);
    let complex = |k: usize| z[k].im >= tol;
    let touchdowns = (0..z.len())
        .filter(|&k| !complex(k) && ((k > 0 && complex(k - 1)) || (k + 1 < z.len() && complex(k + 1))))
        .collect();
    Ok(SaddleBranch { lambdas: grid.to_vec(), z, touchdowns, equation: eq.clone() })
}

/// Grid with `base` nodes spread over the bulk `λ`-intervals (cosine-graded
/// toward each touchdown), a quarter as many on the real segments between
/// and around them, and four times the local density within `0.05` of `λ0`.
pub fn default_grid<T: Real>(eq: &SaddleEquation<T>, lambda0: T, base: usize) -> Vec<T> {
    let intervals = eq.bulk_lambda_intervals();
    let total: T = intervals.iter().map(|&(lo, hi)| hi - lo).sum();
    let mut g: Vec<T> = Vec::new();
    let pi = T::PI();
    for &(lo, hi) in &intervals {
        let k = ((T::of_usize(base) * (hi - lo) / total).to_usize().unwrap_or(0)).max(16);
        for i in 0..=k {
            let s = T::of_usize(i) / T::of_usize(k);
            g.push(lo + (hi - lo) * (T::one() - (pi * s).cos()) * T::of(0.5));
        }
        // 4× refinement near λ0.
        if lambda0 > lo && lambda0 < hi {
            let w = T::of(0.05);
            let local = ((T::of_usize(4 * k) * T::of(2.0) * w / (hi - lo)).to_usize().unwrap_or(0)).max(8);
            let a = (lambda0 - w).max(lo);
            let b = (lambda0 + w).min(hi);
            for i in 0..=local {
                g.push(a + (b - a) * T::of_usize(i) / T::of_usize(local));
            }
        }
    }
    // Real segments: below the first interval, between intervals, above the last.
    let span = intervals.last().map(|i| i.1).unwrap_or(T::one());
    let first = intervals.first().map(|i| i.0).unwrap_or(T::one());
    let extra = (base / 4).max(8);
    let mut push_range = |a: T, b: T, k: usize| {
        for i in 1..k {
            g.push(a + (b - a) * T::of_usize(i) / T::of_usize(k));
        }
    };
    push_range(first * T::of(0.5), first, extra / 4 + 2);
    for w in intervals.windows(2) {
        push_range(w[0].1, w[1].0, extra / 4 + 2);
    }
    push_range(span, span * T::of(1.5), extra / 4 + 2);
    g.push(lambda0);
    g.retain(|l| *l > T::zero());
    g.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    g.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon() * T::of(16.0) * b.abs());
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn identity_branch_examples() {
        let eq = SaddleEquation::from_taus(&[1.0; 16], 2.0).unwrap();
        let grid = default_grid(&eq, 1.0, 512);
        let br = build_branch(&eq, &grid).unwrap();
        let s = 0.5f64.sqrt();
        // Touchdowns at the discriminant roots of λ² − 3λ + 0.25.
        let tl: Vec<f64> = br.touchdown_points().iter().map(|p| p.0).collect();
        assert!((tl[0] - (1.0 + s).powi(2)).abs() < 1e-12);
        assert!((tl[1] - (1.0 - s).powi(2)).abs() < 1e-12);
        assert_eq!(br.touchdowns.len(), 2);
        for (&l, &z) in br.lambdas.iter().zip(&br.z) {
            assert!(eq.residual(z, l) <= ROOT_TOL);
            assert!((2.0 - 1.0) * z.im * z.im <= z.re * z.re + 1e-12);
        }
        for w in br.z.windows(2) {
            assert!(w[1].re < w[0].re);
        }
    }

    #[test]
    fn finite_saddle_examples() {
        let z = finite_saddle(1.0, &[1.0; 4], 2.0).unwrap();
        assert!((z - cx(0.75, 0.661_438)).norm() < 1e-6);
        let taus = [0.4, 0.9, 1.1, 2.5, 3.0];
        let z = finite_saddle(100.0, &taus, 2.0).unwrap();
        assert!((z - cx(0.01, 0.0)).norm() <= 1e-3);
        let eq = SaddleEquation::from_taus(&taus, 2.0).unwrap();
        let z = finite_saddle(0.9, &taus, 2.0).unwrap();
        assert!(z.im > 0.0);
        assert!(eq.imaginary_identity_residual(z) < 1e-10);
    }

    #[test]
    fn rejects_bad_grids() {
        let eq = SaddleEquation::from_taus(&[1.0], 2.0).unwrap();
        assert!(build_branch(&eq, &[1.0, 0.5]).is_err());
        assert!(build_branch(&eq, &[]).is_err());
        assert!(build_branch(&eq, &[0.0, 1.0]).is_err());
    }
}
