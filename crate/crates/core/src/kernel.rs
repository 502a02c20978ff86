//! Finite-n correlation kernel by double contour integration.
//!
//! For local coordinates `ξ, η` the rescaled kernel is
//!
//! ```text
//! (1/n) K_n(λ0 + ξ/n, λ0 + η/n) = −(c/4π²) ∮_L ∮_ω F(t, u) du dt,
//! F(t, u) = exp{m(S(u) − S(t))} e^{(ξu − ηt)c} / (u − t),
//! ```
//!
//! with `ω` a small circle about the origin inside `L`. Deforming `ω` onto
//! the circle `ω_n` through `z0` crosses the pole at `u = t` along the arc of
//! `L` inside `ω_n`, whose residues integrate in closed form. Writing
//! `α = e^{(ξ−η)c x0}` and `a = (ξ − η)c`, the kernel is `α·K̃` with
//!
//! ```text
//! K̃ = sin(a y0)/(π(ξ − η)) − (c/4π²) ∮_L ∮_{ω_n} F̃(t, u) du dt,
//! F̃(t, u) = e^{ψ(u) − χ(t)}/(u − t),  ψ(u) = mS(u) + ξc(u − x0),  χ(t) = mS(t) + ηc(t − x0).
//! ```
//!
//! `|exp{m(S(u) − S(t))}| ≤ 1` on `L × ω_n`, and the double integral
//! concentrates at `z0` and its conjugate, so only windows of `L` where the
//! integrand can exceed `e^{-40}` are integrated.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::linalg::Square;
use crate::quadrature::GaussLegendre;
use crate::saddle_contour::{build_branch, build_contours, default_grid, ContourPair, PhaseFn, SaddleBranch, SaddleEquation};
use crate::scalar::{cexpm1, cx, Cx, Real};
use crate::sine_stats::sine;

/// Quadrature controls.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelQuadrature {
    /// Nodes on `ω_n` at level 0; doubled per level.
    pub n_omega: usize,
    /// Largest node count tried before the result is flagged.
    pub max_n_omega: usize,
    /// Accept once successive levels agree to this fraction of `c y0/π`.
    pub rel_tol: f64,
    /// Windows on `L` keep points where the log-bound of `|F̃|` exceeds `-log_cut`.
    pub log_cut: f64,
    pub gl_order: usize,
    /// Samples per loop used to locate the windows.
    pub coarse: usize,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        Self { n_omega: 512, max_n_omega: 8192, rel_tol: 1e-3, log_cut: 40.0, gl_order: 16, coarse: 2048 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalKernelValue<T> {
    pub xi: T,
    pub eta: T,
    /// `(1/n) K_n(λ0 + ξ/n, λ0 + η/n)`.
    pub value: T,
    /// `value / alpha`.
    pub stripped: T,
    /// `e^{(ξ−η) x0 c}`.
    pub alpha: T,
    /// Change between the last two levels, in units of `stripped`.
    pub quadrature_error: T,
    pub n_omega: usize,
    /// Set when the tolerance was not met at the node cap.
    pub flagged: bool,
}

struct CoarseSample<T> {
    t: Cx<T>,
    re_ms: T,
}

struct OmegaNodes<T> {
    u: Vec<Cx<T>>,
    du: Vec<Cx<T>>,
    ms: Vec<Cx<T>>,
}

/// Contours, phase and cached nodes for one `(τ, m, λ0)`.
pub struct KernelEvaluator<T> {
    contours: ContourPair<T>,
    phase: PhaseFn<T>,
    n: usize,
    m: usize,
    c: T,
    settings: KernelQuadrature,
    gl: GaussLegendre<T>,
    coarse: Vec<Vec<CoarseSample<T>>>,
    sigma_theta: T,
    omega: Vec<OnceLock<std::result::Result<OmegaNodes<T>, String>>>,
}

/// One evaluation request against an evaluator.
#[derive(Clone, Copy)]
pub struct KernelQuery<'a, T> {
    pub evaluator: &'a KernelEvaluator<T>,
    pub xi: T,
    pub eta: T,
}

pub fn eval_kernel<T: Real>(q: &KernelQuery<'_, T>) -> Result<LocalKernelValue<T>> {
    q.evaluator.eval(q.xi, q.eta)
}

fn reduce_im<T: Real>(w: Cx<T>) -> Cx<T> {
    let two_pi = T::PI() * T::of(2.0);
    cx(w.re, w.im - two_pi * (w.im / two_pi).round())
}

impl<T: Real> KernelEvaluator<T> {
    /// Builds the branch and contours for `n = taus.len()` and `m`.
    pub fn new(taus: &[T], m: usize, lambda0: T) -> Result<Self> {
        let n = taus.len();
        if n == 0 || m <= n {
            return Err(LabError::UnsupportedRatio(m as f64 / n.max(1) as f64));
        }
        let eq = SaddleEquation::from_taus(taus, T::of_usize(m) / T::of_usize(n))?;
        let branch = build_branch(&eq, &default_grid(&eq, lambda0, 256))?;
        let contours = build_contours(&branch, lambda0)?;
        let phase = PhaseFn::new(&eq, lambda0, contours.z0)?;
        Self::from_contours(contours, phase, n, m, KernelQuadrature::default())
    }

    pub fn from_contours(contours: ContourPair<T>, phase: PhaseFn<T>, n: usize, m: usize, settings: KernelQuadrature) -> Result<Self> {
        if settings.n_omega < 8 || settings.max_n_omega < settings.n_omega || settings.gl_order == 0 || settings.coarse < 16 {
            return Err(invalid("kernel quadrature settings out of range"));
        }
        let c = T::of_usize(m) / T::of_usize(n);
        let mut coarse = Vec::with_capacity(contours.loops.len());
        let h = T::PI() * T::of(2.0) / T::of_usize(settings.coarse);
        for k in 0..contours.loops.len() {
            let mut row = Vec::with_capacity(settings.coarse);
            for j in 0..settings.coarse {
                let t = contours.point(k, h * (T::of_usize(j) + T::of(0.5))).z;
                row.push(CoarseSample { t, re_ms: phase.scaled(t, m)?.re });
            }
            coarse.push(row);
        }
        let z0 = contours.z0;
        let speed = contours.point(contours.main_loop, contours.theta0).dz.norm();
        let curvature = (T::of_usize(m) * contours.equation().dv(z0).norm()).sqrt();
        let sigma_theta = T::one() / (speed * curvature);
        let mut levels = 1;
        while settings.n_omega << levels <= settings.max_n_omega {
            levels += 1;
        }
        let omega = (0..levels + 2).map(|_| OnceLock::new()).collect();
        Ok(Self { contours, phase, n, m, c, gl: GaussLegendre::new(settings.gl_order), settings, coarse, sigma_theta, omega })
    }

    pub fn contours(&self) -> &ContourPair<T> {
        &self.contours
    }

    pub fn phase(&self) -> &PhaseFn<T> {
        &self.phase
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn settings(&self) -> KernelQuadrature {
        self.settings
    }

    /// `c y0/π`, the density at `λ0` implied by the saddle point.
    pub fn rho(&self) -> T {
        self.c * self.contours.z0.im / T::PI()
    }

    pub fn alpha(&self, xi: T, eta: T) -> T {
        ((xi - eta) * self.c * self.contours.z0.re).exp()
    }

    /// `sin((ξ−η) y0 c)/(π(ξ−η))`, the residue part of `K̃`.
    fn residue_part(&self, xi: T, eta: T) -> T {
        let d = xi - eta;
        let y0 = self.contours.z0.im;
        if d == T::zero() {
            self.c * y0 / T::PI()
        } else {
            (d * y0 * self.c).sin() / (T::PI() * d)
        }
    }

    fn omega_level(&self, level: usize) -> Result<&OmegaNodes<T>> {
        let cell = self.omega.get(level).ok_or(invalid("kernel level beyond cache"))?;
        let nodes = cell.get_or_init(|| self.omega_nodes(self.settings.n_omega << level, self.contours.radius).map_err(|e| e.to_string()));
        nodes.as_ref().map_err(|e| LabError::InvalidInput(format!("circle nodes: {e}")))
    }

    fn omega_nodes(&self, count: usize, radius: T) -> Result<OmegaNodes<T>> {
        let (u, du) = self.contours.omega_nodes(count, radius);
        let ms = u.iter().map(|&p| self.phase.scaled(p, self.m)).collect::<Result<Vec<_>>>()?;
        Ok(OmegaNodes { u, du, ms })
    }

    /// `ψ(u_k)` on the given nodes.
    fn psi(&self, om: &OmegaNodes<T>, xc: T) -> Vec<Cx<T>> {
        let x0 = self.contours.z0.re;
        om.u.iter().zip(&om.ms).map(|(&u, &ms)| ms + (u - x0) * xc).collect()
    }

    /// θ-intervals on loop `k` where the integrand may exceed `e^{-cut}`.
    fn windows(&self, k: usize, ec: T, bu: T) -> Vec<(T, T)> {
        let x0 = self.contours.z0.re;
        let cut = T::of(-self.settings.log_cut);
        let samples = &self.coarse[k];
        let keep: Vec<bool> = samples.iter().map(|s| -s.re_ms - ec * (s.t.re - x0) + bu > cut).collect();
        let two_pi = T::PI() * T::of(2.0);
        let Some(start) = keep.iter().position(|&k| !k) else {
            return vec![(T::zero(), two_pi)];
        };
        let count = keep.len();
        let d = two_pi / T::of_usize(count);
        let theta = |i: usize| d * (T::of_usize(i) + T::of(0.5));
        let mut out = Vec::new();
        let mut run: Option<usize> = None;
        for j in 1..=count {
            let i = start + j;
            match (keep[i % count], run) {
                (true, None) => run = Some(i),
                (false, Some(s)) => {
                    out.push((theta(s) - d, theta(i - 1) + d));
                    run = None;
                }
                _ => {}
            }
        }
        out
    }

    /// Splits a window at the crossings of `L` with `ω_n` and lays panels.
    fn panels(&self, k: usize, (lo, hi): (T, T), level: usize) -> Vec<(T, T)> {
        let two_pi = T::PI() * T::of(2.0);
        let mut cuts = vec![lo, hi];
        if k == self.contours.main_loop {
            let th = self.contours.theta0;
            for base in [th, two_pi - th] {
                for shift in -1i32..=2 {
                    let b = base + two_pi * T::of(f64::from(shift));
                    if b > lo && b < hi {
                        cuts.push(b);
                    }
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let width = T::of(2.0) * self.sigma_theta / T::of_usize(1 << level);
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len <= T::zero() {
                continue;
            }
            let np = (len / width).ceil().to_usize().unwrap_or(1).clamp(1, 4096 << level);
            let step = len / T::of_usize(np);
            for p in 0..np {
                out.push((w[0] + step * T::of_usize(p), w[0] + step * T::of_usize(p + 1)));
            }
        }
        out
    }

    /// `∮_{ω_n} F̃(t, u) du` by the trapezoid rule after subtracting the
    /// pole at `u = t`, whose exact contribution is added back.
    fn inner(&self, om: &OmegaNodes<T>, psi_u: &[Cx<T>], t: Cx<T>, ms_t: Cx<T>, xc: T, ec: T) -> Cx<T> {
        let x0 = self.contours.z0.re;
        let r = self.contours.radius;
        let a = xc - ec;
        let psi_t = ms_t + (t - x0) * xc;
        let chi_t = ms_t + (t - x0) * ec;
        let e_t = ((t - x0) * a).exp();
        let h = T::PI() * T::of(2.0) / T::of_usize(om.u.len());
        let near = T::of(4.0) * h * r;
        let tiny = T::of(1e-12) * r;
        let mut s = cx(T::zero(), T::zero());
        for ((&u, &du), &psi) in om.u.iter().zip(&om.du).zip(psi_u) {
            let d = u - t;
            let dn = d.norm();
            let term = if dn < tiny {
                e_t * (self.phase.derivative(t) * T::of_usize(self.m) + xc)
            } else if dn < near {
                e_t * cexpm1(reduce_im(psi - psi_t)) / d
            } else {
                ((psi - chi_t).exp() - e_t) / d
            };
            s += du * term;
        }
        if t.norm() < r {
            s += e_t * cx(T::zero(), T::PI() * T::of(2.0));
        }
        s
    }

    /// `∮_L ∮_{ω_n} F̃ du dt` at the given level.
    fn double_integral(&self, xi: T, eta: T, level: usize) -> Result<Cx<T>> {
        let om = self.omega_level(level)?;
        let (xc, ec) = (xi * self.c, eta * self.c);
        let x0 = self.contours.z0.re;
        let psi_u = self.psi(om, xc);
        let bu = psi_u.iter().map(|p| p.re).fold(-T::infinity(), T::max);
        let _ = x0;
        let mut total = cx(T::zero(), T::zero());
        for k in 0..self.contours.loops.len() {
            for win in self.windows(k, ec, bu) {
                for (lo, hi) in self.panels(k, win, level) {
                    let (thetas, weights) = self.gl.on(lo, hi);
                    for (&th, &w) in thetas.iter().zip(&weights) {
                        let p = self.contours.point(k, th);
                        let ms_t = self.phase.scaled(p.z, self.m)?;
                        total += p.dz * w * self.inner(om, &psi_u, p.z, ms_t, xc, ec);
                    }
                }
            }
        }
        Ok(total)
    }

    fn stripped_at(&self, xi: T, eta: T, level: usize) -> Result<T> {
        let quad = self.double_integral(xi, eta, level)?;
        let scale = self.c / (T::PI() * T::PI() * T::of(4.0));
        Ok(self.residue_part(xi, eta) - scale * quad.re)
    }

    /// Doubles node counts until two levels agree to `rel_tol · c y0/π`.
    pub fn eval(&self, xi: T, eta: T) -> Result<LocalKernelValue<T>> {
        if !xi.is_finite() || !eta.is_finite() {
            return Err(invalid("kernel coordinates must be finite"));
        }
        let tol = T::of(self.settings.rel_tol) * self.rho();
        let mut prev = self.stripped_at(xi, eta, 0)?;
        let mut level = 1;
        loop {
            let n_omega = self.settings.n_omega << level;
            if n_omega > self.settings.max_n_omega {
                let v = self.finish(xi, eta, prev, T::infinity(), self.settings.n_omega << (level - 1), true);
                log::warn!("kernel at ({xi}, {eta}) did not self-converge by {} nodes", v.n_omega);
                return Ok(v);
            }
            let cur = self.stripped_at(xi, eta, level)?;
            let err = (cur - prev).abs();
            if err <= tol {
                return Ok(self.finish(xi, eta, cur, err, n_omega, false));
            }
            prev = cur;
            level += 1;
        }
    }

    /// Fixed-level evaluation without the convergence loop.
    pub fn eval_at_level(&self, xi: T, eta: T, level: usize) -> Result<LocalKernelValue<T>> {
        let v = self.stripped_at(xi, eta, level)?;
        Ok(self.finish(xi, eta, v, T::nan(), self.settings.n_omega << level, false))
    }

    fn finish(&self, xi: T, eta: T, stripped: T, err: T, n_omega: usize, flagged: bool) -> LocalKernelValue<T> {
        let alpha = self.alpha(xi, eta);
        LocalKernelValue { xi, eta, value: alpha * stripped, stripped, alpha, quadrature_error: err, n_omega, flagged }
    }

    /// Combined-contour identity: `∮_L ∮_{ω_n} − ∮_L ∮_{ω}` against its
    /// closed form, both divided by `α`.
    pub fn residue_check(&self, xi: T, eta: T) -> Result<ResidueCheck<T>> {
        let level = 3.min(self.omega.len() - 1);
        let outer = self.double_integral(xi, eta, level)?;
        let a1 = self.contours.equation().critical_points()[0];
        let count = self.settings.n_omega << level;
        let small = self.omega_nodes(count, a1 * T::of(0.9))?;
        let (xc, ec) = (xi * self.c, eta * self.c);
        let x0 = self.contours.z0.re;
        let psi_u = self.psi(&small, xc);
        let samples = count;
        let h = T::PI() * T::of(2.0) / T::of_usize(samples);
        let mut inner_total = cx(T::zero(), T::zero());
        let mut inner_abs = T::zero();
        for k in 0..self.contours.loops.len() {
            for j in 0..samples {
                let p = self.contours.point(k, h * (T::of_usize(j) + T::of(0.5)));
                let chi = self.phase.scaled(p.z, self.m)? + (p.z - x0) * ec;
                let scale = p.dz * h;
                for (q, (&u, &du)) in small.u.iter().zip(&small.du).enumerate() {
                    let term = scale * du * (psi_u[q] - chi).exp() / (u - p.z);
                    inner_total += term;
                    inner_abs += term.norm();
                }
            }
        }
        let numeric = outer - inner_total;
        let closed = T::PI() * T::of(4.0) / self.c * self.residue_part(xi, eta) * T::PI();
        let deviation = (numeric - closed).norm() / closed.abs();
        let cancellation = inner_abs / closed.abs();
        Ok(ResidueCheck { xi, eta, numeric_re: numeric.re, numeric_im: numeric.im, closed, deviation, cancellation })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidueCheck<T> {
    pub xi: T,
    pub eta: T,
    pub numeric_re: T,
    pub numeric_im: T,
    /// `4π c⁻¹ sin((ξ−η) y0 c)/(ξ−η)`.
    pub closed: T,
    /// Relative deviation.
    pub deviation: T,
    /// `Σ|terms|/|closed|` of the small-circle sum. Rounding in that sum
    /// alone contributes about `ε` times this to `deviation`, so values
    /// near `1e10` and beyond make the comparison meaningless in `f64`.
    pub cancellation: T,
}

/// `e^{(ξ−η) x0 c} sin((ξ−η) y0 c)/(π(ξ−η))` with `z0 = z_n(λ0)`.
pub fn closed_form_local<T: Real>(xi: T, eta: T, branch: &SaddleBranch<T>, lambda0: T, c_mn: T) -> Result<T> {
    let z0 = branch.equation().root_at(lambda0)?;
    let d = xi - eta;
    let alpha = (d * z0.re * c_mn).exp();
    if d == T::zero() {
        return Ok(c_mn * z0.im / T::PI());
    }
    Ok(alpha * (d * z0.im * c_mn).sin() / (T::PI() * d))
}

/// `det{(1/n) K_n(λ0 + ξ_i/n, λ0 + ξ_j/n)}`. With `keep_alpha = false` the
/// gauge factor is dropped, which leaves the determinant unchanged.
pub fn correlation_det<T: Real>(evaluator: &KernelEvaluator<T>, xis: &[T], keep_alpha: bool) -> Result<T> {
    if xis.is_empty() {
        return Err(invalid("correlation_det needs at least one point"));
    }
    for i in 0..xis.len() {
        for j in i + 1..xis.len() {
            if xis[i] == xis[j] {
                return Err(invalid(format!("duplicate local coordinate {}", xis[i])));
            }
        }
    }
    let k = xis.len();
    let mut mat = Square::zeros(k);
    for i in 0..k {
        for j in 0..k {
            let v = evaluator.eval(xis[i], xis[j])?;
            mat.set(i, j, if keep_alpha { v.value } else { v.stripped });
        }
    }
    Ok(mat.determinant())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelRow {
    pub xi: f64,
    pub eta: f64,
    pub kernel_value: f64,
    pub sine_limit: f64,
    pub abs_error: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniversalityReport {
    pub lambda0: f64,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub sup_error: f64,
    pub rows: Vec<KernelRow>,
}

/// `sup |K̃(ξ/ρ, η/ρ)/ρ − S(ξ − η)|` over the grid, with `ρ = c y0/π` and
/// `ξ, η` in units of the mean spacing.
pub fn universality_residual<T: Real>(evaluator: &KernelEvaluator<T>, grid: &[(T, T)]) -> Result<UniversalityReport> {
    let rho = evaluator.rho();
    let rows = grid
        .par_iter()
        .map(|&(xi, eta)| {
            let v = evaluator.eval(xi / rho, eta / rho)?;
            let kv = v.stripped / rho;
            let s = sine(xi - eta);
            Ok(KernelRow {
                xi: xi.as_f64(),
                eta: eta.as_f64(),
                kernel_value: kv.as_f64(),
                sine_limit: s.as_f64(),
                abs_error: (kv - s).abs().as_f64(),
                flagged: v.flagged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_error = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
    Ok(UniversalityReport {
        lambda0: evaluator.contours.lambda0.as_f64(),
        n: evaluator.n,
        m: evaluator.m,
        rho: rho.as_f64(),
        sup_error,
        rows,
    })
}

/// Square grid `{(ξ_i, ξ_j)}` with `|ξ_i − ξ_j| ≤ spread`.
pub fn local_grid(half_width: f64, step: f64, spread: f64) -> Vec<(f64, f64)> {
    let count = (2.0 * half_width / step).round() as i64;
    let pts: Vec<f64> = (0..=count).map(|k| -half_width + step * k as f64).collect();
    let mut out = Vec::new();
    for &a in &pts {
        for &b in &pts {
            if (a - b).abs() <= spread + 1e-12 {
                out.push((a, b));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // (1/n) K_n for Σ = I from the Laguerre Christoffel–Darboux sum
    // m Σ_{k<n} ψ_k(mλ) ψ_k(mμ), with ψ_k orthonormal for x^{m−n} e^{−x}.
    fn laguerre_kernel(n: usize, m: usize, lambda: f64, mu: f64) -> f64 {
        let a = (m - n) as f64;
        let psi = |x: f64| -> Vec<f64> {
            let ln_fact: f64 = (1..=(m - n)).map(|k| (k as f64).ln()).sum();
            let mut out = vec![0.0; n];
            out[0] = (0.5 * a * x.ln() - 0.5 * x - 0.5 * ln_fact).exp();
            if n > 1 {
                out[1] = (1.0 + a - x) * out[0] / (1.0 + a).sqrt();
            }
            for k in 1..n - 1 {
                let kf = k as f64;
                out[k + 1] = ((2.0 * kf + 1.0 + a - x) * out[k] - (kf * (kf + a)).sqrt() * out[k - 1])
                    / ((kf + 1.0) * (kf + 1.0 + a)).sqrt();
            }
            out
        };
        let (p, q) = (psi(m as f64 * lambda), psi(m as f64 * mu));
        m as f64 * p.iter().zip(&q).map(|(x, y)| x * y).sum::<f64>() / n as f64
    }

    #[test]
    fn laguerre_oracle_values() {
        assert!((laguerre_kernel(16, 32, 1.0, 1.0) - 0.419_488_541_03).abs() < 1e-10);
        assert!((laguerre_kernel(32, 64, 1.0, 1.0) - 0.424_765_354_25).abs() < 1e-10);
        assert!((laguerre_kernel(64, 128, 1.0, 1.0) - 0.419_765_846_20).abs() < 1e-10);
        let (x, e) = (0.7 / 32.0, -0.4 / 32.0);
        let prod = laguerre_kernel(32, 64, 1.0 + x, 1.0 + e) * laguerre_kernel(32, 64, 1.0 + e, 1.0 + x);
        assert!((prod - 0.084_862_692_921_0).abs() < 1e-10);
    }

    #[test]
    fn matches_laguerre_oracle() {
        for n in [16usize, 32, 64] {
            let ev = KernelEvaluator::new(&vec![1.0; n], 2 * n, 1.0).unwrap();
            let v = ev.eval(0.0, 0.0).unwrap();
            let want = laguerre_kernel(n, 2 * n, 1.0, 1.0);
            assert!(!v.flagged);
            assert!((v.value - want).abs() < 1e-5, "n={n}: {} vs {want}", v.value);
            assert_eq!(v.alpha, 1.0);
        }
        // The Christoffel–Darboux kernel is symmetric; the contour kernel is a
        // diagonal conjugation of it, so compare K(ξ,η)K(η,ξ).
        let ev = KernelEvaluator::new(&[1.0_f64; 32], 64, 1.0).unwrap();
        for (xi, eta) in [(0.7, -0.4), (1.5, 0.2), (-2.0, 1.0)] {
            let got = ev.eval(xi, eta).unwrap().value * ev.eval(eta, xi).unwrap().value;
            let (l, mu) = (1.0 + xi / 32.0, 1.0 + eta / 32.0);
            let want = laguerre_kernel(32, 64, l, mu) * laguerre_kernel(32, 64, mu, l);
            assert!((got - want).abs() < 1e-5, "({xi},{eta}): {got} vs {want}");
        }
        let got = ev.eval(0.7, -0.4).unwrap().value * ev.eval(-0.4, 0.7).unwrap().value;
        assert!((got - 0.084_862_692_921_0).abs() < 1e-5);
    }

    #[test]
    fn closed_form_examples() {
        let eq = SaddleEquation::<f64>::from_taus(&[1.0; 8], 2.0).unwrap();
        let br = build_branch(&eq, &default_grid(&eq, 1.0, 256)).unwrap();
        let v = closed_form_local(1.0, 0.0, &br, 1.0, 2.0).unwrap();
        // e^{1.5} sin(2 y0)/π with y0 = √7/4.
        assert!((v - 1.382_948_343_253_486).abs() < 1e-9, "{v}");
        let diag = closed_form_local(0.3, 0.3, &br, 1.0, 2.0).unwrap();
        assert!((diag - 2.0 * 0.661_437_827_766_147_8 / std::f64::consts::PI).abs() < 1e-12);
        let zero = std::f64::consts::PI / (0.661_437_827_766_147_8 * 2.0);
        assert!(closed_form_local(zero, 0.0, &br, 1.0, 2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn residue_identity_identity_sigma() {
        let ev = KernelEvaluator::new(&[1.0_f64; 32], 64, 1.0).unwrap();
        for d in [0.0, 0.5, 1.0, 2.0] {
            let r = ev.residue_check(0.3 + d, 0.3).unwrap();
            assert!(r.deviation < 1e-6, "ξ−η={d}: {r:?}");
        }
    }

    #[test]
    fn determinant_is_gauge_invariant() {
        let ev = KernelEvaluator::new(&[1.0_f64; 16], 32, 1.0).unwrap();
        let pts = [-0.9, 0.1, 0.8];
        let with = correlation_det(&ev, &pts, true).unwrap();
        let without = correlation_det(&ev, &pts, false).unwrap();
        assert!((with - without).abs() <= 1e-10 * with.abs().max(1e-3), "{with} vs {without}");
        let one = correlation_det(&ev, &[0.2], true).unwrap();
        assert!((one - ev.eval(0.2, 0.2).unwrap().value).abs() < 1e-14);
        assert!(correlation_det(&ev, &[0.2, 0.2], true).is_err());
        let close = correlation_det(&ev, &[0.2, 0.2 + 1e-4], true).unwrap();
        assert!(close.abs() < 1e-6);
    }

    #[test]
    fn diagonal_scale_and_flagging() {
        let ev = KernelEvaluator::new(&[1.0_f64; 64], 128, 1.0).unwrap();
        let v = ev.eval(0.0, 0.0).unwrap();
        assert!((v.value - 0.42109).abs() < 0.02);
        let p = ev.eval(0.5, -0.5).unwrap().value * ev.eval(-0.5, 0.5).unwrap().value;
        assert!(p >= 0.0);
        let coarse = KernelQuadrature { n_omega: 8, max_n_omega: 8, rel_tol: 1e-12, ..KernelQuadrature::default() };
        let cp = ev.contours().clone();
        let ph = ev.phase().clone();
        let ev2 = KernelEvaluator::from_contours(cp, ph, 64, 128, coarse).unwrap();
        assert!(ev2.eval(0.0, 0.0).unwrap().flagged);
    }
}
