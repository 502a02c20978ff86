//! Numerical predicates for the steepest-descent properties of `L` and `ω`.
//!
//! Each predicate fits the constant its statement asserts to exist and
//! requires it to clear a margin of `1e-6`. Fitted constants are extremal
//! values of the sampled inequality rather than least-squares fits, so the
//! inequality holds at every sample by construction of the constant.

use serde::Serialize;

use super::branch::SaddleBranch;
use super::contour::ContourPair;
use super::phase::PhaseFn;
use crate::scalar::{cx, Cx, Real};

const MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct LemmaPredicate {
    pub id: char,
    pub name: &'static str,
    pub passed: bool,
    /// Fitted constant(s) or worst slack, depending on the predicate.
    pub constants: Vec<f64>,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub lambda0: f64,
    pub predicates: Vec<LemmaPredicate>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.predicates.iter().all(|p| p.passed)
    }
}

pub fn check_lemmas<T: Real>(branch: &SaddleBranch<T>, contours: &ContourPair<T>, phase: &PhaseFn<T>) -> LemmaReport {
    let eq = branch.equation();
    let lambda0 = contours.lambda0;
    let z0 = contours.z0;
    let x0 = z0.re;
    let lp = contours.loops[contours.main_loop];
    let mut preds = Vec::new();

    // (a) Re S ≥ 0 along the branch, zero at λ0, increasing away from λ0.
    {
        let re: Vec<T> = branch.z.iter().map(|&z| phase.re(z)).collect();
        let min = re.iter().copied().fold(T::infinity(), T::min);
        let argmin = branch.lambdas[re.iter().position(|&v| v == min).unwrap_or(0)];
        let tol = |v: T| T::of(1e-12) * (T::one() + v.abs());
        let mut worst = T::zero();
        for k in 1..re.len() {
            let (l0, l1) = (branch.lambdas[k - 1], branch.lambdas[k]);
            let step = re[k] - re[k - 1];
            // Above λ0 Re S must not decrease; below it must not increase.
            let bad = if l0 >= lambda0 { -step - tol(re[k]) } else if l1 <= lambda0 { step - tol(re[k]) } else { T::zero() };
            worst = worst.max(bad);
        }
        let spacing = branch.lambdas.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max);
        let passed = min >= -T::of(1e-12) && worst <= T::zero() && (argmin - lambda0).abs() <= spacing;
        preds.push(LemmaPredicate {
            id: 'a',
            name: "Re S nonnegative on L, minimal at lambda0, monotone on each side",
            passed,
            constants: vec![min.as_f64()],
            margin: min.as_f64() + 1e-12,
            detail: format!("min Re S = {min:e} at lambda = {argmin}; worst monotonicity violation {worst:e}"),
        });
    }

    // (b) Re S(u) ≤ −C (Re u − x0)² on ω.
    {
        let n = 4096;
        let (u, _) = contours.omega_nodes(n, contours.radius);
        let skip = T::of(1e-4) * contours.radius;
        let mut c_fit = T::infinity();
        let mut max_re = -T::infinity();
        for &p in &u {
            let r = phase.re(p);
            max_re = max_re.max(r);
            let dx = p.re - x0;
            if dx.abs() >= skip {
                c_fit = c_fit.min(-r / (dx * dx));
            }
        }
        let passed = c_fit >= T::of(MARGIN) && max_re <= T::of(1e-10);
        preds.push(LemmaPredicate {
            id: 'b',
            name: "Re S(u) <= -C (Re u - x0)^2 on omega",
            passed,
            constants: vec![c_fit.as_f64()],
            margin: c_fit.as_f64() - MARGIN,
            detail: format!("C = {c_fit:e}, max Re S on omega = {max_re:e}"),
        });
    }

    // λ window around λ0 inside the bulk interval of the main loop.
    let lam_hi = eq.v_real(lp.a);
    let lam_lo = eq.v_real(lp.b);
    let delta = T::of(0.25) * (lambda0 - lam_lo).min(lam_hi - lambda0);

    // (c) 0 < C1 < x_n(λ) and |z_n(λ)| < C2 on the window.
    {
        let mut c1 = T::infinity();
        let mut c2 = T::zero();
        for (&l, &z) in branch.lambdas.iter().zip(&branch.z) {
            if (l - lambda0).abs() <= delta {
                c1 = c1.min(z.re);
                c2 = c2.max(z.norm());
            }
        }
        let passed = c1 >= T::of(MARGIN) && c2.is_finite();
        preds.push(LemmaPredicate {
            id: 'c',
            name: "x_n bounded below and |z_n| bounded above near lambda0",
            passed,
            constants: vec![c1.as_f64(), c2.as_f64()],
            margin: c1.as_f64() - MARGIN,
            detail: format!("window |lambda - lambda0| <= {delta}: C1 = {c1}, C2 = {c2}"),
        });
    }

    // (d) l(x2) − l(x1) ≤ C √(x2 − x1) along the upper arc.
    {
        let mut arc: Vec<Cx<T>> = branch
            .z
            .iter()
            .copied()
            .filter(|z| z.re >= lp.a && z.re <= lp.b)
            .collect();
        arc.push(cx(lp.a, T::zero()));
        arc.push(cx(lp.b, T::zero()));
        arc.sort_by(|p, q| p.re.partial_cmp(&q.re).expect("finite"));
        let mut len = vec![T::zero(); arc.len()];
        for k in 1..arc.len() {
            len[k] = len[k - 1] + (arc[k] - arc[k - 1]).norm();
        }
        let mut c = T::zero();
        for i in 0..arc.len() {
            for j in i + 1..arc.len() {
                let dx = arc[j].re - arc[i].re;
                if dx > T::zero() {
                    c = c.max((len[j] - len[i]) / dx.sqrt());
                }
            }
        }
        let cap = T::of(1e4);
        let passed = c.is_finite() && c > T::zero() && c <= cap;
        preds.push(LemmaPredicate {
            id: 'd',
            name: "arc length of L grows at most like sqrt of abscissa increment",
            passed,
            constants: vec![c.as_f64()],
            margin: (cap - c).as_f64(),
            detail: format!("C = {c} over {} arc points", arc.len()),
        });
    }

    // (e) L stays away from ω outside a δ-window of x0.
    {
        let window = T::of(0.05) * (lp.b - lp.a);
        let mut dist = T::infinity();
        for poly in &contours.polyline {
            for &p in poly {
                if (p.re - x0).abs() >= window {
                    dist = dist.min(contours.distance_to_omega(p));
                }
            }
        }
        let passed = dist >= T::of(MARGIN);
        preds.push(LemmaPredicate {
            id: 'e',
            name: "L keeps a positive distance from omega away from z0",
            passed,
            constants: vec![window.as_f64(), dist.as_f64()],
            margin: dist.as_f64() - MARGIN,
            detail: format!("|x - x0| >= {window}: min distance {dist:e}"),
        });
    }

    // (f) and (g): finite differences in λ around λ0.
    let h = T::of(1e-3) * delta.min(T::one()).max(T::of(1e-3));
    let mut dx_abs = Vec::new();
    let mut d2 = Vec::new();
    let mut fd_ok = true;
    for k in -2i32..=2 {
        let l = lambda0 + h * T::of(f64::from(k)) * T::of(10.0);
        let roots = [l - h, l, l + h].map(|v| eq.root_at(v));
        match roots {
            [Ok(a), Ok(b), Ok(c)] => {
                dx_abs.push(((c.re - a.re) / (h * T::of(2.0))).abs());
                let s = |z: Cx<T>| -phase.re(z);
                d2.push((s(a) - T::of(2.0) * s(b) + s(c)) / (h * h));
            }
            _ => fd_ok = false,
        }
    }
    {
        let c1 = dx_abs.iter().copied().fold(T::infinity(), T::min);
        let c2 = dx_abs.iter().copied().fold(T::zero(), T::max);
        let analytic = eq.dv(z0).inv().re.abs();
        let passed = fd_ok && c1 >= T::of(MARGIN) && c2.is_finite();
        preds.push(LemmaPredicate {
            id: 'f',
            name: "|x_n'(lambda)| bounded between positive constants near lambda0",
            passed,
            constants: vec![c1.as_f64(), c2.as_f64()],
            margin: c1.as_f64() - MARGIN,
            detail: format!("finite differences in [{c1}, {c2}]; analytic |Re 1/V'(z0)| = {analytic}"),
        });
    }
    {
        let worst = d2.iter().copied().fold(-T::infinity(), T::max);
        let analytic = -eq.dv(z0).inv().re;
        let passed = fd_ok && worst <= -T::of(MARGIN);
        preds.push(LemmaPredicate {
            id: 'g',
            name: "-Re S(z_n(lambda)) strictly concave in lambda near lambda0",
            passed,
            constants: vec![(-worst).as_f64(), d2.get(2).map_or(f64::NAN, |v| (-*v).as_f64())],
            margin: (-worst).as_f64() - MARGIN,
            detail: format!("max second difference {worst:e}; analytic value at lambda0 {:e}", -analytic),
        });
    }

    LemmaReport { lambda0: lambda0.as_f64(), predicates: preds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle_contour::{build_branch, build_contours, default_grid, SaddleEquation};

    #[test]
    fn identity_passes_all_predicates() {
        let eq = SaddleEquation::from_taus(&[1.0; 8], 2.0).unwrap();
        let br = build_branch(&eq, &default_grid(&eq, 1.0, 1024)).unwrap();
        let cp = build_contours(&br, 1.0).unwrap();
        let ph = PhaseFn::new(&eq, 1.0, cp.z0).unwrap();
        let rep = check_lemmas(&br, &cp, &ph);
        assert!(rep.all_passed(), "{rep:#?}");
        // d²(Re S)/dλ² at λ0 equals Re(−1/V'(z0)) = 1/4 for this case.
        let g = rep.predicates.iter().find(|p| p.id == 'g').unwrap();
        assert!((g.constants[1] - 0.25).abs() < 1e-5, "{}", g.constants[1]);
    }
}
