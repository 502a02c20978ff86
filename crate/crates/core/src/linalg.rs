//! Small dense real linear algebra: determinants and nonsymmetric eigenvalues.
//!
//! These routines serve the Nyström determinants and the secular companion
//! matrix of the saddle equation, both of modest size.

use crate::error::{LabError, Result};
use crate::scalar::{cx, Cx, Real};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Square<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Square<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.n + j]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.n {
                self.data.swap(a * self.n + j, b * self.n + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.n {
                self.data.swap(i * self.n + a, i * self.n + b);
            }
        }
    }

    /// Determinant by LU with partial pivoting. Consumes the matrix.
    pub fn determinant(mut self) -> T {
        let n = self.n;
        let mut det = T::one();
        for k in 0..n {
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..n {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() {
                return T::zero();
            }
            if p != k {
                self.swap_rows(p, k);
                det = -det;
            }
            let pivot = self.get(k, k);
            det *= pivot;
            for i in k + 1..n {
                let f = self.get(i, k) / pivot;
                if f != T::zero() {
                    for j in k + 1..n {
                        let v = self.get(k, j);
                        *self.at(i, j) -= f * v;
                    }
                }
            }
        }
        det
    }

    /// All eigenvalues of a general real matrix (balance, Hessenberg
    /// reduction, Francis double-shift QR). Order is unspecified.
    pub fn eigenvalues(mut self) -> Result<Vec<Cx<T>>> {
        self.balance();
        self.reduce_to_hessenberg();
        self.hessenberg_qr()
    }

    fn balance(&mut self) {
        let n = self.n;
        let radix = T::of(2.0);
        let sqrdx = radix * radix;
        let mut done = false;
        while !done {
            done = true;
            for i in 0..n {
                let mut r = T::zero();
                let mut c = T::zero();
                for j in 0..n {
                    if j != i {
                        c += self.get(j, i).abs();
                        r += self.get(i, j).abs();
                    }
                }
                if c != T::zero() && r != T::zero() {
                    let mut g = r / radix;
                    let mut f = T::one();
                    let s = c + r;
                    while c < g {
                        f *= radix;
                        c *= sqrdx;
                    }
                    g = r * radix;
                    while c > g {
                        f /= radix;
                        c /= sqrdx;
                    }
                    if (c + r) / f < T::of(0.95) * s {
                        done = false;
                        let g = T::one() / f;
                        for j in 0..n {
                            *self.at(i, j) *= g;
                        }
                        for j in 0..n {
                            *self.at(j, i) *= f;
                        }
                    }
                }
            }
        }
    }

    fn reduce_to_hessenberg(&mut self) {
        let n = self.n;
        for m in 1..n.saturating_sub(1) {
            let mut x = T::zero();
            let mut piv = m;
            for j in m..n {
                if self.get(j, m - 1).abs() > x.abs() {
                    x = self.get(j, m - 1);
                    piv = j;
                }
            }
            if piv != m {
                self.swap_rows(piv, m);
                self.swap_cols(piv, m);
            }
            if x != T::zero() {
                for i in m + 1..n {
                    let mut y = self.get(i, m - 1);
                    if y != T::zero() {
                        y /= x;
                        self.set(i, m - 1, y);
                        for j in m..n {
                            let v = self.get(m, j);
                            *self.at(i, j) -= y * v;
                        }
                        for j in 0..n {
                            let v = self.get(j, i);
                            *self.at(j, m) += y * v;
                        }
                    }
                }
            }
        }
        for i in 2..n {
            for j in 0..i - 1 {
                self.set(i, j, T::zero());
            }
        }
    }

    fn hessenberg_qr(&mut self) -> Result<Vec<Cx<T>>> {
        let n = self.n;
        let eps = T::epsilon();
        let mut wr = vec![cx(T::zero(), T::zero()); n];
        let mut anorm = T::zero();
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                anorm += self.get(i, j).abs();
            }
        }
        let mut nn = n as isize - 1;
        let mut t = T::zero();
        let half = T::of(0.5);
        while nn >= 0 {
            let mut its = 0usize;
            loop {
                let nu = nn as usize;
                let mut l = nu;
                while l > 0 {
                    let mut s = self.get(l - 1, l - 1).abs() + self.get(l, l).abs();
                    if s == T::zero() {
                        s = anorm;
                    }
                    if self.get(l, l - 1).abs() <= eps * s {
                        self.set(l, l - 1, T::zero());
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.get(nu, nu);
                if l == nu {
                    wr[nu] = cx(x + t, T::zero());
                    nn -= 1;
                } else {
                    let mut y = self.get(nu - 1, nu - 1);
                    let mut w = self.get(nu, nu - 1) * self.get(nu - 1, nu);
                    if l == nu - 1 {
                        let p = half * (y - x);
                        let q = p * p + w;
                        let mut z = q.abs().sqrt();
                        x += t;
                        if q >= T::zero() {
                            z = p + if p >= T::zero() { z } else { -z };
                            wr[nu - 1] = cx(x + z, T::zero());
                            wr[nu] = cx(x + z, T::zero());
                            if z != T::zero() {
                                wr[nu] = cx(x - w / z, T::zero());
                            }
                        } else {
                            wr[nu] = cx(x + p, -z);
                            wr[nu - 1] = cx(x + p, z);
                        }
                        nn -= 2;
                    } else {
                        if its == 60 {
                            return Err(LabError::NoConvergence {
                                what: "Hessenberg QR",
                                iterations: its,
                                residual: self.get(nu, nu - 1).abs().as_f64(),
                            });
                        }
                        if its == 10 || its == 20 || its == 40 {
                            t += x;
                            for i in 0..=nu {
                                *self.at(i, i) -= x;
                            }
                            let s = self.get(nu, nu - 1).abs() + self.get(nu - 1, nu - 2).abs();
                            x = T::of(0.75) * s;
                            y = x;
                            w = T::of(-0.4375) * s * s;
                        }
                        its += 1;
                        let (mut p, mut q, mut r);
                        let mut m = nu - 2;
                        loop {
                            let z = self.get(m, m);
                            let rr = x - z;
                            let ss = y - z;
                            p = (rr * ss - w) / self.get(m + 1, m) + self.get(m, m + 1);
                            q = self.get(m + 1, m + 1) - z - rr - ss;
                            r = self.get(m + 2, m + 1);
                            let s = p.abs() + q.abs() + r.abs();
                            p /= s;
                            q /= s;
                            r /= s;
                            if m == l {
                                break;
                            }
                            let u = self.get(m, m - 1).abs() * (q.abs() + r.abs());
                            let v = p.abs()
                                * (self.get(m - 1, m - 1).abs()
                                    + z.abs()
                                    + self.get(m + 1, m + 1).abs());
                            if u <= eps * v {
                                break;
                            }
                            m -= 1;
                        }
                        for i in m..nu - 1 {
                            self.set(i + 2, i, T::zero());
                            if i != m {
                                self.set(i + 2, i - 1, T::zero());
                            }
                        }
                        let mut k = m;
                        while k < nu {
                            if k != m {
                                p = self.get(k, k - 1);
                                q = self.get(k + 1, k - 1);
                                r = T::zero();
                                if k + 1 != nu {
                                    r = self.get(k + 2, k - 1);
                                }
                                x = p.abs() + q.abs() + r.abs();
                                if x != T::zero() {
                                    p /= x;
                                    q /= x;
                                    r /= x;
                                }
                            }
                            let norm = (p * p + q * q + r * r).sqrt();
                            let s = if p >= T::zero() { norm } else { -norm };
                            if s != T::zero() {
                                if k == m {
                                    if l != m {
                                        let v = self.get(k, k - 1);
                                        self.set(k, k - 1, -v);
                                    }
                                } else {
                                    self.set(k, k - 1, -s * x);
                                }
                                p += s;
                                x = p / s;
                                y = q / s;
                                let z = r / s;
                                q /= p;
                                r /= p;
                                for j in k..=nu {
                                    let mut pp = self.get(k, j) + q * self.get(k + 1, j);
                                    if k + 1 != nu {
                                        pp += r * self.get(k + 2, j);
                                        *self.at(k + 2, j) -= pp * z;
                                    }
                                    *self.at(k + 1, j) -= pp * y;
                                    *self.at(k, j) -= pp * x;
                                }
                                let mmin = if nu < k + 3 { nu } else { k + 3 };
                                for i in l..=mmin {
                                    let mut pp = x * self.get(i, k) + y * self.get(i, k + 1);
                                    if k + 1 != nu {
                                        pp += z * self.get(i, k + 2);
                                        *self.at(i, k + 2) -= pp * r;
                                    }
                                    *self.at(i, k + 1) -= pp * q;
                                    *self.at(i, k) -= pp;
                                }
                            }
                            k += 1;
                        }
                    }
                }
                if nn < 0 || l + 1 >= nn as usize {
                    break;
                }
            }
        }
        Ok(wr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Cx<f64>>) -> Vec<Cx<f64>> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn determinant_of_known_matrix() {
        let a = Square::<f64>::from_fn(3, |i, j| [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]][i][j]);
        assert!((a.determinant() - 4.0).abs() < 1e-14);
        let p = Square::<f64>::from_fn(2, |i, j| [[0.0, 1.0], [1.0, 0.0]][i][j]);
        assert!((p.determinant() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_of_triangular_matrix() {
        let a = Square::from_fn(4, |i, j| if j >= i { (i + 1) as f64 + 0.1 * j as f64 } else { 0.0 });
        let ev = sorted_re(a.eigenvalues().unwrap());
        let diag = [1.0, 2.1, 3.2, 4.3];
        for (e, d) in ev.iter().zip(diag) {
            assert!((e.re - d).abs() < 1e-12 && e.im.abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_of_rotation_block() {
        let a = Square::from_fn(2, |i, j| [[0.0, -2.0], [2.0, 0.0]][i][j]);
        let ev = sorted_re(a.eigenvalues().unwrap());
        assert!((ev[0].im.abs() - 2.0).abs() < 1e-14);
        assert!((ev[0] - ev[1].conj()).norm() < 1e-14);
    }

    #[test]
    fn companion_of_cubic() {
        // (z-1)(z-2)(z^2+1) = z^4 - 3z^3 + 3z^2 - 3z + 2
        let c = [-2.0, 3.0, -3.0, 3.0];
        let a = Square::from_fn(4, |i, j| {
            if i == 0 {
                c[3 - j]
            } else if j + 1 == i {
                1.0
            } else {
                0.0
            }
        });
        let ev = sorted_re(a.eigenvalues().unwrap());
        let want = [cx(0.0, -1.0), cx(0.0, 1.0), cx(1.0, 0.0), cx(2.0, 0.0)];
        for (e, w) in ev.iter().zip(want) {
            assert!((e - w).norm() < 1e-12, "{e} vs {w}");
        }
    }

    #[test]
    fn trace_and_determinant_are_preserved() {
        let n = 12;
        let a = Square::from_fn(n, |i, j| (((i * 31 + j * 17) % 23) as f64 - 11.0) / 7.0);
        let tr: f64 = (0..n).map(|i| a.get(i, i)).sum();
        let det = a.clone().determinant();
        let ev = a.eigenvalues().unwrap();
        let s: Cx<f64> = ev.iter().sum();
        let p: Cx<f64> = ev.iter().product();
        assert!((s.re - tr).abs() < 1e-10 && s.im.abs() < 1e-10);
        assert!((p.re - det).abs() < 1e-8 * det.abs().max(1.0));
    }
}
