//! Dense complex matrices and a Hermitian eigensolver.
//!
//! The exact-evolution oracle and the spectral Fisher information work on
//! `(N+1) x (N+1)` Dicke-basis matrices, at most a few hundred rows.  A
//! cyclic complex Jacobi iteration is unconditionally stable at these sizes
//! and keeps the eigenvector matrix unitary to rounding, which is what the
//! matrix exponentials need.

use num_complex::Complex64;

use crate::{Error, Result};

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![Complex64::ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// Rank-one matrix `v v^dagger`.
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        Self::from_fn(n, |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Elementwise map with access to the index pair, in place.
    pub fn map_indexed(&mut self, mut f: impl FnMut(usize, usize, Complex64) -> Complex64) {
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.data[i * self.n + j];
                self.data[i * self.n + j] = f(i, j, v);
            }
        }
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::ZERO {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * row[j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.n, v.len());
        let n = self.n;
        let mut out = vec![Complex64::ZERO; n];
        for i in 0..n {
            let mut acc = Complex64::ZERO;
            for j in 0..n {
                acc += self.data[i * n + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.n;
        CMat::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        CMat {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_mul(&self, other: &CMat) -> Complex64 {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = Complex64::ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.data[i * n + j] * other.data[j * n + i];
            }
        }
        acc
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_hermiticity_violation(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Commutator `[a, b] = ab - ba`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.mul(b).sub(&b.mul(a))
}

/// Anticommutator `{a, b} = ab + ba`.
pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a.mul(b).add(&b.mul(a))
}

/// Eigendecomposition of a Hermitian matrix.
///
/// `values` are sorted descending; column `k` of `vectors` is the unit
/// eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermEigen {
    /// Reassembles `f(A) = V f(Lambda) V^dagger` for a scalar spectral map.
    pub fn apply_spectral(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = CMat::zeros(n);
        for k in 0..n {
            let fk = f(self.values[k]);
            if fk == Complex64::ZERO {
                continue;
            }
            for i in 0..n {
                let vik = v.get(i, k) * fk;
                for j in 0..n {
                    let add = vik * v.get(j, k).conj();
                    out.set(i, j, out.get(i, j) + add);
                }
            }
        }
        out
    }
}

/// Cyclic complex Jacobi iteration for a Hermitian matrix.
///
/// Each off-diagonal element is annihilated by a phase rotation that reduces
/// the 2x2 subproblem to the real symmetric case.  Returns an error if the
/// input is not Hermitian to `1e-10` of its scale.
pub fn hermitian_eigen(a: &CMat) -> Result<HermEigen> {
    let n = a.dim();
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    if a.max_hermiticity_violation() > 1e-10 * scale.max(1.0) {
        return Err(Error::InvalidParameter(
            "matrix is not Hermitian within tolerance".into(),
        ));
    }

    let mut m = a.clone();
    // Force exact Hermitian symmetry so the iteration sees real diagonals.
    for i in 0..n {
        let d = m.get(i, i);
        m.set(i, i, Complex64::new(d.re, 0.0));
        for j in (i + 1)..n {
            let s = 0.5 * (m.get(i, j) + m.get(j, i).conj());
            m.set(i, j, s);
            m.set(j, i, s.conj());
        }
    }
    let mut v = CMat::identity(n);
    let tol = 1e-15 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j).norm_sqr();
            }
        }
        if off.sqrt() <= tol * (n as f64) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let r = apq.norm();
                if r <= tol {
                    continue;
                }
                let w = apq / r; // unit phase of the off-diagonal element
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // The rotation U is the phase map diag(1, conj(w)) followed by
                // a real Givens rotation; A <- U^dagger A U applied as the
                // column transform A U, then the row transform U^dagger (AU).
                let sw = s * w;
                let swc = s * w.conj();
                let cw = c * w;
                let cwc = c * w.conj();
                for i in 0..n {
                    let aip = m.get(i, p);
                    let aiq = m.get(i, q);
                    m.set(i, p, c * aip - swc * aiq);
                    m.set(i, q, s * aip + cwc * aiq);
                }
                for j in 0..n {
                    let apj = m.get(p, j);
                    let aqj = m.get(q, j);
                    m.set(p, j, c * apj - sw * aqj);
                    m.set(q, j, s * apj + cw * aqj);
                }
                m.set(p, q, Complex64::ZERO);
                m.set(q, p, Complex64::ZERO);
                m.set(p, p, Complex64::new(m.get(p, p).re, 0.0));
                m.set(q, q, Complex64::new(m.get(q, q).re, 0.0));

                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - swc * viq);
                    v.set(i, q, s * vip + cwc * viq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).re.partial_cmp(&m.get(i, i).re).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| m.get(k, k).re).collect();
    let vectors = CMat::from_fn(n, |i, j| v.get(i, order[j]));
    Ok(HermEigen { values, vectors })
}
