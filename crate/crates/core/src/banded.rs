//! Banded factorizations: LU with partial pivoting (real or complex) and
//! Cholesky for symmetric positive definite matrices.
//!
//! Storage follows the LAPACK `gbtrf` layout: column `j` holds rows
//! `j - kl - ku ..= j + kl`, the extra `kl` super-diagonals absorbing fill
//! created by row interchanges.

use crate::error::{LabError, Result};
use crate::sparse::Csr;
use nalgebra::ComplexField;

#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<T>,
    piv: Vec<usize>,
}

impl<T> BandedLu<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    /// Factors the square matrix given by `(row, col, value)` entries.
    pub fn factor(n: usize, entries: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let entries: Vec<_> = entries.into_iter().collect();
        let (mut kl, mut ku) = (0usize, 0usize);
        for &(r, c, _) in &entries {
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            kv,
            ldab,
            ab: vec![T::from_real(0.0); ldab * n],
            piv: vec![0; n],
        };
        for (r, c, v) in entries {
            let idx = lu.idx(r, c);
            lu.ab[idx] += v;
        }
        lu.eliminate()?;
        Ok(lu)
    }

    /// Factors a real sparse matrix, lifting entries into `T`.
    pub fn from_csr(a: &Csr, map: impl Fn(usize, usize, f64) -> T) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        Self::factor(a.nrows(), a.triplets().map(|(r, c, v)| (r, c, map(r, c, v))))
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.kv >= j && i <= j + self.kl);
        j * self.ldab + self.kv + i - j
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let mut ju = 0usize;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut best = -1.0;
            for i in 0..=km {
                let m = self.ab[self.idx(j + i, j)].modulus();
                if m > best {
                    best = m;
                    jp = i;
                }
            }
            self.piv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(LabError::Singular { pivot: j });
            }
            ju = ju.max((j + self.kv - self.kl + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            let inv = T::from_real(1.0) / self.ab[self.idx(j, j)];
            for r in 1..=km {
                let k = self.idx(j + r, j);
                self.ab[k] *= inv;
            }
            for c in j + 1..=ju {
                let ujc = self.ab[self.idx(j, c)];
                if ujc == T::from_real(0.0) {
                    continue;
                }
                for r in 1..=km {
                    let l = self.ab[self.idx(j + r, j)];
                    let k = self.idx(j + r, c);
                    self.ab[k] -= l * ujc;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let p = self.piv[j];
            if p != j {
                b.swap(p, j);
            }
            let bj = b[j];
            for r in 1..=km {
                b[j + r] -= self.ab[self.idx(j + r, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(self.kv)..j {
                b[i] -= self.ab[self.idx(i, j)] * bj;
            }
        }
    }

    /// Solves `Aᴴ x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            let mut s = b[j];
            for i in j.saturating_sub(self.kv)..j {
                s -= self.ab[self.idx(i, j)].conjugate() * b[i];
            }
            b[j] = s / self.ab[self.idx(j, j)].conjugate();
        }
        for j in (0..n).rev() {
            let km = self.kl.min(n - 1 - j);
            let mut s = b[j];
            for r in 1..=km {
                s -= self.ab[self.idx(j + r, j)].conjugate() * b[j + r];
            }
            b[j] = s;
            let p = self.piv[j];
            if p != j {
                b.swap(p, j);
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_adjoint(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_adjoint_in_place(&mut x);
        x
    }
}

/// Upper banded Cholesky factor `R` with `A = Rᵀ R`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    kd: usize,
    // row-major upper band: r[i * (kd + 1) + (j - i)] = R(i, j) for i <= j <= i + kd
    r: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let (kl, ku) = a.bandwidths();
        let kd = kl.max(ku);
        let w = kd + 1;
        let mut r = vec![0.0; n * w];
        for (i, j, v) in a.triplets() {
            if j >= i {
                r[i * w + (j - i)] = v;
            }
        }
        for i in 0..n {
            let mut d = r[i * w];
            for k in i.saturating_sub(kd)..i {
                let rki = r[k * w + (i - k)];
                d -= rki * rki;
            }
            if !(d > 0.0) {
                return Err(LabError::Singular { pivot: i });
            }
            let d = d.sqrt();
            r[i * w] = d;
            for j in i + 1..(i + kd + 1).min(n) {
                let mut s = r[i * w + (j - i)];
                for k in j.saturating_sub(kd)..i {
                    s -= r[k * w + (i - k)] * r[k * w + (j - k)];
                }
                r[i * w + (j - i)] = s / d;
            }
        }
        Ok(BandedCholesky { n, kd, r })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.r[i * (self.kd + 1) + (j - i)]
    }

    fn hi(&self, i: usize) -> usize {
        (i + self.kd + 1).min(self.n)
    }

    /// `R x`.
    pub fn mul_r<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut s = T::from_real(0.0);
                for j in i..self.hi(i) {
                    s += x[j].scale(self.at(i, j));
                }
                s
            })
            .collect()
    }

    /// `Rᵀ x`.
    pub fn mul_rt<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::from_real(0.0); self.n];
        for i in 0..self.n {
            for j in i..self.hi(i) {
                y[j] += x[i].scale(self.at(i, j));
            }
        }
        y
    }

    /// Solves `R x = b` in place.
    pub fn solve_r<T: ComplexField<RealField = f64> + Copy>(&self, b: &mut [T]) {
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for j in i + 1..self.hi(i) {
                s -= b[j].scale(self.at(i, j));
            }
            b[i] = s.unscale(self.at(i, i));
        }
    }

    /// Solves `Rᵀ x = b` in place.
    pub fn solve_rt<T: ComplexField<RealField = f64> + Copy>(&self, b: &mut [T]) {
        for i in 0..self.n {
            let bi = b[i].unscale(self.at(i, i));
            b[i] = bi;
            for j in i + 1..self.hi(i) {
                b[j] -= bi.scale(self.at(i, j));
            }
        }
    }

    /// Solves `A x = b` for real `b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_rt(&mut x);
        self.solve_r(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn tridiag(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + i as f64 * 0.1));
            if i + 1 < n {
                t.push((i, i + 1, -1.0 - 0.05 * i as f64));
                t.push((i + 1, i, 2.5));
            }
            if i + 3 < n {
                t.push((i + 3, i, 0.7));
            }
        }
        Csr::from_triplets(n, n, &t)
    }

    #[test]
    fn lu_solves_match_dense_for_complex_shift() {
        let n = 12;
        let a = tridiag(n);
        let shift = Complex64::new(0.0, 3.0);
        let lu = BandedLu::from_csr(&a, |r, c, v| {
            if r == c {
                Complex64::new(v, 0.0) - shift
            } else {
                Complex64::new(v, 0.0)
            }
        })
        .unwrap();
        let dense = a.to_dense().map(|v| Complex64::new(v, 0.0))
            - DMatrix::<Complex64>::identity(n, n) * shift;
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let x = lu.solve(&b);
        let y = lu.solve_adjoint(&b);
        let bv = nalgebra::DVector::from_vec(b.clone());
        let rx = &dense * nalgebra::DVector::from_vec(x) - &bv;
        let ry = dense.adjoint() * nalgebra::DVector::from_vec(y) - &bv;
        assert!(rx.norm() < 1e-12 * bv.norm());
        assert!(ry.norm() < 1e-12 * bv.norm());
    }

    #[test]
    fn lu_pivots_on_zero_diagonal() {
        let a = Csr::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 2.0), (1, 1, 1.0)]);
        let lu = BandedLu::<f64>::from_csr(&a, |_, _, v| v).unwrap();
        let x = lu.solve(&[3.0, 4.0]);
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            BandedLu::<f64>::from_csr(&a, |_, _, v| v),
            Err(LabError::Singular { .. })
        ));
    }

    #[test]
    fn cholesky_reconstructs_and_solves() {
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 6.0));
            if i + 1 < n {
                t.push((i, i + 1, -4.0));
                t.push((i + 1, i, -4.0));
            }
            if i + 2 < n {
                t.push((i, i + 2, 1.0));
                t.push((i + 2, i, 1.0));
            }
        }
        let a = Csr::from_triplets(n, n, &t);
        let ch = BandedCholesky::factor(&a).unwrap();
        let mut r = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = ch.mul_r(&e);
            for i in 0..n {
                r[(i, j)] = col[i];
            }
        }
        let diff = r.transpose() * &r - a.to_dense();
        assert!(diff.norm() < 1e-12);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = ch.solve(&b);
        let res = a.mul_vec(&x);
        for i in 0..n {
            assert!((res[i] - b[i]).abs() < 1e-10);
        }
        let mut y = b.clone();
        ch.solve_rt(&mut y);
        let back = ch.mul_rt(&y);
        for i in 0..n {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
    }
}
