//! Symmetric banded matrices and their direct factorizations.
//!
//! Interior dofs of the structured grids are numbered in natural order, so
//! every assembled operator is banded and the band holds all fill-in.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric matrix storing the lower band `max(0, i - bw) <= j <= i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBandMatrix<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Real> SymBandMatrix<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBandMatrix { n, bw, data: vec![T::zero(); n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to `(i, j)` (and implicitly to `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn add_diagonal(&mut self, d: &[T]) {
        for (i, &v) in d.iter().enumerate() {
            self.add(i, i, v);
        }
    }

    /// `self + c * other`, same shape.
    pub fn axpy(&self, c: T, other: &Self) -> Self {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + c * b).collect();
        SymBandMatrix { n: self.n, bw: self.bw, data }
    }

    pub fn scaled(&self, c: T) -> Self {
        SymBandMatrix { n: self.n, bw: self.bw, data: self.data.iter().map(|&a| a * c).collect() }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![T::zero(); self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..i {
                let a = self.data[self.idx(i, j)];
                y[i] = y[i] + a * x[j];
                y[j] = y[j] + a * x[i];
            }
            y[i] = y[i] + self.data[self.idx(i, i)] * x[i];
        }
        y
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[T]) -> T {
        dot(x, &self.matvec(x))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn cholesky(&self) -> Result<BandCholesky<T>> {
        BandCholesky::factor(self)
    }

    pub fn ldlt(&self) -> Result<BandLdlt<T>> {
        BandLdlt::factor(self)
    }
}

/// `A = L L^T` restricted to the band.
#[derive(Clone, Debug)]
pub struct BandCholesky<T> {
    l: SymBandMatrix<T>,
}

impl<T: Real> BandCholesky<T> {
    pub fn factor(a: &SymBandMatrix<T>) -> Result<Self> {
        let mut l = a.clone();
        let (n, bw) = (a.n, a.bw);
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut d = l.data[l.idx(j, j)];
            for k in k0..j {
                let ljk = l.data[l.idx(j, k)];
                d = d - ljk * ljk;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d.to_f64_lossy() });
            }
            let djj = d.sqrt();
            let kjj = l.idx(j, j);
            l.data[kjj] = djj;
            for i in j + 1..(j + bw + 1).min(n) {
                let k0 = i.saturating_sub(bw);
                let mut s = l.data[l.idx(i, j)];
                for k in k0..j {
                    s = s - l.data[l.idx(i, k)] * l.data[l.idx(j, k)];
                }
                let kij = l.idx(i, j);
                l.data[kij] = s / djj;
            }
        }
        Ok(BandCholesky { l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s = s - l.data[l.idx(i, k)] * x[k];
            }
            x[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s = s - l.data[l.idx(k, i)] * x[k];
            }
            x[i] = s / l.data[l.idx(i, i)];
        }
        x
    }
}

/// `A = L D L^T` without pivoting, for symmetric indefinite systems.
#[derive(Clone, Debug)]
pub struct BandLdlt<T> {
    l: SymBandMatrix<T>,
    d: Vec<T>,
}

impl<T: Real> BandLdlt<T> {
    pub fn factor(a: &SymBandMatrix<T>) -> Result<Self> {
        let (n, bw) = (a.n, a.bw);
        let mut l = a.clone();
        let mut d = vec![T::zero(); n];
        let scale = a.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::from_usize(n.max(1)).unwrap();
        for j in 0..n {
            let mut dj = l.data[l.idx(j, j)];
            for k in j.saturating_sub(bw)..j {
                let ljk = l.data[l.idx(j, k)];
                dj = dj - ljk * ljk * d[k];
            }
            if dj.abs() <= tiny || !dj.is_finite() {
                return Err(Error::SingularMatrix { pivot: j });
            }
            d[j] = dj;
            let kjj = l.idx(j, j);
            l.data[kjj] = T::one();
            for i in j + 1..(j + bw + 1).min(n) {
                let mut s = l.data[l.idx(i, j)];
                for k in i.saturating_sub(bw)..j {
                    s = s - l.data[l.idx(i, k)] * l.data[l.idx(j, k)] * d[k];
                }
                let kij = l.idx(i, j);
                l.data[kij] = s / dj;
            }
        }
        Ok(BandLdlt { l, d })
    }

    /// Number of negative pivots, i.e. negative eigenvalues (Sylvester).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < T::zero()).count()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s = s - l.data[l.idx(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] = x[i] / self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s = s - l.data[l.idx(k, i)] * x[k];
            }
            x[i] = s;
        }
        x
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, bw: usize, seed: u64) -> SymBandMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SymBandMatrix::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, rng.gen_range(-1.0..1.0));
            }
            a.add(i, i, 2.0 * bw as f64 + 1.0);
        }
        a
    }

    #[test]
    fn cholesky_solves_banded_system() {
        let a = random_spd(40, 5, 1);
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec(&x);
        let sol = a.cholesky().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn ldlt_handles_indefinite_and_counts_inertia() {
        let mut a = SymBandMatrix::<f64>::zeros(3, 1);
        a.add(0, 0, 2.0);
        a.add(1, 0, 1.0);
        a.add(1, 1, -3.0);
        a.add(2, 1, 0.5);
        a.add(2, 2, 1.0);
        assert!(a.cholesky().is_err());
        let f = a.ldlt().unwrap();
        assert_eq!(f.negative_pivots(), 1);
        let x = [1.0, -2.0, 0.25];
        let sol = f.solve(&a.matvec(&x));
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-13);
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let a = random_spd(12, 3, 7);
        let d = a.to_dense();
        let x: Vec<f64> = (0..12).map(|i| i as f64 - 5.0).collect();
        let y = a.matvec(&x);
        for i in 0..12 {
            let e: f64 = (0..12).map(|j| d[i][j] * x[j]).sum();
            assert!((y[i] - e).abs() < 1e-12);
            for j in 0..12 {
                assert_eq!(d[i][j], d[j][i]);
            }
        }
    }
}
