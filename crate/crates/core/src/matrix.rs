//! Small dense square matrices, row-major.

use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Matrix {
    pub fn zeros(n: usize) -> Matrix {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(Matrix { n, data })
    }

    /// Panics on ragged or non-square input; intended for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Matrix {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "from_rows expects a square matrix");
            data.extend_from_slice(r);
        }
        Matrix { n, data }
    }

    pub fn from_diag(d: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for p in 0..n {
                let a = self[(i, p)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[p * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, v.len(), "mul_vec dimension mismatch");
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `⟨A, B⟩ = tr(A Bᵀ)`.
    pub fn inner(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `max |A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `max |UᵀU - I|`.
    pub fn orthogonality_deviation(&self) -> f64 {
        let g = self.transpose().matmul(self);
        g.sub(&Matrix::identity(self.n)).max_abs()
    }

    pub fn check_orthogonal(&self, tol: f64) -> Result<()> {
        let deviation = self.orthogonality_deviation();
        if deviation > tol {
            return Err(Error::NotOrthogonal { deviation });
        }
        Ok(())
    }

    pub fn random_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
        Matrix {
            n,
            data: (0..n * n).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    /// `(G + Gᵀ)/2` for a standard Gaussian `G`.
    pub fn random_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
        let g = Matrix::random_gaussian(n, rng);
        Matrix::from_fn(n, |i, j| 0.5 * (g[(i, j)] + g[(j, i)]))
    }

    /// Haar-distributed orthogonal matrix: the `Q` factor of a Gaussian
    /// matrix with the signs of `diag(R)` absorbed into `Q`.
    pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
        if n == 1 {
            let g: f64 = rng.sample(StandardNormal);
            return Matrix::from_diag(&[if g < 0.0 { -1.0 } else { 1.0 }]);
        }
        loop {
            let g = Matrix::random_gaussian(n, rng);
            if let Some(q) = qr_q_positive_r(&g) {
                return q;
            }
        }
    }
}

/// Householder QR; returns `Q` normalised so that `R` has a positive diagonal.
/// `None` if `a` is numerically rank deficient.
fn qr_q_positive_r(a: &Matrix) -> Option<Matrix> {
    let n = a.dim();
    let mut r = a.clone();
    let mut q = Matrix::identity(n);
    for col in 0..n {
        let norm: f64 = (col..n).map(|i| r[(i, col)].powi(2)).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return None;
        }
        let alpha = if r[(col, col)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (0..n)
            .map(|i| if i < col { 0.0 } else { r[(i, col)] })
            .collect();
        v[col] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // r <- (I - 2vvᵀ/vᵀv) r,  q <- q (I - 2vvᵀ/vᵀv)
        for j in 0..n {
            let dot: f64 = (col..n).map(|i| v[i] * r[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in col..n {
                r[(i, j)] -= f * v[i];
            }
        }
        for i in 0..n {
            let dot: f64 = (col..n).map(|j| q[(i, j)] * v[j]).sum();
            let f = 2.0 * dot / vnorm2;
            for j in col..n {
                q[(i, j)] -= f * v[j];
            }
        }
    }
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=8 {
            let q = Matrix::random_orthogonal(n, &mut rng);
            assert!(q.orthogonality_deviation() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn qr_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Matrix::random_gaussian(5, &mut rng);
        let q = qr_q_positive_r(&a).unwrap();
        let r = q.transpose().matmul(&a);
        for i in 0..5 {
            assert!(r[(i, i)] > 0.0);
            for j in 0..i {
                assert!(r[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inner_is_trace_of_product_with_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = Matrix::random_gaussian(3, &mut rng);
        let b = Matrix::random_gaussian(3, &mut rng);
        let abt = a.matmul(&b.transpose());
        let trace: f64 = abt.diag().iter().sum();
        assert!((a.inner(&b) - trace).abs() < 1e-14);
    }
}
