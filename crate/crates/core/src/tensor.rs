//! Dense order-`k` tensors on `ℝⁿ`.
//!
//! Storage is a flat row-major array (last index fastest), so the entry at
//! `(i_1, ..., i_k)` lives at offset `Σ i_s · n^(k-s)`. Matrices are order-2
//! tensors, vectors order-1, scalars order-0 (one entry).
//!
//! A `2K`-tensor doubles as a `K`-tensor on `n×n` matrices: its first `K`
//! slots are the row indices and its last `K` slots the column indices of
//! the `K` matrix arguments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest number of entries a tensor may hold.
pub const MAX_ENTRIES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorFile", into = "TensorFile")]
pub struct DenseTensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

/// On-disk JSON layout: `{"order": k, "dim": n, "data": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorFile {
    pub order: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl TryFrom<TensorFile> for DenseTensor {
    type Error = Error;

    fn try_from(f: TensorFile) -> Result<Self> {
        DenseTensor::from_data(f.order, f.dim, f.data)
    }
}

impl From<DenseTensor> for TensorFile {
    fn from(t: DenseTensor) -> Self {
        TensorFile {
            order: t.order,
            dim: t.dim,
            data: t.data,
        }
    }
}

/// Number of entries `n^k`, or a capacity error.
pub fn entry_count(order: usize, dim: usize) -> Result<usize> {
    let entries = (dim as u128).checked_pow(order as u32).unwrap_or(u128::MAX);
    if entries > MAX_ENTRIES as u128 {
        return Err(Error::CapacityExceeded {
            entries,
            limit: MAX_ENTRIES,
        });
    }
    Ok(entries as usize)
}

impl DenseTensor {
    pub fn zeros(order: usize, dim: usize) -> Result<DenseTensor> {
        if dim == 0 {
            return Err(Error::ShapeMismatch("dimension must be at least 1".into()));
        }
        let len = entry_count(order, dim)?;
        Ok(DenseTensor {
            order,
            dim,
            data: vec![0.0; len],
        })
    }

    pub fn from_data(order: usize, dim: usize, data: Vec<f64>) -> Result<DenseTensor> {
        if dim == 0 {
            return Err(Error::ShapeMismatch("dimension must be at least 1".into()));
        }
        let len = entry_count(order, dim)?;
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "order {order}, dim {dim} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(DenseTensor { order, dim, data })
    }

    pub fn from_fn(
        order: usize,
        dim: usize,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> Result<DenseTensor> {
        let mut t = DenseTensor::zeros(order, dim)?;
        for (off, idx) in MultiIndex::new(order, dim).enumerate() {
            t.data[off] = f(&idx);
        }
        Ok(t)
    }

    pub fn random<R: Rng + ?Sized>(order: usize, dim: usize, rng: &mut R) -> Result<DenseTensor> {
        let len = entry_count(order, dim)?;
        DenseTensor::from_data(
            order,
            dim,
            (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        )
    }

    pub fn scalar(x: f64, dim: usize) -> DenseTensor {
        DenseTensor {
            order: 0,
            dim,
            data: vec![x],
        }
    }

    pub fn from_vector(v: &[f64]) -> DenseTensor {
        DenseTensor {
            order: 1,
            dim: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn from_matrix(m: &Matrix) -> DenseTensor {
        DenseTensor {
            order: 2,
            dim: m.dim(),
            data: m.data().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.order != 2 {
            return Err(Error::ShapeMismatch(format!(
                "order-{} tensor is not a matrix",
                self.order
            )));
        }
        Matrix::from_vec(self.dim, self.data.clone())
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat offset of a multi-index. Panics if the length is wrong.
    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    /// All multi-indices in storage order.
    pub fn indices(&self) -> MultiIndex {
        MultiIndex::new(self.order, self.dim)
    }

    pub fn same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "order {} dim {} vs order {} dim {}",
                self.order, self.dim, other.order, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> DenseTensor {
        DenseTensor {
            order: self.order,
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `max |self - other|` over entries.
    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Row-major iterator over `{0..n-1}^k`.
#[derive(Debug, Clone)]
pub struct MultiIndex {
    dim: usize,
    current: Vec<usize>,
    done: bool,
}

impl MultiIndex {
    pub fn new(order: usize, dim: usize) -> MultiIndex {
        MultiIndex {
            dim,
            current: vec![0; order],
            done: dim == 0,
        }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut pos = self.current.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.current[pos] += 1;
            if self.current[pos] < self.dim {
                break;
            }
            self.current[pos] = 0;
        }
        Some(out)
    }
}

/// `Σ a^(p) b^(p)` over all multi-indices.
pub fn tensor_dot(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    a.same_shape(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

/// `T[h]`: contraction of the last slot with a vector.
pub fn contract_last(t: &DenseTensor, h: &[f64]) -> Result<DenseTensor> {
    if t.order == 0 {
        return Err(Error::ShapeMismatch(
            "cannot contract an order-0 tensor".into(),
        ));
    }
    if h.len() != t.dim {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} against dimension {}",
            h.len(),
            t.dim
        )));
    }
    let n = t.dim;
    let data = t
        .data
        .chunks_exact(n)
        .map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum())
        .collect();
    DenseTensor::from_data(t.order - 1, n, data)
}

fn check_matrix_dim(t: &DenseTensor, m: &Matrix) -> Result<()> {
    if m.dim() != t.dim {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix against dimension {}",
            m.dim(),
            m.dim(),
            t.dim
        )));
    }
    Ok(())
}

/// `T[M]` for a `2K`-tensor viewed as a `K`-tensor on matrices: contracts the
/// last row slot (`K-1`) and the last column slot (`2K-1`) with `m`.
pub fn contract_last_matrix(t: &DenseTensor, m: &Matrix) -> Result<DenseTensor> {
    if t.order < 2 || !t.order.is_multiple_of(2) {
        return Err(Error::ShapeMismatch(format!(
            "order {} is not a positive even order",
            t.order
        )));
    }
    check_matrix_dim(t, m)?;
    let n = t.dim;
    let big_k = t.order / 2;
    let k = big_k - 1;
    let mut out = DenseTensor::zeros(2 * k, n)?;
    // t offset of (I, p, J, q) = ((I*n + p) * n^K + (J*n + q))
    let nk = n.pow(big_k as u32);
    let nsmall = n.pow(k as u32);
    for row in 0..nsmall {
        for col in 0..nsmall {
            let mut acc = 0.0;
            for p in 0..n {
                let base = (row * n + p) * nk + col * n;
                for q in 0..n {
                    let mpq = m[(p, q)];
                    if mpq != 0.0 {
                        acc += t.data[base + q] * mpq;
                    }
                }
            }
            out.data[row * nsmall + col] = acc;
        }
    }
    Ok(out)
}

/// `T[H_1, ..., H_k] = Σ T^(p_1..p_k, q_1..q_k) Π H_s^(p_s q_s)`.
pub fn eval_on_matrices(t: &DenseTensor, hs: &[Matrix]) -> Result<f64> {
    if t.order != 2 * hs.len() {
        return Err(Error::ShapeMismatch(format!(
            "order-{} tensor evaluated on {} matrices",
            t.order,
            hs.len()
        )));
    }
    for h in hs {
        check_matrix_dim(t, h)?;
    }
    let k = hs.len();
    let mut acc = 0.0;
    for idx in t.indices() {
        let v = t.get(&idx);
        if v == 0.0 {
            continue;
        }
        let mut prod = v;
        for s in 0..k {
            prod *= hs[s][(idx[s], idx[k + s])];
            if prod == 0.0 {
                break;
            }
        }
        acc += prod;
    }
    Ok(acc)
}

/// `U T Uᵀ`: `result^(i_1..i_k) = Σ T^(p_1..p_k) Π_s U^(i_s p_s)`, computed
/// as `k` successive mode products.
pub fn conjugate(u: &Matrix, t: &DenseTensor) -> Result<DenseTensor> {
    check_matrix_dim(t, u)?;
    let n = t.dim;
    let mut current = t.data.clone();
    let mut fiber = vec![0.0; n];
    for axis in 0..t.order {
        let stride = n.pow((t.order - 1 - axis) as u32);
        let outer = n.pow(axis as u32);
        let mut next = vec![0.0; current.len()];
        for o in 0..outer {
            let base = o * n * stride;
            for inner in 0..stride {
                for (p, f) in fiber.iter_mut().enumerate() {
                    *f = current[base + p * stride + inner];
                }
                for i in 0..n {
                    let mut acc = 0.0;
                    for p in 0..n {
                        acc += u[(i, p)] * fiber[p];
                    }
                    next[base + i * stride + inner] = acc;
                }
            }
        }
        current = next;
    }
    DenseTensor::from_data(t.order, n, current)
}

/// [`conjugate`] after verifying `‖UᵀU - I‖_max ≤ tol`.
pub fn conjugate_checked(u: &Matrix, t: &DenseTensor, tol: f64) -> Result<DenseTensor> {
    u.check_orthogonal(tol)?;
    conjugate(u, t)
}

/// Exact symmetry under every permutation of slots.
pub fn is_symmetric_tensor(t: &DenseTensor) -> bool {
    is_symmetric_within(t, 0.0)
}

/// Symmetry up to `tol`, checked on the adjacent transpositions that
/// generate the symmetric group.
pub fn is_symmetric_within(t: &DenseTensor, tol: f64) -> bool {
    if t.order < 2 {
        return true;
    }
    for a in 0..t.order - 1 {
        for idx in t.indices() {
            if idx[a] >= idx[a + 1] {
                continue;
            }
            let mut swapped = idx.clone();
            swapped.swap(a, a + 1);
            if (t.get(&idx) - t.get(&swapped)).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Average over all slot permutations. Every orbit receives one value, so
/// the result is exactly symmetric.
pub fn symmetrize(t: &DenseTensor) -> DenseTensor {
    let mut out = t.clone();
    let mut done = vec![false; t.len()];
    for idx in t.indices() {
        let off = t.offset(&idx);
        if done[off] {
            continue;
        }
        let orbit = distinct_rearrangements(&idx);
        let offsets: Vec<usize> = orbit.iter().map(|i| t.offset(i)).collect();
        let mean = offsets.iter().map(|&o| t.data[o]).sum::<f64>() / offsets.len() as f64;
        for o in offsets {
            out.data[o] = mean;
            done[o] = true;
        }
    }
    out
}

/// Distinct rearrangements of a multi-index.
fn distinct_rearrangements(idx: &[usize]) -> Vec<Vec<usize>> {
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    let k = sorted.len();
    let mut out = vec![sorted.clone()];
    let mut cur = sorted;
    while let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) {
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
    out
}

/// The basic matrix `H_pq` with a single unit entry at `(p, q)`.
pub fn basis_matrix(p: usize, q: usize, n: usize) -> Result<Matrix> {
    for x in [p, q] {
        if x >= n {
            return Err(Error::IndexOutOfRange { index: x, limit: n });
        }
    }
    let mut m = Matrix::zeros(n);
    m[(p, q)] = 1.0;
    Ok(m)
}
