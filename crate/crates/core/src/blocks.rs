//! The block structure induced by a vector `μ`: `i ∼ j` iff `μ_i = μ_j`.
//!
//! Blocks are enumerated canonically: block 0 contains index 0 and block
//! `m+1` contains the smallest index outside blocks `0..=m`. For a
//! nonincreasing `μ` this gives the consecutive runs of equal coordinates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eig::eigh;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionFile", into = "PartitionFile")]
pub struct BlockPartition {
    mu: Vec<f64>,
    block_id: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    reps: Vec<usize>,
}

/// JSON layout: `{"mu": [...], "blocks": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionFile {
    pub mu: Vec<f64>,
    pub blocks: Vec<Vec<usize>>,
}

impl TryFrom<PartitionFile> for BlockPartition {
    type Error = Error;

    fn try_from(f: PartitionFile) -> Result<Self> {
        BlockPartition::from_blocks(f.mu, f.blocks)
    }
}

impl From<BlockPartition> for PartitionFile {
    fn from(p: BlockPartition) -> Self {
        PartitionFile {
            mu: p.mu,
            blocks: p.blocks,
        }
    }
}

/// Partition by exact equality of coordinates.
pub fn partition_from_mu(mu: &[f64]) -> BlockPartition {
    partition_from_mu_with_tol(mu, 0.0)
}

/// Single-linkage grouping: coordinates whose sorted neighbours differ by
/// at most `tol` share a block. `tol = 0` is exact equality.
pub fn partition_from_mu_with_tol(mu: &[f64], tol: f64) -> BlockPartition {
    let n = mu.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]));
    // provisional cluster per coordinate
    let mut cluster = vec![0usize; n];
    let mut c = 0;
    for w in 1..n {
        if mu[order[w]] - mu[order[w - 1]] > tol {
            c += 1;
        }
        cluster[order[w]] = c;
    }
    let mut block_id = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if block_id[i] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let members: Vec<usize> = (i..n).filter(|&j| cluster[j] == cluster[i]).collect();
        for &j in &members {
            block_id[j] = id;
        }
        blocks.push(members);
    }
    let reps = blocks.iter().map(|b| *b.last().unwrap()).collect();
    BlockPartition {
        mu: mu.to_vec(),
        block_id,
        blocks,
        reps,
    }
}

impl BlockPartition {
    /// Validates that `blocks` partitions `{0..n-1}` in canonical order.
    pub fn from_blocks(mu: Vec<f64>, mut blocks: Vec<Vec<usize>>) -> Result<BlockPartition> {
        let n = mu.len();
        let mut block_id = vec![usize::MAX; n];
        for (id, b) in blocks.iter_mut().enumerate() {
            if b.is_empty() {
                return Err(Error::Precondition("empty block".into()));
            }
            b.sort_unstable();
            for &i in b.iter() {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, limit: n });
                }
                if block_id[i] != usize::MAX {
                    return Err(Error::Precondition(format!("index {i} in two blocks")));
                }
                block_id[i] = id;
            }
        }
        if block_id.contains(&usize::MAX) {
            return Err(Error::Precondition(
                "blocks do not cover every index".into(),
            ));
        }
        let mut covered = vec![false; n];
        for b in &blocks {
            let smallest = (0..n).find(|&i| !covered[i]).unwrap();
            if b[0] != smallest {
                return Err(Error::Precondition(
                    "blocks are not in canonical order".into(),
                ));
            }
            for &i in b {
                covered[i] = true;
            }
        }
        let reps = blocks.iter().map(|b| *b.last().unwrap()).collect();
        Ok(BlockPartition {
            mu,
            block_id,
            blocks,
            reps,
        })
    }

    /// Every index in its own block.
    pub fn singletons(n: usize) -> BlockPartition {
        partition_from_mu(&(0..n).map(|i| -(i as f64)).collect::<Vec<_>>())
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_ids(&self) -> &[usize] {
        &self.block_id
    }

    #[inline]
    pub fn block_of(&self, i: usize) -> usize {
        self.block_id[i]
    }

    /// Representative of each block: its largest index.
    pub fn reps(&self) -> &[usize] {
        &self.reps
    }

    #[inline]
    pub fn equivalent(&self, i: usize, j: usize) -> bool {
        self.block_id[i] == self.block_id[j]
    }

    /// True when every block is a run of consecutive indices in increasing
    /// block order, as for a nonincreasing `μ`.
    pub fn is_contiguous(&self) -> bool {
        let mut next = 0;
        for b in &self.blocks {
            for &i in b {
                if i != next {
                    return false;
                }
                next += 1;
            }
        }
        true
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "dimension {n} against a partition of {}",
                self.n()
            )));
        }
        Ok(())
    }

    /// The representative multi-index with the same block pattern as `idx`.
    pub fn rep_index(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.reps[self.block_id[i]]).collect()
    }

    /// The compression `X_lᵀ m X_l` onto block `l`.
    pub fn compress(&self, m: &Matrix, l: usize) -> Matrix {
        let b = &self.blocks[l];
        Matrix::from_fn(b.len(), |a, c| m[(b[a], b[c])])
    }
}

/// `(H_in, H_out)`: the within-block and cross-block parts, `H = H_in + H_out`.
pub fn split_in_out(h: &Matrix, p: &BlockPartition) -> Result<(Matrix, Matrix)> {
    p.check_dim(h.dim())?;
    let n = h.dim();
    let h_in = Matrix::from_fn(n, |i, j| if p.equivalent(i, j) { h[(i, j)] } else { 0.0 });
    let h_out = Matrix::from_fn(n, |i, j| if p.equivalent(i, j) { 0.0 } else { h[(i, j)] });
    Ok((h_in, h_out))
}

pub fn is_block_constant(t: &DenseTensor, p: &BlockPartition) -> Result<bool> {
    is_block_constant_within(t, p, 0.0)
}

/// Block-constancy up to `tol`: every entry is compared with the entry at
/// its representative multi-index.
pub fn is_block_constant_within(t: &DenseTensor, p: &BlockPartition, tol: f64) -> Result<bool> {
    p.check_dim(t.dim())?;
    for idx in t.indices() {
        let rep = p.rep_index(&idx);
        if (t.get(&idx) - t.get(&rep)).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The block-constant `k`-tensor with `t^(i) = values[block_id(i_1), ..., block_id(i_k)]`,
/// where `values` is a row-major `r^k` array.
pub fn make_block_constant(p: &BlockPartition, k: usize, values: &[f64]) -> Result<DenseTensor> {
    let r = p.num_blocks();
    let expected = r.pow(k as u32);
    if values.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{} block values for {r} blocks and order {k}",
            values.len()
        )));
    }
    DenseTensor::from_fn(k, p.n(), |idx| {
        let off = idx.iter().fold(0, |acc, &i| acc * r + p.block_of(i));
        values[off]
    })
}

pub fn random_block_constant<R: Rng + ?Sized>(
    p: &BlockPartition,
    k: usize,
    rng: &mut R,
) -> Result<DenseTensor> {
    let r = p.num_blocks();
    let values: Vec<f64> = (0..r.pow(k as u32))
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    make_block_constant(p, k, &values)
}

pub fn is_mu_symmetric(t: &DenseTensor, p: &BlockPartition) -> Result<bool> {
    is_mu_symmetric_within(t, p, 0.0)
}

/// Invariance under simultaneous relabelling of all slots by each
/// transposition of consecutive members of a block. These generate the
/// stabiliser of `μ`.
pub fn is_mu_symmetric_within(t: &DenseTensor, p: &BlockPartition, tol: f64) -> Result<bool> {
    p.check_dim(t.dim())?;
    for gen in stabilizer_generators(p) {
        for idx in t.indices() {
            let moved: Vec<usize> = idx.iter().map(|&i| gen[i]).collect();
            if (t.get(&idx) - t.get(&moved)).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Images of the transpositions `(b_a, b_{a+1})` for consecutive members of each block.
pub fn stabilizer_generators(p: &BlockPartition) -> Vec<Vec<usize>> {
    let mut gens = Vec::new();
    for b in p.blocks() {
        for w in b.windows(2) {
            let mut image: Vec<usize> = (0..p.n()).collect();
            image.swap(w[0], w[1]);
            gens.push(image);
        }
    }
    gens
}

/// A random orthogonal matrix supported on the diagonal blocks of `p`.
pub fn random_block_orthogonal<R: Rng + ?Sized>(p: &BlockPartition, rng: &mut R) -> Matrix {
    let mut u = Matrix::zeros(p.n());
    for b in p.blocks() {
        let v = Matrix::random_orthogonal(b.len(), rng);
        for (a, &i) in b.iter().enumerate() {
            for (c, &j) in b.iter().enumerate() {
                u[(i, j)] = v[(a, c)];
            }
        }
    }
    u
}

/// Block-diagonal orthogonal `U` and vector `h` with `Uᵀ M_in U = Diag h`.
///
/// Within each block, `h` lists the eigenvalues of the compression
/// `X_lᵀ M X_l` in nonincreasing order.
pub fn block_diagonalizer(m: &Matrix, p: &BlockPartition) -> Result<(Matrix, Vec<f64>)> {
    p.check_dim(m.dim())?;
    let asymmetry = m.asymmetry();
    if asymmetry > 1e-10 * m.frobenius_norm().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let n = m.dim();
    let mut u = Matrix::zeros(n);
    let mut h = vec![0.0; n];
    for (l, b) in p.blocks().iter().enumerate() {
        let dec = eigh(&p.compress(m, l))?;
        for (c, &j) in b.iter().enumerate() {
            h[j] = dec.eigenvalues[c];
            for (a, &i) in b.iter().enumerate() {
                u[(i, j)] = dec.vectors[(a, c)];
            }
        }
    }
    Ok((u, h))
}
