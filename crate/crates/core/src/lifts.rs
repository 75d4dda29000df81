//! Lifts of a `k`-tensor to a `(k+1)`-tensor, and the determinant family.
//!
//! The new slot always has index `k` (the last one). Throughout, `l` is a
//! slot in `{0..k-1}`.

use crate::blocks::BlockPartition;
use crate::error::{Error, Result};
use crate::hadamard::diag_sigma;
use crate::matrix::Matrix;
use crate::perm::{all_perms, expand_specifying, sigma_sub_l, Perm};
use crate::tensor::{entry_count, DenseTensor};

/// Largest `s` accepted by [`kp_sum`].
pub const KP_MAX_ORDER: usize = 4;

fn check_slot(t: &DenseTensor, l: usize) -> Result<()> {
    if l >= t.order() {
        return Err(Error::IndexOutOfRange {
            index: l,
            limit: t.order(),
        });
    }
    Ok(())
}

fn check_partition(t: &DenseTensor, p: &BlockPartition) -> Result<()> {
    if p.n() != t.dim() {
        return Err(Error::ShapeMismatch(format!(
            "partition of {} indices against dimension {}",
            p.n(),
            t.dim()
        )));
    }
    Ok(())
}

/// Builds a `(k+1)`-tensor from `f(t, head, last)`, where `head` is the
/// first `k` indices.
fn lift_with(t: &DenseTensor, mut f: impl FnMut(&[usize], usize) -> f64) -> Result<DenseTensor> {
    let k = t.order();
    entry_count(k + 1, t.dim())?;
    DenseTensor::from_fn(k + 1, t.dim(), |idx| f(&idx[..k], idx[k]))
}

fn with_slot(head: &[usize], l: usize, v: usize) -> Vec<usize> {
    let mut out = head.to_vec();
    out[l] = v;
    out
}

/// `T^(l)_out`: zero when `i_l ∼ i_k`, otherwise the divided difference
/// `(T[i_l := i_k] - T[i]) / (μ_{i_k} - μ_{i_l})`.
pub fn divided_difference_out(
    t: &DenseTensor,
    l: usize,
    p: &BlockPartition,
) -> Result<DenseTensor> {
    check_slot(t, l)?;
    check_partition(t, p)?;
    let mu = p.mu();
    lift_with(t, |head, last| {
        let il = head[l];
        if p.equivalent(il, last) {
            return 0.0;
        }
        (t.get(&with_slot(head, l, last)) - t.get(head)) / (mu[last] - mu[il])
    })
}

/// `T^(τ_l)_in`: `T[i_l := i_k]` when `i_l ∼ i_k`, otherwise zero.
pub fn lift_in(t: &DenseTensor, l: usize, p: &BlockPartition) -> Result<DenseTensor> {
    check_slot(t, l)?;
    check_partition(t, p)?;
    lift_with(t, |head, last| {
        if p.equivalent(head[l], last) {
            t.get(&with_slot(head, l, last))
        } else {
            0.0
        }
    })
}

/// `T^(τ_l)`: `T[i]` on the hyperplane `i_l = i_k`, zero off it.
pub fn lift_tau(t: &DenseTensor, l: usize) -> Result<DenseTensor> {
    check_slot(t, l)?;
    lift_with(
        t,
        |head, last| if head[l] == last { t.get(head) } else { 0.0 },
    )
}

/// `T^ν` for `ν` on `{0..k-1}` and `t` of order `cycles(ν)`: the value of `t`
/// at the specifying vector when `i ⪯ ν`, zero otherwise.
pub fn lift_cycle(t: &DenseTensor, nu: &Perm) -> Result<DenseTensor> {
    let dec = nu.cycle_decomposition();
    if t.order() != dec.len() {
        return Err(Error::ShapeMismatch(format!(
            "order-{} tensor for a permutation with {} cycles",
            t.order(),
            dec.len()
        )));
    }
    let k = nu.len();
    entry_count(k, t.dim())?;
    let mut out = DenseTensor::zeros(k, t.dim())?;
    for spec in t.indices() {
        let idx = expand_specifying(&spec, nu)?;
        out.set(&idx, t.get(&spec));
    }
    Ok(out)
}

/// Inverse of [`lift_cycle`] on its image: reads `t` back from the diagonal.
pub fn unlift_cycle(lifted: &DenseTensor, nu: &Perm) -> Result<DenseTensor> {
    if lifted.order() != nu.len() {
        return Err(Error::ShapeMismatch(
            "order differs from permutation length".into(),
        ));
    }
    let s = nu.cycle_count();
    DenseTensor::from_fn(s, lifted.dim(), |spec| {
        let idx = expand_specifying(spec, nu).expect("length matches cycle count");
        lifted.get(&idx)
    })
}

fn check_family(tensors: &[DenseTensor]) -> Result<(usize, usize)> {
    let s = tensors.len();
    if s == 0 {
        return Err(Error::ShapeMismatch("empty tensor family".into()));
    }
    let n = tensors[0].dim();
    for t in tensors {
        if t.order() != s || t.dim() != n {
            return Err(Error::ShapeMismatch(format!(
                "family of {s} tensors needs order {s} and dimension {n}, got order {} dimension {}",
                t.order(),
                t.dim()
            )));
        }
    }
    Ok((s, n))
}

/// The `s×s` matrix with entries `δ(i_p, j_q)` for `q < s-1` and
/// `T_p^(i) δ(i_p, j_{s-1})` in the last column.
pub fn delta_matrix(tensors: &[DenseTensor], i: &[usize], j: &[usize]) -> Result<Matrix> {
    let (s, n) = check_family(tensors)?;
    if i.len() != s || j.len() != s {
        return Err(Error::ShapeMismatch(format!(
            "multi-indices of length {} and {} for a family of {s}",
            i.len(),
            j.len()
        )));
    }
    if let Some(&bad) = i.iter().chain(j).find(|&&x| x >= n) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            limit: n,
        });
    }
    Ok(Matrix::from_fn(s, |p, q| {
        let d = if i[p] == j[q] { 1.0 } else { 0.0 };
        if q + 1 < s {
            d
        } else {
            tensors[p].get(i) * d
        }
    }))
}

/// Determinant by LU factorisation with partial pivoting.
pub fn determinant(m: &Matrix) -> f64 {
    let n = m.dim();
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
            .unwrap();
        if a[(pivot, col)] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = tmp;
            }
            det = -det;
        }
        let d = a[(col, col)];
        det *= d;
        for r in col + 1..n {
            let f = a[(r, col)] / d;
            if f != 0.0 {
                for j in col..n {
                    a[(r, j)] -= f * a[(col, j)];
                }
            }
        }
    }
    det
}

/// `Σ_{σ ∈ P^(s-1)} Σ_{l<s} sign(σ_(l)) Diag^{σ_(l)} T_l` for a family of
/// `s` tensors of order `s`.
pub fn kp_sum(tensors: &[DenseTensor]) -> Result<DenseTensor> {
    let (s, n) = check_family(tensors)?;
    if s > KP_MAX_ORDER {
        return Err(Error::Precondition(format!(
            "kp_sum supports s <= {KP_MAX_ORDER}, got {s}"
        )));
    }
    entry_count(2 * s, n)?;
    let mut acc = DenseTensor::zeros(2 * s, n)?;
    for sigma in all_perms(s - 1) {
        for (l, t) in tensors.iter().enumerate() {
            let sl = sigma_sub_l(&sigma, l)?;
            acc.axpy(f64::from(sl.sign()), &diag_sigma(t, &sl)?)?;
        }
    }
    Ok(acc)
}

/// Symmetric `k`-tensor vanishing on every multi-index with pairwise distinct
/// entries: random values are symmetrised and the distinct-entry orbits
/// cleared.
pub fn random_coincidence_tensor<R: rand::Rng + ?Sized>(
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<DenseTensor> {
    let raw = DenseTensor::random(k, n, rng)?;
    let mut t = crate::tensor::symmetrize(&raw);
    for idx in t.indices() {
        if all_distinct(&idx) {
            t.set(&idx, 0.0);
        }
    }
    Ok(t)
}

pub fn all_distinct(idx: &[usize]) -> bool {
    (0..idx.len()).all(|a| (a + 1..idx.len()).all(|b| idx[a] != idx[b]))
}

/// The family `{T^(0)_out, .., T^(k-1)_out, 0}` of `k+1` tensors of
/// order `k+1`.
pub fn divided_difference_family(t: &DenseTensor, p: &BlockPartition) -> Result<Vec<DenseTensor>> {
    let k = t.order();
    let mut family = (0..k)
        .map(|l| divided_difference_out(t, l, p))
        .collect::<Result<Vec<_>>>()?;
    family.push(DenseTensor::zeros(k + 1, t.dim())?);
    Ok(family)
}
