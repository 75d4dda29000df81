//! The σ-Hadamard product of `k` matrices and the `Diag^σ` lifting.
//!
//! For a permutation `σ` of `{0..k-1}`:
//!
//! ```text
//! (H_0 ∘_σ ⋯ ∘_σ H_{k-1})^(i_0..i_{k-1}) = Π_s H_s^(i_s, i_{σ⁻¹(s)})
//! (Diag^σ T)^(i_0..i_{k-1}, j_0..j_{k-1}) = T^(i) if i_s = j_{σ(s)} for all s, else 0
//! ```
//!
//! and the two are dual: `(Diag^σ T)[H_0, .., H_{k-1}] = ⟨T, H_0 ∘_σ ⋯ ∘_σ H_{k-1}⟩`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::perm::Perm;
use crate::tensor::{entry_count, DenseTensor};

fn check_matrices(hs: &[Matrix], sigma: &Perm) -> Result<usize> {
    if hs.is_empty() {
        return Err(Error::ShapeMismatch(
            "at least one matrix is required".into(),
        ));
    }
    if hs.len() != sigma.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} matrices for a permutation of {} symbols",
            hs.len(),
            sigma.len()
        )));
    }
    let n = hs[0].dim();
    if hs.iter().any(|h| h.dim() != n) {
        return Err(Error::ShapeMismatch("matrices of different sizes".into()));
    }
    Ok(n)
}

/// `H_0 ∘_σ ⋯ ∘_σ H_{k-1}` as a dense `k`-tensor.
pub fn sigma_hadamard(hs: &[Matrix], sigma: &Perm) -> Result<DenseTensor> {
    let n = check_matrices(hs, sigma)?;
    let inv = sigma.inverse();
    DenseTensor::from_fn(hs.len(), n, |idx| {
        let mut prod = 1.0;
        for (s, h) in hs.iter().enumerate() {
            prod *= h[(idx[s], idx[inv.apply(s)])];
        }
        prod
    })
}

/// `Diag^σ T`, a `2k`-tensor supported on `i_s = j_{σ(s)}`.
pub fn diag_sigma(t: &DenseTensor, sigma: &Perm) -> Result<DenseTensor> {
    let k = t.order();
    if sigma.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "order-{k} tensor with a permutation of {} symbols",
            sigma.len()
        )));
    }
    entry_count(2 * k, t.dim())?;
    let mut out = DenseTensor::zeros(2 * k, t.dim())?;
    let mut full = vec![0; 2 * k];
    for idx in t.indices() {
        full[..k].copy_from_slice(&idx);
        for s in 0..k {
            full[k + sigma.apply(s)] = idx[s];
        }
        out.set(&full, t.get(&idx));
    }
    Ok(out)
}

/// `(Diag^σ T)[H_0, .., H_{k-1}]` without materialising the `2k`-tensor:
/// `Σ_i T^(i) Π_s H_s^(i_s, i_{σ⁻¹(s)})`.
pub fn eval_diag_sigma(t: &DenseTensor, sigma: &Perm, hs: &[Matrix]) -> Result<f64> {
    let n = check_matrices(hs, sigma)?;
    if t.order() != hs.len() || t.dim() != n {
        return Err(Error::ShapeMismatch(
            "tensor does not match the matrices".into(),
        ));
    }
    let inv = sigma.inverse();
    let mut acc = 0.0;
    for idx in t.indices() {
        let mut prod = t.get(&idx);
        for (s, h) in hs.iter().enumerate() {
            prod *= h[(idx[s], idx[inv.apply(s)])];
        }
        acc += prod;
    }
    Ok(acc)
}

/// `⟨T, H_{a_0 b_0} ∘_σ ⋯ ∘_σ H_{a_{k-2} b_{k-2}} ∘_σ H⟩` for basic matrices
/// in all but the last slot, reduced to a closed form.
///
/// With `L = k-1` the last slot:
/// * if `σ(L) = L`: `(Π_{t<L} δ_{a_t, b_σ(t)}) · Σ_x T^(a_0..a_{L-1}, x) H^(x x)`;
/// * otherwise, with `l = σ⁻¹(L)`:
///   `(Π_{t<L, t≠l} δ_{a_t, b_σ(t)}) · T^(a_0..a_{L-1}, b_σ(L)) · H^(b_σ(L), a_l)`.
pub fn dot_hadamard_closed_form(
    t: &DenseTensor,
    basics: &[(usize, usize)],
    h: &Matrix,
    sigma: &Perm,
) -> Result<f64> {
    let k = t.order();
    if k == 0 || sigma.len() != k || basics.len() + 1 != k {
        return Err(Error::ShapeMismatch(format!(
            "order {k}, {} basic matrices, permutation of {} symbols",
            basics.len(),
            sigma.len()
        )));
    }
    let n = t.dim();
    if h.dim() != n {
        return Err(Error::ShapeMismatch(
            "matrix size differs from tensor dimension".into(),
        ));
    }
    for &(a, b) in basics {
        for x in [a, b] {
            if x >= n {
                return Err(Error::IndexOutOfRange { index: x, limit: n });
            }
        }
    }
    let last = k - 1;
    let l = sigma.inverse().apply(last);
    let deltas_hold = (0..last)
        .filter(|&s| s != l)
        .all(|s| basics[s].0 == basics[sigma.apply(s)].1);
    if !deltas_hold {
        return Ok(0.0);
    }
    let mut idx: Vec<usize> = basics.iter().map(|&(a, _)| a).collect();
    idx.push(0);
    if l == last {
        let mut acc = 0.0;
        for x in 0..n {
            idx[last] = x;
            acc += t.get(&idx) * h[(x, x)];
        }
        Ok(acc)
    } else {
        let col = basics[sigma.apply(last)].1;
        idx[last] = col;
        Ok(t.get(&idx) * h[(col, basics[l].0)])
    }
}
