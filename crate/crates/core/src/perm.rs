//! Permutations of `{0..k-1}` and the refinement relations between index
//! vectors and permutations.
//!
//! Indices are 0-based everywhere. For cross-reference with 1-based
//! notation:
//!
//! | 1-based                          | here                          |
//! |----------------------------------|-------------------------------|
//! | permutation on `{1..k}`          | `Perm` of length `k` on `{0..k-1}` |
//! | `τ_l = (l, k+1)`, `l = 1..k+1`   | transposition `(l, k)`, `l = 0..k` |
//! | `σ_(k+1)` (fixes `k+1`)          | `sigma_sub_l(σ, k)` (fixes `k`) |
//! | cycle `I_{ν,1}` containing `1`   | cycle 0, containing index 0   |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A permutation stored by its image: `image[i] = σ(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Perm {
    image: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Perm {
    type Error = Error;

    fn try_from(image: Vec<usize>) -> Result<Self> {
        Perm::from_image(image)
    }
}

impl From<Perm> for Vec<usize> {
    fn from(p: Perm) -> Self {
        p.image
    }
}

impl Perm {
    pub fn identity(k: usize) -> Perm {
        Perm {
            image: (0..k).collect(),
        }
    }

    /// Validates that `image` is a bijection of `{0..image.len()-1}`.
    pub fn from_image(image: Vec<usize>) -> Result<Perm> {
        let k = image.len();
        let mut seen = vec![false; k];
        for &x in &image {
            if x >= k || seen[x] {
                return Err(Error::InvalidPermutation(image));
            }
            seen[x] = true;
        }
        Ok(Perm { image })
    }

    /// The transposition swapping `a` and `b` on `{0..k-1}`.
    pub fn transposition(a: usize, b: usize, k: usize) -> Result<Perm> {
        for x in [a, b] {
            if x >= k {
                return Err(Error::IndexOutOfRange { index: x, limit: k });
            }
        }
        let mut image: Vec<usize> = (0..k).collect();
        image.swap(a, b);
        Ok(Perm { image })
    }

    /// Builds a permutation from disjoint cycles; indices not mentioned are fixed.
    pub fn from_cycles(k: usize, cycles: &[&[usize]]) -> Result<Perm> {
        let mut image: Vec<usize> = (0..k).collect();
        let mut touched = vec![false; k];
        for cycle in cycles {
            for (pos, &x) in cycle.iter().enumerate() {
                if x >= k {
                    return Err(Error::IndexOutOfRange { index: x, limit: k });
                }
                if touched[x] {
                    return Err(Error::Precondition(format!(
                        "index {x} appears in more than one cycle"
                    )));
                }
                touched[x] = true;
                image[x] = cycle[(pos + 1) % cycle.len()];
            }
        }
        Perm::from_image(image)
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// `σ(i)`.
    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.len()];
        for (i, &x) in self.image.iter().enumerate() {
            inv[x] = i;
        }
        Perm { image: inv }
    }

    /// `self ∘ other`, i.e. `other` is applied first.
    pub fn compose(&self, other: &Perm) -> Result<Perm> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "composing permutations of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Perm {
            image: other.image.iter().map(|&i| self.image[i]).collect(),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn cycle_count(&self) -> usize {
        self.cycle_decomposition().len()
    }

    /// `(-1)^(k - cycles)`, computed from the cycle structure.
    pub fn sign(&self) -> i32 {
        if (self.len() - self.cycle_count()).is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// Extends the permutation to `{0..k}` by fixing the new index `k`.
    pub fn extend_fixing_last(&self) -> Perm {
        let mut image = self.image.clone();
        image.push(self.len());
        Perm { image }
    }

    /// Disjoint cycles, enumerated so that cycle 0 holds index 0 and each
    /// subsequent cycle starts at the smallest index not yet covered.
    pub fn cycle_decomposition(&self) -> CycleDecomposition {
        let k = self.len();
        let mut cycle_id = vec![usize::MAX; k];
        let mut cycles = Vec::new();
        for start in 0..k {
            if cycle_id[start] != usize::MAX {
                continue;
            }
            let id = cycles.len();
            let mut cycle = vec![start];
            cycle_id[start] = id;
            let mut x = self.image[start];
            while x != start {
                cycle_id[x] = id;
                cycle.push(x);
                x = self.image[x];
            }
            cycles.push(cycle);
        }
        CycleDecomposition { cycles, cycle_id }
    }

    /// The matrix `P` with `(P h)_i = h_{σ(i)}`, equivalently `Pᵀ e^i = e^{σ(i)}`.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.len();
        let mut p = Matrix::zeros(n);
        for i in 0..n {
            p[(i, self.image[i])] = 1.0;
        }
        p
    }
}

/// All permutations of `{0..k-1}` in lexicographic order of their images.
pub fn all_perms(k: usize) -> Vec<Perm> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(Perm {
            image: current.clone(),
        });
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| current[i - 1] < current[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    out
}

/// `σ_(l) = σ ∘ τ_l` on `{0..k}`, where `τ_l` swaps `l` and `k` and `σ` is
/// extended to fix `k`. For `l = k` this is just the extension of `σ`.
///
/// In cycle notation, `σ_(l)` inserts the new symbol `k` right after `l`.
/// Always `σ_(l)⁻¹(k) = l`.
pub fn sigma_sub_l(sigma: &Perm, l: usize) -> Result<Perm> {
    let k = sigma.len();
    if l > k {
        return Err(Error::IndexOutOfRange {
            index: l,
            limit: k + 1,
        });
    }
    let ext = sigma.extend_fixing_last();
    let tau = Perm::transposition(l, k, k + 1)?;
    ext.compose(&tau)
}

/// A cycle decomposition with the canonical cycle enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleDecomposition {
    pub cycles: Vec<Vec<usize>>,
    /// `cycle_id[i]` is the position of the cycle containing `i`.
    pub cycle_id: Vec<usize>,
}

impl CycleDecomposition {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("lengths {a} and {b} differ")));
    }
    Ok(())
}

/// `x ⪯ y`: every coincidence `y_i = y_j` is also a coincidence of `x`.
pub fn refines_vec<A: PartialEq, B: PartialEq>(x: &[A], y: &[B]) -> Result<bool> {
    check_len(x.len(), y.len())?;
    let k = x.len();
    for i in 0..k {
        for j in (i + 1)..k {
            if y[i] == y[j] && x[i] != x[j] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `x ⪯ ν`: `x_l = x_{ν(l)}` for every `l`.
pub fn refines_perm<A: PartialEq>(x: &[A], nu: &Perm) -> Result<bool> {
    check_len(x.len(), nu.len())?;
    Ok((0..x.len()).all(|l| x[l] == x[nu.apply(l)]))
}

/// The values of `x` on each cycle of `ν`, in canonical cycle order.
pub fn specifying_vector<A: PartialEq + Clone>(x: &[A], nu: &Perm) -> Result<Vec<A>> {
    if !refines_perm(x, nu)? {
        return Err(Error::Precondition(
            "vector is not constant on the cycles of the permutation".into(),
        ));
    }
    Ok(nu
        .cycle_decomposition()
        .cycles
        .iter()
        .map(|c| x[c[0]].clone())
        .collect())
}

/// Inverse of [`specifying_vector`]: spreads one value per cycle over the cycle.
pub fn expand_specifying<A: Clone>(p: &[A], nu: &Perm) -> Result<Vec<A>> {
    let dec = nu.cycle_decomposition();
    check_len(p.len(), dec.len())?;
    Ok(dec.cycle_id.iter().map(|&c| p[c].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perm(v: &[usize]) -> Perm {
        Perm::from_image(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Perm::from_image(vec![0, 0]).is_err());
        assert!(Perm::from_image(vec![0, 2]).is_err());
        assert!(serde_json::from_str::<Perm>("[1,1,0]").is_err());
        let p: Perm = serde_json::from_str("[2,0,1]").unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[2,0,1]");
    }

    #[test]
    fn sigma_sub_l_examples() {
        let s = sigma_sub_l(&Perm::identity(1), 0).unwrap();
        assert_eq!(s.image(), &[1, 0]);

        let s = sigma_sub_l(&Perm::identity(2), 2).unwrap();
        assert!(s.is_identity());
        assert_eq!(s.len(), 3);

        let swap = perm(&[1, 0]);
        let s = sigma_sub_l(&swap, 0).unwrap();
        // unique permutation of {0,1,2} equal to σ·(0 2), found by enumeration
        let tau = Perm::transposition(0, 2, 3).unwrap();
        let expected: Vec<Perm> = all_perms(3)
            .into_iter()
            .filter(|p| (0..3).all(|i| p.apply(i) == swap.extend_fixing_last().apply(tau.apply(i))))
            .collect();
        assert_eq!(expected.len(), 1);
        assert_eq!(s, expected[0]);
        assert_eq!(s.image(), &[2, 0, 1]);
        assert_eq!(s.inverse().apply(2), 0);

        assert!(sigma_sub_l(&swap, 3).is_err());
    }

    #[test]
    fn cycle_examples() {
        let c = Perm::identity(3).cycle_decomposition();
        assert_eq!(c.cycles, vec![vec![0], vec![1], vec![2]]);
        let c = perm(&[1, 0, 2]).cycle_decomposition();
        assert_eq!(c.cycles, vec![vec![0, 1], vec![2]]);
        let c = perm(&[2, 0, 1, 3]).cycle_decomposition();
        assert_eq!(c.cycles, vec![vec![0, 2, 1], vec![3]]);
        assert_eq!(c.cycle_id, vec![0, 0, 0, 1]);
        // canonical enumeration with a non-contiguous second cycle
        let c = perm(&[0, 3, 2, 1]).cycle_decomposition();
        assert_eq!(c.cycles, vec![vec![0], vec![1, 3], vec![2]]);
    }

    #[test]
    fn refinement_examples() {
        assert!(refines_vec(&[1, 1, 2], &[3, 3, 4]).unwrap());
        assert!(!refines_vec(&[1, 2, 2], &[3, 3, 4]).unwrap());
        assert!(refines_vec(&[5, 5, 5], &[0, 1, 2]).unwrap());
        assert!(refines_vec(&[5, 5, 5], &[9, 9, 9]).unwrap());
        assert!(refines_vec(&[1, 2], &[1]).is_err());

        let swap01 = perm(&[1, 0, 2]);
        assert!(refines_perm(&[7, 7, 1], &swap01).unwrap());
        assert!(!refines_perm(&[7, 2, 1], &swap01).unwrap());
        assert!(refines_perm(&[7, 2, 1], &Perm::identity(3)).unwrap());
        assert!(refines_perm(&[7, 2], &swap01).is_err());
    }

    #[test]
    fn specifying_examples() {
        let swap01 = perm(&[1, 0, 2]);
        assert_eq!(specifying_vector(&[7, 7, 1], &swap01).unwrap(), vec![7, 1]);
        assert_eq!(
            specifying_vector(&[4, 4, 4], &perm(&[1, 2, 0])).unwrap(),
            vec![4]
        );
        assert!(specifying_vector(&[7, 2, 1], &swap01).is_err());
    }

    #[test]
    fn perm_matrix_examples() {
        assert_eq!(Perm::identity(3).to_matrix(), Matrix::identity(3));
        let p = perm(&[1, 0]).to_matrix();
        assert_eq!(p.data(), &[0.0, 1.0, 1.0, 0.0]);
        let s = perm(&[2, 0, 3, 1]);
        let h = [10.0, 11.0, 12.0, 13.0];
        let ph = s.to_matrix().mul_vec(&h);
        for i in 0..4 {
            assert_eq!(ph[i], h[s.apply(i)]);
        }
        let pt = s.to_matrix().transpose();
        for i in 0..4 {
            let mut e = [0.0; 4];
            e[i] = 1.0;
            let col = pt.mul_vec(&e);
            let mut expected = [0.0; 4];
            expected[s.apply(i)] = 1.0;
            assert_eq!(col, expected.to_vec());
        }
    }

    #[test]
    fn all_perms_counts() {
        assert_eq!(all_perms(0).len(), 1);
        assert_eq!(all_perms(3).len(), 6);
        assert_eq!(all_perms(4).len(), 24);
    }

    #[test]
    fn sigma_sub_l_is_a_bijection_onto_larger_group() {
        for k in 0..=4 {
            let mut seen = std::collections::HashSet::new();
            for sigma in all_perms(k) {
                for l in 0..=k {
                    let s = sigma_sub_l(&sigma, l).unwrap();
                    assert_eq!(s.inverse().apply(k), l);
                    let expected_sign = if l < k { -sigma.sign() } else { sigma.sign() };
                    assert_eq!(s.sign(), expected_sign);
                    assert!(seen.insert(s));
                }
            }
            assert_eq!(seen.len(), all_perms(k + 1).len());
        }
    }

    fn arb_perm() -> impl Strategy<Value = Perm> {
        (1usize..7)
            .prop_flat_map(|k| Just((0..k).collect::<Vec<_>>()).prop_shuffle())
            .prop_map(|v| Perm::from_image(v).unwrap())
    }

    proptest! {
        #[test]
        fn inverse_composes_to_identity(p in arb_perm()) {
            prop_assert!(p.compose(&p.inverse()).unwrap().is_identity());
            prop_assert!(p.inverse().compose(&p).unwrap().is_identity());
        }

        #[test]
        fn sign_is_multiplicative(p in arb_perm(), seed in any::<u64>()) {
            let k = p.len();
            let q = &all_perms(k)[(seed % all_perms(k).len() as u64) as usize];
            prop_assert_eq!(p.compose(q).unwrap().sign(), p.sign() * q.sign());
        }

        #[test]
        fn specifying_round_trip(p in arb_perm(), vals in proptest::collection::vec(-5i32..5, 7)) {
            let s = p.cycle_count();
            let spec = &vals[..s];
            let x = expand_specifying(spec, &p).unwrap();
            prop_assert!(refines_perm(&x, &p).unwrap());
            prop_assert_eq!(specifying_vector(&x, &p).unwrap(), spec.to_vec());
        }

        #[test]
        fn cycles_partition_the_index_set(p in arb_perm()) {
            let dec = p.cycle_decomposition();
            let mut all: Vec<usize> = dec.cycles.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..p.len()).collect::<Vec<_>>());
            prop_assert!(dec.cycles[0].contains(&0));
            for m in 1..dec.len() {
                let covered: Vec<usize> = dec.cycles[..m].iter().flatten().copied().collect();
                let smallest = (0..p.len()).find(|i| !covered.contains(i)).unwrap();
                prop_assert_eq!(dec.cycles[m][0], smallest);
            }
        }
    }
}
