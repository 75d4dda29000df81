//! Symmetric eigendecomposition by cyclic Jacobi rotations, and the
//! first-order eigenvalue / eigenvector expansions around `Diag μ`.

use crate::blocks::{partition_from_mu, BlockPartition};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Off-diagonal Frobenius mass at which Jacobi sweeps stop, relative to `‖A‖_F`.
pub const JACOBI_TOL: f64 = 1e-14;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// `A = U Diag(λ) Uᵀ` with `λ` nonincreasing and column `j` of `U` paired
/// with `λ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub vectors: Matrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        self.vectors
            .matmul(&Matrix::from_diag(&self.eigenvalues))
            .matmul(&self.vectors.transpose())
    }
}

fn off_diagonal_mass(a: &Matrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi eigensolver.
///
/// Deterministic: fixed row-by-row sweep order, stable nonincreasing sort
/// of the eigenvalues, and each eigenvector column flipped so that its
/// largest-magnitude entry (first on ties) is nonnegative.
pub fn eigh(a: &Matrix) -> Result<SpectralDecomposition> {
    let n = a.dim();
    let norm = a.frobenius_norm();
    let asymmetry = a.asymmetry();
    if asymmetry > 1e-10 * norm {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let mut w = Matrix::from_fn(n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_TOL * norm;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_mass(&w);
        if off <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut w, &mut v, p, q);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their diagonal order
    order.sort_by(|&x, &y| w[(y, y)].total_cmp(&w[(x, x)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, |i, c| v[(i, order[c])]);
    for c in 0..n {
        let mut lead = 0;
        for i in 1..n {
            if vectors[(i, c)].abs() > vectors[(lead, c)].abs() {
                lead = i;
            }
        }
        if vectors[(lead, c)] < 0.0 {
            for i in 0..n {
                vectors[(i, c)] = -vectors[(i, c)];
            }
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
    })
}

/// One Jacobi rotation annihilating `w[p][q]`; accumulates into `v`.
fn rotate(w: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = w[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = w.dim();
    let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let app = w[(p, p)];
    let aqq = w[(q, q)];
    w[(p, p)] = app - t * apq;
    w[(q, q)] = aqq + t * apq;
    w[(p, q)] = 0.0;
    w[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = w[(r, p)];
        let arq = w[(r, q)];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        w[(r, p)] = new_rp;
        w[(p, r)] = new_rp;
        w[(r, q)] = new_rq;
        w[(q, r)] = new_rq;
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}

/// The vector `h`: eigenvalues of each compression `X_lᵀ M X_l`,
/// nonincreasing within each block, concatenated in block order.
pub fn h_of(m: &Matrix, p: &BlockPartition) -> Result<Vec<f64>> {
    if !p.is_contiguous() {
        return Err(Error::NonContiguousBlocks);
    }
    if m.dim() != p.n() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix against a partition of {}",
            m.dim(),
            m.dim(),
            p.n()
        )));
    }
    let mut h = Vec::with_capacity(p.n());
    for l in 0..p.num_blocks() {
        h.extend(eigh(&p.compress(m, l))?.eigenvalues);
    }
    Ok(h)
}

/// The straight-line perturbation `Diag μ + t M` for a unit-norm symmetric
/// direction `M` and strictly decreasing positive scales `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPath {
    mu: Vec<f64>,
    direction: Matrix,
    scales: Vec<f64>,
    partition: BlockPartition,
}

impl PerturbationPath {
    pub fn new(mu: Vec<f64>, direction: Matrix, scales: Vec<f64>) -> Result<PerturbationPath> {
        if mu.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Precondition("mu must be nonincreasing".into()));
        }
        if direction.dim() != mu.len() {
            return Err(Error::ShapeMismatch(format!(
                "direction of size {} for mu of length {}",
                direction.dim(),
                mu.len()
            )));
        }
        let asymmetry = direction.asymmetry();
        if asymmetry > 1e-12 {
            return Err(Error::NotSymmetric { asymmetry });
        }
        if (direction.frobenius_norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(
                "direction must have unit Frobenius norm".into(),
            ));
        }
        if scales.iter().any(|&t| t <= 0.0 || !t.is_finite())
            || scales.windows(2).any(|w| w[0] <= w[1])
        {
            return Err(Error::Precondition(
                "scales must be positive and strictly decreasing".into(),
            ));
        }
        let partition = partition_from_mu(&mu);
        Ok(PerturbationPath {
            mu,
            direction,
            scales,
            partition,
        })
    }

    /// Like [`PerturbationPath::new`], rescaling `direction` to unit norm.
    pub fn normalized(
        mu: Vec<f64>,
        direction: &Matrix,
        scales: Vec<f64>,
    ) -> Result<PerturbationPath> {
        let norm = direction.frobenius_norm();
        if norm == 0.0 {
            return Err(Error::Precondition("zero direction".into()));
        }
        PerturbationPath::new(mu, direction.scale(1.0 / norm), scales)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn direction(&self) -> &Matrix {
        &self.direction
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    /// `Diag μ + t M`.
    pub fn point(&self, t: f64) -> Matrix {
        Matrix::from_diag(&self.mu).add(&self.direction.scale(t))
    }

    fn check_scale(&self, t: f64) -> Result<()> {
        if !self.scales.contains(&t) {
            return Err(Error::Precondition(format!("scale {t} is not on the path")));
        }
        Ok(())
    }

    /// Eigendecomposition of the perturbed matrix at scale `t`.
    pub fn decompose(&self, t: f64) -> Result<SpectralDecomposition> {
        self.check_scale(t)?;
        eigh(&self.point(t))
    }
}

/// `‖λ(Diag μ + tM) − μ − h(tM)‖_∞`, which is `o(t)`.
pub fn eigen_expansion_residual(path: &PerturbationPath, t: f64) -> Result<f64> {
    let lambda = path.decompose(t)?.eigenvalues;
    let h = h_of(&path.direction.scale(t), &path.partition)?;
    Ok(lambda
        .iter()
        .zip(&path.mu)
        .zip(&h)
        .fold(0.0, |m, ((l, mu), h)| m.max((l - mu - h).abs())))
}

/// `Σ_{p∈I_b} U^(ip) U^(jp)`: entry `(i, j)` of the spectral projector onto the
/// eigenvectors indexed by block `b`. Invariant under column sign flips and
/// reordering within the block.
pub fn block_projector_entry(u: &Matrix, p: &BlockPartition, i: usize, j: usize, b: usize) -> f64 {
    p.blocks()[b].iter().map(|&c| u[(i, c)] * u[(j, c)]).sum()
}

/// First-order prediction for [`block_projector_entry`] at scale `t`:
/// `δ_ij δ_{l,b} + (δ_{l,b} − δ_{s,b}) / (μ_i − μ_j) · M^(ij) · ‖tM‖_F`,
/// where `i ∈ I_l`, `j ∈ I_s` and the fraction is zero when the deltas agree.
pub fn projector_first_order(path: &PerturbationPath, t: f64, i: usize, j: usize, b: usize) -> f64 {
    let p = &path.partition;
    let l = p.block_of(i);
    let s = p.block_of(j);
    let dl = (l == b) as i32;
    let ds = (s == b) as i32;
    let constant = if i == j && l == b { 1.0 } else { 0.0 };
    if dl == ds {
        return constant;
    }
    let scale = t * path.direction.frobenius_norm();
    constant + f64::from(dl - ds) / (path.mu[i] - path.mu[j]) * path.direction[(i, j)] * scale
}

/// Residual of the first-order expansion of `Σ_{p∈I_b} U_t^(ip) U_t^(jp)`,
/// which is `o(t)`.
pub fn offdiag_expansion_residual(
    path: &PerturbationPath,
    t: f64,
    i: usize,
    j: usize,
    tblock: usize,
) -> Result<f64> {
    let n = path.mu.len();
    for x in [i, j] {
        if x >= n {
            return Err(Error::IndexOutOfRange { index: x, limit: n });
        }
    }
    if tblock >= path.partition.num_blocks() {
        return Err(Error::IndexOutOfRange {
            index: tblock,
            limit: path.partition.num_blocks(),
        });
    }
    let u = path.decompose(t)?.vectors;
    let actual = block_projector_entry(&u, &path.partition, i, j, tblock);
    Ok((actual - projector_first_order(path, t, i, j, tblock)).abs())
}

/// All `(i, j, block, residual)` triples at scale `t` from one eigendecomposition.
pub fn offdiag_expansion_residuals(
    path: &PerturbationPath,
    t: f64,
) -> Result<Vec<(usize, usize, usize, f64)>> {
    let u = path.decompose(t)?.vectors;
    let n = path.mu.len();
    let mut out = Vec::with_capacity(n * n * path.partition.num_blocks());
    for i in 0..n {
        for j in 0..n {
            for b in 0..path.partition.num_blocks() {
                let actual = block_projector_entry(&u, &path.partition, i, j, b);
                let r = (actual - projector_first_order(path, t, i, j, b)).abs();
                out.push((i, j, b, r));
            }
        }
    }
    Ok(out)
}
