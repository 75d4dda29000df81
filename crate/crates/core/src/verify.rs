//! Randomized checkers, one per identity, and the per-family grid runner.
//!
//! Exact identities report one relative residual per evaluated instance and
//! pass when every residual is within tolerance. Limit statements report
//! residuals per scale `t` and an order estimate from a least-squares fit of
//! `ln r` against `ln t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::blocks::{
    block_diagonalizer, is_block_constant, is_block_constant_within, partition_from_mu_with_tol,
    random_block_constant, random_block_orthogonal, split_in_out, stabilizer_generators,
    BlockPartition,
};
use crate::eig::{eigen_expansion_residual, eigh, offdiag_expansion_residuals, PerturbationPath};
use crate::error::{Error, Result};
use crate::hadamard::{diag_sigma, dot_hadamard_closed_form, sigma_hadamard};
use crate::lifts::{
    all_distinct, delta_matrix, determinant, divided_difference_family, divided_difference_out,
    kp_sum, lift_cycle, lift_in, lift_tau, random_coincidence_tensor,
};
use crate::matrix::Matrix;
use crate::perm::{all_perms, sigma_sub_l, Perm};
use crate::tensor::{
    conjugate, conjugate_checked, contract_last, contract_last_matrix, eval_on_matrices,
    tensor_dot, DenseTensor,
};

/// Relative tolerance for exact identities.
pub const EXACT_TOL: f64 = 1e-10;
/// Absolute tolerance for structurally exact zeros.
pub const ZERO_TOL: f64 = 1e-12;
/// Order floor for first-order limits.
pub const FIRST_ORDER_FLOOR: f64 = 0.9;
/// Order floor for `o(t)` remainders expected to be quadratic.
pub const REMAINDER_FLOOR: f64 = 1.5;
/// A limit residual series whose largest value is at most this is treated as
/// rounding noise and passes regardless of its fitted slope.
pub const NOISE_FLOOR: f64 = 1e-10;
/// Tolerance for finite-difference invariance residuals.
pub const FD_TOL: f64 = 1e-5;
pub const DEFAULT_SCALES: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Smallest accepted gap between consecutive eigenvalues of a compression.
pub const MIN_COMPRESSION_GAP: f64 = 0.1;

const ADMISSIBLE_ATTEMPTS: usize = 10_000;
const DETERMINANT_PAIRS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub params: Map<String, Value>,
    /// `(scale, residual)`; the scale is `None` for exact identities.
    pub residuals: Vec<(Option<f64>, f64)>,
    pub order_estimate: Option<f64>,
    /// Residual tolerance for exact identities, order floor for limits.
    pub tolerance: f64,
    pub pass: bool,
    /// Full instance of the first failure, for replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Value>,
}

impl CheckReport {
    pub fn exact(name: &str, params: Value, residuals: Vec<f64>, tolerance: f64) -> CheckReport {
        let pass = residuals.iter().all(|&r| r <= tolerance);
        CheckReport {
            name: name.to_string(),
            params: to_map(params),
            residuals: residuals.into_iter().map(|r| (None, r)).collect(),
            order_estimate: None,
            tolerance,
            pass,
            instance: None,
        }
    }

    /// `series[c][m]` is the residual of component `c` at `scales[m]`. Every
    /// component must either fit an order of at least `floor` or stay below
    /// [`NOISE_FLOOR`]. The reported order is the smallest fitted order among
    /// components above the noise floor.
    pub fn limit(
        name: &str,
        params: Value,
        scales: &[f64],
        series: &[Vec<f64>],
        floor: f64,
    ) -> CheckReport {
        let worst: Vec<f64> = (0..scales.len())
            .map(|m| series.iter().fold(0.0, |acc: f64, s| acc.max(s[m])))
            .collect();
        let mut pass = true;
        let mut order: Option<f64> = None;
        for s in series {
            let peak = s.iter().fold(
                0.0,
                |acc: f64, &r| if r.is_nan() { f64::NAN } else { acc.max(r) },
            );
            if peak <= NOISE_FLOOR {
                continue;
            }
            let slope = fit_order(scales, s).unwrap_or(f64::NAN);
            // a NaN slope fails and becomes the reported order
            if slope.is_nan() || slope < floor {
                pass = false;
            }
            order = Some(match order {
                Some(o) if o.is_nan() || o <= slope => o,
                _ => slope,
            });
        }
        if order.is_none() {
            order = fit_order(scales, &worst);
        }
        CheckReport {
            name: name.to_string(),
            params: to_map(params),
            residuals: scales
                .iter()
                .zip(&worst)
                .map(|(&t, &r)| (Some(t), r))
                .collect(),
            order_estimate: order,
            tolerance: floor,
            pass,
            instance: None,
        }
    }

    pub fn worst_residual(&self) -> f64 {
        self.residuals.iter().fold(
            0.0,
            |m: f64, &(_, r)| if r.is_nan() { f64::NAN } else { m.max(r) },
        )
    }

    fn with_instance(mut self, dump: impl FnOnce() -> Value) -> CheckReport {
        if !self.pass {
            self.instance = Some(dump());
        }
        self
    }

    /// A failed report for a checker that returned an error.
    pub fn from_error(name: &str, seed: u64, err: &Error) -> CheckReport {
        CheckReport {
            name: name.to_string(),
            params: to_map(json!({ "seed": seed, "error": err.to_string() })),
            residuals: Vec::new(),
            order_estimate: None,
            tolerance: 0.0,
            pass: false,
            instance: None,
        }
    }

    /// Folds several instance reports of one family into a single report.
    pub fn merge(name: &str, seed: u64, parts: Vec<CheckReport>) -> CheckReport {
        let mut residuals = Vec::new();
        let mut instances = Vec::new();
        let mut order: Option<f64> = None;
        let mut pass = true;
        let mut instance = None;
        let mut tolerance = 0.0;
        for part in parts {
            residuals.extend(part.residuals);
            instances.push(Value::Object(part.params));
            if let Some(o) = part.order_estimate {
                order = Some(order.map_or(o, |m: f64| m.min(o)));
            }
            if !part.pass {
                pass = false;
                if instance.is_none() {
                    instance = part.instance;
                }
            }
            tolerance = part.tolerance;
        }
        CheckReport {
            name: name.to_string(),
            params: to_map(json!({ "seed": seed, "instances": instances })),
            residuals,
            order_estimate: order,
            tolerance,
            pass,
            instance,
        }
    }
}

fn to_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

/// Least-squares slope of `ln r` against `ln t`. Zero residuals are clamped
/// to the smallest positive double.
pub fn fit_order(scales: &[f64], residuals: &[f64]) -> Option<f64> {
    if scales.len() < 2 || scales.len() != residuals.len() {
        return None;
    }
    let xs: Vec<f64> = scales.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = residuals
        .iter()
        .map(|r| r.max(f64::MIN_POSITIVE).ln())
        .collect();
    let m = xs.len() as f64;
    let (xm, ym) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    Some(sxy / sxx)
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Max-norm analogue of [`rel_diff`] for tensors.
pub fn rel_diff_tensor(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    Ok(a.max_abs_diff(b)? / 1f64.max(a.max_abs()).max(b.max_abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    /// Re-verify generated inputs (orthogonality, block structure, vanishing
    /// patterns) before evaluating an identity.
    pub paranoid: bool,
    /// Grouping tolerance when forming blocks from `μ`.
    pub block_tol: f64,
    /// Replaces the residual tolerance of exact checks.
    pub tol_override: Option<f64>,
    pub scales: Vec<f64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            paranoid: false,
            block_tol: 0.0,
            tol_override: None,
            scales: DEFAULT_SCALES.to_vec(),
        }
    }
}

impl CheckOptions {
    fn tol(&self, default: f64) -> f64 {
        self.tol_override.unwrap_or(default)
    }

    fn conj(&self, u: &Matrix, t: &DenseTensor) -> Result<DenseTensor> {
        if self.paranoid {
            conjugate_checked(u, t, 1e-12 * u.dim() as f64)
        } else {
            conjugate(u, t)
        }
    }

    fn ensure(&self, what: &str, cond: impl FnOnce() -> Result<bool>) -> Result<()> {
        if self.paranoid && !cond()? {
            return Err(Error::Precondition(format!(
                "paranoid check failed: {what}"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// instance generators

/// A nonincreasing `μ` with `blocks` runs of equal values separated by gaps
/// of at least one.
pub fn random_mu<R: Rng + ?Sized>(n: usize, blocks: usize, rng: &mut R) -> Result<Vec<f64>> {
    if blocks == 0 || blocks > n {
        return Err(Error::Precondition(format!("{blocks} blocks for n = {n}")));
    }
    let mut cuts: Vec<usize> = (1..n).collect();
    for i in 0..blocks - 1 {
        let j = rng.random_range(i..cuts.len());
        cuts.swap(i, j);
    }
    cuts.truncate(blocks - 1);
    cuts.sort_unstable();
    cuts.push(n);
    let mut mu = Vec::with_capacity(n);
    let mut value = rng.random_range(-1.0..1.0) + 1.5 * blocks as f64;
    let mut start = 0;
    for &end in &cuts {
        mu.extend(std::iter::repeat_n(value, end - start));
        value -= 1.0 + rng.random_range(0.0..1.0);
        start = end;
    }
    Ok(mu)
}

pub fn random_partition<R: Rng + ?Sized>(
    n: usize,
    blocks: usize,
    opts: &CheckOptions,
    rng: &mut R,
) -> Result<BlockPartition> {
    Ok(partition_from_mu_with_tol(
        &random_mu(n, blocks, rng)?,
        opts.block_tol,
    ))
}

/// Two or three blocks, capped at `n`.
pub fn pick_block_count<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    rng.random_range(2..=3).min(n).max(1)
}

/// Smallest gap between consecutive eigenvalues over all compressions.
pub fn compression_gap(m: &Matrix, p: &BlockPartition) -> Result<f64> {
    let mut gap = f64::INFINITY;
    for l in 0..p.num_blocks() {
        let ev = eigh(&p.compress(m, l))?.eigenvalues;
        for w in ev.windows(2) {
            gap = gap.min(w[0] - w[1]);
        }
    }
    Ok(gap)
}

/// Unit-norm symmetric direction whose compressions have eigenvalue gaps of
/// at least [`MIN_COMPRESSION_GAP`].
pub fn admissible_direction<R: Rng + ?Sized>(p: &BlockPartition, rng: &mut R) -> Result<Matrix> {
    for _ in 0..ADMISSIBLE_ATTEMPTS {
        let m = Matrix::random_symmetric(p.n(), rng);
        let m = m.scale(1.0 / m.frobenius_norm());
        if compression_gap(&m, p)? >= MIN_COMPRESSION_GAP {
            return Ok(m);
        }
    }
    Err(Error::Precondition("no admissible direction found".into()))
}

pub fn random_perm<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Perm {
    let mut image: Vec<usize> = (0..k).collect();
    for i in (1..k).rev() {
        image.swap(i, rng.random_range(0..=i));
    }
    Perm::from_image(image).expect("shuffle of the identity")
}

/// `s` tensors of order `s` under which the Kronecker-delta determinants
/// vanish: zero on pairwise distinct multi-indices, and `T_p^(i) = T_q^(i)`
/// whenever `i_p = i_q`.
pub fn random_determinant_family<R: Rng + ?Sized>(
    s: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<DenseTensor>> {
    let mut family = vec![DenseTensor::zeros(s, n)?; s];
    let proto = DenseTensor::zeros(s, n)?;
    for idx in proto.indices() {
        if all_distinct(&idx) {
            continue;
        }
        let per_value: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (p, t) in family.iter_mut().enumerate() {
            t.set(&idx, per_value[idx[p]]);
        }
    }
    Ok(family)
}

fn satisfies_determinant_hypotheses(family: &[DenseTensor]) -> bool {
    let s = family.len();
    family[0].indices().all(|idx| {
        if all_distinct(&idx) {
            return family.iter().all(|t| t.get(&idx) == 0.0);
        }
        (0..s).all(|p| {
            (p + 1..s).all(|q| idx[p] != idx[q] || family[p].get(&idx) == family[q].get(&idx))
        })
    })
}

fn random_matrices<R: Rng + ?Sized>(count: usize, n: usize, rng: &mut R) -> Vec<Matrix> {
    (0..count)
        .map(|_| Matrix::random_gaussian(n, rng))
        .collect()
}

fn mat_json(m: &Matrix) -> Value {
    serde_json::to_value(DenseTensor::from_matrix(m)).unwrap_or(Value::Null)
}

fn tensor_json(t: &DenseTensor) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

fn mats_json(ms: &[Matrix]) -> Value {
    Value::Array(ms.iter().map(mat_json).collect())
}

// ---------------------------------------------------------------------------
// checkers

pub fn check_eigh<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let a = Matrix::random_symmetric(n, rng);
    let dec = eigh(&a)?;
    let recon =
        a.sub(&dec.reconstruct()).frobenius_norm() / (n as f64 * a.frobenius_norm().max(1.0));
    let orth = dec.vectors.orthogonality_deviation() / n as f64;
    let disorder = dec
        .eigenvalues
        .windows(2)
        .fold(0.0, |m: f64, w| m.max(w[1] - w[0]));
    let report = CheckReport::exact(
        "check_eigh",
        json!({ "n": n }),
        vec![recon, orth, disorder],
        opts.tol(ZERO_TOL),
    );
    Ok(report.with_instance(|| json!({ "a": mat_json(&a) })))
}

pub fn check_dot_prod<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let mut residuals = Vec::new();
    let mut branches = Vec::new();
    let mut failing = None;
    let tol = opts.tol(ZERO_TOL);
    for sigma in all_perms(k) {
        let t = DenseTensor::random(k, n, rng)?;
        let h = Matrix::random_gaussian(n, rng);
        // small index ranges make the Kronecker deltas hold often
        let range = if rng.random_bool(0.5) { n } else { n.min(2) };
        let basics: Vec<(usize, usize)> = (0..k - 1)
            .map(|_| (rng.random_range(0..range), rng.random_range(0..range)))
            .collect();
        let closed = dot_hadamard_closed_form(&t, &basics, &h, &sigma)?;
        let mut hs = basics
            .iter()
            .map(|&(a, b)| crate::tensor::basis_matrix(a, b, n))
            .collect::<Result<Vec<_>>>()?;
        hs.push(h.clone());
        let brute = tensor_dot(&t, &sigma_hadamard(&hs, &sigma)?)?;
        let r = rel_diff(closed, brute);
        if r > tol && failing.is_none() {
            failing = Some(
                json!({ "t": tensor_json(&t), "h": mat_json(&h), "basics": basics, "sigma": sigma }),
            );
        }
        residuals.push(r);
        branches.push(if sigma.apply(k - 1) == k - 1 {
            "fixed"
        } else {
            "moved"
        });
    }
    let report = CheckReport::exact(
        "check_dot_prod",
        json!({ "n": n, "k": k, "branches": branches }),
        residuals,
        tol,
    );
    Ok(report.with_instance(|| failing.unwrap_or(Value::Null)))
}

pub fn check_jen3a<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let tol = opts.tol(EXACT_TOL);
    let mut residuals = Vec::new();
    let mut failing = None;
    for sigma in all_perms(k) {
        let t = DenseTensor::random(k, n, rng)?;
        let hs = random_matrices(k, n, rng);
        let v = Matrix::random_orthogonal(n, rng);
        let vt = v.transpose();
        let tilde: Vec<Matrix> = hs.iter().map(|h| vt.matmul(h).matmul(&v)).collect();
        let lhs = tensor_dot(&t, &sigma_hadamard(&tilde, &sigma)?)?;
        let rhs = eval_on_matrices(&opts.conj(&v, &diag_sigma(&t, &sigma)?)?, &hs)?;
        let r = rel_diff(lhs, rhs);
        if r > tol && failing.is_none() {
            failing = Some(
                json!({ "t": tensor_json(&t), "h": mats_json(&hs), "v": mat_json(&v), "sigma": sigma }),
            );
        }
        residuals.push(r);
    }
    let report = CheckReport::exact("check_jen3a", json!({ "n": n, "k": k }), residuals, tol);
    Ok(report.with_instance(|| failing.unwrap_or(Value::Null)))
}

pub fn check_invar_lem<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    p: &BlockPartition,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let tol = opts.tol(EXACT_TOL);
    let mut residuals = Vec::new();
    let mut failing = None;
    for sigma in all_perms(k) {
        let t = random_block_constant(p, k, rng)?;
        let u = random_block_orthogonal(p, rng);
        let d = diag_sigma(&t, &sigma)?;
        let r = rel_diff_tensor(&opts.conj(&u, &d)?, &d)?;
        if r > tol && failing.is_none() {
            failing = Some(
                json!({ "t": tensor_json(&t), "u": mat_json(&u), "sigma": sigma, "partition": p }),
            );
        }
        residuals.push(r);
    }
    let report = CheckReport::exact(
        "check_invar_lem",
        json!({ "n": p.n(), "k": k, "mu": p.mu() }),
        residuals,
        tol,
    );
    Ok(report.with_instance(|| failing.unwrap_or(Value::Null)))
}

fn admissible_path<R: Rng + ?Sized>(
    p: &BlockPartition,
    opts: &CheckOptions,
    rng: &mut R,
) -> Result<PerturbationPath> {
    let m = admissible_direction(p, rng)?;
    PerturbationPath::new(p.mu().to_vec(), m, opts.scales.clone())
}

fn path_json(path: &PerturbationPath) -> Value {
    json!({ "mu": path.mu(), "m": mat_json(path.direction()), "scales": path.scales() })
}

pub fn check_eigen_expansion<R: Rng + ?Sized>(
    rng: &mut R,
    p: &BlockPartition,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let path = admissible_path(p, opts, rng)?;
    let series = vec![path
        .scales()
        .iter()
        .map(|&t| eigen_expansion_residual(&path, t))
        .collect::<Result<Vec<_>>>()?];
    let report = CheckReport::limit(
        "check_eigen_expansion",
        json!({ "n": p.n(), "mu": p.mu() }),
        path.scales(),
        &series,
        REMAINDER_FLOOR,
    );
    Ok(report.with_instance(|| path_json(&path)))
}

pub fn check_offdiag_expansion<R: Rng + ?Sized>(
    rng: &mut R,
    p: &BlockPartition,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let path = admissible_path(p, opts, rng)?;
    let per_scale = path
        .scales()
        .iter()
        .map(|&t| offdiag_expansion_residuals(&path, t))
        .collect::<Result<Vec<_>>>()?;
    let triples = per_scale[0].len();
    let series: Vec<Vec<f64>> = (0..triples)
        .map(|c| per_scale.iter().map(|s| s[c].3).collect())
        .collect();
    let report = CheckReport::limit(
        "check_offdiag_expansion",
        json!({ "n": p.n(), "mu": p.mu(), "triples": triples }),
        path.scales(),
        &series,
        REMAINDER_FLOOR,
    );
    Ok(report.with_instance(|| path_json(&path)))
}

/// `Σ_l (Diag^{σ_(l)} T^(l)_out)[M]`.
pub fn dec14b_limit(
    t: &DenseTensor,
    sigma: &Perm,
    p: &BlockPartition,
    m: &Matrix,
) -> Result<DenseTensor> {
    let k = t.order();
    let mut acc = DenseTensor::zeros(2 * k, t.dim())?;
    for l in 0..k {
        let lifted = diag_sigma(&divided_difference_out(t, l, p)?, &sigma_sub_l(sigma, l)?)?;
        acc.axpy(1.0, &contract_last_matrix(&lifted, m)?)?;
    }
    Ok(acc)
}

/// `(U_t (Diag^σ T) U_tᵀ − Diag^σ T) / t` with `U_t` the eigenvectors of `Diag μ + tM`.
pub fn dec14b_quotient(
    path: &PerturbationPath,
    d: &DenseTensor,
    t: f64,
    opts: &CheckOptions,
) -> Result<DenseTensor> {
    let u = path.decompose(t)?.vectors;
    Ok(opts.conj(&u, d)?.sub(d)?.scale(1.0 / t))
}

pub fn check_dec14b<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    p: &BlockPartition,
    sigmas: &[Perm],
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let path = admissible_path(p, opts, rng)?;
    let t = random_block_constant(p, k, rng)?;
    opts.ensure("block-constant tensor", || is_block_constant(&t, p))?;
    let m_out = split_in_out(path.direction(), p)?.1;
    let mut series = Vec::new();
    for sigma in sigmas {
        let d = diag_sigma(&t, sigma)?;
        let rhs = dec14b_limit(&t, sigma, p, &m_out)?;
        let s = path
            .scales()
            .iter()
            .map(|&ts| dec14b_quotient(&path, &d, ts, opts)?.max_abs_diff(&rhs))
            .collect::<Result<Vec<_>>>()?;
        series.push(s);
    }
    let report = CheckReport::limit(
        "check_dec14b",
        json!({ "n": p.n(), "k": k, "mu": p.mu(), "sigmas": sigmas }),
        path.scales(),
        &series,
        FIRST_ORDER_FLOOR,
    );
    Ok(report.with_instance(
        || json!({ "path": path_json(&path), "t": tensor_json(&t), "sigmas": sigmas }),
    ))
}

fn check_part(part: u8, max: u8) -> Result<()> {
    if part == 0 || part > max {
        return Err(Error::Precondition(format!(
            "part must be in 1..={max}, got {part}"
        )));
    }
    Ok(())
}

pub fn check_dec15a<R: Rng + ?Sized>(
    rng: &mut R,
    part: u8,
    k: usize,
    p: &BlockPartition,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    check_part(part, 2)?;
    let n = p.n();
    let tol = opts.tol(EXACT_TOL);
    let m = Matrix::random_symmetric(n, rng);
    let (u, h) = block_diagonalizer(&m, p)?;
    let m_in = split_in_out(&m, p)?.0;
    opts.ensure("Uᵀ M_in U = Diag h", || {
        Ok(u.transpose()
            .matmul(&m_in)
            .matmul(&u)
            .sub(&Matrix::from_diag(&h))
            .max_abs()
            <= 1e-12 * n as f64)
    })?;
    let ut = u.transpose();
    let order = if part == 1 { k + 1 } else { k };
    let t = random_block_constant(p, order, rng)?;
    let mut residuals = Vec::new();
    for sigma in all_perms(k) {
        let hs = random_matrices(k, n, rng);
        let tilde: Vec<Matrix> = hs.iter().map(|x| ut.matmul(x).matmul(&u)).collect();
        let mut with_m = hs.clone();
        with_m.push(m_in.clone());
        let lhs_prod = sigma_hadamard(&tilde, &sigma)?;
        if part == 1 {
            let lhs = tensor_dot(&contract_last(&t, &h)?, &lhs_prod)?;
            let rhs = tensor_dot(&t, &sigma_hadamard(&with_m, &sigma_sub_l(&sigma, k)?)?)?;
            residuals.push(rel_diff(lhs, rhs));
        } else {
            for l in 0..k {
                let lhs = tensor_dot(&contract_last(&lift_tau(&t, l)?, &h)?, &lhs_prod)?;
                let rhs = tensor_dot(
                    &lift_in(&t, l, p)?,
                    &sigma_hadamard(&with_m, &sigma_sub_l(&sigma, l)?)?,
                )?;
                residuals.push(rel_diff(lhs, rhs));
            }
        }
    }
    let report = CheckReport::exact(
        "check_dec15a",
        json!({ "part": part, "n": n, "k": k, "mu": p.mu() }),
        residuals,
        tol,
    );
    Ok(report.with_instance(|| json!({ "m": mat_json(&m), "t": tensor_json(&t), "partition": p })))
}

pub fn check_dec15b<R: Rng + ?Sized>(
    rng: &mut R,
    part: u8,
    k: usize,
    p: &BlockPartition,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    check_part(part, 3)?;
    let n = p.n();
    let tol = opts.tol(ZERO_TOL);
    let mut residuals = Vec::new();
    let mut failing = None;
    let slots: Vec<usize> = if part == 3 { vec![k] } else { (0..k).collect() };
    for sigma in all_perms(k) {
        for &l in &slots {
            let base = DenseTensor::random(k, n, rng)?;
            let t = match part {
                1 => divided_difference_out(&base, l, p)?,
                2 => lift_in(&base, l, p)?,
                _ => DenseTensor::random(k + 1, n, rng)?,
            };
            if part < 3 {
                opts.ensure("vanishing pattern", || {
                    Ok(t.indices().all(|idx| {
                        let eq = p.equivalent(idx[l], idx[k]);
                        t.get(&idx) == 0.0 || (part == 1) != eq
                    }))
                })?;
            }
            let u = random_block_orthogonal(p, rng);
            let (h_in, h_out) = split_in_out(&Matrix::random_gaussian(n, rng), p)?;
            let h = if part == 1 { &h_in } else { &h_out };
            let conj = opts.conj(&u, &diag_sigma(&t, &sigma_sub_l(&sigma, l)?)?)?;
            let r = contract_last_matrix(&conj, h)?.max_abs();
            if r > tol && failing.is_none() {
                failing = Some(
                    json!({ "t": tensor_json(&t), "u": mat_json(&u), "h": mat_json(h), "sigma": sigma, "l": l }),
                );
            }
            residuals.push(r);
        }
    }
    let report = CheckReport::exact(
        "check_dec15b",
        json!({ "part": part, "n": n, "k": k, "mu": p.mu() }),
        residuals,
        tol,
    );
    Ok(report.with_instance(|| failing.unwrap_or(Value::Null)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Jan11Variant {
    A1,
    A2,
    Abc1,
    Abc2,
}

impl Jan11Variant {
    pub const ALL: [Jan11Variant; 4] = [
        Jan11Variant::A1,
        Jan11Variant::A2,
        Jan11Variant::Abc1,
        Jan11Variant::Abc2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Jan11Variant::A1 => "a1",
            Jan11Variant::A2 => "a2",
            Jan11Variant::Abc1 => "abc1",
            Jan11Variant::Abc2 => "abc2",
        }
    }
}

impl std::str::FromStr for Jan11Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Jan11Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::Precondition(format!(
                    "unknown variant {s:?}; expected a1, a2, abc1 or abc2"
                ))
            })
    }
}

pub fn check_jan11<R: Rng + ?Sized>(
    rng: &mut R,
    variant: Jan11Variant,
    k: usize,
    p: &BlockPartition,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let n = p.n();
    let tol = opts.tol(EXACT_TOL);
    let mut residuals = Vec::new();
    let (m, u, h) = match variant {
        Jan11Variant::A1 | Jan11Variant::A2 => {
            let m = Matrix::random_symmetric(n, rng);
            let (u, h) = block_diagonalizer(&m, p)?;
            (m, u, h)
        }
        Jan11Variant::Abc1 | Jan11Variant::Abc2 => {
            let m = Matrix::random_gaussian(n, rng);
            let d = m.diag();
            (m, Matrix::identity(n), d)
        }
    };
    let t = match variant {
        Jan11Variant::A1 => random_block_constant(p, k + 1, rng)?,
        Jan11Variant::A2 => random_block_constant(p, k, rng)?,
        Jan11Variant::Abc1 => DenseTensor::random(k + 1, n, rng)?,
        Jan11Variant::Abc2 => DenseTensor::random(k, n, rng)?,
    };
    for sigma in all_perms(k) {
        match variant {
            Jan11Variant::A1 | Jan11Variant::Abc1 => {
                let lhs = opts.conj(&u, &diag_sigma(&contract_last(&t, &h)?, &sigma)?)?;
                let rhs = contract_last_matrix(&diag_sigma(&t, &sigma_sub_l(&sigma, k)?)?, &m)?;
                residuals.push(rel_diff_tensor(&lhs, &rhs)?);
            }
            Jan11Variant::A2 | Jan11Variant::Abc2 => {
                for l in 0..k {
                    let tau = lift_tau(&t, l)?;
                    let lhs = opts.conj(&u, &diag_sigma(&contract_last(&tau, &h)?, &sigma)?)?;
                    let right = if variant == Jan11Variant::A2 {
                        lift_in(&t, l, p)?
                    } else {
                        tau
                    };
                    let rhs =
                        contract_last_matrix(&diag_sigma(&right, &sigma_sub_l(&sigma, l)?)?, &m)?;
                    residuals.push(rel_diff_tensor(&lhs, &rhs)?);
                }
            }
        }
    }
    let report = CheckReport::exact(
        "check_jan11",
        json!({ "variant": variant, "n": n, "k": k, "mu": p.mu() }),
        residuals,
        tol,
    );
    Ok(report.with_instance(|| json!({ "m": mat_json(&m), "t": tensor_json(&t), "partition": p })))
}

fn determinant_residuals<R: Rng + ?Sized>(
    family: &[DenseTensor],
    rng: &mut R,
) -> Result<(f64, f64)> {
    let s = family.len();
    let n = family[0].dim();
    let mut worst: f64 = 0.0;
    for _ in 0..DETERMINANT_PAIRS {
        let i: Vec<usize> = (0..s).map(|_| rng.random_range(0..n)).collect();
        let j: Vec<usize> = (0..s).map(|_| rng.random_range(0..n)).collect();
        worst = worst.max(determinant(&delta_matrix(family, &i, &j)?).abs());
    }
    Ok((worst, kp_sum(family)?.max_abs()))
}

/// Runs a directly constructed family and the divided-difference family of a
/// symmetric `(s-1)`-tensor vanishing on pairwise distinct multi-indices
/// (identically zero for `s = 2`).
pub fn check_determinant_section<R: Rng + ?Sized>(
    rng: &mut R,
    s: usize,
    p: &BlockPartition,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    if !(2..=3).contains(&s) {
        return Err(Error::Precondition(format!("s must be 2 or 3, got {s}")));
    }
    let n = p.n();
    let tol = opts.tol(ZERO_TOL);
    let t = random_coincidence_tensor(s - 1, n, rng)?;
    let families = vec![
        ("direct", random_determinant_family(s, n, rng)?),
        ("divided_difference", divided_difference_family(&t, p)?),
    ];
    let mut residuals = Vec::new();
    let mut labels = Vec::new();
    for (label, family) in &families {
        opts.ensure("determinant family hypotheses", || {
            Ok(satisfies_determinant_hypotheses(family))
        })?;
        let (det, sum) = determinant_residuals(family, rng)?;
        residuals.push(det);
        residuals.push(sum);
        labels.push(format!("{label}:det"));
        labels.push(format!("{label}:sum"));
    }
    let report = CheckReport::exact(
        "check_determinant_section",
        json!({ "s": s, "n": n, "mu": p.mu(), "residuals": labels }),
        residuals,
        tol,
    );
    Ok(report.with_instance(|| {
        json!({
            "partition": p,
            "families": families
                .iter()
                .map(|(label, f)| json!({ "label": label, "tensors": f.iter().map(tensor_json).collect::<Vec<_>>() }))
                .collect::<Vec<_>>(),
        })
    }))
}

/// For every `ν` on `{0..k}` fixing `k`: `T[h] = T[diag M]`,
/// `T^ν[h] = T^ν[diag M]` and `Diag^σ(T^ν[h]) = (Diag^{σ_(k)} T^ν)[M]`.
pub fn check_cycle_lifting<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    p: &BlockPartition,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let n = p.n();
    let tol = opts.tol(EXACT_TOL);
    let m = Matrix::random_symmetric(n, rng);
    let (_, h) = block_diagonalizer(&m, p)?;
    let diag_m = m.diag();
    let mut residuals = Vec::new();
    let mut nus = Vec::new();
    for base in all_perms(k) {
        let nu = base.extend_fixing_last();
        let t = random_block_constant(p, nu.cycle_count(), rng)?;
        residuals.push(rel_diff_tensor(
            &contract_last(&t, &h)?,
            &contract_last(&t, &diag_m)?,
        )?);
        let lifted = lift_cycle(&t, &nu)?;
        let on_h = contract_last(&lifted, &h)?;
        residuals.push(rel_diff_tensor(&on_h, &contract_last(&lifted, &diag_m)?)?);
        for sigma in all_perms(k) {
            let lhs = diag_sigma(&on_h, &sigma)?;
            let rhs = contract_last_matrix(&diag_sigma(&lifted, &sigma_sub_l(&sigma, k)?)?, &m)?;
            residuals.push(rel_diff_tensor(&lhs, &rhs)?);
        }
        nus.push(nu);
    }
    let report = CheckReport::exact(
        "check_cycle_lifting",
        json!({ "n": n, "k": k, "mu": p.mu(), "nus": nus }),
        residuals,
        tol,
    );
    Ok(report.with_instance(|| json!({ "m": mat_json(&m), "partition": p })))
}

/// Built-in symmetric functions for the block-invariance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymFn {
    /// `Σ x_i³`.
    #[serde(rename = "sum-of-cubes")]
    SumOfCubes,
    /// `Σ_{i<j} x_i x_j`.
    #[serde(rename = "e2")]
    ElementarySymmetric2,
}

impl SymFn {
    pub const ALL: [SymFn; 2] = [SymFn::SumOfCubes, SymFn::ElementarySymmetric2];

    pub fn as_str(self) -> &'static str {
        match self {
            SymFn::SumOfCubes => "sum-of-cubes",
            SymFn::ElementarySymmetric2 => "e2",
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            SymFn::SumOfCubes => x.iter().map(|v| v * v * v).sum(),
            SymFn::ElementarySymmetric2 => {
                let s: f64 = x.iter().sum();
                let q: f64 = x.iter().map(|v| v * v).sum();
                0.5 * (s * s - q)
            }
        }
    }
}

impl std::str::FromStr for SymFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SymFn::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| {
                Error::Precondition(format!(
                    "unknown function {s:?}; expected sum-of-cubes or e2"
                ))
            })
    }
}

fn bumped(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Step `h` rounded so that `x + h` is exactly representable offset from `x`.
fn fd_step(x: f64, rel: f64) -> f64 {
    let h = rel * x.abs().max(1.0);
    (x + h) - x
}

/// Central differences with step `cbrt(ε)·max(1, |x_i|)`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let rel = f64::EPSILON.cbrt();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i], rel);
            (f(&bumped(x, &[(i, h)])) - f(&bumped(x, &[(i, -h)]))) / (2.0 * h)
        })
        .collect()
}

/// Central second differences with step `ε^(1/4)·max(1, |x_i|)`.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Matrix {
    let rel = f64::EPSILON.powf(0.25);
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|&v| fd_step(v, rel)).collect();
    let f0 = f(x);
    let mut hess = Matrix::zeros(n);
    for i in 0..n {
        let hi = steps[i];
        hess[(i, i)] =
            (f(&bumped(x, &[(i, hi)])) - 2.0 * f0 + f(&bumped(x, &[(i, -hi)]))) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let v = (f(&bumped(x, &[(i, hi), (j, hj)]))
                - f(&bumped(x, &[(i, hi), (j, -hj)]))
                - f(&bumped(x, &[(i, -hi), (j, hj)]))
                + f(&bumped(x, &[(i, -hi), (j, -hj)])))
                / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Invariance of `∇f(μ)` (and for `s = 2` of `∇²f(μ)`) under the
/// transpositions generating the stabiliser of `μ`.
pub fn check_block_l(f: SymFn, mu: &[f64], s: usize, opts: &CheckOptions) -> Result<CheckReport> {
    if !(1..=2).contains(&s) {
        return Err(Error::Precondition(format!(
            "derivative order must be 1 or 2, got {s}"
        )));
    }
    let tol = opts.tol(FD_TOL);
    let p = partition_from_mu_with_tol(mu, opts.block_tol);
    let eval = |x: &[f64]| f.eval(x);
    let grad = fd_gradient(eval, mu);
    let hess = (s == 2).then(|| fd_hessian(eval, mu));
    let mut residuals = Vec::new();
    for gen in stabilizer_generators(&p) {
        let g_res = (0..mu.len()).fold(0.0, |m: f64, i| m.max((grad[i] - grad[gen[i]]).abs()));
        residuals.push(g_res);
        if let Some(hm) = &hess {
            let mut h_res: f64 = 0.0;
            for i in 0..mu.len() {
                for j in 0..mu.len() {
                    h_res = h_res.max((hm[(i, j)] - hm[(gen[i], gen[j])]).abs());
                }
            }
            residuals.push(h_res);
        }
    }
    let grad_tensor = DenseTensor::from_vector(&grad);
    let constant = is_block_constant_within(&grad_tensor, &p, tol)?;
    residuals.push(if constant { 0.0 } else { f64::INFINITY });
    let report = CheckReport::exact(
        "check_block_l",
        json!({ "f": f, "mu": mu, "s": s, "generators": stabilizer_generators(&p).len() }),
        residuals,
        tol,
    );
    Ok(report.with_instance(|| json!({ "mu": mu, "gradient": grad })))
}

// ---------------------------------------------------------------------------
// families

/// Registered check families, sorted by name.
pub const FAMILIES: [&str; 13] = [
    "check_block_l",
    "check_cycle_lifting",
    "check_dec14b",
    "check_dec15a",
    "check_dec15b",
    "check_determinant_section",
    "check_dot_prod",
    "check_eigen_expansion",
    "check_eigh",
    "check_invar_lem",
    "check_jan11",
    "check_jen3a",
    "check_offdiag_expansion",
];

/// Largest `n` each family accepts; larger grid points are skipped.
fn n_cap(name: &str) -> usize {
    match name {
        "check_jen3a" | "check_dec15b" | "check_jan11" | "check_dec14b" => 5,
        "check_determinant_section" => 4,
        _ => 8,
    }
}

/// Grid and options shared by every trial of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n_list: Vec<usize>,
    pub k_max: usize,
    pub opts: CheckOptions,
    /// Restricts `check_dec15a` / `check_dec15b` to one part.
    pub part: Option<u8>,
    /// Restricts `check_jan11` to one variant.
    pub variant: Option<Jan11Variant>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_list: vec![3, 4],
            k_max: 3,
            opts: CheckOptions::default(),
            part: None,
            variant: None,
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of trial `trial` of family `name` under master seed `seed`.
pub fn trial_seed(seed: u64, name: &str, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(name));
    rng.set_stream(trial as u64);
    rng.random()
}

pub fn is_family(name: &str) -> bool {
    FAMILIES.contains(&name)
}

/// Runs one trial of a family over the whole grid and merges the instance
/// reports into one. Errors are turned into failed reports.
pub fn run_trial(name: &str, grid: &GridConfig, seed: u64) -> CheckReport {
    match run_trial_inner(name, grid, seed) {
        Ok(parts) if parts.is_empty() => CheckReport::from_error(
            name,
            seed,
            &Error::Precondition("no grid point is admissible for this family".into()),
        ),
        Ok(parts) => CheckReport::merge(name, seed, parts),
        Err(e) => CheckReport::from_error(name, seed, &e),
    }
}

fn run_trial_inner(name: &str, grid: &GridConfig, seed: u64) -> Result<Vec<CheckReport>> {
    if !is_family(name) {
        return Err(Error::Precondition(format!("unknown check {name:?}")));
    }
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    let opts = &grid.opts;
    let ns: Vec<usize> = grid
        .n_list
        .iter()
        .copied()
        .filter(|&n| n >= 2 && n <= n_cap(name))
        .collect();
    let ks = 1..=grid.k_max;
    let mut out = Vec::new();
    match name {
        "check_eigh" => {
            for n in 2..=8 {
                out.push(check_eigh(rng, n, opts)?);
            }
        }
        "check_dot_prod" => {
            for &n in &ns {
                for k in ks.clone() {
                    out.push(check_dot_prod(rng, n, k, opts)?);
                }
            }
        }
        "check_jen3a" => {
            for &n in &ns {
                for k in ks.clone() {
                    out.push(check_jen3a(rng, n, k, opts)?);
                }
            }
        }
        "check_eigen_expansion" | "check_offdiag_expansion" => {
            for &n in &ns {
                let p = random_partition(n, pick_block_count(n, rng), opts, rng)?;
                out.push(if name == "check_eigen_expansion" {
                    check_eigen_expansion(rng, &p, opts)?
                } else {
                    check_offdiag_expansion(rng, &p, opts)?
                });
            }
        }
        "check_block_l" => {
            for &n in &ns {
                let p = random_partition(n, pick_block_count(n, rng), opts, rng)?;
                for f in SymFn::ALL {
                    for s in 1..=2 {
                        out.push(check_block_l(f, p.mu(), s, opts)?);
                    }
                }
            }
        }
        "check_determinant_section" => {
            for &n in &ns {
                for s in 2..=3 {
                    let p = random_partition(n, pick_block_count(n, rng), opts, rng)?;
                    out.push(check_determinant_section(rng, s, &p, opts)?);
                }
            }
        }
        _ => {
            for &n in &ns {
                for k in ks.clone() {
                    let p = random_partition(n, pick_block_count(n, rng), opts, rng)?;
                    match name {
                        "check_invar_lem" => out.push(check_invar_lem(rng, k, &p, opts)?),
                        "check_dec14b" => {
                            let sigmas = if k <= 2 {
                                all_perms(k)
                            } else {
                                vec![random_perm(k, rng), random_perm(k, rng)]
                            };
                            out.push(check_dec14b(rng, k, &p, &sigmas, opts)?);
                        }
                        "check_dec15a" => {
                            for part in grid.part.map_or(vec![1, 2], |x| vec![x]) {
                                out.push(check_dec15a(rng, part, k, &p, opts)?);
                            }
                        }
                        "check_dec15b" => {
                            for part in grid.part.map_or(vec![1, 2, 3], |x| vec![x]) {
                                out.push(check_dec15b(rng, part, k, &p, opts)?);
                            }
                        }
                        "check_jan11" => {
                            for v in grid.variant.map_or(Jan11Variant::ALL.to_vec(), |v| vec![v]) {
                                out.push(check_jan11(rng, v, k, &p, opts)?);
                            }
                        }
                        "check_cycle_lifting" => out.push(check_cycle_lifting(rng, k, &p, opts)?),
                        _ => unreachable!("family list is exhaustive"),
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::partition_from_mu;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn fit_order_recovers_powers() {
        let scales = DEFAULT_SCALES;
        for power in [1.0, 2.0, 3.0] {
            let r: Vec<f64> = scales.iter().map(|t: &f64| 0.7 * t.powf(power)).collect();
            assert!((fit_order(&scales, &r).unwrap() - power).abs() < 1e-12);
        }
        assert!(fit_order(&[1e-2], &[1.0]).is_none());
    }

    #[test]
    fn limit_report_noise_and_failure() {
        let scales = DEFAULT_SCALES;
        let quad: Vec<f64> = scales.iter().map(|t| t * t).collect();
        let noise = vec![1e-13, 3e-14, 2e-13];
        let flat = vec![1e-3, 1e-3, 1e-3];
        let ok = CheckReport::limit("x", json!({}), &scales, &[quad.clone(), noise], 1.5);
        assert!(ok.pass);
        assert!((ok.order_estimate.unwrap() - 2.0).abs() < 1e-12);
        let bad = CheckReport::limit("x", json!({}), &scales, &[quad, flat], 1.5);
        assert!(!bad.pass);
        let nan = CheckReport::limit("x", json!({}), &scales, &[vec![f64::NAN; 3]], 1.5);
        assert!(!nan.pass);
    }

    #[test]
    fn exact_report_rejects_nan() {
        assert!(!CheckReport::exact("x", json!({}), vec![0.0, f64::NAN], 1e-10).pass);
        assert!(CheckReport::exact("x", json!({}), vec![0.0, 1e-11], 1e-10).pass);
    }

    #[test]
    fn random_mu_is_admissible() {
        let mut r = rng(1);
        for n in 2..=6 {
            for blocks in 1..=n {
                let mu = random_mu(n, blocks, &mut r).unwrap();
                let p = partition_from_mu(&mu);
                assert_eq!(p.num_blocks(), blocks);
                assert!(p.is_contiguous());
                for w in mu.windows(2) {
                    assert!(w[0] == w[1] || w[0] - w[1] >= 1.0);
                }
            }
        }
        assert!(random_mu(3, 4, &mut r).is_err());
    }

    #[test]
    fn admissible_direction_gaps() {
        let mut r = rng(2);
        let p = partition_from_mu(&[3.0, 3.0, 3.0, 1.0]);
        let m = admissible_direction(&p, &mut r).unwrap();
        assert!((m.frobenius_norm() - 1.0).abs() < 1e-14);
        assert!(compression_gap(&m, &p).unwrap() >= MIN_COMPRESSION_GAP);
    }

    #[test]
    fn determinant_family_satisfies_hypotheses() {
        let mut r = rng(3);
        for s in 2..=3 {
            let family = random_determinant_family(s, 3, &mut r).unwrap();
            assert!(satisfies_determinant_hypotheses(&family));
        }
        let p = partition_from_mu(&[2.0, 2.0, 0.0]);
        let t = random_coincidence_tensor(2, 3, &mut r).unwrap();
        let family = divided_difference_family(&t, &p).unwrap();
        let s = family.len();
        // the divided-difference family agrees on coincident slots only up to rounding
        assert!(family[0].indices().all(|idx| {
            (0..s).all(|a| {
                (a + 1..s).all(|b| {
                    idx[a] != idx[b] || (family[a].get(&idx) - family[b].get(&idx)).abs() < 1e-12
                })
            })
        }));
    }

    #[test]
    fn jen3a_identity_orthogonal_is_trivial() {
        // V = I: both sides coincide through the Diag^σ / evaluation duality
        let mut r = rng(4);
        let t = DenseTensor::random(2, 3, &mut r).unwrap();
        let hs = random_matrices(2, 3, &mut r);
        for sigma in all_perms(2) {
            let lhs = tensor_dot(&t, &sigma_hadamard(&hs, &sigma).unwrap()).unwrap();
            let rhs = eval_on_matrices(&diag_sigma(&t, &sigma).unwrap(), &hs).unwrap();
            assert!(rel_diff(lhs, rhs) < 1e-14);
        }
    }

    #[test]
    fn invar_lem_sign_diagonal() {
        let mut r = rng(5);
        let p = BlockPartition::singletons(4);
        let t = DenseTensor::random(2, 4, &mut r).unwrap();
        let u = Matrix::from_diag(&[1.0, -1.0, -1.0, 1.0]);
        for sigma in all_perms(2) {
            let d = diag_sigma(&t, &sigma).unwrap();
            assert!(conjugate(&u, &d).unwrap().max_abs_diff(&d).unwrap() <= 1e-14);
        }
        let report = check_invar_lem(
            &mut r,
            2,
            &partition_from_mu(&[2.0, 2.0, 1.0, 1.0]),
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        let _ = p;
    }

    #[test]
    fn eigen_expansion_two_by_two_closed_form() {
        // λ = (3 ± √(1+2t²))/2 and h(tM) = 0, so the residual is (√(1+2t²) − 1)/2 ≈ t²/2
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).scale(0.5f64.sqrt());
        let path = PerturbationPath::new(vec![2.0, 1.0], m, DEFAULT_SCALES.to_vec()).unwrap();
        for &t in path.scales() {
            let r = eigen_expansion_residual(&path, t).unwrap();
            let exact = ((1.0 + 2.0 * t * t).sqrt() - 1.0) / 2.0;
            assert!((r - exact).abs() <= 1e-15 + 1e-6 * exact);
            assert!((r / (t * t / 2.0) - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn dec14b_block_diagonal_direction() {
        let p = partition_from_mu(&[3.0, 3.0, 1.0]);
        let m = Matrix::from_rows(&[&[0.3, 0.5, 0.0], &[0.5, -0.2, 0.0], &[0.0, 0.0, 0.4]]);
        let path =
            PerturbationPath::normalized(p.mu().to_vec(), &m, DEFAULT_SCALES.to_vec()).unwrap();
        let mut r = rng(6);
        let t = random_block_constant(&p, 2, &mut r).unwrap();
        let m_out = split_in_out(path.direction(), &p).unwrap().1;
        for sigma in all_perms(2) {
            assert_eq!(dec14b_limit(&t, &sigma, &p, &m_out).unwrap().max_abs(), 0.0);
            let d = diag_sigma(&t, &sigma).unwrap();
            for &ts in path.scales() {
                let q = dec14b_quotient(&path, &d, ts, &CheckOptions::default()).unwrap();
                assert!(q.max_abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dec14b_vector_case_is_first_divided_difference() {
        let p = partition_from_mu(&[2.0, 1.0]);
        let t = DenseTensor::from_vector(&[0.5, -1.5]);
        let m = Matrix::from_rows(&[&[0.1, 0.7], &[0.7, -0.3]]);
        let limit = dec14b_limit(&t, &Perm::identity(1), &p, &m).unwrap();
        let dd = (t.get(&[1]) - t.get(&[0])) / (1.0 - 2.0);
        let expected = Matrix::from_rows(&[&[0.0, dd * 0.7], &[dd * 0.7, 0.0]]);
        assert!(limit.to_matrix().unwrap().sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn dec15a_zero_direction() {
        let p = partition_from_mu(&[2.0, 2.0, 1.0]);
        let m = Matrix::zeros(3);
        let (u, h) = block_diagonalizer(&m, &p).unwrap();
        assert!(h.iter().all(|&x| x == 0.0));
        let mut r = rng(7);
        let t = random_block_constant(&p, 2, &mut r).unwrap();
        let hs = random_matrices(1, 3, &mut r);
        let tilde = vec![u.transpose().matmul(&hs[0]).matmul(&u)];
        let lhs = tensor_dot(
            &contract_last(&t, &h).unwrap(),
            &sigma_hadamard(&tilde, &Perm::identity(1)).unwrap(),
        )
        .unwrap();
        assert_eq!(lhs, 0.0);
    }

    #[test]
    fn jan11_abc1_diagonal_matrix() {
        let mut r = rng(8);
        let t = DenseTensor::random(3, 3, &mut r).unwrap();
        let h = Matrix::from_diag(&[0.5, -2.0, 1.0]);
        for sigma in all_perms(2) {
            let lhs = diag_sigma(&contract_last(&t, &h.diag()).unwrap(), &sigma).unwrap();
            let rhs = contract_last_matrix(
                &diag_sigma(&t, &sigma_sub_l(&sigma, 2).unwrap()).unwrap(),
                &h,
            )
            .unwrap();
            assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn cycle_lifting_diagonal_direction() {
        // M diagonal: h is the block-wise sorted diagonal, so block sums agree
        let p = partition_from_mu(&[4.0, 4.0, 4.0, 1.0]);
        let m = Matrix::from_diag(&[0.2, 0.9, -0.4, 0.3]);
        let (_, h) = block_diagonalizer(&m, &p).unwrap();
        assert_eq!(h, vec![0.9, 0.2, -0.4, 0.3]);
        let mut r = rng(9);
        let t = random_block_constant(&p, 2, &mut r).unwrap();
        let a = contract_last(&t, &h).unwrap();
        let b = contract_last(&t, &m.diag()).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
    }

    #[test]
    fn block_l_analytic_oracles() {
        let mu = [2.0, 2.0, 1.0];
        let g = fd_gradient(|x| SymFn::SumOfCubes.eval(x), &mu);
        for (gi, x) in g.iter().zip(mu) {
            assert!((gi - 3.0 * x * x).abs() < 1e-8);
        }
        let mu = [1.0, 1.0, 0.0];
        let h = fd_hessian(|x| SymFn::ElementarySymmetric2.eval(x), &mu);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 1.0 };
                assert!((h[(i, j)] - expected).abs() < 1e-6);
            }
        }
        let opts = CheckOptions::default();
        for f in SymFn::ALL {
            for s in 1..=2 {
                assert!(check_block_l(f, &[2.0, 2.0, 1.0], s, &opts).unwrap().pass);
                assert!(check_block_l(f, &[3.0, 2.0, 1.0], s, &opts).unwrap().pass);
            }
        }
        assert!(check_block_l(SymFn::SumOfCubes, &[1.0], 3, &opts).is_err());
        assert!("nope".parse::<SymFn>().is_err());
    }

    #[test]
    fn every_family_passes_one_trial() {
        let grid = GridConfig {
            n_list: vec![3],
            k_max: 2,
            ..GridConfig::default()
        };
        for name in FAMILIES {
            let report = run_trial(name, &grid, trial_seed(11, name, 0));
            assert!(
                report.pass,
                "{name}: {}",
                serde_json::to_string(&report).unwrap()
            );
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let grid = GridConfig {
            n_list: vec![3],
            k_max: 2,
            ..GridConfig::default()
        };
        let a = run_trial("check_dec14b", &grid, trial_seed(5, "check_dec14b", 1));
        let b = run_trial("check_dec14b", &grid, trial_seed(5, "check_dec14b", 1));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_ne!(
            trial_seed(5, "check_dec14b", 0),
            trial_seed(5, "check_dec14b", 1)
        );
        assert_ne!(
            trial_seed(5, "check_dec14b", 0),
            trial_seed(5, "check_jen3a", 0)
        );
    }

    #[test]
    fn unknown_family_and_bad_part_fail() {
        let grid = GridConfig::default();
        assert!(!run_trial("nosuch", &grid, 0).pass);
        let bad = GridConfig {
            part: Some(4),
            ..GridConfig::default()
        };
        assert!(!run_trial("check_dec15a", &bad, 0).pass);
    }

    #[test]
    fn tol_override_changes_verdict() {
        let opts = CheckOptions {
            tol_override: Some(-1.0),
            ..CheckOptions::default()
        };
        let report = check_jen3a(&mut rng(12), 3, 1, &opts).unwrap();
        assert!(!report.pass);
        assert!(report.instance.is_some());
    }
}
