//! Posterior symmetries of the factor model.
//!
//! The likelihood only sees `A Bᵀ`, so it is unchanged by `(A, B) ↦ (A W, B W⁻ᵀ)`
//! for every invertible `W`. The priors cut this group down. With zero means
//! the surviving transforms are `W = T_a^{1/2} Q T_a^{-1/2}` where `Q` is
//! orthogonal and block diagonal over the partition of columns by the
//! precision product `τ_{a,k} τ_{b,k}`. Non-zero means remove every
//! non-identity transform exactly when each block matrix
//!
//! ```text
//! P_ℓ = [ M_a[:, Λ_ℓ] T_a[Λ_ℓ]^{1/2} ]
//!       [ M_b[:, Λ_ℓ] T_b[Λ_ℓ]^{1/2} ]
//! ```
//!
//! has full column rank. When some `P_ℓ` is rank deficient, a Householder
//! reflection through one of its null vectors gives an explicit surviving
//! transform.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    gaussian_matrix, inverse_condition, orthogonality_defect, random_orthogonal, singular_values,
    smallest_right_singular_vector,
};
use crate::model::{log_posterior, FactorModel, FactorState, NoiseTerm, ObservationSet};

/// Relative tolerance for treating two precision products as equal.
pub const DEFAULT_PRODUCT_TOL: f64 = 1e-9;
/// Singular values below this fraction of the largest count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const ORTHOGONALITY_TOL: f64 = 1e-10;
const INVERTIBILITY_TOL: f64 = 1e-10;
const SCALES: [f64; 5] = [-2.0, -1.0, 0.5, 1.0, 2.0];

/// Partition of the column indices `0..r` by equal precision product.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionBlocks {
    blocks: Vec<Vec<usize>>,
    products: Vec<f64>,
    rank: usize,
}

impl PartitionBlocks {
    /// Blocks in order of strictly decreasing product; indices ascending within a block.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn products(&self) -> &[f64] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Index of the block holding column `k`.
    pub fn block_of(&self, k: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(&k))
            .expect("partition covers every column")
    }

    /// Block-diagonal matrix with the given per-block matrices.
    pub fn embed(&self, block_mats: &[DMatrix<f64>]) -> DMatrix<f64> {
        assert_eq!(block_mats.len(), self.blocks.len());
        let mut out = DMatrix::zeros(self.rank, self.rank);
        for (idx, mat) in self.blocks.iter().zip(block_mats) {
            assert_eq!(mat.shape(), (idx.len(), idx.len()));
            for (bi, &i) in idx.iter().enumerate() {
                for (bj, &j) in idx.iter().enumerate() {
                    out[(i, j)] = mat[(bi, bj)];
                }
            }
        }
        out
    }
}

/// Groups columns whose products agree within `rel_tol` relative: products are
/// sorted and split wherever neighbouring values differ by more than
/// `rel_tol · max(pair)`.
pub fn partition_products(products: &[f64], rel_tol: f64) -> PartitionBlocks {
    assert!(
        rel_tol > 0.0 && rel_tol <= 1e-3,
        "product tolerance {rel_tol} outside (0, 1e-3]"
    );
    let mut order: Vec<usize> = (0..products.len()).collect();
    order.sort_by(|&i, &j| products[j].total_cmp(&products[i]).then(i.cmp(&j)));

    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut prev: Option<f64> = None;
    for &k in &order {
        let p = products[k];
        match prev {
            Some(q) if (q - p).abs() <= rel_tol * q.abs().max(p.abs()) => {
                blocks.last_mut().expect("open block").push(k)
            }
            _ => blocks.push(vec![k]),
        }
        prev = Some(p);
    }
    for b in &mut blocks {
        b.sort_unstable();
    }
    let products = blocks
        .iter()
        .map(|b| b.iter().map(|&k| products[k]).sum::<f64>() / b.len() as f64)
        .collect();
    PartitionBlocks {
        blocks,
        products,
        rank: order.len(),
    }
}

/// Partition of the model's columns by `τ_{a,k} τ_{b,k}`.
pub fn compute_partition(model: &FactorModel, rel_tol: f64) -> PartitionBlocks {
    let products: Vec<f64> = model
        .prec_a()
        .iter()
        .zip(model.prec_b().iter())
        .map(|(a, b)| a * b)
        .collect();
    partition_products(&products, rel_tol)
}

/// The stacked, precision-scaled prior-mean matrix `P_ℓ` of every block.
pub fn build_block_matrices(model: &FactorModel, partition: &PartitionBlocks) -> Vec<DMatrix<f64>> {
    assert_eq!(partition.rank(), model.rank(), "partition built for another rank");
    let (m, n) = (model.rows(), model.cols());
    partition
        .blocks()
        .iter()
        .map(|idx| {
            let mut p = DMatrix::zeros(m + n, idx.len());
            for (c, &k) in idx.iter().enumerate() {
                let sa = model.prec_a()[k].sqrt();
                let sb = model.prec_b()[k].sqrt();
                p.view_mut((0, c), (m, 1)).copy_from(&(model.mean_a().column(k) * sa));
                p.view_mut((m, c), (n, 1)).copy_from(&(model.mean_b().column(k) * sb));
            }
            p
        })
        .collect()
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_column_rank(p: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(p);
    let max = s.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * max).count()
}

/// Reflection `W = I − 2 x xᵀ` through a unit null vector `x` of `p`, so
/// that `p W = p` with `W` orthogonal and not the identity.
///
/// For an all-zero `p` the last basis vector is used, giving `diag(1, …, 1, −1)`.
pub fn householder_invariance_transform(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cols = p.ncols();
    if cols == 0 {
        return Err(Error::ContractViolation("matrix has no columns".into()));
    }
    if numerical_column_rank(p, DEFAULT_RANK_TOL) == cols {
        return Err(Error::NoNullVector);
    }
    let x = if p.iter().all(|&v| v == 0.0) {
        let mut e = DVector::zeros(cols);
        e[cols - 1] = 1.0;
        e
    } else {
        smallest_right_singular_vector(p)
    };
    Ok(DMatrix::identity(cols, cols) - (&x * x.transpose()) * 2.0)
}

/// An invertible `r x r` transform, optionally with the block-orthogonal
/// generator `Q` it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformCandidate {
    w: DMatrix<f64>,
    q: Option<DMatrix<f64>>,
}

impl TransformCandidate {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() || w.is_empty() {
            return Err(Error::ContractViolation(format!(
                "transform must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if !w.iter().all(|v| v.is_finite()) || inverse_condition(&w) <= INVERTIBILITY_TOL {
            return Err(Error::SingularTransform);
        }
        Ok(Self { w, q: None })
    }

    pub fn identity(r: usize) -> Self {
        Self {
            w: DMatrix::identity(r, r),
            q: Some(DMatrix::identity(r, r)),
        }
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn q(&self) -> Option<&DMatrix<f64>> {
        self.q.as_ref()
    }

    /// `max |W − I|`.
    pub fn distance_from_identity(&self) -> f64 {
        (&self.w - DMatrix::identity(self.w.nrows(), self.w.ncols())).abs().max()
    }
}

fn scale_rows_cols(q: &DMatrix<f64>, left: &DVector<f64>, right: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| left[i] * q[(i, j)] * right[j])
}

fn check_block_diagonal(partition: &PartitionBlocks, q: &DMatrix<f64>, tol: f64) -> bool {
    let r = partition.rank();
    let owner: Vec<usize> = (0..r).map(|k| partition.block_of(k)).collect();
    (0..r).all(|i| (0..r).all(|j| owner[i] == owner[j] || q[(i, j)].abs() <= tol))
}

/// `W = T_a^{1/2} Q T_a^{-1/2}` for a block-orthogonal `Q`, after checking it
/// agrees with `T_b^{-1/2} Q T_b^{1/2}`.
pub fn admissible_transform(
    model: &FactorModel,
    partition: &PartitionBlocks,
    q: &DMatrix<f64>,
) -> Result<TransformCandidate> {
    let r = model.rank();
    if q.shape() != (r, r) || partition.rank() != r {
        return Err(Error::ContractViolation(format!(
            "generator must be {r}x{r} over a rank-{r} partition"
        )));
    }
    let defect = orthogonality_defect(q);
    if defect > ORTHOGONALITY_TOL {
        return Err(Error::ContractViolation(format!(
            "generator is not orthogonal (max |QᵀQ − I| = {defect:e})"
        )));
    }
    if !check_block_diagonal(partition, q, ORTHOGONALITY_TOL) {
        return Err(Error::ContractViolation(
            "generator is not block diagonal over the precision partition".into(),
        ));
    }
    let sa = model.prec_a().map(f64::sqrt);
    let sb = model.prec_b().map(f64::sqrt);
    let w = scale_rows_cols(q, &sa, &sa.map(|v| 1.0 / v));
    let w_alt = scale_rows_cols(q, &sb.map(|v| 1.0 / v), &sb);
    let gap = (&w - &w_alt).abs().max();
    if gap > 1e-9 * w.abs().max() {
        return Err(Error::ContractViolation(format!(
            "T_a and T_b forms of the transform disagree by {gap:e}"
        )));
    }
    Ok(TransformCandidate { w, q: Some(q.clone()) })
}

/// Recovers the generator `Q = T_a^{-1/2} W T_a^{1/2}` if `W` is admissible
/// under the zero-mean symmetry group within `tol`.
pub fn admissible_generator(
    model: &FactorModel,
    partition: &PartitionBlocks,
    w: &DMatrix<f64>,
    tol: f64,
) -> Option<DMatrix<f64>> {
    let sa = model.prec_a().map(f64::sqrt);
    let sb = model.prec_b().map(f64::sqrt);
    let qa = scale_rows_cols(w, &sa.map(|v| 1.0 / v), &sa);
    let qb = scale_rows_cols(w, &sb, &sb.map(|v| 1.0 / v));
    let ok = orthogonality_defect(&qa) <= tol
        && (&qa - &qb).abs().max() <= tol
        && check_block_diagonal(partition, &qa, tol);
    ok.then_some(qa)
}

/// Random orthogonal matrix that is block diagonal over `partition`.
pub fn random_block_orthogonal<R: Rng + ?Sized>(partition: &PartitionBlocks, rng: &mut R) -> DMatrix<f64> {
    let blocks: Vec<_> = partition
        .blocks()
        .iter()
        .map(|b| random_orthogonal(b.len(), rng))
        .collect();
    partition.embed(&blocks)
}

/// `(A W, B W⁻ᵀ, τ_η)`.
pub fn apply_transform(state: &FactorState, w: &TransformCandidate) -> Result<FactorState> {
    let r = state.a.ncols();
    if w.w.shape() != (r, r) {
        return Err(Error::ContractViolation(format!(
            "transform is {}x{}, state has rank {r}",
            w.w.nrows(),
            w.w.ncols()
        )));
    }
    let inv = w.w.clone().try_inverse().ok_or(Error::SingularTransform)?;
    Ok(FactorState {
        a: &state.a * &w.w,
        b: &state.b * inv.transpose(),
        noise_prec: state.noise_prec,
    })
}

/// Per-block `(columns, numerical rank of P_ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRank {
    pub columns: usize,
    pub rank: usize,
}

/// Outcome of the full-column-rank test on every `P_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryCertificate {
    pub partition: PartitionBlocks,
    pub block_ranks: Vec<BlockRank>,
    /// True iff every `P_ℓ` has full column rank, i.e. no non-identity
    /// transform leaves the posterior unchanged.
    pub broken: bool,
    /// A surviving non-identity transform, present exactly when `broken` is false.
    pub counterexample: Option<TransformCandidate>,
}

/// Rank test on each block matrix. `rank_tol` is the singular-value
/// threshold; the partition uses [`DEFAULT_PRODUCT_TOL`].
///
/// When some blocks are deficient, the counterexample applies a Householder
/// reflection on every deficient block and the identity elsewhere.
pub fn certify_symmetry_breaking(model: &FactorModel, rank_tol: f64) -> Result<SymmetryCertificate> {
    let partition = compute_partition(model, DEFAULT_PRODUCT_TOL);
    let mats = build_block_matrices(model, &partition);
    let block_ranks: Vec<BlockRank> = mats
        .iter()
        .map(|p| BlockRank {
            columns: p.ncols(),
            rank: numerical_column_rank(p, rank_tol),
        })
        .collect();
    let broken = block_ranks.iter().all(|b| b.rank == b.columns);
    let counterexample = if broken {
        None
    } else {
        let gens = mats
            .iter()
            .zip(&block_ranks)
            .map(|(p, br)| {
                if br.rank < br.columns {
                    householder_invariance_transform(p)
                } else {
                    Ok(DMatrix::identity(br.columns, br.columns))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let q = partition.embed(&gens);
        Some(admissible_transform(model, &partition, &q)?)
    };
    Ok(SymmetryCertificate {
        partition,
        block_ranks,
        broken,
        counterexample,
    })
}

fn relative_gap(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

/// Largest relative change of the log-posterior under `w` over `trials`
/// random Gaussian states and their rescalings `(t A, s B)`,
/// `t, s ∈ {−2, −1, ½, 1, 2}`.
pub fn invariance_discrepancy<R: Rng + ?Sized>(
    model: &FactorModel,
    obs: &ObservationSet,
    w: &TransformCandidate,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    assert!(trials >= 1, "at least one trial required");
    let (m, n, r) = (model.rows(), model.cols(), model.rank());
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let a = gaussian_matrix(m, r, rng);
        let b = gaussian_matrix(n, r, rng);
        let noise_prec = 0.5 + rng.random::<f64>();
        for &t in &SCALES {
            for &s in &SCALES {
                let state = FactorState::new(&a * t, &b * s, noise_prec)?;
                let moved = apply_transform(&state, w)?;
                let before = log_posterior(model, obs, &state, NoiseTerm::Fixed)?;
                let after = log_posterior(model, obs, &moved, NoiseTerm::Fixed)?;
                worst = worst.max(relative_gap(before, after));
            }
        }
    }
    Ok(worst)
}

/// True iff the log-posterior is unchanged by `w` within `rel_tol` on every draw.
pub fn verify_invariance<R: Rng + ?Sized>(
    model: &FactorModel,
    obs: &ObservationSet,
    w: &TransformCandidate,
    trials: usize,
    rel_tol: f64,
    rng: &mut R,
) -> Result<bool> {
    Ok(invariance_discrepancy(model, obs, w, trials, rng)? <= rel_tol)
}
