//! Block-shift operators: a dense q x p block acting on the leading
//! coordinates of l^2, completed by an identity-aligned shift of the tail.
//!
//! Concretely, `A e_i = sum_j B[(j, i)] e_j` for `i <= p`, and
//! `A e_{p+m} = e_{q+m}` for `m >= 1`. Everything Fredholm-theoretic about
//! such an operator (index, kernel, cokernel, surjectivity margins) is
//! decided by finite linear algebra on the block, which is what makes this
//! class a faithful desk-scale model of index-one theory.

use crate::error::{Error, Result};
use crate::linalg::{full_svd, smallest_singular_value};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative singular-value threshold for numerical rank decisions.
pub const DEFAULT_TOL_RANK: f64 = 1e-8;
/// Required ratio between the smallest kept and the largest dropped singular
/// value; a smaller gap makes the rank decision ambiguous.
pub const DEFAULT_GAP_GUARD: f64 = 1e3;

/// A bounded operator on l^2 determined by a finite block and a shift tail.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockShiftOperator {
    p: usize,
    q: usize,
    block: DMatrix<f64>,
}

impl BlockShiftOperator {
    pub fn new(p: usize, q: usize, block: DMatrix<f64>) -> Result<Self> {
        if block.nrows() != q || block.ncols() != p {
            return Err(Error::ShapeError(format!(
                "block is {}x{}, expected {}x{}",
                block.nrows(),
                block.ncols(),
                q,
                p
            )));
        }
        if block.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("block contains non-finite entries".into()));
        }
        Ok(BlockShiftOperator { p, q, block })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn block(&self) -> &DMatrix<f64> {
        &self.block
    }

    /// Fredholm index; exact because the tail is an isometric isomorphism.
    pub fn index(&self) -> i64 {
        self.p as i64 - self.q as i64
    }

    /// Strip trailing identity padding: while the last block column is e_q
    /// and the last block row is e_p^T (exactly), drop both. The result is
    /// the canonical representative of the padding-equivalence class.
    pub fn canonicalize(&self) -> BlockShiftOperator {
        let mut p = self.p;
        let mut q = self.q;
        let mut b = self.block.clone();
        loop {
            if p == 0 || q == 0 {
                break;
            }
            let corner = b[(q - 1, p - 1)] == 1.0;
            let row_clear = (0..p - 1).all(|j| b[(q - 1, j)] == 0.0);
            let col_clear = (0..q - 1).all(|i| b[(i, p - 1)] == 0.0);
            if corner && row_clear && col_clear {
                p -= 1;
                q -= 1;
                b = b.view((0, 0), (q, p)).into_owned();
            } else {
                break;
            }
        }
        BlockShiftOperator { p, q, block: b }
    }

    /// Padding equivalence: extend the block by one diagonal 1. Represents
    /// the same operator on l^2 in a larger frame.
    pub fn pad(&self) -> BlockShiftOperator {
        let mut b = DMatrix::zeros(self.q + 1, self.p + 1);
        b.view_mut((0, 0), (self.q, self.p)).copy_from(&self.block);
        b[(self.q, self.p)] = 1.0;
        BlockShiftOperator { p: self.p + 1, q: self.q + 1, block: b }
    }

    /// Equality as operators on l^2 (padding-insensitive).
    pub fn canonical_eq(&self, other: &BlockShiftOperator) -> bool {
        self.canonicalize() == other.canonicalize()
    }

    /// Precompose with the left shift (s, v) -> v. In block terms this
    /// prepends a zero column, raising the index by one.
    pub fn shift_left_star(&self) -> BlockShiftOperator {
        let mut b = DMatrix::zeros(self.q, self.p + 1);
        b.view_mut((0, 1), (self.q, self.p)).copy_from(&self.block);
        BlockShiftOperator { p: self.p + 1, q: self.q, block: b }
    }

    /// Precompose with the right shift v -> (0, v): delete the first block
    /// column, lowering the index by one. Requires at least one block column.
    pub fn shift_right_star(&self) -> Result<BlockShiftOperator> {
        if self.p == 0 {
            return Err(Error::ShapeError(
                "cannot delete a block column from a representation with p = 0".into(),
            ));
        }
        let b = self.block.view((0, 1), (self.q, self.p - 1)).into_owned();
        Ok(BlockShiftOperator { p: self.p - 1, q: self.q, block: b })
    }

    /// Kernel/cokernel data with an explicit ambiguity guard. `tol_rank` is
    /// relative to the largest singular value.
    pub fn kernel_cokernel(&self, tol_rank: f64) -> Result<KernelCokernelData> {
        kernel_cokernel_of_block(&self.block, tol_rank, DEFAULT_GAP_GUARD)
    }
}

/// Kernel and cokernel bases of a block-shift operator, together with the
/// spectral data the rank decision was based on.
#[derive(Debug, Clone)]
pub struct KernelCokernelData {
    /// Dimension of the cokernel (corank). The kernel has dimension
    /// `corank + index`.
    pub corank: usize,
    /// Orthonormal kernel basis, one column per kernel vector (p x nullity).
    pub kernel_basis: DMatrix<f64>,
    /// Orthonormal cokernel basis (q x corank).
    pub cokernel_basis: DMatrix<f64>,
    /// Singular values of the block in decreasing order.
    pub singular_values: Vec<f64>,
    /// Ratio smallest-kept / largest-dropped at the rank cut; `None` when
    /// nothing was dropped.
    pub rank_gap: Option<f64>,
}

/// Rank decision and basis extraction shared by operators and raw blocks.
pub fn kernel_cokernel_of_block(
    block: &DMatrix<f64>,
    tol_rank: f64,
    gap_guard: f64,
) -> Result<KernelCokernelData> {
    let (q, p) = (block.nrows(), block.ncols());
    if p == 0 || q == 0 {
        // No singular values: the block contributes rank 0.
        return Ok(KernelCokernelData {
            corank: q,
            kernel_basis: DMatrix::identity(p, p),
            cokernel_basis: DMatrix::identity(q, q),
            singular_values: vec![],
            rank_gap: None,
        });
    }
    let svd = full_svd(block);
    let smax = svd.sigma[0];
    let cut = tol_rank * smax;
    let rank = svd.sigma.iter().filter(|&&s| s > cut).count();
    let dropped = svd.sigma.len() - rank;
    let rank_gap = if dropped > 0 && rank > 0 {
        let kept_min = svd.sigma[rank - 1];
        let dropped_max = svd.sigma[rank];
        let gap = if dropped_max == 0.0 { f64::INFINITY } else { kept_min / dropped_max };
        if gap < gap_guard {
            return Err(Error::AmbiguousRank { gap, guard: gap_guard });
        }
        Some(gap)
    } else {
        None
    };
    let kernel_basis = svd.v.columns(rank, p - rank).into_owned();
    let cokernel_basis = svd.u.columns(rank, q - rank).into_owned();
    Ok(KernelCokernelData {
        corank: q - rank,
        kernel_basis,
        cokernel_basis,
        singular_values: svd.sigma,
        rank_gap,
    })
}

impl KernelCokernelData {
    pub fn kernel_dim(&self) -> usize {
        self.kernel_basis.ncols()
    }
}

// ---------------------------------------------------------------------------
// Parametrized paths of operators and path stabilization
// ---------------------------------------------------------------------------

type BlockFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// A one-parameter family of block-shift operators with a fixed frame.
#[derive(Clone)]
pub struct OperatorPath {
    pub p: usize,
    pub q: usize,
    pub t0: f64,
    pub t1: f64,
    eval: BlockFn,
}

impl OperatorPath {
    pub fn new(
        p: usize,
        q: usize,
        t0: f64,
        t1: f64,
        eval: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        OperatorPath { p, q, t0, t1, eval: Arc::new(eval) }
    }

    pub fn block(&self, t: f64) -> DMatrix<f64> {
        (self.eval)(t)
    }

    pub fn operator(&self, t: f64) -> BlockShiftOperator {
        BlockShiftOperator { p: self.p, q: self.q, block: self.block(t) }
    }

    pub fn sample_times(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|i| self.t0 + (self.t1 - self.t0) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// A finite-rank stabilization: k extra domain directions mapped by G.
#[derive(Debug, Clone)]
pub struct Stabilization {
    pub k: usize,
    /// q x k matrix of stabilizing columns.
    pub g: DMatrix<f64>,
}

impl Stabilization {
    /// Certified surjectivity of the stabilized block [G | B].
    pub fn surjectivity_margin(&self, block: &DMatrix<f64>) -> f64 {
        smallest_singular_value(&stack_columns(&self.g, block))
    }
}

/// Horizontal concatenation [G | B].
pub fn stack_columns(g: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(g.nrows(), b.nrows());
    let mut m = DMatrix::zeros(b.nrows(), g.ncols() + b.ncols());
    m.view_mut((0, 0), (g.nrows(), g.ncols())).copy_from(g);
    m.view_mut((0, g.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    m
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizeConfig {
    /// Required lower bound on the smallest singular value of [G(t) | B(t)].
    pub tol_surj: f64,
    /// Number of equispaced samples along the path.
    pub samples: usize,
    /// Largest stabilization size to attempt.
    pub k_max: usize,
}

impl Default for StabilizeConfig {
    fn default() -> Self {
        StabilizeConfig { tol_surj: 0.1, samples: 1000, k_max: 4 }
    }
}

/// A per-sample stabilization along a path.
#[derive(Debug, Clone)]
pub struct PathStabilization {
    pub k: usize,
    pub ts: Vec<f64>,
    pub gs: Vec<DMatrix<f64>>,
    /// min over samples of the smallest singular value of [G(t) | B(t)].
    pub min_sigma: f64,
    pub used_candidate: bool,
}

/// Certify a stabilization along the path, either validating a caller
/// candidate G(t) or choosing constant columns from the SVD at the worst
/// sample (the cokernel directions where surjectivity is weakest).
pub fn stabilize_path(
    path: &OperatorPath,
    cfg: &StabilizeConfig,
    candidate: Option<&dyn Fn(f64) -> DMatrix<f64>>,
) -> Result<PathStabilization> {
    let ts = path.sample_times(cfg.samples);
    if let Some(g_of_t) = candidate {
        let gs: Vec<DMatrix<f64>> = ts.iter().map(|&t| g_of_t(t)).collect();
        let k = gs[0].ncols();
        let mut min_sigma = f64::INFINITY;
        for (t, g) in ts.iter().zip(&gs) {
            if g.nrows() != path.q || g.ncols() != k {
                return Err(Error::ShapeError(format!(
                    "candidate stabilizer at t = {t} is {}x{}, expected {}x{}",
                    g.nrows(),
                    g.ncols(),
                    path.q,
                    k
                )));
            }
            let s = smallest_singular_value(&stack_columns(g, &path.block(*t)));
            min_sigma = min_sigma.min(s);
        }
        if min_sigma <= cfg.tol_surj {
            return Err(Error::StabilizationFailed(format!(
                "candidate stabilizer leaves min sigma {min_sigma:.3e} <= {:.3e}",
                cfg.tol_surj
            )));
        }
        return Ok(PathStabilization { k, ts, gs, min_sigma, used_candidate: true });
    }

    // Automatic choice. First see whether the path is already uniformly
    // surjective, otherwise add SVD-informed columns at the worst sample.
    let sigmas: Vec<f64> = ts.iter().map(|&t| smallest_singular_value(&path.block(t))).collect();
    let worst = sigmas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if sigmas[worst] > cfg.tol_surj {
        let gs = vec![DMatrix::zeros(path.q, 0); ts.len()];
        return Ok(PathStabilization {
            k: 0,
            ts,
            gs,
            min_sigma: sigmas[worst],
            used_candidate: false,
        });
    }
    let worst_block = path.block(ts[worst]);
    let svd = full_svd(&worst_block);
    let scale = svd.sigma.first().copied().unwrap_or(1.0).max(1.0);
    for k in 1..=cfg.k_max {
        if k > path.q {
            break;
        }
        // Left singular vectors of the worst sample for its k smallest
        // singular values, scaled to the block's magnitude.
        let g = svd.u.columns(path.q - k, k) * scale;
        let mut min_sigma = f64::INFINITY;
        for &t in &ts {
            let s = smallest_singular_value(&stack_columns(&g.clone().into_owned(), &path.block(t)));
            min_sigma = min_sigma.min(s);
        }
        if min_sigma > cfg.tol_surj {
            let g = g.into_owned();
            let gs = vec![g; ts.len()];
            return Ok(PathStabilization { k, ts, gs, min_sigma, used_candidate: false });
        }
    }
    Err(Error::StabilizationFailed(format!(
        "no stabilization of size <= {} certifies min sigma > {:.3e} along the path",
        cfg.k_max, cfg.tol_surj
    )))
}

/// Convenience: embed a spatial vector into the stabilized domain R^k + R^p.
pub fn embed_stabilized(k: usize, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(k + v.len());
    out.rows_mut(k, v.len()).copy_from(v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(p: usize, q: usize, entries: &[f64]) -> BlockShiftOperator {
        BlockShiftOperator::new(p, q, DMatrix::from_row_slice(q, p, entries)).unwrap()
    }

    #[test]
    fn index_is_block_shape_difference() {
        assert_eq!(op(2, 1, &[0.3, -0.7]).index(), 1);
        assert_eq!(op(0, 0, &[]).index(), 0);
        assert_eq!(op(1, 2, &[1.0, 0.0]).index(), -1);
    }

    #[test]
    fn canonicalize_strips_identity_padding() {
        let a = op(2, 1, &[0.5, 2.0]);
        let padded = a.pad().pad();
        assert_eq!(padded.p(), 4);
        let c = padded.canonicalize();
        assert_eq!((c.p(), c.q()), (2, 1));
        assert_eq!(c.block(), a.block());
        assert!(a.canonical_eq(&padded));
        // Idempotent.
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn canonicalize_respects_non_padding_corners() {
        // Corner 1 but dirty column: not padding.
        let a = op(2, 2, &[1.0, 3.0, 0.0, 1.0]);
        assert_eq!(a.canonicalize(), a);
    }

    #[test]
    fn shifts_change_index_by_one_and_compose_to_identity() {
        let a = op(2, 1, &[0.4, 0.9]);
        let left = a.shift_left_star();
        assert_eq!(left.index(), a.index() + 1);
        assert_eq!(left.block(), &DMatrix::from_row_slice(1, 3, &[0.0, 0.4, 0.9]));
        let back = left.shift_right_star().unwrap();
        assert_eq!(back, a);
        let right = a.shift_right_star().unwrap();
        assert_eq!(right.index(), 0);
        assert_eq!(right.block(), &DMatrix::from_row_slice(1, 1, &[0.9]));
    }

    #[test]
    fn shift_right_star_needs_a_block_column() {
        let ident = op(0, 0, &[]);
        assert!(matches!(ident.shift_right_star(), Err(Error::ShapeError(_))));
        // One zero column over an empty codomain: deleting it gives the identity.
        let one_col = op(1, 0, &[]);
        let id = one_col.shift_right_star().unwrap();
        assert_eq!((id.p(), id.q()), (0, 0));
    }

    #[test]
    fn kernel_cokernel_of_rank_deficient_block() {
        // Zero 1 x 2 block: corank 1, kernel of dimension 2.
        let a = op(2, 1, &[0.0, 0.0]);
        let data = a.kernel_cokernel(DEFAULT_TOL_RANK).unwrap();
        assert_eq!(data.corank, 1);
        assert_eq!(data.kernel_dim(), 2);
        assert_eq!(data.kernel_dim() as i64 - data.corank as i64, a.index());
        // Orthonormality to 1e-12.
        let k = &data.kernel_basis;
        assert!((k.transpose() * k - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn ambiguous_rank_is_refused() {
        let b = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 1.5e-8, 0.8e-8]));
        let err = kernel_cokernel_of_block(&b, DEFAULT_TOL_RANK, DEFAULT_GAP_GUARD).unwrap_err();
        assert!(matches!(err, Error::AmbiguousRank { .. }));
    }

    #[test]
    fn clear_gap_reports_ratio() {
        let b = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1e-13]));
        let data = kernel_cokernel_of_block(&b, DEFAULT_TOL_RANK, DEFAULT_GAP_GUARD).unwrap();
        assert_eq!(data.corank, 1);
        let gap = data.rank_gap.unwrap();
        assert!(gap > 1e12);
    }

    #[test]
    fn stabilize_surjective_path_needs_no_columns() {
        let path = OperatorPath::new(2, 1, 0.0, 1.0, |t| {
            DMatrix::from_row_slice(1, 2, &[1.0 + t, 0.5])
        });
        let st = stabilize_path(&path, &StabilizeConfig::default(), None).unwrap();
        assert_eq!(st.k, 0);
        assert!(st.min_sigma > 1.0);
    }

    #[test]
    fn stabilize_radial_pencil_path() {
        // Radial segment through the singular operator of the planar pencil:
        // B(t) = [t - 1/2, 0.3 (t - 1/2)] vanishes at t = 1/2.
        let path = OperatorPath::new(2, 1, 0.0, 1.0, |t| {
            DMatrix::from_row_slice(1, 2, &[t - 0.5, 0.3 * (t - 0.5)])
        });
        let st = stabilize_path(&path, &StabilizeConfig::default(), None).unwrap();
        assert_eq!(st.k, 1);
        assert!(st.min_sigma > 0.1);
        assert!(!st.used_candidate);
    }

    #[test]
    fn stabilize_rejects_insufficient_candidate() {
        let path = OperatorPath::new(2, 1, 0.0, 1.0, |t| {
            DMatrix::from_row_slice(1, 2, &[t - 0.5, 0.0])
        });
        // Candidate vanishes exactly where the path is singular.
        let bad = |t: f64| DMatrix::from_row_slice(1, 1, &[t - 0.5]);
        let err = stabilize_path(&path, &StabilizeConfig::default(), Some(&bad)).unwrap_err();
        assert!(matches!(err, Error::StabilizationFailed(_)));
    }
}
