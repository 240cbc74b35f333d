//! Local geometry of the non-surjective variety inside the block-shift
//! class: charts near a corank-k operator, the tangent-space test, and the
//! codimension formula.
//!
//! Near a base operator F0 with corank k, split domain and codomain by the
//! kernel/cokernel frames of F0 and write any nearby operator in blocks
//!
//! ```text
//!         | V0 (ker)   W (ker-perp)
//! --------+---------------------------
//! U0      |   a            b
//! U1      |   c            d
//! ```
//!
//! The chart is the Schur complement `phi(A) = a - b d^{-1} c`, a dense
//! k x (n+k) matrix vanishing exactly on the corank-k stratum near the
//! base. The shift tail maps ker-perp tail coordinates isometrically onto
//! cokernel-perp tail coordinates, so it contributes an identity summand to
//! `d` and cancels out of the Schur complement: the finite block computes
//! the chart of the full operator on l^2 exactly.

use crate::error::{Error, Result};
use crate::linalg::full_svd;
use crate::operator::BlockShiftOperator;
use nalgebra::DMatrix;

/// Codimension of the stratum of index-n operators with corank k.
pub fn stratum_codim(n: usize, k: usize) -> usize {
    k * (n + k)
}

/// Default bound on the condition number of the d-block; beyond it the
/// operator is considered outside the chart's neighborhood.
pub const DEFAULT_COND_BOUND: f64 = 1e8;

/// A Schur-complement chart at a corank-k base operator.
///
/// Stores explicit ordered orthonormal bases (not projectors): downstream
/// sign bookkeeping — winding parities, coherence signs — depends on the
/// basis orientation, so callers may fix their own frames via
/// [`LocalChart::with_bases`].
#[derive(Debug, Clone)]
pub struct LocalChart {
    base: BlockShiftOperator,
    /// Orthonormal cokernel basis of the base block, q x k.
    u0: DMatrix<f64>,
    /// Orthonormal complement of u0 in the codomain, q x (q-k).
    u1: DMatrix<f64>,
    /// Orthonormal kernel basis of the base block, p x (n+k).
    v0: DMatrix<f64>,
    /// Orthonormal complement of v0 in the domain, p x (q-k).
    w: DMatrix<f64>,
    codim: usize,
    cond_bound: f64,
}

/// Orthonormal complement of an orthonormal q x k frame, as q x (q-k).
fn complement(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let q = frame.nrows();
    let k = frame.ncols();
    if k == 0 {
        return DMatrix::identity(q, q);
    }
    // Right singular vectors of frame^T beyond its (full) rank span the
    // orthogonal complement.
    let svd = full_svd(&frame.transpose());
    svd.v.columns(k, q - k).into_owned()
}

fn check_orthonormal(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let k = m.ncols();
    let gram = m.transpose() * m;
    let defect = (gram - DMatrix::identity(k, k)).norm();
    if defect > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "{what} is not orthonormal (Gram defect {defect:.3e})"
        )));
    }
    Ok(())
}

impl LocalChart {
    /// Build a chart at `base` with kernel/cokernel frames taken from its
    /// SVD. `tol_rank` is the relative rank threshold.
    pub fn at_base(base: &BlockShiftOperator, tol_rank: f64) -> Result<LocalChart> {
        let data = base.kernel_cokernel(tol_rank)?;
        Self::with_bases(base.clone(), data.cokernel_basis, data.kernel_basis)
    }

    /// Build a chart with caller-supplied ordered frames. `u0` must span the
    /// cokernel and `v0` the kernel of the base block, both orthonormally.
    pub fn with_bases(
        base: BlockShiftOperator,
        u0: DMatrix<f64>,
        v0: DMatrix<f64>,
    ) -> Result<LocalChart> {
        let (p, q) = (base.p(), base.q());
        let k = u0.ncols();
        if u0.nrows() != q {
            return Err(Error::ShapeError(format!(
                "cokernel frame has {} rows, base codomain has dimension {q}",
                u0.nrows()
            )));
        }
        if v0.nrows() != p {
            return Err(Error::ShapeError(format!(
                "kernel frame has {} rows, base domain has dimension {p}",
                v0.nrows()
            )));
        }
        let expected_ker = p + k;
        if q + v0.ncols() != expected_ker {
            return Err(Error::ShapeError(format!(
                "kernel frame has {} columns; corank {k} at index {} requires {}",
                v0.ncols(),
                p as i64 - q as i64,
                expected_ker - q
            )));
        }
        check_orthonormal(&u0, "cokernel frame")?;
        check_orthonormal(&v0, "kernel frame")?;
        let b = base.block();
        let scale = 1.0 + b.norm();
        let coker_defect = (u0.transpose() * b).norm();
        let ker_defect = (b * &v0).norm();
        if coker_defect > 1e-8 * scale || ker_defect > 1e-8 * scale {
            return Err(Error::InvalidInput(format!(
                "frames do not annihilate the base block (|U0^T B| = {coker_defect:.3e}, \
                 |B V0| = {ker_defect:.3e})"
            )));
        }
        let u1 = complement(&u0);
        let w = complement(&v0);
        let n = (p as i64 - q as i64).max(0) as usize;
        Ok(LocalChart {
            base,
            u0,
            u1,
            v0,
            w,
            codim: stratum_codim(n, k),
            cond_bound: DEFAULT_COND_BOUND,
        })
    }

    pub fn with_cond_bound(mut self, bound: f64) -> Self {
        self.cond_bound = bound;
        self
    }

    pub fn base(&self) -> &BlockShiftOperator {
        &self.base
    }

    /// Cokernel frame (q x k).
    pub fn u0(&self) -> &DMatrix<f64> {
        &self.u0
    }

    /// Kernel frame (p x (n+k)).
    pub fn v0(&self) -> &DMatrix<f64> {
        &self.v0
    }

    pub fn corank(&self) -> usize {
        self.u0.ncols()
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    fn check_frame(&self, nrows: usize, ncols: usize) -> Result<()> {
        if nrows != self.base.q() || ncols != self.base.p() {
            return Err(Error::ShapeError(format!(
                "block is {}x{}, chart frame is {}x{}",
                nrows,
                ncols,
                self.base.q(),
                self.base.p()
            )));
        }
        Ok(())
    }

    /// The d-block of `block` in the chart splitting, with its inverse
    /// guarded by the condition bound.
    fn d_inverse(&self, block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.u1.transpose() * block * &self.w;
        let m = d.nrows();
        if m == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        let svd = full_svd(&d);
        let smin = svd.sigma[m - 1];
        let smax = svd.sigma[0];
        if smin <= 0.0 || smax / smin > self.cond_bound {
            return Err(Error::OutsideChart(format!(
                "d-block condition number {:.3e} exceeds bound {:.3e}",
                if smin > 0.0 { smax / smin } else { f64::INFINITY },
                self.cond_bound
            )));
        }
        let dinv = &svd.v * DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            svd.sigma.iter().map(|&s| 1.0 / s),
        )) * svd.u.transpose();
        Ok(dinv)
    }

    /// Chart value at `a`: the k x (n+k) Schur complement in the base
    /// splitting. Zero (to tolerance) iff `a` lies on the corank-k stratum
    /// near the base.
    pub fn chart_value(&self, a: &BlockShiftOperator) -> Result<DMatrix<f64>> {
        self.check_frame(a.q(), a.p())?;
        self.chart_value_of_block(a.block())
    }

    /// Same as [`chart_value`](Self::chart_value), on a raw block.
    pub fn chart_value_of_block(&self, block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_frame(block.nrows(), block.ncols())?;
        let a = self.u0.transpose() * block * &self.v0;
        if self.w.ncols() == 0 {
            return Ok(a);
        }
        let b = self.u0.transpose() * block * &self.w;
        let c = self.u1.transpose() * block * &self.v0;
        let dinv = self.d_inverse(block)?;
        Ok(a - b * dinv * c)
    }

    /// Derivative of the chart value at `block` in the direction of a block
    /// perturbation `e`: d/dt phi(block + t e) at t = 0. Obtained from the
    /// product rule on the Schur complement,
    /// `da - db d^{-1} c + b d^{-1} dd d^{-1} c - b d^{-1} dc`.
    pub fn chart_derivative(&self, block: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_frame(block.nrows(), block.ncols())?;
        self.check_frame(e.nrows(), e.ncols())?;
        let ea = self.u0.transpose() * e * &self.v0;
        if self.w.ncols() == 0 {
            return Ok(ea);
        }
        let b = self.u0.transpose() * block * &self.w;
        let c = self.u1.transpose() * block * &self.v0;
        let eb = self.u0.transpose() * e * &self.w;
        let ec = self.u1.transpose() * e * &self.v0;
        let ed = self.u1.transpose() * e * &self.w;
        let dinv = self.d_inverse(block)?;
        Ok(ea - &eb * &dinv * &c + &b * &dinv * ed * &dinv * &c - &b * &dinv * &ec)
    }

    /// Whether a block perturbation `e` is tangent to the stratum at the
    /// base: true iff the component of `e` from kernel to cokernel vanishes,
    /// `|U0^T e V0| <= tol`.
    pub fn tangent_test(&self, e: &DMatrix<f64>, tol: f64) -> Result<bool> {
        self.check_frame(e.nrows(), e.ncols())?;
        let corner = self.u0.transpose() * e * &self.v0;
        Ok(corner.norm() <= tol)
    }
}
