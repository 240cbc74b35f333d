//! Nonlinear block-shift maps and the bridges from their differentials to
//! two-parameter operator families.
//!
//! A block-shift map sends `u = (u_1, u_2, ...)` to
//! `(core(u_1..u_p), u_{p+1}, ...)` for a polynomial core `R^p -> R^q`; its
//! differential at `u` is the block-shift operator with block
//! `J_core(u_1..u_p)`, so the map is Fredholm of index `p - q` everywhere.

use crate::error::{Error, Result};
use crate::intersection::{OperatorFamily, ParamDomain};
use crate::operator::BlockShiftOperator;
use crate::poly::{Monomial, PolynomialCore};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// A Fredholm self-map of l^2 given by a polynomial core on the leading
/// coordinates and the shift on the tail.
#[derive(Debug, Clone)]
pub struct BlockShiftMap {
    core: PolynomialCore,
    /// Cached symbolic Jacobian, `jac[i][j] = d core_i / d u_j`.
    jac: Vec<Vec<Vec<Monomial>>>,
    /// Cached symbolic second partials, `hess[i][j][l]` for `l <= j`.
    hess: Vec<Vec<Vec<Vec<Monomial>>>>,
}

impl BlockShiftMap {
    pub fn new(core: PolynomialCore) -> Result<Self> {
        core.validate()?;
        let jac = core.jacobian_symbolic();
        let hess = jac
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, dj)| {
                        (0..=j)
                            .map(|l| dj.iter().filter_map(|m| m.partial(l)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(BlockShiftMap { core, jac, hess })
    }

    pub fn core(&self) -> &PolynomialCore {
        &self.core
    }

    pub fn p(&self) -> usize {
        self.core.p
    }

    pub fn q(&self) -> usize {
        self.core.q
    }

    /// Fredholm index of the map (and of its differential everywhere).
    pub fn index(&self) -> i64 {
        self.core.p as i64 - self.core.q as i64
    }

    /// Core evaluation on the leading coordinates.
    pub fn eval_core(&self, u: &DVector<f64>) -> DVector<f64> {
        self.core.eval(u)
    }

    /// Jacobian of the core at `u`, from the cached symbolic form.
    pub fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.core.q, self.core.p, |i, j| {
            self.jac[i][j].iter().map(|m| m.eval(u)).sum()
        })
    }

    /// The differential at `u` as an operator on l^2.
    pub fn differential(&self, u: &DVector<f64>) -> BlockShiftOperator {
        BlockShiftOperator::new(self.core.p, self.core.q, self.jacobian(u))
            .expect("core Jacobian has the declared shape")
    }

    /// Hessian of one core component, from the cached symbolic form.
    pub fn hessian_component(&self, comp: usize, u: &DVector<f64>) -> DMatrix<f64> {
        let p = self.core.p;
        let mut h = DMatrix::zeros(p, p);
        for j in 0..p {
            for l in 0..=j {
                let v: f64 = self.hess[comp][j][l].iter().map(|m| m.eval(u)).sum();
                h[(j, l)] = v;
                h[(l, j)] = v;
            }
        }
        h
    }

    /// `sum_i lambda_i Hess(core_i)(u)`, the second-derivative block of the
    /// adjoint-weighted core.
    pub fn hessian_weighted(&self, lambda: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.core.p, self.core.p);
        for i in 0..self.core.q {
            if lambda[i] != 0.0 {
                h += self.hessian_component(i, u) * lambda[i];
            }
        }
        h
    }
}

// ---------------------------------------------------------------------------
// Parametrized surfaces
// ---------------------------------------------------------------------------

type SurfPoint = Arc<dyn Fn(f64, f64) -> DVector<f64> + Send + Sync>;
type SurfPartials = Arc<dyn Fn(f64, f64) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

/// A parametrized two-domain in R^p with first parameter derivatives.
#[derive(Clone)]
pub struct Surface {
    pub domain: ParamDomain,
    pub p: usize,
    point: SurfPoint,
    partials: SurfPartials,
}

impl Surface {
    pub fn new(
        domain: ParamDomain,
        p: usize,
        point: impl Fn(f64, f64) -> DVector<f64> + Send + Sync + 'static,
        partials: impl Fn(f64, f64) -> (DVector<f64>, DVector<f64>) + Send + Sync + 'static,
    ) -> Result<Self> {
        domain.validate()?;
        Ok(Surface { domain, p, point: Arc::new(point), partials: Arc::new(partials) })
    }

    pub fn point(&self, x: f64, y: f64) -> DVector<f64> {
        (self.point)(x, y)
    }

    pub fn partials(&self, x: f64, y: f64) -> (DVector<f64>, DVector<f64>) {
        (self.partials)(x, y)
    }

    /// The flat unit disk in the first two coordinates of R^p.
    pub fn flat_disk(p: usize) -> Surface {
        Surface::new(
            ParamDomain::Disk { radius: 1.0 },
            p,
            move |x, y| {
                let mut u = DVector::zeros(p);
                u[0] = x;
                u[1] = y;
                u
            },
            move |_x, _y| {
                let mut dx = DVector::zeros(p);
                let mut dy = DVector::zeros(p);
                dx[0] = 1.0;
                dy[1] = 1.0;
                (dx, dy)
            },
        )
        .expect("flat disk is a valid surface")
    }

    /// The constant surface at a point (its family is the constant
    /// differential there).
    pub fn constant(u0: DVector<f64>) -> Surface {
        let p = u0.len();
        let u1 = u0.clone();
        Surface::new(
            ParamDomain::Disk { radius: 1.0 },
            p,
            move |_x, _y| u0.clone(),
            move |_x, _y| (DVector::zeros(u1.len()), DVector::zeros(u1.len())),
        )
        .expect("constant surface is valid")
    }
}

/// The operator family `(x, y) -> d m (surface(x, y))`, with chain-rule
/// parameter derivatives: the (i, j) entry of the x-partial block is
/// `Hess(core_i)(u) . d_x surface` contracted into slot j.
pub fn differential_family(m: &BlockShiftMap, surface: &Surface) -> Result<OperatorFamily> {
    if surface.p != m.p() {
        return Err(Error::ShapeError(format!(
            "surface maps into R^{} but the map's core has p = {}",
            surface.p,
            m.p()
        )));
    }
    if m.index() != 1 {
        return Err(Error::InvalidInput(format!(
            "differential families feed the index-one intersection theory; \
             map has index {}",
            m.index()
        )));
    }
    let m_eval = m.clone();
    let m_deriv = m.clone();
    let s_eval = surface.clone();
    let s_deriv = surface.clone();
    OperatorFamily::new(
        surface.domain.clone(),
        m.p(),
        m.q(),
        move |x, y| m_eval.jacobian(&s_eval.point(x, y)),
        move |x, y| {
            let u = s_deriv.point(x, y);
            let (tx, ty) = s_deriv.partials(x, y);
            let q = m_deriv.q();
            let p = m_deriv.p();
            let mut dx = DMatrix::zeros(q, p);
            let mut dy = DMatrix::zeros(q, p);
            for i in 0..q {
                let h = m_deriv.hessian_component(i, &u);
                let rx = &h * &tx;
                let ry = &h * &ty;
                for j in 0..p {
                    dx[(i, j)] = rx[j];
                    dy[(i, j)] = ry[j];
                }
            }
            (dx, dy)
        },
    )
}

// ---------------------------------------------------------------------------
// One-parameter homotopies with separable time dependence
// ---------------------------------------------------------------------------

type CurveFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A smooth curve in R^q with two derivatives, for homotopy shifts.
#[derive(Clone)]
pub struct ParamCurve {
    pub q: usize,
    eval: CurveFn,
    deriv: CurveFn,
    deriv2: CurveFn,
}

impl ParamCurve {
    pub fn new(
        q: usize,
        eval: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
        deriv: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
        deriv2: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        ParamCurve { q, eval: Arc::new(eval), deriv: Arc::new(deriv), deriv2: Arc::new(deriv2) }
    }

    pub fn constant(c: DVector<f64>) -> ParamCurve {
        let q = c.len();
        let z1 = DVector::zeros(q);
        let z2 = DVector::zeros(q);
        ParamCurve::new(q, move |_t| c.clone(), move |_t| z1.clone(), move |_t| z2.clone())
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        (self.eval)(t)
    }

    pub fn deriv(&self, t: f64) -> DVector<f64> {
        (self.deriv)(t)
    }

    pub fn second_deriv(&self, t: f64) -> DVector<f64> {
        (self.deriv2)(t)
    }
}

/// A homotopy `K(t, u) = spatial(u) - shift(t)` on [0, 1] x R^p.
///
/// Every model homotopy separates this way, which buys two exact facts the
/// audit leans on: the spatial Jacobian is t-independent, and each time
/// slice is again a polynomial core (the spatial core with a constant
/// offset), so slice preimages can be traced with the standard machinery.
#[derive(Clone)]
pub struct HomotopyRecord {
    pub spatial: BlockShiftMap,
    pub shift: ParamCurve,
}

impl HomotopyRecord {
    pub fn new(spatial: BlockShiftMap, shift: ParamCurve) -> Result<Self> {
        if shift.q != spatial.q() {
            return Err(Error::ShapeError(format!(
                "shift curve lives in R^{} but the spatial core maps into R^{}",
                shift.q,
                spatial.q()
            )));
        }
        Ok(HomotopyRecord { spatial, shift })
    }

    pub fn p(&self) -> usize {
        self.spatial.p()
    }

    pub fn q(&self) -> usize {
        self.spatial.q()
    }

    pub fn value(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        self.spatial.eval_core(u) - self.shift.at(t)
    }

    /// Time partial of K, equal to -shift'(t) for every u.
    pub fn dt(&self, t: f64) -> DVector<f64> {
        -self.shift.deriv(t)
    }

    /// Spatial Jacobian of K (independent of t).
    pub fn spatial_jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        self.spatial.jacobian(u)
    }

    /// The time slice `u -> K(t, u)` as a polynomial core.
    pub fn slice_core(&self, t: f64) -> PolynomialCore {
        self.spatial.core().with_constant_offset(&(-self.shift.at(t)))
    }

    /// Full Jacobian of K at (t, u) as a q x (1 + p) block, time column
    /// first.
    pub fn full_jacobian(&self, t: f64, u: &DVector<f64>) -> DMatrix<f64> {
        let q = self.q();
        let p = self.p();
        let mut j = DMatrix::zeros(q, 1 + p);
        let dt = self.dt(t);
        for i in 0..q {
            j[(i, 0)] = dt[i];
        }
        j.view_mut((0, 1), (q, p)).copy_from(&self.spatial_jacobian(u));
        j
    }
}
