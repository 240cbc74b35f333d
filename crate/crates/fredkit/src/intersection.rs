//! The mod-2 intersection parity `eta` of a two-parameter operator family
//! with the non-surjective variety, computed with per-zero certificates.
//!
//! A family over a compact planar domain whose boundary stays surjective
//! meets the corank-1 stratum (codimension two) in isolated points, generically
//! transversally; `eta` is the number of those points modulo two. The
//! implementation localizes candidates by adaptive subdivision with a
//! sampled Lipschitz bound, polishes each candidate with Newton's method on
//! a frozen Schur-complement chart, and resolves non-transverse zeros by an
//! angular winding count — never by silently perturbing the caller's family.

use crate::error::{Error, Result};
use crate::linalg::{full_svd, numerical_corank, singular_values, smallest_singular_value};
use crate::operator::BlockShiftOperator;
use crate::strata::LocalChart;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Parameter domains
// ---------------------------------------------------------------------------

/// A compact two-dimensional parameter domain with boundary.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDomain {
    /// Closed disk of the given radius centered at the origin.
    Disk { radius: f64 },
    /// Cylinder [0,1] x S^1 in coordinates (s, theta), theta periodic in
    /// [0, 2*pi).
    Annulus,
    /// Closed axis-aligned rectangle.
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl ParamDomain {
    pub fn validate(&self) -> Result<()> {
        match self {
            ParamDomain::Disk { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidInput(format!("disk radius {radius} must be positive")));
                }
            }
            ParamDomain::Annulus => {}
            ParamDomain::Rectangle { x0, x1, y0, y1 } => {
                if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite())
                    || x0 >= x1
                    || y0 >= y1
                {
                    return Err(Error::InvalidInput(format!(
                        "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Axis-aligned bounding box (x0, x1, y0, y1) of the parameter region.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match self {
            ParamDomain::Disk { radius } => (-radius, *radius, -radius, *radius),
            ParamDomain::Annulus => (0.0, 1.0, 0.0, 2.0 * PI),
            ParamDomain::Rectangle { x0, x1, y0, y1 } => (*x0, *x1, *y0, *y1),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            ParamDomain::Disk { radius } => x * x + y * y <= radius * radius * (1.0 + 1e-12),
            ParamDomain::Annulus => (-1e-12..=1.0 + 1e-12).contains(&x),
            ParamDomain::Rectangle { x0, x1, y0, y1 } => {
                (*x0..=*x1).contains(&x) && (*y0..=*y1).contains(&y)
            }
        }
    }

    /// Distance between parameter points in the domain's own metric
    /// (periodic in theta on the annulus).
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self {
            ParamDomain::Annulus => {
                let ds = a[0] - b[0];
                let mut dt = (a[1] - b[1]).rem_euclid(2.0 * PI);
                if dt > PI {
                    dt = 2.0 * PI - dt;
                }
                (ds * ds + dt * dt).sqrt()
            }
            _ => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
        }
    }

    /// Distance from an interior point to the boundary of the domain.
    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        match self {
            ParamDomain::Disk { radius } => (radius - (x * x + y * y).sqrt()).max(0.0),
            ParamDomain::Annulus => x.min(1.0 - x).max(0.0),
            ParamDomain::Rectangle { x0, x1, y0, y1 } => {
                (x - x0).min(x1 - x).min(y - y0).min(y1 - y).max(0.0)
            }
        }
    }

    /// Equispaced sample points along the boundary.
    pub fn boundary_points(&self, n: usize) -> Vec<[f64; 2]> {
        let n = n.max(4);
        match self {
            ParamDomain::Disk { radius } => (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    [radius * t.cos(), radius * t.sin()]
                })
                .collect(),
            ParamDomain::Annulus => {
                let half = n / 2;
                let mut pts = Vec::with_capacity(2 * half);
                for &s in &[0.0, 1.0] {
                    for i in 0..half {
                        pts.push([s, 2.0 * PI * i as f64 / half as f64]);
                    }
                }
                pts
            }
            ParamDomain::Rectangle { x0, x1, y0, y1 } => {
                let perim = 2.0 * ((x1 - x0) + (y1 - y0));
                (0..n)
                    .map(|i| {
                        let mut t = perim * i as f64 / n as f64;
                        if t < x1 - x0 {
                            return [x0 + t, *y0];
                        }
                        t -= x1 - x0;
                        if t < y1 - y0 {
                            return [*x1, y0 + t];
                        }
                        t -= y1 - y0;
                        if t < x1 - x0 {
                            return [x1 - t, *y1];
                        }
                        t -= x1 - x0;
                        [*x0, y1 - t]
                    })
                    .collect()
            }
        }
    }

    /// A smooth cutoff vanishing on the boundary, positive inside, with its
    /// gradient; used by the relative-boundary perturbation.
    pub fn boundary_cutoff(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        match self {
            ParamDomain::Disk { radius } => {
                let r2 = radius * radius;
                (1.0 - (x * x + y * y) / r2, [-2.0 * x / r2, -2.0 * y / r2])
            }
            ParamDomain::Annulus => (4.0 * x * (1.0 - x), [4.0 - 8.0 * x, 0.0]),
            ParamDomain::Rectangle { x0, x1, y0, y1 } => {
                let (mx, my) = ((x1 - x0) / 2.0, (y1 - y0) / 2.0);
                let fx = (x - x0) * (x1 - x) / (mx * mx);
                let fy = (y - y0) * (y1 - y) / (my * my);
                let dfx = (x0 + x1 - 2.0 * x) / (mx * mx);
                let dfy = (y0 + y1 - 2.0 * y) / (my * my);
                (fx * fy, [dfx * fy, fx * dfy])
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Operator families
// ---------------------------------------------------------------------------

type FamilyEval = Arc<dyn Fn(f64, f64) -> DMatrix<f64> + Send + Sync>;
type FamilyDeriv = Arc<dyn Fn(f64, f64) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync>;

/// A two-parameter family of index-one block-shift operators over a compact
/// domain: an evaluator for the q x p block and an evaluator for its two
/// first partials.
#[derive(Clone)]
pub struct OperatorFamily {
    pub domain: ParamDomain,
    pub p: usize,
    pub q: usize,
    eval: FamilyEval,
    deriv: FamilyDeriv,
    fd_derivative: bool,
}

impl OperatorFamily {
    pub fn new(
        domain: ParamDomain,
        p: usize,
        q: usize,
        eval: impl Fn(f64, f64) -> DMatrix<f64> + Send + Sync + 'static,
        deriv: impl Fn(f64, f64) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync + 'static,
    ) -> Result<Self> {
        domain.validate()?;
        if p != q + 1 {
            return Err(Error::InvalidInput(format!(
                "intersection parity needs index-one families; got block {q}x{p}"
            )));
        }
        Ok(OperatorFamily {
            domain,
            p,
            q,
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            fd_derivative: false,
        })
    }

    /// Build a family whose partials are central finite differences of the
    /// evaluator. The fallback is flagged in every certificate.
    pub fn with_fd_derivative(
        domain: ParamDomain,
        p: usize,
        q: usize,
        eval: impl Fn(f64, f64) -> DMatrix<f64> + Send + Sync + Clone + 'static,
    ) -> Result<Self> {
        let e = eval.clone();
        let h = 1e-6;
        let mut fam = Self::new(domain, p, q, eval, move |x, y| {
            let dx = (e(x + h, y) - e(x - h, y)) / (2.0 * h);
            let dy = (e(x, y + h) - e(x, y - h)) / (2.0 * h);
            (dx, dy)
        })?;
        fam.fd_derivative = true;
        Ok(fam)
    }

    pub fn block(&self, x: f64, y: f64) -> DMatrix<f64> {
        (self.eval)(x, y)
    }

    pub fn operator(&self, x: f64, y: f64) -> BlockShiftOperator {
        BlockShiftOperator::new(self.p, self.q, self.block(x, y))
            .expect("family evaluator produced a block of the declared shape")
    }

    pub fn partials(&self, x: f64, y: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.deriv)(x, y)
    }

    pub fn uses_fd_derivative(&self) -> bool {
        self.fd_derivative
    }

    /// Probe the declared partials against central finite differences at
    /// random in-domain points.
    pub fn validate_derivative(&self, seed: u64, points: usize, rel_tol: f64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x0, x1, y0, y1) = self.domain.bounding_box();
        let h = 1e-5;
        let mut checked = 0;
        while checked < points {
            let x = rng.gen_range(x0..x1);
            let y = rng.gen_range(y0..y1);
            // Stay a step away from the boundary so the FD stencil is inside.
            if self.domain.boundary_distance(x, y) < 2.0 * h {
                continue;
            }
            checked += 1;
            let (dx, dy) = self.partials(x, y);
            let fdx = (self.block(x + h, y) - self.block(x - h, y)) / (2.0 * h);
            let fdy = (self.block(x, y + h) - self.block(x, y - h)) / (2.0 * h);
            let scale = 1.0 + dx.norm().max(dy.norm());
            let err = ((dx - fdx).norm() + (dy - fdy).norm()) / scale;
            if err > rel_tol {
                return Err(Error::InvalidInput(format!(
                    "derivative evaluator disagrees with finite differences at \
                     ({x:.6}, {y:.6}): relative error {err:.3e} > {rel_tol:.3e}"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Configuration and certificates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaConfig {
    /// Boundary surjectivity samples.
    pub boundary_samples: usize,
    /// Required smallest singular value on the boundary.
    pub boundary_margin: f64,
    /// Initial subdivision of the bounding box (cells per side).
    pub initial_grid: usize,
    /// Maximum subdivision depth below the initial grid.
    pub max_depth: usize,
    /// Cap on live cells per level; exceeding it means the zero set is not
    /// resolving into isolated points.
    pub max_cells: usize,
    /// Transversality threshold on |det| of the 2x2 chart Jacobian.
    pub tol_trans: f64,
    /// Radius of the winding circle for non-transverse zeros.
    pub winding_radius: f64,
    /// Zeros closer than this (domain metric) are considered duplicates.
    pub merge_radius: f64,
    /// Newton convergence tolerance on the chart value, relative to the
    /// block magnitude.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Relative singular-value threshold for corank decisions at zeros.
    pub corank_rel_tol: f64,
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig {
            boundary_samples: 720,
            boundary_margin: 1e-6,
            initial_grid: 32,
            max_depth: 10,
            max_cells: 4096,
            tol_trans: 1e-6,
            winding_radius: 1e-3,
            merge_radius: 1e-6,
            newton_tol: 1e-11,
            max_newton_iters: 50,
            corank_rel_tol: 1e-6,
        }
    }
}

/// One zero of the family against the corank-1 stratum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub location: [f64; 2],
    pub corank_at_zero: usize,
    /// det of the 2x2 parameter Jacobian of the chart value at the zero.
    pub chart_jacobian_det: f64,
    /// Winding parity of the chart value on a small circle around the zero.
    pub local_winding: u8,
    pub transverse: bool,
}

/// Subdivision statistics for the certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub initial_grid: usize,
    pub max_depth: usize,
    pub cells_visited: usize,
    pub cells_outside_domain: usize,
    pub cells_pruned: usize,
    pub candidate_cells: usize,
    pub newton_converged: usize,
    /// The pruning bound samples derivative norms; it is a heuristic, not a
    /// certified Lipschitz constant. Converged zeros are Newton-certified
    /// independently of it.
    pub pruning_rigorous: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaCertificate {
    /// The intersection parity in Z/2.
    pub value: u8,
    pub zeros: Vec<ZeroRecord>,
    /// Observed minimum smallest singular value along the boundary.
    pub boundary_margin: f64,
    pub grid_report: GridReport,
    /// True when the family's partials were finite-difference fallbacks.
    pub fd_derivative: bool,
}

// ---------------------------------------------------------------------------
// Chart construction at a near-singular block
// ---------------------------------------------------------------------------

/// Chart at the corank-1 operator nearest to `block` (smallest singular
/// value zeroed out). The chart value at `block` itself is then
/// [sigma_min, 0] up to frame signs.
pub fn chart_at_nearest_corank_one(p: usize, q: usize, block: &DMatrix<f64>) -> Result<LocalChart> {
    let svd = full_svd(block);
    let mut sig = svd.sigma.clone();
    sig[q - 1] = 0.0;
    let mut s_mat = DMatrix::zeros(q, p);
    for (i, &s) in sig.iter().enumerate() {
        s_mat[(i, i)] = s;
    }
    let base_block = &svd.u * s_mat * svd.v.transpose();
    let base = BlockShiftOperator::new(p, q, base_block)?;
    let u0 = svd.u.columns(q - 1, 1).into_owned();
    let v0 = svd.v.columns(q - 1, p - q + 1).into_owned();
    LocalChart::with_bases(base, u0, v0)
}

// ---------------------------------------------------------------------------
// eta
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Cell {
    cx: f64,
    cy: f64,
    hx: f64,
    hy: f64,
}

/// Evaluate the frozen-chart value of the family at (x, y) as a point in
/// the plane.
fn chart_point(f: &OperatorFamily, chart: &LocalChart, x: f64, y: f64) -> Result<[f64; 2]> {
    let phi = chart.chart_value_of_block(&f.block(x, y))?;
    Ok([phi[(0, 0)], phi[(0, 1)]])
}

/// One damped Newton step on the frozen-chart 2x2 system. Returns the new
/// iterate and residual, or None when no step decreases the residual.
fn newton_step(
    f: &OperatorFamily,
    chart: &LocalChart,
    z: [f64; 2],
    g: [f64; 2],
    gnorm: f64,
) -> Option<([f64; 2], [f64; 2], f64)> {
    let block = f.block(z[0], z[1]);
    let (dx, dy) = f.partials(z[0], z[1]);
    let jx = chart.chart_derivative(&block, &dx).ok()?;
    let jy = chart.chart_derivative(&block, &dy).ok()?;
    // 2x2 system: rows are chart components, columns parameters.
    let a = jx[(0, 0)];
    let b = jy[(0, 0)];
    let c = jx[(0, 1)];
    let d = jy[(0, 1)];
    let det = a * d - b * c;
    if det.abs() < 1e-300 {
        return None;
    }
    let step = [-(d * g[0] - b * g[1]) / det, -(-c * g[0] + a * g[1]) / det];
    // Backtracking damping to keep the residual decreasing.
    let mut lambda = 1.0;
    for _ in 0..8 {
        let trial = [z[0] + lambda * step[0], z[1] + lambda * step[1]];
        if let Ok(gt) = chart_point(f, chart, trial[0], trial[1]) {
            let gtnorm = (gt[0] * gt[0] + gt[1] * gt[1]).sqrt();
            if gtnorm < gnorm {
                return Some((trial, gt, gtnorm));
            }
        }
        lambda *= 0.5;
    }
    None
}

/// Newton iteration for chart_value(F(x, y)) = 0 with the chart frozen.
/// Returns the converged point and the parameter Jacobian determinant there.
///
/// After the acceptance tolerance is met, iteration continues while the
/// residual keeps shrinking: at a degenerate (non-transverse) zero plain
/// Newton only converges linearly and stopping at the tolerance would leave
/// the location with sqrt(tol) error, scattering duplicates wider than the
/// merge radius.
fn newton_polish(
    f: &OperatorFamily,
    chart: &LocalChart,
    start: [f64; 2],
    cfg: &EtaConfig,
) -> Option<([f64; 2], f64)> {
    let mut z = start;
    let scale = 1.0 + f.block(start[0], start[1]).norm();
    let tol = cfg.newton_tol * scale;
    let mut g = chart_point(f, chart, z[0], z[1]).ok()?;
    let mut gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
    let mut iters = 0;
    while gnorm >= tol {
        if iters >= cfg.max_newton_iters {
            return None;
        }
        iters += 1;
        let (zn, gn, gnn) = newton_step(f, chart, z, g, gnorm)?;
        z = zn;
        g = gn;
        gnorm = gnn;
    }
    for _ in 0..60 {
        match newton_step(f, chart, z, g, gnorm) {
            Some((zn, gn, gnn)) if gnn < 0.6 * gnorm => {
                z = zn;
                g = gn;
                gnorm = gnn;
            }
            _ => break,
        }
    }
    let det = chart_parameter_jacobian_det(f, chart, z)?;
    Some((z, det))
}

fn chart_parameter_jacobian_det(
    f: &OperatorFamily,
    chart: &LocalChart,
    z: [f64; 2],
) -> Option<f64> {
    let block = f.block(z[0], z[1]);
    let (dx, dy) = f.partials(z[0], z[1]);
    let jx = chart.chart_derivative(&block, &dx).ok()?;
    let jy = chart.chart_derivative(&block, &dy).ok()?;
    Some(jx[(0, 0)] * jy[(0, 1)] - jy[(0, 0)] * jx[(0, 1)])
}

/// Signed winding number of a planar loop sample around the origin, refined
/// until consecutive turns are all below pi/2. Returns None if a sample
/// gets too close to the origin relative to `scale`.
fn winding_number(points: &[[f64; 2]], scale: f64) -> Option<i64> {
    for p in points {
        if (p[0] * p[0] + p[1] * p[1]).sqrt() < 1e-13 * scale {
            return None;
        }
    }
    let mut total = 0.0;
    for i in 0..points.len() {
        let a = points[i];
        let b = points[(i + 1) % points.len()];
        let cross = a[0] * b[1] - a[1] * b[0];
        let dot = a[0] * b[0] + a[1] * b[1];
        let step = cross.atan2(dot);
        if step.abs() > PI / 2.0 {
            return Some(i64::MAX); // sentinel: needs refinement
        }
        total += step;
    }
    let w = (total / (2.0 * PI)).round();
    if (total - 2.0 * PI * w).abs() > 0.1 {
        return Some(i64::MAX);
    }
    Some(w as i64)
}

/// Winding parity of the chart value around a circle at `center`; shrinks
/// the circle if a zero sits on it, refines sampling until angular steps
/// are resolved.
fn local_winding(
    f: &OperatorFamily,
    chart: &LocalChart,
    center: [f64; 2],
    radius: f64,
) -> Result<(i64, u8)> {
    let scale = 1.0 + f.block(center[0], center[1]).norm();
    let mut r = radius;
    for _shrink in 0..20 {
        let mut n = 64usize;
        while n <= (1 << 14) {
            let mut pts = Vec::with_capacity(n);
            let mut bad = false;
            for i in 0..n {
                let t = 2.0 * PI * i as f64 / n as f64;
                match chart_point(f, chart, center[0] + r * t.cos(), center[1] + r * t.sin()) {
                    Ok(p) => pts.push(p),
                    Err(_) => {
                        bad = true;
                        break;
                    }
                }
            }
            if bad {
                break; // chart invalid on this circle; shrink
            }
            match winding_number(&pts, scale) {
                None => break, // zero on the circle; shrink
                Some(i64::MAX) => n *= 2,
                Some(w) => return Ok((w, (w.rem_euclid(2)) as u8)),
            }
        }
        r *= 0.5;
        if r < 1e-12 {
            break;
        }
    }
    Err(Error::NonIsolatedZeros(format!(
        "winding circle around ({:.6}, {:.6}) could not avoid nearby zeros",
        center[0], center[1]
    )))
}

/// Mod-2 intersection parity of the family with the corank-1 stratum.
///
/// The boundary must stay surjective; interior zeros are localized by
/// adaptive subdivision, polished by chart Newton, classified as transverse
/// or resolved by winding, then deduplicated. The certificate records every
/// zero with its local data.
pub fn eta(f: &OperatorFamily, cfg: &EtaConfig) -> Result<EtaCertificate> {
    // 1. Boundary surjectivity.
    let mut boundary_margin = f64::INFINITY;
    let mut worst = [0.0, 0.0];
    for pt in f.domain.boundary_points(cfg.boundary_samples) {
        let s = smallest_singular_value(&f.block(pt[0], pt[1]));
        if s < boundary_margin {
            boundary_margin = s;
            worst = pt;
        }
    }
    if boundary_margin <= cfg.boundary_margin {
        return Err(Error::BoundaryNotSurjective {
            found: boundary_margin,
            required: cfg.boundary_margin,
            x: worst[0],
            y: worst[1],
        });
    }

    // 2. Adaptive subdivision, breadth-first so the live-cell cap can
    // detect curve-like zero sets early.
    let (x0, x1, y0, y1) = f.domain.bounding_box();
    let g = cfg.initial_grid.max(1);
    let hx = (x1 - x0) / (2.0 * g as f64);
    let hy = (y1 - y0) / (2.0 * g as f64);
    let mut level: Vec<Cell> = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            level.push(Cell {
                cx: x0 + (2 * i + 1) as f64 * hx,
                cy: y0 + (2 * j + 1) as f64 * hy,
                hx,
                hy,
            });
        }
    }
    let mut report = GridReport {
        initial_grid: g,
        max_depth: cfg.max_depth,
        cells_visited: 0,
        cells_outside_domain: 0,
        cells_pruned: 0,
        candidate_cells: 0,
        newton_converged: 0,
        pruning_rigorous: false,
    };
    let mut candidates: Vec<Cell> = Vec::new();
    for depth in 0..=cfg.max_depth {
        let mut survivors: Vec<Cell> = Vec::new();
        for cell in &level {
            report.cells_visited += 1;
            if !cell_touches_domain(&f.domain, cell) {
                report.cells_outside_domain += 1;
                continue;
            }
            let sigma_c = smallest_singular_value(&f.block(cell.cx, cell.cy));
            let lip = sampled_lipschitz(f, cell);
            let half_diag = (cell.hx * cell.hx + cell.hy * cell.hy).sqrt();
            if sigma_c > lip * half_diag {
                report.cells_pruned += 1;
                continue;
            }
            survivors.push(*cell);
        }
        if depth == cfg.max_depth {
            candidates = survivors;
            if candidates.len() > cfg.max_cells {
                return Err(Error::NonIsolatedZeros(format!(
                    "{} candidate cells remain at depth {} (cap {}); the zero \
                     set does not resolve into isolated points",
                    candidates.len(),
                    depth,
                    cfg.max_cells
                )));
            }
            break;
        }
        let mut next: Vec<Cell> = Vec::with_capacity(4 * survivors.len());
        for cell in &survivors {
            let (qx, qy) = (cell.hx / 2.0, cell.hy / 2.0);
            for &sx in &[-1.0, 1.0] {
                for &sy in &[-1.0, 1.0] {
                    next.push(Cell {
                        cx: cell.cx + sx * qx,
                        cy: cell.cy + sy * qy,
                        hx: qx,
                        hy: qy,
                    });
                }
            }
        }
        if next.len() > cfg.max_cells {
            return Err(Error::NonIsolatedZeros(format!(
                "{} live cells at depth {} (cap {}); the zero set does not \
                 resolve into isolated points",
                next.len(),
                depth + 1,
                cfg.max_cells
            )));
        }
        level = next;
    }
    report.candidate_cells = candidates.len();

    // 3. Newton polish per candidate, with a chart frozen at the candidate.
    let mut found: Vec<([f64; 2], f64)> = Vec::new();
    for cell in &candidates {
        let block = f.block(cell.cx, cell.cy);
        let corank = numerical_corank(&block, cfg.corank_rel_tol);
        if corank >= 2 {
            return Err(Error::CorankTooHigh { corank, x: cell.cx, y: cell.cy });
        }
        // A candidate whose *second-smallest* singular value could also
        // vanish inside the cell sits next to a corank-2 point, which the
        // chart theory excludes; refuse rather than silently missing it.
        if f.q >= 2 {
            let s = singular_values(&block);
            let lip = sampled_lipschitz(f, cell);
            let half_diag = (cell.hx * cell.hx + cell.hy * cell.hy).sqrt();
            if s[f.q - 2] <= lip * half_diag {
                return Err(Error::CorankTooHigh { corank: 2, x: cell.cx, y: cell.cy });
            }
        }
        let chart = match chart_at_nearest_corank_one(f.p, f.q, &block) {
            Ok(c) => c,
            Err(_) => continue,
        };
        if let Some((z, det)) = newton_polish(f, &chart, [cell.cx, cell.cy], cfg) {
            if !f.domain.contains(z[0], z[1]) {
                continue;
            }
            report.newton_converged += 1;
            found.push((z, det));
        }
    }

    // 4. Deduplicate in the domain metric.
    let mut unique: Vec<([f64; 2], f64)> = Vec::new();
    for (z, det) in found {
        if !unique.iter().any(|(u, _)| f.domain.distance(*u, z) < cfg.merge_radius) {
            unique.push((z, det));
        }
    }
    unique.sort_by(|a, b| {
        (a.0[0], a.0[1])
            .partial_cmp(&(b.0[0], b.0[1]))
            .expect("zero locations are finite")
    });

    // 5. Classify each zero.
    let mut zeros: Vec<ZeroRecord> = Vec::new();
    for (idx, (z, det)) in unique.iter().enumerate() {
        let block = f.block(z[0], z[1]);
        let corank = numerical_corank(&block, cfg.corank_rel_tol);
        if corank >= 2 {
            return Err(Error::CorankTooHigh { corank, x: z[0], y: z[1] });
        }
        let transverse = det.abs() > cfg.tol_trans;
        let local = if transverse {
            1u8
        } else {
            let mut radius = cfg.winding_radius.min(0.45 * f.domain.boundary_distance(z[0], z[1]));
            for (jdx, (other, _)) in unique.iter().enumerate() {
                if jdx != idx {
                    radius = radius.min(0.45 * f.domain.distance(*z, *other));
                }
            }
            let chart = chart_at_nearest_corank_one(f.p, f.q, &block)?;
            local_winding(f, &chart, *z, radius)?.1
        };
        zeros.push(ZeroRecord {
            location: *z,
            corank_at_zero: corank,
            chart_jacobian_det: *det,
            local_winding: local,
            transverse,
        });
    }

    let value = zeros.iter().map(|z| z.local_winding as u32).sum::<u32>() % 2;
    Ok(EtaCertificate {
        value: value as u8,
        zeros,
        boundary_margin,
        grid_report: report,
        fd_derivative: f.fd_derivative,
    })
}

fn cell_touches_domain(domain: &ParamDomain, cell: &Cell) -> bool {
    match domain {
        ParamDomain::Disk { radius } => {
            // Nearest point of the cell rectangle to the origin.
            let nx = (cell.cx.abs() - cell.hx).max(0.0);
            let ny = (cell.cy.abs() - cell.hy).max(0.0);
            nx * nx + ny * ny <= radius * radius
        }
        _ => true, // bounding box equals the domain
    }
}

/// Heuristic per-cell Lipschitz estimate: largest sampled derivative-block
/// Frobenius norm over center and corners, with a safety factor. Disclosed
/// as non-rigorous in the grid report.
fn sampled_lipschitz(f: &OperatorFamily, cell: &Cell) -> f64 {
    let mut worst: f64 = 0.0;
    for &(sx, sy) in &[(0.0, 0.0), (-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
        let (dx, dy) = f.partials(cell.cx + sx * cell.hx, cell.cy + sy * cell.hy);
        let g = (dx.norm_squared() + dy.norm_squared()).sqrt();
        worst = worst.max(g);
    }
    1.25 * worst
}

// ---------------------------------------------------------------------------
// Consistency oracle: parity two ways
// ---------------------------------------------------------------------------

/// Cross-check `eta` by recomputing every zero's contribution as an angular
/// winding, independently of the transversality classification. Returns
/// true when the winding parity sum matches the certified value.
pub fn eta_two_ways_check(f: &OperatorFamily, cfg: &EtaConfig) -> Result<bool> {
    let cert = eta(f, cfg)?;
    let mut winding_sum = 0u32;
    for (idx, z) in cert.zeros.iter().enumerate() {
        let mut radius = cfg
            .winding_radius
            .min(0.45 * f.domain.boundary_distance(z.location[0], z.location[1]));
        for (jdx, other) in cert.zeros.iter().enumerate() {
            if jdx != idx {
                radius = radius.min(0.45 * f.domain.distance(z.location, other.location));
            }
        }
        let block = f.block(z.location[0], z.location[1]);
        let chart = chart_at_nearest_corank_one(f.p, f.q, &block)?;
        let (_, parity) = local_winding(f, &chart, z.location, radius)?;
        winding_sum += parity as u32;
    }
    Ok(winding_sum % 2 == cert.value as u32)
}

// ---------------------------------------------------------------------------
// Relative-boundary perturbation
// ---------------------------------------------------------------------------

/// Metadata for a perturbed-parity computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub epsilon: f64,
    /// Seeds attempted, in order.
    pub seeds: Vec<u64>,
    /// Parities of the seeds whose perturbation isolated, in order.
    pub values: Vec<u8>,
    /// Seeds whose perturbation direction could not be resolved, with the
    /// refusal; these carry no parity information, only numerical bad luck.
    pub skipped: Vec<String>,
    pub agreed: bool,
}

/// Add `epsilon * cutoff(x, y) * E` to the family, with E a fixed random
/// block and the cutoff vanishing on the boundary.
pub fn perturb_rel_boundary(f: &OperatorFamily, epsilon: f64, seed: u64) -> OperatorFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: DMatrix<f64> = DMatrix::from_fn(f.q, f.p, |_, _| rng.gen_range(-1.0..1.0));
    let e2 = e.clone();
    let domain = f.domain.clone();
    let domain2 = f.domain.clone();
    let base = f.clone();
    let base2 = f.clone();
    let mut out = OperatorFamily::new(
        f.domain.clone(),
        f.p,
        f.q,
        move |x, y| {
            let (rho, _) = domain.boundary_cutoff(x, y);
            base.block(x, y) + epsilon * rho * &e
        },
        move |x, y| {
            let (_rho, grad) = domain2.boundary_cutoff(x, y);
            let (dx, dy) = base2.partials(x, y);
            (dx + epsilon * grad[0] * &e2, dy + epsilon * grad[1] * &e2)
        },
    )
    .expect("perturbed family preserves the block shape");
    out.fd_derivative = f.fd_derivative;
    out
}

/// Parity of a family whose zeros against the stratum are not isolated:
/// perturb relative to the boundary and certify the perturbed parity
/// instead. Because the perturbation vanishes on the boundary, any
/// sufficiently small epsilon yields the same parity as a boundary-fixing
/// homotopy representative; agreement across independent seeds is the
/// advertised (non-rigorous) smallness check.
pub fn eta_rel_boundary_perturbed(
    f: &OperatorFamily,
    cfg: &EtaConfig,
    epsilon: f64,
    seeds: &[u64],
) -> Result<(EtaCertificate, PerturbationReport)> {
    if seeds.len() < 2 {
        return Err(Error::InvalidInput("need at least two perturbation seeds".into()));
    }
    let mut certs = Vec::with_capacity(seeds.len());
    let mut skipped = Vec::new();
    for &s in seeds {
        let pf = perturb_rel_boundary(f, epsilon, s);
        match eta(&pf, cfg) {
            Ok(cert) => certs.push(cert),
            // A direction that happens to leave the count landscape
            // unresolvable carries no parity information; skip it, but
            // insist on two independent agreeing directions below.
            Err(e @ (Error::NonIsolatedZeros(_) | Error::CorankTooHigh { .. })) => {
                skipped.push(format!("seed {s}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    let values: Vec<u8> = certs.iter().map(|c| c.value).collect();
    let agreed = certs.len() >= 2 && values.windows(2).all(|w| w[0] == w[1]);
    let report = PerturbationReport {
        epsilon,
        seeds: seeds.to_vec(),
        values: values.clone(),
        skipped: skipped.clone(),
        agreed,
    };
    if certs.len() < 2 {
        return Err(Error::NonIsolatedZeros(format!(
            "only {} of {} perturbation seeds resolved ({}); add seeds or grow epsilon",
            certs.len(),
            seeds.len(),
            skipped.join("; ")
        )));
    }
    if !agreed {
        return Err(Error::NotRegular(format!(
            "perturbed parities disagree across seeds: {values:?}; decrease epsilon"
        )));
    }
    Ok((certs.remove(0), report))
}

// ---------------------------------------------------------------------------
// Field dump for external plotting
// ---------------------------------------------------------------------------

/// Write `x,y,sigma_min` CSV rows on a uniform n x n grid over the domain's
/// bounding box, keeping only in-domain points.
pub fn write_sigma_min_grid(
    f: &OperatorFamily,
    n: usize,
    out: &mut dyn std::io::Write,
) -> std::io::Result<()> {
    writeln!(out, "x,y,sigma_min")?;
    let (x0, x1, y0, y1) = f.domain.bounding_box();
    let n = n.max(2);
    for i in 0..n {
        let x = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let y = y0 + (y1 - y0) * j as f64 / (n - 1) as f64;
            if !f.domain.contains(x, y) {
                continue;
            }
            let s = smallest_singular_value(&f.block(x, y));
            writeln!(out, "{x},{y},{s}")?;
        }
    }
    Ok(())
}
