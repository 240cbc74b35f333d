//! Predictor-corrector machinery for one-dimensional solution sets.
//!
//! Everything that walks along a curve of solutions — preimage circles,
//! fold loci in homotopy audits — goes through the two primitives here: a
//! Gauss-Newton corrector that projects a nearby point back onto the zero
//! set, and a tangent stepper that follows the Jacobian's kernel direction
//! with orientation continuity until the loop closes on its start.

use crate::error::{Error, Result};
use crate::linalg::{full_svd, pinv_solve};
use nalgebra::{DMatrix, DVector};

/// Knobs for [`trace_closed_curve`]. Defaults follow the conventions of the
/// circle-tracing pipeline: 1e-2 arc steps, closure within 1.2 steps, and a
/// generous escape box.
#[derive(Debug, Clone)]
pub struct CurveTraceConfig {
    /// Arc-length of each predictor step.
    pub step: f64,
    /// Abort if the curve has not closed after this many steps.
    pub max_steps: usize,
    /// Don't test closure before this many steps (prevents immediately
    /// re-detecting the start point).
    pub min_steps_before_closure: usize,
    /// Closure is declared when the current point is within
    /// `closure_tol_factor * step` of the start.
    pub closure_tol_factor: f64,
    /// Residual norm at which the corrector accepts a point.
    pub corrector_tol: f64,
    pub max_corrector_iters: usize,
    /// Any coordinate leaving [-w, w] aborts the trace.
    pub box_half_width: f64,
}

impl Default for CurveTraceConfig {
    fn default() -> Self {
        CurveTraceConfig {
            step: 1e-2,
            max_steps: 20_000,
            min_steps_before_closure: 5,
            closure_tol_factor: 1.2,
            corrector_tol: 1e-10,
            max_corrector_iters: 25,
            box_half_width: 10.0,
        }
    }
}

/// A closed (or aborted) polyline of corrected solution points.
#[derive(Debug, Clone)]
pub struct TracedCurve {
    /// Corrected samples; for a closed curve the last sample is one step
    /// before the start (the loop is implicit, the start is not repeated).
    pub samples: Vec<DVector<f64>>,
    pub closed: bool,
    /// Smallest q-th singular value of the Jacobian seen along the curve —
    /// the margin by which the zero set stayed a regular curve.
    pub regularity_margin: f64,
}

/// Gauss-Newton correction of `x0` onto the zero set of `value`.
///
/// Each step solves the local least-squares system with a pseudoinverse, so
/// for an underdetermined Jacobian the step is minimal-norm: the iteration
/// projects onto the solution manifold rather than sliding along it.
pub fn newton_correct(
    value: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    jacobian: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    x0: &DVector<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    let mut x = x0.clone();
    let mut r = value(&x);
    for _ in 0..max_iters {
        if r.norm() <= tol {
            return Ok(x);
        }
        let j = jacobian(&x);
        let step = pinv_solve(&j, &r, 1e-12);
        let mut lambda = 1.0;
        // Backtrack if a full step does not decrease the residual.
        for _ in 0..8 {
            let cand = &x - lambda * &step;
            let rc = value(&cand);
            if rc.norm() < r.norm() {
                x = cand;
                r = rc;
                break;
            }
            lambda *= 0.5;
        }
        if lambda < 1.0 / 200.0 {
            break;
        }
    }
    if r.norm() <= tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            what: "curve corrector".into(),
            residual: r.norm(),
        })
    }
}

/// Unit kernel direction of a q x (q+1) Jacobian: the right singular vector
/// of the smallest singular value.
pub fn kernel_tangent(j: &DMatrix<f64>) -> DVector<f64> {
    let svd = full_svd(j);
    svd.v.column(j.ncols() - 1).into_owned()
}

/// Follow the regular zero curve of `value` through `start` until it closes.
///
/// `start` is corrected first; every predictor step moves along the
/// Jacobian kernel (sign-matched to the previous tangent) and is corrected
/// back. Returns the polyline, whether it closed, and the worst Jacobian
/// regularity margin encountered.
pub fn trace_closed_curve(
    value: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    jacobian: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    start: &DVector<f64>,
    cfg: &CurveTraceConfig,
) -> Result<TracedCurve> {
    let x0 = newton_correct(value, jacobian, start, cfg.corrector_tol, cfg.max_corrector_iters)?;
    let mut samples = vec![x0.clone()];
    let mut margin = f64::INFINITY;
    let mut prev_tangent: Option<DVector<f64>> = None;
    let mut x = x0.clone();

    for step_idx in 0..cfg.max_steps {
        let j = jacobian(&x);
        let svd = full_svd(&j);
        let q = j.nrows();
        if q > 0 {
            margin = margin.min(svd.sigma[q - 1]);
        }
        let mut tangent = svd.v.column(j.ncols() - 1).into_owned();
        if let Some(prev) = &prev_tangent {
            if tangent.dot(prev) < 0.0 {
                tangent = -tangent;
            }
        }
        let pred = &x + cfg.step * &tangent;
        x = newton_correct(value, jacobian, &pred, cfg.corrector_tol, cfg.max_corrector_iters)?;
        if x.amax() > cfg.box_half_width {
            return Err(Error::EscapedBox(x.iter().copied().collect()));
        }
        prev_tangent = Some(tangent);

        if step_idx + 1 >= cfg.min_steps_before_closure
            && (&x - &x0).norm() < cfg.closure_tol_factor * cfg.step
        {
            return Ok(TracedCurve { samples, closed: true, regularity_margin: margin });
        }
        samples.push(x.clone());
    }
    Ok(TracedCurve { samples, closed: false, regularity_margin: margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_value(x: &DVector<f64>) -> DVector<f64> {
        DVector::from_row_slice(&[x[0] * x[0] + x[1] * x[1] - 1.0])
    }

    fn circle_jac(x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]])
    }

    #[test]
    fn corrector_lands_on_the_circle() {
        let x0 = DVector::from_row_slice(&[1.3, 0.2]);
        let x = newton_correct(&circle_value, &circle_jac, &x0, 1e-12, 30).unwrap();
        assert!(circle_value(&x).norm() < 1e-12);
        // Minimal-norm steps keep the correction radial.
        assert!((x[1] / x[0] - 0.2 / 1.3).abs() < 1e-6);
    }

    #[test]
    fn corrector_reports_failure_away_from_solutions() {
        let v = |_: &DVector<f64>| DVector::from_row_slice(&[1.0]);
        let j = |_: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let err = newton_correct(&v, &j, &DVector::zeros(2), 1e-12, 10);
        assert!(matches!(err, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn traces_the_unit_circle_and_closes() {
        let start = DVector::from_row_slice(&[0.99, 0.05]);
        let cfg = CurveTraceConfig::default();
        let curve = trace_closed_curve(&circle_value, &circle_jac, &start, &cfg).unwrap();
        assert!(curve.closed);
        // Circumference 2*pi at step 1e-2: roughly 628 samples.
        assert!((curve.samples.len() as f64 - 2.0 * std::f64::consts::PI / cfg.step).abs() < 10.0);
        for s in &curve.samples {
            assert!((s.norm() - 1.0).abs() < 1e-9);
        }
        // The circle's Jacobian has norm 2 everywhere on it.
        assert!((curve.regularity_margin - 2.0).abs() < 1e-6);
    }

    #[test]
    fn traces_a_circle_in_higher_ambient_dimension() {
        // Zero set of (x1^2 + x2^2 - 1, x3, x4): the unit circle in R^4.
        let v = |x: &DVector<f64>| {
            DVector::from_row_slice(&[x[0] * x[0] + x[1] * x[1] - 1.0, x[2], x[3]])
        };
        let j = |x: &DVector<f64>| {
            DMatrix::from_row_slice(
                3,
                4,
                &[
                    2.0 * x[0], 2.0 * x[1], 0.0, 0.0,
                    0.0, 0.0, 1.0, 0.0,
                    0.0, 0.0, 0.0, 1.0,
                ],
            )
        };
        let start = DVector::from_row_slice(&[1.02, 0.0, 0.01, -0.02]);
        let curve = trace_closed_curve(&v, &j, &start, &CurveTraceConfig::default()).unwrap();
        assert!(curve.closed);
        for s in &curve.samples {
            assert!(v(s).norm() < 1e-9);
        }
    }

    #[test]
    fn escape_box_aborts_runaway_traces() {
        // Zero set x2 = 0: a line, never closes, leaves the box.
        let v = |x: &DVector<f64>| DVector::from_row_slice(&[x[1]]);
        let j = |_: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let cfg = CurveTraceConfig { box_half_width: 2.0, ..Default::default() };
        let res = trace_closed_curve(&v, &j, &DVector::zeros(2), &cfg);
        assert!(matches!(res, Err(Error::EscapedBox { .. })));
    }

    #[test]
    fn open_curve_within_box_reports_not_closed() {
        let v = |x: &DVector<f64>| DVector::from_row_slice(&[x[1]]);
        let j = |_: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let cfg = CurveTraceConfig { max_steps: 50, ..Default::default() };
        let curve = trace_closed_curve(&v, &j, &DVector::zeros(2), &cfg).unwrap();
        assert!(!curve.closed);
        assert_eq!(curve.samples.len(), 51);
    }
}
