//! Preimage-circle tracing and capping disks.
//!
//! The preimage of a regular value under a proper index-one map is a
//! disjoint union of circles in the finitely many active coordinates.
//! [`trace_preimage`] finds them: a coarse seed grid is filtered by
//! residual, corrected onto the zero set, deduplicated against circles
//! already found, and each fresh point is continued around its loop.
//!
//! [`CappingDisk`] then spans a found circle with the cone from a chosen
//! center over a periodic Catmull-Rom spline through the samples — the
//! two-parameter surface on which intersection counts against the singular
//! stratum are computed.

use crate::continuation::{newton_correct, trace_closed_curve, CurveTraceConfig};
use crate::error::{Error, Result};
use crate::intersection::ParamDomain;
use crate::linalg::singular_values;
use crate::maps::{BlockShiftMap, Surface};
use nalgebra::DVector;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

/// Knobs for [`trace_preimage`].
#[derive(Debug, Clone, Serialize)]
pub struct TraceConfig {
    /// Seeds are laid out in [-w, w] per active axis and traces must stay
    /// inside it.
    pub box_half_width: f64,
    /// Seed grid resolution per axis (at most four axes are gridded).
    pub seeds_per_axis: usize,
    /// Hard cap on the total seed count.
    pub max_seed_count: usize,
    /// Seeds with residual above this are discarded before correction.
    pub seed_residual_cap: f64,
    /// Arc-length continuation step.
    pub max_step: f64,
    /// Corrector acceptance residual.
    pub residual_tol: f64,
    /// Smallest acceptable Jacobian singular value along a circle.
    pub reg_tol: f64,
    /// Corrected seeds closer than this to an existing circle are merged.
    pub dedup_distance: f64,
    /// Continuation step budget per circle.
    pub max_steps: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            box_half_width: 2.0,
            seeds_per_axis: 17,
            max_seed_count: 100_000,
            seed_residual_cap: 4.0,
            max_step: 1e-2,
            residual_tol: 1e-10,
            reg_tol: 1e-6,
            dedup_distance: 5e-2,
            max_steps: 20_000,
        }
    }
}

/// A closed preimage component as a corrected polyline.
#[derive(Debug, Clone)]
pub struct TracedCircle {
    /// Samples in traversal order; the loop closes back to the first
    /// sample, which is not repeated.
    pub samples: Vec<DVector<f64>>,
    /// Smallest Jacobian singular value seen along the circle (infinite
    /// for parametric circles, which carry no map).
    pub regularity_margin: f64,
}

impl TracedCircle {
    /// Sample a circle given in closed form at `n` uniform parameter values.
    pub fn from_parametric(f: impl Fn(f64) -> DVector<f64>, n: usize) -> TracedCircle {
        let samples =
            (0..n.max(4)).map(|i| f(2.0 * PI * i as f64 / n.max(4) as f64)).collect();
        TracedCircle { samples, regularity_margin: f64::INFINITY }
    }

    pub fn ambient_dim(&self) -> usize {
        self.samples.first().map(|s| s.len()).unwrap_or(0)
    }

    pub fn barycenter(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.ambient_dim());
        for s in &self.samples {
            b += s;
        }
        b / self.samples.len() as f64
    }

    /// Distance from `u` to the nearest sample.
    pub fn min_distance_to(&self, u: &DVector<f64>) -> f64 {
        self.samples.iter().map(|s| (s - u).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Largest distance from any sample of `self` to a dense polyline
    /// through a reference curve — the sample-deviation measure used to
    /// compare a traced circle against a known exact one. Distances are to
    /// the polyline's segments, so at `dense` reference points the measure
    /// itself is accurate to the chord sagitta (~1/dense^2), not the much
    /// coarser sample spacing.
    pub fn max_deviation_from_parametric(
        &self,
        f: impl Fn(f64) -> DVector<f64>,
        dense: usize,
    ) -> f64 {
        let reference: Vec<DVector<f64>> =
            (0..dense).map(|i| f(2.0 * PI * i as f64 / dense as f64)).collect();
        let seg_dist = |s: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>| {
            let ab = b - a;
            let len2 = ab.norm_squared();
            let t = if len2 == 0.0 { 0.0 } else { ((s - a).dot(&ab) / len2).clamp(0.0, 1.0) };
            (s - (a + t * ab)).norm()
        };
        self.samples
            .iter()
            .map(|s| {
                (0..dense)
                    .map(|i| seg_dist(s, &reference[i], &reference[(i + 1) % dense]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Length of the closed polyline (including the wrap-around edge).
    pub fn polyline_length(&self) -> f64 {
        let n = self.samples.len();
        (0..n).map(|i| (&self.samples[(i + 1) % n] - &self.samples[i]).norm()).sum()
    }
}

/// Result of a preimage trace: the circles plus honest bookkeeping about
/// how the seeds fared (a miss of a small component cannot be excluded by
/// a grid search, so degradations are reported as warnings, never patched).
#[derive(Debug)]
pub struct TraceOutcome {
    pub circles: Vec<TracedCircle>,
    pub warnings: Vec<String>,
    pub seeds_examined: usize,
    pub seeds_corrected: usize,
}

fn seed_grid(p: usize, cfg: &TraceConfig, warnings: &mut Vec<String>) -> Vec<DVector<f64>> {
    let active = p.min(4);
    if p > 4 {
        warnings.push(format!(
            "seed grid only varies the first 4 of {p} coordinates; components \
             off that slice are not found (seed miss possible)"
        ));
    }
    let mut n = cfg.seeds_per_axis.max(2);
    while n.pow(active as u32) > cfg.max_seed_count && n > 2 {
        n -= 1;
    }
    if n != cfg.seeds_per_axis.max(2) {
        warnings.push(format!(
            "seed grid reduced to {n} per axis to respect the {} seed cap",
            cfg.max_seed_count
        ));
    }
    let coords: Vec<f64> = (0..n)
        .map(|i| -cfg.box_half_width + 2.0 * cfg.box_half_width * i as f64 / (n - 1) as f64)
        .collect();
    let total = n.pow(active as u32);
    let mut seeds = Vec::with_capacity(total);
    for idx in 0..total {
        let mut u = DVector::zeros(p);
        let mut rest = idx;
        for a in 0..active {
            u[a] = coords[rest % n];
            rest /= n;
        }
        seeds.push(u);
    }
    seeds
}

/// Trace every preimage circle of `target` under `map` that the seed grid
/// reaches.
///
/// Fails with `NotRegular` if a circle passes through a Jacobian-deficient
/// point (or degenerates to a point-like loop), and with `EscapedBox` if a
/// component is not compact within the search box.
pub fn trace_preimage(
    map: &BlockShiftMap,
    target: &DVector<f64>,
    cfg: &TraceConfig,
) -> Result<TraceOutcome> {
    if map.index() != 1 {
        return Err(Error::InvalidInput(format!(
            "preimage tracing needs an index-one map, got index {}",
            map.index()
        )));
    }
    if target.len() != map.q() {
        return Err(Error::ShapeError(format!(
            "target has {} components, map has {}",
            target.len(),
            map.q()
        )));
    }
    let value = {
        let m = map.clone();
        let t = target.clone();
        move |u: &DVector<f64>| m.eval_core(u) - &t
    };
    let jac = {
        let m = map.clone();
        move |u: &DVector<f64>| m.jacobian(u)
    };

    let mut warnings = Vec::new();
    let mut seeds = seed_grid(map.p(), cfg, &mut warnings);
    let mut scored: Vec<(f64, usize)> = seeds
        .iter()
        .enumerate()
        .map(|(i, s)| (value(s).norm(), i))
        .filter(|(r, _)| *r <= cfg.seed_residual_cap)
        .collect();
    let seeds_examined = seeds.len();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let trace_cfg = CurveTraceConfig {
        step: cfg.max_step,
        max_steps: cfg.max_steps,
        corrector_tol: cfg.residual_tol,
        box_half_width: cfg.box_half_width,
        ..Default::default()
    };

    let mut circles: Vec<TracedCircle> = Vec::new();
    let mut seeds_corrected = 0usize;
    for (_, i) in scored {
        let seed = seeds[i].clone();
        let corrected = match newton_correct(&value, &jac, &seed, cfg.residual_tol, 60) {
            Ok(x) => x,
            Err(_) => continue, // seed drifted off; others cover the circle
        };
        seeds_corrected += 1;
        if corrected.amax() > cfg.box_half_width {
            continue;
        }
        if circles.iter().any(|c| c.min_distance_to(&corrected) < cfg.dedup_distance) {
            continue;
        }
        let sigmas = singular_values(&jac(&corrected));
        let margin_here = sigmas.last().copied().unwrap_or(0.0);
        if margin_here <= cfg.reg_tol {
            return Err(Error::NotRegular(format!(
                "Jacobian nearly singular (sigma_min {margin_here:.3e}) at a preimage point {:?}",
                corrected.as_slice()
            )));
        }
        let curve = trace_closed_curve(&value, &jac, &corrected, &trace_cfg)?;
        if !curve.closed {
            return Err(Error::NoConvergence {
                what: "circle closure".into(),
                residual: (curve.samples.last().unwrap() - &curve.samples[0]).norm(),
            });
        }
        if curve.samples.len() < 10 {
            return Err(Error::NotRegular(format!(
                "trace closed after only {} steps: component is point-like at step {:.1e}",
                curve.samples.len(),
                cfg.max_step
            )));
        }
        if curve.regularity_margin <= cfg.reg_tol {
            return Err(Error::NotRegular(format!(
                "regularity margin {:.3e} along the circle is below {:.1e}",
                curve.regularity_margin, cfg.reg_tol
            )));
        }
        circles.push(TracedCircle {
            samples: curve.samples,
            regularity_margin: curve.regularity_margin,
        });
    }
    seeds.clear();

    if circles.is_empty() {
        warnings.push(
            "no preimage circles found: the preimage is empty or every component \
             missed the seed grid"
                .into(),
        );
    }
    // Deterministic order: by barycenter, lexicographically.
    circles.sort_by(|a, b| {
        let (ba, bb) = (a.barycenter(), b.barycenter());
        ba.iter().partial_cmp(bb.iter()).unwrap()
    });
    Ok(TraceOutcome { circles, warnings, seeds_examined, seeds_corrected })
}

/// The cone from a center over a periodic Catmull-Rom spline through a
/// circle's samples: a capping disk for the circle, parametrized over the
/// unit disk with the circle (up to spline interpolation) as its rim.
#[derive(Clone)]
pub struct CappingDisk {
    knots: Arc<Vec<DVector<f64>>>,
    center: DVector<f64>,
    p: usize,
}

impl CappingDisk {
    /// Cap with the cone apex at the circle's barycenter.
    pub fn over(circle: &TracedCircle) -> Result<CappingDisk> {
        let center = circle.barycenter();
        CappingDisk::with_center(circle, center)
    }

    /// Cap with a caller-chosen cone apex (used to nudge the cap off a
    /// singular point sitting exactly at the barycenter).
    pub fn with_center(circle: &TracedCircle, center: DVector<f64>) -> Result<CappingDisk> {
        if circle.samples.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "capping needs at least 4 circle samples, got {}",
                circle.samples.len()
            )));
        }
        if center.len() != circle.ambient_dim() {
            return Err(Error::ShapeError(format!(
                "center has dimension {}, circle lives in dimension {}",
                center.len(),
                circle.ambient_dim()
            )));
        }
        Ok(CappingDisk {
            knots: Arc::new(circle.samples.clone()),
            p: circle.ambient_dim(),
            center,
        })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// Spline point and theta-derivative at angle `theta`. The spline
    /// interpolates knot `i` at `theta = 2 pi i / n` and is C^1 across
    /// segments.
    fn spline(&self, theta: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.knots.len();
        let s = (theta / (2.0 * PI) * n as f64).rem_euclid(n as f64);
        let i = (s as usize).min(n - 1);
        let u = s - i as f64;
        let p0 = &self.knots[(i + n - 1) % n];
        let p1 = &self.knots[i];
        let p2 = &self.knots[(i + 1) % n];
        let p3 = &self.knots[(i + 2) % n];
        let a = p2 - p0;
        let b = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
        let c = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
        let point = p1 + 0.5 * (&a * u + &b * (u * u) + &c * (u * u * u));
        let du = 0.5 * (&a + &b * (2.0 * u) + &c * (3.0 * u * u));
        (point, du * (n as f64 / (2.0 * PI)))
    }

    /// Cone point at disk coordinates (x, y).
    pub fn point(&self, x: f64, y: f64) -> DVector<f64> {
        let r = x.hypot(y);
        let theta = if r == 0.0 { 0.0 } else { y.atan2(x) };
        let (c, _) = self.spline(theta);
        &self.center + r * (c - &self.center)
    }

    /// Exact partial derivatives of the cone parametrization:
    /// d/dx = cos(theta) (c - w) - sin(theta) c',
    /// d/dy = sin(theta) (c - w) + cos(theta) c'.
    /// Bounded everywhere; at the apex the direction theta = 0 is used.
    pub fn partials(&self, x: f64, y: f64) -> (DVector<f64>, DVector<f64>) {
        let r = x.hypot(y);
        let (ct, st) = if r == 0.0 { (1.0, 0.0) } else { (x / r, y / r) };
        let theta = if r == 0.0 { 0.0 } else { y.atan2(x) };
        let (c, dc) = self.spline(theta);
        let radial = c - &self.center;
        (ct * &radial - st * &dc, st * &radial + ct * &dc)
    }

    /// The cap as a [`Surface`] over the unit disk, ready for
    /// differential-family construction.
    pub fn surface(&self) -> Surface {
        let a = self.clone();
        let b = self.clone();
        Surface::new(
            ParamDomain::Disk { radius: 1.0 },
            self.p,
            move |x, y| a.point(x, y),
            move |x, y| b.partials(x, y),
        )
        .expect("unit disk domain is valid")
    }
}

/// Write a circle's samples as CSV (`u1,...,up` header, one row per sample).
pub fn write_circle_csv(circle: &TracedCircle, out: &mut dyn Write) -> std::io::Result<()> {
    let p = circle.ambient_dim();
    let header: Vec<String> = (1..=p).map(|i| format!("u{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for s in &circle.samples {
        let row: Vec<String> = s.iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::differential_family;
    use crate::models::{circle_s0, circle_s1, folded_hopf_core, hopf_core, norm_square_core};
    use crate::poly::{mono, PolynomialCore};

    fn map(core: PolynomialCore) -> BlockShiftMap {
        BlockShiftMap::new(core).unwrap()
    }

    #[test]
    fn norm_square_preimage_is_one_unit_circle() {
        let f = map(norm_square_core());
        let out =
            trace_preimage(&f, &DVector::from_row_slice(&[1.0]), &TraceConfig::default())
                .unwrap();
        assert_eq!(out.circles.len(), 1);
        let c = &out.circles[0];
        for s in &c.samples {
            assert!((s.norm() - 1.0).abs() < 1e-9);
        }
        // Circumference / step, within a few samples.
        assert!((c.samples.len() as f64 - 2.0 * PI / 1e-2).abs() < 10.0);
        assert!((c.regularity_margin - 2.0).abs() < 1e-4);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn folded_hopf_preimage_is_both_model_circles() {
        let h = map(folded_hopf_core());
        let out = trace_preimage(
            &h,
            &DVector::from_row_slice(&[0.0, 0.0, 1.0]),
            &TraceConfig::default(),
        )
        .unwrap();
        assert_eq!(out.circles.len(), 2, "expected the two model circles");
        // One traced circle near each model circle, in either discovery
        // order: the deviation pairing must be a perfect matching.
        let dev = |c: &TracedCircle, which: usize| {
            if which == 0 {
                c.max_deviation_from_parametric(|t| circle_s0(4, t), 4096)
            } else {
                c.max_deviation_from_parametric(circle_s1, 4096)
            }
        };
        let straight = dev(&out.circles[0], 0) < 1e-6 && dev(&out.circles[1], 1) < 1e-6;
        let crossed = dev(&out.circles[0], 1) < 1e-6 && dev(&out.circles[1], 0) < 1e-6;
        assert!(
            straight ^ crossed,
            "the two traced circles do not match the two model circles one-to-one"
        );
    }

    #[test]
    fn hopf_preimage_is_a_single_fiber() {
        let g = map(hopf_core());
        let out = trace_preimage(
            &g,
            &DVector::from_row_slice(&[0.0, 0.0, 1.0]),
            &TraceConfig::default(),
        )
        .unwrap();
        assert_eq!(out.circles.len(), 1);
        let dev = out.circles[0].max_deviation_from_parametric(|t| circle_s0(4, t), 4096);
        assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn empty_preimage_reports_a_warning() {
        let f = map(norm_square_core());
        let out =
            trace_preimage(&f, &DVector::from_row_slice(&[-1.0]), &TraceConfig::default())
                .unwrap();
        assert!(out.circles.is_empty());
        assert!(out.warnings.iter().any(|w| w.contains("no preimage circles")));
    }

    #[test]
    fn noncompact_component_escapes_the_box() {
        // u1 u2 = 1: a hyperbola, leaves any box.
        let core =
            PolynomialCore::new(2, 1, vec![vec![mono(1.0, &[1, 1]), mono(-1.0, &[0, 0])]])
                .unwrap();
        let res = trace_preimage(&map(core), &DVector::zeros(1), &TraceConfig::default());
        assert!(matches!(res, Err(Error::EscapedBox(_))));
    }

    #[test]
    fn critical_value_is_rejected_as_not_regular() {
        // Preimage of 0 under the norm square is the single critical point.
        let f = map(norm_square_core());
        let res = trace_preimage(&f, &DVector::zeros(1), &TraceConfig::default());
        assert!(matches!(res, Err(Error::NotRegular(_))), "got {res:?}");
    }

    #[test]
    fn capping_disk_interpolates_and_differentiates() {
        let circle = TracedCircle::from_parametric(|t| circle_s0(4, t), 400);
        let cap = CappingDisk::over(&circle).unwrap();
        assert!(cap.center().norm() < 1e-12);
        // Knot interpolation at the rim.
        for i in [0usize, 57, 200, 399] {
            let th = 2.0 * PI * i as f64 / 400.0;
            let rim = cap.point(th.cos(), th.sin());
            assert!((rim - &circle.samples[i]).norm() < 1e-12, "knot {i}");
        }
        // Apex at the center.
        assert!((cap.point(0.0, 0.0) - cap.center()).norm() < 1e-12);
        // Partials match finite differences away from the apex.
        let h = 1e-6;
        for &(x, y) in &[(0.3, 0.2), (-0.5, 0.45), (0.0, -0.7), (0.61, 0.61)] {
            let (dx, dy) = cap.partials(x, y);
            let fx = (cap.point(x + h, y) - cap.point(x - h, y)) / (2.0 * h);
            let fy = (cap.point(x, y + h) - cap.point(x, y - h)) / (2.0 * h);
            assert!((dx - fx).norm() < 1e-6, "d/dx at ({x}, {y})");
            assert!((dy - fy).norm() < 1e-6, "d/dy at ({x}, {y})");
        }
    }

    #[test]
    fn flat_cap_of_the_plane_circle_is_the_unit_disk() {
        let circle = TracedCircle::from_parametric(|t| circle_s0(2, t), 600);
        let cap = CappingDisk::over(&circle).unwrap();
        // The cone over a plane circle centered at its barycenter is the
        // flat disk: point(x, y) is approximately (x, y).
        for &(x, y) in &[(0.5, 0.1), (-0.3, 0.8), (0.0, 0.0)] {
            let p = cap.point(x, y);
            assert!((p[0] - x).abs() < 1e-4 && (p[1] - y).abs() < 1e-4);
        }
        // And its differential family under the norm-square map validates.
        let f = map(norm_square_core());
        let fam = differential_family(&f, &cap.surface()).unwrap();
        fam.validate_derivative(12, 7, 1e-4).unwrap();
    }

    #[test]
    fn traced_circle_feeds_a_cap_directly() {
        let f = map(norm_square_core());
        let out =
            trace_preimage(&f, &DVector::from_row_slice(&[1.0]), &TraceConfig::default())
                .unwrap();
        let cap = CappingDisk::over(&out.circles[0]).unwrap();
        let rim = cap.point(1.0, 0.0);
        assert!((rim.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let circle = TracedCircle::from_parametric(|t| circle_s0(2, t), 8);
        let mut buf = Vec::new();
        write_circle_csv(&circle, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "u1,u2");
        assert_eq!(lines.len(), 9);
        assert!(lines[1].starts_with('1'));
    }
}
