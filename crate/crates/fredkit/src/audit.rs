//! Homotopy audits: certify how the preimage circles of a time-dependent
//! family are created, merged, and destroyed.
//!
//! For a homotopy K(t, u) = P(u) - c(t) the audit cross-examines two
//! independent views of the same geometry:
//!
//! * a *slice sweep* traces the preimage circles of every time slice and
//!   locates the times where the circle count changes (bisected to a
//!   configurable tolerance), and
//! * a *critical search* solves the bordered square system
//!   `[K; (d_u K)^T lambda; <lambda, d_t K> - 1] = 0`, whose solutions are
//!   exactly the fold-type critical points of the time function on the
//!   solution set, with `lambda` the left null direction of the spatial
//!   Jacobian normalized against the time velocity.
//!
//! The two views must agree: every count change sits at a critical event,
//! the fold parity matches the boundary-circle parity, and counts are
//! locally constant at regular times. Degenerate (non-isolated) critical
//! loci are traced as closed circles and reported separately — they move
//! the count by an even amount and stay out of the parity.

use crate::continuation::{newton_correct, trace_closed_curve, CurveTraceConfig};
use crate::error::{Error, Result};
use crate::linalg::{full_svd, singular_values};
use crate::maps::{BlockShiftMap, HomotopyRecord};
use crate::trace::{trace_preimage, TraceConfig, TraceOutcome};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct AuditConfig {
    /// Number of sweep slices (placed at j / (slices - 1)).
    pub slices: usize,
    /// Seed-grid resolution for per-slice circle tracing.
    pub seeds_per_axis: usize,
    /// Slice samples whose spatial Jacobian has a singular value below this
    /// become seeds for the critical search.
    pub fold_sigma_threshold: f64,
    pub fold_newton_tol: f64,
    pub fold_newton_iters: usize,
    /// Solutions of the bordered system closer than this in (t, u) merge.
    pub fold_merge_tol: f64,
    /// Bordered-Jacobian singular value below which a solution is treated
    /// as part of a degenerate (circle) locus rather than an isolated fold.
    pub degenerate_tol: f64,
    /// Width to which count-change times are bisected.
    pub bisect_tol: f64,
    /// Number of random regular times at which local count constancy is
    /// verified.
    pub regular_checks: usize,
    pub rng_seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            slices: 64,
            seeds_per_axis: 9,
            fold_sigma_threshold: 1.0,
            fold_newton_tol: 1e-9,
            fold_newton_iters: 80,
            fold_merge_tol: 1e-4,
            degenerate_tol: 1e-4,
            bisect_tol: 1e-3,
            regular_checks: 6,
            rng_seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceCount {
    pub t: f64,
    /// None when the slice failed to trace (a regular-value failure, which
    /// only happens against a critical event).
    pub circles: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldPoint {
    pub t: f64,
    pub u: Vec<f64>,
    /// Left null direction of the spatial Jacobian, normalized so that
    /// <lambda, d_t K> = 1.
    pub lambda: Vec<f64>,
    /// Smallest singular value of the bordered Jacobian — the margin by
    /// which the fold is nondegenerate.
    pub bordered_sigma_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalCircle {
    /// Mean time along the circle.
    pub t: f64,
    /// Largest deviation of the circle's time coordinate from the mean.
    pub t_spread: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologyChange {
    /// Bisected change time.
    pub t: f64,
    pub count_before: usize,
    pub count_after: usize,
    /// A critical event (fold or circle) lies within twice the bisection
    /// tolerance.
    pub matched_event: bool,
}

#[derive(Debug, Serialize)]
pub struct AuditReport {
    pub slice_counts: Vec<SliceCount>,
    /// Circle counts of the two boundary slices.
    pub boundary_circles: (usize, usize),
    pub isolated_folds: Vec<FoldPoint>,
    pub critical_circles: Vec<CriticalCircle>,
    pub topology_changes: Vec<TopologyChange>,
    /// Isolated-fold parity equals boundary-circle parity (degenerate
    /// circles move counts evenly and do not enter).
    pub parity_match: bool,
    /// All topology changes matched a critical event.
    pub changes_all_matched: bool,
    /// Counts were locally constant at every sampled regular time.
    pub regular_times_consistent: bool,
    /// Points where "spatial rank drop iff time-tangent surface kernel"
    /// was evaluated: every detected critical point plus one sample per
    /// regular probe.
    pub characterization_checks: usize,
    /// The two characterizations agreed at every checked point.
    pub characterization_agreement: bool,
    pub warnings: Vec<String>,
}

fn slice_trace_config(cfg: &AuditConfig) -> TraceConfig {
    TraceConfig {
        seeds_per_axis: cfg.seeds_per_axis,
        dedup_distance: 2e-2,
        ..TraceConfig::default()
    }
}

fn count_slice(record: &HomotopyRecord, t: f64, cfg: &AuditConfig) -> Result<TraceOutcome> {
    let m = BlockShiftMap::new(record.slice_core(t))?;
    trace_preimage(&m, &DVector::zeros(record.q()), &slice_trace_config(cfg))
}

// ---------------------------------------------------------------------------
// Bordered critical system
// ---------------------------------------------------------------------------

fn bordered_value(record: &HomotopyRecord, x: &DVector<f64>) -> DVector<f64> {
    let (p, q) = (record.p(), record.q());
    let t = x[0];
    let u = x.rows(1, p).into_owned();
    let lambda = x.rows(1 + p, q).into_owned();
    let mut out = DVector::zeros(q + p + 1);
    out.rows_mut(0, q).copy_from(&record.value(t, &u));
    out.rows_mut(q, p)
        .copy_from(&(record.spatial_jacobian(&u).transpose() * &lambda));
    out[q + p] = lambda.dot(&record.dt(t)) - 1.0;
    out
}

fn bordered_jacobian(record: &HomotopyRecord, x: &DVector<f64>) -> DMatrix<f64> {
    let (p, q) = (record.p(), record.q());
    let t = x[0];
    let u = x.rows(1, p).into_owned();
    let lambda = x.rows(1 + p, q).into_owned();
    let n = q + p + 1;
    let mut j = DMatrix::zeros(n, n);
    let jp = record.spatial_jacobian(&u);
    // K rows: d/dt = -c'(t), d/du = J_P, d/dlambda = 0.
    let dt = record.dt(t);
    for i in 0..q {
        j[(i, 0)] = dt[i];
    }
    j.view_mut((0, 1), (q, p)).copy_from(&jp);
    // (J_P^T lambda) rows: d/du is the lambda-weighted Hessian, d/dlambda
    // is J_P^T.
    let h = record.spatial.hessian_weighted(&lambda, &u);
    j.view_mut((q, 1), (p, p)).copy_from(&h);
    j.view_mut((q, 1 + p), (p, q)).copy_from(&jp.transpose());
    // Normalization row: d/dt = <lambda, -c''(t)>, d/dlambda = (-c'(t))^T.
    j[(q + p, 0)] = lambda.dot(&(-record.shift.second_deriv(t)));
    for i in 0..q {
        j[(q + p, 1 + p + i)] = dt[i];
    }
    j
}

/// Evaluate the two characterizations of a time-critical point at (t, u):
/// whether the spatial Jacobian drops rank, and whether the solution
/// surface's tangent plane (the kernel of the full Jacobian) lies inside
/// the time slice. On a regular solution surface the two are equivalent —
/// the fold normalization <lambda, d_t K> = 1 is exactly the statement
/// that the time velocity leaves the spatial range, which forces every
/// surface tangent to have zero time component.
pub fn fold_characterizations(
    record: &HomotopyRecord,
    t: f64,
    u: &DVector<f64>,
) -> (bool, bool) {
    let q = record.q();
    let jp_sigma = singular_values(&record.spatial_jacobian(u));
    let corank_one = jp_sigma[q - 1] < 1e-6 * jp_sigma[0].max(1.0);
    let full = record.full_jacobian(t, u);
    let svd = full_svd(&full);
    let time_tangent = (q..full.ncols()).all(|i| svd.v.column(i)[0].abs() < 1e-6);
    (corank_one, time_tangent)
}

/// Turn a slice sample into a bordered-system seed: pair it with the left
/// singular direction of the smallest spatial singular value, normalized
/// against the time velocity. None when the velocity is orthogonal to that
/// direction (no fold can satisfy the normalization there).
fn bordered_seed(record: &HomotopyRecord, t: f64, u: &DVector<f64>) -> Option<DVector<f64>> {
    let (p, q) = (record.p(), record.q());
    let svd = full_svd(&record.spatial_jacobian(u));
    let w = svd.u.column(q - 1).into_owned();
    let denom = w.dot(&record.dt(t));
    if denom.abs() < 1e-6 {
        return None;
    }
    let mut x = DVector::zeros(1 + p + q);
    x[0] = t;
    x.rows_mut(1, p).copy_from(u);
    x.rows_mut(1 + p, q).copy_from(&(w / denom));
    Some(x)
}

/// Collect seeds for the critical search from traced slice circles: any
/// sample whose spatial Jacobian is within the threshold of rank drop.
/// This catches critical points that leave the circle count unchanged; the
/// ones that do change it get dedicated frontier seeds after bisection.
fn threshold_seeds(
    record: &HomotopyRecord,
    slices: &[(f64, Option<TraceOutcome>)],
    cfg: &AuditConfig,
) -> Vec<DVector<f64>> {
    let q = record.q();
    let mut seeds = Vec::new();
    for (t, outcome) in slices {
        let Some(out) = outcome else { continue };
        for circle in &out.circles {
            for u in circle.samples.iter().step_by(10) {
                if singular_values(&record.spatial_jacobian(u))[q - 1]
                    < cfg.fold_sigma_threshold
                {
                    seeds.extend(bordered_seed(record, *t, u));
                }
            }
        }
    }
    seeds
}

/// Seeds from a bisection-frontier slice: the sample of each circle where
/// the spatial Jacobian is closest to rank drop, plus three more a quarter
/// circle apart (a degenerate locus keeps the whole circle near-critical,
/// so spreading the seeds makes the later circle trace independent of
/// which one converges first).
fn frontier_seeds(
    record: &HomotopyRecord,
    t: f64,
    out: &TraceOutcome,
    seeds: &mut Vec<DVector<f64>>,
) {
    let q = record.q();
    for circle in &out.circles {
        let n = circle.samples.len();
        let best = (0..n)
            .min_by(|&a, &b| {
                let sa = singular_values(&record.spatial_jacobian(&circle.samples[a]))[q - 1];
                let sb = singular_values(&record.spatial_jacobian(&circle.samples[b]))[q - 1];
                sa.partial_cmp(&sb).unwrap()
            })
            .unwrap_or(0);
        for offset in [0, n / 4, n / 2, 3 * n / 4] {
            seeds.extend(bordered_seed(record, t, &circle.samples[(best + offset) % n]));
        }
    }
}

// ---------------------------------------------------------------------------
// The audit
// ---------------------------------------------------------------------------

/// Run the full audit of a homotopy record. See the module docs for the
/// two-view methodology.
pub fn audit_homotopy(record: &HomotopyRecord, cfg: &AuditConfig) -> Result<AuditReport> {
    if record.p() != record.q() + 1 {
        return Err(Error::InvalidInput(format!(
            "audit expects an index-one spatial core, got ({}, {})",
            record.p(),
            record.q()
        )));
    }
    let n_slices = cfg.slices.max(2);
    let mut warnings: Vec<String> = Vec::new();

    // 1. Slice sweep.
    let mut slices: Vec<(f64, Option<TraceOutcome>)> = Vec::with_capacity(n_slices);
    let mut slice_counts: Vec<SliceCount> = Vec::with_capacity(n_slices);
    for j in 0..n_slices {
        let t = j as f64 / (n_slices - 1) as f64;
        match count_slice(record, t, cfg) {
            Ok(out) => {
                for w in &out.warnings {
                    if w.contains("first 4") && !warnings.iter().any(|x| x == w) {
                        warnings.push(w.clone());
                    }
                }
                slice_counts.push(SliceCount { t, circles: Some(out.circles.len()), note: None });
                slices.push((t, Some(out)));
            }
            Err(e @ (Error::NotRegular(_) | Error::NoConvergence { .. })) => {
                slice_counts.push(SliceCount { t, circles: None, note: Some(e.to_string()) });
                slices.push((t, None));
            }
            Err(e) => return Err(e),
        }
    }
    let boundary = match (slice_counts[0].circles, slice_counts[n_slices - 1].circles) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::NotRegularValue(
                "a boundary slice of the homotopy failed to trace; zero is not regular there"
                    .into(),
            ))
        }
    };

    // 2. Bisect every slice-count change, remembering the last regular
    //    slice reached on each side (the frontier) for seeding.
    struct PendingChange {
        t_change: f64,
        c_lo: usize,
        c_hi: usize,
        lo_ok_t: f64,
        hi_ok_t: f64,
    }
    let known: Vec<(f64, usize)> = slice_counts
        .iter()
        .filter_map(|s| s.circles.map(|c| (s.t, c)))
        .collect();
    let mut pending: Vec<PendingChange> = Vec::new();
    for w in known.windows(2) {
        let ((t_lo, c_lo), (t_hi, c_hi)) = (w[0], w[1]);
        if c_lo == c_hi {
            // Equal counts across a failed slice still hide an event; it
            // sits at the failure, which count bisection cannot see.
            for s in &slice_counts {
                if s.t > t_lo && s.t < t_hi && s.circles.is_none() {
                    pending.push(PendingChange {
                        t_change: s.t,
                        c_lo,
                        c_hi,
                        lo_ok_t: t_lo,
                        hi_ok_t: t_hi,
                    });
                }
            }
            continue;
        }
        let (mut lo, mut hi) = (t_lo, t_hi);
        let (mut lo_ok_t, mut hi_ok_t) = (t_lo, t_hi);
        while hi - lo > cfg.bisect_tol {
            let mid = 0.5 * (lo + hi);
            match count_slice(record, mid, cfg) {
                Ok(out) => {
                    if out.circles.len() == c_lo {
                        lo = mid;
                        lo_ok_t = mid;
                    } else {
                        hi = mid;
                        hi_ok_t = mid;
                    }
                }
                Err(Error::NotRegular(_) | Error::NoConvergence { .. }) => {
                    // The slice itself is critical: the event is here.
                    lo = mid;
                    hi = mid;
                }
                Err(e) => return Err(e),
            }
            if hi == lo {
                break;
            }
        }
        pending.push(PendingChange {
            t_change: 0.5 * (lo + hi),
            c_lo,
            c_hi,
            lo_ok_t,
            hi_ok_t,
        });
    }

    // 3. Critical search on the bordered system, seeded from near-rank-drop
    //    slice samples plus the bisection frontiers.
    let value = |x: &DVector<f64>| bordered_value(record, x);
    let jac = |x: &DVector<f64>| bordered_jacobian(record, x);
    let mut seeds = threshold_seeds(record, &slices, cfg);
    for change in &pending {
        // Seed right against the event (one bisection width away), falling
        // back to the last slices the bisection itself verified.
        let mut times = vec![
            (change.t_change - cfg.bisect_tol).max(0.0),
            (change.t_change + cfg.bisect_tol).min(1.0),
            change.lo_ok_t,
            change.hi_ok_t,
        ];
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for t in times {
            if let Ok(out) = count_slice(record, t, cfg) {
                frontier_seeds(record, t, &out, &mut seeds);
            }
        }
    }
    let mut solutions: Vec<DVector<f64>> = Vec::new();
    for seed in seeds {
        let Ok(x) = newton_correct(&value, &jac, &seed, cfg.fold_newton_tol, cfg.fold_newton_iters)
        else {
            continue;
        };
        if !(-1e-9..=1.0 + 1e-9).contains(&x[0]) {
            continue;
        }
        let tu = |y: &DVector<f64>| y.rows(0, 1 + record.p()).into_owned();
        if solutions.iter().any(|s| (tu(s) - tu(&x)).norm() < cfg.fold_merge_tol) {
            continue;
        }
        solutions.push(x);
    }

    // 3. Separate isolated folds from degenerate circle loci.
    let (p, q) = (record.p(), record.q());
    let mut isolated_folds: Vec<FoldPoint> = Vec::new();
    let mut critical_circles: Vec<CriticalCircle> = Vec::new();
    let mut absorbed: Vec<bool> = vec![false; solutions.len()];
    let mut characterization_checks = 0usize;
    let mut characterization_agreement = true;
    let mut check_point = |t: f64, u: &DVector<f64>, expect_critical: bool| {
        let (corank_one, time_tangent) = fold_characterizations(record, t, u);
        characterization_checks += 1;
        if corank_one != time_tangent || corank_one != expect_critical {
            characterization_agreement = false;
        }
    };
    for i in 0..solutions.len() {
        if absorbed[i] {
            continue;
        }
        let x = &solutions[i];
        let s = singular_values(&jac(x));
        let sigma_min = s.last().copied().unwrap_or(0.0);
        if sigma_min > cfg.degenerate_tol {
            check_point(x[0], &x.rows(1, p).into_owned(), true);
            isolated_folds.push(FoldPoint {
                t: x[0],
                u: x.rows(1, p).iter().copied().collect(),
                lambda: x.rows(1 + p, q).iter().copied().collect(),
                bordered_sigma_min: sigma_min,
            });
            continue;
        }
        // Degenerate: the solution set continues; it must close into a
        // circle of critical points.
        let curve = trace_closed_curve(
            &value,
            &jac,
            x,
            &CurveTraceConfig { corrector_tol: cfg.fold_newton_tol, ..Default::default() },
        )?;
        if !curve.closed {
            return Err(Error::NotRegularValue(
                "degenerate critical locus did not close into a circle".into(),
            ));
        }
        let ts: Vec<f64> = curve.samples.iter().map(|s| s[0]).collect();
        let t_mean = ts.iter().sum::<f64>() / ts.len() as f64;
        let t_spread = ts.iter().map(|t| (t - t_mean).abs()).fold(0.0, f64::max);
        for s in curve.samples.iter().step_by(20) {
            check_point(s[0], &s.rows(1, p).into_owned(), true);
        }
        // Absorb the other solutions lying on this circle.
        for (j, other) in solutions.iter().enumerate() {
            if j != i
                && curve
                    .samples
                    .iter()
                    .any(|s| (s.rows(0, 1 + p) - other.rows(0, 1 + p)).norm() < 5e-2)
            {
                absorbed[j] = true;
            }
        }
        critical_circles.push(CriticalCircle {
            t: t_mean,
            t_spread,
            samples: curve.samples.len(),
        });
    }
    isolated_folds.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    critical_circles.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());

    // 4. Match each bisected change to a critical event.
    let event_times: Vec<(f64, f64)> = isolated_folds
        .iter()
        .map(|f| (f.t, 0.0))
        .chain(critical_circles.iter().map(|c| (c.t, c.t_spread)))
        .collect();
    let topology_changes: Vec<TopologyChange> = pending
        .iter()
        .map(|change| TopologyChange {
            t: change.t_change,
            count_before: change.c_lo,
            count_after: change.c_hi,
            matched_event: event_times.iter().any(|(t_e, spread)| {
                (t_e - change.t_change).abs() <= 2.0 * cfg.bisect_tol + spread
            }),
        })
        .collect();
    let changes_all_matched = topology_changes.iter().all(|c| c.matched_event);

    // 5. Local constancy of the count at random regular times.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut regular_times_consistent = true;
    let mut checked = 0usize;
    let mut tries = 0usize;
    while checked < cfg.regular_checks && tries < 50 * cfg.regular_checks.max(1) {
        tries += 1;
        let t: f64 = rng.gen_range(0.02..0.98);
        let near_event = event_times
            .iter()
            .map(|(te, sp)| (te, sp))
            .any(|(te, sp)| (te - t).abs() < 5.0 * cfg.bisect_tol + sp)
            || topology_changes.iter().any(|c| (c.t - t).abs() < 5.0 * cfg.bisect_tol);
        if near_event {
            continue;
        }
        checked += 1;
        let h = 2.0 * cfg.bisect_tol;
        let outcomes: Vec<Option<TraceOutcome>> = [t - h, t, t + h]
            .iter()
            .map(|&s| count_slice(record, s, cfg).ok())
            .collect();
        let counts: Vec<Option<usize>> =
            outcomes.iter().map(|o| o.as_ref().map(|o| o.circles.len())).collect();
        let ok = matches!(
            (counts[0], counts[1], counts[2]),
            (Some(a), Some(b), Some(c)) if a == b && b == c
        );
        if !ok {
            regular_times_consistent = false;
            warnings.push(format!(
                "circle count not locally constant at regular time {t:.4}: {counts:?}"
            ));
        }
        // At a regular time, both fold characterizations must be negative.
        if let Some(Some(out)) = outcomes.get(1) {
            if let Some(circle) = out.circles.first() {
                check_point(t, &circle.samples[0], false);
            }
        }
    }

    let parity_match =
        isolated_folds.len() % 2 == (boundary.0 + boundary.1) % 2;
    Ok(AuditReport {
        slice_counts,
        boundary_circles: boundary,
        isolated_folds,
        critical_circles,
        topology_changes,
        parity_match,
        changes_all_matched,
        regular_times_consistent,
        characterization_checks,
        characterization_agreement,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{collapse_homotopy, product_homotopy, sweep_homotopy};

    #[test]
    fn bordered_jacobian_matches_finite_differences() {
        let k = collapse_homotopy();
        let x = DVector::from_row_slice(&[0.4, 0.3, -0.2, 0.7, 0.1][..4]);
        // x = (t, u1, u2, lambda) for the collapse record (p = 2, q = 1).
        let j = bordered_jacobian(&k, &x);
        let h = 1e-6;
        for col in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += h;
            xm[col] -= h;
            let fd = (bordered_value(&k, &xp) - bordered_value(&k, &xm)) / (2.0 * h);
            assert!((j.column(col) - fd).norm() < 1e-6, "column {col}");
        }
    }

    #[test]
    fn product_homotopy_audit_is_quiet() {
        let report = audit_homotopy(&product_homotopy(), &AuditConfig::default()).unwrap();
        assert_eq!(report.boundary_circles, (1, 1));
        assert!(report.isolated_folds.is_empty());
        assert!(report.critical_circles.is_empty());
        assert!(report.topology_changes.is_empty());
        assert!(report.parity_match);
        assert!(report.regular_times_consistent);
        // Regular probes exercise the fold characterizations negatively.
        assert!(report.characterization_checks >= 6);
        assert!(report.characterization_agreement);
    }

    #[test]
    fn collapse_homotopy_audit_finds_the_single_fold() {
        let report = audit_homotopy(&collapse_homotopy(), &AuditConfig::default()).unwrap();
        assert_eq!(report.boundary_circles, (1, 0));
        assert_eq!(report.isolated_folds.len(), 1, "folds: {:?}", report.isolated_folds);
        let fold = &report.isolated_folds[0];
        assert!((fold.t - 0.5).abs() < 1e-7, "fold time {}", fold.t);
        assert!(fold.u.iter().all(|x| x.abs() < 1e-6));
        // lambda = -1 / chi'(1/2) with chi'(1/2) = -7.5.
        assert!((fold.lambda[0] - 2.0 / 15.0).abs() < 1e-7, "lambda {:?}", fold.lambda);
        assert!(report.critical_circles.is_empty());
        assert_eq!(report.topology_changes.len(), 1);
        let change = &report.topology_changes[0];
        assert!((change.t - 0.5).abs() < 2e-3);
        assert_eq!((change.count_before, change.count_after), (1, 0));
        assert!(change.matched_event);
        assert!(report.parity_match);
        assert!(report.regular_times_consistent);
        assert!(report.characterization_agreement);
    }

    #[test]
    fn sweep_homotopy_audit_finds_the_critical_circle() {
        let report = audit_homotopy(&sweep_homotopy(), &AuditConfig::default()).unwrap();
        assert_eq!(report.boundary_circles, (2, 0));
        assert!(report.isolated_folds.is_empty(), "folds: {:?}", report.isolated_folds);
        assert_eq!(report.critical_circles.len(), 1, "{:?}", report.critical_circles);
        let circle = &report.critical_circles[0];
        assert!((circle.t - 0.5).abs() < 1e-6, "circle time {}", circle.t);
        assert!(circle.t_spread < 1e-8);
        assert!(circle.samples > 100);
        assert!(report.changes_all_matched);
        assert!(report.parity_match);
        assert!(report.regular_times_consistent);
        // The circle contributes a positive characterization check every
        // twenty samples.
        assert!(report.characterization_checks > 10);
        assert!(report.characterization_agreement);
    }
}
