//! The model verification suite: every published value of the model
//! corpus recomputed from scratch and compared, as one pass/fail report.
//!
//! The suite is the toolkit's self-test. It reruns the corpus identities,
//! the intersection parity of the linear pencil over the unit disk, the
//! circle invariants and tau of the three model maps, the orientation
//! coherence transport, and the three homotopy audits. Each check lands in
//! the report with a one-line detail; the suite passes only if every check
//! does.

use crate::audit::{audit_homotopy, AuditConfig};
use crate::error::Result;
use crate::intersection::{eta, EtaConfig};
use crate::invariants::{coherence_sign, tau, CoherenceConfig, SigmaConfig};
use crate::models::{
    coherence_orientations, coherence_path, coherence_stabilizer, collapse_homotopy,
    pencil_family, product_homotopy, sweep_homotopy, verify_corpus, IdentityCheck,
    ModelCorpus,
};
use crate::trace::TraceConfig;
use nalgebra::DVector;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    /// Intersection-count configuration for the pencil check.
    pub eta: EtaConfig,
    /// Circle tracing for the tau computations.
    pub trace: TraceConfig,
    /// Circle-invariant configuration (carries its own inner eta config).
    pub sigma: SigmaConfig,
    pub coherence: CoherenceConfig,
    pub audit: AuditConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            eta: EtaConfig::default(),
            trace: TraceConfig::default(),
            sigma: SigmaConfig::default(),
            // 1000 transport steps so the report's surjectivity margin is
            // sampled densely along the path.
            coherence: CoherenceConfig { steps: 1000, ..CoherenceConfig::default() },
            audit: AuditConfig::default(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<IdentityCheck>,
    pub all_passed: bool,
}

fn push(checks: &mut Vec<IdentityCheck>, name: &str, passed: bool, detail: String) {
    checks.push(IdentityCheck { name: name.to_string(), passed, detail });
}

fn push_err(checks: &mut Vec<IdentityCheck>, name: &str, err: &crate::error::Error) {
    push(checks, name, false, format!("failed to compute: {err}"));
}

/// Index of the circle living in the first coordinate plane (the one whose
/// samples reach large |u1|); the model preimages of the folded map are
/// one circle in coordinates (u1, u2) and one in (u3, u4).
fn first_plane_circle(circles: &[crate::trace::TracedCircle]) -> Option<usize> {
    circles.iter().position(|c| {
        c.samples.iter().map(|s| s[0].abs()).fold(0.0, f64::max) > 0.5
    })
}

/// Recompute every model value and compare. Pure function of the config;
/// all randomness inside is seeded.
pub fn verify_models(cfg: &SuiteConfig) -> SuiteReport {
    verify_models_on(&ModelCorpus::standard(), cfg)
}

/// Same suite against a caller-supplied corpus. Useful as a sensitivity
/// check: perturbing any model map must make the run fail.
pub fn verify_models_on(corpus: &ModelCorpus, cfg: &SuiteConfig) -> SuiteReport {
    let mut checks: Vec<IdentityCheck> = Vec::new();

    // 1. Structural identities of the corpus.
    let identities = verify_corpus(corpus);
    for c in identities.checks {
        push(&mut checks, &format!("corpus/{}", c.name), c.passed, c.detail);
    }

    // 2. Intersection parity of the linear pencil over the unit disk: one
    //    transverse zero at the origin.
    match eta(&pencil_family(), &cfg.eta) {
        Ok(cert) => {
            let one_zero = cert.value == 1 && cert.zeros.len() == 1;
            let (at_origin, transverse) = cert
                .zeros
                .first()
                .map(|z| {
                    let r = (z.location[0].powi(2) + z.location[1].powi(2)).sqrt();
                    (r <= 1e-8, z.transverse)
                })
                .unwrap_or((false, false));
            push(
                &mut checks,
                "eta-pencil-unit-disk",
                one_zero && at_origin && transverse,
                format!(
                    "eta = {}, zeros = {:?}, transverse = {transverse}",
                    cert.value,
                    cert.zeros.iter().map(|z| z.location).collect::<Vec<_>>()
                ),
            );
        }
        Err(e) => push_err(&mut checks, "eta-pencil-unit-disk", &e),
    }

    // 3. Circle invariants and tau of the three model maps.
    match tau(&corpus.f, &DVector::from_element(1, 1.0), &cfg.trace, &cfg.sigma) {
        Ok(res) => {
            let sigma_val = res.sigmas.first().map(|s| s.value);
            push(
                &mut checks,
                "sigma-norm-square-circle",
                res.sigmas.len() == 1 && sigma_val == Some(1),
                format!("sigma = {sigma_val:?} over {} circle(s), want 1", res.sigmas.len()),
            );
            push(&mut checks, "tau-norm-square", res.value == 0, format!("tau = {}, want 0", res.value));
        }
        Err(e) => {
            push_err(&mut checks, "sigma-norm-square-circle", &e);
            push_err(&mut checks, "tau-norm-square", &e);
        }
    }

    let e3 = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
    match tau(&corpus.g, &e3, &cfg.trace, &cfg.sigma) {
        Ok(res) => {
            let sigma_val = res.sigmas.first().map(|s| s.value);
            push(
                &mut checks,
                "sigma-hopf-fiber",
                res.sigmas.len() == 1 && sigma_val == Some(0),
                format!("sigma = {sigma_val:?} over {} circle(s), want 0", res.sigmas.len()),
            );
            push(&mut checks, "tau-hopf", res.value == 1, format!("tau = {}, want 1", res.value));
        }
        Err(e) => {
            push_err(&mut checks, "sigma-hopf-fiber", &e);
            push_err(&mut checks, "tau-hopf", &e);
        }
    }

    match tau(&corpus.h, &e3, &cfg.trace, &cfg.sigma) {
        Ok(res) => {
            let i0 = first_plane_circle(&res.trace.circles);
            let two = res.sigmas.len() == 2 && i0.is_some();
            let (s0, s1) = match i0 {
                Some(i0) if two => (Some(res.sigmas[i0].value), Some(res.sigmas[1 - i0].value)),
                _ => (None, None),
            };
            push(
                &mut checks,
                "sigma-folded-hopf-s0",
                s0 == Some(0),
                format!("sigma = {s0:?} on the (u1,u2)-plane circle, want 0"),
            );
            push(
                &mut checks,
                "sigma-folded-hopf-s1",
                s1 == Some(0),
                format!("sigma = {s1:?} on the (u3,u4)-plane circle, want 0"),
            );
            push(&mut checks, "tau-folded-hopf", res.value == 0, format!("tau = {}, want 0", res.value));
        }
        Err(e) => {
            push_err(&mut checks, "sigma-folded-hopf-s0", &e);
            push_err(&mut checks, "sigma-folded-hopf-s1", &e);
            push_err(&mut checks, "tau-folded-hopf", &e);
        }
    }

    // 4. Orientation coherence along the model operator path.
    let (orient_start, orient_end) = coherence_orientations();
    match coherence_sign(
        &coherence_path(),
        &coherence_stabilizer,
        &orient_start,
        &orient_end,
        &cfg.coherence,
    ) {
        Ok(res) => {
            push(
                &mut checks,
                "coherence-sign",
                res.sign == 1,
                format!("sign = {:+}, want +1 (doubling consistent: {})", res.sign, res.doubling_consistent),
            );
            push(
                &mut checks,
                "coherence-stabilized-margin",
                res.min_surjectivity > 0.1,
                format!(
                    "min surjectivity {:.3e} over {} samples, want > 0.1",
                    res.min_surjectivity, res.steps
                ),
            );
        }
        Err(e) => {
            push_err(&mut checks, "coherence-sign", &e);
            push_err(&mut checks, "coherence-stabilized-margin", &e);
        }
    }

    // 5. Homotopy audits: quiet product, one fold in the collapse, one
    //    degenerate circle in the sweep; fold characterizations agree at
    //    every checked point.
    match audit_homotopy(&product_homotopy(), &cfg.audit) {
        Ok(r) => {
            let pass = r.isolated_folds.is_empty()
                && r.critical_circles.is_empty()
                && r.boundary_circles == (1, 1)
                && r.topology_changes.is_empty()
                && r.parity_match
                && r.regular_times_consistent
                && r.characterization_agreement;
            push(
                &mut checks,
                "audit-product",
                pass,
                format!(
                    "folds = {}, boundary = {:?}, parity = {}",
                    r.isolated_folds.len(),
                    r.boundary_circles,
                    r.parity_match
                ),
            );
        }
        Err(e) => push_err(&mut checks, "audit-product", &e),
    }

    match audit_homotopy(&collapse_homotopy(), &cfg.audit) {
        Ok(r) => {
            let fold_at_half =
                r.isolated_folds.len() == 1 && (r.isolated_folds[0].t - 0.5).abs() < 1e-3;
            let pass = fold_at_half
                && r.boundary_circles == (1, 0)
                && r.parity_match
                && r.changes_all_matched
                && r.characterization_agreement;
            push(
                &mut checks,
                "audit-collapse",
                pass,
                format!(
                    "folds at t = {:?}, boundary = {:?}, parity = {}",
                    r.isolated_folds.iter().map(|f| f.t).collect::<Vec<_>>(),
                    r.boundary_circles,
                    r.parity_match
                ),
            );
        }
        Err(e) => push_err(&mut checks, "audit-collapse", &e),
    }

    match audit_homotopy(&sweep_homotopy(), &cfg.audit) {
        Ok(r) => {
            let pass = r.isolated_folds.len() % 2 == 0
                && r.parity_match
                && r.critical_circles.len() == 1
                && (r.critical_circles[0].t - 0.5).abs() < 1e-3
                && r.changes_all_matched
                && r.characterization_agreement;
            push(
                &mut checks,
                "audit-sweep",
                pass,
                format!(
                    "folds = {}, critical circles at t = {:?}, parity = {}",
                    r.isolated_folds.len(),
                    r.critical_circles.iter().map(|c| c.t).collect::<Vec<_>>(),
                    r.parity_match
                ),
            );
        }
        Err(e) => push_err(&mut checks, "audit-sweep", &e),
    }

    let all_passed = checks.iter().all(|c| c.passed);
    SuiteReport { checks, all_passed }
}

/// `verify_models` with defaults, as a Result for callers that only care
/// about pass/fail.
pub fn verify_models_default() -> Result<SuiteReport> {
    Ok(verify_models(&SuiteConfig::default()))
}
