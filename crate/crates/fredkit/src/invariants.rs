//! The circle invariants: sigma (framing parity of one circle), tau
//! (parity of unframed circles in a preimage), and the coherence sign of a
//! stabilized kernel transport along an operator path.
//!
//! sigma of a circle with framing map m is the mod-2 count of intersections
//! of dm, restricted to a disk capping the circle, with the corank-one
//! stratum. The cap itself is auxiliary — any two caps differ by a sphere,
//! whose intersection parity vanishes — so the implementation walks a
//! deterministic chain of caps (barycenter cone, nudged cones, then a
//! boundary-fixing random perturbation) until one resolves numerically,
//! and records every refusal along the way.

use crate::error::{Error, Result};
use crate::intersection::{
    eta, eta_rel_boundary_perturbed, EtaCertificate, EtaConfig, OperatorFamily,
    PerturbationReport,
};
use crate::linalg::full_svd;
use crate::maps::{differential_family, BlockShiftMap};
use crate::operator::{stack_columns, OperatorPath};
use crate::trace::{trace_preimage, CappingDisk, TraceConfig, TracedCircle, TraceOutcome};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

// ---------------------------------------------------------------------------
// sigma
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SigmaConfig {
    pub eta: EtaConfig,
    /// Offset of the nudged cone apexes from the barycenter.
    pub nudge_delta: f64,
    /// Size of the boundary-fixing perturbation in the final fallback.
    /// The parity is exact for every size (the straight-line homotopy to
    /// the unperturbed family fixes the boundary), so this only has to be
    /// large enough that the subdivision can separate the perturbed zeros:
    /// a family that is singular along a curve keeps the count landscape
    /// flat to within epsilon around that curve.
    pub perturb_epsilon: f64,
    /// Independent seeds whose perturbed parities must agree.
    pub perturb_seeds: Vec<u64>,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig {
            eta: EtaConfig::default(),
            nudge_delta: 0.25,
            perturb_epsilon: 0.1,
            perturb_seeds: vec![101, 202, 303],
        }
    }
}

/// One cap that was tried and refused, with the refusal it produced.
#[derive(Debug, Clone, Serialize)]
pub struct CapAttempt {
    pub cap: String,
    pub outcome: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaResult {
    /// The framing parity in Z/2.
    pub value: u8,
    /// Description of the cap that finally resolved.
    pub cap_used: String,
    /// True when the boundary-fixing perturbation fallback decided the
    /// value. The parity is still exact — the perturbation is linearly
    /// homotopic to the original family rel boundary — but the unperturbed
    /// family itself was not resolvable, which this flag discloses.
    pub perturbed: bool,
    /// Caps that were tried and refused before the successful one.
    pub attempts: Vec<CapAttempt>,
    pub certificate: EtaCertificate,
    pub perturbation: Option<PerturbationReport>,
}

/// Intersection parity of a capped family directly (bring your own cap).
pub fn sigma_of_family(family: &OperatorFamily, cfg: &EtaConfig) -> Result<EtaCertificate> {
    eta(family, cfg)
}

fn is_cap_retryable(e: &Error) -> bool {
    matches!(e, Error::CorankTooHigh { .. } | Error::NonIsolatedZeros(_))
}

/// sigma of `circle` with the framing induced by `framing`'s differential.
///
/// Caps are tried in a fixed order: the cone from the barycenter, then
/// cones nudged by +/- delta along each coordinate axis, then the
/// barycenter cone with a boundary-fixing perturbation. A cap is abandoned
/// only for the two refusals that signal a genuinely bad cap position
/// (meeting a deeper stratum, or a non-isolated intersection set); any
/// other failure is a property of the circle itself and aborts.
pub fn sigma(
    circle: &TracedCircle,
    framing: &BlockShiftMap,
    cfg: &SigmaConfig,
) -> Result<SigmaResult> {
    if circle.ambient_dim() != framing.p() {
        return Err(Error::ShapeError(format!(
            "circle lives in dimension {}, framing map has core dimension {}",
            circle.ambient_dim(),
            framing.p()
        )));
    }
    let p = framing.p();
    let barycenter = circle.barycenter();

    let mut caps: Vec<(String, DVector<f64>)> =
        vec![("barycenter cone".to_string(), barycenter.clone())];
    for i in 0..p {
        for sign in [1.0, -1.0] {
            let mut c = barycenter.clone();
            c[i] += sign * cfg.nudge_delta;
            caps.push((
                format!(
                    "cone nudged by {}{:.3} e{}",
                    if sign > 0.0 { "+" } else { "-" },
                    cfg.nudge_delta,
                    i + 1
                ),
                c,
            ));
        }
    }

    let mut attempts: Vec<CapAttempt> = Vec::new();
    for (name, center) in &caps {
        let cap = CappingDisk::with_center(circle, center.clone())?;
        let family = differential_family(framing, &cap.surface())?;
        match eta(&family, &cfg.eta) {
            Ok(cert) => {
                return Ok(SigmaResult {
                    value: cert.value,
                    cap_used: name.clone(),
                    perturbed: false,
                    attempts,
                    certificate: cert,
                    perturbation: None,
                });
            }
            Err(e) if is_cap_retryable(&e) => {
                attempts.push(CapAttempt { cap: name.clone(), outcome: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }

    // Every cap position meets the deeper strata: the intersection
    // configuration is not resolvable unperturbed. Fall back to a
    // boundary-fixing perturbation of the barycenter cone; the linear
    // homotopy to the unperturbed family fixes the boundary, so the parity
    // is the same for any epsilon, and seed agreement guards the numerics.
    let cap = CappingDisk::over(circle)?;
    let family = differential_family(framing, &cap.surface())?;
    let (cert, report) =
        eta_rel_boundary_perturbed(&family, &cfg.eta, cfg.perturb_epsilon, &cfg.perturb_seeds)?;
    Ok(SigmaResult {
        value: cert.value,
        cap_used: format!(
            "barycenter cone perturbed rel boundary (epsilon {:.1e}, {} seeds)",
            cfg.perturb_epsilon,
            cfg.perturb_seeds.len()
        ),
        perturbed: true,
        attempts,
        certificate: cert,
        perturbation: Some(report),
    })
}

// ---------------------------------------------------------------------------
// tau
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct TauResult {
    /// Parity of the number of sigma = 0 circles in the preimage.
    pub value: u8,
    pub trace: TraceOutcome,
    /// sigma of each circle, in the trace's (deterministic) circle order.
    pub sigmas: Vec<SigmaResult>,
}

/// tau of a map at a regular target value: trace the preimage circles and
/// count those whose own differential gives them framing parity zero.
pub fn tau(
    map: &BlockShiftMap,
    target: &DVector<f64>,
    trace_cfg: &TraceConfig,
    sigma_cfg: &SigmaConfig,
) -> Result<TauResult> {
    let trace = trace_preimage(map, target, trace_cfg)?;
    let mut sigmas = Vec::with_capacity(trace.circles.len());
    for circle in &trace.circles {
        sigmas.push(sigma(circle, map, sigma_cfg)?);
    }
    let zero_count = sigmas.iter().filter(|s| s.value == 0).count();
    Ok(TauResult { value: (zero_count % 2) as u8, trace, sigmas })
}

// ---------------------------------------------------------------------------
// Coherence sign
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceConfig {
    /// Transport steps from t0 to t1 (the doubling check reruns with twice
    /// as many).
    pub steps: usize,
    /// Smallest singular value of the frame overlap K^T Q below which the
    /// transport is declared collapsed.
    pub collapse_tol: f64,
    /// Required surjectivity margin of the stabilized block along the path.
    pub min_surjectivity: f64,
    /// Endpoint consistency tolerance (stabilizer vanishing, orientations
    /// in the kernels).
    pub endpoint_tol: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            steps: 256,
            collapse_tol: 0.1,
            min_surjectivity: 1e-6,
            endpoint_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceResult {
    /// +1 if the transported start frame matches the end frame's
    /// orientation, -1 if it reverses it.
    pub sign: i8,
    /// Worst surjectivity margin of [G | B] along the path.
    pub min_surjectivity: f64,
    /// Worst frame-overlap singular value during transport.
    pub min_overlap: f64,
    pub steps: usize,
    /// The sign was re-derived at twice the step count and agreed.
    pub doubling_consistent: bool,
}

fn embed_with_stabilizer_slots(v: &DVector<f64>, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(k + v.len());
    for i in 0..v.len() {
        e[k + i] = v[i];
    }
    e
}

/// One transport pass at a fixed step count. Returns (sign, min surj,
/// min overlap).
fn transport_once(
    path: &OperatorPath,
    stabilizer: &dyn Fn(f64) -> DMatrix<f64>,
    orient_start: &DVector<f64>,
    orient_end: &DVector<f64>,
    steps: usize,
    cfg: &CoherenceConfig,
) -> Result<(i8, f64, f64)> {
    let k = stabilizer(path.t0).ncols();
    let kernel_dim = k + (path.p - path.q);
    let mut frame = DMatrix::zeros(k + path.p, kernel_dim);
    for i in 0..k {
        frame[(i, i)] = 1.0;
    }
    frame.set_column(kernel_dim - 1, &embed_with_stabilizer_slots(orient_start, k));
    let mut end_frame = frame.clone();
    end_frame.set_column(kernel_dim - 1, &embed_with_stabilizer_slots(orient_end, k));

    let mut min_surj = f64::INFINITY;
    let mut min_overlap = f64::INFINITY;
    let mut q_frame = frame;
    for j in 0..=steps {
        let t = path.t0 + (path.t1 - path.t0) * j as f64 / steps as f64;
        let m = stack_columns(&stabilizer(t), &path.block(t));
        let svd = full_svd(&m);
        let surj = svd.sigma[path.q - 1];
        min_surj = min_surj.min(surj);
        if surj <= cfg.min_surjectivity {
            return Err(Error::StabilizationFailed(format!(
                "stabilized block loses surjectivity at t = {t:.6}: sigma_min {surj:.3e}"
            )));
        }
        let kernel = svd.v.columns(path.q, kernel_dim).into_owned();
        let overlap = kernel.transpose() * &q_frame;
        let osvd = full_svd(&overlap);
        let smallest = osvd.sigma.last().copied().unwrap_or(0.0);
        min_overlap = min_overlap.min(smallest);
        if smallest < cfg.collapse_tol {
            return Err(Error::FrameCollapse(format!(
                "kernel frame overlap {smallest:.3e} at t = {t:.6} (step count {steps} too \
                 coarse, or the kernel bundle degenerates)"
            )));
        }
        // Procrustes: the orthonormal frame inside the new kernel closest
        // to the transported one.
        q_frame = kernel * (osvd.u * osvd.v.transpose());
    }

    let d = end_frame.transpose() * &q_frame;
    let det = d.determinant();
    if det.abs() < 0.5 {
        return Err(Error::FrameCollapse(format!(
            "transported frame barely overlaps the end frame: |det| = {:.3e}",
            det.abs()
        )));
    }
    Ok((if det > 0.0 { 1 } else { -1 }, min_surj, min_overlap))
}

/// Orientation-coherence sign of a stabilized operator path.
///
/// The path's stabilizer must vanish at both ends, where the given kernel
/// orientations of the core blocks complete the stabilizer slots to
/// reference frames. The start frame is transported through the kernel
/// bundle of [G(t) | B(t)] by orthonormal projection (Procrustes) at each
/// step; the sign is the orientation of the transported frame against the
/// end reference frame, re-derived at doubled resolution as a stability
/// check.
pub fn coherence_sign(
    path: &OperatorPath,
    stabilizer: &dyn Fn(f64) -> DMatrix<f64>,
    orient_start: &DVector<f64>,
    orient_end: &DVector<f64>,
    cfg: &CoherenceConfig,
) -> Result<CoherenceResult> {
    if path.p != path.q + 1 {
        return Err(Error::InvalidInput(format!(
            "coherence transport expects an index-one path, got ({}, {})",
            path.p, path.q
        )));
    }
    let g0 = stabilizer(path.t0);
    let g1 = stabilizer(path.t1);
    if g0.nrows() != path.q || g1.ncols() != g0.ncols() {
        return Err(Error::ShapeError(format!(
            "stabilizer blocks must be {} x k with constant k",
            path.q
        )));
    }
    if g0.norm() > cfg.endpoint_tol || g1.norm() > cfg.endpoint_tol {
        return Err(Error::InvalidInput(format!(
            "stabilizer must vanish at the endpoints (norms {:.3e}, {:.3e})",
            g0.norm(),
            g1.norm()
        )));
    }
    for (name, t, v) in
        [("start", path.t0, orient_start), ("end", path.t1, orient_end)]
    {
        if v.len() != path.p {
            return Err(Error::ShapeError(format!(
                "{name} orientation has dimension {}, expected {}",
                v.len(),
                path.p
            )));
        }
        if (v.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("{name} orientation must be a unit vector")));
        }
        let residual = (path.block(t) * v).norm();
        if residual > cfg.endpoint_tol * (1.0 + path.block(t).norm()) {
            return Err(Error::InvalidInput(format!(
                "{name} orientation is not in the kernel: |B v| = {residual:.3e}"
            )));
        }
    }

    let (sign, min_surj, min_overlap) =
        transport_once(path, stabilizer, orient_start, orient_end, cfg.steps, cfg)?;
    let (sign2, _, _) =
        transport_once(path, stabilizer, orient_start, orient_end, 2 * cfg.steps, cfg)?;
    if sign != sign2 {
        return Err(Error::FrameCollapse(format!(
            "transport sign flips under step doubling ({sign} vs {sign2})"
        )));
    }
    Ok(CoherenceResult {
        sign,
        min_surjectivity: min_surj,
        min_overlap,
        steps: cfg.steps,
        doubling_consistent: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        circle_s0, coherence_orientations, coherence_path, coherence_stabilizer, hopf_core,
        norm_square_core,
    };
    use crate::operator::OperatorPath;

    fn nmap(core: crate::poly::PolynomialCore) -> BlockShiftMap {
        BlockShiftMap::new(core).unwrap()
    }

    #[test]
    fn sigma_of_the_plane_circle_under_norm_square_is_one() {
        let circle = TracedCircle::from_parametric(|t| circle_s0(2, t), 628);
        let f = nmap(norm_square_core());
        let res = sigma(&circle, &f, &SigmaConfig::default()).unwrap();
        assert_eq!(res.value, 1);
        assert_eq!(res.cap_used, "barycenter cone");
        assert!(!res.perturbed);
        assert!(res.attempts.is_empty());
        assert_eq!(res.certificate.zeros.len(), 1);
        assert!(res.certificate.zeros[0].transverse);
    }

    #[test]
    fn sigma_of_the_hopf_fiber_is_zero_via_a_nudged_cone() {
        let circle = TracedCircle::from_parametric(|t| circle_s0(4, t), 628);
        let g = nmap(hopf_core());
        let res = sigma(&circle, &g, &SigmaConfig::default()).unwrap();
        assert_eq!(res.value, 0);
        assert!(!res.perturbed);
        // The barycenter cone and the in-plane nudges all pass through the
        // framing's corank-three point at the origin and must be refused.
        assert_eq!(res.attempts.len(), 5, "attempts: {:#?}", res.attempts);
        assert!(res.cap_used.contains("e3"), "cap used: {}", res.cap_used);
        assert!(res.certificate.zeros.is_empty());
    }

    #[test]
    fn tau_of_norm_square_is_zero() {
        let f = nmap(norm_square_core());
        let res = tau(
            &f,
            &DVector::from_row_slice(&[1.0]),
            &TraceConfig::default(),
            &SigmaConfig::default(),
        )
        .unwrap();
        assert_eq!(res.trace.circles.len(), 1);
        assert_eq!(res.sigmas[0].value, 1);
        assert_eq!(res.value, 0);
    }

    #[test]
    fn tau_of_hopf_is_one() {
        let g = nmap(hopf_core());
        let res = tau(
            &g,
            &DVector::from_row_slice(&[0.0, 0.0, 1.0]),
            &TraceConfig::default(),
            &SigmaConfig::default(),
        )
        .unwrap();
        assert_eq!(res.trace.circles.len(), 1);
        assert_eq!(res.sigmas[0].value, 0);
        assert_eq!(res.value, 1);
    }

    #[test]
    fn model_coherence_path_has_positive_sign() {
        let path = coherence_path();
        let (o0, o1) = coherence_orientations();
        let res =
            coherence_sign(&path, &coherence_stabilizer, &o0, &o1, &CoherenceConfig::default())
                .unwrap();
        assert_eq!(res.sign, 1);
        assert!(res.doubling_consistent);
        assert!((res.min_surjectivity - 2.0).abs() < 1e-6);
        assert!(res.min_overlap > 0.9);
    }

    #[test]
    fn flipping_either_end_orientation_flips_the_sign() {
        let path = coherence_path();
        let (o0, o1) = coherence_orientations();
        let cfg = CoherenceConfig::default();
        let res =
            coherence_sign(&path, &coherence_stabilizer, &(-&o0), &o1, &cfg).unwrap();
        assert_eq!(res.sign, -1);
        let res =
            coherence_sign(&path, &coherence_stabilizer, &o0, &(-&o1), &cfg).unwrap();
        assert_eq!(res.sign, -1);
    }

    #[test]
    fn coarse_transport_of_a_fast_kernel_collapses() {
        // Kernel direction turns by 3 pi / 2 per step at two steps: the
        // overlap with the transported frame degenerates mid-path. (A rate
        // aliasing to full turns per step would slip through — an inherent
        // limit of sampled transport that the step-doubling check narrows
        // but cannot close.)
        let path = OperatorPath::new(2, 1, 0.0, 1.0, |t| {
            let a = 3.0 * std::f64::consts::PI * t;
            DMatrix::from_row_slice(1, 2, &[a.cos(), a.sin()])
        });
        let stab = |_t: f64| DMatrix::<f64>::zeros(1, 0);
        let o0 = DVector::from_row_slice(&[0.0, 1.0]);
        let o1 = DVector::from_row_slice(&[0.0, 1.0]);
        let cfg = CoherenceConfig { steps: 2, ..Default::default() };
        let res = coherence_sign(&path, &stab, &o0, &o1, &cfg);
        assert!(matches!(res, Err(Error::FrameCollapse(_))), "got {res:?}");
    }

    #[test]
    fn surjectivity_loss_is_reported() {
        let path = OperatorPath::new(2, 1, -1.0, 1.0, |t| {
            DMatrix::from_row_slice(1, 2, &[t, 0.0])
        });
        let stab = |_t: f64| DMatrix::<f64>::zeros(1, 0);
        let o = DVector::from_row_slice(&[0.0, 1.0]);
        let res = coherence_sign(&path, &stab, &o, &o, &CoherenceConfig::default());
        assert!(matches!(res, Err(Error::StabilizationFailed(_))), "got {res:?}");
    }

    #[test]
    fn bad_end_orientation_is_rejected() {
        let path = coherence_path();
        let (o0, _) = coherence_orientations();
        let bad = DVector::from_row_slice(&[1.0, 0.0, 0.0, 0.0]);
        let res = coherence_sign(
            &path,
            &coherence_stabilizer,
            &o0,
            &bad,
            &CoherenceConfig::default(),
        );
        assert!(matches!(res, Err(Error::InvalidInput(_))), "got {res:?}");
    }
}
