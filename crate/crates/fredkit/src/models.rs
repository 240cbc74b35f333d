//! The built-in model corpus: the three index-one maps whose preimage
//! circles realize every framed-cobordism class over l^2, the fold and
//! swap auxiliaries, the standard homotopies between their Pontryagin
//! circles, and the reference paths and surfaces used by the invariant
//! pipelines.
//!
//! Everything here is given by explicit polynomial cores (plus two
//! transcendental surfaces), so identities between models can be checked
//! exactly — `verify_corpus` does, and it is the first gate of the test
//! suite.

use crate::intersection::{OperatorFamily, ParamDomain};
use crate::maps::{differential_family, BlockShiftMap, HomotopyRecord, ParamCurve, Surface};
use crate::operator::OperatorPath;
use crate::poly::{mono, PolynomialCore, SmoothStep};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Cores
// ---------------------------------------------------------------------------

/// Core of the norm-square map: u1^2 + u2^2 on R^2.
pub fn norm_square_core() -> PolynomialCore {
    PolynomialCore::new(2, 1, vec![vec![mono(1.0, &[2, 0]), mono(1.0, &[0, 2])]]).unwrap()
}

/// Core of the Hopf-type map on R^4, written in real coordinates
/// (z1, z2) = (u1 + i u2, u3 + i u4) -> (2 z1 conj(z2), |z1|^2 - |z2|^2).
pub fn hopf_core() -> PolynomialCore {
    PolynomialCore::new(
        4,
        3,
        vec![
            vec![mono(2.0, &[1, 0, 1, 0]), mono(2.0, &[0, 1, 0, 1])],
            vec![mono(2.0, &[0, 1, 1, 0]), mono(-2.0, &[1, 0, 0, 1])],
            vec![
                mono(1.0, &[2, 0, 0, 0]),
                mono(1.0, &[0, 2, 0, 0]),
                mono(-1.0, &[0, 0, 2, 0]),
                mono(-1.0, &[0, 0, 0, 2]),
            ],
        ],
    )
    .unwrap()
}

/// Core of the fold map (z, t) -> (z, t^2) on R^3.
pub fn fold_core() -> PolynomialCore {
    PolynomialCore::new(
        3,
        3,
        vec![vec![mono(1.0, &[1, 0, 0])], vec![mono(1.0, &[0, 1, 0])], vec![mono(1.0, &[0, 0, 2])]],
    )
    .unwrap()
}

/// Core of the folded Hopf map: the Hopf core with its last component
/// squared. Written out monomial by monomial — independently of
/// [`fold_core`] and [`hopf_core`] — so that the composition identity
/// checked by `verify_corpus` is a genuine cross-validation.
pub fn folded_hopf_core() -> PolynomialCore {
    PolynomialCore::new(
        4,
        3,
        vec![
            vec![mono(2.0, &[1, 0, 1, 0]), mono(2.0, &[0, 1, 0, 1])],
            vec![mono(2.0, &[0, 1, 1, 0]), mono(-2.0, &[1, 0, 0, 1])],
            // (u1^2 + u2^2 - u3^2 - u4^2)^2, expanded by hand.
            vec![
                mono(1.0, &[4, 0, 0, 0]),
                mono(2.0, &[2, 2, 0, 0]),
                mono(1.0, &[0, 4, 0, 0]),
                mono(1.0, &[0, 0, 4, 0]),
                mono(2.0, &[0, 0, 2, 2]),
                mono(1.0, &[0, 0, 0, 4]),
                mono(-2.0, &[2, 0, 2, 0]),
                mono(-2.0, &[2, 0, 0, 2]),
                mono(-2.0, &[0, 2, 2, 0]),
                mono(-2.0, &[0, 2, 0, 2]),
            ],
        ],
    )
    .unwrap()
}

/// Core of the swap involution (z1, z2) -> (conj(z2), conj(z1)), i.e.
/// (u3, -u4, u1, -u2) in real coordinates.
pub fn swap_core() -> PolynomialCore {
    PolynomialCore::new(
        4,
        4,
        vec![
            vec![mono(1.0, &[0, 0, 1, 0])],
            vec![mono(-1.0, &[0, 0, 0, 1])],
            vec![mono(1.0, &[1, 0, 0, 0])],
            vec![mono(-1.0, &[0, 1, 0, 0])],
        ],
    )
    .unwrap()
}

fn identity_core(p: usize) -> PolynomialCore {
    let comps = (0..p)
        .map(|i| {
            let mut e = vec![0u32; p];
            e[i] = 1;
            vec![mono(1.0, &e)]
        })
        .collect();
    PolynomialCore::new(p, p, comps).unwrap()
}

// ---------------------------------------------------------------------------
// The corpus
// ---------------------------------------------------------------------------

/// All model maps in one place. Fields are public so tests can mutate a
/// copy and confirm that `verify_corpus` actually detects broken variants.
#[derive(Clone)]
pub struct ModelCorpus {
    /// Norm-square map, index 1 on R^2-core.
    pub f: BlockShiftMap,
    /// Hopf-type map, index 1 on R^4-core.
    pub g: BlockShiftMap,
    /// Folded Hopf map, index 1 on R^4-core.
    pub h: BlockShiftMap,
    /// The fold (z, t) -> (z, t^2), index 0.
    pub fold: BlockShiftMap,
    /// The swap involution exchanging the two model circles, index 0.
    pub swap: BlockShiftMap,
}

impl ModelCorpus {
    pub fn standard() -> ModelCorpus {
        ModelCorpus {
            f: BlockShiftMap::new(norm_square_core()).unwrap(),
            g: BlockShiftMap::new(hopf_core()).unwrap(),
            h: BlockShiftMap::new(folded_hopf_core()).unwrap(),
            fold: BlockShiftMap::new(fold_core()).unwrap(),
            swap: BlockShiftMap::new(swap_core()).unwrap(),
        }
    }
}

// ---------------------------------------------------------------------------
// Reference circles, surfaces, paths
// ---------------------------------------------------------------------------

/// Point of the first model circle (unit circle in coordinates 1, 2) in R^p.
pub fn circle_s0(p: usize, theta: f64) -> DVector<f64> {
    let mut u = DVector::zeros(p);
    u[0] = theta.cos();
    u[1] = theta.sin();
    u
}

/// Point of the second model circle (unit circle in coordinates 3, 4).
pub fn circle_s1(theta: f64) -> DVector<f64> {
    let mut u = DVector::zeros(4);
    u[2] = theta.cos();
    u[3] = theta.sin();
    u
}

/// The connecting quarter-circle path alpha(t) = (cos t, 0, sin t, 0),
/// running from the first circle to the second over [0, pi/2].
pub fn alpha(t: f64) -> DVector<f64> {
    DVector::from_row_slice(&[t.cos(), 0.0, t.sin(), 0.0])
}

/// The annulus swept between the two model circles:
/// (a, theta) in [0,1] x S^1, s = a pi/2 parametrizes
/// (cos(theta) cos(s), sin(theta) cos(s), cos(theta) sin(s), sin(theta) sin(s)).
pub fn annulus_surface() -> Surface {
    Surface::new(
        ParamDomain::Annulus,
        4,
        |a, th| {
            let s = a * PI / 2.0;
            DVector::from_row_slice(&[
                th.cos() * s.cos(),
                th.sin() * s.cos(),
                th.cos() * s.sin(),
                th.sin() * s.sin(),
            ])
        },
        |a, th| {
            let s = a * PI / 2.0;
            let da = DVector::from_row_slice(&[
                -th.cos() * s.sin(),
                -th.sin() * s.sin(),
                th.cos() * s.cos(),
                th.sin() * s.cos(),
            ]) * (PI / 2.0);
            let dth = DVector::from_row_slice(&[
                -th.sin() * s.cos(),
                th.cos() * s.cos(),
                -th.sin() * s.sin(),
                th.cos() * s.sin(),
            ]);
            (da, dth)
        },
    )
    .unwrap()
}

/// The upper-hemisphere cap of the first model circle:
/// (x, y) -> (x, y, sqrt(1 - x^2 - y^2), 0).
///
/// Derivatives are closed-form with the square root floored at 1e-2 within
/// ~1e-4 of the rim; the rim itself only ever contributes block *values*
/// (boundary surjectivity checks), never derivatives.
pub fn hemisphere_cap() -> Surface {
    Surface::new(
        ParamDomain::Disk { radius: 1.0 },
        4,
        |x, y| {
            let w = (1.0 - x * x - y * y).max(0.0);
            DVector::from_row_slice(&[x, y, w.sqrt(), 0.0])
        },
        |x, y| {
            let z = (1.0 - x * x - y * y).max(1e-4).sqrt();
            (
                DVector::from_row_slice(&[1.0, 0.0, -x / z, 0.0]),
                DVector::from_row_slice(&[0.0, 1.0, -y / z, 0.0]),
            )
        },
    )
    .unwrap()
}

/// The operator path of differentials along alpha: t -> d h(alpha(t)),
/// a (4, 3) block-shift path over [0, pi/2] with corank 1 at t = pi/4.
pub fn coherence_path() -> OperatorPath {
    let h = ModelCorpus::standard().h;
    OperatorPath::new(4, 3, 0.0, PI / 2.0, move |t| h.jacobian(&alpha(t)))
}

/// Closed form of the same path, row by row, for cross-checking:
/// v -> (2(v1 sin t + v3 cos t), 2(v2 sin t - v4 cos t),
///       4(v1 cos t - v3 sin t) cos 2t).
pub fn coherence_path_closed_form(t: f64) -> DMatrix<f64> {
    let (s, c) = (t.sin(), t.cos());
    let c2 = (2.0 * t).cos();
    DMatrix::from_row_slice(
        3,
        4,
        &[
            2.0 * s, 0.0, 2.0 * c, 0.0,
            0.0, 2.0 * s, 0.0, -2.0 * c,
            4.0 * c * c2, 0.0, -4.0 * s * c2, 0.0,
        ],
    )
}

/// The reference stabilizer for the coherence path: one column,
/// G(t) = 4 e3 sin 2t.
pub fn coherence_stabilizer(t: f64) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 4.0 * (2.0 * t).sin()])
}

/// Reference kernel orientations at the ends of the coherence path:
/// -e2 at t = 0 (tangent to the first circle at its basepoint) and e4 at
/// t = pi/2 (tangent to the second).
pub fn coherence_orientations() -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_row_slice(&[0.0, -1.0, 0.0, 0.0]),
        DVector::from_row_slice(&[0.0, 0.0, 0.0, 1.0]),
    )
}

// ---------------------------------------------------------------------------
// Homotopies
// ---------------------------------------------------------------------------

/// The arc gamma(t) = (chi(t), 0, 1 - chi(t)^2) on the paraboloid image of
/// the fold, with chi the rising cutoff.
pub fn gamma_curve() -> ParamCurve {
    let chi = SmoothStep::rising_zero_to_two();
    let c1 = chi.clone();
    let c2 = chi.clone();
    ParamCurve::new(
        3,
        move |t| {
            let x = chi.value(t);
            DVector::from_row_slice(&[x, 0.0, 1.0 - x * x])
        },
        move |t| {
            let x = c1.value(t);
            let dx = c1.deriv(t);
            DVector::from_row_slice(&[dx, 0.0, -2.0 * x * dx])
        },
        move |t| {
            let x = c2.value(t);
            let dx = c2.deriv(t);
            let ddx = c2.second_deriv(t);
            DVector::from_row_slice(&[ddx, 0.0, -2.0 * (dx * dx + x * ddx)])
        },
    )
}

/// Constant homotopy K(t, u) = f(u) - e1: both boundary slices are the
/// first model circle, no time dependence.
pub fn product_homotopy() -> HomotopyRecord {
    HomotopyRecord::new(
        BlockShiftMap::new(norm_square_core()).unwrap(),
        ParamCurve::constant(DVector::from_row_slice(&[1.0])),
    )
    .unwrap()
}

/// Circle-collapsing homotopy K(t, u) = f(u) - chi(t) with the falling
/// cutoff: the preimage circle shrinks to a point as chi crosses zero at
/// t = 1/2 and is empty afterwards.
pub fn collapse_homotopy() -> HomotopyRecord {
    let chi = SmoothStep::falling_one_to_minus_one();
    let c1 = chi.clone();
    let c2 = chi.clone();
    let shift = ParamCurve::new(
        1,
        move |t| DVector::from_row_slice(&[chi.value(t)]),
        move |t| DVector::from_row_slice(&[c1.deriv(t)]),
        move |t| DVector::from_row_slice(&[c2.second_deriv(t)]),
    );
    HomotopyRecord::new(BlockShiftMap::new(norm_square_core()).unwrap(), shift).unwrap()
}

/// Annulus-sweeping homotopy K(t, u) = h(u) - gamma(t): at t = 0 the zero
/// set is both model circles, at t = 1 it is empty, and in between it
/// sweeps the connecting annulus.
pub fn sweep_homotopy() -> HomotopyRecord {
    HomotopyRecord::new(BlockShiftMap::new(folded_hopf_core()).unwrap(), gamma_curve()).unwrap()
}

// ---------------------------------------------------------------------------
// Two-parameter intersection model families
// ---------------------------------------------------------------------------

/// The pencil family [x y] over the unit disk: one transverse intersection.
pub fn pencil_family() -> OperatorFamily {
    OperatorFamily::new(
        ParamDomain::Disk { radius: 1.0 },
        2,
        1,
        |x, y| DMatrix::from_row_slice(1, 2, &[x, y]),
        |_x, _y| {
            (
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            )
        },
    )
    .unwrap()
}

/// The squared pencil [x^2 - y^2, 2xy]: a single zero of winding two.
pub fn doubled_family() -> OperatorFamily {
    OperatorFamily::new(
        ParamDomain::Disk { radius: 1.0 },
        2,
        1,
        |x, y| DMatrix::from_row_slice(1, 2, &[x * x - y * y, 2.0 * x * y]),
        |x, y| {
            (
                DMatrix::from_row_slice(1, 2, &[2.0 * x, 2.0 * y]),
                DMatrix::from_row_slice(1, 2, &[-2.0 * y, 2.0 * x]),
            )
        },
    )
    .unwrap()
}

/// A constant surjective family: empty intersection.
pub fn constant_family() -> OperatorFamily {
    OperatorFamily::new(
        ParamDomain::Disk { radius: 1.0 },
        2,
        1,
        |_x, _y| DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
        |_x, _y| (DMatrix::zeros(1, 2), DMatrix::zeros(1, 2)),
    )
    .unwrap()
}

/// The differential of the norm-square map along its flat capping disk —
/// equal to twice the pencil family.
pub fn norm_square_disk_family() -> OperatorFamily {
    let m = BlockShiftMap::new(norm_square_core()).unwrap();
    differential_family(&m, &Surface::flat_disk(2)).unwrap()
}

// ---------------------------------------------------------------------------
// Identity verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    pub all_passed: bool,
}

fn check(name: &str, passed: bool, detail: String) -> IdentityCheck {
    IdentityCheck { name: name.to_string(), passed, detail }
}

fn sample_points(p: usize, n: usize) -> Vec<DVector<f64>> {
    // Deterministic low-discrepancy-ish samples in [-1.5, 1.5]^p.
    (0..n)
        .map(|i| {
            DVector::from_fn(p, |j, _| {
                let x = ((i * 37 + j * 101 + 13) % 997) as f64 / 997.0;
                3.0 * x - 1.5
            })
        })
        .collect()
}

/// Run every structural identity the corpus is supposed to satisfy and
/// report each outcome. Exact polynomial identities are checked exactly;
/// numerical ones to 1e-12.
pub fn verify_corpus(corpus: &ModelCorpus) -> IdentityReport {
    let mut checks = Vec::new();
    let tol = 1e-12;

    // 1. The folded map equals fold-after-Hopf as polynomials.
    {
        let composed = PolynomialCore::compose(corpus.fold.core(), corpus.g.core());
        let ok = composed
            .as_ref()
            .map(|c| c.exact_eq(corpus.h.core()))
            .unwrap_or(false);
        checks.push(check(
            "fold-composition",
            ok,
            "folded core coincides with fold(hopf(u)) monomial by monomial".into(),
        ));
    }

    // 2. Swap invariance: h(swap(u)) = h(u) as polynomials.
    {
        let composed = PolynomialCore::compose(corpus.h.core(), corpus.swap.core());
        let ok = composed
            .as_ref()
            .map(|c| c.exact_eq(corpus.h.core()))
            .unwrap_or(false);
        checks.push(check(
            "swap-invariance",
            ok,
            "folded core is invariant under the swap involution".into(),
        ));
    }

    // 3. Swap is an involution and exchanges the two model circles.
    {
        let twice = PolynomialCore::compose(corpus.swap.core(), corpus.swap.core());
        let invol = twice
            .as_ref()
            .map(|c| c.exact_eq(&identity_core(4)))
            .unwrap_or(false);
        let mut moves = true;
        for k in 0..8 {
            let th = 2.0 * PI * k as f64 / 8.0;
            let img0 = corpus.swap.eval_core(&circle_s0(4, th));
            // Image must lie on the circle in coordinates 3, 4.
            moves &= img0[0].abs() < tol
                && img0[1].abs() < tol
                && (img0[2] * img0[2] + img0[3] * img0[3] - 1.0).abs() < tol;
            let img1 = corpus.swap.eval_core(&circle_s1(th));
            moves &= img1[2].abs() < tol
                && img1[3].abs() < tol
                && (img1[0] * img1[0] + img1[1] * img1[1] - 1.0).abs() < tol;
        }
        checks.push(check(
            "swap-involution",
            invol,
            "swap composed with itself is the identity core".into(),
        ));
        checks.push(check(
            "swap-maps-circles",
            moves,
            "swap exchanges the two model circles at sampled points".into(),
        ));
    }

    // 4. Hopf norm relation |g(u)| = |u|^2.
    {
        let mut worst = 0.0f64;
        for u in sample_points(4, 100) {
            let v = corpus.g.eval_core(&u);
            let err = (v.norm() - u.norm_squared()).abs();
            worst = worst.max(err);
        }
        checks.push(check(
            "hopf-norm-relation",
            worst < 1e-10,
            format!("max deviation of |g(u)| from |u|^2: {worst:.3e}"),
        ));
    }

    // 5. The sweep homotopy's time flats: dK(t, .) = [0 | dh(.)] wherever
    // the arc is constant (the time partial vanishes there). t = 1/2 is
    // deliberately not in this set: the arc moves fastest there.
    {
        let k = HomotopyRecord::new(corpus.h.clone(), gamma_curve())
            .expect("dimensions agree");
        let mut worst = 0.0f64;
        for &t in &[0.0, 0.1, 0.2, 0.24, 0.76, 0.9, 1.0] {
            for u in sample_points(4, 10) {
                let full = k.full_jacobian(t, &u);
                let mut expected = DMatrix::zeros(3, 5);
                expected.view_mut((0, 1), (3, 4)).copy_from(&corpus.h.jacobian(&u));
                worst = worst.max((full - expected).norm());
            }
        }
        checks.push(check(
            "sweep-flat-differential",
            worst < tol,
            format!("max |dK - [0 | dh]| on the flat time intervals: {worst:.3e}"),
        ));
    }

    // 6. The sweep homotopy's zero slice at t = 0 contains both circles.
    {
        let k = HomotopyRecord::new(corpus.h.clone(), gamma_curve())
            .expect("dimensions agree");
        let mut worst = 0.0f64;
        for j in 0..16 {
            let th = 2.0 * PI * j as f64 / 16.0;
            worst = worst.max(k.value(0.0, &circle_s0(4, th)).norm());
            worst = worst.max(k.value(0.0, &circle_s1(th)).norm());
        }
        checks.push(check(
            "sweep-boundary-circles",
            worst < tol,
            format!("max |K(0, u)| over both sampled circles: {worst:.3e}"),
        ));
    }

    // 7. The collapse homotopy agrees with its closed form.
    {
        let q = collapse_homotopy();
        let chi = SmoothStep::falling_one_to_minus_one();
        let mut worst = 0.0f64;
        for &t in &[0.0, 0.3, 0.5, 0.62, 1.0] {
            for u in sample_points(2, 10) {
                let direct = u[0] * u[0] + u[1] * u[1] - chi.value(t);
                worst = worst.max((q.value(t, &u)[0] - direct).abs());
            }
        }
        checks.push(check(
            "collapse-closed-form",
            worst < tol,
            format!("max deviation from u1^2 + u2^2 - chi(t): {worst:.3e}"),
        ));
    }

    // 8. First-circle points are norm-square preimages of 1.
    {
        let mut worst = 0.0f64;
        for j in 0..16 {
            let th = 2.0 * PI * j as f64 / 16.0;
            let u = circle_s0(2, th);
            worst = worst.max((corpus.f.eval_core(&u)[0] - 1.0).abs());
        }
        checks.push(check(
            "norm-square-circle",
            worst < tol,
            format!("max |f - 1| on the sampled unit circle: {worst:.3e}"),
        ));
    }

    // 9. The coherence path matches its printed closed form.
    {
        let path = {
            let h = corpus.h.clone();
            OperatorPath::new(4, 3, 0.0, PI / 2.0, move |t| h.jacobian(&alpha(t)))
        };
        let mut worst = 0.0f64;
        for i in 0..=20 {
            let t = PI / 2.0 * i as f64 / 20.0;
            worst = worst.max((path.block(t) - coherence_path_closed_form(t)).norm());
        }
        checks.push(check(
            "coherence-path-closed-form",
            worst < tol,
            format!("max |dh(alpha(t)) - closed form|: {worst:.3e}"),
        ));
    }

    // 10. Index one at random points for the three principal maps.
    {
        let mut ok = true;
        for m in [&corpus.f, &corpus.g, &corpus.h] {
            ok &= m.index() == 1;
            for u in sample_points(m.p(), 50) {
                let d = m.differential(&u);
                ok &= d.index() == 1;
            }
        }
        checks.push(check(
            "index-one-differentials",
            ok,
            "differentials of the three principal maps have index one everywhere sampled".into(),
        ));
    }

    // 11. Annulus ends lie on the two model circles.
    {
        let ann = annulus_surface();
        let mut worst = 0.0f64;
        for j in 0..12 {
            let th = 2.0 * PI * j as f64 / 12.0;
            worst = worst.max((ann.point(0.0, th) - circle_s0(4, th)).norm());
            worst = worst.max((ann.point(1.0, th) - circle_s1(th)).norm());
        }
        checks.push(check(
            "annulus-ends",
            worst < tol,
            format!("max end deviation from the model circles: {worst:.3e}"),
        ));
    }

    // 12. Hemisphere cap: unit sphere inside, first circle on the rim.
    {
        let cap = hemisphere_cap();
        let mut worst = 0.0f64;
        for &(x, y) in &[(0.0, 0.0), (0.3, 0.4), (-0.5, 0.2), (0.9, 0.1)] {
            worst = worst.max((cap.point(x, y).norm() - 1.0).abs());
        }
        for j in 0..12 {
            let th = 2.0 * PI * j as f64 / 12.0;
            worst = worst.max((cap.point(th.cos(), th.sin()) - circle_s0(4, th)).norm());
        }
        // The rim comparison tolerates sqrt-of-roundoff: 1 - cos^2 - sin^2
        // is ~1e-16 and the square root lifts that to ~1e-8.
        checks.push(check(
            "hemisphere-cap",
            worst < 1e-7,
            format!("max deviation from the unit sphere / rim circle: {worst:.3e}"),
        ));
    }

    let all_passed = checks.iter().all(|c| c.passed);
    IdentityReport { checks, all_passed }
}

/// [`verify_corpus`] on the standard corpus.
pub fn verify_model_identities() -> IdentityReport {
    verify_corpus(&ModelCorpus::standard())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use crate::maps::BlockShiftMap;
    use crate::operator::stack_columns;

    #[test]
    fn standard_corpus_passes_all_identities() {
        let report = verify_model_identities();
        for c in &report.checks {
            assert!(c.passed, "identity {} failed: {}", c.name, c.detail);
        }
        assert!(report.all_passed);
        assert_eq!(report.checks.len(), 13);
    }

    #[test]
    fn mutated_swap_is_detected() {
        let mut corpus = ModelCorpus::standard();
        corpus.swap = BlockShiftMap::new(identity_core(4)).unwrap();
        let report = verify_corpus(&corpus);
        let by_name = |n: &str| report.checks.iter().find(|c| c.name == n).unwrap();
        // The identity map leaves h invariant trivially...
        assert!(by_name("swap-invariance").passed);
        // ...but no longer exchanges the circles, which the report catches.
        assert!(!by_name("swap-maps-circles").passed);
        assert!(!report.all_passed);
    }

    #[test]
    fn mutated_fold_composition_is_detected() {
        let mut corpus = ModelCorpus::standard();
        // Tamper with one coefficient of the folded core.
        let mut core = folded_hopf_core();
        core.components[2][0].coef = 1.0 + 1e-9;
        corpus.h = BlockShiftMap::new(core).unwrap();
        let report = verify_corpus(&corpus);
        assert!(!report.checks.iter().find(|c| c.name == "fold-composition").unwrap().passed);
    }

    #[test]
    fn time_half_velocity_is_nonzero_for_the_sweep() {
        // Documents why t = 1/2 is excluded from the flat-differential
        // check: the arc's velocity there is (chi', 0, -2 chi') with
        // chi'(1/2) = 7.5.
        let k = sweep_homotopy();
        let dt = k.dt(0.5);
        assert!((dt[0] + 7.5).abs() < 1e-12);
        assert!((dt[2] - 15.0).abs() < 1e-12);
        assert!(dt.norm() > 1.0);
    }

    #[test]
    fn sweep_slice_at_half_vanishes_on_the_mid_annulus_circle() {
        // gamma(1/2) = (1, 0, 0); the zero slice there is the Hopf fiber
        // through the annulus mid-circle s = pi/4.
        let k = sweep_homotopy();
        for j in 0..8 {
            let th = 2.0 * PI * j as f64 / 8.0;
            let s = PI / 4.0;
            let u = DVector::from_row_slice(&[
                th.cos() * s.cos(),
                th.sin() * s.cos(),
                th.cos() * s.sin(),
                th.sin() * s.sin(),
            ]);
            assert!(k.value(0.5, &u).norm() < 1e-12);
        }
    }

    #[test]
    fn stabilized_coherence_path_has_constant_spectrum() {
        let path = coherence_path();
        for i in 0..=16 {
            let t = PI / 2.0 * i as f64 / 16.0;
            let m = stack_columns(&coherence_stabilizer(t), &path.block(t));
            let s = singular_values(&m);
            assert!((s[0] - 4.0).abs() < 1e-12, "sigma_max at t = {t}");
            assert!((s[1] - 2.0).abs() < 1e-12);
            assert!((s[2] - 2.0).abs() < 1e-12, "sigma_min at t = {t}");
        }
    }

    #[test]
    fn coherence_path_kernels_at_the_ends() {
        let path = coherence_path();
        let (o0, o1) = coherence_orientations();
        assert!((path.block(0.0) * o0).norm() < 1e-12);
        assert!((path.block(PI / 2.0) * o1).norm() < 1e-12);
        // Interior corank-1 point at t = pi/4.
        let s = singular_values(&path.block(PI / 4.0));
        assert!(s[2] < 1e-12 && s[1] > 1.0);
    }

    #[test]
    fn gamma_curve_derivatives_match_finite_differences() {
        let c = gamma_curve();
        let h = 1e-6;
        for &t in &[0.1, 0.31, 0.5, 0.63, 0.9] {
            let fd1 = (c.at(t + h) - c.at(t - h)) / (2.0 * h);
            assert!((c.deriv(t) - fd1).norm() < 1e-6, "first derivative at {t}");
            let fd2 = (c.deriv(t + h) - c.deriv(t - h)) / (2.0 * h);
            assert!((c.second_deriv(t) - fd2).norm() < 1e-6, "second derivative at {t}");
        }
    }

    #[test]
    fn product_homotopy_is_time_independent() {
        let k = product_homotopy();
        let u = DVector::from_row_slice(&[0.7, -0.2]);
        assert_eq!(k.value(0.1, &u), k.value(0.9, &u));
        assert_eq!(k.dt(0.37).norm(), 0.0);
    }
}
