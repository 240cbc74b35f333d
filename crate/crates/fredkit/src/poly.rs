//! Exact multivariate polynomial cores and piecewise-quintic step functions.
//!
//! Map cores are stored as explicit monomial lists so that evaluation,
//! differentiation and composition are exact (coefficients of the model
//! corpus are small integers, which f64 arithmetic composes without
//! rounding). This is what makes identity checks like "the composed core
//! equals the stored expansion" decidable by coefficient comparison.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// One term `coef * u_1^{e_1} ... u_p^{e_p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    /// Exponent of each domain variable; the length fixes the arity.
    pub exps: Vec<u32>,
    pub coef: f64,
}

impl Monomial {
    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        let mut acc = self.coef;
        for (i, &e) in self.exps.iter().enumerate() {
            if e > 0 {
                acc *= u[i].powi(e as i32);
            }
        }
        acc
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> Option<Monomial> {
        let e = self.exps[var];
        if e == 0 {
            return None;
        }
        let mut exps = self.exps.clone();
        exps[var] = e - 1;
        Some(Monomial { exps, coef: self.coef * e as f64 })
    }
}

/// A polynomial map `R^p -> R^q`, one monomial list per component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialCore {
    pub p: usize,
    pub q: usize,
    pub components: Vec<Vec<Monomial>>,
}

impl PolynomialCore {
    pub fn new(p: usize, q: usize, components: Vec<Vec<Monomial>>) -> Result<Self> {
        let core = PolynomialCore { p, q, components };
        core.validate()?;
        Ok(core)
    }

    /// Shape and finiteness checks; used on every deserialized core.
    pub fn validate(&self) -> Result<()> {
        if self.components.len() != self.q {
            return Err(Error::InvalidInput(format!(
                "expected {} component polynomial(s), found {}",
                self.q,
                self.components.len()
            )));
        }
        for (i, comp) in self.components.iter().enumerate() {
            for m in comp {
                if m.exps.len() != self.p {
                    return Err(Error::InvalidInput(format!(
                        "component {i}: monomial has {} exponent(s), expected {}",
                        m.exps.len(),
                        self.p
                    )));
                }
                if !m.coef.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "component {i}: non-finite coefficient {}",
                        m.coef
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(u.len(), self.p);
        DVector::from_fn(self.q, |i, _| {
            self.components[i].iter().map(|m| m.eval(u)).sum()
        })
    }

    /// Symbolic Jacobian: entry (i, j) is the monomial list of d comp_i / d u_j.
    pub fn jacobian_symbolic(&self) -> Vec<Vec<Vec<Monomial>>> {
        (0..self.q)
            .map(|i| {
                (0..self.p)
                    .map(|j| {
                        self.components[i]
                            .iter()
                            .filter_map(|m| m.partial(j))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.q, self.p, |i, j| {
            self.components[i]
                .iter()
                .filter_map(|m| m.partial(j))
                .map(|m| m.eval(u))
                .sum()
        })
    }

    /// Hessian of a single component at `u` (p x p, symmetric).
    pub fn hessian_component(&self, comp: usize, u: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.p, self.p);
        for j in 0..self.p {
            for l in j..self.p {
                let v: f64 = self.components[comp]
                    .iter()
                    .filter_map(|m| m.partial(j))
                    .filter_map(|m| m.partial(l))
                    .map(|m| m.eval(u))
                    .sum();
                h[(j, l)] = v;
                h[(l, j)] = v;
            }
        }
        h
    }

    /// Weighted Hessian `sum_i lambda_i Hess(comp_i)(u)`.
    pub fn hessian_weighted(&self, lambda: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.p, self.p);
        for i in 0..self.q {
            if lambda[i] != 0.0 {
                h += self.hessian_component(i, u) * lambda[i];
            }
        }
        h
    }

    /// Exact composition `outer(inner(u))`; requires `inner.q == outer.p`.
    pub fn compose(outer: &PolynomialCore, inner: &PolynomialCore) -> Result<PolynomialCore> {
        if inner.q != outer.p {
            return Err(Error::ShapeError(format!(
                "cannot compose: inner maps into R^{} but outer expects R^{}",
                inner.q, outer.p
            )));
        }
        let components = outer
            .components
            .iter()
            .map(|comp| {
                let mut acc: Vec<Monomial> = Vec::new();
                for m in comp {
                    let mut term = vec![Monomial { exps: vec![0; inner.p], coef: m.coef }];
                    for (j, &e) in m.exps.iter().enumerate() {
                        for _ in 0..e {
                            term = mul(&term, &inner.components[j]);
                        }
                    }
                    acc.extend(term);
                }
                normalize(acc)
            })
            .collect();
        PolynomialCore::new(inner.p, outer.q, components)
    }

    /// Canonical form: merged monomials in lexicographic exponent order,
    /// zero terms dropped.
    pub fn normalized(&self) -> PolynomialCore {
        PolynomialCore {
            p: self.p,
            q: self.q,
            components: self.components.iter().map(|c| normalize(c.clone())).collect(),
        }
    }

    /// Coefficient-exact equality of normalized forms.
    pub fn exact_eq(&self, other: &PolynomialCore) -> bool {
        if self.p != other.p || self.q != other.q {
            return false;
        }
        let a = self.normalized();
        let b = other.normalized();
        a.components == b.components
    }

    /// Add a constant vector to the components (exact).
    pub fn with_constant_offset(&self, offset: &DVector<f64>) -> PolynomialCore {
        debug_assert_eq!(offset.len(), self.q);
        let mut core = self.clone();
        for (i, comp) in core.components.iter_mut().enumerate() {
            if offset[i] != 0.0 {
                comp.push(Monomial { exps: vec![0; self.p], coef: offset[i] });
            }
        }
        core.normalized()
    }
}

/// Product of two monomial lists over the same variables.
fn mul(a: &[Monomial], b: &[Monomial]) -> Vec<Monomial> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let exps = x.exps.iter().zip(&y.exps).map(|(&u, &v)| u + v).collect();
            out.push(Monomial { exps, coef: x.coef * y.coef });
        }
    }
    normalize(out)
}

fn normalize(mut terms: Vec<Monomial>) -> Vec<Monomial> {
    terms.sort_by(|a, b| a.exps.cmp(&b.exps));
    let mut out: Vec<Monomial> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if last.exps == t.exps => last.coef += t.coef,
            _ => out.push(t),
        }
    }
    out.retain(|m| m.coef != 0.0);
    out
}

/// Convenience constructor used throughout the model corpus:
/// `mono(c, &[e1, e2, ...])`.
pub fn mono(coef: f64, exps: &[u32]) -> Monomial {
    Monomial { exps: exps.to_vec(), coef }
}

// ---------------------------------------------------------------------------
// Piecewise-quintic C^2 step functions
// ---------------------------------------------------------------------------

/// A C^2 piecewise-polynomial function of one variable, monotone between
/// flat ends. Pieces are stored as global-variable polynomial coefficients
/// (constant term first) over consecutive breakpoint intervals; evaluation
/// clamps to the outer flats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothStep {
    pub breaks: Vec<f64>,
    /// Coefficients per piece, low degree first; `pieces.len() == breaks.len() - 1`.
    pub pieces: Vec<Vec<f64>>,
}

impl SmoothStep {
    /// The quintic ramp r(x) = 6x^5 - 15x^4 + 10x^3 rescaled to carry
    /// [t0, t1] from y0 to y1 with vanishing first and second derivatives at
    /// both ends, preceded and followed by flat pieces on [lo, t0], [t1, hi].
    pub fn ramp(lo: f64, t0: f64, t1: f64, hi: f64, y0: f64, y1: f64) -> SmoothStep {
        assert!(lo <= t0 && t0 < t1 && t1 <= hi);
        let w = t1 - t0;
        let d = y1 - y0;
        // y0 + d * r((t - t0)/w) expanded in powers of s = (t - t0)/w; we keep
        // the piece in the local variable and shift at evaluation time via
        // stored breakpoints, so coefficients stay exact for rational inputs.
        let local = vec![y0, 0.0, 0.0, 10.0 * d, -15.0 * d, 6.0 * d];
        let _ = w;
        SmoothStep {
            breaks: vec![lo, t0, t1, hi],
            pieces: vec![vec![y0], local, vec![y1]],
        }
    }

    /// The increasing step used by the two-circle collapse homotopy:
    /// 0 on [0, 1/4], value 1 at 1/2 with positive slope, 2 on [3/4, 1].
    pub fn rising_zero_to_two() -> SmoothStep {
        SmoothStep::ramp(0.0, 0.25, 0.75, 1.0, 0.0, 2.0)
    }

    /// The decreasing step used by the single-circle collapse homotopy:
    /// 1 on [0, 1/4], root exactly at 1/2 with negative slope, -1 on [3/4, 1].
    pub fn falling_one_to_minus_one() -> SmoothStep {
        SmoothStep::ramp(0.0, 0.25, 0.75, 1.0, 1.0, -1.0)
    }

    fn piece_index(&self, t: f64) -> usize {
        let n = self.pieces.len();
        if t <= self.breaks[0] {
            return 0;
        }
        for i in 0..n {
            if t < self.breaks[i + 1] {
                return i;
            }
        }
        n - 1
    }

    /// Local coordinate of `t` inside its piece: ramp pieces are evaluated in
    /// s = (t - t0) / (t1 - t0), flats are constant.
    fn local(&self, i: usize, t: f64) -> (f64, f64) {
        let t0 = self.breaks[i];
        let t1 = self.breaks[i + 1];
        let w = t1 - t0;
        if self.pieces[i].len() == 1 || w == 0.0 {
            (0.0, 1.0)
        } else {
            ((t - t0) / w, 1.0 / w)
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.piece_index(t);
        let (s, _) = self.local(i, t);
        horner(&self.pieces[i], s)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let i = self.piece_index(t);
        let (s, scale) = self.local(i, t);
        horner(&poly_deriv(&self.pieces[i]), s) * scale
    }

    pub fn second_deriv(&self, t: f64) -> f64 {
        let i = self.piece_index(t);
        let (s, scale) = self.local(i, t);
        horner(&poly_deriv(&poly_deriv(&self.pieces[i])), s) * scale * scale
    }

    /// Single root of the step, found by bisection on [breaks.first, breaks.last].
    pub fn root(&self) -> Option<f64> {
        let (mut a, mut b) = (self.breaks[0], *self.breaks.last().unwrap());
        let (fa, fb) = (self.value(a), self.value(b));
        if fa == 0.0 {
            return Some(a);
        }
        if fb == 0.0 {
            return Some(b);
        }
        if fa.signum() == fb.signum() {
            return None;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = self.value(m);
            if fm == 0.0 {
                return Some(m);
            }
            if fm.signum() == fa.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        Some(0.5 * (a + b))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_deriv(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_row_slice(&[x, y])
    }

    #[test]
    fn monomial_eval_and_partial() {
        // 3 x^2 y
        let m = mono(3.0, &[2, 1]);
        assert_eq!(m.eval(&vec2(2.0, 5.0)), 60.0);
        let dx = m.partial(0).unwrap();
        assert_eq!(dx.coef, 6.0);
        assert_eq!(dx.exps, vec![1, 1]);
        assert!(mono(1.0, &[0, 2]).partial(0).is_none());
    }

    #[test]
    fn compose_square_of_sum() {
        // outer(w) = w^2, inner(u) = u1 + u2  =>  (u1 + u2)^2.
        let outer = PolynomialCore::new(1, 1, vec![vec![mono(1.0, &[2])]]).unwrap();
        let inner =
            PolynomialCore::new(2, 1, vec![vec![mono(1.0, &[1, 0]), mono(1.0, &[0, 1])]]).unwrap();
        let comp = PolynomialCore::compose(&outer, &inner).unwrap();
        let expected = PolynomialCore::new(
            2,
            1,
            vec![vec![mono(1.0, &[2, 0]), mono(2.0, &[1, 1]), mono(1.0, &[0, 2])]],
        )
        .unwrap();
        assert!(comp.exact_eq(&expected));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let core = PolynomialCore::new(
            2,
            2,
            vec![
                vec![mono(1.0, &[2, 0]), mono(-1.0, &[0, 2])],
                vec![mono(2.0, &[1, 1])],
            ],
        )
        .unwrap();
        let u = vec2(0.7, -0.4);
        let j = core.jacobian(&u);
        let h = 1e-6;
        for var in 0..2 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[var] += h;
            dn[var] -= h;
            let fd = (core.eval(&up) - core.eval(&dn)) / (2.0 * h);
            for i in 0..2 {
                assert!((j[(i, var)] - fd[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn hessian_of_quartic() {
        // comp = u1^4: d2/du1^2 = 12 u1^2.
        let core = PolynomialCore::new(1, 1, vec![vec![mono(1.0, &[4])]]).unwrap();
        let u = DVector::from_row_slice(&[2.0]);
        let h = core.hessian_component(0, &u);
        assert_eq!(h[(0, 0)], 48.0);
    }

    #[test]
    fn json_round_trip_matches_schema() {
        let core = PolynomialCore::new(
            2,
            1,
            vec![vec![mono(1.0, &[2, 0]), mono(1.0, &[0, 2])]],
        )
        .unwrap();
        let text = serde_json::to_string(&core).unwrap();
        assert!(text.contains("\"exps\":[2,0]"));
        assert!(text.contains("\"coef\":1.0"));
        let back: PolynomialCore = serde_json::from_str(&text).unwrap();
        assert!(back.exact_eq(&core));
    }

    #[test]
    fn rising_step_hits_the_documented_knots() {
        let chi = SmoothStep::rising_zero_to_two();
        assert_eq!(chi.value(0.0), 0.0);
        assert_eq!(chi.value(0.2), 0.0);
        assert_eq!(chi.value(0.25), 0.0);
        assert!((chi.value(0.5) - 1.0).abs() < 1e-15);
        assert!(chi.deriv(0.5) > 0.0);
        assert_eq!(chi.value(0.8), 2.0);
        assert_eq!(chi.value(1.0), 2.0);
    }

    #[test]
    fn falling_step_roots_at_one_half() {
        let chi = SmoothStep::falling_one_to_minus_one();
        assert_eq!(chi.value(0.1), 1.0);
        assert!(chi.value(0.5).abs() < 1e-15);
        assert!(chi.deriv(0.5) < 0.0);
        assert_eq!(chi.value(0.9), -1.0);
        let root = chi.root().unwrap();
        assert!((root - 0.5).abs() < 1e-12);
    }

    #[test]
    fn steps_are_c2_at_the_knots() {
        for chi in [SmoothStep::rising_zero_to_two(), SmoothStep::falling_one_to_minus_one()] {
            for knot in [0.25, 0.75] {
                let h = 1e-7;
                for f in [SmoothStep::value, SmoothStep::deriv, SmoothStep::second_deriv] {
                    let jump = (f(&chi, knot + h) - f(&chi, knot - h)).abs();
                    assert!(jump < 1e-4, "discontinuity {jump} at {knot}");
                }
            }
        }
    }

    #[test]
    fn step_derivatives_match_finite_differences() {
        let chi = SmoothStep::rising_zero_to_two();
        for &t in &[0.3, 0.45, 0.5, 0.62, 0.74] {
            let h = 1e-6;
            let fd1 = (chi.value(t + h) - chi.value(t - h)) / (2.0 * h);
            assert!((chi.deriv(t) - fd1).abs() < 1e-6);
            let fd2 = (chi.deriv(t + h) - chi.deriv(t - h)) / (2.0 * h);
            assert!((chi.second_deriv(t) - fd2).abs() < 1e-5);
        }
    }
}
