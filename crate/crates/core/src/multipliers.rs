//! Characteristic polynomial `D(tau, lambda)`, multipliers with labels, and
//! the scalars derived from `(T, T~)`.

use serde::Serialize;

use crate::algebra::{cubic_residual, cubic_roots};
use crate::monodromy::{propagate, MonodromyResult};
use crate::potential::StepPotential;
use crate::{Error, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Spacing below which two multipliers are treated as a double root.
pub const ROOT_MERGE: f64 = 1e-7;
/// Imaginary offset used to continue labels from the upper half plane.
pub const LABEL_SHIFT: f64 = 1e-6;
/// Modulus band for counting unimodular multipliers.
pub const UNIMODULAR_BAND: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeling {
    Asymptotic,
    Continuity,
    Unordered,
}

#[derive(Clone, Copy, Debug)]
pub enum LabelRequest<'a> {
    Unordered,
    /// Nearest-neighbour matching to a previous triple.
    Continuity(&'a MultiplierTriple),
    /// `tau_3` is the `e^{-i lambda}` branch. Real lambda needs the potential
    /// to continue from `lambda + i 1e-6`.
    Asymptotic(&'a StepPotential),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplierTriple {
    pub tau: [C64; 3],
    pub lambda: C64,
    pub labeling: Labeling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovCoeffs {
    /// `(T + T~)/2`
    pub t: C64,
    pub t1: C64,
    pub det: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedScalars {
    pub delta: [C64; 3],
    pub disc: C64,
    pub phi: C64,
    pub rho: C64,
    pub lyap_coeffs: LyapunovCoeffs,
}

/// Monic coefficients `[c0, c1, c2]` of `tau^3 - T tau^2 + e^{i lambda} T~ tau - e^{i lambda}`.
pub fn char_poly(t: C64, t_tilde: C64, lambda: C64) -> [C64; 3] {
    let e = (I * lambda).exp();
    [-e, e * t_tilde, -t]
}

/// `D(tau, lambda) = -tau^3 + tau^2 T - tau e^{i lambda} T~ + e^{i lambda}`.
pub fn char_eval(t: C64, t_tilde: C64, lambda: C64, tau: C64) -> C64 {
    let e = (I * lambda).exp();
    ((-tau + t) * tau - e * t_tilde) * tau + e
}

fn raw_roots(mr: &MonodromyResult) -> Result<[C64; 3], Error> {
    let roots = cubic_roots(char_poly(mr.t, mr.t_tilde, mr.lambda))?;
    if roots.iter().any(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::Range("zero multiplier".into()));
    }
    Ok(roots)
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Reorders `roots` to best match `reference` (minimal total distance).
fn match_to(roots: [C64; 3], reference: &[C64; 3]) -> [C64; 3] {
    let cost = |p: &[usize; 3]| (0..3).map(|i| (roots[p[i]] - reference[i]).norm()).sum::<f64>();
    let best = PERMS.iter().min_by(|a, b| cost(a).total_cmp(&cost(b))).unwrap();
    [roots[best[0]], roots[best[1]], roots[best[2]]]
}

fn order_by_modulus(roots: [C64; 3], tau3_largest: bool) -> [C64; 3] {
    let mut r = roots;
    r.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    if !tau3_largest {
        r.swap(0, 2);
        r.swap(0, 1);
    }
    r
}

fn min_gap_to(roots: &[C64; 3], k: usize) -> f64 {
    (0..3).filter(|&j| j != k).map(|j| (roots[j] - roots[k]).norm()).fold(f64::INFINITY, f64::min)
}

/// Smallest pairwise distance of a triple.
pub fn separation(tau: &[C64; 3]) -> f64 {
    (tau[0] - tau[1]).norm().min((tau[0] - tau[2]).norm()).min((tau[1] - tau[2]).norm())
}

/// Roots of `D(., lambda)` with the requested labeling.
pub fn multipliers(mr: &MonodromyResult, req: LabelRequest) -> Result<MultiplierTriple, Error> {
    let roots = raw_roots(mr)?;
    let lambda = mr.lambda;
    let (tau, labeling) = match req {
        LabelRequest::Unordered => (roots, Labeling::Unordered),
        LabelRequest::Continuity(prev) => (match_to(roots, &prev.tau), Labeling::Continuity),
        LabelRequest::Asymptotic(p) => {
            let tau = if lambda.im != 0.0 {
                order_by_modulus(roots, lambda.im > 0.0)
            } else {
                let up = propagate(p, lambda + I * LABEL_SHIFT)?;
                let shifted = order_by_modulus(raw_roots(&up)?, true);
                match_to(roots, &shifted)
            };
            let gap = min_gap_to(&tau, 2);
            if gap < ROOT_MERGE {
                return Err(Error::LabelAmbiguous(gap));
            }
            (tau, Labeling::Asymptotic)
        }
    };
    Ok(MultiplierTriple { tau, lambda, labeling })
}

/// Asymptotic labels where possible, raw order near a branch point.
pub fn multipliers_or_unordered(p: &StepPotential, mr: &MonodromyResult) -> Result<MultiplierTriple, Error> {
    match multipliers(mr, LabelRequest::Asymptotic(p)) {
        Err(Error::LabelAmbiguous(_)) => multipliers(mr, LabelRequest::Unordered),
        other => other,
    }
}

/// Lyapunov coefficients of `Lambda = (psi + psi^{-1})/2`: trace, second
/// invariant and determinant, all from `(T, T~)`.
pub fn lyapunov_coeffs(t: C64, t_tilde: C64, lambda: C64) -> LyapunovCoeffs {
    let e = (I * lambda).exp();
    let ei = (-I * lambda).exp();
    LyapunovCoeffs {
        t: (t + t_tilde) * 0.5,
        t1: (ei * t + 1.0) * (e * t_tilde + 1.0) * 0.25 - 1.0,
        det: (lambda.cos() * 2.0 + e * (t_tilde * t_tilde - ei * t * 2.0) + ei * (t * t - e * t_tilde * 2.0))
            * 0.125,
    }
}

/// `D = -(1/64)(T^2 T~^2 - 4 e^{-i lambda} T^3 - 4 e^{i lambda} T~^3 + 18 T T~ - 27)`.
pub fn disc_trace(t: C64, t_tilde: C64, lambda: C64) -> C64 {
    let e = (I * lambda).exp();
    let ei = (-I * lambda).exp();
    let tt = t * t_tilde;
    -(tt * tt - ei * 4.0 * t * t * t - e * 4.0 * t_tilde * t_tilde * t_tilde + tt * 18.0 - 27.0) / 64.0
}

/// Same discriminant from the roots: `-(e^{-2 i lambda}/64) prod (tau_i - tau_j)^2`.
pub fn disc_roots(tau: &[C64; 3], lambda: C64) -> C64 {
    let p = (tau[0] - tau[1]) * (tau[0] - tau[2]) * (tau[1] - tau[2]);
    -(-I * lambda * 2.0).exp() / 64.0 * p * p
}

/// `phi = (T - T~)/(2i) - sin lambda`.
pub fn phi(t: C64, t_tilde: C64, lambda: C64) -> C64 {
    (t - t_tilde) / (I * 2.0) - lambda.sin()
}

fn rho_of(c: &LyapunovCoeffs) -> C64 {
    let (a, b, d) = (c.t, c.t1, c.det);
    a * a * b * b - d * a * a * a * 4.0 - b * b * b * 4.0 + d * a * b * 18.0 - d * d * 27.0
}

pub fn derived(mt: &MultiplierTriple, t: C64, t_tilde: C64) -> DerivedScalars {
    let lambda = mt.lambda;
    let lyap_coeffs = lyapunov_coeffs(t, t_tilde, lambda);
    DerivedScalars {
        delta: mt.tau.map(|z| (z + z.inv()) * 0.5),
        disc: disc_trace(t, t_tilde, lambda),
        phi: phi(t, t_tilde, lambda),
        rho: rho_of(&lyap_coeffs),
        lyap_coeffs,
    }
}

/// Residuals of `D(e^{i lambda}) = 2i e^{2i lambda} phi` and
/// `4 D phi^2 = rho`, each divided by the sum of magnitudes of its terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub phi_identity: f64,
    pub rho_identity: f64,
}

pub fn identity_suite(ds: &DerivedScalars, t: C64, t_tilde: C64, lambda: C64) -> IdentityResiduals {
    let e = (I * lambda).exp();
    let lhs = char_eval(t, t_tilde, lambda, e);
    let rhs = I * 2.0 * e * e * ds.phi;
    let scale1 = (e * e * e).norm() + (e * e * t).norm() + (e * e * t_tilde).norm() + e.norm();
    // magnitudes of the terms forming each Lyapunov coefficient, so that
    // cancellation inside the coefficients is accounted for
    let (x, y) = (t.norm(), t_tilde.norm());
    let a = 0.5 * (x + y);
    let b = 0.25 * (x + 1.0) * (y + 1.0) + 1.0;
    let d = 0.125 * (2.0 + x * x + y * y + 2.0 * (x + y));
    let lhs2 = ds.disc * ds.phi * ds.phi * 4.0;
    let scale2 = a * a * b * b + 4.0 * d * a.powi(3) + 4.0 * b.powi(3) + 18.0 * d * a * b + 27.0 * d * d;
    IdentityResiduals {
        phi_identity: (lhs - rhs).norm() / scale1.max(f64::MIN_POSITIVE),
        rho_identity: (lhs2 - ds.rho).norm() / scale2.max(lhs2.norm()).max(f64::MIN_POSITIVE),
    }
}

/// Number of multipliers with `||tau| - 1| <= band`.
pub fn unimodular_count(tau: &[C64; 3], band: f64) -> usize {
    tau.iter().filter(|z| (z.norm() - 1.0).abs() <= band).count()
}

/// Max residual of the monic cubic at the returned roots, scaled as in the
/// solver contract.
pub fn root_residual(mr: &MonodromyResult, tau: &[C64; 3]) -> f64 {
    let c = char_poly(mr.t, mr.t_tilde, mr.lambda);
    let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
    tau.iter().map(|z| cubic_residual(c, *z)).fold(0.0, f64::max) / scale
}

/// Convenience: monodromy, unordered multipliers and derived scalars at once.
pub fn evaluate(p: &StepPotential, lambda: C64) -> Result<(MonodromyResult, MultiplierTriple, DerivedScalars), Error> {
    let mr = propagate(p, lambda)?;
    let mt = multipliers(&mr, LabelRequest::Unordered)?;
    let ds = derived(&mt, mr.t, mr.t_tilde);
    Ok((mr, mt, ds))
}
