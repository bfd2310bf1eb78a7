//! Band/gap classification of the real line and the sheet-count test.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::eigenvalues3;
use crate::monodromy::{propagate, MonodromyResult};
use crate::multipliers::{
    derived, disc_roots, multipliers, separation, unimodular_count, LabelRequest, MultiplierTriple, UNIMODULAR_BAND,
};
use crate::potential::StepPotential;
use crate::{Diagnostic, Error, C64};

/// Below this norm the potential is treated as zero.
pub const FREE_NORM: f64 = 1e-14;
/// Endpoint refinement target.
pub const ENDPOINT_TOL: f64 = 1e-9;
pub const MAX_STEP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub lambda: f64,
    pub disc: f64,
    pub disc_im: f64,
    pub phi: f64,
    pub t_abs: f64,
    pub multiplicity: u8,
    /// Multipliers with `||tau| - 1| <= 1e-6`.
    pub unimodular: usize,
    /// Inside the `+-tol` band around zero; multiplicity taken from neighbours.
    pub boundary: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchReality {
    /// The two non-unimodular Lyapunov values are real.
    Real,
    /// They form a complex conjugate pair.
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gap {
    pub lower: f64,
    pub upper: f64,
    /// Endpoint coincides with the scan interval rather than a zero of D.
    pub truncated_lower: bool,
    pub truncated_upper: bool,
    pub branch: BranchReality,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KissingPoint {
    pub lambda: f64,
    pub disc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralScan {
    pub interval: (f64, f64),
    pub grid_step: f64,
    pub points: Vec<ScanPoint>,
    pub gaps: Vec<Gap>,
    pub kissing: Vec<KissingPoint>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SheetEvidence {
    pub sup_phi: f64,
    pub sup_t: f64,
    pub beta1: f64,
    pub rank_one: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SheetVerdict {
    pub sheets: u8,
    pub evidence: SheetEvidence,
}

/// Pointwise data used by the classifier.
#[derive(Clone, Copy, Debug)]
struct Sample {
    disc: C64,
    phi: C64,
    t_abs: f64,
    unimodular: usize,
    /// Rounding scale of the discriminant; zero once the sign is resolved
    /// from the eigenvalues.
    floor: f64,
}

/// Smallest eigenvalue separation at which the root-product discriminant
/// has a reliable sign.
const RESOLVE_SEPARATION: f64 = 1e-6;

/// `D` and its rounding floor. Inside the floor of the trace formula
/// (clustered multipliers) the root product over the eigenvalues of `psi`
/// decides, when they are separated enough.
fn disc_resolved(mr: &MonodromyResult, ev: &[C64; 3]) -> (C64, f64) {
    let disc = crate::multipliers::disc_trace(mr.t, mr.t_tilde, mr.lambda);
    let (a, b) = (mr.t.norm(), mr.t_tilde.norm());
    let terms = a * a * b * b + 4.0 * a.powi(3) + 4.0 * b.powi(3) + 18.0 * a * b + 27.0;
    let floor = 1e-14 * terms / 64.0;
    if disc.re.abs() > floor || separation(ev) < RESOLVE_SEPARATION {
        return (disc, floor);
    }
    (disc_roots(ev, mr.lambda), 0.0)
}

fn sample(p: &StepPotential, lambda: f64) -> Result<Sample, Error> {
    let mr = propagate(p, C64::new(lambda, 0.0))?;
    let ev = eigenvalues3(&mr.psi)?;
    let (disc, floor) = disc_resolved(&mr, &ev);
    Ok(Sample {
        disc,
        phi: crate::multipliers::phi(mr.t, mr.t_tilde, mr.lambda),
        t_abs: mr.t.norm(),
        unimodular: unimodular_count(&ev, UNIMODULAR_BAND),
        floor,
    })
}

fn disc_at(p: &StepPotential, lambda: f64) -> Result<f64, Error> {
    let mr = propagate(p, C64::new(lambda, 0.0))?;
    let ev = eigenvalues3(&mr.psi)?;
    Ok(disc_resolved(&mr, &ev).0.re)
}

/// Multiplicity (1 or 3) and discriminant at a single real point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub multiplicity: u8,
    pub disc: f64,
    pub boundary: bool,
    pub unimodular: usize,
}

/// Pointwise classification. A point inside the rounding band is resolved
/// from the sign of D at `lambda +- 1e-6`.
pub fn classify(p: &StepPotential, lambda: f64) -> Result<Classification, Error> {
    if p.moments().norm() < FREE_NORM {
        return Ok(Classification { multiplicity: 3, disc: 0.0, boundary: false, unimodular: 3 });
    }
    let s = sample(p, lambda)?;
    let d = s.disc.re;
    if d.abs() > s.floor || s.floor == 0.0 {
        let multiplicity = if d < 0.0 { 1 } else { 3 };
        return Ok(Classification { multiplicity, disc: d, boundary: false, unimodular: s.unimodular });
    }
    let l = disc_at(p, lambda - 1e-6)?;
    let r = disc_at(p, lambda + 1e-6)?;
    let multiplicity = if l < 0.0 && r < 0.0 { 1 } else { 3 };
    Ok(Classification { multiplicity, disc: d, boundary: true, unimodular: s.unimodular })
}

fn bisect_sign_change(p: &StepPotential, mut neg: f64, mut pos: f64) -> Result<f64, Error> {
    while (pos - neg).abs() > 0.1 * ENDPOINT_TOL {
        let mid = 0.5 * (neg + pos);
        if mid == neg || mid == pos {
            break;
        }
        if disc_at(p, mid)? < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
    }
    Ok(0.5 * (neg + pos))
}

/// Golden-section minimum of D on `[a, b]`.
fn golden_min(p: &StepPotential, mut a: f64, mut b: f64) -> Result<(f64, f64), Error> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = disc_at(p, x1)?;
    let mut f2 = disc_at(p, x2)?;
    while b - a > ENDPOINT_TOL {
        if f1 < 0.0 || f2 < 0.0 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = disc_at(p, x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = disc_at(p, x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

fn branch_reality(p: &StepPotential, lambda: f64) -> Result<BranchReality, Error> {
    let mr = propagate(p, C64::new(lambda, 0.0))?;
    let mt: MultiplierTriple = multipliers(&mr, LabelRequest::Unordered)?;
    let ds = derived(&mt, mr.t, mr.t_tilde);
    let complex = (0..3)
        .filter(|&j| (mt.tau[j].norm() - 1.0).abs() > UNIMODULAR_BAND)
        .any(|j| ds.delta[j].im.abs() > 1e-9 * ds.delta[j].norm().max(1.0));
    Ok(if complex { BranchReality::Complex } else { BranchReality::Real })
}

fn grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| a + i as f64 * step).collect();
    if b - g[n] > 1e-12 {
        g.push(b);
    }
    g
}

/// Classifies a grid over `[a, b]`, refines every sign change of D to
/// 1e-9 and searches band-side local minima of D for narrow gaps and
/// kissing points.
pub fn scan(p: &StepPotential, a: f64, b: f64, step: f64) -> Result<SpectralScan, Error> {
    if !(b > a) || !(step > 0.0) || step > MAX_STEP || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scan needs b > a and 0 < step <= {MAX_STEP} (got [{a}, {b}], step {step})"
        )));
    }
    let lams = grid(a, b, step);
    let mut diagnostics = Vec::new();
    if p.moments().norm() < FREE_NORM {
        let points = lams
            .iter()
            .map(|&lambda| ScanPoint {
                lambda,
                disc: 0.0,
                disc_im: 0.0,
                phi: 0.0,
                t_abs: (C64::new(0.0, -lambda).exp() + C64::new(0.0, lambda).exp() * 2.0).norm(),
                multiplicity: 3,
                unimodular: 3,
                boundary: false,
            })
            .collect();
        diagnostics.push(Diagnostic::new("free-potential", None, "v = 0: the whole line is spectrum of multiplicity 3"));
        return Ok(SpectralScan {
            interval: (a, b),
            grid_step: step,
            points,
            gaps: vec![],
            kissing: vec![],
            diagnostics,
        });
    }

    let samples: Vec<Sample> = lams.par_iter().map(|&l| sample(p, l)).collect::<Result<_, _>>()?;
    let n = lams.len();
    let mut points: Vec<ScanPoint> = Vec::with_capacity(n);
    let mut sign: Vec<i8> = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(n - 1);
        let local = (lo..=hi).map(|k| samples[k].disc.re.abs()).fold(0.0, f64::max);
        let tol = if samples[i].floor == 0.0 { 0.0 } else { 1e-12 * local + samples[i].floor };
        let d = samples[i].disc.re;
        sign.push(if d < -tol {
            -1
        } else if d > tol {
            1
        } else {
            0
        });
        points.push(ScanPoint {
            lambda: lams[i],
            disc: d,
            disc_im: samples[i].disc.im,
            phi: samples[i].phi.norm(),
            t_abs: samples[i].t_abs,
            multiplicity: 3,
            unimodular: samples[i].unimodular,
            boundary: sign[i] == 0,
        });
    }
    // boundary points take the sign shared by both neighbours, otherwise
    // they belong to the closed set of multiplicity 3
    for i in 0..n {
        let m = if sign[i] < 0 {
            1
        } else if sign[i] > 0 {
            3
        } else {
            let l = if i > 0 { sign[i - 1] } else { sign[(i + 1).min(n - 1)] };
            let r = if i + 1 < n { sign[i + 1] } else { l };
            if l < 0 && r < 0 {
                1
            } else {
                3
            }
        };
        points[i].multiplicity = m;
        let expect = if m == 1 { 1 } else { 3 };
        if !points[i].boundary && points[i].unimodular != expect && points[i].disc.abs() > 1e-10 {
            diagnostics.push(Diagnostic::new(
                "classification-conflict",
                Some(lams[i]),
                format!(
                    "sign of D ({:.3e}) gives multiplicity {m} but {} multipliers are unimodular",
                    points[i].disc, points[i].unimodular
                ),
            ));
        }
        if points[i].disc > 1.0 + 1e-9 {
            diagnostics.push(Diagnostic::new("disc-above-one", Some(lams[i]), format!("D = {}", points[i].disc)));
        }
    }

    let mut gaps = Vec::new();
    let mut i = 0;
    while i < n {
        if points[i].multiplicity != 1 {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && points[i + 1].multiplicity == 1 {
            i += 1;
        }
        let end = i;
        let (lower, truncated_lower) = if start == 0 {
            (lams[0], true)
        } else {
            (bisect_sign_change(p, lams[start], lams[start - 1])?, false)
        };
        let (upper, truncated_upper) = if end == n - 1 {
            (lams[n - 1], true)
        } else {
            (bisect_sign_change(p, lams[end], lams[end + 1])?, false)
        };
        gaps.push((lower, upper, truncated_lower, truncated_upper));
        i += 1;
    }

    // band-side local minima: hidden narrow gaps or kissing points
    let mut kissing = Vec::new();
    let candidates: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| {
            points[i - 1].multiplicity == 3
                && points[i].multiplicity == 3
                && points[i + 1].multiplicity == 3
                && points[i].disc <= points[i - 1].disc
                && points[i].disc <= points[i + 1].disc
        })
        .collect();
    let refined: Vec<(usize, f64, f64)> = candidates
        .par_iter()
        .map(|&i| golden_min(p, lams[i - 1], lams[i + 1]).map(|(x, f)| (i, x, f)))
        .collect::<Result<_, _>>()?;
    for (i, x, f) in refined {
        let scale = points[i - 1].disc.max(points[i + 1].disc);
        let floor = samples[i].floor;
        if f < -(1e-12 * scale + floor) {
            let lower = bisect_sign_change(p, x, lams[i - 1])?;
            let upper = bisect_sign_change(p, x, lams[i + 1])?;
            gaps.push((lower, upper, false, false));
        } else if f <= 1e-9 * scale + 10.0 * floor {
            kissing.push(KissingPoint { lambda: x, disc: f });
        }
    }
    gaps.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut out_gaps = Vec::with_capacity(gaps.len());
    for (lower, upper, tl, tu) in gaps {
        let branch = branch_reality(p, 0.5 * (lower + upper))?;
        out_gaps.push(Gap { lower, upper, truncated_lower: tl, truncated_upper: tu, branch });
    }
    let narrow = out_gaps.iter().map(|g| g.width()).filter(|w| *w < 2.0 * step).fold(f64::INFINITY, f64::min);
    if narrow.is_finite() {
        diagnostics.push(Diagnostic::new(
            "resolution-warning",
            None,
            format!("gap of width {narrow:.3e} below twice the step; suggested step {:.3e}", narrow / 4.0),
        ));
    }
    for g in &out_gaps {
        diagnostics.push(Diagnostic::new(
            "gap-branch",
            Some(g.mid()),
            format!(
                "gap [{:.9}, {:.9}]: non-unimodular Lyapunov values {}",
                g.lower,
                g.upper,
                match g.branch {
                    BranchReality::Real => "real",
                    BranchReality::Complex => "complex pair",
                }
            ),
        ));
    }
    Ok(SpectralScan { interval: (a, b), grid_step: step, points, gaps: out_gaps, kissing, diagnostics })
}

/// Two sheets iff `sup |phi| <= 1e-8 (1 + sup |T|)` over the scan and the
/// potential is rank-one. Contradictory evidence is an error.
pub fn sheet_count(p: &StepPotential, scan: &SpectralScan) -> Result<SheetVerdict, Error> {
    let sup_phi = scan.points.iter().map(|q| q.phi).fold(0.0, f64::max);
    let sup_t = scan.points.iter().map(|q| q.t_abs).fold(0.0, f64::max);
    let m = p.moments();
    let rank_one = p.is_rank_one(p.default_rank_one_tol());
    let evidence = SheetEvidence { sup_phi, sup_t, beta1: m.beta[0], rank_one };
    let phi_small = sup_phi <= 1e-8 * (1.0 + sup_t);
    if phi_small && m.beta[0] > 1e-4 * m.norm_sq.max(1.0) {
        return Err(Error::ConflictingEvidence(format!(
            "sup|phi| = {sup_phi:.3e} vanishes but b1 = {:.3e}",
            m.beta[0]
        )));
    }
    if rank_one && sup_phi > 1e-6 * (1.0 + sup_t) {
        return Err(Error::ConflictingEvidence(format!("rank-one potential but sup|phi| = {sup_phi:.3e}")));
    }
    let sheets = if phi_small && rank_one { 2 } else { 3 };
    Ok(SheetVerdict { sheets, evidence })
}
