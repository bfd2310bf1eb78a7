//! Quasimomentum: `k_j = arccos Delta_j = i log eps(Delta_j)`, the averaged
//! imaginary part `q`, the trace constant `Q0` and the gap estimates.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{eigenvalues3, gauss_legendre};
use crate::monodromy::propagate;
use crate::multipliers::evaluate;
use crate::potential::StepPotential;
use crate::spectrum::{SpectralScan, FREE_NORM};
use crate::{Error, C64};

const I: C64 = C64::new(0.0, 1.0);

/// `eps(z) = z + sqrt(z^2 - 1)` on the branch with `|eps| >= 1`.
pub fn eps_map(z: C64) -> C64 {
    if z.norm() > 1e4 {
        // avoids cancellation in z - sqrt(z^2 - 1)
        return z * (C64::new(1.0, 0.0) + (C64::new(1.0, 0.0) - (z * z).inv()).sqrt());
    }
    let w = (z * z - 1.0).sqrt();
    let (a, b) = (z + w, z - w);
    if b.norm() > a.norm() {
        b
    } else {
        a
    }
}

/// `log|eps(z)|`, clamped at zero.
pub fn q_of(z: C64) -> f64 {
    eps_map(z).norm().ln().max(0.0)
}

/// `(q_1, q_2, q_3)` at a real `lambda`, sorted ascending.
///
/// `eps(Delta_j)` is `tau_j` or `1/tau_j`, so `q_j = |log|tau_j||`; this
/// skips the square root of `Delta^2 - 1`, which amplifies rounding near
/// `Delta = +-1`. The multipliers are taken as eigenvalues of `psi`, which
/// keeps `q = 0` in bands where the three multipliers cluster.
pub fn q_branches(p: &StepPotential, lambda: f64) -> Result<[f64; 3], Error> {
    let mr = propagate(p, C64::new(lambda, 0.0))?;
    let mut q = eigenvalues3(&mr.psi)?.map(|t| t.norm().ln().abs());
    q.sort_by(f64::total_cmp);
    Ok(q)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QProfile {
    pub grid: Vec<f64>,
    pub q_branches: Vec<[f64; 3]>,
    pub q_avg: Vec<f64>,
    /// Index into the scan's gap list for samples inside a gap.
    pub gap_attribution: Vec<Option<usize>>,
}

/// Offsets (as fractions of the gap width) added next to each gap endpoint,
/// where `q` vanishes like a square root.
const EDGE_FRACTIONS: [f64; 4] = [1e-6, 1e-4, 1e-2, 0.1];

pub fn q_profile(p: &StepPotential, scan: &SpectralScan) -> Result<QProfile, Error> {
    if p.moments().norm() < FREE_NORM {
        let grid: Vec<f64> = scan.points.iter().map(|s| s.lambda).collect();
        let n = grid.len();
        return Ok(QProfile { grid, q_branches: vec![[0.0; 3]; n], q_avg: vec![0.0; n], gap_attribution: vec![None; n] });
    }
    let mut grid: Vec<f64> = scan.points.iter().map(|s| s.lambda).collect();
    for g in &scan.gaps {
        let w = g.width();
        for f in EDGE_FRACTIONS {
            grid.push(g.lower + f * w);
            grid.push(g.upper - f * w);
        }
        grid.push(g.mid());
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let q_branches: Vec<[f64; 3]> = grid.par_iter().map(|&l| q_branches(p, l)).collect::<Result<_, _>>()?;
    let q_avg = q_branches.iter().map(|q| (q[0] + q[1] + q[2]) / 3.0).collect();
    let gap_attribution = grid
        .iter()
        .map(|&l| scan.gaps.iter().position(|g| l > g.lower && l < g.upper))
        .collect();
    Ok(QProfile { grid, q_branches, q_avg, gap_attribution })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapIntegral {
    pub lower: f64,
    pub upper: f64,
    /// `(1/pi) int q_avg` over the gap.
    pub value: f64,
    /// Difference between the last two quadrature orders.
    pub error: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Q0Integral {
    pub value: f64,
    /// Extrapolated contribution of gaps outside the window.
    pub tail: f64,
    pub gaps: Vec<GapIntegral>,
}

fn gap_integral(p: &StepPotential, lo: f64, hi: f64) -> Result<GapIntegral, Error> {
    let w = hi - lo;
    // lambda = lo + w sin^2 theta absorbs the square-root vanishing of q
    let rule = |n: usize| -> Result<f64, Error> {
        let (x, wt) = gauss_legendre(n);
        let h = std::f64::consts::FRAC_PI_4;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&wt) {
            let th = h * (xi + 1.0);
            let l = lo + w * th.sin().powi(2);
            let q = q_branches(p, l)?;
            s += wi * h * (q[0] + q[1] + q[2]) / 3.0 * w * (2.0 * th).sin();
        }
        Ok(s / std::f64::consts::PI)
    };
    let mut n = 16;
    let mut prev = rule(n)?;
    loop {
        let next = rule(2 * n)?;
        let err = (next - prev).abs();
        n *= 2;
        if err <= 1e-10 * next.abs().max(1e-14) || n >= 256 {
            return Ok(GapIntegral { lower: lo, upper: hi, value: next, error: err, nodes: n });
        }
        prev = next;
    }
}

/// Geometric extrapolation from the two outermost gaps of one side,
/// ordered from the center outwards. Gaps closer to the center than
/// `inner_limit` do not show the decay and give no tail.
fn side_tail(gaps: &[&GapIntegral], inner_limit: impl Fn(&GapIntegral) -> bool) -> f64 {
    match gaps {
        [.., prev, last] if !inner_limit(prev) => {
            let r = if prev.value > 0.0 { last.value / prev.value } else { 1.0 };
            if r < 1.0 {
                last.value * r / (1.0 - r)
            } else {
                last.value
            }
        }
        _ => 0.0,
    }
}

/// `Q0 = (1/pi) int q_avg` as a sum of per-gap quadratures over the scan's
/// gaps. Fails with `WindowTooSmall` when the gaps within `2 pi` of either
/// end of the window carry more than 1% of the total.
pub fn q0_integral(p: &StepPotential, scan: &SpectralScan) -> Result<Q0Integral, Error> {
    let gaps: Vec<GapIntegral> = scan
        .gaps
        .par_iter()
        .map(|g| gap_integral(p, g.lower, g.upper))
        .collect::<Result<_, _>>()?;
    let value: f64 = gaps.iter().map(|g| g.value).sum();
    if gaps.is_empty() || value == 0.0 {
        return Ok(Q0Integral { value, tail: 0.0, gaps });
    }
    let truncated = scan.gaps.iter().any(|g| g.truncated_lower || g.truncated_upper);
    let (a, b) = scan.interval;
    let mid = 0.5 * (a + b);
    let left: Vec<&GapIntegral> = gaps.iter().filter(|g| g.upper <= mid).rev().collect();
    let right: Vec<&GapIntegral> = gaps.iter().filter(|g| g.lower > mid).collect();
    // gaps in the outermost 2 pi at either end of the window
    let span = std::f64::consts::TAU.min(0.25 * (b - a));
    let outer: f64 = gaps.iter().filter(|g| g.lower < a + span || g.upper > b - span).map(|g| g.value).sum();
    let fraction = outer / value;
    if fraction > 0.01 || truncated {
        return Err(Error::WindowTooSmall { fraction });
    }
    let half = 0.25 * (b - a);
    let tail = side_tail(&left, |g| g.upper > mid - half) + side_tail(&right, |g| g.lower < mid + half);
    Ok(Q0Integral { value, tail, gaps })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HerglotzFit {
    pub nu: Vec<f64>,
    /// `Im(kk(i nu) - i nu)` at each `nu`.
    pub excess: Vec<f64>,
    /// Fitted `c` in `kk(i nu) = i nu + i c / nu (+ i d / nu^3)`.
    pub q0: f64,
    pub d: f64,
    pub max_residual: f64,
}

/// Averaged quasimomentum `kk(i nu)`, with the phase sum unwrapped from
/// `prev_phase`. Returns `(kk, phase sum)`.
fn kk_at(p: &StepPotential, nu: f64, prev_phase: Option<f64>) -> Result<(C64, f64), Error> {
    let (_, _, ds) = evaluate(p, C64::new(0.0, nu))?;
    let eps = ds.delta.map(eps_map);
    let modsum: f64 = eps.iter().map(|e| e.norm().ln()).sum();
    let mut phase: f64 = eps.iter().map(|e| e.arg()).sum();
    if let Some(prev) = prev_phase {
        let tau = std::f64::consts::TAU;
        phase -= tau * ((phase - prev) / tau).round();
        if (phase - prev).abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::BranchTracking { nu, reason: format!("phase jump {:.3}", phase - prev) });
        }
    }
    // k_j = i log eps_j
    let kk = I * C64::new(modsum, phase) / 3.0;
    Ok((kk, phase))
}

/// Fits `Q0` from `kk(i nu) = i nu - Q0/(i nu)` with a `1/nu^3` correction.
/// The branch is followed up the imaginary axis from `nu = 10` in steps of
/// at most 2.5.
pub fn herglotz_asymptotic(p: &StepPotential, nu_list: &[f64]) -> Result<HerglotzFit, Error> {
    if nu_list.len() < 2 || nu_list.iter().any(|&n| !(n >= 10.0) || !n.is_finite()) {
        return Err(Error::InvalidArgument("need at least two nu values, all >= 10".into()));
    }
    let mut nus = nu_list.to_vec();
    nus.sort_by(f64::total_cmp);
    let mut path = vec![10.0];
    for &n in &nus {
        let last = *path.last().unwrap();
        let k = ((n - last) / 2.5).ceil().max(0.0) as usize;
        for i in 1..=k {
            path.push(last + (n - last) * i as f64 / k as f64);
        }
    }
    let mut phase = None;
    let mut excess = Vec::new();
    for &n in &path {
        let (kk, ph) = kk_at(p, n, phase)?;
        phase = Some(ph);
        if nus.iter().any(|&m| (m - n).abs() < 1e-12) {
            excess.push((kk - I * n).im);
        }
    }
    // least squares for (c, d) in excess = c/nu + d/nu^3
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (n, e) in nus.iter().zip(&excess) {
        let (f1, f2) = (1.0 / n, 1.0 / n.powi(3));
        a11 += f1 * f1;
        a12 += f1 * f2;
        a22 += f2 * f2;
        b1 += f1 * e;
        b2 += f2 * e;
    }
    let det = a11 * a22 - a12 * a12;
    let (q0, d) = if nus.len() >= 3 && det.abs() > 1e-300 {
        ((b1 * a22 - b2 * a12) / det, (a11 * b2 - a12 * b1) / det)
    } else {
        (b1 / a11, 0.0)
    };
    let max_residual = nus
        .iter()
        .zip(&excess)
        .map(|(n, e)| (e - q0 / n - d / n.powi(3)).abs())
        .fold(0.0, f64::max);
    Ok(HerglotzFit { nu: nus, excess, q0, d, max_residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundSample {
    pub lambda: f64,
    pub q: f64,
    pub disc_abs: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub samples: Vec<BoundSample>,
    pub slack: f64,
}

impl BoundsReport {
    pub fn lower_holds(&self) -> bool {
        self.samples.iter().all(|s| s.lower_ok)
    }

    pub fn upper_holds(&self) -> bool {
        self.samples.iter().all(|s| s.upper_ok)
    }
}

/// `sinh^2 q (cosh q - 1)^2 / 4 <= |D| <= sinh^2(2q)/16` at `count` interior
/// gap samples spread over the scan's gaps, with `q = max_j q_j`.
pub fn discriminant_bounds_check(p: &StepPotential, scan: &SpectralScan, count: usize) -> Result<BoundsReport, Error> {
    let slack = 1e-8;
    let gaps: Vec<_> = scan.gaps.iter().filter(|g| !g.truncated_lower && !g.truncated_upper).collect();
    let mut lams = Vec::new();
    if !gaps.is_empty() {
        let per = count.div_ceil(gaps.len());
        for g in &gaps {
            for k in 0..per {
                lams.push(g.lower + g.width() * (k as f64 + 0.5) / per as f64);
            }
        }
        lams.truncate(count);
    }
    let samples = lams
        .par_iter()
        .map(|&l| -> Result<BoundSample, Error> {
            let (_, _, ds) = evaluate(p, C64::new(l, 0.0))?;
            let q = ds.delta.map(q_of).into_iter().fold(0.0, f64::max);
            let lower = q.sinh().powi(2) * (q.cosh() - 1.0).powi(2) / 4.0;
            let upper = (2.0 * q).sinh().powi(2) / 16.0;
            let disc_abs = ds.disc.norm();
            Ok(BoundSample {
                lambda: l,
                q,
                disc_abs,
                lower,
                upper,
                lower_ok: lower <= disc_abs + slack,
                upper_ok: disc_abs <= upper + slack,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(BoundsReport { samples, slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eps_examples() {
        assert!((eps_map(c(2.0, 0.0)) - (2.0 + 3f64.sqrt())).norm() < 1e-14);
        assert!((eps_map(c(0.5, 0.0)).norm() - 1.0).abs() < 1e-15);
        let e = eps_map(c(0.0, 10.0));
        assert!((e.norm() / 20.0 - 1.0).abs() < 0.01);
        for z in [c(3.0, 1.0), c(-0.2, 0.5), c(1e6, -3e5), c(-2.0, -1e-3)] {
            let e = eps_map(z);
            assert!(e.norm() >= 1.0);
            assert!((eps_map(z.conj()) - e.conj()).norm() <= 1e-12 * e.norm());
            // the other branch is 1/eps: eps + 1/eps = 2z
            assert!((e + e.inv() - z * 2.0).norm() <= 1e-12 * e.norm(), "{z}");
        }
    }

    #[test]
    fn free_profile_vanishes() {
        let p = Potential::zero().with_resolution(32).unwrap().canonicalize();
        let s = crate::spectrum::scan(&p, -3.0, 3.0, 0.05).unwrap();
        let q = q_profile(&p, &s).unwrap();
        assert!(q.q_avg.iter().all(|&x| x <= 1e-12));
        assert_eq!(q0_integral(&p, &s).unwrap().value, 0.0);
        let h = herglotz_asymptotic(&p, &[20.0, 40.0, 80.0]).unwrap();
        assert!(h.q0.abs() < 1e-10);
    }

    #[test]
    fn herglotz_rejects_small_nu() {
        let p = Potential::zero().with_resolution(32).unwrap().canonicalize();
        assert!(herglotz_asymptotic(&p, &[5.0, 20.0]).is_err());
    }
}
