//! 2-periodic eigenvalues: zeros of `D_+ = D(1, .)` (periodic) and
//! `D_- = D(-1, .)` (antiperiodic), their asymptotics, Hadamard products and
//! trace recovery.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{gauss_legendre, Contour};
use crate::monodromy::{propagate, MonodromyResult};
use crate::potential::StepPotential;
use crate::{Diagnostic, Error, C64};

const I: C64 = C64::new(0.0, 1.0);

pub const NEWTON_STEP: f64 = 1e-6;
pub const NEWTON_TOL: f64 = 1e-11;
pub const MIN_CELL: f64 = 1e-3;
const CLUSTER_RADIUS: f64 = 1e-5;
const NOISE_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Periodic,
    Antiperiodic,
}

impl Parity {
    /// The multiplier value `+-1` whose zeros this parity tracks.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Periodic => 1.0,
            Parity::Antiperiodic => -1.0,
        }
    }

    /// Even `n` sit at zeros of `D_+`, odd `n` at zeros of `D_-`.
    pub fn of_index(n: i64) -> Parity {
        if n.rem_euclid(2) == 0 {
            Parity::Periodic
        } else {
            Parity::Antiperiodic
        }
    }
}

/// `D_+ = (T-1) - e^{i lambda}(T~-1)`, `D_- = (T+1) + e^{i lambda}(T~+1)`.
pub fn d_pm_from(mr: &MonodromyResult, sign: f64) -> C64 {
    let e = (I * mr.lambda).exp();
    if sign > 0.0 {
        (mr.t - 1.0) - e * (mr.t_tilde - 1.0)
    } else {
        (mr.t + 1.0) + e * (mr.t_tilde + 1.0)
    }
}

pub fn d_pm(p: &StepPotential, lambda: C64, sign: f64) -> Result<C64, Error> {
    Ok(d_pm_from(&propagate(p, lambda)?, sign))
}

/// `T = (D_- + D_+)/2 - e^{i lambda}`, `T~ = e^{-i lambda}(D_- - D_+)/2 - e^{-i lambda}`.
pub fn recover_traces(dp: C64, dm: C64, lambda: C64) -> (C64, C64) {
    let e = (I * lambda).exp();
    let ei = (-I * lambda).exp();
    ((dm + dp) * 0.5 - e, ei * (dm - dp) * 0.5 - ei)
}

/// Zeros of `D_parity` inside `|lambda - center| < radius`. If the contour
/// passes too close to a zero, the radius is nudged by +-5% (up to 4 tries).
pub fn count_in_disk(p: &StepPotential, center: f64, radius: f64, parity: Parity) -> Result<i64, Error> {
    let s = parity.sign();
    let mut last = None;
    for factor in [1.0, 1.05, 0.95, 1.10, 0.90] {
        let ctr = Contour::new(C64::new(center, 0.0), radius * factor, 64)?;
        let f = |z: C64| d_pm(p, z, s);
        // a zero within 1e-6 of the circle shows up as a small minimum
        // modulus relative to the typical one
        match ctr.count_zeros(f, 1 << 14) {
            Ok(n) => return Ok(n),
            Err(e @ Error::ContourThroughZero { .. }) | Err(e @ Error::WindingResidual(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::EigenSearch {
        center,
        reason: format!("contour-through-zero after nudging: {}", last.map(|e| e.to_string()).unwrap_or_default()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenEntry {
    pub n: i64,
    pub j: usize,
    pub z: C64,
    pub parity: Parity,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenvalueTable {
    pub entries: Vec<EigenEntry>,
    pub window: (i64, i64),
    /// Winding count per disk (`None` when counting failed).
    pub counts: Vec<(i64, Option<i64>)>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn center(&self) -> C64 {
        C64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn size(&self) -> f64 {
        (self.x1 - self.x0).max(self.y1 - self.y0)
    }

    fn contains(&self, z: C64, margin: f64) -> bool {
        z.re >= self.x0 - margin && z.re <= self.x1 + margin && z.im >= self.y0 - margin && z.im <= self.y1 + margin
    }

    fn around(z: C64, half: f64) -> Rect {
        Rect { x0: z.re - half, x1: z.re + half, y0: z.im - half * 0.77, y1: z.im + half * 1.23 }
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.x0, self.y0),
            C64::new(self.x1, self.y0),
            C64::new(self.x1, self.y1),
            C64::new(self.x0, self.y1),
        ]
    }
}

/// Zero count and power sums `s_k = sum (z_j - c)^k`, k = 1..=3, for the
/// zeros inside a rectangle, by the argument principle with `log D`
/// integrated by parts.
struct CellData {
    count: i64,
    sums: [C64; 3],
}

fn rect_data<F>(f: &F, r: &Rect) -> Result<CellData, Error>
where
    F: Fn(C64) -> Result<C64, Error> + Sync,
{
    let (gx, gw) = gauss_legendre(16);
    let corners = r.corners();
    let ctr = r.center();
    let mut panels = 2usize;
    loop {
        // path: corner, GL nodes of the edge's panels, next corner, ...
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            pts.push(a);
            wts.push(C64::new(0.0, 0.0));
            for k in 0..panels {
                let pa = a + (b - a) * (k as f64 / panels as f64);
                let pb = a + (b - a) * ((k + 1) as f64 / panels as f64);
                for (x, w) in gx.iter().zip(&gw) {
                    pts.push(pa + (pb - pa) * (0.5 * (x + 1.0)));
                    wts.push((pb - pa) * (0.5 * w));
                }
            }
        }
        let vals: Vec<C64> = pts.par_iter().map(|&z| f(z)).collect::<Result<_, _>>()?;
        match crate::algebra::winding_count(&vals) {
            Err(Error::Undersampled { .. }) if panels < 16 => {
                panels *= 2;
                continue;
            }
            Err(e) => return Err(e),
            Ok(count) => {
                let mut log = vals[0].ln();
                let mut integral = [C64::new(0.0, 0.0); 3];
                for j in 0..pts.len() {
                    if j > 0 {
                        let ratio = vals[j] / vals[j - 1];
                        log += C64::new(ratio.norm().ln(), ratio.arg());
                    }
                    let w = pts[j] - ctr;
                    let mut wk = C64::new(1.0, 0.0);
                    for item in integral.iter_mut() {
                        *item += wts[j] * wk * log;
                        wk *= w;
                    }
                }
                let w0 = pts[0] - ctr;
                let mut sums = [C64::new(0.0, 0.0); 3];
                for k in 1..=3 {
                    sums[k - 1] = w0.powi(k as i32) * count as f64
                        - integral[k - 1] * (k as f64) / (I * 2.0 * PI);
                }
                return Ok(CellData { count, sums });
            }
        }
    }
}

/// Roots of the monic polynomial with power sums `s` and degree `n <= 3`.
fn roots_from_sums(s: &[C64; 3], n: i64) -> Result<Vec<C64>, Error> {
    let e1 = s[0];
    let e2 = (e1 * s[0] - s[1]) * 0.5;
    let e3 = (e2 * s[0] - e1 * s[1] + s[2]) / 3.0;
    Ok(match n {
        0 => vec![],
        1 => vec![e1],
        2 => {
            let d = (e1 * e1 - e2 * 4.0).sqrt();
            vec![(e1 + d) * 0.5, (e1 - d) * 0.5]
        }
        3 => crate::algebra::cubic_roots([-e3, e2, -e1])?.to_vec(),
        _ => return Err(Error::InvalidArgument("degree above 3".into())),
    })
}

/// Groups estimates closer than `radius` into (centroid, size).
fn group(est: &[C64], radius: f64) -> Vec<(C64, usize)> {
    let mut out: Vec<(C64, usize)> = Vec::new();
    for &z in est {
        match out.iter_mut().find(|(c, _)| (*c - z).norm() < radius) {
            Some((c, m)) => {
                *c = (*c * *m as f64 + z) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => out.push((z, 1)),
        }
    }
    out
}

struct Polished {
    z: C64,
    converged: bool,
    last_step: f64,
}

fn newton<F>(f: &F, z0: C64, mult: f64) -> Result<Polished, Error>
where
    F: Fn(C64) -> Result<C64, Error>,
{
    let h = NEWTON_STEP;
    // a cluster is resolved once steps reach its own spread
    let tol = if mult > 1.0 { 1e-9 } else { NEWTON_TOL };
    let mut z = z0;
    let mut last = f64::INFINITY;
    let mut slow = 0;
    for _ in 0..30 {
        let fz = f(z)?;
        // at the rounding floor of D the step is noise
        if fz.norm() <= NOISE_FLOOR * z.im.abs().exp() {
            return Ok(Polished { z, converged: true, last_step: 0.0 });
        }
        let d = (f(z + h)? - f(z - h)?) / (2.0 * h);
        if d == C64::new(0.0, 0.0) {
            break;
        }
        let dz = fz / d * mult;
        z -= dz;
        if !(z.re.is_finite() && z.im.is_finite()) {
            break;
        }
        let step = dz.norm();
        if step <= tol {
            return Ok(Polished { z, converged: true, last_step: step });
        }
        // linear convergence means an unresolved multiple zero
        slow = if step > 0.3 * last { slow + 1 } else { 0 };
        last = step;
        if slow >= 4 && step < 1e-5 {
            break;
        }
    }
    Ok(Polished { z, converged: false, last_step: last })
}

fn muller<F>(f: &F, z0: C64) -> Result<Polished, Error>
where
    F: Fn(C64) -> Result<C64, Error>,
{
    let (mut x0, mut x1, mut x2) = (z0 - 1e-4, z0 + 1e-4, z0);
    let (mut f0, mut f1, mut f2) = (f(x0)?, f(x1)?, f(x2)?);
    let mut last = f64::INFINITY;
    for _ in 0..64 {
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let d1 = (f1 - f0) / h1;
        let d2 = (f2 - f1) / h2;
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - a * f2 * 4.0).sqrt();
        let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
        if den == C64::new(0.0, 0.0) {
            break;
        }
        let dx = -f2 * 2.0 / den;
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        x2 += dx;
        f2 = f(x2)?;
        last = dx.norm();
        if last <= NEWTON_TOL {
            return Ok(Polished { z: x2, converged: true, last_step: last });
        }
    }
    Ok(Polished { z: x2, converged: false, last_step: last })
}

fn polish<F>(f: &F, z0: C64, mult: f64) -> Result<Polished, Error>
where
    F: Fn(C64) -> Result<C64, Error>,
{
    let r = newton(f, z0, mult)?;
    if r.converged || mult > 1.0 || r.last_step < 1e-5 {
        return Ok(r);
    }
    muller(f, z0)
}

/// Polishes moment estimates; coincident results are merged into clusters
/// whose multiplicity is confirmed by a count in a small cell.
fn resolve<F>(f: &F, r: &Rect, est: &[C64], count: i64) -> Result<Option<Vec<C64>>, Error>
where
    F: Fn(C64) -> Result<C64, Error> + Sync,
{
    let mut found: Vec<(C64, usize, bool)> = Vec::new();
    for (c0, m) in group(est, CLUSTER_RADIUS) {
        let q = polish(f, c0, m as f64)?;
        found.push((q.z, m, q.converged));
    }
    while let Some((a, b)) = (0..found.len())
        .flat_map(|a| (0..a).map(move |b| (a, b)))
        .find(|&(a, b)| (found[a].0 - found[b].0).norm() < 1e-7)
    {
        let (za, ma, _) = found.remove(a);
        let (zb, mb, _) = found.remove(b);
        let m = ma + mb;
        let q = polish(f, (za * ma as f64 + zb * mb as f64) / m as f64, m as f64)?;
        found.push((q.z, m, q.converged));
    }
    let total: usize = found.iter().map(|x| x.1).sum();
    if total as i64 != count || !found.iter().all(|x| x.2 && r.contains(x.0, 1e-9)) {
        return Ok(None);
    }
    for (i, &(z, m, _)) in found.iter().enumerate() {
        if m == 1 {
            continue;
        }
        let gap = found
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, x)| (x.0 - z).norm())
            .fold(f64::INFINITY, f64::min);
        let half = (0.5 * MIN_CELL).min(0.4 * gap);
        match rect_data(f, &Rect::around(z, half)) {
            Ok(d) if d.count == m as i64 => {}
            _ => return Ok(None),
        }
    }
    Ok(Some(found.into_iter().flat_map(|(z, m, _)| std::iter::repeat(z).take(m)).collect()))
}

/// Split coordinate in the middle of `[a, b]`, as far from the hints as the
/// candidates allow.
fn pick_split(a: f64, b: f64, hints: &[f64], attempt: usize) -> f64 {
    let w = b - a;
    let shift = 0.0137 * attempt as f64;
    [0.5, 0.45, 0.55, 0.4, 0.6, 0.35, 0.65]
        .iter()
        .map(|t| a + (t + shift) * w)
        .max_by(|x, y| {
            let dist = |s: f64| hints.iter().map(|h| (h - s).abs()).fold(f64::INFINITY, f64::min);
            // prefer the middle when hints are far away anyway
            let score = |s: f64| dist(s).min(0.1 * w) - 1e-3 * (s - 0.5 * (a + b)).abs();
            score(*x).total_cmp(&score(*y))
        })
        .unwrap()
}

const MAX_DEPTH: usize = 24;

/// Zeros of `f` in a rectangle, each repeated by multiplicity.
fn solve_rect<F>(f: &F, r: &Rect, depth: usize, diags: &mut Vec<Diagnostic>) -> Result<Vec<C64>, Error>
where
    F: Fn(C64) -> Result<C64, Error> + Sync,
{
    let data = rect_data(f, r)?;
    if data.count == 0 {
        return Ok(vec![]);
    }
    let ctr = r.center();
    let small = r.size() <= MIN_CELL || depth >= MAX_DEPTH;
    let mut hints = Vec::new();
    if data.count <= 3 {
        let est: Vec<C64> = roots_from_sums(&data.sums, data.count)?.into_iter().map(|z| z + ctr).collect();
        if let Some(z) = resolve(f, r, &est, data.count)? {
            return Ok(z);
        }
        if small {
            // cluster below cell resolution: polish its centroid with the
            // multiplicity-aware Newton step and repeat it
            let m = data.count as f64;
            let centroid = data.sums[0] / m + ctr;
            let q = polish(f, centroid, m)?;
            if !q.converged {
                diags.push(Diagnostic::new(
                    "newton-stagnation",
                    Some(centroid.re),
                    format!("cluster of {} zeros did not converge", data.count),
                ));
            }
            let z = if r.contains(q.z, 1e-9) { q.z } else { centroid };
            return Ok(vec![z; data.count as usize]);
        }
        hints = est;
    } else if small {
        diags.push(Diagnostic::new(
            "cell-unresolved",
            Some(ctr.re),
            format!("{} zeros left in a cell of size {:.1e}", data.count, r.size()),
        ));
        return Ok(vec![data.sums[0] / data.count as f64 + ctr; data.count as usize]);
    }
    let hx: Vec<f64> = hints.iter().map(|z| z.re).collect();
    let hy: Vec<f64> = hints.iter().map(|z| z.im).collect();
    let mut last_err = None;
    for attempt in 0..4 {
        let xm = pick_split(r.x0, r.x1, &hx, attempt);
        let ym = pick_split(r.y0, r.y1, &hy, attempt);
        let kids = [
            Rect { x0: r.x0, x1: xm, y0: r.y0, y1: ym },
            Rect { x0: xm, x1: r.x1, y0: r.y0, y1: ym },
            Rect { x0: r.x0, x1: xm, y0: ym, y1: r.y1 },
            Rect { x0: xm, x1: r.x1, y0: ym, y1: r.y1 },
        ];
        let mut out = Vec::new();
        let mut kid_diags = Vec::new();
        let res: Result<(), Error> = kids.iter().try_for_each(|k| {
            out.extend(solve_rect(f, k, depth + 1, &mut kid_diags)?);
            Ok(())
        });
        match res {
            Ok(()) => {
                diags.extend(kid_diags);
                if out.len() as i64 != data.count {
                    diags.push(Diagnostic::new(
                        "count-mismatch",
                        Some(ctr.re),
                        format!("children hold {} zeros, parent {}", out.len(), data.count),
                    ));
                }
                return Ok(out);
            }
            Err(e @ (Error::ContourThroughZero { .. } | Error::Undersampled { .. } | Error::WindingResidual(_))) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::Singular))
}

/// The three zeros near `pi n` of `D_+` (even n) or `D_-` (odd n).
pub fn eigenvalues_near(p: &StepPotential, n: i64) -> (Vec<EigenEntry>, Option<i64>, Vec<Diagnostic>) {
    let parity = Parity::of_index(n);
    let s = parity.sign();
    let center = PI * n as f64;
    let mut diags = Vec::new();
    let count = match count_in_disk(p, center, 0.5, parity) {
        Ok(c) => {
            if c != 3 {
                diags.push(Diagnostic::new("count", Some(center), format!("disk around pi*{n} holds {c} zeros, expected 3")));
            }
            Some(c)
        }
        Err(e) => {
            diags.push(Diagnostic::new("count-failed", Some(center), e.to_string()));
            None
        }
    };
    let f = |z: C64| d_pm(p, z, s);
    // offset in Im so the real axis never lies on a cell edge
    let root = Rect { x0: center - 0.5, x1: center + 0.5, y0: -1.0 / 3.0, y1: 2.0 / 3.0 };
    let zs = match solve_rect(&f, &root, 0, &mut diags) {
        Ok(z) => z,
        Err(e) => {
            diags.push(Diagnostic::new("root-search-failed", Some(center), e.to_string()));
            vec![]
        }
    };
    let mut zs = zs;
    zs.sort_by(|a, b| a.re.total_cmp(&b.re));
    let entries = zs
        .into_iter()
        .enumerate()
        .map(|(j, z)| {
            let residual = f(z).map(|d| d.norm()).unwrap_or(f64::INFINITY);
            EigenEntry { n, j: j + 1, z, parity, residual }
        })
        .collect();
    (entries, count, diags)
}

/// Eigenvalue table for `n_min <= n <= n_max`. Failures are reported per
/// disk and never abort the window.
pub fn eigenvalues_in_window(p: &StepPotential, n_min: i64, n_max: i64) -> Result<EigenvalueTable, Error> {
    if n_min > n_max {
        return Err(Error::InvalidArgument(format!("empty window [{n_min}, {n_max}]")));
    }
    let per: Vec<_> = (n_min..=n_max).into_par_iter().map(|n| (n, eigenvalues_near(p, n))).collect();
    let mut table = EigenvalueTable { entries: vec![], window: (n_min, n_max), counts: vec![], diagnostics: vec![] };
    for (n, (entries, count, diags)) in per {
        for e in &entries {
            if e.residual > 1e-9 * e.z.im.abs().exp() {
                table.diagnostics.push(Diagnostic::new(
                    "residual",
                    Some(e.z.re),
                    format!("|D(z)| = {:.3e} at n = {n}, j = {}", e.residual, e.j),
                ));
            }
        }
        table.entries.extend(entries);
        table.counts.push((n, count));
        table.diagnostics.extend(diags);
    }
    Ok(table)
}

/// Deviation of each eigenvalue from the first-order prediction
/// `pi n + zeta |v_hat(-pi n)|`, `zeta = (-1, 0, 1)` by sorted order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticRow {
    pub n: i64,
    pub v_hat: f64,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub rows: Vec<AsymptoticRow>,
    pub delta: f64,
    /// Partial sums of `max_deviation^delta` in order of increasing |n|.
    pub partial_sums: Vec<f64>,
    /// Least-squares slope of `log max_deviation` against `log |n|`.
    pub decay_rate: Option<f64>,
}

pub fn asymptotic_residuals(table: &EigenvalueTable, p: &StepPotential) -> AsymptoticReport {
    let delta = 1.5;
    let mut rows = Vec::new();
    for n in table.window.0..=table.window.1 {
        let mut zs: Vec<C64> = table.entries.iter().filter(|e| e.n == n).map(|e| e.z).collect();
        if zs.len() != 3 {
            continue;
        }
        zs.sort_by(|a, b| a.re.total_cmp(&b.re));
        let vh = p.fourier_hat(C64::new(-PI * n as f64, 0.0));
        let v_hat = (vh[0].norm_sqr() + vh[1].norm_sqr()).sqrt();
        let deviations: Vec<f64> = zs
            .iter()
            .zip([-1.0, 0.0, 1.0])
            .map(|(z, zeta)| (z - (PI * n as f64 + zeta * v_hat)).norm())
            .collect();
        let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
        rows.push(AsymptoticRow { n, v_hat, deviations, max_deviation });
    }
    let mut order: Vec<&AsymptoticRow> = rows.iter().collect();
    order.sort_by_key(|r| r.n.abs());
    let mut acc = 0.0;
    let partial_sums = order
        .iter()
        .map(|r| {
            acc += r.max_deviation.powf(delta);
            acc
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n != 0 && r.max_deviation > 0.0)
        .map(|r| ((r.n.abs() as f64).ln(), r.max_deviation.ln()))
        .collect();
    let decay_rate = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    AsymptoticReport { rows, delta, partial_sums, decay_rate }
}

/// Truncated Hadamard product `D0 e^{i lambda/2} prod (1 - lambda/k)` over the
/// table's zeros of the given parity, symmetric in n. Returns the value and
/// the relative change caused by the outermost pair of disks.
pub fn hadamard_eval(table: &EigenvalueTable, d0: C64, lambda: C64, parity: Parity) -> Result<(C64, f64), Error> {
    if d0.norm() < 1e-12 {
        return Err(Error::ZeroAtOrigin(d0.norm()));
    }
    let nmax = table.window.0.abs().min(table.window.1.abs());
    let mut value = d0 * (I * lambda * 0.5).exp();
    let mut shell = C64::new(1.0, 0.0);
    let mut shell_n = -1;
    for n in 0..=nmax {
        let mut factor = C64::new(1.0, 0.0);
        for e in table.entries.iter().filter(|e| e.parity == parity && e.n.abs() == n) {
            factor *= C64::new(1.0, 0.0) - lambda / e.z;
        }
        value *= factor;
        if Parity::of_index(n) == parity {
            shell = factor;
            shell_n = n;
        }
    }
    let change = if shell_n >= 0 { (shell - 1.0).norm() } else { 0.0 };
    Ok((value, change))
}

/// Smallest `n0 >= 0` with three zeros in every disk `n0 <= |n| <= n0 + 5`.
pub fn n_star(p: &StepPotential, max_n: i64) -> Result<i64, Error> {
    let ok = |n: i64| -> bool {
        [n, -n]
            .iter()
            .all(|&m| count_in_disk(p, PI * m as f64, 0.5, Parity::of_index(m)).map(|c| c == 3).unwrap_or(false))
    };
    let good: Vec<bool> = (0..=max_n + 5).map(ok).collect();
    (0..=max_n)
        .find(|&n0| (n0..=n0 + 5).all(|n| good[n as usize]))
        .ok_or_else(|| Error::EigenSearch { center: 0.0, reason: format!("no n* <= {max_n}") })
}

/// Zeros of `D_+` in `|lambda| < 2 pi (m + 1/2)`.
pub fn big_disk_count(p: &StepPotential, m: i64) -> Result<i64, Error> {
    let ctr = Contour::new(C64::new(0.0, 0.0), 2.0 * PI * (m as f64 + 0.5), 1024)?;
    ctr.count_zeros(|z| d_pm(p, z, 1.0), 1 << 15)
}
