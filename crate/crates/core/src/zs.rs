//! Independent 2x2 Zakharov-Shabat oracle for rank-one potentials.
//!
//! Shares nothing with the 3x3 path except the step grid: each step uses the
//! closed form `exp(G) = cosh(mu) I + sinh(mu)/mu G`, `mu^2 = -det G`.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::CMat2;
use crate::potential::StepPotential;
use crate::{Error, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Scalar potential `u` on a step grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSteps {
    /// `(x0, width, u)`
    pub steps: Vec<(f64, f64, C64)>,
}

impl ScalarSteps {
    pub fn norm(&self) -> f64 {
        self.steps.iter().map(|s| s.1 * s.2.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `int_0^1 e^{2 i lambda x} u(x) dx`
    pub fn fourier_hat(&self, lambda: C64) -> C64 {
        let k = I * lambda * 2.0;
        self.steps.iter().map(|&(x0, w, u)| u * (k * x0).exp() * w * crate::potential::phi1(k * w)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZSResult {
    pub y1: CMat2,
    pub delta_zs: C64,
    pub q_zs: f64,
    pub lambda: C64,
}

fn step_exp(lambda: C64, u: C64, w: f64) -> CMat2 {
    let g = CMat2([[-I * lambda * w, I * u.conj() * w], [-I * u * w, I * lambda * w]]);
    let mu2 = (C64::new(u.norm_sqr(), 0.0) - lambda * lambda) * (w * w);
    let mu = mu2.sqrt();
    let (ch, sh) = if mu.norm() < 1e-4 {
        (C64::new(1.0, 0.0) + mu2 / 2.0 + mu2 * mu2 / 24.0, C64::new(1.0, 0.0) + mu2 / 6.0 + mu2 * mu2 / 120.0)
    } else {
        (mu.cosh(), mu.sinh() / mu)
    };
    CMat2([
        [ch + sh * g.0[0][0], sh * g.0[0][1]],
        [sh * g.0[1][0], ch + sh * g.0[1][1]],
    ])
}

/// `log|eps(z)|` with `eps(z) = z + sqrt(z^2 - 1)`, `|eps| >= 1`.
fn log_eps_modulus(z: C64) -> f64 {
    let w = (z * z - 1.0).sqrt();
    (z + w).norm().max((z - w).norm()).ln().max(0.0)
}

pub fn zs_monodromy(u: &ScalarSteps, lambda: C64) -> ZSResult {
    let mut y = CMat2::identity();
    for &(_, w, val) in &u.steps {
        y = step_exp(lambda, val, w) * y;
    }
    let delta_zs = y.trace() * 0.5;
    ZSResult { y1: y, delta_zs, q_zs: log_eps_modulus(delta_zs), lambda }
}

/// Unit direction `e` and scalar `u` with `v = u e` for a rank-one `v`.
///
/// `e` is read off the Gram matrix from its larger diagonal entry, with the
/// corresponding component of `e` real positive.
pub fn extract_rank_one(v: &StepPotential) -> Result<([C64; 2], ScalarSteps), Error> {
    let m = v.moments();
    if !v.is_rank_one(v.default_rank_one_tol()) {
        return Err(Error::NotRankOne(m.beta[0]));
    }
    let e = if m.norm_sq == 0.0 {
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
    } else {
        let n = m.norm();
        if m.c1 >= m.c2 {
            [C64::new(m.c1.sqrt() / n, 0.0), m.c12.conj() / (m.c1.sqrt() * n)]
        } else {
            [m.c12 / (m.c2.sqrt() * n), C64::new(m.c2.sqrt() / n, 0.0)]
        }
    };
    let steps = v
        .steps
        .iter()
        .map(|s| (s.x0, s.width, e[0].conj() * s.value[0] + e[1].conj() * s.value[1]))
        .collect();
    Ok((e, ScalarSteps { steps }))
}

/// Per-point outcome of [`reduction_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReductionPoint {
    pub lambda: f64,
    /// distance from the nearest multiplier to `e^{i lambda}`
    pub free_multiplier: f64,
    /// `|(Delta_a + Delta_b)/2 - Delta_zs|` for the other two
    pub pair_average: f64,
    /// relative error of `D = (1/4)(1 - Dzs^2)(Dzs - cos)^2`
    pub disc: f64,
    /// relative errors of `D_+-` against `2(1 -+ Dzs)(e^{i lambda} -+ 1)`
    pub d_plus: f64,
    pub d_minus: f64,
    /// 3x3 and 2x2 band indicators disagree
    pub band_mismatch: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionReport {
    pub tol: f64,
    pub points: Vec<ReductionPoint>,
    pub failures: Vec<ReductionPoint>,
    pub band_mismatch_fraction: f64,
    /// mismatches farther than 1e-6 from a ZS band edge
    pub unexplained_mismatches: usize,
}

impl ReductionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.band_mismatch_fraction <= 1e-3 && self.unexplained_mismatches == 0
    }
}

/// Compares the 3x3 pipeline with the ZS oracle on a real grid.
pub fn reduction_check(v: &StepPotential, grid: &[f64], tol: f64) -> Result<ReductionReport, Error> {
    use crate::eigen::d_pm_from;
    use crate::multipliers::{derived, multipliers, LabelRequest};

    let (_, u) = extract_rank_one(v)?;
    let points: Vec<ReductionPoint> = grid
        .par_iter()
        .map(|&l| -> Result<ReductionPoint, Error> {
            let lam = C64::new(l, 0.0);
            let mr = crate::monodromy::propagate(v, lam)?;
            let mt = multipliers(&mr, LabelRequest::Unordered)?;
            let ds = derived(&mt, mr.t, mr.t_tilde);
            let z = zs_monodromy(&u, lam);
            let dz = z.delta_zs;
            let e = (I * lam).exp();
            let k = (0..3).min_by(|&a, &b| (mt.tau[a] - e).norm().total_cmp(&(mt.tau[b] - e).norm())).unwrap();
            let others: Vec<usize> = (0..3).filter(|&j| j != k).collect();
            let avg = (ds.delta[others[0]] + ds.delta[others[1]]) * 0.5;
            let want_disc = (1.0 - dz * dz) * (dz - lam.cos()).powi(2) * 0.25;
            let disc_scale = want_disc.norm().max(ds.disc.norm()).max(1e-300);
            let dp = d_pm_from(&mr, 1.0);
            let dm = d_pm_from(&mr, -1.0);
            let wp = (1.0 - dz) * (e - 1.0) * 2.0;
            let wm = (1.0 + dz) * (e + 1.0) * 2.0;
            let rel = |a: C64, b: C64| (a - b).norm() / a.norm().max(b.norm()).max(1.0);
            let band3 = crate::spectrum::classify(v, l)?.multiplicity == 3;
            let band2 = dz.re.abs() <= 1.0;
            Ok(ReductionPoint {
                lambda: l,
                free_multiplier: (mt.tau[k] - e).norm(),
                pair_average: (avg - dz).norm(),
                disc: (ds.disc - want_disc).norm() / disc_scale.max(1.0),
                d_plus: rel(dp, wp),
                d_minus: rel(dm, wm),
                band_mismatch: band3 != band2,
            })
        })
        .collect::<Result<_, _>>()?;
    let failures: Vec<ReductionPoint> = points
        .iter()
        .filter(|q| q.free_multiplier > tol || q.pair_average > tol || q.disc > tol || q.d_plus > tol || q.d_minus > tol)
        .copied()
        .collect();
    let mismatches: Vec<f64> = points.iter().filter(|q| q.band_mismatch).map(|q| q.lambda).collect();
    let unexplained = mismatches
        .iter()
        .filter(|&&l| {
            let d = |x: f64| zs_monodromy(&u, C64::new(x, 0.0)).delta_zs.re.abs() - 1.0;
            // an edge within 1e-6 shows up as a sign change of |Dzs| - 1
            d(l - 1e-6).signum() == d(l + 1e-6).signum()
        })
        .count();
    Ok(ReductionReport {
        tol,
        band_mismatch_fraction: mismatches.len() as f64 / points.len().max(1) as f64,
        unexplained_mismatches: unexplained,
        points,
        failures,
    })
}

fn zs_excess(u: &ScalarSteps, l: f64) -> f64 {
    zs_monodromy(u, C64::new(l, 0.0)).delta_zs.re.abs() - 1.0
}

fn bisect(u: &ScalarSteps, mut inside: f64, mut outside: f64) -> f64 {
    while (inside - outside).abs() > 1e-10 {
        let mid = 0.5 * (inside + outside);
        if zs_excess(u, mid) > 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// ZS gaps (`|Delta_zs| > 1`) in `[a, b]`, endpoints refined to 1e-9.
/// Band-side local maxima of `|Delta_zs|` are refined so gaps narrower than
/// the step are not missed.
pub fn zs_gaps(u: &ScalarSteps, a: f64, b: f64, step: f64) -> Vec<(f64, f64)> {
    let n = ((b - a) / step).ceil() as usize;
    let lams: Vec<f64> = (0..=n).map(|i| (a + i as f64 * step).min(b)).collect();
    let ex: Vec<f64> = lams.par_iter().map(|&l| zs_excess(u, l)).collect();
    let mut gaps = Vec::new();
    let mut i = 0;
    while i <= n {
        if ex[i] <= 0.0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && ex[i + 1] > 0.0 {
            i += 1;
        }
        let lo = if start == 0 { lams[0] } else { bisect(u, lams[start], lams[start - 1]) };
        let hi = if i == n { lams[n] } else { bisect(u, lams[i], lams[i + 1]) };
        gaps.push((lo, hi));
        i += 1;
    }
    for i in 1..n {
        if ex[i] <= 0.0 && ex[i - 1] <= 0.0 && ex[i + 1] <= 0.0 && ex[i] >= ex[i - 1] && ex[i] >= ex[i + 1] {
            // golden-section maximum of the excess
            let (mut lo, mut hi) = (lams[i - 1], lams[i + 1]);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut found = None;
            while hi - lo > 1e-10 {
                let x1 = hi - g * (hi - lo);
                let x2 = lo + g * (hi - lo);
                let (f1, f2) = (zs_excess(u, x1), zs_excess(u, x2));
                if f1 > 0.0 || f2 > 0.0 {
                    found = Some(if f1 > f2 { x1 } else { x2 });
                    break;
                }
                if f1 >= f2 {
                    hi = x2;
                } else {
                    lo = x1;
                }
            }
            if let Some(x) = found {
                gaps.push((bisect(u, x, lams[i - 1]), bisect(u, x, lams[i + 1])));
            }
        }
    }
    gaps.sort_by(|x, y| x.0.total_cmp(&y.0));
    gaps
}

/// `(1/pi) int q_zs` over the given ZS gaps, Gauss-Legendre in the
/// substitution `lambda = lo + w sin^2 theta`.
pub fn zs_q0(u: &ScalarSteps, gaps: &[(f64, f64)]) -> f64 {
    let (x, wt) = crate::algebra::gauss_legendre(64);
    let h = std::f64::consts::FRAC_PI_4;
    gaps.par_iter()
        .map(|&(lo, hi)| {
            let w = hi - lo;
            x.iter()
                .zip(&wt)
                .map(|(xi, wi)| {
                    let th = h * (xi + 1.0);
                    let l = lo + w * th.sin().powi(2);
                    wi * h * zs_monodromy(u, C64::new(l, 0.0)).q_zs * w * (2.0 * th).sin()
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / std::f64::consts::PI
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapLengthEstimate {
    pub g: f64,
    pub norm: f64,
    /// Estimated contribution to `g^2` of gaps outside the window.
    pub tail_g2: f64,
    pub lower_ok: bool,
    /// `None` when inconclusive (tail above 10% of `g^2`).
    pub upper_ok: Option<bool>,
    pub gaps: Vec<(f64, f64)>,
}

/// `g = (sum |gamma_n|^2)^{1/2}` over ZS gaps with `n_min <= n <= n_max`,
/// compared with `g/sqrt 2 <= |v| <= 2g(1+g)`.
pub fn gap_length_estimate(v: &StepPotential, n_min: i64, n_max: i64) -> Result<GapLengthEstimate, Error> {
    use std::f64::consts::PI;
    let (_, u) = extract_rank_one(v)?;
    let norm = u.norm();
    let (a, b) = (PI * (n_min as f64 - 0.5), PI * (n_max as f64 + 0.5));
    let gaps = if norm == 0.0 { vec![] } else { zs_gaps(&u, a, b, 0.01) };
    let g2: f64 = gaps.iter().map(|(l, h)| (h - l).powi(2)).sum();
    let g = g2.sqrt();
    // first-order gap length 2|u_hat(-pi n)| beyond the window, up to the
    // grid's Nyquist index
    let nyq = (v.len() / 2) as i64;
    let mut tail_g2 = 0.0;
    for n in (-nyq..n_min).chain(n_max + 1..=nyq) {
        tail_g2 += (2.0 * u.fourier_hat(C64::new(-PI * n as f64, 0.0)).norm()).powi(2);
    }
    let lower_ok = g / 2f64.sqrt() <= norm;
    let upper_ok = if tail_g2 > 0.1 * g2 {
        None
    } else {
        let gt = (g2 + tail_g2).sqrt();
        Some(norm <= 2.0 * gt * (1.0 + gt))
    };
    Ok(GapLengthEstimate { g, norm, tail_g2, lower_ok, upper_ok, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FourierMode, Potential};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_zs_is_cosine() {
        let u = ScalarSteps { steps: (0..64).map(|k| (k as f64 / 64.0, 1.0 / 64.0, c(0.0, 0.0))).collect() };
        for l in [0.3, 2.0, -5.5] {
            let r = zs_monodromy(&u, c(l, 0.0));
            assert!((r.delta_zs - l.cos()).norm() < 1e-13);
            assert!((r.y1.det() - 1.0).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_zs_closed_form() {
        // Delta = cos sqrt(lambda^2 - a^2)
        let a = 0.7;
        let u = ScalarSteps { steps: (0..32).map(|k| (k as f64 / 32.0, 1.0 / 32.0, c(a, 0.0))).collect() };
        for l in [0.2, 1.5, 4.0] {
            let r = zs_monodromy(&u, c(l, 0.0));
            let want = C64::new(l * l - a * a, 0.0).sqrt().cos();
            assert!((r.delta_zs - want).norm() < 1e-12);
            assert!((r.y1.det() - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn extraction_and_reduction() {
        let base = vec![
            FourierMode { n: 1, v1: c(0.3, 0.0), v2: c(0.9, 0.0) },
            FourierMode { n: -1, v1: c(0.0, 0.1), v2: c(0.0, 0.3) },
        ];
        let v = Potential::fourier(base).with_resolution(128).unwrap().canonicalize();
        let (e, u) = extract_rank_one(&v).unwrap();
        assert!((e[0].norm_sqr() + e[1].norm_sqr() - 1.0).abs() < 1e-14);
        assert!((u.norm() - v.moments().norm()).abs() < 1e-12);
        let grid: Vec<f64> = (0..200).map(|k| -6.0 + 0.06 * k as f64).collect();
        let rep = reduction_check(&v, &grid, 1e-7).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures.first());
    }

    #[test]
    fn non_rank_one_rejected() {
        let v = Potential::constant(c(1.0, 0.0), c(0.0, 0.0));
        let mut p = v.canonicalize();
        p.steps[0].value[1] = c(1.0, 0.0);
        assert!(matches!(extract_rank_one(&p), Err(Error::NotRankOne(_))));
    }

    #[test]
    fn plane_wave_trace_constant() {
        // a single mode has one ZS gap (plus step-grid artifacts), and Q_zs = |u|^2 / 2
        let a = 0.5;
        let v = Potential::fourier(vec![FourierMode { n: 1, v1: c(a, 0.0), v2: c(0.0, 0.0) }])
            .with_resolution(256)
            .unwrap()
            .canonicalize();
        let (_, u) = extract_rank_one(&v).unwrap();
        let gaps = zs_gaps(&u, -12.0, 12.0, 0.01);
        assert_eq!(gaps.iter().filter(|g| g.1 - g.0 > 1e-3).count(), 1, "{gaps:?}");
        let q = zs_q0(&u, &gaps);
        assert!((q - a * a / 2.0).abs() < 1e-4 * a * a, "{q}");
    }
}
