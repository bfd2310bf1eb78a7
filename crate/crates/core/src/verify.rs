//! The identity suite: every algebraic identity the pipeline relies on,
//! checked on deterministic sample sets and reported as a pass/fail matrix.

use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::{d_pm_from, recover_traces};
use crate::monodromy::{propagate, wronskian_defect_of, MonodromyResult};
use crate::multipliers::{
    derived, disc_roots, identity_suite, multipliers, separation, unimodular_count, LabelRequest, UNIMODULAR_BAND,
};
use crate::potential::StepPotential;
use crate::{Error, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Test hook applied to every monodromy result before the checks run.
pub type Corruption = fn(&mut MonodromyResult);

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Complex sample points (|Re| <= 10, |Im| <= 1).
    pub complex_points: usize,
    /// Real grid points on [-15, 15].
    pub real_points: usize,
    pub corrupt: Option<Corruption>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { complex_points: 64, real_points: 400, corrupt: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the (scaled) residual.
    pub worst: f64,
    pub tol: f64,
    pub samples: usize,
    /// Sample at which the worst residual occurred.
    pub at: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

/// Low-discrepancy points `(frac(k g1), frac(k g2))`.
fn sample(k: usize) -> (f64, f64) {
    let g1 = 0.754_877_666_246_692_7;
    let g2 = 0.569_840_290_998_053_2;
    (((k as f64 + 0.5) * g1).fract(), ((k as f64 + 0.5) * g2).fract())
}

fn complex_points(n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| {
            let (a, b) = sample(k);
            C64::new(-10.0 + 20.0 * a, -1.0 + 2.0 * b)
        })
        .collect()
}

fn real_points(n: usize) -> Vec<f64> {
    (0..n).map(|k| -15.0 + 30.0 * (k as f64 + 0.5) / n as f64).collect()
}

struct Acc {
    name: &'static str,
    tol: f64,
    worst: f64,
    at: Option<[f64; 2]>,
    samples: usize,
    passed: bool,
}

impl Acc {
    fn new(name: &'static str, tol: f64) -> Acc {
        Acc { name, tol, worst: 0.0, at: None, samples: 0, passed: true }
    }

    fn push(&mut self, lambda: C64, value: f64) {
        self.samples += 1;
        let bad = !(value <= self.tol);
        if bad {
            self.passed = false;
        }
        if !(value <= self.worst) || (bad && self.at.is_none()) {
            self.worst = value;
            self.at = Some([lambda.re, lambda.im]);
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            passed: self.passed,
            worst: self.worst,
            tol: self.tol,
            samples: self.samples,
            at: self.at,
        }
    }
}

fn monodromy(p: &StepPotential, lambda: C64, opts: &VerifyOptions) -> Result<MonodromyResult, Error> {
    let mut mr = propagate(p, lambda)?;
    if let Some(f) = opts.corrupt {
        f(&mut mr);
    }
    Ok(mr)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

pub fn verify(p: &StepPotential, opts: &VerifyOptions) -> Result<VerifyReport, Error> {
    let cpts = complex_points(opts.complex_points);
    let rpts = real_points(opts.real_points);

    struct Row {
        lambda: C64,
        det: f64,
        wronskian: f64,
        sym: f64,
        recover: f64,
        disc_paths: Option<f64>,
    }
    let rows: Vec<Row> = cpts
        .par_iter()
        .map(|&l| -> Result<Row, Error> {
            let mr = monodromy(p, l, opts)?;
            let mb = monodromy(p, l.conj(), opts)?;
            let e = (I * l).exp();
            let scale = l.im.abs().exp();
            let det = (mr.psi.det() - e).norm() / scale;
            let wronskian = wronskian_defect_of(&mr.psi, &mb.psi) / (scale * scale);
            let mt = multipliers(&mr, LabelRequest::Unordered)?;
            let [a, b, c] = mt.tau;
            let sym = rel(a + b + c, mr.t).max(rel(a * b + a * c + b * c, e * mr.t_tilde)).max(rel(a * b * c, e));
            let (t, tt) = recover_traces(d_pm_from(&mr, 1.0), d_pm_from(&mr, -1.0), l);
            let recover = (t - mr.t).norm().max((tt - mr.t_tilde).norm());
            let ds = derived(&mt, mr.t, mr.t_tilde);
            let disc_paths = (separation(&mt.tau) >= 1e-5).then(|| rel(ds.disc, disc_roots(&mt.tau, l)));
            Ok(Row { lambda: l, det, wronskian, sym, recover, disc_paths })
        })
        .collect::<Result<_, _>>()?;

    struct RealRow {
        lambda: f64,
        phi_identity: f64,
        rho_identity: f64,
        disc_im: f64,
        unimodular: usize,
    }
    let real_rows: Vec<RealRow> = rpts
        .par_iter()
        .map(|&l| -> Result<RealRow, Error> {
            let lam = C64::new(l, 0.0);
            let mr = monodromy(p, lam, opts)?;
            let mt = multipliers(&mr, LabelRequest::Unordered)?;
            let ds = derived(&mt, mr.t, mr.t_tilde);
            let ir = identity_suite(&ds, mr.t, mr.t_tilde, lam);
            Ok(RealRow {
                lambda: l,
                phi_identity: ir.phi_identity,
                rho_identity: ir.rho_identity,
                disc_im: ds.disc.im.abs(),
                unimodular: unimodular_count(&mt.tau, UNIMODULAR_BAND),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut det = Acc::new("determinant", 1e-10);
    let mut wr = Acc::new("wronskian", 1e-10);
    let mut sym = Acc::new("symmetric-functions", 1e-9);
    let mut rec = Acc::new("recover-traces", 1e-10);
    let mut dp = Acc::new("discriminant-paths", 1e-8);
    for r in &rows {
        det.push(r.lambda, r.det);
        wr.push(r.lambda, r.wronskian);
        sym.push(r.lambda, r.sym);
        rec.push(r.lambda, r.recover);
        if let Some(d) = r.disc_paths {
            dp.push(r.lambda, d);
        }
    }
    let mut phi_identity = Acc::new("phi-identity", 1e-8);
    let mut rho_identity = Acc::new("rho-identity", 1e-8);
    let mut dim = Acc::new("discriminant-real", 1e-9);
    let mut s2 = Acc::new("sigma2-empty", 0.0);
    for r in &real_rows {
        let l = C64::new(r.lambda, 0.0);
        phi_identity.push(l, r.phi_identity);
        rho_identity.push(l, r.rho_identity);
        dim.push(l, r.disc_im);
        s2.push(l, if r.unimodular == 1 || r.unimodular == 3 { 0.0 } else { 1.0 });
    }
    let mut checks: Vec<CheckResult> =
        [det, wr, sym, rec, dp, phi_identity, rho_identity, dim, s2].into_iter().map(Acc::finish).collect();

    // v = 0 is rank-one only degenerately: e^{i lambda} is a double multiplier
    if opts.corrupt.is_none() && p.moments().norm() >= crate::spectrum::FREE_NORM && p.is_rank_one(p.default_rank_one_tol()) {
        let rep = crate::zs::reduction_check(p, &rpts, 1e-7)?;
        let worst = rep
            .points
            .iter()
            .map(|q| q.free_multiplier.max(q.pair_average).max(q.disc).max(q.d_plus).max(q.d_minus))
            .fold(0.0, f64::max);
        checks.push(CheckResult {
            name: "zs-reduction",
            passed: rep.passed(),
            worst,
            tol: rep.tol,
            samples: rep.points.len(),
            at: rep.failures.first().map(|q| [q.lambda, 0.0]),
        });
    }
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FourierMode, Potential};

    fn opts() -> VerifyOptions {
        VerifyOptions { complex_points: 16, real_points: 64, corrupt: None }
    }

    #[test]
    fn free_passes() {
        let p = Potential::zero().with_resolution(64).unwrap().canonicalize();
        let r = verify(&p, &opts()).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
    }

    #[test]
    fn rank_one_passes_with_reduction() {
        let p = Potential::fourier(vec![FourierMode { n: 1, v1: C64::new(0.4, 0.0), v2: C64::new(0.0, 0.0) }])
            .with_resolution(128)
            .unwrap()
            .canonicalize();
        let r = verify(&p, &opts()).unwrap();
        assert!(r.checks.iter().any(|c| c.name == "zs-reduction"));
        assert!(r.passed(), "{:?}", r.failed());
    }

    #[test]
    fn corrupted_monodromy_is_named() {
        fn bump(mr: &mut MonodromyResult) {
            mr.psi.0[0][1] += C64::new(1e-4, 0.0);
        }
        let p = Potential::zero().with_resolution(64).unwrap().canonicalize();
        let r = verify(&p, &VerifyOptions { corrupt: Some(bump), ..opts() }).unwrap();
        assert!(!r.passed());
        assert!(r.failed().contains(&"wronskian"), "{:?}", r.failed());
    }
}
