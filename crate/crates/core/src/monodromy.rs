//! Fundamental solution of `iJ y' + V y = lambda y` over one period, by exact
//! step exponentials and by the truncated Picard (Dyson) series.

use crate::algebra::{expm3, CMat3};
use crate::potential::{phi1, Step, StepPotential};
use crate::{Error, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Largest `|Im lambda|` accepted by [`propagate`].
pub const IM_LAMBDA_LIMIT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonodromyResult {
    pub psi: CMat3,
    /// `Tr psi`
    pub t: C64,
    /// `Tr psi^{-1}`
    pub t_tilde: C64,
    pub det_psi: C64,
    pub lambda: C64,
}

/// Generator `-iJ(lambda - V)` for one constant step.
pub fn generator(lambda: C64, v: [C64; 2]) -> CMat3 {
    let [v1, v2] = v;
    CMat3([
        [-I * lambda, I * v1.conj(), I * v2.conj()],
        [-I * v1, I * lambda, C64::new(0.0, 0.0)],
        [-I * v2, C64::new(0.0, 0.0), I * lambda],
    ])
}

/// `y(1, lambda)` as the ordered product of step exponentials.
pub fn monodromy_matrix(p: &StepPotential, lambda: C64) -> Result<CMat3, Error> {
    Ok(monodromy_with_det(p, lambda)?.0)
}

/// Monodromy matrix and its determinant as the product of the step
/// determinants. The determinant of the final product would lose the
/// smallest singular value (~e^{-|Im lambda|}) to round-off.
fn monodromy_with_det(p: &StepPotential, lambda: C64) -> Result<(CMat3, C64), Error> {
    check_lambda(lambda)?;
    let mut psi = CMat3::identity();
    let mut det = C64::new(1.0, 0.0);
    for s in &p.steps {
        let e = expm3(&generator(lambda, s.value).scale(C64::new(s.width, 0.0)))?;
        psi = e * psi;
        det *= e.det();
    }
    if !psi.is_finite() {
        return Err(Error::Range(format!("monodromy overflow at lambda = {lambda}")));
    }
    Ok((psi, det))
}

fn check_lambda(lambda: C64) -> Result<(), Error> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::NonFinite("lambda"));
    }
    if lambda.im.abs() > IM_LAMBDA_LIMIT {
        return Err(Error::Range(format!("|Im lambda| = {} exceeds {IM_LAMBDA_LIMIT}", lambda.im.abs())));
    }
    Ok(())
}

/// Monodromy matrix with its traces and determinant.
///
/// `T~` comes from the adjugate with `det psi = e^{i lambda}` substituted
/// when `|Im lambda| <= 1`. Further out the minors cancel catastrophically
/// (relative error ~ eps e^{2|Im lambda|}), so the identity
/// `psi^{-1}(lambda) = J psi(conj lambda)^* J` is used instead, which costs a
/// second propagation.
pub fn propagate(p: &StepPotential, lambda: C64) -> Result<MonodromyResult, Error> {
    let (psi, det_psi) = monodromy_with_det(p, lambda)?;
    let t = psi.trace();
    let t_tilde = if lambda.im.abs() <= 1.0 {
        psi.adjugate().trace() * (-I * lambda).exp()
    } else {
        monodromy_matrix(p, lambda.conj())?.trace().conj()
    };
    Ok(MonodromyResult { psi, t, t_tilde, det_psi, lambda })
}

/// Same as [`propagate`] but always through the adjugate route.
pub fn propagate_adjugate(p: &StepPotential, lambda: C64) -> Result<MonodromyResult, Error> {
    let (psi, det_psi) = monodromy_with_det(p, lambda)?;
    Ok(MonodromyResult {
        psi,
        t: psi.trace(),
        t_tilde: psi.adjugate().trace() * (-I * lambda).exp(),
        det_psi,
        lambda,
    })
}

pub fn j_matrix() -> CMat3 {
    CMat3::diag([C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)])
}

/// `max |psi(conj lambda)^* J psi(lambda) - J|`.
pub fn wronskian_defect(p: &StepPotential, lambda: C64) -> Result<f64, Error> {
    let psi = monodromy_matrix(p, lambda)?;
    let psi_bar = if lambda.im == 0.0 { psi } else { monodromy_matrix(p, lambda.conj())? };
    Ok(wronskian_defect_of(&psi, &psi_bar))
}

pub fn wronskian_defect_of(psi: &CMat3, psi_conj_lambda: &CMat3) -> f64 {
    let j = j_matrix();
    (psi_conj_lambda.conj_transpose() * j * *psi - j).max_abs()
}

/// Truncated Picard series at x = 1.
#[derive(Clone, Debug)]
pub struct PicardResult {
    /// `terms[n] = y_n(1, lambda)`, n = 0..=N
    pub terms: Vec<CMat3>,
    pub sum: CMat3,
    /// `|v|^{N+1}/(N+1)! e^{|Im lambda| + |v|}`
    pub remainder_bound: f64,
}

pub const PICARD_MAX_ORDER: usize = 12;

/// `e[0^p, d^q]`: divided difference of exp at `p` copies of 0 and `q`
/// copies of `d`, i.e. `1F1(q; p+q; d)/(p+q-1)!`.
fn dd_exp(p: usize, q: usize, d: C64) -> C64 {
    debug_assert!(p + q >= 1);
    if p == 2 && q == 1 && d.norm() > 1.0 {
        return (d.exp() - 1.0 - d) / (d * d);
    }
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for k in 0..200 {
        term = term * d * ((q + k) as f64 / (((p + q + k) * (k + 1)) as f64));
        sum += term;
        if term.norm() <= 1e-18 * sum.norm() {
            break;
        }
    }
    let fact: f64 = (1..p + q).map(|j| j as f64).product();
    sum / fact
}

/// Dyson terms `E^{(n)}`, n = 0..=order, of the exponential of one constant
/// step, with the free part `-i lambda J w` as the unperturbed generator.
fn step_dyson(lambda: C64, v: [C64; 2], w: f64, order: usize) -> Vec<CMat3> {
    let a = -I * lambda * w;
    let d = I * lambda * (2.0 * w);
    let ea = a.exp();
    let vv = w * w * (v[0].norm_sqr() + v[1].norm_sqr());
    let mut out = Vec::with_capacity(order + 1);
    out.push(CMat3::diag([ea, (-a).exp(), (-a).exp()]));
    for n in 1..=order {
        let mut e = CMat3::zero();
        let m = n / 2;
        if n % 2 == 0 {
            e[(0, 0)] = ea * dd_exp(m + 1, m, d) * vv.powi(m as i32);
            let g = ea * dd_exp(m, m + 1, d) * vv.powi(m as i32 - 1) * (w * w);
            for j in 0..2 {
                for k in 0..2 {
                    e[(j + 1, k + 1)] = g * v[j] * v[k].conj();
                }
            }
        } else {
            let g = ea * dd_exp(m + 1, m + 1, d) * vv.powi(m as i32) * w;
            for k in 0..2 {
                e[(0, k + 1)] = g * I * v[k].conj();
                e[(k + 1, 0)] = -g * I * v[k];
            }
        }
        out.push(e);
    }
    out
}

/// Partial sums of the Picard series, iterated integrals evaluated in closed
/// form on every step.
pub fn picard_monodromy(p: &StepPotential, lambda: C64, order: usize) -> Result<PicardResult, Error> {
    if order > PICARD_MAX_ORDER {
        return Err(Error::InvalidArgument(format!("Picard order {order} exceeds {PICARD_MAX_ORDER}")));
    }
    check_lambda(lambda)?;
    let mut acc: Vec<CMat3> = (0..=order)
        .map(|n| if n == 0 { CMat3::identity() } else { CMat3::zero() })
        .collect();
    for s in &p.steps {
        // split so that |2 lambda w| <= 1 keeps the series short
        let pieces = ((2.0 * lambda.norm() * s.width).ceil() as usize).max(1);
        let w = s.width / pieces as f64;
        let e = step_dyson(lambda, s.value, w, order);
        for _ in 0..pieces {
            let mut next = vec![CMat3::zero(); order + 1];
            for n in 0..=order {
                for j in 0..=n {
                    next[n] = next[n] + e[j] * acc[n - j];
                }
            }
            acc = next;
        }
    }
    let norm = p.moments().norm();
    let fact: f64 = (1..=order + 1).map(|j| j as f64).product();
    let remainder_bound = norm.powi(order as i32 + 1) / fact * (lambda.im.abs() + norm).exp();
    let sum = acc.iter().fold(CMat3::zero(), |s, t| s + *t);
    Ok(PicardResult { terms: acc, sum, remainder_bound })
}

/// Second-order trace term `T2 = e^{-i lambda} T2^+ + e^{i lambda} T2^-`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceT2 {
    pub t2: C64,
    pub plus: C64,
    pub minus: C64,
}

fn step_integral(s: &Step, k: C64) -> C64 {
    // int over the step of e^{k x}
    (k * s.x0).exp() * s.width * phi1(k * s.width)
}

/// Closed-form double integrals over the ordered simplex, accumulated with
/// prefix sums over steps.
pub fn trace_t2(p: &StepPotential, lambda: C64) -> TraceT2 {
    let k = I * lambda * 2.0;
    let zero = C64::new(0.0, 0.0);
    let (mut plus, mut minus) = (zero, zero);
    // prefix sums of v_l int e^{-kx} (plus) and conj(v_l) int e^{kx} (minus)
    let mut pre_p = [zero; 2];
    let mut pre_m = [zero; 2];
    for s in &p.steps {
        let f = step_integral(s, k);
        let g = step_integral(s, -k);
        let [a, b] = s.value;
        plus += f * (a.conj() * pre_p[0] + b.conj() * pre_p[1]);
        minus += g * (a * pre_m[0] + b * pre_m[1]);
        let vv = a.norm_sqr() + b.norm_sqr();
        let w2 = s.width * s.width;
        plus += vv * w2 * dd_exp(2, 1, k * s.width);
        minus += vv * w2 * dd_exp(2, 1, -k * s.width);
        pre_p[0] += a * g;
        pre_p[1] += b * g;
        pre_m[0] += a.conj() * f;
        pre_m[1] += b.conj() * f;
    }
    let t2 = (-I * lambda).exp() * plus + (I * lambda).exp() * minus;
    TraceT2 { t2, plus, minus }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FourierMode, Potential, Representation};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_mode() -> StepPotential {
        Potential::fourier(vec![
            FourierMode { n: 0, v1: c(0.2, 0.1), v2: c(0.0, 0.0) },
            FourierMode { n: 1, v1: c(0.0, 0.0), v2: c(0.3, -0.1) },
            FourierMode { n: -2, v1: c(0.1, 0.0), v2: c(0.0, 0.15) },
        ])
        .with_resolution(64)
        .unwrap()
        .canonicalize()
    }

    #[test]
    fn free_monodromy() {
        let p = Potential::zero().canonicalize();
        for lam in [c(0.7, 0.0), c(-3.0, 0.5), c(2.0, -4.0)] {
            let r = propagate(&p, lam).unwrap();
            let want = CMat3::diag([(-I * lam).exp(), (I * lam).exp(), (I * lam).exp()]);
            assert!((r.psi - want).max_abs() <= 1e-12 * want.max_abs());
            assert!((r.t - ((-I * lam).exp() + (I * lam).exp() * 2.0)).norm() <= 1e-12 * want.max_abs());
        }
    }

    #[test]
    fn constant_potential_single_exponential() {
        let p = Potential::constant(c(0.4, -0.2), c(0.0, 0.0));
        let lam = c(1.3, 0.2);
        let r = propagate(&p.canonicalize(), lam).unwrap();
        let one = expm3(&generator(lam, [c(0.4, -0.2), c(0.0, 0.0)])).unwrap();
        assert!((r.psi - one).max_abs() < 1e-12);
    }

    #[test]
    fn det_and_conjugate_trace() {
        let p = two_mode();
        for lam in [c(0.3, 0.0), c(-7.0, 0.0), c(2.0, 3.0), c(1.0, -25.0)] {
            let r = propagate(&p, lam).unwrap();
            let e = (I * lam).exp();
            assert!((r.det_psi - e).norm() <= 1e-10 * lam.im.abs().exp());
            if lam.im == 0.0 {
                assert!((r.t_tilde - r.t.conj()).norm() <= 1e-10 * r.t.norm());
            }
        }
    }

    #[test]
    fn both_t_tilde_routes_agree_near_axis() {
        let p = two_mode();
        let lam = c(2.2, 0.8);
        let a = propagate_adjugate(&p, lam).unwrap().t_tilde;
        let b = monodromy_matrix(&p, lam.conj()).unwrap().trace().conj();
        assert!((a - b).norm() < 1e-11 * a.norm());
    }

    #[test]
    fn wronskian_small() {
        let p = two_mode();
        assert!(wronskian_defect(&Potential::zero().canonicalize(), c(2.3, 0.0)).unwrap() < 1e-12);
        assert!(wronskian_defect(&p, c(4.1, 0.0)).unwrap() < 1e-11);
        assert!(wronskian_defect(&p, c(0.5, 0.5)).unwrap() < 1e-10 * 1f64.exp());
    }

    #[test]
    fn trace_even_in_v() {
        let p = two_mode();
        let lam = c(1.7, 0.4);
        let a = propagate(&p, lam).unwrap().t;
        let b = propagate(&p.negated(), lam).unwrap().t;
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn picard_zero_order_is_free() {
        let p = two_mode();
        let lam = c(0.9, 0.3);
        let r = picard_monodromy(&p, lam, 0).unwrap();
        let want = CMat3::diag([(-I * lam).exp(), (I * lam).exp(), (I * lam).exp()]);
        assert!((r.sum - want).max_abs() < 1e-13);
    }

    #[test]
    fn picard_matches_propagate() {
        let p = Potential::constant(c(0.1, 0.0), c(0.0, 0.0)).canonicalize();
        let lam = c(1.0, 0.0);
        let r = picard_monodromy(&p, lam, 6).unwrap();
        let bound = 0.1f64.powi(7) / 5040.0 * 0.1f64.exp();
        assert!((r.remainder_bound - bound).abs() < 1e-20);
        let psi = propagate(&p, lam).unwrap().psi;
        assert!((r.sum - psi).max_abs() <= bound);

        let p = two_mode();
        for lam in [c(3.0, 0.0), c(-1.5, 0.7)] {
            let r = picard_monodromy(&p, lam, 10).unwrap();
            let psi = propagate(&p, lam).unwrap().psi;
            assert!((r.sum - psi).max_abs() <= r.remainder_bound.max(1e-13));
            assert!(r.terms[1].trace().norm() < 1e-14);
            assert!(r.terms[3].trace().norm() < 1e-14);
        }
    }

    #[test]
    fn t2_against_picard_and_fourier() {
        let p = two_mode();
        for lam in [c(2.5, 0.0), c(-0.4, 0.6)] {
            let t2 = trace_t2(&p, lam);
            let r = picard_monodromy(&p, lam, 2).unwrap();
            assert!((t2.t2 - r.terms[2].trace()).norm() < 1e-12);
            // T2+ + T2- = (int e^{2i lambda x} v^* dx) . v_hat(-lambda)
            let vm = p.fourier_hat(-lam);
            let mut vstar = [c(0.0, 0.0); 2];
            for s in &p.steps {
                let f = step_integral(s, I * lam * 2.0);
                vstar[0] += s.value[0].conj() * f;
                vstar[1] += s.value[1].conj() * f;
            }
            let prod = vstar[0] * vm[0] + vstar[1] * vm[1];
            assert!((t2.plus + t2.minus - prod).norm() < 1e-13);
        }
        assert_eq!(trace_t2(&Potential::zero().canonicalize(), c(1.0, 0.0)).t2, c(0.0, 0.0));
    }

    #[test]
    fn t2_at_resonance_uses_negative_frequency() {
        // a single complex mode distinguishes |v_hat(pi n)| from |v_hat(-pi n)|
        let p = Potential::new(
            Representation::Fourier(vec![FourierMode { n: 1, v1: c(0.3, 0.0), v2: c(0.0, 0.0) }]),
            256,
        )
        .unwrap()
        .canonicalize();
        let lam = c(std::f64::consts::PI, 0.0);
        let t2 = trace_t2(&p, lam).t2;
        let vm = p.fourier_hat(-lam);
        let want = -(vm[0].norm_sqr() + vm[1].norm_sqr());
        assert!((t2 - want).norm() < 1e-12, "{t2} vs {want}");
        assert!((want + 0.09).abs() < 1e-4);
    }
}
