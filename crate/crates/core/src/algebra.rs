//! Small dense complex linear algebra: 3x3 / 2x2 matrices, the matrix
//! exponential, monic cubic roots and winding numbers on sampled contours.

use std::f64::consts::PI;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::{Error, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Dense 3x3 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CMat3(pub [[C64; 3]; 3]);

/// Dense 2x2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CMat2(pub [[C64; 2]; 2]);

impl CMat3 {
    pub fn zero() -> Self {
        CMat3([[ZERO; 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag([ONE; 3])
    }

    pub fn diag(d: [C64; 3]) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|x| *x *= s);
        m
    }

    pub fn conj_transpose(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..3)
            .map(|j| (0..3).map(|i| self.0[i][j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Matrix of cofactors transposed, so `m * m.adjugate() = det(m) I`.
    pub fn adjugate(&self) -> Self {
        let a = &self.0;
        let c = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
        CMat3([
            [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
            [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
            [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
        ])
    }

    /// Determinant via LU with partial pivoting. Backward stable, so the
    /// error scales with the product of pivots rather than with cofactor
    /// cancellation.
    pub fn det(&self) -> C64 {
        let (lu, _, sign) = self.lu();
        lu.0[0][0] * lu.0[1][1] * lu.0[2][2] * sign
    }

    fn lu(&self) -> (CMat3, [usize; 3], f64) {
        let mut a = *self;
        let mut perm = [0usize, 1, 2];
        let mut sign = 1.0;
        for k in 0..3 {
            let p = (k..3)
                .max_by(|&i, &j| a.0[i][k].norm().total_cmp(&a.0[j][k].norm()))
                .unwrap();
            if p != k {
                a.0.swap(p, k);
                perm.swap(p, k);
                sign = -sign;
            }
            let piv = a.0[k][k];
            if piv == ZERO {
                continue;
            }
            for i in k + 1..3 {
                let f = a.0[i][k] / piv;
                a.0[i][k] = f;
                for j in k + 1..3 {
                    let t = a.0[k][j];
                    a.0[i][j] -= f * t;
                }
            }
        }
        (a, perm, sign)
    }

    /// Solves `self * X = rhs`.
    pub fn solve(&self, rhs: &CMat3) -> Result<CMat3, Error> {
        let (lu, perm, _) = self.lu();
        if (0..3).any(|k| lu.0[k][k] == ZERO) {
            return Err(Error::Singular);
        }
        let mut x = CMat3::zero();
        for col in 0..3 {
            let mut y = [ZERO; 3];
            for i in 0..3 {
                let mut s = rhs.0[perm[i]][col];
                for j in 0..i {
                    s -= lu.0[i][j] * y[j];
                }
                y[i] = s;
            }
            for i in (0..3).rev() {
                let mut s = y[i];
                for j in i + 1..3 {
                    s -= lu.0[i][j] * x.0[j][col];
                }
                x.0[i][col] = s / lu.0[i][i];
            }
        }
        Ok(x)
    }
}

impl Index<(usize, usize)> for CMat3 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for CMat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Mul for CMat3 {
    type Output = CMat3;
    #[inline]
    fn mul(self, b: CMat3) -> CMat3 {
        let a = &self.0;
        let b = &b.0;
        let mut c = [[ZERO; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        CMat3(c)
    }
}

impl Add for CMat3 {
    type Output = CMat3;
    fn add(self, b: CMat3) -> CMat3 {
        let mut c = self;
        for i in 0..3 {
            for j in 0..3 {
                c.0[i][j] += b.0[i][j];
            }
        }
        c
    }
}

impl Sub for CMat3 {
    type Output = CMat3;
    fn sub(self, b: CMat3) -> CMat3 {
        let mut c = self;
        for i in 0..3 {
            for j in 0..3 {
                c.0[i][j] -= b.0[i][j];
            }
        }
        c
    }
}

impl CMat2 {
    pub fn identity() -> Self {
        CMat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }
}

impl Mul for CMat2 {
    type Output = CMat2;
    fn mul(self, b: CMat2) -> CMat2 {
        let a = &self.0;
        let b = &b.0;
        CMat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm accepted by [`expm3`]; beyond this the result cannot be
/// represented in double precision for generic input.
pub const EXPM_NORM_LIMIT: f64 = 700.0;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn pade_low(a: &CMat3, b: &[f64]) -> (CMat3, CMat3) {
    // b has even length m+1 for odd degree m
    let i = CMat3::identity();
    let a2 = *a * *a;
    let mut pow = i;
    let mut u = CMat3::zero();
    let mut v = CMat3::zero();
    for k in 0..b.len() / 2 {
        v = v + pow.scale(re(b[2 * k]));
        u = u + pow.scale(re(b[2 * k + 1]));
        pow = pow * a2;
    }
    (*a * u, v)
}

fn pade13(a: &CMat3) -> (CMat3, CMat3) {
    let b = &B13;
    let i = CMat3::identity();
    let a2 = *a * *a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let w1 = a6.scale(re(b[13])) + a4.scale(re(b[11])) + a2.scale(re(b[9]));
    let w2 = a6.scale(re(b[7])) + a4.scale(re(b[5])) + a2.scale(re(b[3])) + i.scale(re(b[1]));
    let z1 = a6.scale(re(b[12])) + a4.scale(re(b[10])) + a2.scale(re(b[8]));
    let z2 = a6.scale(re(b[6])) + a4.scale(re(b[4])) + a2.scale(re(b[2])) + i.scale(re(b[0]));
    let u = *a * (a6 * w1 + w2);
    let v = a6 * z1 + z2;
    (u, v)
}

/// Matrix exponential by scaling and squaring with a Padé approximant whose
/// degree is picked from the 1-norm (Higham 2005).
pub fn expm3(a: &CMat3) -> Result<CMat3, Error> {
    if !a.is_finite() {
        return Err(Error::NonFinite("expm3 input"));
    }
    let n1 = a.norm1();
    if n1 > EXPM_NORM_LIMIT {
        return Err(Error::Range(format!("expm3: |A|_1 = {n1:.3e} exceeds {EXPM_NORM_LIMIT}")));
    }
    for (m, theta) in THETA {
        if n1 <= theta {
            let (u, v) = match m {
                3 => pade_low(a, &B3),
                5 => pade_low(a, &B5),
                7 => pade_low(a, &B7),
                _ => pade_low(a, &B9),
            };
            return (v - u).solve(&(v + u));
        }
    }
    let s = ((n1 / THETA13).log2().ceil()).max(0.0) as i32;
    let scaled = a.scale(re(2f64.powi(-s)));
    let (u, v) = pade13(&scaled);
    let mut r = (v - u).solve(&(v + u))?;
    for _ in 0..s {
        r = r * r;
    }
    if !r.is_finite() {
        return Err(Error::Range("expm3: result overflowed".into()));
    }
    Ok(r)
}

fn horner(c: [C64; 3], z: C64) -> C64 {
    ((z + c[2]) * z + c[1]) * z + c[0]
}

fn horner_d(c: [C64; 3], z: C64) -> C64 {
    (z * 3.0 + c[2] * 2.0) * z + c[1]
}

fn newton_polish(c: [C64; 3], z: C64, iters: usize) -> C64 {
    let mut z = z;
    let mut pz = horner(c, z).norm();
    for _ in 0..iters {
        let d = horner_d(c, z);
        if d == ZERO {
            break;
        }
        let cand = z - horner(c, z) / d;
        let pc = horner(c, cand).norm();
        if !(pc < pz) {
            break;
        }
        z = cand;
        pz = pc;
    }
    z
}

/// Eigenvalues of a 3x3 matrix from its complex Schur form, sorted by
/// modulus. Unlike the roots of the characteristic polynomial these stay
/// accurate for clustered eigenvalues of a non-defective matrix.
pub fn eigenvalues3(m: &CMat3) -> Result<[C64; 3], Error> {
    if m.0.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("eigenvalues3"));
    }
    let a = nalgebra::Matrix3::from_fn(|i, j| m.0[i][j]);
    let t = a
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Range("Schur iteration did not converge".into()))?
        .unpack()
        .1;
    let mut ev = [t[(0, 0)], t[(1, 1)], t[(2, 2)]];
    ev.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    Ok(ev)
}

/// Roots of the monic cubic `z^3 + c2 z^2 + c1 z + c0`, with `c = [c0, c1, c2]`.
///
/// Cardano for a first guess, then one root is polished and deflated out so
/// the two remaining roots come from a well-conditioned quadratic. The
/// deflated root is the largest when the moduli span more than a factor of
/// ten (so tiny roots keep their relative accuracy), otherwise the most
/// isolated one (so a near-double pair keeps accurate symmetric functions).
pub fn cubic_roots(c: [C64; 3]) -> Result<[C64; 3], Error> {
    if c.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
        return Err(Error::NonFinite("cubic coefficients"));
    }
    let [c0, c1, c2] = c;
    let mut guess = cardano(c);
    guess.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    if guess[0].norm() <= 10.0 * guess[2].norm() {
        let iso = |k: usize| (0..3).filter(|&j| j != k).map(|j| (guess[j] - guess[k]).norm()).fold(f64::INFINITY, f64::min);
        let k = (0..3).max_by(|&a, &b| iso(a).total_cmp(&iso(b))).unwrap();
        guess.swap(0, k);
    }
    let big = newton_polish(c, guess[0], 8);
    if big == ZERO {
        return Ok([ZERO; 3]);
    }
    // Remaining roots have sum s and product p.
    let p = -c0 / big;
    let s_fwd = -c2 - big;
    let s_bwd = (c1 - p) / big;
    let err_fwd = c2.norm() + big.norm();
    let err_bwd = (c1.norm() + p.norm()) / big.norm();
    let s = if err_fwd <= err_bwd { s_fwd } else { s_bwd };
    let disc = (s * s - p * 4.0).sqrt();
    let q = if (s + disc).norm() >= (s - disc).norm() { s + disc } else { s - disc };
    let r1 = q * 0.5;
    let r2 = if r1 == ZERO { ZERO } else { p / r1 };
    // polishing the members of a tight pair separately would break the
    // accuracy of their sum and product
    let tight = (r1 - r2).norm() < 1e-3 * r1.norm().max(r2.norm());
    let pair = if tight { [r1, r2] } else { [r1, r2].map(|z| newton_polish(c, z, 1)) };
    Ok([newton_polish(c, big, 1), pair[0], pair[1]])
}

fn cardano(c: [C64; 3]) -> [C64; 3] {
    let [c0, c1, c2] = c;
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = c2 * c2 * c2 * (2.0 / 27.0) - c2 * c1 / 3.0 + c0;
    let d = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let a1 = -q / 2.0 + d;
    let a2 = -q / 2.0 - d;
    let a = if a1.norm() >= a2.norm() { a1 } else { a2 };
    if a == ZERO {
        return [-shift; 3];
    }
    let u = a.powf(1.0 / 3.0);
    let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let mut out = [ZERO; 3];
    let mut uk = u;
    for o in out.iter_mut() {
        let vk = -p / (uk * 3.0);
        *o = uk + vk - shift;
        uk *= w;
    }
    out
}

/// Residual `|p(z)|` of the monic cubic with coefficients `[c0, c1, c2]`.
pub fn cubic_residual(c: [C64; 3], z: C64) -> f64 {
    horner(c, z).norm()
}

/// Winding number of a closed curve given by samples `values[k]` taken at
/// successive points of a contour. The last sample connects back to the first.
pub fn winding_count(values: &[C64]) -> Result<i64, Error> {
    if values.len() < 3 {
        return Err(Error::InvalidArgument("winding_count needs at least 3 samples".into()));
    }
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("contour samples"));
    }
    let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let min = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if min <= 1e-13 * max || max == 0.0 {
        return Err(Error::ContourThroughZero { min, max });
    }
    let mut total = 0.0;
    for k in 0..values.len() {
        let jump = (values[(k + 1) % values.len()] / values[k]).arg();
        if jump.abs() >= PI / 2.0 {
            return Err(Error::Undersampled { jump });
        }
        total += jump;
    }
    let w = total / (2.0 * PI);
    let n = w.round();
    if (w - n).abs() > 0.25 {
        return Err(Error::WindingResidual(w - n));
    }
    Ok(n as i64)
}

/// Sampled circle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contour {
    pub center: C64,
    pub radius: f64,
    pub samples: usize,
}

impl Contour {
    pub fn new(center: C64, radius: f64, samples: usize) -> Result<Self, Error> {
        if !(radius > 0.0) || samples < 16 || !samples.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "contour needs radius > 0 and a power-of-two sample count >= 16 (got r = {radius}, n = {samples})"
            )));
        }
        Ok(Contour { center, radius, samples })
    }

    pub fn point(&self, k: usize, n: usize) -> C64 {
        self.center + C64::from_polar(self.radius, 2.0 * PI * k as f64 / n as f64)
    }

    pub fn points(&self) -> Vec<C64> {
        (0..self.samples).map(|k| self.point(k, self.samples)).collect()
    }

    /// Number of zeros of `f` inside the circle. Sampling doubles (reusing
    /// earlier evaluations) until the phase is resolved or `max_samples`
    /// is reached.
    pub fn count_zeros<F>(&self, mut f: F, max_samples: usize) -> Result<i64, Error>
    where
        F: FnMut(C64) -> Result<C64, Error>,
    {
        let mut n = self.samples;
        let mut vals: Vec<C64> = (0..n).map(|k| f(self.point(k, n))).collect::<Result<_, _>>()?;
        loop {
            match winding_count(&vals) {
                Err(Error::Undersampled { jump }) => {
                    if 2 * n > max_samples {
                        return Err(Error::Undersampled { jump });
                    }
                    let mut next = Vec::with_capacity(2 * n);
                    for (k, v) in vals.iter().enumerate() {
                        next.push(*v);
                        next.push(f(self.point(2 * k + 1, 2 * n))?);
                    }
                    vals = next;
                    n *= 2;
                }
                other => return other,
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the Legendre
/// recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
