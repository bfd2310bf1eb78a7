//! The 1-periodic potential `v = (v1, v2)`, its canonical step form and its
//! scalar moments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, C64};

pub const DEFAULT_RESOLUTION: usize = 512;
pub const RANK_ONE_TOL_EXACT: f64 = 1e-10;
pub const RANK_ONE_TOL_SAMPLED: f64 = 1e-6;

/// Input representation of a potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "lowercase")]
pub enum Representation {
    /// Constant on `[breakpoints[k], breakpoints[k+1])`.
    Piecewise { breakpoints: Vec<f64>, values: Vec<[C64; 2]> },
    /// `v(x) = sum_n c_n e^{2 pi i n x}`.
    Fourier(Vec<FourierMode>),
    /// Values at the midpoints `(k + 1/2)/N`.
    Samples { v1: Vec<C64>, v2: Vec<C64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub n: i64,
    pub v1: C64,
    pub v2: C64,
}

/// A validated potential. Serializes to the documented JSON form
/// `{"type": ..., "data": ..., "resolution": M}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub repr: Representation,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}

fn finite(z: &C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

impl Potential {
    pub fn new(repr: Representation, resolution: usize) -> Result<Self, Error> {
        let p = Potential { repr, resolution };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        Self::constant(C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn constant(a: C64, b: C64) -> Self {
        Potential {
            repr: Representation::Piecewise { breakpoints: vec![0.0, 1.0], values: vec![[a, b]] },
            resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn fourier(modes: Vec<FourierMode>) -> Self {
        Potential { repr: Representation::Fourier(modes), resolution: DEFAULT_RESOLUTION }
    }

    pub fn with_resolution(mut self, m: usize) -> Result<Self, Error> {
        self.resolution = m;
        self.validate()?;
        Ok(self)
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        let p: Potential =
            serde_json::from_str(s).map_err(|e| Error::InvalidPotential(format!("JSON: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("potential serializes")
    }

    pub fn validate(&self) -> Result<(), Error> {
        let m = self.resolution;
        if m < 32 || !m.is_power_of_two() {
            return Err(Error::InvalidPotential(format!("resolution {m} must be a power of two >= 32")));
        }
        match &self.repr {
            Representation::Piecewise { breakpoints: b, values } => {
                if b.len() < 2 || values.len() != b.len() - 1 {
                    return Err(Error::InvalidPotential(
                        "piecewise needs n+1 breakpoints for n values".into(),
                    ));
                }
                if b[0] != 0.0 || b[b.len() - 1] != 1.0 {
                    return Err(Error::InvalidPotential("breakpoints must start at 0 and end at 1".into()));
                }
                if b.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidPotential("breakpoints must be strictly increasing".into()));
                }
                if values.iter().flatten().any(|z| !finite(z)) {
                    return Err(Error::InvalidPotential("non-finite value".into()));
                }
            }
            Representation::Fourier(modes) => {
                if modes.iter().any(|m| !finite(&m.v1) || !finite(&m.v2)) {
                    return Err(Error::InvalidPotential("non-finite Fourier coefficient".into()));
                }
            }
            Representation::Samples { v1, v2 } => {
                if v1.is_empty() || v1.len() != v2.len() {
                    return Err(Error::InvalidPotential("samples need equal nonzero lengths".into()));
                }
                if v1.iter().chain(v2).any(|z| !finite(z)) {
                    return Err(Error::InvalidPotential("non-finite sample".into()));
                }
            }
        }
        Ok(())
    }

    /// Whether the representation is exact (piecewise) rather than sampled.
    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Representation::Piecewise { .. })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        match &mut p.repr {
            Representation::Piecewise { values, .. } => {
                values.iter_mut().flatten().for_each(|z| *z *= s);
            }
            Representation::Fourier(modes) => modes.iter_mut().for_each(|m| {
                m.v1 *= s;
                m.v2 *= s;
            }),
            Representation::Samples { v1, v2 } => v1.iter_mut().chain(v2.iter_mut()).for_each(|z| *z *= s),
        }
        p
    }

    /// Pointwise value at `x` (period 1). For piecewise input this is the
    /// right-continuous value.
    pub fn eval(&self, x: f64) -> [C64; 2] {
        let x = x.rem_euclid(1.0);
        match &self.repr {
            Representation::Piecewise { breakpoints, values } => {
                let k = breakpoints.partition_point(|&b| b <= x).clamp(1, values.len());
                values[k - 1]
            }
            Representation::Fourier(modes) => {
                let mut out = [C64::new(0.0, 0.0); 2];
                for m in modes {
                    let e = C64::from_polar(1.0, 2.0 * PI * m.n as f64 * x);
                    out[0] += m.v1 * e;
                    out[1] += m.v2 * e;
                }
                out
            }
            Representation::Samples { v1, v2 } => {
                // periodic linear interpolation between midpoints
                let n = v1.len();
                let t = x * n as f64 - 0.5;
                let j0 = t.floor();
                let f = t - j0;
                let i0 = (j0 as i64).rem_euclid(n as i64) as usize;
                let i1 = (i0 + 1) % n;
                [v1[i0] * (1.0 - f) + v1[i1] * f, v2[i0] * (1.0 - f) + v2[i1] * f]
            }
        }
    }

    /// Piecewise-constant form on the uniform M-grid, refined at any
    /// breakpoints that do not fall on it.
    pub fn canonicalize(&self) -> StepPotential {
        let m = self.resolution;
        let h = 1.0 / m as f64;
        let steps = match &self.repr {
            Representation::Piecewise { breakpoints, values } => {
                let mut nodes: Vec<f64> = (0..=m).map(|k| k as f64 * h).collect();
                nodes.extend_from_slice(breakpoints);
                nodes.sort_by(f64::total_cmp);
                nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
                nodes
                    .windows(2)
                    .map(|w| {
                        let mid = 0.5 * (w[0] + w[1]);
                        let k = breakpoints.partition_point(|&b| b <= mid).clamp(1, values.len());
                        Step { x0: w[0], width: w[1] - w[0], value: values[k - 1] }
                    })
                    .collect()
            }
            Representation::Samples { v1, v2 } if v1.len() == m => (0..m)
                .map(|k| Step { x0: k as f64 * h, width: h, value: [v1[k], v2[k]] })
                .collect(),
            _ => (0..m)
                .map(|k| Step { x0: k as f64 * h, width: h, value: self.eval((k as f64 + 0.5) * h) })
                .collect(),
        };
        StepPotential { steps, exact: self.is_exact() }
    }
}

/// One constant piece `v(x) = value` on `[x0, x0 + width)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub x0: f64,
    pub width: f64,
    pub value: [C64; 2],
}

/// Canonical integrator representation: consecutive constant steps covering
/// `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPotential {
    pub steps: Vec<Step>,
    /// True when the steps reproduce the input exactly.
    pub exact: bool,
}

/// Scalar functionals of v.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PotentialMoments {
    pub norm_sq: f64,
    pub c1: f64,
    pub c2: f64,
    pub c12: C64,
    /// Eigenvalues of the averaged squared potential, ascending: (b1, b2, b3).
    pub beta: [f64; 3],
    pub beta_o: f64,
}

impl PotentialMoments {
    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }
}

impl StepPotential {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn negated(&self) -> Self {
        let mut s = self.clone();
        s.steps.iter_mut().for_each(|st| st.value = [-st.value[0], -st.value[1]]);
        s
    }

    pub fn sup_norm(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| (s.value[0].norm_sqr() + s.value[1].norm_sqr()).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn moments(&self) -> PotentialMoments {
        let (mut c1, mut c2, mut c12) = (0.0, 0.0, C64::new(0.0, 0.0));
        for s in &self.steps {
            let [a, b] = s.value;
            c1 += s.width * a.norm_sqr();
            c2 += s.width * b.norm_sqr();
            c12 += a * b.conj() * s.width;
        }
        let norm_sq = c1 + c2;
        let beta_o = (c1 - c2).powi(2) + 4.0 * c12.norm_sqr();
        let root = beta_o.sqrt();
        let b2 = 0.5 * (norm_sq + root);
        // b1 b2 = c1 c2 - |c12|^2, evaluated as a Gram determinant without
        // cancellation (Lagrange identity)
        let gram = self.gram_det();
        let b1 = if b2 > 0.0 { (gram / b2).min(0.5 * norm_sq) } else { 0.0 };
        PotentialMoments { norm_sq, c1, c2, c12, beta: [b1, b2, norm_sq], beta_o }
    }

    /// `c1 c2 - |c12|^2 = 1/2 sum_{k,l} w_k w_l |a_k b_l - a_l b_k|^2 >= 0`.
    fn gram_det(&self) -> f64 {
        let s = &self.steps;
        let mut acc = 0.0;
        for k in 0..s.len() {
            let [ak, bk] = s[k].value;
            let mut inner = 0.0;
            for l in 0..k {
                let [al, bl] = s[l].value;
                inner += s[l].width * (ak * bl - al * bk).norm_sqr();
            }
            acc += s[k].width * inner;
        }
        acc
    }

    /// `v_hat(lambda) = int_0^1 e^{2 i lambda x} v(x) dx`, exact per step.
    pub fn fourier_hat(&self, lambda: C64) -> [C64; 2] {
        let mut out = [C64::new(0.0, 0.0); 2];
        let i2l = C64::new(0.0, 2.0) * lambda;
        for s in &self.steps {
            let f = (i2l * s.x0).exp() * s.width * phi1(i2l * s.width);
            out[0] += s.value[0] * f;
            out[1] += s.value[1] * f;
        }
        out
    }

    /// Membership in the rank-one class: `b1 <= tol * max(1, |v|^2)`.
    pub fn is_rank_one(&self, tol: f64) -> bool {
        let m = self.moments();
        m.beta[0] <= tol * m.norm_sq.max(1.0)
    }

    pub fn default_rank_one_tol(&self) -> f64 {
        if self.exact {
            RANK_ONE_TOL_EXACT
        } else {
            RANK_ONE_TOL_SAMPLED
        }
    }
}

/// `(e^z - 1)/z`, with a series near zero.
pub fn phi1(z: C64) -> C64 {
    if z.norm() < 0.5 {
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..30 {
            term = term * z / k as f64;
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_moments() {
        let m = Potential::constant(c(1.0, 0.0), c(0.0, 0.0)).canonicalize().moments();
        assert_eq!((m.c1, m.c2), (1.0, 0.0));
        assert!(m.beta[0].abs() < 1e-15 && (m.beta[1] - 1.0).abs() < 1e-15 && m.beta[2] == 1.0);
        let m = Potential::constant(c(1.0, 0.0), c(1.0, 0.0)).canonicalize().moments();
        assert!((m.c12 - 1.0).norm() < 1e-14 && (m.beta_o - 4.0).abs() < 1e-13);
        assert!(m.beta[0].abs() < 1e-14 && (m.beta[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn zero_moments() {
        let m = Potential::zero().canonicalize().moments();
        assert_eq!(m.norm_sq, 0.0);
        assert_eq!(m.beta, [0.0; 3]);
    }

    #[test]
    fn fourier_midpoint_canonicalization() {
        let p = Potential::fourier(vec![FourierMode { n: 1, v1: c(1.0, 0.0), v2: c(0.0, 0.0) }]);
        let s = p.canonicalize();
        assert_eq!(s.len(), 512);
        for (k, st) in s.steps.iter().enumerate() {
            let want = C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / 512.0);
            assert!((st.value[0] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn piecewise_passthrough_and_refinement() {
        let repr = Representation::Piecewise {
            breakpoints: vec![0.0, 0.5, 1.0],
            values: vec![[c(1.0, 0.0), c(0.0, 1.0)], [c(-2.0, 0.0), c(0.5, 0.0)]],
        };
        let s = Potential::new(repr, 64).unwrap().canonicalize();
        assert_eq!(s.len(), 64);
        assert!(s.steps[..32].iter().all(|st| st.value == [c(1.0, 0.0), c(0.0, 1.0)]));
        assert!(s.steps[32..].iter().all(|st| st.value == [c(-2.0, 0.0), c(0.5, 0.0)]));

        let repr = Representation::Piecewise {
            breakpoints: vec![0.0, 0.3, 1.0],
            values: vec![[c(1.0, 0.0), c(0.0, 0.0)], [c(2.0, 0.0), c(0.0, 0.0)]],
        };
        let s = Potential::new(repr, 32).unwrap().canonicalize();
        assert_eq!(s.len(), 33);
        let total: f64 = s.steps.iter().map(|st| st.width).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let m = s.moments();
        assert!((m.c1 - (0.3 + 4.0 * 0.7)).abs() < 1e-13);
    }

    #[test]
    fn fourier_hat_cases() {
        let s = Potential::constant(c(0.3, 0.1), c(-0.2, 0.0)).canonicalize();
        let h = s.fourier_hat(c(0.0, 0.0));
        assert!((h[0] - c(0.3, 0.1)).norm() < 1e-14);
        let h = s.fourier_hat(c(3.0 * PI, 0.0));
        assert!(h[0].norm() < 1e-13 && h[1].norm() < 1e-13);
        let p = Potential::fourier(vec![FourierMode { n: -1, v1: c(1.0, 0.0), v2: c(0.0, 0.0) }]);
        let h = p.canonicalize().fourier_hat(c(PI, 0.0));
        assert!((h[0] - 1.0).norm() <= (PI / 512.0).powi(2));
    }

    #[test]
    fn rank_one_detection() {
        let u = vec![
            FourierMode { n: 1, v1: c(0.4, 0.0), v2: c(1.2, 0.0) },
            FourierMode { n: -2, v1: c(0.0, 0.1), v2: c(0.0, 0.3) },
        ];
        assert!(Potential::fourier(u).canonicalize().is_rank_one(1e-10));
        let two = vec![
            FourierMode { n: 0, v1: c(1.0, 0.0), v2: c(0.0, 0.0) },
            FourierMode { n: 1, v1: c(0.0, 0.0), v2: c(1.0, 0.0) },
        ];
        let s = Potential::fourier(two).canonicalize();
        assert!(!s.is_rank_one(1e-6));
        assert!((s.moments().beta[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip_and_errors() {
        let p = Potential::new(
            Representation::Piecewise {
                breakpoints: vec![0.0, 0.1 + 0.2, 1.0],
                values: vec![[c(0.1, 1.0 / 3.0), c(0.0, 0.0)], [c(-1e-300, 7.0), c(2.5, -0.1)]],
            },
            256,
        )
        .unwrap();
        let back = Potential::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert!(Potential::from_json("{\"type\":\"fourier\"").is_err());
        assert!(Potential::from_json(r#"{"type":"fourier","data":[],"resolution":100}"#).is_err());
        let ok = Potential::from_json(r#"{"type":"fourier","data":[{"n":1,"v1":[0.3,0],"v2":[0,0]}]}"#).unwrap();
        assert_eq!(ok.resolution, 512);
    }

    #[test]
    fn samples_interpolation() {
        let n = 64;
        let v1: Vec<C64> = (0..n).map(|k| C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / n as f64)).collect();
        let v2 = vec![c(0.0, 0.0); n];
        let p = Potential::new(Representation::Samples { v1: v1.clone(), v2: v2.clone() }, 64).unwrap();
        let s = p.canonicalize();
        assert!(s.steps.iter().zip(&v1).all(|(st, v)| st.value[0] == *v));
        let s = p.with_resolution(128).unwrap().canonicalize();
        assert_eq!(s.len(), 128);
        let x = 2.5 / 128.0;
        assert!((s.steps[2].value[0] - C64::from_polar(1.0, 2.0 * PI * x)).norm() < 2e-3);
    }
}
