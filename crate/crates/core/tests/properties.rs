use manakov_core::algebra::{cubic_residual, eigenvalues3};
use manakov_core::multipliers::{disc_trace, multipliers, LabelRequest};
use manakov_core::potential::FourierMode;
use manakov_core::{cubic_roots, expm3, propagate, winding_count, CMat3, Potential, C64};
use proptest::prelude::*;

fn cplx(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| C64::new(a, b))
}

fn mat(r: f64) -> impl Strategy<Value = CMat3> {
    proptest::collection::vec(cplx(r), 9).prop_map(|v| CMat3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]))
}

fn potential() -> impl Strategy<Value = Potential> {
    proptest::collection::vec((-3i64..=3, cplx(0.6), cplx(0.6)), 1..4).prop_map(|modes| {
        Potential::fourier(modes.into_iter().map(|(n, v1, v2)| FourierMode { n, v1, v2 }).collect())
            .with_resolution(128)
            .unwrap()
    })
}

fn dist(a: &CMat3, b: &CMat3) -> f64 {
    (*a - *b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn expm_inverse_and_determinant(a in mat(3.0)) {
        let e = expm3(&a).unwrap();
        let f = expm3(&a.scale(C64::new(-1.0, 0.0))).unwrap();
        let scale = e.max_abs() * f.max_abs();
        prop_assert!(dist(&(e * f), &CMat3::identity()) <= 1e-11 * scale);
        let want = a.trace().exp();
        prop_assert!((e.det() - want).norm() <= 1e-10 * e.max_abs().powi(3).max(1.0));
    }

    #[test]
    fn cubic_roots_reconstruct(r in proptest::array::uniform3(cplx(4.0))) {
        let [a, b, c] = r;
        let coeffs = [-(a * b * c), a * b + a * c + b * c, -(a + b + c)];
        let z = cubic_roots(coeffs).unwrap();
        let scale = 1.0 + r.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for zk in z {
            prop_assert!(cubic_residual(coeffs, zk) <= 1e-11 * scale.powi(3));
        }
        prop_assert!((z[0] + z[1] + z[2] - (a + b + c)).norm() <= 1e-11 * scale);
        prop_assert!((z[0] * z[1] * z[2] - a * b * c).norm() <= 1e-10 * scale.powi(3));
    }

    #[test]
    fn schur_eigenvalues_match_invariants(a in mat(2.0)) {
        let ev = eigenvalues3(&a).unwrap();
        let s = a.max_abs().max(1.0);
        prop_assert!((ev[0] + ev[1] + ev[2] - a.trace()).norm() <= 1e-12 * s * 3.0);
        prop_assert!((ev[0] * ev[1] * ev[2] - a.det()).norm() <= 1e-11 * s.powi(3) * 27.0);
        prop_assert!(ev[0].norm() <= ev[1].norm() && ev[1].norm() <= ev[2].norm());
    }

    #[test]
    fn winding_of_circle(k in -4i64..=4, n in 64usize..256, r in 0.1f64..10.0, c in cplx(0.05)) {
        let vals: Vec<C64> = (0..n)
            .map(|j| c + C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 * j as f64 / n as f64))
            .collect();
        prop_assert_eq!(winding_count(&vals).unwrap(), if k == 0 { 0 } else { k });
    }

    #[test]
    fn moments_scale_linearly(p in potential(), s in 0.1f64..4.0) {
        let n = p.canonicalize().moments().norm();
        let ns = p.scaled(s).canonicalize().moments().norm();
        prop_assert!((ns - s * n).abs() <= 1e-12 * (1.0 + s * n));
    }

    #[test]
    fn json_round_trip(p in potential()) {
        let q = Potential::from_json(&p.to_json()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn monodromy_invariants(p in potential(), re in -15.0f64..15.0, im in -1.0f64..1.0) {
        let steps = p.canonicalize();
        let l = C64::new(re, im);
        let mr = propagate(&steps, l).unwrap();
        let e = (C64::i() * l).exp();
        prop_assert!((mr.det_psi - e).norm() <= 1e-12 * e.norm());
        let mt = multipliers(&mr, LabelRequest::Unordered).unwrap();
        let [a, b, c] = mt.tau;
        prop_assert!((a * b * c - e).norm() <= 1e-9 * e.norm().max(1.0));
        prop_assert!((a + b + c - mr.t).norm() <= 1e-9 * mr.t.norm().max(1.0));
    }

    #[test]
    fn discriminant_real_on_real_axis(p in potential(), x in -15.0f64..15.0) {
        let steps = p.canonicalize();
        let mr = propagate(&steps, C64::new(x, 0.0)).unwrap();
        let d = disc_trace(mr.t, mr.t_tilde, C64::new(x, 0.0));
        prop_assert!(d.im.abs() <= 1e-9 * d.norm().max(1.0));
    }
}
