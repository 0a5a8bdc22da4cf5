use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

use approx::assert_relative_eq;
use proptest::prelude::*;

use finsler_core::curvature::fit_flag_curvature;
use finsler_core::sampling::{indicatrix_grid, random_point_pairs};
use finsler_core::spray::symmetric_point;
use finsler_core::{
    connection_x_derivatives, directional_derivatives, eval_norm, fundamental_tensor,
    parallel_transport, projective_factor, spray, CurveSpec, FinslerMetricSpec, NormQuantity,
    Point, TangentVector,
};

fn metrics(n: usize) -> Vec<FinslerMetricSpec> {
    vec![
        FinslerMetricSpec::funk(n).unwrap(),
        FinslerMetricSpec::funk_with_sign(n, -1).unwrap(),
        FinslerMetricSpec::bryant_shen(n, FRAC_PI_6).unwrap(),
        FinslerMetricSpec::bryant_shen(n, FRAC_PI_4).unwrap(),
    ]
}

fn inside(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-0.4f64..0.4, n),
        prop::collection::vec(-1.0f64..1.0, n),
    )
        .prop_filter("y must be away from zero", |(_, y)| {
            y.iter().map(|v| v * v).sum::<f64>() > 1e-2
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn norm_and_tensor_are_homogeneous((x, y) in inside(3), t in 0.1f64..10.0) {
        for m in metrics(3) {
            let (x, y1) = (Point::new(x.clone()), TangentVector::new(y.clone()));
            let yt = y1.scaled(t);
            let f1 = eval_norm(&m, &x, &y1).unwrap();
            let ft = eval_norm(&m, &x, &yt).unwrap();
            prop_assert!((ft - t * f1).abs() <= 1e-12 * ft.abs().max(1.0));
            let g1 = fundamental_tensor(&m, &x, &y1).unwrap();
            let gt = fundamental_tensor(&m, &x, &yt).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((g1.g[i][j] - gt.g[i][j]).abs() <= 1e-10);
                }
            }
            // Euler: g(y, y) = F²
            prop_assert!((g1.apply(&y, &y) - f1 * f1).abs() <= 1e-11 * f1 * f1);
        }
    }

    #[test]
    fn spray_is_quadratic_and_projective((x, y) in inside(3), t in 0.1f64..10.0) {
        for m in metrics(3) {
            let (x, y1) = (Point::new(x.clone()), TangentVector::new(y.clone()));
            let s1 = spray(&m, &x, &y1).unwrap();
            let st = spray(&m, &x, &y1.scaled(t)).unwrap();
            let p = projective_factor(&m, &x, &y1).unwrap();
            let scale = s1.g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-3);
            for i in 0..3 {
                prop_assert!((st.g[i] - t * t * s1.g[i]).abs() <= 1e-10 * t * t * scale);
                prop_assert!((s1.g[i] - p.p * y[i]).abs() <= 1e-8 * scale);
            }
        }
    }
}

#[test]
fn jet_derivatives_match_finite_differences() {
    let h = 1e-5;
    for m in metrics(3) {
        for (x, y) in random_point_pairs(3, 5, 0.5, 7) {
            let d = directional_derivatives(&m, &x, &y, 2, 2, NormQuantity::Norm).unwrap();
            let f = |xs: &[f64], ys: &[f64]| {
                eval_norm(&m, &Point::new(xs.to_vec()), &TangentVector::new(ys.to_vec())).unwrap()
            };
            for i in 0..3 {
                let mut xp = x.0.clone();
                let mut xm = x.0.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (f(&xp, &y.0) - f(&xm, &y.0)) / (2.0 * h);
                assert_relative_eq!(d.partial(&[i], &[]).unwrap(), fd, epsilon = 1e-8, max_relative = 1e-7);
                let fdd = (f(&xp, &y.0) - 2.0 * f(&x.0, &y.0) + f(&xm, &y.0)) / (h * h);
                assert_relative_eq!(d.partial(&[i, i], &[]).unwrap(), fdd, epsilon = 1e-4, max_relative = 1e-4);
                let mut yp = y.0.clone();
                let mut ym = y.0.clone();
                yp[i] += h;
                ym[i] -= h;
                let fd = (f(&x.0, &yp) - f(&x.0, &ym)) / (2.0 * h);
                assert_relative_eq!(d.partial(&[], &[i]).unwrap(), fd, epsilon = 1e-8, max_relative = 1e-7);
                // mixed ∂x∂y from differences of the jet y-gradient
                let gp = directional_derivatives(&m, &Point::new(xp.clone()), &y, 0, 1, NormQuantity::Norm).unwrap();
                let gm = directional_derivatives(&m, &Point::new(xm.clone()), &y, 0, 1, NormQuantity::Norm).unwrap();
                for j in 0..3 {
                    let fd = (gp.partial(&[], &[j]).unwrap() - gm.partial(&[], &[j]).unwrap()) / (2.0 * h);
                    assert_relative_eq!(d.partial(&[i], &[j]).unwrap(), fd, epsilon = 1e-8, max_relative = 1e-6);
                }
            }
        }
    }
}

#[test]
fn derivative_orders_beyond_capability_are_rejected() {
    let m = FinslerMetricSpec::funk(2).unwrap();
    let (x, y) = (Point::zeros(2), TangentVector::new(vec![1.0, 0.0]));
    assert!(directional_derivatives(&m, &x, &y, 3, 0, NormQuantity::Norm).is_err());
    let d = directional_derivatives(&m, &x, &y, 1, 1, NormQuantity::Norm).unwrap();
    assert!(d.partial(&[0, 1], &[]).is_err());
}

#[test]
fn bryant_shen_at_origin_matches_symmetric_point() {
    let y = vec![0.4, -0.9, 0.25];
    let r = (y.iter().map(|v| v * v).sum::<f64>()).sqrt();
    for alpha in [FRAC_PI_6, FRAC_PI_4, 0.4] {
        let m = FinslerMetricSpec::bryant_shen(3, alpha).unwrap();
        let (x, t) = (Point::zeros(3), TangentVector::new(y.clone()));
        let p = projective_factor(&m, &x, &t).unwrap();
        assert_relative_eq!(p.p, r * alpha.sin(), max_relative = 1e-12);

        // normalized so F(0, y) = |y|: the symmetric-point constants are
        // c = sin α and λ = cos² α
        let nm = m.normalized_at_origin().unwrap();
        assert_relative_eq!(eval_norm(&nm, &x, &t).unwrap(), r, max_relative = 1e-13);
        let (c, lambda) = (alpha.sin(), alpha.cos().powi(2));
        assert_relative_eq!(nm.flag_curvature(), lambda, max_relative = 1e-12);
        let sd = spray(&nm, &x, &t).unwrap();
        let closed = symmetric_point::spray(c, &y);
        for i in 0..3 {
            assert_relative_eq!(sd.g[i], closed.g[i], max_relative = 1e-10);
            for j in 0..3 {
                assert_relative_eq!(sd.gj[i][j], closed.gj[i][j], epsilon = 1e-12, max_relative = 1e-10);
            }
        }
        let dx = connection_x_derivatives(&nm, &x, &t).unwrap();
        let closed = symmetric_point::connection_x_derivatives(c, lambda, &y);
        for i in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    assert_relative_eq!(dx[i][k][l], closed[i][k][l], epsilon = 1e-10, max_relative = 1e-8);
                }
            }
        }
    }
}

#[test]
fn scaling_divides_flag_curvature() {
    let m = FinslerMetricSpec::funk(3).unwrap().scaled(2.0).unwrap();
    let fit = fit_flag_curvature(&m, &random_point_pairs(3, 20, 0.5, 3)).unwrap();
    assert_relative_eq!(fit.lambda, -1.0 / 16.0, max_relative = 1e-10);
    assert!(fit.max_relative_residual < 1e-9);
}

#[test]
fn transport_is_positively_homogeneous() {
    let m = FinslerMetricSpec::bryant_shen(3, FRAC_PI_6).unwrap();
    let base = Point::new(vec![0.1, 0.05, -0.1]);
    let curve = CurveSpec::rectangle(base.clone(), 0, 2, 0.15, 0.1);
    for u in indicatrix_grid(&m, &base, 4, 1).unwrap() {
        let a = parallel_transport(&m, &curve, &u, 1e-10).unwrap();
        let b = parallel_transport(&m, &curve, &u.scaled(3.0), 1e-10).unwrap();
        for (p, q) in a.endpoint_vector.0.iter().zip(&b.endpoint_vector.0) {
            assert_relative_eq!(3.0 * p, *q, epsilon = 1e-9);
        }
    }
}

#[test]
fn transport_is_independent_of_parametrization() {
    let m = FinslerMetricSpec::funk(3).unwrap();
    let (a, b) = (Point::new(vec![-0.2, 0.1, 0.0]), Point::new(vec![0.3, -0.1, 0.2]));
    let dir: Vec<f64> = b.0.iter().zip(&a.0).map(|(p, q)| p - q).collect();
    let line = CurveSpec::polyline(vec![a.clone(), b.clone()]);
    // same segment traversed with speed 0.5 at the ends and 1.5 at the middle
    let mid = Point::new(a.0.iter().zip(&dir).map(|(p, d)| p + 0.5 * d).collect());
    let hermite = CurveSpec::parametric(
        vec![a.clone(), mid, b.clone()],
        vec![
            TangentVector::new(dir.iter().map(|d| 0.5 * d).collect()),
            TangentVector::new(dir.iter().map(|d| 1.5 * d).collect()),
            TangentVector::new(dir.iter().map(|d| 0.5 * d).collect()),
        ],
    );
    for u in indicatrix_grid(&m, &a, 6, 2).unwrap() {
        let p = parallel_transport(&m, &line, &u, 1e-11).unwrap();
        let q = parallel_transport(&m, &hermite, &u, 1e-11).unwrap();
        for (s, t) in p.endpoint_vector.0.iter().zip(&q.endpoint_vector.0) {
            assert!((s - t).abs() <= 1e-8, "{s} vs {t}");
        }
    }
}

#[test]
fn transport_along_reversed_curve_inverts() {
    let m = FinslerMetricSpec::funk_with_sign(2, -1).unwrap();
    let curve = CurveSpec::polyline(vec![
        Point::new(vec![0.0, 0.0]),
        Point::new(vec![0.4, 0.1]),
        Point::new(vec![0.2, 0.5]),
    ]);
    for u in indicatrix_grid(&m, &Point::zeros(2), 5, 0).unwrap() {
        let there = parallel_transport(&m, &curve, &u, 1e-10).unwrap();
        assert!(there.norm_drift < 1e-8);
        let back = parallel_transport(&m, &curve.clone().reversed(), &there.endpoint_vector, 1e-10).unwrap();
        for (s, t) in back.endpoint_vector.0.iter().zip(&u.0) {
            assert!((s - t).abs() <= 1e-8);
        }
    }
}

#[test]
fn euclidean_transport_is_trivial() {
    let m = FinslerMetricSpec::euclidean(3).unwrap();
    let curve = CurveSpec::rectangle(Point::new(vec![5.0, -2.0, 1.0]), 1, 2, 3.0, 1.0);
    let u = TangentVector::new(vec![0.2, -0.3, 0.9]);
    let r = parallel_transport(&m, &curve, &u, 1e-10).unwrap();
    for (s, t) in r.endpoint_vector.0.iter().zip(&u.0) {
        assert!((s - t).abs() < 1e-14);
    }
}
