use std::collections::BTreeMap;

use num_rational::BigRational;
use proptest::prelude::*;

use finsler_core::algebra::formulas::{rotation_field, solve_first_order_system};
use finsler_core::algebra::poly::{integer, rational};
use finsler_core::algebra::{lie_bracket, ModelParams, SpherePolynomial, SphereVectorField};
use finsler_core::sampling::euclidean_sphere_grid;

const N: usize = 3;

fn poly_strategy() -> impl Strategy<Value = SpherePolynomial> {
    prop::collection::vec((prop::collection::vec(0u16..3, N), -4i64..5), 0..5).prop_map(|terms| {
        let mut map: BTreeMap<Vec<u16>, BigRational> = BTreeMap::new();
        for (e, c) in terms {
            *map.entry(e).or_insert_with(|| integer(0)) += integer(c);
        }
        SpherePolynomial::from_ambient(N, map)
    })
}

fn field_strategy() -> impl Strategy<Value = SphereVectorField> {
    (poly_strategy(), poly_strategy(), poly_strategy()).prop_map(|(a, b, c)| {
        let p = ModelParams::new(N, integer(1), integer(1)).unwrap();
        rotation_field(&p, 0, 1)
            .unwrap()
            .mul_poly(&a)
            .add(&rotation_field(&p, 1, 2).unwrap().mul_poly(&b))
            .add(&rotation_field(&p, 0, 2).unwrap().mul_poly(&c))
    })
}

fn sphere_points() -> Vec<Vec<f64>> {
    euclidean_sphere_grid(N, 8, 11).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduction_is_canonical_and_multiplicative(p in poly_strategy(), q in poly_strategy()) {
        prop_assert!(p.is_canonical());
        let again = SpherePolynomial::from_ambient(N, p.terms().clone());
        prop_assert_eq!(&again, &p);
        let pq = &p * &q;
        prop_assert!(pq.is_canonical());
        for y in sphere_points() {
            let lhs = pq.eval(&y);
            let rhs = p.eval(&y) * q.eval(&y);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            let s = (&p + &q).eval(&y);
            prop_assert!((s - p.eval(&y) - q.eval(&y)).abs() <= 1e-9 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn bracket_is_antisymmetric_and_tangent(v in field_strategy(), w in field_strategy()) {
        let vw = lie_bracket(&v, &w).unwrap();
        let wv = lie_bracket(&w, &v).unwrap();
        prop_assert!(vw.add(&wv).is_zero());
        prop_assert!(vw.is_tangent());
    }

    #[test]
    fn bracket_satisfies_jacobi(u in field_strategy(), v in field_strategy(), w in field_strategy()) {
        let a = lie_bracket(&u, &lie_bracket(&v, &w).unwrap()).unwrap();
        let b = lie_bracket(&v, &lie_bracket(&w, &u).unwrap()).unwrap();
        let c = lie_bracket(&w, &lie_bracket(&u, &v).unwrap()).unwrap();
        prop_assert!(a.add(&b).add(&c).is_zero());
    }

    #[test]
    fn bracket_is_a_derivation(v in field_strategy(), w in field_strategy(), f in poly_strategy()) {
        // [V, fW] = V(f) W + f [V, W]
        let lhs = lie_bracket(&v, &w.mul_poly(&f)).unwrap();
        let rhs = w.mul_poly(&v.apply(&f)).add(&lie_bracket(&v, &w).unwrap().mul_poly(&f));
        prop_assert_eq!(lhs, rhs);
    }
}

#[test]
fn bracket_matches_numeric_commutator() {
    // [V, W]^i = V(W^i) - W(V^i), checked against central differences of the
    // ambient polynomial components
    let p = ModelParams::new(N, rational(1, 2), rational(-1, 4)).unwrap();
    let y0 = SpherePolynomial::var(N, 0);
    let y2 = SpherePolynomial::var(N, 2);
    let v = rotation_field(&p, 0, 1).unwrap().mul_poly(&(&y2 * &y2));
    let w = rotation_field(&p, 1, 2).unwrap().mul_poly(&y0);
    let b = lie_bracket(&v, &w).unwrap();
    let h = 1e-6;
    for y in sphere_points() {
        let dv = v.eval(&y);
        let dw = w.eval(&y);
        let deriv = |f: &SphereVectorField, dir: &[f64]| -> Vec<f64> {
            let yp: Vec<f64> = y.iter().zip(dir).map(|(a, d)| a + h * d).collect();
            let ym: Vec<f64> = y.iter().zip(dir).map(|(a, d)| a - h * d).collect();
            f.eval(&yp).iter().zip(f.eval(&ym)).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        let vw = deriv(&w, &dv);
        let wv = deriv(&v, &dw);
        let got = b.eval(&y);
        for i in 0..N {
            assert!((got[i] - (vw[i] - wv[i])).abs() < 1e-7, "{} vs {}", got[i], vw[i] - wv[i]);
        }
    }
}

#[test]
fn first_order_solution_is_exact_for_several_models() {
    for n in 2..=4 {
        for (c, l) in [(rational(1, 2), rational(-1, 4)), (integer(3), integer(2))] {
            let p = ModelParams::new(n, c, l).unwrap();
            for j in 0..n {
                let sol = solve_first_order_system(&p, j).unwrap();
                assert_eq!(sol.len(), n - 1);
            }
        }
    }
}

#[test]
fn non_tangent_fields_are_rejected() {
    let comps = (0..N).map(|i| SpherePolynomial::var(N, i)).collect();
    assert!(SphereVectorField::new(comps).is_err());
}
