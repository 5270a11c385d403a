//! Property-based invariants over randomized inputs.

use parweyl::chart::{jet_relative_deviation, ChartSpec, MetricField};
use parweyl::curvature::curvature_bundle;
use parweyl::expr::{Expr, PiecewisePoly, Poly};
use parweyl::families::{build_d1_metric, d1_fixture};
use parweyl::geodesic::{integrate_geodesic, GeodesicState};
use parweyl::linalg;
use parweyl::olszak::olszak_fiber;
use parweyl::tensor::{
    for_each_index, pair_basis, two_form_operator, valued_wedge, DenseTensor, Variance,
};
use proptest::prelude::*;

fn symmetric_tensor(n: usize, entries: &[f64]) -> DenseTensor<f64> {
    let mut t = DenseTensor::zeros(n, vec![Variance::Covariant; 2]).unwrap();
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            t.set(&[i, j], entries[k]);
            t.set(&[j, i], entries[k]);
            k += 1;
        }
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn valued_wedge_pair_exchange_is_exact(
        a_entries in prop::collection::vec(-5.0f64..5.0, 10),
        b_entries in prop::collection::vec(-5.0f64..5.0, 10),
    ) {
        let n = 4;
        let a = symmetric_tensor(n, &a_entries);
        let b = symmetric_tensor(n, &b_entries);
        let ab = valued_wedge(&a, &b).unwrap();
        let ba = valued_wedge(&b, &a).unwrap();
        let mut exact = true;
        for_each_index(n, 4, |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            // antisymmetries and pair exchange hold bit-exactly
            exact &= ab.get(idx) == -ab.get(&[j, i, k, l]);
            exact &= ab.get(idx) == -ab.get(&[i, j, l, k]);
            exact &= ab.get(idx) == ba.get(&[k, l, i, j]);
        });
        prop_assert!(exact);
    }

    #[test]
    fn exact_jets_agree_with_central_differences(
        coeffs in prop::collection::vec(-0.3f64..0.3, 9),
        px in -0.5f64..0.5,
        py in -0.5f64..0.5,
    ) {
        // Random nondegenerate 2D metric: diagonal dominated by constants,
        // quadratic polynomial perturbations.
        let chart = ChartSpec::new(vec![(-1.0, 1.0); 2], vec!["x".into(), "y".into()]).unwrap();
        let poly = |c0: f64, c1: f64, c2: f64| {
            let x = Poly::coord(2, 0);
            let y = Poly::coord(2, 1);
            Poly::constant(2, c0 * 0.5)
                .add(&x.scale(c1))
                .add(&x.mul(&y).scale(c2))
        };
        let p00 = poly(coeffs[0], coeffs[1], coeffs[2]);
        let p01 = poly(coeffs[3], coeffs[4], coeffs[5]);
        let p11 = poly(coeffs[6], coeffs[7], coeffs[8]);
        let field = MetricField::from_fn(chart, |i, j| match (i, j) {
            (0, 0) => Expr::Const(2.0).add(Expr::Polynomial(p00.clone())),
            (1, 1) => Expr::Const(1.5).add(Expr::Polynomial(p11.clone())),
            _ => Expr::Polynomial(p01.clone()),
        })
        .unwrap();
        let point = [px, py];
        let exact = field.evaluate_jet(&point, 3).unwrap();
        let fd = field.finite_difference_jet(&point, 3, 1e-3).unwrap();
        prop_assert!(jet_relative_deviation(&exact, &fd) < 1e-5);
    }

    #[test]
    fn flat_geodesics_stay_straight(
        v in prop::collection::vec(-1.0f64..1.0, 3),
        span in 0.1f64..2.0,
    ) {
        let chart = ChartSpec::new(vec![(-10.0, 10.0); 3], vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let field = MetricField::from_fn(chart, |i, j| {
            Expr::Const(if i == j { if i == 0 { -1.0 } else { 1.0 } } else { 0.0 })
        })
        .unwrap();
        let state = GeodesicState { pos: vec![0.0; 3], vel: v.clone() };
        let (end, _) = integrate_geodesic(&field, &state, span, 1e-10).unwrap();
        for i in 0..3 {
            prop_assert!((end.pos[i] - span * v[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn two_form_operator_is_self_adjoint_on_family_bundles() {
    // <W Omega, Theta> = <Omega, W Theta> for the 2-form inner product
    // induced by g, on both families.
    let d1 = build_d1_metric(&d1_fixture(4, PiecewisePoly::single(vec![0.0, 1.0]))).unwrap();
    let d2 = parweyl::families::build_d2_metric(&parweyl::families::d2_nonflat_symmetric_fixture(4))
        .unwrap();
    for (field, p) in [(&d1, vec![0.3, 0.1, 0.5, -0.2]), (&d2, vec![0.2, -0.3, 0.4, 0.6])] {
        let jet = field.evaluate_jet(&p, 3).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        let n = b.n;
        let op = two_form_operator(&b.weyl, &b.ginv).unwrap();
        let pairs = pair_basis(n);
        let np = pairs.len();
        let mut gram: Vec<f64> = vec![0.0; np * np];
        for (r, &(i, j)) in pairs.iter().enumerate() {
            for (c, &(k, l)) in pairs.iter().enumerate() {
                gram[r * np + c] =
                    b.ginv[i * n + k] * b.ginv[j * n + l] - b.ginv[i * n + l] * b.ginv[j * n + k];
            }
        }
        let go = linalg::matmul(&gram, &op, np, np, np);
        let scale = linalg::max_abs(&go).max(1e-300);
        let mut asym = 0.0f64;
        for r in 0..np {
            for c in 0..np {
                asym = asym.max((go[r * np + c] - go[c * np + r]).abs());
            }
        }
        assert!(asym / scale < 1e-10, "asymmetry {asym:.3e} relative {scale:.3e}");
    }
}

#[test]
fn d1_fiber_is_the_null_coordinate_direction() {
    // The fiber of the null-line family is spanned by the s-coordinate
    // vector: null, parallel, and an eigendirection of the wedge system.
    let spec = d1_fixture(4, PiecewisePoly::single(vec![0.0, 1.0]));
    let field = build_d1_metric(&spec).unwrap();
    let jet = field.evaluate_jet(&[0.4f64, -0.7, 0.6, 0.2], 3).unwrap();
    let b = curvature_bundle(&jet).unwrap();
    let fiber = olszak_fiber(&b).unwrap();
    assert_eq!(fiber.d, 1);
    let u = &fiber.basis[0];
    assert!((u[1].abs() - 1.0).abs() < 1e-12, "fiber must align with the s-direction: {u:?}");
    for (i, &x) in u.iter().enumerate() {
        if i != 1 {
            assert!(x.abs() < 1e-12);
        }
    }
    // the connection annihilates the spanning direction entirely
    for k in 0..4 {
        for i in 0..4 {
            assert_eq!(b.conn.at(k, i, 1), 0.0);
        }
    }
}

#[test]
fn fiber_dimension_is_invariant_under_metric_rescaling() {
    let spec = d1_fixture(4, PiecewisePoly::single(vec![0.0, 1.0]));
    let field = build_d1_metric(&spec).unwrap();
    let p = [0.25f64, 0.4, -0.3, 0.55];
    for c in [1e-2, 1.0, 1e2] {
        let scaled = field.scaled(c);
        let jet = scaled.evaluate_jet(&p, 3).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        assert_eq!(olszak_fiber(&b).unwrap().d, 1, "scale {c}");
    }
}
