use mpsc_core::expr::{Expr, UnaryFn};
use mpsc_core::model::SmoothFunction;
use proptest::prelude::*;

const N: usize = 3;

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0..N).prop_map(Expr::var), (-3.0f64..3.0).prop_map(Expr::constant)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), 0i32..4).prop_map(|(a, k)| Expr::powi(a, k)),
            inner.clone().prop_map(|a| Expr::unary(UnaryFn::Sin, a)),
            inner.clone().prop_map(|a| Expr::unary(UnaryFn::Cos, a)),
            // bounded argument keeps exp finite
            inner.clone().prop_map(|a| Expr::unary(UnaryFn::Exp, Expr::unary(UnaryFn::Sin, a))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, N)
}

fn central(f: impl Fn(&[f64]) -> f64, z: &[f64], i: usize, h: f64) -> f64 {
    let (mut a, mut b) = (z.to_vec(), z.to_vec());
    a[i] += h;
    b[i] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gradient_matches_finite_differences(e in expr_strategy(), z in point()) {
        let f = SmoothFunction::new(e, N);
        let g = f.gradient(&z).unwrap();
        let scale = 1.0 + f.value(&z).unwrap().abs();
        for (i, gi) in g.iter().enumerate() {
            let fd = central(|y| f.value(y).unwrap(), &z, i, 1e-5);
            prop_assert!((gi - fd).abs() <= 1e-5 * (scale + gi.abs()), "{} vs {}", gi, fd);
        }
    }

    #[test]
    fn hessian_is_symmetric_and_differentiates_the_gradient(e in expr_strategy(), z in point()) {
        let f = SmoothFunction::new(e, N);
        let h = f.hessian(&z).unwrap();
        for i in 0..N {
            for j in 0..N {
                prop_assert!((h[(i, j)] - h[(j, i)]).abs() <= 1e-9 * (1.0 + h[(i, j)].abs()));
                let fd = central(|y| f.gradient(y).unwrap()[i], &z, j, 1e-5);
                prop_assert!((h[(i, j)] - fd).abs() <= 1e-4 * (1.0 + fd.abs()), "{} vs {}", h[(i, j)], fd);
            }
        }
    }

    #[test]
    fn differentiation_is_linear(a in expr_strategy(), b in expr_strategy(), s in -2.0f64..2.0, t in -2.0f64..2.0, z in point()) {
        let combo = SmoothFunction::new(s * a.clone() + t * b.clone(), N);
        let (fa, fb) = (SmoothFunction::new(a, N), SmoothFunction::new(b, N));
        let (gc, ga, gb) = (combo.gradient(&z).unwrap(), fa.gradient(&z).unwrap(), fb.gradient(&z).unwrap());
        for i in 0..N {
            let expect = s * ga[i] + t * gb[i];
            prop_assert!((gc[i] - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn quadratic_form_matches_hessian(e in expr_strategy(), z in point(), d in point()) {
        let f = SmoothFunction::new(e, N);
        let h = f.hessian(&z).unwrap();
        let mut direct = 0.0;
        for i in 0..N {
            for j in 0..N {
                direct += d[i] * h[(i, j)] * d[j];
            }
        }
        let q = f.hessian_quadratic_form(&z, &d).unwrap();
        prop_assert!((q - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }
}

#[test]
fn affine_expressions_have_zero_hessian() {
    let z = Expr::var;
    let f = SmoothFunction::new(2.0 * z(0) - z(1) + 3.0, 2);
    assert!(f.is_affine());
    assert_eq!(f.hessian_expr(0, 1), &Expr::constant(0.0));
}
