use hardycalc::calculus::{ga_convolution, ga_resolvent};
use hardycalc::hardy::{l2_norm, shift, toeplitz_apply, GridSpec, SampledSignal};
use hardycalc::numkernel::{c, hermitian_eigs, hermitian_part, max_abs, op_norm, ComplexMatrix};
use hardycalc::semigroup::{evaluate_t, random_dissipative, random_stable, Generator};
use hardycalc::symbols::{add, hinf_norm, kernel, multiply, parse_symbol, PoleTerm, SymbolExpr};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

fn matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * n)
        .prop_map(move |v| Array2::from_shape_fn((n, n), |(i, j)| c(v[i * n + j].0, v[i * n + j].1)))
}

fn pole_term() -> impl Strategy<Value = PoleTerm> {
    (-2.0f64..2.0, -2.0f64..2.0, 0.2f64..4.0, -3.0f64..3.0)
        .prop_map(|(cr, ci, ar, ai)| PoleTerm { c: c(cr, ci), alpha: c(ar, ai) })
}

/// Finite symbols from the supported class.
fn symbol() -> impl Strategy<Value = SymbolExpr> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(SymbolExpr::constant),
        prop::collection::vec(pole_term(), 1..3).prop_map(SymbolExpr::rational),
        (0.0f64..1.0).prop_map(SymbolExpr::delay),
    ];
    leaf.prop_recursive(2, 6, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..3).prop_map(SymbolExpr::Sum),
            prop::collection::vec(inner.clone(), 1..3).prop_map(SymbolExpr::Product),
            ((-2.0f64..2.0), inner).prop_map(|(k, g)| SymbolExpr::scale(c(k, 0.0), g)),
        ]
    })
}

fn left_half_plane() -> impl Strategy<Value = Complex64> {
    (-5.0f64..0.0, -20.0f64..20.0).prop_map(|(re, im)| c(re, im))
}

fn stable(n: usize, seed: u64) -> Generator {
    random_stable(n, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn semigroup_law(seed in 0u64..1000, n in 1usize..6, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let g = stable(n, seed);
        let lhs = evaluate_t(&g, s).unwrap().dot(&evaluate_t(&g, t).unwrap());
        let rhs = evaluate_t(&g, s + t).unwrap();
        prop_assert!(max_abs(&(&lhs - &rhs)) <= 1e-10 * (1.0 + max_abs(&rhs)));
    }

    #[test]
    fn operator_norm_is_submultiplicative(a in matrix(4), b in matrix(4)) {
        let lhs = op_norm(&a.dot(&b));
        prop_assert!(lhs <= op_norm(&a) * op_norm(&b) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn trace_is_eigenvalue_sum(a in matrix(5)) {
        let h = hermitian_part(&a);
        let spec = hermitian_eigs(&h).unwrap();
        let trace: f64 = (0..5).map(|i| h[[i, i]].re).sum();
        let sum: f64 = spec.eigenvalues.iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-10 * (1.0 + trace.abs()));
    }

    #[test]
    fn eval_distributes(g1 in symbol(), g2 in symbol(), s in left_half_plane()) {
        let (a, b) = (g1.eval(s), g2.eval(s));
        let tol = 1e-12 * (1.0 + a.norm()) * (1.0 + b.norm());
        prop_assert!((multiply(&g1, &g2).eval(s) - a * b).norm() <= tol);
        prop_assert!((add(&g1, &g2).eval(s) - (a + b)).norm() <= tol);
    }

    #[test]
    fn hinf_norm_scales(g in symbol(), k in -3.0f64..3.0) {
        let scaled = hinf_norm(&SymbolExpr::scale(c(k, 0.0), g.clone()));
        prop_assert!((scaled - k.abs() * hinf_norm(&g)).abs() <= 1e-9 * (1.0 + scaled));
    }

    #[test]
    fn hinf_norm_dominates_samples(g in symbol(), s in left_half_plane()) {
        prop_assert!(g.eval(s).norm() <= hinf_norm(&g) * (1.0 + 1e-6) + 1e-12);
    }

    #[test]
    fn kernel_transform_matches_symbol(g in symbol(), s in left_half_plane()) {
        let k = kernel(&g).unwrap();
        let (a, b) = (k.transform(s), g.eval(s));
        prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
    }

    #[test]
    fn display_round_trips(g in symbol(), s in left_half_plane()) {
        let back = parse_symbol(&g.to_string()).unwrap();
        let (a, b) = (back.eval(s), g.eval(s));
        prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
    }

    #[test]
    fn shift_commutes_with_toeplitz(g in symbol(), m in 0usize..200, rate in 2.5f64..6.0) {
        let grid = GridSpec::new(2048, 1.0 / 64.0).unwrap();
        let f = SampledSignal::from_scalar_fn(grid, |t| c((-rate * t).exp(), (-rate * t).exp() * t)).unwrap();
        let tau = m as f64 * grid.dt();
        let lhs = shift(&toeplitz_apply(&g, &f).unwrap(), tau).unwrap();
        let rhs = toeplitz_apply(&g, &shift(&f, tau).unwrap()).unwrap();
        prop_assert!(l2_norm(&lhs.sub(&rhs).unwrap()) <= 1e-10 * (1.0 + hinf_norm(&g)) * l2_norm(&f));
    }

    #[test]
    fn shift_contracts(m in 0usize..300) {
        let grid = GridSpec::new(256, 1.0 / 16.0).unwrap();
        let f = SampledSignal::from_scalar_fn(grid, |t| c((t * 3.0).sin(), 0.0)).unwrap();
        prop_assert!(l2_norm(&shift(&f, m as f64 * grid.dt()).unwrap()) <= l2_norm(&f));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn von_neumann_on_dissipative(seed in 0u64..10_000, n in 1usize..7, g in symbol()) {
        let gen = random_dissipative(n, seed).unwrap();
        let ga = ga_convolution(&gen, &g).unwrap();
        prop_assert!(op_norm(&ga.matrix) <= hinf_norm(&g) * (1.0 + 1e-6) + 1e-8 + ga.est_error);
    }

    #[test]
    fn convolution_agrees_with_resolvent(seed in 0u64..10_000, n in 1usize..6, g in symbol()) {
        let gen = stable(n, seed);
        let a = ga_convolution(&gen, &g).unwrap();
        let b = ga_resolvent(&gen, &g).unwrap();
        let scale = 1.0 + op_norm(&b.matrix);
        prop_assert!(op_norm(&(&a.matrix - &b.matrix)) <= 1e-7 * scale);
    }

    #[test]
    fn generators_are_reproducible(seed in 0u64..10_000, n in 1usize..6) {
        prop_assert_eq!(stable(n, seed).matrix(), stable(n, seed).matrix());
        prop_assert_eq!(random_dissipative(n, seed).unwrap().matrix(), random_dissipative(n, seed).unwrap().matrix());
    }
}
