use proptest::prelude::*;
use specmuon_core::linalg::{frobenius_norm, Matrix};
use specmuon_core::problems::{finite_diff_grad, gradient_gate, LeastSquares, Problem, ProblemSpec, SpectrumQuadratic};

fn all_problems() -> Vec<ProblemSpec> {
    vec![
        ProblemSpec::default_least_squares(),
        ProblemSpec::default_quadratic(false),
        ProblemSpec::default_quadratic(true),
        ProblemSpec::default_mlp(),
    ]
}

#[test]
fn every_problem_passes_the_gradient_gate_on_several_seeds() {
    for spec in all_problems() {
        for seed in [0, 1, 17] {
            let problem = spec.build(seed).unwrap();
            let rep = gradient_gate(problem.as_ref(), seed, 20, 1e-6)
                .unwrap_or_else(|e| panic!("{} seed {seed}: {e}", problem.name()));
            assert_eq!(rep.points, 20);
        }
    }
}

#[test]
fn least_squares_constants_match_the_data() {
    let problem = ProblemSpec::default_least_squares().build(3).unwrap();
    let c = problem.constants();
    let (l, mu, f_star) = (c.smoothness.unwrap(), c.pl.unwrap(), c.f_star.unwrap());
    assert!(l > mu && mu > 0.0);
    // Hessian of ½‖WX − Y‖² acts as V ↦ V X Xᵀ: check the Rayleigh quotient
    // of random directions stays in [μ, L].
    let shapes = problem.param_shapes();
    let (rows, cols) = shapes[0];
    let w0 = problem.init_params(3);
    let g0 = problem.loss_grad(&w0).unwrap().1.remove(0);
    for k in 0..10 {
        let v = Matrix::from_fn(rows, cols, |i, j| ((i * 7 + j * 3 + k) as f64).sin());
        let shifted = vec![w0[0].add(&v).unwrap()];
        let gv = problem.loss_grad(&shifted).unwrap().1.remove(0).sub(&g0).unwrap();
        let q = specmuon_core::linalg::frobenius_inner(&v, &gv).unwrap() / frobenius_norm(&v).powi(2);
        assert!(
            q <= l * (1.0 + 1e-9) && q >= mu * (1.0 - 1e-9),
            "{q} outside [{mu}, {l}]"
        );
    }
    // The loss at any point is at least f*.
    assert!(problem.loss(&w0).unwrap() >= f_star);
}

#[test]
fn least_squares_minimizer_has_zero_gradient() {
    let x = Matrix::from_rows(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, -1.0]]).unwrap();
    let y = Matrix::from_rows(&[&[1.0, 2.0, 3.0]]).unwrap();
    let problem = LeastSquares::from_data(x, y).unwrap();
    let (loss, grads) = problem.loss_grad(&[problem.solution().clone()]).unwrap();
    assert!(frobenius_norm(&grads[0]) < 1e-12);
    assert!((loss - problem.constants().f_star.unwrap()).abs() < 1e-12);
}

#[test]
fn quadratic_loss_is_half_weighted_square() {
    // Entry weights in row-major order.
    let q = SpectrumQuadratic::new(2, 2, vec![4.0, 1.0, 0.5, 2.0]).unwrap();
    let theta = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, -1.0]]).unwrap();
    let loss = q.loss(std::slice::from_ref(&theta)).unwrap();
    let expected = 0.5 * (4.0 * 1.0 + 1.0 * 4.0 + 0.5 * 9.0 + 2.0 * 1.0);
    assert!((loss - expected).abs() < 1e-12);
    let fd = finite_diff_grad(&q, std::slice::from_ref(&theta), 1e-6).unwrap();
    let exact = q.loss_grad(&[theta]).unwrap().1;
    assert!(fd[0].max_abs_diff(&exact[0]).unwrap() < 1e-8);
}

proptest! {
    #[test]
    fn mlp_gradient_matches_finite_differences(seed in any::<u64>()) {
        let problem = ProblemSpec::Mlp { hidden: 6, points: 16 }.build(seed).unwrap();
        let rep = gradient_gate(problem.as_ref(), seed, 3, 1e-6);
        prop_assert!(rep.is_ok(), "{:?}", rep);
    }

    #[test]
    fn problem_instances_are_reproducible(seed in any::<u64>()) {
        for spec in all_problems() {
            let a = spec.build(seed).unwrap();
            let b = spec.build(seed).unwrap();
            let pa = a.init_params(seed);
            prop_assert_eq!(&pa, &b.init_params(seed));
            prop_assert_eq!(a.loss(&pa).unwrap().to_bits(), b.loss(&pa).unwrap().to_bits());
        }
    }
}
