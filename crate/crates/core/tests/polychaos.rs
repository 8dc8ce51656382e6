use adasurr_core::distributions::{Independent, Marginal};
use adasurr_core::models::{fn_model, ForwardModel, HeatModel, HeatModelConfig};
use adasurr_core::polychaos::{l2_error, project, PcSurrogate};
use adasurr_core::polynomials::{MultiIndexSet, PolynomialFamily};
use adasurr_core::quadrature::{gauss_rule, smolyak_rule, tensor_rule, OneDimRule, QuadratureRule, SparseGridSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixed_dist() -> Independent {
    Independent::new(vec![
        Marginal::Gaussian { mean: 0.3, std: 0.7 },
        Marginal::Uniform { lower: -2.0, upper: 5.0 },
        Marginal::Gaussian { mean: -1.0, std: 2.0 },
    ])
}

fn tensor_for(dist: &Independent, points: usize) -> QuadratureRule {
    let rules: Vec<QuadratureRule> = dist.families().iter().map(|&f| gauss_rule(f, points).unwrap()).collect();
    tensor_rule(&rules).unwrap()
}

/// A fixed cubic in physical coordinates with two outputs.
fn cubic(y: &[f64]) -> Vec<f64> {
    vec![
        1.0 + 2.0 * y[0] - 0.5 * y[1] * y[2] + 0.1 * y[0] * y[0] * y[2] + 0.03 * y[1].powi(3),
        -3.0 * y[2] + y[0] * y[1] + 0.2 * y[2] * y[2],
    ]
}

#[test]
fn exact_reproduction_of_polynomials() {
    let dist = mixed_dist();
    let set = MultiIndexSet::total_order(3, 3);
    let model = fn_model(3, 2, cubic);
    let tensor = tensor_for(&dist, 4);
    let proj = project(&model, &dist, &set, &tensor).unwrap();
    assert_eq!(proj.model_evaluations, tensor.len());
    assert_eq!(model.evaluation_count(), tensor.len() as u64);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let y = [rng.random_range(-4.0..4.0), rng.random_range(-2.0..5.0), rng.random_range(-6.0..4.0)];
        let got = proj.surrogate.evaluate(&y).unwrap();
        for (a, b) in got.iter().zip(cubic(&y)) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{y:?}: {a} vs {b}");
        }
    }
}

#[test]
fn sparse_grid_reproduces_polynomials() {
    let dist = Independent::gaussian(&[1.0, -0.5, 0.0], &[0.5, 1.5, 1.0]);
    let set = MultiIndexSet::total_order(3, 3);
    let grid = smolyak_rule(&SparseGridSpec { dim: 3, level: 4, rule: OneDimRule::GaussHermite }).unwrap();
    let model = fn_model(3, 2, cubic);
    let proj = project(&model, &dist, &set, &grid).unwrap();
    assert_eq!(proj.model_evaluations, grid.len());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let y = [rng.random_range(-2.0..4.0), rng.random_range(-5.0..4.0), rng.random_range(-3.0..3.0)];
        for (a, b) in proj.surrogate.evaluate(&y).unwrap().iter().zip(cubic(&y)) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn parseval_sum_grows_with_order() {
    let dist = Independent::gaussian(&[0.0, 0.0], &[1.0, 1.0]);
    let model = fn_model(2, 1, |y| vec![(0.4 * y[0]).exp() * (y[1] + 0.3).sin()]);
    let rule = tensor_for(&dist, 30);
    let exact = rule.integrate(|y| ((0.4 * y[0]).exp() * (y[1] + 0.3).sin()).powi(2));
    let mut last = 0.0;
    for order in 0..=10 {
        let proj = project(&model, &dist, &MultiIndexSet::total_order(2, order), &rule).unwrap();
        let energy = proj.surrogate.second_moments()[0];
        assert!(energy >= last - 1e-14, "order {order}: {energy} < {last}");
        assert!(energy <= exact + 1e-12);
        last = energy;
    }
    assert!((exact - last) / exact < 1e-4);
}

#[test]
fn l2_error_matches_omitted_term() {
    let dist = Independent::gaussian(&[0.0], &[1.0]);
    let model = fn_model(1, 1, |y| vec![y[0] * y[0]]);
    let proj = project(&model, &dist, &MultiIndexSet::total_order(1, 1), &gauss_rule(PolynomialFamily::HermiteProbabilist, 4).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let err = l2_error(&proj.surrogate, &model, &dist, 200_000, &mut rng).unwrap();
    assert!((err.aggregate - 2f64.sqrt()).abs() < 3.0 * err.std_error, "{err:?}");

    let full = project(&model, &dist, &MultiIndexSet::total_order(1, 2), &gauss_rule(PolynomialFamily::HermiteProbabilist, 4).unwrap()).unwrap();
    let err = l2_error(&full.surrogate, &model, &dist, 1000, &mut rng).unwrap();
    assert!(err.aggregate < 1e-12);
}

#[test]
fn heat_surrogate_error_decreases_with_order() {
    let cfg = HeatModelConfig { mesh_nodes: 41, dt: 5e-3, ..Default::default() };
    let model = HeatModel::new(cfg).unwrap();
    let mean = [0.0, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5];
    let dist = Independent::gaussian(&mean, &[0.1; 9]);
    let mut errors = Vec::new();
    for order in 1..=3u32 {
        let grid = smolyak_rule(&SparseGridSpec { dim: 9, level: order as usize + 1, rule: OneDimRule::GaussHermite }).unwrap();
        let proj = project(&model, &dist, &MultiIndexSet::total_order(9, order), &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        errors.push(l2_error(&proj.surrogate, &model, &dist, 200, &mut rng).unwrap().aggregate);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn constant_order_zero_surrogate_at_mean() {
    let dist = mixed_dist();
    let set = MultiIndexSet::total_order(3, 0);
    let s = PcSurrogate::new(set, dist.clone(), 2, vec![4.0, -1.5]).unwrap();
    assert_eq!(s.evaluate(&dist.means()).unwrap(), [4.0, -1.5]);
}

proptest! {
    #[test]
    fn evaluation_is_linear_in_coefficients(
        c1 in proptest::collection::vec(-2.0f64..2.0, 20),
        c2 in proptest::collection::vec(-2.0f64..2.0, 20),
        y in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let dist = Independent::gaussian(&[0.0, 1.0, -1.0], &[1.0, 0.5, 2.0]);
        let set = MultiIndexSet::total_order(3, 3);
        let a = PcSurrogate::new(set.clone(), dist.clone(), 1, c1.clone()).unwrap();
        let b = a.with_coefficients(c2.clone()).unwrap();
        let sum: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| x + y).collect();
        let ab = a.with_coefficients(sum).unwrap();
        let lhs = ab.evaluate(&y).unwrap()[0];
        let rhs = a.evaluate(&y).unwrap()[0] + b.evaluate(&y).unwrap()[0];
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        let zero = a.with_coefficients(vec![0.0; 20]).unwrap();
        prop_assert_eq!(zero.evaluate(&y).unwrap()[0], 0.0);
    }

    #[test]
    fn projection_of_constants(c in -10.0f64..10.0, order in 0u32..4) {
        let dist = mixed_dist();
        let model = fn_model(3, 1, move |_| vec![c]);
        let proj = project(&model, &dist, &MultiIndexSet::total_order(3, order), &tensor_for(&dist, 3)).unwrap();
        let coeffs = proj.surrogate.coefficients();
        prop_assert!((coeffs[0] - c).abs() <= 1e-12 * c.abs().max(1.0));
        prop_assert!(coeffs[1..].iter().all(|v| v.abs() <= 1e-12 * c.abs().max(1.0)));
    }
}
