use adasurr_core::bayes::{log_evidence_estimate, log_posterior_unnormalized, temper, GaussianLikelihood, TemperedLikelihood};
use adasurr_core::distributions::{Independent, Marginal};
use adasurr_core::models::{fn_model, ForwardModel, HeatModel, HeatModelConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn gaussian_ln_pdf(x: f64, mean: f64, std: f64) -> f64 {
    -0.5 * ((x - mean) / std).powi(2) - (std * (2.0 * PI).sqrt()).ln()
}

#[test]
fn posterior_matches_direct_product() {
    let prior = Independent::new(vec![
        Marginal::Gaussian { mean: 0.5, std: 2.0 },
        Marginal::Uniform { lower: -1.0, upper: 3.0 },
    ]);
    let data = vec![0.2, -1.0, 2.5];
    let noise = vec![0.1, 0.3, 0.7];
    let lik = GaussianLikelihood::new(data.clone(), noise.clone()).unwrap();
    let g = |y: &[f64]| vec![y[0] * y[1], y[0] - y[1], y[1] * y[1]];
    let model = fn_model(2, 3, g);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let y = [rng.random_range(-3.0..3.0), rng.random_range(-1.0..3.0)];
        let pred = g(&y);
        let mut density = gaussian_ln_pdf(y[0], 0.5, 2.0) - 4f64.ln();
        for ((d, p), s) in data.iter().zip(&pred).zip(&noise) {
            density += gaussian_ln_pdf(*d, *p, *s);
        }
        let got = log_posterior_unnormalized(&prior, &lik, &model, &y).unwrap();
        assert!((got - density).abs() <= 1e-12 * density.abs().max(1.0), "{got} vs {density}");
    }
}

#[test]
fn conjugate_evidence() {
    // y ~ N(0, 2), d = y + e, e ~ N(0, 0.5^2): d ~ N(0, 2.25) marginally.
    let prior = Independent::gaussian(&[0.0], &[2f64.sqrt()]);
    let d = 0.7;
    let lik = GaussianLikelihood::homoscedastic(vec![d], 0.5).unwrap();
    let model = fn_model(1, 1, |y| vec![y[0]]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let est = log_evidence_estimate(&prior, &lik, &model, 100_000, &mut rng).unwrap();
    let exact = gaussian_ln_pdf(d, 0.0, 2.25f64.sqrt());
    assert!((est.value - exact).abs() < 3.0 * est.std_error, "{est:?} vs {exact}");
    assert!(est.std_error > 0.0);
}

#[test]
fn heat_evidence_is_finite() {
    let model = HeatModel::new(HeatModelConfig { mesh_nodes: 21, dt: 0.01, ..Default::default() }).unwrap();
    let truth = [0.0, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5];
    let data = model.evaluate(&truth).unwrap();
    let lik = GaussianLikelihood::homoscedastic(data, 0.1).unwrap();
    let prior = Independent::gaussian(&truth, &[0.2; 9]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let est = log_evidence_estimate(&prior, &lik, &model, 200, &mut rng).unwrap();
    assert!(est.value.is_finite() && est.std_error.is_finite());
}

#[test]
fn support_violations_skip_the_model() {
    let prior = Independent::new(vec![Marginal::Uniform { lower: 0.0, upper: 1.0 }; 2]);
    let lik = GaussianLikelihood::homoscedastic(vec![0.0], 0.1).unwrap();
    let model = fn_model(2, 1, |y| vec![y[0] + y[1]]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let y = [rng.random_range(1.0001..3.0), rng.random_range(-2.0..2.0)];
        assert_eq!(log_posterior_unnormalized(&prior, &lik, &model, &y).unwrap(), f64::NEG_INFINITY);
    }
    assert_eq!(model.evaluation_count(), 0);
}

proptest! {
    #[test]
    fn tempering_identity_and_monotonicity(
        g in proptest::collection::vec(-3.0f64..3.0, 4),
        l1 in 1.0f64..50.0,
        dl in 0.0f64..50.0,
    ) {
        let lik = GaussianLikelihood::homoscedastic(vec![0.5, -0.5, 1.0, 0.0], 0.2).unwrap();
        let base = lik.log_likelihood(&g);
        let one = TemperedLikelihood::new(&lik, 1.0).unwrap().log_tempered(&g);
        prop_assert_eq!(one.to_bits(), base.to_bits());
        // Relative to the maximum, tempering moves the log-likelihood toward zero.
        let rel = base - lik.ln_normalizer();
        prop_assert!(temper(rel, l1 + dl) >= temper(rel, l1));
        prop_assert!(temper(rel, l1 + dl) <= 0.0);
    }
}
