//! Property suites against a dense explicit-inverse oracle, finite
//! differences, and closed-form limits.

mod common;

use common::{oracle_nll, oracle_predict, random_instance, rel_diff, TestRng};
use nngp::{
    covariance_matrix, fit, kernel_eval, negative_log_likelihood, nll_gradient, predict,
    Hyperparameters, InputPoint, TrainingSet,
};
use proptest::prelude::*;

#[test]
fn predict_and_nll_match_dense_oracle() {
    let mut rng = TestRng(0x0dd5eed);
    for _ in 0..100 {
        let (training, theta) = random_instance(&mut rng);
        let d = training.dim();
        let gp = fit(&training, &theta).unwrap();
        for _ in 0..3 {
            let x = InputPoint::new((0..d).map(|_| rng.range(-2.5, 2.5)).collect()).unwrap();
            let p = predict(&gp, &x).unwrap();
            let (mean, var) = oracle_predict(&training, &theta, &x);
            assert!(rel_diff(p.mean, mean) <= 1e-8, "mean {} vs {}", p.mean, mean);
            assert!(rel_diff(p.variance, var) <= 1e-8, "var {} vs {}", p.variance, var);
        }
        let nll = negative_log_likelihood(&training, &theta).unwrap();
        let reference = oracle_nll(&training, &theta);
        assert!(rel_diff(nll, reference) <= 1e-8, "nll {nll} vs {reference}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = TestRng(0x6ead1e7);
    for _ in 0..50 {
        let (training, theta) = random_instance(&mut rng);
        let grad = nll_gradient(&training, &theta).unwrap();
        let base = theta.as_array();
        let h = 1e-5;
        for k in 0..3 {
            let mut plus = base;
            let mut minus = base;
            plus[k] += h;
            minus[k] -= h;
            let fp = negative_log_likelihood(&training, &Hyperparameters::from_array(plus).unwrap())
                .unwrap();
            let fm =
                negative_log_likelihood(&training, &Hyperparameters::from_array(minus).unwrap())
                    .unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                rel_diff(grad[k], fd) <= 1e-4,
                "component {k}: analytic {} vs fd {fd}",
                grad[k]
            );
        }
    }
}

#[test]
fn noise_free_fit_interpolates_training_points() {
    let points: Vec<InputPoint> = [0.0, 0.3, 0.55, 0.8, 1.0]
        .iter()
        .map(|&x| InputPoint::scalar(x))
        .collect();
    let obs = vec![1.0, -0.4, 0.7, 0.2, -1.1];
    let training = TrainingSet::new(points.clone(), obs.clone()).unwrap();
    let theta = Hyperparameters::from_positive(0.25, 1.0, 0.0).unwrap();
    let gp = fit(&training, &theta).unwrap();
    for (x, y) in points.iter().zip(&obs) {
        let p = predict(&gp, x).unwrap();
        assert!((p.mean - y).abs() <= 1e-6, "mean {} vs obs {y}", p.mean);
        assert!(p.variance <= 1e-8, "variance {} at a training point", p.variance);
    }
}

#[test]
fn far_field_reverts_to_prior() {
    let training = TrainingSet::new(
        vec![InputPoint::scalar(0.0), InputPoint::scalar(1.0)],
        vec![0.7, -0.2],
    )
    .unwrap();
    let theta = Hyperparameters::from_positive(0.5, 1.3, 0.2).unwrap();
    let gp = fit(&training, &theta).unwrap();
    let p = predict(&gp, &InputPoint::scalar(50.0)).unwrap();
    let prior = theta.sigma() * theta.sigma() + theta.sigma_n() * theta.sigma_n();
    assert!(p.mean.abs() <= 1e-8);
    assert!((p.variance - prior).abs() <= 1e-8);
}

proptest! {
    #[test]
    fn covariance_is_symmetric_and_consistent(
        xs in proptest::collection::vec(-3.0f64..3.0, 1..7),
        log_l in -1.5f64..1.0,
        log_s in -1.0f64..1.0,
        log_n in -3.0f64..0.0,
    ) {
        let theta = Hyperparameters::from_log(log_l, log_s, log_n).unwrap();
        let points: Vec<InputPoint> = xs.iter().map(|&x| InputPoint::scalar(x)).collect();
        let k = covariance_matrix(&points, &theta).unwrap();
        for i in 0..points.len() {
            for j in 0..points.len() {
                prop_assert_eq!(k[(i, j)], k[(j, i)]);
                let entry = kernel_eval(&points[i], &points[j], &theta, i == j).unwrap();
                prop_assert_eq!(k[(i, j)], entry);
            }
        }
    }

    #[test]
    fn kernel_is_stationary(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        shift in -5.0f64..5.0,
        log_l in -1.5f64..1.0,
    ) {
        let theta = Hyperparameters::from_log(log_l, 0.2, -2.0).unwrap();
        let v0 = kernel_eval(
            &InputPoint::scalar(a),
            &InputPoint::scalar(b),
            &theta,
            false,
        ).unwrap();
        let v1 = kernel_eval(
            &InputPoint::scalar(a + shift),
            &InputPoint::scalar(b + shift),
            &theta,
            false,
        ).unwrap();
        prop_assert!((v0 - v1).abs() <= 1e-12 * v0.abs().max(1.0));
    }

    #[test]
    fn posterior_variance_never_exceeds_prior(
        seed in 0u64..1000,
        query in -4.0f64..4.0,
    ) {
        let mut rng = TestRng(seed);
        let (training, theta) = random_instance(&mut rng);
        let d = training.dim();
        let gp = fit(&training, &theta).unwrap();
        let x = InputPoint::new(vec![query; d]).unwrap();
        let p = predict(&gp, &x).unwrap();
        let prior = theta.sigma() * theta.sigma() + theta.sigma_n() * theta.sigma_n();
        prop_assert!(p.variance <= prior + 1e-10 * prior.max(1.0));
        prop_assert!(p.variance >= 0.0);
    }
}
