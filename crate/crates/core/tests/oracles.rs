use homoment::estimate::{fit_1d, fit_k2, sample_cumulants, UnivariateMoments};
use homoment::models::{gaussian_moments, homoscedastic_cumulants, homoscedastic_moments, sample_mixture, GaussianParams, HomoscedasticParams};
use homoment::ranktest::{eval_p5, secant_membership};
use homoment::scalar::ratio;
use homoment::{MultiIndex, TruncatedSeries};
use num_rational::BigRational;
use proptest::prelude::*;

fn q(n: i64, d: i64) -> BigRational {
    ratio(n, d)
}

fn uni(means: &[f64], weights: &[f64], var: f64) -> HomoscedasticParams<f64> {
    HomoscedasticParams { means: means.iter().map(|&m| vec![m]).collect(), weights: weights.to_vec(), cov: vec![vec![var]] }
}

#[test]
fn mixture_moments_are_weighted_gaussian_moments() {
    let cov = vec![vec![q(3, 2), q(-1, 3)], vec![q(-1, 3), q(2, 1)]];
    let p = HomoscedasticParams {
        means: vec![vec![q(1, 2), q(-2, 1)], vec![q(3, 1), q(1, 5)], vec![q(-7, 4), q(0, 1)]],
        weights: vec![q(1, 6), q(1, 2), q(1, 3)],
        cov: cov.clone(),
    };
    let d = 6;
    let mut sum = TruncatedSeries::<BigRational>::zero(2, d).unwrap();
    for (mu, w) in p.means.iter().zip(&p.weights) {
        let g = gaussian_moments(&GaussianParams { mean: mu.clone(), cov: cov.clone() }, d).unwrap();
        sum = sum.add(&g.scale(w)).unwrap();
    }
    assert_eq!(homoscedastic_moments(&p, d).unwrap(), sum);
}

#[test]
fn sample_cumulants_converge() {
    let p = HomoscedasticParams {
        means: vec![vec![1.0, 0.5], vec![-2.0, 1.0]],
        weights: vec![0.35, 0.65],
        cov: vec![vec![1.0, 0.3], vec![0.3, 0.8]],
    };
    let data = sample_mixture(&p, 200_000, 11).unwrap();
    let got = sample_cumulants(&data, 4).unwrap();
    let want = homoscedastic_cumulants(&p, 4).unwrap();
    for ((a, g), w) in got.iter().zip(want.coeffs()) {
        assert!((g - w).abs() < 0.05, "{a}: {g} vs {w}");
    }
}

#[test]
fn fit_k2_on_simulated_data() {
    let p = HomoscedasticParams {
        means: vec![vec![1.0, 0.0], vec![-3.0 / 7.0, 0.0]],
        weights: vec![0.3, 0.7],
        cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    };
    let data = sample_mixture(&p, 100_000, 5).unwrap();
    let e = &fit_k2(&sample_cumulants(&data, 5).unwrap()).unwrap()[0];
    assert!((e.params.weights[0] - 0.3).abs() < 0.05, "{:?}", e.params);
    assert!((e.params.means[0][0] - 1.0).abs() < 0.15);
    assert!((e.params.means[1][0] + 3.0 / 7.0).abs() < 0.1);
    assert!((e.params.cov[0][0] - 1.0).abs() < 0.1);
}

#[test]
fn centred_dirac_cumulants_vanish_at_order_one() {
    let p = uni(&[2.0, -1.0], &[1.0 / 3.0, 2.0 / 3.0], 0.0);
    let k = homoscedastic_cumulants(&p, 5).unwrap();
    assert!(k.coeff(&MultiIndex::new(vec![1])).unwrap().abs() < 1e-15);
}

fn two_mixture() -> impl Strategy<Value = HomoscedasticParams<f64>> {
    (0.1f64..0.9, -3.0f64..3.0, 1.5f64..5.0, 0.2f64..2.0)
        .prop_map(|(l, m, gap, v)| uni(&[m, m + gap], &[l, 1.0 - l], v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p5_vanishes_on_two_mixtures(p in two_mixture()) {
        let k = homoscedastic_cumulants(&p, 5).unwrap();
        let kap = |j: u32| k.moment(&MultiIndex::new(vec![j])).unwrap();
        let (a, b, c) = (kap(3), kap(4), kap(5));
        let scale = 108.0 * a.powi(6).abs() + 32.0 * (a * a * b.powi(3)).abs() + 36.0 * (a.powi(3) * b * c).abs()
            + (b * b * c * c).abs() + (a * c.powi(3)).abs();
        prop_assert!(eval_p5(&a, &b, &c).abs() <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn fit_1d_round_trip(p in two_mixture()) {
        let m = UnivariateMoments::from_series(&homoscedastic_moments(&p, 4).unwrap()).unwrap();
        let e = fit_1d(&m, 2).unwrap();
        let mut got: Vec<(f64, f64)> = e.params.means.iter().map(|x| x[0]).zip(e.params.weights.iter().copied()).collect();
        got.sort_by(|x, y| x.0.total_cmp(&y.0));
        prop_assert!((got[0].0 - p.means[0][0]).abs() < 1e-7);
        prop_assert!((got[1].0 - p.means[1][0]).abs() < 1e-7);
        prop_assert!((got[0].1 - p.weights[0]).abs() < 1e-7);
        prop_assert!((e.params.cov[0][0] - p.cov[0][0]).abs() < 1e-7);
    }

    #[test]
    fn membership_agrees_with_fit(p in two_mixture()) {
        let m = UnivariateMoments::from_series(&homoscedastic_moments(&p, 5).unwrap()).unwrap();
        let v = secant_membership(&m, 2).unwrap();
        prop_assert!(v.on_model);
        let e = fit_1d(&m, 2).unwrap();
        prop_assert!(e.diagnostics.residuals.iter().all(|r| *r < 1e-6));
        prop_assert!((v.witness_s - p.cov[0][0]).abs() < 1e-4 * p.cov[0][0].max(1.0));
    }
}
