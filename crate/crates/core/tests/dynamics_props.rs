use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use swb_core::dynamics::arima::{arima_fit_values, arima_forecast_values};
use swb_core::dynamics::window::summarize;
use swb_core::dynamics::{
    dynamic_elastic_net, run_window, stepwise_ols, Criterion, ForestConfig, WindowConfig, LAG_NAME,
};
use swb_core::enet::{DesignMatrix, EnetConfig};
use swb_core::series::consecutive_days;
use swb_core::{DailySeries, Panel};

fn arma(phi: f64, theta: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut e_prev) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n + 500 {
        let e: f64 = rng.sample(StandardNormal);
        x = phi * x + e + theta * e_prev;
        e_prev = e;
        if i >= 500 {
            out.push(2.0 + x);
        }
    }
    out
}

/// Autocovariances of a unit-innovation ARMA(1,1) at lags 0..n.
fn arma_acvf(phi: f64, theta: f64, n: usize) -> Vec<f64> {
    let g0 = (1.0 + 2.0 * phi * theta + theta * theta) / (1.0 - phi * phi);
    let g1 = (1.0 + phi * theta) * (phi + theta) / (1.0 - phi * phi);
    let mut g = vec![g0, g1];
    for h in 2..=n {
        g.push(phi * g[h - 1]);
    }
    g
}

/// Best linear predictor of the next value by direct projection on the full
/// covariance matrix, and the exact Gaussian log-likelihood at σ².
fn projection_oracle(phi: f64, theta: f64, mu: f64, sigma2: f64, x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let g = arma_acvf(phi, theta, n);
    let gamma = DMatrix::from_fn(n, n, |i, j| g[i.abs_diff(j)]);
    let z = DVector::from_iterator(n, x.iter().map(|v| v - mu));
    let chol = gamma.clone().cholesky().unwrap();
    let rhs = DVector::from_fn(n, |i, _| g[n - i]);
    let w = chol.solve(&rhs);
    let forecast = mu + w.dot(&z);
    let quad = z.dot(&chol.solve(&z)) / sigma2;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() + n as f64 * sigma2.ln();
    let ll = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
    (forecast, ll)
}

#[test]
fn arma_recovery_and_projection_oracle() {
    let x = arma(0.7, 0.3, 2000, 11);
    let fit = arima_fit_values(&x).unwrap();
    assert!((fit.phi - 0.7).abs() < 0.1 && (fit.theta - 0.3).abs() < 0.1, "{fit:?}");

    for (seed, n) in [(1, 40), (2, 120), (3, 30)] {
        let h = arma(0.5, -0.4, n, seed);
        let fit = arima_fit_values(&h).unwrap();
        let ours = arima_forecast_values(&fit, &h).unwrap();
        let (oracle, ll) = projection_oracle(fit.phi, fit.theta, fit.mu, fit.sigma2, &h);
        assert!((ours - oracle).abs() < 1e-8, "{ours} vs {oracle}");
        assert!((fit.loglik - ll).abs() < 1e-8 * ll.abs().max(1.0), "{} vs {ll}", fit.loglik);
    }
}

#[test]
fn ar1_theta_vanishes_with_sample_size() {
    let errs: Vec<f64> = [200, 5000]
        .into_iter()
        .map(|n| {
            (0..4)
                .map(|s| arima_fit_values(&arma(0.6, 0.0, n, 40 + s)).unwrap().theta.abs())
                .sum::<f64>()
                / 4.0
        })
        .collect();
    assert!(errs[1] < 0.05 && errs[1] < errs[0], "{errs:?}");
}

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
}

fn panel(n: usize, seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut y = vec![0.0; n];
    for d in 1..n {
        y[d] = 0.4 * y[d - 1] + 1.5 * x1[d - 1] + 0.5 * rng.sample::<f64, _>(StandardNormal);
    }
    let mut p = Panel::new(consecutive_days(start(), n)).unwrap();
    for (name, v) in [("y", &y), ("x1", &x1), ("x2", &x2)] {
        p.insert(&DailySeries::from_values(name, start(), v).unwrap()).unwrap();
    }
    p
}

fn quick() -> WindowConfig {
    WindowConfig {
        enet: EnetConfig {
            grid_len: 30,
            ..EnetConfig::default()
        },
        forest: ForestConfig {
            trees: 60,
            ..ForestConfig::default()
        },
        ..WindowConfig::default()
    }
}

#[test]
fn window_count_matches_hand_count() {
    let mut p = panel(80, 5);
    let mut y = p.values("y").unwrap().to_vec();
    y[40] = None;
    p.upsert(&DailySeries::new("y", p.dates().to_vec(), y).unwrap());
    let res = dynamic_elastic_net(&p, "y", &quick()).unwrap();
    assert_eq!(res.windows.len() + res.skipped.len(), 80 - 30);
    // row 40 is a target row for t ∈ [40, 69] and a lag row for t ∈ [41, 70]
    let expected: Vec<NaiveDate> = (30..40).chain(71..80).map(|i| p.dates()[i]).collect();
    let got: Vec<NaiveDate> = res.windows.iter().map(|w| w.date_t).collect();
    assert_eq!(got, expected);
}

#[test]
fn aggregation_is_consistent() {
    let p = panel(60, 6);
    let res = dynamic_elastic_net(&p, "y", &quick()).unwrap();
    assert!(res.windows.windows(2).all(|w| w[0].date_t < w[1].date_t));
    assert!(res.enet_mse >= 0.0 && res.arima_mse >= 0.0);
    for (name, count) in &res.selection_counts {
        let manual = res.windows.iter().filter(|w| w.coefficients[name] != 0.0).count();
        assert_eq!(*count, manual);
        let mean: f64 = res.windows.iter().map(|w| w.rf_relative_rank[name]).sum::<f64>() / res.windows.len() as f64;
        assert!((res.avg_relative_rank[name] - mean).abs() < 1e-12);
    }
    let names: Vec<String> = res.selection_counts.keys().cloned().collect();
    assert_eq!(summarize(&names, &res.windows), (res.selection_counts.clone(), res.avg_relative_rank.clone()));
    // the true driver is picked up nearly everywhere
    assert!(res.selection_counts["x1"] as f64 >= 0.9 * res.windows.len() as f64);
    assert!(res.selection_counts.contains_key(LAG_NAME));
}

#[test]
fn forecasts_do_not_look_ahead() {
    let p = panel(70, 7);
    let cfg = quick();
    let t_pos = 45;
    let t = p.dates()[t_pos];
    let base = run_window(&p, "y", t, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for name in ["y", "x1", "x2"] {
        let mut v = p.values(name).unwrap().to_vec();
        for cell in v.iter_mut().skip(t_pos + 1) {
            *cell = Some(rng.random_range(-50.0..50.0));
        }
        let mut q = p.clone();
        q.upsert(&DailySeries::new(name, p.dates().to_vec(), v).unwrap());
        let mut fit = run_window(&q, "y", t, &cfg).unwrap();
        // the realized next value is reported alongside, not used
        fit.actual = base.actual;
        assert_eq!(fit, base, "perturbing {name} after t changed the fit");
    }
}

#[test]
fn results_independent_of_thread_count() {
    let p = panel(55, 8);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| dynamic_elastic_net(&p, "y", &quick()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

fn noise_design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DesignMatrix {
    let data = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    DesignMatrix::new((1..=k).map(|j| format!("x{j}")).collect(), data).unwrap()
}

/// Under AIC each of 8 null columns clears the entry bar with probability
/// about P(χ²₁ > 2) ≈ 0.157, so the empty model survives only ≈ 0.843⁸ ≈ 0.25
/// of the time; BIC's ln(60) ≈ 4.09 bar gives ≈ 0.957⁸ ≈ 0.70.
#[test]
fn null_model_rates_follow_the_criterion_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let reps = 300;
    let (mut aic_empty, mut bic_empty) = (0, 0);
    for _ in 0..reps {
        let x = noise_design(&mut rng, 60, 8);
        let y: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
        aic_empty += stepwise_ols(&x, &y, Criterion::Aic).unwrap().selected.is_empty() as usize;
        bic_empty += stepwise_ols(&x, &y, Criterion::Bic).unwrap().selected.is_empty() as usize;
    }
    let (a, b) = (aic_empty as f64 / reps as f64, bic_empty as f64 / reps as f64);
    assert!((0.12..0.38).contains(&a), "AIC empty-model rate {a}");
    assert!(b > 0.55, "BIC empty-model rate {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stepwise_never_worse_than_intercept_only(seed in 0u64..100_000, k in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = noise_design(&mut rng, 25, k);
        let y: Vec<f64> = (0..25).map(|i| x.data()[(i, 0)] * rng.random_range(-1.0..1.0) + rng.sample::<f64, _>(StandardNormal)).collect();
        for c in [Criterion::Aic, Criterion::Bic] {
            let r = stepwise_ols(&x, &y, c).unwrap();
            prop_assert!(r.score <= r.intercept_only_score);
        }
    }
}
