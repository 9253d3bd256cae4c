use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use swb_core::enet::{
    cv_lambda, enet_fit, kkt_violation, lambda_max, soft_threshold, DesignMatrix, EnetConfig,
};

fn names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("x{j}")).collect()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn problem(seed: u64, n: usize, k: usize) -> (DesignMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = gaussian(&mut rng, n, k);
    let (x, _, _) = DesignMatrix::new(names(k), raw).unwrap().standardize().unwrap();
    let beta: Vec<f64> = (0..k).map(|j| if j % 3 == 0 { rng.random_range(-2.0..2.0) } else { 0.0 }).collect();
    let y = (0..n)
        .map(|i| 3.0 + (0..k).map(|j| x.data()[(i, j)] * beta[j]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
        .collect();
    (x, y)
}

/// OLS with an intercept column via the normal equations.
fn ols(x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let n = x.nrows();
    let mut z = DMatrix::from_element(n, x.ncols() + 1, 1.0);
    z.columns_mut(1, x.ncols()).copy_from(x);
    let b = (z.transpose() * &z)
        .lu()
        .solve(&(z.transpose() * DVector::from_column_slice(y)))
        .unwrap();
    (b[0], b.iter().skip(1).copied().collect())
}

#[test]
fn lambda_zero_matches_ols() {
    for seed in 0..25 {
        let (x, y) = problem(seed, 40, 8);
        let cfg = EnetConfig {
            tolerance: 1e-10,
            ..EnetConfig::default()
        };
        let sol = enet_fit(&x, &y, 0.0, &cfg).unwrap();
        assert!(sol.converged);
        let (b0, b) = ols(x.data(), &y);
        assert!((sol.intercept - b0).abs() < 1e-6);
        for (a, o) in sol.coefficients.iter().zip(&b) {
            assert!((a - o).abs() < 1e-6, "seed {seed}: {a} vs {o}");
        }
    }
}

#[test]
fn kkt_holds_on_a_grid() {
    let cfg_tol = EnetConfig::default().tolerance;
    for seed in 100..110 {
        let (x, y) = problem(seed, 40, 8);
        let lmax = lambda_max(&x, &y, 1.0).unwrap();
        for a in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for l in [1.0, 0.3, 0.05, 0.005] {
                let sol = enet_fit(&x, &y, l * lmax, &EnetConfig::with_alpha(a)).unwrap();
                assert!(sol.converged);
                assert!(kkt_violation(&x, &y, &sol) <= 10.0 * cfg_tol, "α={a} λ={}", l * lmax);
            }
        }
    }
}

#[test]
fn alpha_zero_is_ridge() {
    for seed in 0..5 {
        let (x, y) = problem(seed + 50, 30, 5);
        let n = 30.0;
        let lambda = 0.4;
        let sol = enet_fit(&x, &y, lambda, &EnetConfig { tolerance: 1e-11, ..EnetConfig::with_alpha(0.0) }).unwrap();
        let ym = y.iter().sum::<f64>() / n;
        let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ym));
        let xm = x.data();
        let lhs = xm.transpose() * xm / n + DMatrix::identity(5, 5) * lambda;
        let ridge = lhs.lu().solve(&(xm.transpose() * yc / n)).unwrap();
        for (a, b) in sol.coefficients.iter().zip(ridge.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn orthonormal_lasso_is_soft_thresholded_ols() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 50;
    let k = 4;
    let mut raw = gaussian(&mut rng, n, k + 1);
    raw.column_mut(0).fill(1.0);
    let q = raw.qr().q();
    // drop the constant direction so the columns are centered as well as orthogonal
    let xo = q.columns(1, k).into_owned() * (n as f64).sqrt();
    let x = DesignMatrix::new(names(k), xo.clone()).unwrap();
    let y: Vec<f64> = (0..n)
        .map(|i| 2.0 * xo[(i, 0)] - 0.3 * xo[(i, 2)] + 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let lambda = 0.25;
    let sol = enet_fit(&x, &y, lambda, &EnetConfig { tolerance: 1e-12, ..EnetConfig::with_alpha(1.0) }).unwrap();
    for j in 0..k {
        let z: f64 = (0..n).map(|i| xo[(i, j)] * y[i]).sum::<f64>() / n as f64;
        assert!((sol.coefficients[j] - soft_threshold(z, lambda)).abs() < 1e-9);
    }
}

#[test]
fn cv_recovers_single_true_column() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 60;
    let raw = gaussian(&mut rng, n, 6);
    let (x, _, _) = DesignMatrix::new(names(6), raw).unwrap().standardize().unwrap();
    let y: Vec<f64> = (0..n).map(|i| 1.7 * x.data()[(i, 2)]).collect();
    let cfg = EnetConfig::default();
    let cv = cv_lambda(&x, &y, &cfg, 10, 3).unwrap();
    let sol = enet_fit(&x, &y, cv.lambda_min, &cfg).unwrap();
    assert!(sol.coefficient("x2").unwrap() > 1.0);
}

#[test]
fn leave_one_out_matches_brute_force() {
    let (x, y) = problem(77, 12, 3);
    let cfg = EnetConfig {
        grid_len: 8,
        tolerance: 1e-12,
        ..EnetConfig::default()
    };
    let n = y.len();
    let cv = cv_lambda(&x, &y, &cfg, n, 5).unwrap();
    for point in &cv.curve {
        let mut total = 0.0;
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let xt = x.rows(&keep).unwrap();
            let yt: Vec<f64> = keep.iter().map(|&r| y[r]).collect();
            let sol = enet_fit(&xt, &yt, point.lambda, &cfg).unwrap();
            let row: Vec<f64> = x.data().row(i).iter().copied().collect();
            total += (y[i] - sol.predict_row(&row)).powi(2);
        }
        assert!((point.mean_mse - total / n as f64).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kkt_and_shrinkage_on_random_instances(seed in 0u64..10_000, a in 0.0f64..=1.0, frac in 0.001f64..1.5) {
        let (x, y) = problem(seed, 25, 5);
        let lmax = lambda_max(&x, &y, a).unwrap();
        let sol = enet_fit(&x, &y, frac * lmax, &EnetConfig::with_alpha(a)).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(kkt_violation(&x, &y, &sol) <= 1e-6);
        if a >= 0.001 && frac >= 1.0 {
            prop_assert!(sol.coefficients.iter().all(|b| *b == 0.0));
        }
    }
}
