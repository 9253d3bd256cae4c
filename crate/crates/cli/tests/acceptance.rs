//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails. Criteria that need the published panels read them from
//! `$SWB_REPLICATION_DIR` (`italy.csv`, `japan.csv`) and are skipped otherwise.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use swb_cli::config::{RunConfig, Stage};
use swb_core::dynamics::arima::{arima_fit_values, arima_forecast_values};
use swb_core::dynamics::{dynamic_elastic_net, WindowConfig};
use swb_core::enet::{enet_fit, lambda_grid, lambda_max, DesignMatrix, EnetConfig, EnetSolution};
use swb_core::sde::{fit_sde, quasi_loglik, select_model, simulate, SdeConfig, SdeModelKind, SdeParams};
use swb_core::sem::{fit_sem, fit_sem_cov, Op, SemConfig, SemModel};
use swb_core::series::consecutive_days;
use swb_core::swb::{component_index, swb_daily, yearly_means, Component, ComponentDistribution, DailyComponents};
use swb_core::synthetic::{drifting_panel, score_recovery, DriftSpec};
use swb_core::{ingest, DailySeries, Panel};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::{Fail, Pass, Skip};

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn replication_dir() -> Option<PathBuf> {
    std::env::var_os("SWB_REPLICATION_DIR").map(PathBuf::from)
}

fn load_country(dir: &Path, country: &str) -> Result<Panel, String> {
    let path = dir.join(format!("{country}.csv"));
    ingest::load_all(&path).map(|(p, _)| p).map_err(|e| format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------- elastic net

fn enet_problem(seed: u64, n: usize, k: usize) -> (DesignMatrix, Vec<f64>) {
    let mut r = rng(seed);
    let raw = DMatrix::from_fn(n, k, |_, _| normal(&mut r));
    let names = (0..k).map(|j| format!("x{j}")).collect();
    let (x, _, _) = DesignMatrix::new(names, raw).unwrap().standardize().unwrap();
    let beta: Vec<f64> = (0..k).map(|j| if j % 2 == 0 { r.random_range(-2.0..2.0) } else { 0.0 }).collect();
    let y = (0..n)
        .map(|i| 1.5 + (0..k).map(|j| x.data()[(i, j)] * beta[j]).sum::<f64>() + normal(&mut r))
        .collect();
    (x, y)
}

fn ols_oracle(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let n = x.nrows();
    let mut z = DMatrix::from_element(n, x.ncols() + 1, 1.0);
    z.columns_mut(1, x.ncols()).copy_from(x);
    let zt = z.transpose();
    (&zt * &z).lu().solve(&(&zt * DVector::from_column_slice(y))).unwrap().iter().copied().collect()
}

/// Largest stationarity residual, computed from the raw data and the
/// reported intercept.
fn kkt_residual(x: &DMatrix<f64>, y: &[f64], s: &EnetSolution) -> f64 {
    let n = x.nrows();
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - s.intercept - (0..x.ncols()).map(|j| x[(i, j)] * s.coefficients[j]).sum::<f64>())
        .collect();
    let (l1, l2) = (s.lambda * s.mix_alpha, s.lambda * (1.0 - s.mix_alpha));
    (0..x.ncols())
        .map(|j| {
            let g = (0..n).map(|i| x[(i, j)] * resid[i]).sum::<f64>() / n as f64;
            let b = s.coefficients[j];
            if b != 0.0 {
                (g - l1 * b.signum() - l2 * b).abs()
            } else {
                (g.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let cfg = EnetConfig::default();
    let mut worst_ols = 0.0f64;
    let mut worst_kkt = 0.0f64;
    let mut unconverged = 0;
    for seed in 0..25 {
        let (x, y) = enet_problem(1000 + seed, 40, 8);
        let sol = enet_fit(&x, &y, 0.0, &cfg).unwrap();
        let oracle = ols_oracle(x.data(), &y);
        worst_ols = worst_ols.max((sol.intercept - oracle[0]).abs());
        for (a, b) in sol.coefficients.iter().zip(&oracle[1..]) {
            worst_ols = worst_ols.max((a - b).abs());
        }
        let grid = lambda_grid(lambda_max(&x, &y, 1.0).unwrap(), 5, 1e-3).unwrap();
        for a in [0.0, 0.5, 0.75, 1.0] {
            for &l in &grid {
                let s = enet_fit(&x, &y, l, &EnetConfig::with_alpha(a)).unwrap();
                unconverged += usize::from(!s.converged);
                worst_kkt = worst_kkt.max(kkt_residual(x.data(), &y, &s));
            }
        }
    }
    let kkt_tol = 10.0 * cfg.tolerance;
    check(
        worst_ols < 1e-6 && worst_kkt <= kkt_tol && unconverged == 0,
        format!("max |β−β_ols| = {worst_ols:.2e} (< 1e-6), max KKT residual = {worst_kkt:.2e} (≤ {kkt_tol:.0e}) over 4 α × 5 λ"),
    )
}

fn criterion_2() -> Outcome {
    let mut nonzero = 0;
    let mut worst_lmax = 0.0f64;
    for seed in 0..10 {
        let (x, y) = enet_problem(2000 + seed, 40, 8);
        let n = y.len() as f64;
        let ybar = y.iter().sum::<f64>() / n;
        let max_corr = (0..x.ncols())
            .map(|j| (0..y.len()).map(|i| x.data()[(i, j)] * (y[i] - ybar)).sum::<f64>().abs() / n)
            .fold(0.0, f64::max);
        for a in [0.5, 1.0] {
            let lmax = lambda_max(&x, &y, a).unwrap();
            worst_lmax = worst_lmax.max((lmax - max_corr / a).abs() / lmax);
            for scale in [1.0, 1.5, 10.0] {
                let s = enet_fit(&x, &y, lmax * scale, &EnetConfig::with_alpha(a)).unwrap();
                nonzero += s.coefficients.iter().filter(|b| **b != 0.0).count();
            }
        }
    }
    check(
        nonzero == 0 && worst_lmax < 1e-12,
        format!("{nonzero} non-zero coefficients at λ ∈ {{1, 1.5, 10}}·λ_max; λ_max vs max|x'y|/(nα) rel. diff {worst_lmax:.1e}"),
    )
}

// ------------------------------------------------------------------------ SDE

/// Exact Gaussian OU MLE through the AR(1) form of the transition.
fn exact_ou(x: &[f64], delta: f64) -> (f64, f64, f64) {
    let n = (x.len() - 1) as f64;
    let (xs, ys) = (&x[..x.len() - 1], &x[1..]);
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
    let phi = sxy / sxx;
    let c = my - phi * mx;
    let v = xs.iter().zip(ys).map(|(a, b)| (b - c - phi * a).powi(2)).sum::<f64>() / n;
    let alpha = -phi.ln() / delta;
    (alpha, c / (1.0 - phi), (2.0 * alpha * v / (1.0 - phi * phi)).sqrt())
}

fn criterion_3() -> Outcome {
    let cfg = SdeConfig::default();
    let truth = SdeParams::new(3.16, 38.99, 14.7).unwrap();
    let x = simulate(SdeModelKind::Vas, &truth, truth.beta, 5000, &cfg, 20_201_015).unwrap();
    let fit = fit_sde(SdeModelKind::Vas, &x, &cfg).unwrap();
    let p = fit.params;
    let rel = |est: f64, t: f64| (est / t - 1.0).abs();
    let (oa, ob, os) = exact_ou(&x.present_values(), cfg.delta);
    // Euler and exact transitions differ at first order in αΔ
    let bias = 2.0 * oa * cfg.delta;
    let ok = fit.converged
        && rel(p.beta, 38.99) < 0.05
        && rel(p.sigma, 14.7) < 0.05
        && rel(p.alpha, 3.16) < 0.5
        && rel(p.alpha, oa) < bias
        && rel(p.sigma, os) < bias
        && rel(p.beta, ob) < bias;
    check(
        ok,
        format!(
            "α̂ = {:.3}, β̂ = {:.3}, σ̂ = {:.3}; exact OU α = {oa:.3}, β = {ob:.3}, σ = {os:.3} (bias bound {bias:.3})",
            p.alpha, p.beta, p.sigma
        ),
    )
}

fn criterion_4() -> Outcome {
    let cfg = SdeConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let mut r = rng(4000 + seed);
        let gen = SdeParams::new(r.random_range(2.0..12.0), r.random_range(20.0..50.0), r.random_range(1.0..4.0)).unwrap();
        let x = simulate(SdeModelKind::Cir, &gen, gen.beta, 300, &cfg, seed).unwrap();
        let (a, b, s) = (r.random_range(1.0..15.0), r.random_range(20.0..50.0), r.random_range(0.5..20.0));
        for (kind, g) in [(SdeModelKind::Vas, 0.0), (SdeModelKind::Cir, 0.5), (SdeModelKind::Gbm, 1.0)] {
            let nested = quasi_loglik(kind, &SdeParams::new(a, b, s).unwrap(), &x, &cfg).unwrap();
            let ckls = quasi_loglik(SdeModelKind::Ckls, &SdeParams::with_gamma(a, b, s, g).unwrap(), &x, &cfg).unwrap();
            worst = worst.max((nested - ckls).abs());
        }
    }
    check(worst < 1e-8, format!("max |ℓ_CKLS(γ) − ℓ_nested| = {worst:.2e} over 5 series × 3 exponents"))
}

// ---------------------------------------------------------------- replication

fn criterion_5() -> Outcome {
    let Some(dir) = replication_dir() else {
        return Skip("SWB_REPLICATION_DIR not set".into());
    };
    let run = || -> Result<(bool, String), String> {
        let italy = load_country(&dir, "italy")?;
        let japan = load_country(&dir, "japan")?;
        let cfg = SdeConfig::default();
        let si = select_model(&italy.column("SWB-I").map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
        let sj = select_model(&japan.column("SWB-J").map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
        let aic = |sel: &swb_core::sde::ModelSelection, k| sel.fit(k).map_or(f64::NAN, |f| f.aic);
        let order_ok = aic(&si, SdeModelKind::Cir) < aic(&si, SdeModelKind::Gbm)
            && aic(&si, SdeModelKind::Gbm) < aic(&si, SdeModelKind::Vas)
            && sj.best == SdeModelKind::Ckls;
        let ratio = sj.fit(sj.best).unwrap().params.alpha / si.fit(si.best).unwrap().params.alpha;

        let dyn_run = |panel: &Panel, target: &str, mix: f64| {
            let wc = WindowConfig {
                mix_alpha: mix,
                ..WindowConfig::default()
            };
            dynamic_elastic_net(panel, target, &wc).map_err(|e| e.to_string())
        };
        let it = dyn_run(&italy, "SWB-I", 0.5)?;
        let jp = dyn_run(&japan, "SWB-J", 0.5)?;
        let it0 = dyn_run(&italy, "SWB-I", 0.0)?;
        let it1 = dyn_run(&italy, "SWB-I", 1.0)?;
        let near = |v: f64, t: f64| (v / t - 1.0).abs() <= 0.3;
        let counts_ok = it.windows.len().abs_diff(315) <= 10 && jp.windows.len().abs_diff(294) <= 10;
        let mse_ok = near(it.enet_mse, 0.01734827) && near(it.arima_mse, 0.0152734) && it.arima_mse < it.enet_mse;
        let sweep_ok = it.enet_mse < it0.enet_mse && it.enet_mse < it1.enet_mse;
        Ok((
            order_ok && (3.0..=4.0).contains(&ratio) && counts_ok && mse_ok && sweep_ok,
            format!(
                "(a) AIC order {order_ok}; (b) α ratio {ratio:.2}; (c) windows {}/{}; (d) mse enet {:.5} arima {:.5}; (e) mse at α=0/0.5/1: {:.5}/{:.5}/{:.5}",
                it.windows.len(),
                jp.windows.len(),
                it.enet_mse,
                it.arima_mse,
                it0.enet_mse,
                it.enet_mse,
                it1.enet_mse
            ),
        ))
    };
    match run() {
        Ok((ok, detail)) => check(ok, detail),
        Err(e) => Fail(e),
    }
}

// ------------------------------------------------------------ synthetic drift

fn criterion_6() -> Outcome {
    let spec = DriftSpec::default();
    let truth = drifting_panel(&spec, 20_201_015).unwrap();
    let cfg = WindowConfig {
        covariates: Some(truth.covariates.clone()),
        ..WindowConfig::default()
    };
    let res = dynamic_elastic_net(&truth.panel, &truth.target, &cfg).unwrap();
    let r = score_recovery(&truth, &res, cfg.window_len);
    check(
        r.active_rate() >= 0.8 && r.inactive_rate() < 0.1,
        format!(
            "selected when active {:.3} (≥ 0.80, {} windows), when inactive {:.3} (< 0.10, {} windows); top-ranked when active {:.3}, when inactive {:.3}",
            r.active_rate(),
            r.active_windows,
            r.inactive_rate(),
            r.inactive_windows,
            r.top_active_rate(),
            r.top_inactive_rate()
        ),
    )
}

// ---------------------------------------------------------------------- ARMA

fn arma(phi: f64, theta: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let burn = 500;
    let mut x = Vec::with_capacity(n + burn);
    let (mut prev, mut prev_e) = (0.0, 0.0);
    for _ in 0..n + burn {
        let e = normal(&mut r);
        let v = phi * prev + e + theta * prev_e;
        x.push(v + 10.0);
        prev = v;
        prev_e = e;
    }
    x.split_off(burn)
}

/// One-step predictor from the general innovations algorithm on the ARMA(1,1)
/// autocovariances, without the ARMA-specific shortcut.
fn innovations_oracle(phi: f64, theta: f64, mu: f64, x: &[f64]) -> f64 {
    let g0 = (1.0 + 2.0 * theta * phi + theta * theta) / (1.0 - phi * phi);
    let g1 = (1.0 + theta * phi) * (phi + theta) / (1.0 - phi * phi);
    let gamma = |h: usize| if h == 0 { g0 } else { g1 * phi.powi(h as i32 - 1) };
    let n = x.len();
    let z: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let mut v = vec![g0];
    let mut th: Vec<Vec<f64>> = vec![Vec::new()];
    for m in 1..=n {
        let mut row = vec![0.0; m + 1];
        for k in 0..m {
            let mut s = gamma(m - k);
            for j in 0..k {
                s -= th[k][k - j] * row[m - j] * v[j];
            }
            row[m - k] = s / v[k];
        }
        let vm = g0 - (0..m).map(|j| row[m - j].powi(2) * v[j]).sum::<f64>();
        th.push(row);
        v.push(vm);
    }
    let mut pred = vec![0.0; n + 1];
    for m in 1..=n {
        pred[m] = (1..=m).map(|j| th[m][j] * (z[m - j] - pred[m - j])).sum();
    }
    mu + pred[n]
}

fn criterion_7() -> Outcome {
    let x = arma(0.7, 0.3, 2000, 77);
    let fit = arima_fit_values(&x).unwrap();
    let mut worst = 0.0f64;
    for (seed, n) in [(1u64, 30usize), (2, 60), (3, 150)] {
        let h = arma(0.5, -0.3, n, 700 + seed);
        let f = arima_fit_values(&h).unwrap();
        let ours = arima_forecast_values(&f, &h).unwrap();
        worst = worst.max((ours - innovations_oracle(f.phi, f.theta, f.mu, &h)).abs());
    }
    check(
        (fit.phi - 0.7).abs() <= 0.1 && (fit.theta - 0.3).abs() <= 0.1 && worst < 1e-8,
        format!("φ̂ = {:.3}, θ̂ = {:.3}; max forecast gap to innovations oracle {worst:.2e}", fit.phi, fit.theta),
    )
}

// ----------------------------------------------------------------------- SEM

fn panel_from(cols: &[(&str, Vec<f64>)]) -> Panel {
    let n = cols[0].1.len();
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let mut p = Panel::new(consecutive_days(start, n)).unwrap();
    for (name, v) in cols {
        p.insert(&DailySeries::from_values(*name, start, v).unwrap()).unwrap();
    }
    p
}

fn sem_synthetic() -> (f64, f64) {
    // saturated: two exogenous variables and one outcome, df = 0
    let mut r = rng(8000);
    let a = DMatrix::from_fn(3, 3, |_, _| normal(&mut r));
    let s = &a * a.transpose() + DMatrix::identity(3, 3);
    let d = DMatrix::from_diagonal(&s.diagonal().map(|v| 1.0 / v.sqrt()));
    let s = &d * s * &d;
    let sat = SemModel::parse("y ~ a + b\na ~~ b").unwrap();
    let sat_fml = fit_sem_cov(&sat, &s, 500, &SemConfig::default()).unwrap().fml;

    let n = 2000;
    let loadings = [0.9, 0.7, 0.5];
    let mut cols: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    for _ in 0..n {
        let f = normal(&mut r);
        for (c, l) in cols.iter_mut().zip(loadings) {
            c.push(l * f + (1.0 - l * l).sqrt() * normal(&mut r));
        }
    }
    let panel = panel_from(&[("y1", cols[0].clone()), ("y2", cols[1].clone()), ("y3", cols[2].clone())]);
    let fit = fit_sem(&SemModel::parse("F =~ y1 + y2 + y3").unwrap(), &panel, &SemConfig::default()).unwrap();
    let worst = ["y1", "y2", "y3"]
        .iter()
        .zip(loadings)
        .map(|(v, l)| (fit.get("F", Op::Measures, v).unwrap().value - l).abs())
        .fold(0.0, f64::max);
    (sat_fml, worst)
}

fn sem_replication(dir: &Path) -> Result<(bool, String), String> {
    let effect = |country: &str, model: SemModel| -> Result<BTreeMap<String, (f64, f64)>, String> {
        let panel = load_country(dir, country)?;
        let fit = fit_sem(&model, &panel, &SemConfig::default()).map_err(|e| e.to_string())?;
        let mut out = BTreeMap::new();
        for f in ["SocDist", "Finance", "Mobility", "HealthStatus", "VirusSearch"] {
            let e = fit.get("WellBeing", Op::Regression, f).ok_or(format!("{country}: no path from {f}"))?;
            out.insert(f.to_string(), (e.value, e.p_value().unwrap_or(f64::NAN)));
        }
        Ok(out)
    };
    let it = effect("italy", SemModel::italy())?;
    let jp = effect("japan", SemModel::japan())?;
    let italy_ok = ["SocDist", "Finance", "Mobility", "HealthStatus"].iter().all(|f| it[*f].0 < 0.0) && it["VirusSearch"].0 > 0.0;
    let japan_ok = ["Finance", "Mobility"].iter().all(|f| !(jp[*f].1 < 0.05));
    Ok((
        italy_ok && japan_ok,
        format!("Italy signs {italy_ok}, Japan Finance/Mobility p = {:.3}/{:.3}", jp["Finance"].1, jp["Mobility"].1),
    ))
}

fn criterion_8() -> Outcome {
    let (sat_fml, worst) = sem_synthetic();
    let synthetic_ok = sat_fml < 1e-8 && worst <= 0.05;
    let detail = format!("saturated fml = {sat_fml:.2e} (< 1e-8), max loading error {worst:.3} (≤ 0.05)");
    match replication_dir() {
        None => {
            if synthetic_ok {
                Pass(format!("{detail}; sign patterns skipped, SWB_REPLICATION_DIR not set"))
            } else {
                Fail(detail)
            }
        }
        Some(dir) => match sem_replication(&dir) {
            Ok((ok, rep)) => check(synthetic_ok && ok, format!("{detail}; {rep}")),
            Err(e) => Fail(format!("{detail}; {e}")),
        },
    }
}

// ----------------------------------------------------------------------- SWB

fn criterion_9() -> Outcome {
    let mut r = rng(9000);
    let mut mismatches = 0;
    let date = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    for _ in 0..1000 {
        let raw: Vec<[f64; 4]> = (0..8)
            .map(|_| {
                let w: [f64; 4] = std::array::from_fn(|_| r.random_range(0.0..1.0));
                let t: f64 = w.iter().sum();
                w.map(|v| v / t)
            })
            .collect();
        let dists: [ComponentDistribution; 8] =
            std::array::from_fn(|c| ComponentDistribution::new(raw[c][0], raw[c][1], raw[c][2], raw[c][3]).unwrap());
        let day = DailyComponents::new(date, dists);
        let mut total = 0.0;
        for (c, d) in Component::ALL.iter().zip(&dists) {
            let brute = d.positive() / (d.positive() + d.negative());
            mismatches += usize::from(component_index(day.get(*c)) != Some(brute));
            total += brute;
        }
        mismatches += usize::from(swb_daily(&day) != Some(total / 8.0));
    }
    let detail = format!("{mismatches} mismatches against brute force over 1000 days × 8 components");
    let Some(dir) = replication_dir() else {
        return check(mismatches == 0, format!("{detail}; yearly means skipped, SWB_REPLICATION_DIR not set"));
    };
    let mean_2020 = |country: &str, col: &str| -> Result<f64, String> {
        let p = load_country(&dir, country)?;
        let s = p.column(col).map_err(|e| e.to_string())?;
        yearly_means(&s).get(&2020).copied().ok_or(format!("{country}: no 2020 values"))
    };
    match (mean_2020("italy", "SWB-I"), mean_2020("japan", "SWB-J")) {
        (Ok(i), Ok(j)) => check(
            mismatches == 0 && (i - 42.4).abs() <= 0.1 && (j - 27.0).abs() <= 0.1,
            format!("{detail}; 2020 means {i:.2} / {j:.2}"),
        ),
        (Err(e), _) | (_, Err(e)) => Fail(format!("{detail}; {e}")),
    }
}

// --------------------------------------------------------------- determinism

fn criterion_10() -> Outcome {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let tmp = tempfile::tempdir().unwrap();
    let mut digests = Vec::new();
    for workers in [1, 4] {
        let mut cfg = RunConfig::load(&data.join("sample_run.toml")).unwrap();
        cfg.resolve_paths(&data);
        cfg.out = tmp.path().join(format!("w{workers}"));
        cfg.plots = false;
        cfg.stages = Stage::ORDER.to_vec();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        match pool.install(|| swb_cli::run(&cfg)) {
            Ok(summary) => digests.push(summary.manifest.outputs),
            Err(e) => return Fail(format!("run with {workers} worker(s): {e:#}")),
        }
    }
    let same_bytes = digests[0].keys().all(|name| {
        std::fs::read(tmp.path().join("w1").join(name)).ok() == std::fs::read(tmp.path().join("w4").join(name)).ok()
    });
    check(
        digests[0] == digests[1] && same_bytes,
        format!("{} numeric outputs identical at 1 and 4 workers", digests[0].len()),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "elastic-net oracle equivalence", Duration::from_secs(5), criterion_1),
        (2, "full-shrinkage threshold", Duration::from_secs(1), criterion_2),
        (3, "Vasicek recovery and OU oracle", Duration::from_secs(30), criterion_3),
        (4, "CKLS nesting", Duration::from_secs(5), criterion_4),
        (5, "replication panels", Duration::from_secs(600), criterion_5),
        (6, "synthetic drifting driver", Duration::from_secs(120), criterion_6),
        (7, "ARMA(1,1) recovery and innovations oracle", Duration::from_secs(30), criterion_7),
        (8, "SEM fit", Duration::from_secs(60), criterion_8),
        (9, "SWB index formula", Duration::from_secs(10), criterion_9),
        (10, "end-to-end determinism", Duration::from_secs(300), criterion_10),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let took = start.elapsed();
        if let Pass(d) = &outcome {
            if took > budget {
                outcome = Fail(format!("{d}; over the {budget:?} budget"));
            }
        }
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {id:>2} {name} ({:.2} s): {detail}", took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
