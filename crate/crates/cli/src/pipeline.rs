//! Stage execution for a [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use chrono::NaiveDate;
use serde::Serialize;
use swb_core::dynamics::correlate::FULL_PERIOD;
use swb_core::dynamics::{self, stepwise_ols, DynResult, WindowConfig};
use swb_core::enet::{DesignMatrix, EnetConfig};
use swb_core::ingest::{self, PanelSpec};
use swb_core::rng::derive_seed;
use swb_core::sde::{self, SdeConfig, SdeModelKind, SdeParams};
use swb_core::sem::{self, SemConfig, SemModel};
use swb_core::{swb, Panel};

use crate::config::{RunConfig, Stage};
use crate::output::{self, num, opt, Manifest, OutputDir, INCOMPLETE, MANIFEST};
use crate::plot;

/// A failure tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: String,
    pub error: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {:#}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

fn tag<T>(stage: impl fmt::Display, r: anyhow::Result<T>) -> Result<T, StageError> {
    r.map_err(|error| StageError {
        stage: stage.to_string(),
        error,
    })
}

#[derive(Debug)]
pub struct RunSummary {
    pub out: PathBuf,
    pub manifest: Manifest,
}

struct RunState {
    panel: Panel,
    target: String,
}

/// Executes the configured stages. Paths in `cfg` are used as given.
///
/// Inputs are hashed before anything is written, so a missing input leaves
/// no output directory behind. A stage failure leaves an `_INCOMPLETE` marker
/// naming the stage and no manifest.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, StageError> {
    tag("config", cfg.validate())?;
    let inputs = tag("ingest", hash_inputs(cfg))?;
    let mut out = tag("output", OutputDir::create(&cfg.out))?;
    let _ = fs::remove_file(out.path(MANIFEST));
    tag("output", fs::write(out.path(INCOMPLETE), "running\n").map_err(Into::into))?;

    let result = run_stages(cfg, &mut out);
    if let Err(e) = &result {
        let _ = fs::write(out.path(INCOMPLETE), format!("{e}\n"));
        log::error!("{e}");
    }
    result?;

    if cfg.plots {
        tag("plots", plot::render_all(out.root()).and_then(|_| plot::write_report(out.root())))?;
    }
    let manifest = tag("manifest", write_manifest(cfg, &out, inputs))?;
    tag("output", fs::remove_file(out.path(INCOMPLETE)).map_err(Into::into))?;
    Ok(RunSummary {
        out: out.root().to_path_buf(),
        manifest,
    })
}

fn hash_inputs(cfg: &RunConfig) -> anyhow::Result<BTreeMap<String, String>> {
    let mut paths: Vec<&Path> = Vec::new();
    if cfg.plan().contains(&Stage::Ingest) {
        paths.push(&cfg.data.panel);
        paths.extend(cfg.data.panel_spec.as_deref());
    }
    if cfg.stages.contains(&Stage::Swb) {
        paths.extend(cfg.data.components.as_deref());
    }
    let sem_file = PathBuf::from(&cfg.sem.model);
    if cfg.stages.contains(&Stage::Sem) && SemModel::builtin(&cfg.sem.model).is_none() {
        paths.push(&sem_file);
    }
    let mut map = BTreeMap::new();
    for p in paths {
        if !p.is_file() {
            bail!("input {} does not exist", p.display());
        }
        map.insert(file_label(p), output::sha256_file(p)?);
    }
    Ok(map)
}

fn file_label(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn write_manifest(cfg: &RunConfig, out: &OutputDir, inputs: BTreeMap<String, String>) -> anyhow::Result<Manifest> {
    let config = cfg.to_toml();
    let mut outputs = BTreeMap::new();
    for name in out.written() {
        outputs.insert(name.clone(), output::sha256_file(&out.path(name))?);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config_sha256: output::sha256_bytes(config.as_bytes()),
        config,
        inputs,
        stages: cfg.plan().iter().map(|s| s.to_string()).collect(),
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out.path(MANIFEST), text)?;
    Ok(manifest)
}

fn run_stages(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), StageError> {
    let mut ctx: Option<RunState> = None;
    for stage in cfg.plan() {
        log::info!("running stage `{stage}`");
        let r = match stage {
            Stage::Ingest => ingest_stage(cfg, out).map(|c| ctx = Some(c)),
            Stage::Simulate => simulate_stage(cfg, out),
            _ => {
                let c = ctx.as_mut().expect("ingest runs first");
                match stage {
                    Stage::Swb => swb_stage(cfg, c, out),
                    Stage::Sde => sde_stage(cfg, c, out),
                    Stage::Dynamics => dynamics_stage(cfg, c, out),
                    Stage::Arima => arima_stage(cfg, c, out),
                    Stage::Correlate => correlate_stage(cfg, c, out),
                    Stage::Stepwise => stepwise_stage(cfg, c, out),
                    Stage::Sem => sem_stage(cfg, c, out),
                    Stage::Ingest | Stage::Simulate => unreachable!(),
                }
            }
        };
        tag(stage, r)?;
    }
    Ok(())
}

fn stage_seed(cfg: &RunConfig, stage: Stage) -> u64 {
    derive_seed(cfg.seed, stage.stream())
}

fn ingest_stage(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<RunState> {
    let (panel, report, spec_target) = match &cfg.data.panel_spec {
        Some(p) => {
            let spec = PanelSpec::from_path(p)?;
            let (panel, report) = ingest::load_with_spec(&cfg.data.panel, &spec)?;
            (panel, report, spec.target().map(String::from))
        }
        None => {
            let (panel, report) = ingest::load_all(&cfg.data.panel)?;
            (panel, report, None)
        }
    };
    let target = cfg
        .data
        .target
        .clone()
        .or(spec_target)
        .or_else(|| cfg.stages.contains(&Stage::Swb).then(|| cfg.swb.name.clone()))
        .or_else(|| panel.names().next().map(String::from))
        .ok_or_else(|| anyhow!("panel has no columns"))?;
    if !panel.contains(&target) && !cfg.stages.contains(&Stage::Swb) {
        bail!("target column `{target}` is not in the panel");
    }
    let mut buf = Vec::new();
    ingest::write_panel(&panel, &mut buf)?;
    out.text("panel.csv", std::str::from_utf8(&buf)?)?;
    out.json("ingest_report.json", &report)?;
    Ok(RunState { panel, target })
}

fn swb_stage(cfg: &RunConfig, ctx: &mut RunState, out: &mut OutputDir) -> anyhow::Result<()> {
    let path = cfg.data.components.as_ref().expect("validated");
    let days = swb::load_components(path)?;
    let series = swb::swb_series(&cfg.swb.name, &days)?;
    out.csv(
        "swb_daily.csv",
        &["date", &cfg.swb.name],
        series.dates().iter().zip(series.values()).map(|(d, v)| vec![d.to_string(), opt(*v)]),
    )?;
    out.csv(
        "swb_yearly_means.csv",
        &["year", "mean"],
        swb::yearly_means(&series).into_iter().map(|(y, m)| vec![y.to_string(), num(m)]),
    )?;
    ctx.panel.upsert(&series);
    Ok(())
}

fn sde_config(cfg: &RunConfig) -> SdeConfig {
    SdeConfig {
        delta: cfg.sde.delta,
        max_iter: cfg.sde.max_iter,
        multistarts: cfg.sde.multistarts,
        seed: stage_seed(cfg, Stage::Sde),
    }
}

fn sde_stage(cfg: &RunConfig, ctx: &mut RunState, out: &mut OutputDir) -> anyhow::Result<()> {
    let scfg = sde_config(cfg);
    let series = ctx.panel.column(&ctx.target)?;
    let mut selection = sde::select_model(&series, &scfg)?;
    selection.candidates.retain(|c| cfg.sde.models.contains(&c.kind));
    let best = selection
        .candidates
        .iter()
        .filter_map(|c| c.fit.as_ref())
        .min_by(|a, b| a.aic.total_cmp(&b.aic).then(a.kind.n_params().cmp(&b.kind.n_params())))
        .ok_or_else(|| anyhow!("none of the selected SDE models could be fitted"))?
        .clone();
    selection.best = best.kind;

    let rows = selection.candidates.iter().map(|c| match &c.fit {
        Some(f) => {
            let se = f.std_errors;
            vec![
                c.kind.to_string(),
                num(f.params.alpha),
                opt(se.map(|s| s.alpha)),
                num(f.params.beta),
                opt(se.map(|s| s.beta)),
                num(f.params.sigma),
                opt(se.map(|s| s.sigma)),
                opt(f.params.gamma.or(c.kind.implied_gamma())),
                opt(se.and_then(|s| s.gamma)),
                num(f.loglik),
                num(f.aic),
                f.converged.to_string(),
                (c.kind == best.kind).to_string(),
                String::new(),
            ]
        }
        None => {
            let mut row = vec![c.kind.to_string()];
            row.extend(std::iter::repeat_n(String::new(), 12));
            row.push(c.excluded.clone().unwrap_or_default());
            row
        }
    });
    out.csv(
        "sde_table.csv",
        &[
            "model", "alpha", "alpha_se", "beta", "beta_se", "sigma", "sigma_se", "gamma", "gamma_se", "loglik", "aic",
            "converged", "selected", "excluded",
        ],
        rows,
    )?;
    out.json("sde_fits.json", &selection)?;

    let (first, x0) = series
        .present()
        .next()
        .ok_or_else(|| anyhow!("target series is empty"))?;
    let n = series.dates().len() - series.dates().iter().position(|d| *d == first).expect("present date");
    let limit = sde::limit_path(&best.params, x0, first, n, &scfg)?;
    out.csv(
        "sde_limit.csv",
        &["date", "observed", "limit"],
        limit
            .dates()
            .iter()
            .zip(limit.values())
            .map(|(d, l)| vec![d.to_string(), opt(series.get(*d).flatten()), opt(*l)]),
    )?;
    Ok(())
}

fn simulate_stage(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let s = &cfg.simulate;
    let params = match (s.model, s.gamma) {
        (SdeModelKind::Ckls, Some(g)) => SdeParams::with_gamma(s.alpha, s.beta, s.sigma, g)?,
        (SdeModelKind::Ckls, None) => bail!("simulating CKLS needs `simulate.gamma`"),
        _ => SdeParams::new(s.alpha, s.beta, s.sigma)?,
    };
    let scfg = sde_config(cfg);
    let path = sde::simulate(s.model, &params, s.x0, s.steps, &scfg, stage_seed(cfg, Stage::Simulate))?;
    let limit = sde::limit_path(&params, s.x0, path.dates()[0], path.len(), &scfg)?;
    out.csv(
        "sde_simulated.csv",
        &["date", "value", "limit"],
        path.dates()
            .iter()
            .zip(path.values())
            .zip(limit.values())
            .map(|((d, v), l)| vec![d.to_string(), opt(*v), opt(*l)]),
    )
}

fn window_config(cfg: &RunConfig, mix_alpha: f64) -> WindowConfig {
    let d = &cfg.dynamics;
    let base = WindowConfig::default();
    WindowConfig {
        window_len: d.window_len,
        mix_alpha,
        folds: d.folds,
        seed: stage_seed(cfg, Stage::Dynamics),
        include_lagged_target: d.include_lagged_target,
        covariates: d.covariates.clone(),
        enet: EnetConfig {
            grid_len: d.grid_len,
            ..base.enet
        },
        forest: dynamics::ForestConfig {
            trees: d.trees,
            ..base.forest
        },
    }
}

#[derive(Serialize)]
struct DynMetrics<'a> {
    target: &'a str,
    mix_alpha: f64,
    window_len: usize,
    windows: usize,
    skipped: usize,
    n_compared: usize,
    enet_mse: f64,
    arima_mse: f64,
}

fn dynamics_stage(cfg: &RunConfig, ctx: &mut RunState, out: &mut OutputDir) -> anyhow::Result<()> {
    let wcfg = window_config(cfg, cfg.dynamics.mix_alpha);
    let res = dynamics::dynamic_elastic_net(&ctx.panel, &ctx.target, &wcfg)?;
    write_dynamics(&ctx.panel, &ctx.target, &wcfg, &res, out)?;
    if !cfg.dynamics.alpha_sweep.is_empty() {
        let mut rows = vec![sweep_row(cfg.dynamics.mix_alpha, &res)];
        for &a in &cfg.dynamics.alpha_sweep {
            if a == cfg.dynamics.mix_alpha {
                continue;
            }
            let r = dynamics::dynamic_elastic_net(&ctx.panel, &ctx.target, &window_config(cfg, a))?;
            rows.push(sweep_row(a, &r));
        }
        rows.sort_by(|a, b| a[0].parse::<f64>().unwrap().total_cmp(&b[0].parse().unwrap()));
        out.csv("dyn_alpha_sweep.csv", &["mix_alpha", "windows", "n_compared", "enet_mse", "arima_mse"], rows)?;
    }
    Ok(())
}

fn sweep_row(alpha: f64, r: &DynResult) -> Vec<String> {
    vec![
        num(alpha),
        r.windows.len().to_string(),
        r.n_compared.to_string(),
        num(r.enet_mse),
        num(r.arima_mse),
    ]
}

fn next_date(panel: &Panel, t: NaiveDate) -> String {
    panel
        .position(t)
        .and_then(|i| panel.dates().get(i + 1))
        .map(|d| d.to_string())
        .unwrap_or_default()
}

pub fn write_dynamics(panel: &Panel, target: &str, wcfg: &WindowConfig, res: &DynResult, out: &mut OutputDir) -> anyhow::Result<()> {
    let names: Vec<String> = res.selection_counts.keys().cloned().collect();
    let mut header = vec!["date_t", "lambda_t"];
    header.extend(names.iter().map(String::as_str));
    out.csv(
        "dyn_coefficients.csv",
        &header,
        res.windows.iter().map(|w| {
            let mut row = vec![w.date_t.to_string(), num(w.lambda_t)];
            row.extend(names.iter().map(|n| num(w.coefficients[n])));
            row
        }),
    )?;
    out.csv(
        "dyn_ranks.csv",
        &header[..1].iter().chain(&header[2..]).copied().collect::<Vec<_>>(),
        res.windows.iter().map(|w| {
            let mut row = vec![w.date_t.to_string()];
            row.extend(names.iter().map(|n| num(w.rf_relative_rank[n])));
            row
        }),
    )?;
    let arima: BTreeMap<NaiveDate, f64> = res.arima.iter().map(|a| (a.date_t, a.forecast)).collect();
    out.csv(
        "dyn_forecasts.csv",
        &["date_t", "forecast_date", "actual", "enet", "arima"],
        res.windows.iter().map(|w| {
            vec![
                w.date_t.to_string(),
                next_date(panel, w.date_t),
                opt(w.actual),
                num(w.forecast),
                opt(arima.get(&w.date_t).copied()),
            ]
        }),
    )?;
    out.csv(
        "dyn_summary.csv",
        &["variable", "selection_count", "avg_relative_rank"],
        names
            .iter()
            .map(|n| vec![n.clone(), res.selection_counts[n].to_string(), num(res.avg_relative_rank[n])]),
    )?;
    out.csv(
        "dyn_skipped.csv",
        &["date_t", "reason"],
        res.skipped.iter().map(|s| vec![s.date_t.to_string(), s.reason.clone()]),
    )?;
    out.json(
        "dyn_metrics.json",
        &DynMetrics {
            target,
            mix_alpha: wcfg.mix_alpha,
            window_len: wcfg.window_len,
            windows: res.windows.len(),
            skipped: res.skipped.len(),
            n_compared: res.n_compared,
            enet_mse: res.enet_mse,
            arima_mse: res.arima_mse,
        },
    )
}

fn arima_stage(cfg: &RunConfig, ctx: &mut RunState, out: &mut OutputDir) -> anyhow::Result<()> {
    let fc = dynamics::rolling_arima(&ctx.panel, &ctx.target, cfg.dynamics.window_len)?;
    let errs: Vec<f64> = fc.iter().filter_map(|f| f.actual.map(|a| (f.forecast - a).powi(2))).collect();
    out.csv(
        "arima_forecasts.csv",
        &["date_t", "forecast_date", "actual", "arima"],
        fc.iter()
            .map(|f| vec![f.date_t.to_string(), next_date(&ctx.panel, f.date_t), opt(f.actual), num(f.forecast)]),
    )?;
    let mse = if errs.is_empty() { f64::NAN } else { errs.iter().sum::<f64>() / errs.len() as f64 };
    out.json(
        "arima_metrics.json",
        &serde_json::json!({
            "target": ctx.target,
            "window_len": cfg.dynamics.window_len,
            "forecasts": fc.len(),
            "n_compared": errs.len(),
            "arima_mse": if mse.is_finite() { serde_json::json!(mse) } else { serde_json::Value::Null },
        }),
    )
}

fn correlate_stage(cfg: &RunConfig, ctx: &mut RunState, out: &mut OutputDir) -> anyhow::Result<()> {
    let table = dynamics::monthly_correlations(&ctx.panel, &ctx.target, cfg.correlate.significance)?;
    let rows = table.cells.iter().flatten().map(|c| {
        vec![
            c.period.clone(),
            c.variable.clone(),
            opt(c.rho),
            opt(c.p_value),
            c.n.to_string(),
            opt(c.shown()),
            c.mask.map(|m| m.as_str().to_string()).unwrap_or_default(),
        ]
    });
    out.csv("correlations.csv", &["period", "variable", "rho", "p_value", "n", "shown", "mask"], rows)
}

/// Complete-case design of `target` on every other column over `rows`,
/// leaving out columns that are constant there.
fn period_design(panel: &Panel, target: &str, rows: &[usize]) -> anyhow::Result<(DesignMatrix, Vec<f64>)> {
    let names: Vec<&str> = panel.names().filter(|n| *n != target).collect();
    let y_all = panel.values(target)?;
    let cols: Vec<&[Option<f64>]> = names.iter().map(|n| panel.values(n)).collect::<Result<_, _>>()?;
    let keep: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&i| y_all[i].is_some() && cols.iter().all(|c| c[i].is_some()))
        .collect();
    let (mut kept, mut columns) = (Vec::new(), Vec::new());
    for (n, c) in names.iter().zip(&cols) {
        let v: Vec<f64> = keep.iter().map(|&i| c[i].unwrap()).collect();
        if v.iter().any(|x| *x != v[0]) {
            kept.push(n.to_string());
            columns.push(v);
        }
    }
    if kept.is_empty() {
        bail!("no non-constant covariates over {} complete rows", keep.len());
    }
    let y = keep.iter().map(|&i| y_all[i].unwrap()).collect();
    Ok((DesignMatrix::from_columns(kept, &columns)?, y))
}

fn stepwise_stage(cfg: &RunConfig, ctx: &mut RunState, out: &mut OutputDir) -> anyhow::Result<()> {
    use chrono::Datelike;
    let panel = &ctx.panel;
    let mut periods: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, d) in panel.dates().iter().enumerate() {
        let m = format!("{:04}-{:02}", d.year(), d.month());
        match periods.last_mut() {
            Some((p, rows)) if *p == m => rows.push(i),
            _ => periods.push((m, vec![i])),
        }
    }
    periods.push((FULL_PERIOD.into(), (0..panel.n_dates()).collect()));

    let mut rows = Vec::new();
    let mut results = BTreeMap::new();
    for (period, idx) in &periods {
        let fitted = period_design(panel, &ctx.target, idx)
            .and_then(|(x, y)| stepwise_ols(&x, &y, cfg.stepwise.criterion).map_err(Into::into));
        match fitted {
            Ok(r) => {
                for (name, b) in &r.coefficients {
                    rows.push(vec![
                        period.clone(),
                        r.n.to_string(),
                        name.clone(),
                        num(*b),
                        num(r.score),
                        num(r.r_squared),
                        String::new(),
                    ]);
                }
                results.insert(period.clone(), serde_json::to_value(&r)?);
            }
            Err(e) => {
                let msg = format!("{e:#}");
                log::warn!("stepwise {period}: {msg}");
                rows.push(vec![period.clone(), String::new(), String::new(), String::new(), String::new(), String::new(), msg.clone()]);
                results.insert(period.clone(), serde_json::json!({ "error": msg }));
            }
        }
    }
    out.csv("stepwise.csv", &["period", "n", "term", "coefficient", "score", "r_squared", "error"], rows)?;
    out.json("stepwise.json", &results)
}

pub fn load_sem_model(spec: &str) -> anyhow::Result<SemModel> {
    match SemModel::builtin(spec) {
        Some(m) => Ok(m),
        None => {
            let text = fs::read_to_string(spec).with_context(|| format!("reading SEM model {spec}"))?;
            Ok(SemModel::parse(&text)?)
        }
    }
}

fn sem_stage(cfg: &RunConfig, ctx: &mut RunState, out: &mut OutputDir) -> anyhow::Result<()> {
    let model = load_sem_model(&cfg.sem.model)?;
    let scfg = SemConfig {
        multistarts: cfg.sem.multistarts,
        seed: stage_seed(cfg, Stage::Sem),
        ..SemConfig::default()
    };
    let fit = sem::fit_sem(&model, &ctx.panel, &scfg)?;
    if !fit.heywood.is_empty() {
        log::warn!("Heywood case: negative variance for {}", fit.heywood.join(", "));
    }
    out.csv(
        "sem_estimates.csv",
        &["lhs", "op", "rhs", "estimate", "std_error", "z", "p_value", "stars"],
        fit.estimates.iter().map(|e| {
            vec![
                e.lhs.clone(),
                e.op.symbol().to_string(),
                e.rhs.clone(),
                num(e.value),
                opt(e.std_error),
                opt(e.z()),
                opt(e.p_value()),
                e.stars().to_string(),
            ]
        }),
    )?;
    out.json("sem_fit.json", &fit)?;
    let mut dump = String::new();
    for e in &fit.estimates {
        dump.push_str(&format!("{} {} {} {}\n", e.lhs, e.op.symbol(), e.rhs, num(e.value)));
    }
    out.text("sem_paths.txt", &dump)
}
