use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use swb_cli::config::{RunConfig, Stage};
use swb_cli::{output, plot};
use swb_core::dynamics::Criterion;
use swb_core::sde::SdeModelKind;
use swb_core::synthetic::{self, DriftSpec};
use swb_core::{ingest, swb};

#[derive(Parser)]
#[command(name = "swb", version, about = "Subjective well-being time-series analyses")]
struct Cli {
    /// Run config (TOML); flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(flatten)]
    data: DataArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Panel file (CSV with a `date` column).
    #[arg(long, global = true)]
    panel: Option<PathBuf>,
    /// Panel spec (TOML) with column roles and transforms.
    #[arg(long, global = true)]
    panel_spec: Option<PathBuf>,
    /// Sentiment component file for the SWB index.
    #[arg(long, global = true)]
    components: Option<PathBuf>,
    #[arg(long, global = true)]
    target: Option<String>,
    /// Skip SVG and report rendering.
    #[arg(long, global = true)]
    no_plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage listed in the config.
    Run,
    /// Load and transform the panel.
    Ingest,
    /// Build the composite index from sentiment components.
    Swb {
        #[arg(long)]
        name: Option<String>,
    },
    /// Fit the four diffusion models to the target and select by AIC.
    FitSde {
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<SdeModelKind>>,
        #[arg(long)]
        multistarts: Option<usize>,
    },
    /// Simulate a diffusion path.
    SimulateSde {
        #[arg(long)]
        model: Option<SdeModelKind>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Rolling-window elastic net with the ARMA baseline and forest ranks.
    DynEnet {
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        no_lag: bool,
        #[arg(long)]
        trees: Option<usize>,
        /// Also rerun at these mixing weights and compare forecast MSE.
        #[arg(long, value_delimiter = ',')]
        alpha_sweep: Option<Vec<f64>>,
    },
    /// Rolling ARMA(1,1) one-step forecasts only.
    ArimaBaseline {
        #[arg(long)]
        window: Option<usize>,
    },
    /// Monthly Spearman screen of the target against every covariate.
    Correlate {
        #[arg(long)]
        significance: Option<f64>,
    },
    /// Monthly and full-period stepwise OLS.
    Stepwise {
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
    },
    /// Fit a structural equation model (`italy`, `japan` or a model file).
    Sem {
        #[arg(long)]
        model: Option<String>,
    },
    /// Re-render plots and report.md from an existing output directory.
    Report,
    /// Write the bundled synthetic data files.
    Synth {
        #[arg(long, default_value_t = 320)]
        days: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CriterionArg {
    Aic,
    Bic,
}

fn base_config(cli: &Cli, stages: Vec<Stage>) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let mut cfg = RunConfig::load(path)?;
            cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            cfg
        }
        None => {
            let needs_panel = stages.iter().any(|s| *s != Stage::Simulate);
            let panel = match (&cli.data.panel, needs_panel) {
                (Some(p), _) => p.clone(),
                (None, false) => PathBuf::new(),
                (None, true) => bail!("give --panel or --config"),
            };
            RunConfig::new(panel, "out", stages.clone())
        }
    };
    if !matches!(cli.command, Command::Run) {
        cfg.stages = stages;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let d = &cli.data;
    if let Some(p) = &d.panel {
        cfg.data.panel = p.clone();
    }
    if d.panel_spec.is_some() {
        cfg.data.panel_spec = d.panel_spec.clone();
    }
    if d.components.is_some() {
        cfg.data.components = d.components.clone();
    }
    if d.target.is_some() {
        cfg.data.target = d.target.clone();
    }
    if d.no_plots {
        cfg.plots = false;
    }
    Ok(cfg)
}

fn configure(cli: &Cli) -> anyhow::Result<RunConfig> {
    let stages = match &cli.command {
        Command::Run => Vec::new(),
        Command::Ingest => vec![Stage::Ingest],
        Command::Swb { .. } => vec![Stage::Swb],
        Command::FitSde { .. } => vec![Stage::Sde],
        Command::SimulateSde { .. } => vec![Stage::Simulate],
        Command::DynEnet { .. } => vec![Stage::Dynamics],
        Command::ArimaBaseline { .. } => vec![Stage::Arima],
        Command::Correlate { .. } => vec![Stage::Correlate],
        Command::Stepwise { .. } => vec![Stage::Stepwise],
        Command::Sem { .. } => vec![Stage::Sem],
        Command::Report | Command::Synth { .. } => unreachable!("handled before configure"),
    };
    if matches!(cli.command, Command::Run) && cli.config.is_none() {
        bail!("`run` needs --config");
    }
    let mut cfg = base_config(cli, stages)?;
    match &cli.command {
        Command::Swb { name: Some(n) } => cfg.swb.name = n.clone(),
        Command::FitSde {
            delta,
            models,
            multistarts,
        } => {
            set(&mut cfg.sde.delta, *delta);
            set(&mut cfg.sde.models, models.clone());
            set(&mut cfg.sde.multistarts, *multistarts);
        }
        Command::SimulateSde {
            model,
            alpha,
            beta,
            sigma,
            gamma,
            x0,
            steps,
            delta,
        } => {
            let s = &mut cfg.simulate;
            set(&mut s.model, *model);
            set(&mut s.alpha, *alpha);
            set(&mut s.beta, *beta);
            set(&mut s.sigma, *sigma);
            if gamma.is_some() {
                s.gamma = *gamma;
            }
            set(&mut s.x0, *x0);
            set(&mut s.steps, *steps);
            set(&mut cfg.sde.delta, *delta);
        }
        Command::DynEnet {
            window,
            alpha,
            folds,
            no_lag,
            trees,
            alpha_sweep,
        } => {
            let d = &mut cfg.dynamics;
            set(&mut d.window_len, *window);
            set(&mut d.mix_alpha, *alpha);
            set(&mut d.folds, *folds);
            set(&mut d.trees, *trees);
            set(&mut d.alpha_sweep, alpha_sweep.clone());
            if *no_lag {
                d.include_lagged_target = false;
            }
        }
        Command::ArimaBaseline { window } => set(&mut cfg.dynamics.window_len, *window),
        Command::Correlate { significance } => set(&mut cfg.correlate.significance, *significance),
        Command::Stepwise { criterion } => set(
            &mut cfg.stepwise.criterion,
            criterion.map(|c| match c {
                CriterionArg::Aic => Criterion::Aic,
                CriterionArg::Bic => Criterion::Bic,
            }),
        ),
        Command::Sem { model } => set(&mut cfg.sem.model, model.clone()),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn synth(out: &Path, seed: u64, days: usize) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let (panel, components) = synthetic::sample_data(days, seed)?;
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> swb_core::Result<()>| -> anyhow::Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        std::fs::write(out.join(name), buf).with_context(|| format!("writing {name}"))
    };
    write("sample_panel.csv", &|b| ingest::write_panel(&panel, b))?;
    write("sample_components.csv", &|b| swb::write_components(&components, b))?;
    let drift = synthetic::drifting_panel(&DriftSpec::default(), seed)?;
    write("synthetic_drift.csv", &|b| ingest::write_panel(&drift.panel, b))?;
    let mut regimes = String::from("from_date,variable\n");
    for r in &drift.regimes {
        regimes.push_str(&format!("{},{}\n", drift.panel.dates()[r.from_row], r.variable));
    }
    std::fs::write(out.join("synthetic_drift_regimes.csv"), regimes)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Report => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let plots = plot::render_all(&dir)?;
            plot::write_report(&dir)?;
            println!("rendered {} plot(s) and report.md in {}", plots.len(), dir.display());
            return Ok(());
        }
        Command::Synth { days } => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("data"));
            synth(&dir, cli.seed.unwrap_or(20_201_015), *days)?;
            println!("wrote synthetic data to {}", dir.display());
            return Ok(());
        }
        _ => {}
    }
    let cfg = configure(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        pool = pool.num_threads(w.max(1));
    }
    let summary = pool.build()?.install(|| swb_cli::run(&cfg))?;
    println!(
        "wrote {} output file(s) to {} ({} {})",
        summary.manifest.outputs.len(),
        summary.out.display(),
        output::MANIFEST,
        &summary.manifest.config_sha256[..12]
    );
    Ok(())
}
