//! Run configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use swb_core::dynamics::Criterion;
use swb_core::sde::SdeModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Swb,
    Sde,
    Simulate,
    Dynamics,
    Arima,
    Correlate,
    Stepwise,
    Sem,
}

impl Stage {
    /// Execution order; every stage after `Swb` reads the ingested panel.
    pub const ORDER: [Stage; 9] = [
        Stage::Ingest,
        Stage::Swb,
        Stage::Sde,
        Stage::Simulate,
        Stage::Dynamics,
        Stage::Arima,
        Stage::Correlate,
        Stage::Stepwise,
        Stage::Sem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Swb => "swb",
            Stage::Sde => "sde",
            Stage::Simulate => "simulate",
            Stage::Dynamics => "dynamics",
            Stage::Arima => "arima",
            Stage::Correlate => "correlate",
            Stage::Stepwise => "stepwise",
            Stage::Sem => "sem",
        }
    }

    /// Sub-seed stream for stages that draw random numbers.
    pub fn stream(self) -> u64 {
        Stage::ORDER.iter().position(|s| *s == self).expect("listed") as u64 + 1
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Delimited panel file with a `date` column.
    pub panel: PathBuf,
    /// Column roles and transforms; without it every column is loaded as is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_spec: Option<PathBuf>,
    /// Long-format sentiment components for the `swb` stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<PathBuf>,
    /// Target column; defaults to the panel spec's target, else the first column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwbBlock {
    /// Panel column the computed index is written to.
    pub name: String,
}

impl Default for SwbBlock {
    fn default() -> Self {
        Self { name: "SWB".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeBlock {
    pub delta: f64,
    pub multistarts: usize,
    pub max_iter: usize,
    pub models: Vec<SdeModelKind>,
}

impl Default for SdeBlock {
    fn default() -> Self {
        let d = swb_core::sde::SdeConfig::default();
        Self {
            delta: d.delta,
            multistarts: d.multistarts,
            max_iter: d.max_iter,
            models: SdeModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateBlock {
    pub model: SdeModelKind,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub x0: f64,
    pub steps: usize,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            model: SdeModelKind::Vas,
            alpha: 3.16,
            beta: 38.99,
            sigma: 14.7,
            gamma: None,
            x0: 38.99,
            steps: 365,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsBlock {
    pub window_len: usize,
    pub mix_alpha: f64,
    pub folds: usize,
    pub include_lagged_target: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Vec<String>>,
    pub grid_len: usize,
    pub trees: usize,
    /// Extra mixing weights to rerun and compare on forecast MSE.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub alpha_sweep: Vec<f64>,
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        let w = swb_core::dynamics::WindowConfig::default();
        Self {
            window_len: w.window_len,
            mix_alpha: w.mix_alpha,
            folds: w.folds,
            include_lagged_target: w.include_lagged_target,
            covariates: None,
            grid_len: w.enet.grid_len,
            trees: w.forest.trees,
            alpha_sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateBlock {
    pub significance: f64,
}

impl Default for CorrelateBlock {
    fn default() -> Self {
        Self { significance: 0.05 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepwiseBlock {
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemBlock {
    /// `italy`, `japan`, or a path to a model file.
    pub model: String,
    pub multistarts: usize,
}

impl Default for SemBlock {
    fn default() -> Self {
        Self {
            model: "italy".into(),
            multistarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Every stage seed derives from this one.
    pub seed: u64,
    pub out: PathBuf,
    pub stages: Vec<Stage>,
    #[serde(default = "default_true")]
    pub plots: bool,
    pub data: DataConfig,
    #[serde(default)]
    pub swb: SwbBlock,
    #[serde(default)]
    pub sde: SdeBlock,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub dynamics: DynamicsBlock,
    #[serde(default)]
    pub correlate: CorrelateBlock,
    #[serde(default)]
    pub stepwise: StepwiseBlock,
    #[serde(default)]
    pub sem: SemBlock,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn new(panel: impl Into<PathBuf>, out: impl Into<PathBuf>, stages: Vec<Stage>) -> Self {
        Self {
            seed: 20_201_015,
            out: out.into(),
            stages,
            plots: true,
            data: DataConfig {
                panel: panel.into(),
                panel_spec: None,
                components: None,
                target: None,
            },
            swb: SwbBlock::default(),
            sde: SdeBlock::default(),
            simulate: SimulateBlock::default(),
            dynamics: DynamicsBlock::default(),
            correlate: CorrelateBlock::default(),
            stepwise: StepwiseBlock::default(),
            sem: SemBlock::default(),
        }
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Relative paths in the config are taken relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        fix(&mut self.data.panel);
        if let Some(p) = self.data.panel_spec.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.components.as_mut() {
            fix(p);
        }
        if !matches!(self.sem.model.as_str(), "italy" | "japan") {
            let mut p = PathBuf::from(&self.sem.model);
            fix(&mut p);
            self.sem.model = p.to_string_lossy().into_owned();
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.stages.is_empty() {
            bail!("no stages selected");
        }
        if self.stages.contains(&Stage::Swb) && self.data.components.is_none() {
            bail!("the swb stage needs `data.components`");
        }
        if !(self.sde.delta > 0.0) {
            bail!("sde.delta must be positive");
        }
        if !(0.0..=1.0).contains(&self.dynamics.mix_alpha) || self.dynamics.alpha_sweep.iter().any(|a| !(0.0..=1.0).contains(a)) {
            bail!("mixing weights must lie in [0, 1]");
        }
        if !(self.correlate.significance > 0.0 && self.correlate.significance < 1.0) {
            bail!("correlate.significance must lie in (0, 1)");
        }
        Ok(())
    }

    /// Selected stages in execution order, with `ingest` first whenever a
    /// stage reads the panel.
    pub fn plan(&self) -> Vec<Stage> {
        let needs_panel = self.stages.iter().any(|s| *s != Stage::Simulate);
        Stage::ORDER
            .into_iter()
            .filter(|s| (*s == Stage::Ingest && needs_panel) || self.stages.contains(s))
            .collect()
    }
}
