//! Experiment configuration: one JSON document with a top-level `kind`.
//!
//! ```json
//! {
//!   "kind": "matfac-sweep",
//!   "task": { "type": "analyzed" },
//!   "depths": [2, 3],
//!   "init": "balanced",
//!   "schedule": [{ "learning_rate": 9e-3, "init_scale": 1e-4 }],
//!   "seeds": [0],
//!   "output": "runs/matfac"
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use implreg_core::matfac::{make_analyzed_task, make_dxd_task, make_perturbed_task, InitKind};
use implreg_core::tenfac::default_rank;
use implreg_core::CompletionTask;

use crate::error::{config_err, io_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    MatfacRun(MatfacConfig),
    MatfacSweep(MatfacConfig),
    Detsign(DetsignConfig),
    TenfacSweep(TenfacConfig),
    Plot(PlotConfig),
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::MatfacRun(c) => {
                c.validate()?;
                if c.depths.len() * c.schedule.len() * c.seeds.len() != 1 {
                    return config_err("matfac-run takes exactly one depth, schedule point and seed; use matfac-sweep");
                }
                Ok(())
            }
            Self::MatfacSweep(c) => c.validate(),
            Self::Detsign(c) => c.validate(),
            Self::TenfacSweep(c) => c.validate(),
            Self::Plot(c) => c.validate(),
        }
    }

    /// Replaces every seed list with the single seed `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        match self {
            Self::MatfacRun(c) | Self::MatfacSweep(c) => c.seeds = vec![seed],
            Self::TenfacSweep(c) => c.seeds = vec![seed],
            Self::Detsign(c) => c.seed = seed,
            Self::Plot(_) => {}
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        presets::get(name)
    }
}

/// Which 2x2 or d x d' completion problem to train on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TaskSpec {
    /// Top-left unobserved, off-diagonal ones, zero bottom-right.
    Analyzed,
    /// `z`, `z_prime`, `eps` placed around the unobserved `(i, j)` (0-based).
    Perturbed {
        z: f64,
        z_prime: f64,
        eps: f64,
        #[serde(default)]
        unobserved: (usize, usize),
    },
    /// d x d' problem with only the top-left entry unobserved.
    Rectangular { rows: usize, cols: usize },
}

impl TaskSpec {
    pub fn build(&self) -> Result<CompletionTask> {
        Ok(match *self {
            TaskSpec::Analyzed => make_analyzed_task(),
            TaskSpec::Perturbed { z, z_prime, eps, unobserved } => make_perturbed_task(z, z_prime, eps, unobserved)?,
            TaskSpec::Rectangular { rows, cols } => make_dxd_task(rows, cols)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub learning_rate: f64,
    /// `alpha`: std of the initial product's entries (scale for identity init).
    pub init_scale: f64,
}

fn default_max_iters() -> u64 {
    5_000_000
}
fn default_loss_threshold() -> f64 {
    1e-4
}
fn default_log_stride() -> u64 {
    1000
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatfacConfig {
    pub task: TaskSpec,
    pub depths: Vec<usize>,
    pub init: InitKind,
    /// Learning rates paired with init scales.
    pub schedule: Vec<GridPoint>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
    #[serde(default = "default_loss_threshold")]
    pub loss_threshold: f64,
    #[serde(default = "default_log_stride")]
    pub log_stride: u64,
    /// Redraw random inits until the product's determinant has the sign the task calls for.
    #[serde(default = "yes")]
    pub det_sign_condition: bool,
    /// Directory receiving one CSV per run and `summary.json`.
    pub output: PathBuf,
}

/// One fully resolved matrix run; its JSON form keys the run id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatfacRunSpec {
    pub task: TaskSpec,
    pub depth: usize,
    pub init: InitKind,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub max_iters: u64,
    pub loss_threshold: f64,
    pub log_stride: u64,
    pub det_sign_condition: bool,
}

impl MatfacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.schedule.is_empty() || self.seeds.is_empty() {
            return config_err("depths, schedule and seeds must be non-empty");
        }
        if self.depths.contains(&0) {
            return config_err("depth must be at least 1");
        }
        if self.schedule.iter().any(|g| !(g.learning_rate > 0.0) || !(g.init_scale > 0.0)) {
            return config_err("learning rates and init scales must be positive");
        }
        if self.log_stride == 0 {
            return config_err("log_stride must be at least 1");
        }
        self.task.build()?;
        Ok(())
    }

    /// Depth-major, then schedule, then seed.
    pub fn runs(&self) -> Vec<MatfacRunSpec> {
        let mut out = Vec::new();
        for &depth in &self.depths {
            for g in &self.schedule {
                for &seed in &self.seeds {
                    out.push(MatfacRunSpec {
                        task: self.task.clone(),
                        depth,
                        init: self.init,
                        learning_rate: g.learning_rate,
                        init_scale: g.init_scale,
                        seed,
                        max_iters: self.max_iters,
                        loss_threshold: self.loss_threshold,
                        log_stride: self.log_stride,
                        det_sign_condition: self.det_sign_condition,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetsignConfig {
    pub samples: usize,
    /// Number of Gaussian factors in the product distribution.
    pub depth: usize,
    #[serde(default)]
    pub seed: u64,
    /// Summary CSV; stdout when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl DetsignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1000 {
            return config_err(format!("detsign needs at least 1000 samples, got {}", self.samples));
        }
        if self.depth == 0 {
            return config_err("detsign depth must be at least 1");
        }
        Ok(())
    }
}

fn default_mse_threshold() -> f64 {
    1e-6
}
fn default_cp_iters() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenfacConfig {
    pub dims: Vec<usize>,
    pub ground_truth_rank: usize,
    #[serde(default)]
    pub ground_truth_seed: u64,
    /// Seeds the observation draw for each `n_obs`; shared across init seeds.
    #[serde(default)]
    pub observation_seed: u64,
    pub n_obs: Vec<usize>,
    pub init_stds: Vec<f64>,
    pub seeds: Vec<u64>,
    /// CP rank of the model; defaults to `prod(dims) / max(dims)`.
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default = "default_mse_threshold")]
    pub mse_threshold: f64,
    #[serde(default = "default_cp_iters")]
    pub max_iters: u64,
    /// Largest rank tried by the estimator; defaults to the model rank.
    #[serde(default)]
    pub r_max: Option<usize>,
    #[serde(default = "yes")]
    pub estimate_rank: bool,
    /// Also estimate the rank of the zeros baseline (slow: it is usually high rank).
    #[serde(default)]
    pub baseline_rank: bool,
    /// Summary CSV path.
    pub output: PathBuf,
}

impl TenfacConfig {
    pub fn model_rank(&self) -> usize {
        self.rank.unwrap_or_else(|| default_rank(&self.dims))
    }

    pub fn rank_cap(&self) -> usize {
        self.r_max.unwrap_or_else(|| self.model_rank())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return config_err("dims must be non-empty and positive");
        }
        if self.n_obs.is_empty() || self.init_stds.is_empty() || self.seeds.is_empty() {
            return config_err("n_obs, init_stds and seeds must be non-empty");
        }
        let total: usize = self.dims.iter().product();
        if let Some(&n) = self.n_obs.iter().find(|&&n| n == 0 || n >= total) {
            return config_err(format!("n_obs {n} outside [1, {}]", total - 1));
        }
        if self.init_stds.iter().any(|s| !(*s > 0.0)) {
            return config_err("init_stds must be positive");
        }
        if self.ground_truth_rank == 0 || self.model_rank() == 0 || self.rank_cap() == 0 {
            return config_err("ranks must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotStyle {
    /// |unobserved entry| against loss, one curve per trajectory CSV.
    LossVsEntry,
    /// Reconstruction error and estimated rank against the number of observations.
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotConfig {
    pub inputs: Vec<PathBuf>,
    pub style: PlotStyle,
    pub output: PathBuf,
    /// Entry column for `loss-vs-entry`; `w11` by default.
    #[serde(default)]
    pub column: Option<String>,
}

impl PlotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return config_err("plot needs at least one input");
        }
        Ok(())
    }
}

pub mod presets {
    //! The learning-rate / init grids and observation grids of the reference experiments.

    use super::*;

    pub const NAMES: &[&str] = &[
        "matfac-depth2",
        "matfac-depth3",
        "matfac-depth4",
        "tenfac-order3-rank1",
        "tenfac-order4-rank1",
        "tenfac-order3-rank3",
        "tenfac-order4-rank3",
    ];

    fn pairs(lrs: &[f64], scales: &[f64]) -> Vec<GridPoint> {
        lrs.iter().zip(scales).map(|(&learning_rate, &init_scale)| GridPoint { learning_rate, init_scale }).collect()
    }

    /// Learning rate / init pairs for a given depth.
    pub fn matfac_schedule(depth: usize) -> Vec<GridPoint> {
        if depth >= 4 {
            pairs(&[6e-3, 4.5e-3, 3e-3, 1.5e-3, 1e-3], &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
        } else {
            pairs(&[6e-2, 3e-2, 9e-3, 6e-3, 3e-3, 9e-4], &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7])
        }
    }

    /// Observation counts for an order-3 (8^3) or order-4 (8^4) tensor.
    pub fn n_obs_grid(order: usize, gt_rank: usize) -> Vec<usize> {
        let (mut grid, last) = if order == 3 {
            ((50..=450).step_by(50).collect::<Vec<_>>(), 511)
        } else {
            (std::iter::once(100).chain((500..=3500).step_by(500)).collect(), 4095)
        };
        grid.push(last);
        if gt_rank > 1 {
            let min = grid[0] * 3;
            grid.retain(|&n| n > min);
            grid.insert(0, min);
        }
        grid
    }

    pub fn get(name: &str) -> Option<ExperimentConfig> {
        if let Some(d) = name.strip_prefix("matfac-depth") {
            let depth: usize = d.parse().ok().filter(|&d| (2..=4).contains(&d))?;
            return Some(ExperimentConfig::MatfacSweep(MatfacConfig {
                task: TaskSpec::Analyzed,
                depths: vec![depth],
                init: InitKind::Balanced,
                schedule: matfac_schedule(depth),
                seeds: vec![0],
                max_iters: default_max_iters(),
                loss_threshold: default_loss_threshold(),
                log_stride: default_log_stride(),
                det_sign_condition: true,
                output: PathBuf::from(format!("runs/{name}")),
            }));
        }
        let rest = name.strip_prefix("tenfac-order")?;
        let (order, rank) = rest.split_once("-rank")?;
        let order: usize = order.parse().ok().filter(|&o| o == 3 || o == 4)?;
        let rank: usize = rank.parse().ok().filter(|&r| r == 1 || r == 3)?;
        Some(ExperimentConfig::TenfacSweep(TenfacConfig {
            dims: vec![8; order],
            ground_truth_rank: rank,
            ground_truth_seed: 0,
            observation_seed: 0,
            n_obs: n_obs_grid(order, rank),
            init_stds: vec![1e-1, 1e-2, 1e-3, 1e-4],
            seeds: (0..5).collect(),
            rank: None,
            mse_threshold: default_mse_threshold(),
            max_iters: default_cp_iters(),
            r_max: None,
            estimate_rank: true,
            baseline_rank: false,
            output: PathBuf::from(format!("runs/{name}.csv")),
        }))
    }
}
