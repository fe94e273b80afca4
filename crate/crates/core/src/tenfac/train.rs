use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::matfac::DIVERGENCE_LIMIT;
use crate::rng::{stream, streams};

use super::adaptive::{adaptive_step, AdaptiveLrState};
use super::model::{cp_loss_and_grads, CpModel, TensorTask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpTrainConfig {
    pub rank: usize,
    pub init_std: f64,
    pub seed: u64,
    pub mse_threshold: f64,
    pub max_iters: u64,
    pub log_stride: u64,
}

impl CpTrainConfig {
    /// MSE threshold `1e-6`, cap `1e6` iterations.
    pub fn new(rank: usize, init_std: f64, seed: u64) -> Self {
        Self { rank, init_std, seed, mse_threshold: 1e-6, max_iters: 1_000_000, log_stride: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpSample {
    pub iter: u64,
    pub mse: f64,
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct CpTrainOutcome {
    pub model: CpModel,
    pub trajectory: Vec<CpSample>,
    pub iterations: u64,
    pub converged: bool,
}

/// Gradient descent with the adaptive step on the mean squared error over
/// observations, from a Gaussian start.
pub fn train_cp(task: &TensorTask, cfg: &CpTrainConfig) -> Result<CpTrainOutcome> {
    if cfg.rank == 0 || !(cfg.init_std >= 0.0) || cfg.log_stride == 0 || task.is_empty() {
        return domain("train_cp needs rank >= 1, init_std >= 0, log_stride >= 1 and observations");
    }
    let mut rng = stream(cfg.seed, streams::FACTORS);
    let mut model = CpModel::random(task.dims(), cfg.rank, cfg.init_std, &mut rng)?;
    let mut state = AdaptiveLrState::default();
    let mut trajectory = Vec::new();
    let scale = 2.0 / task.len() as f64;
    let mut eta = 0.0;
    let mut iter = 0u64;
    loop {
        let (loss, mut grads) = cp_loss_and_grads(&model, task)?;
        let mse = scale * loss;
        if !mse.is_finite() || !model.is_finite() || model.max_abs() > DIVERGENCE_LIMIT {
            return Err(Error::CpDiverged { iter, last: trajectory.last().map_or(f64::NAN, |s: &CpSample| s.mse) });
        }
        let converged = mse < cfg.mse_threshold;
        let done = converged || iter >= cfg.max_iters;
        if iter.is_multiple_of(cfg.log_stride) || done {
            trajectory.push(CpSample { iter, mse, eta });
        }
        if done {
            return Ok(CpTrainOutcome { model, trajectory, iterations: iter, converged });
        }
        grads.iter_mut().flatten().for_each(|g| *g *= scale);
        eta = adaptive_step(&mut model, &grads, &mut state);
        iter += 1;
    }
}
