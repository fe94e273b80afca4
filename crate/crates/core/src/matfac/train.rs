use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{schatten_from_sigmas, singular_values, Matrix, SchattenP};
use crate::metrics::effective_rank_from_sigmas;

use super::net::{gradients_and_product, unbalancedness_magnitude, DeepNet};
use super::task::CompletionTask;

/// Entries beyond this magnitude abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iters: u64,
    pub loss_threshold: f64,
    pub log_stride: u64,
    #[serde(default = "yes")]
    pub log_decades: bool,
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl TrainConfig {
    /// Loss threshold `1e-4`, cap `5e6` iterations, stride 1000.
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, max_iters: 5_000_000, loss_threshold: 1e-4, log_stride: 1000, log_decades: true, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return domain(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.log_stride == 0 {
            return domain("log stride must be at least 1");
        }
        if !(self.loss_threshold >= 0.0) {
            return domain("loss threshold must be non-negative");
        }
        Ok(())
    }
}

/// Snapshot of a logged iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub iter: u64,
    pub loss: f64,
    /// Product-matrix values at the task's unobserved positions, row-major.
    pub unobserved_entries: Vec<((usize, usize), f64)>,
    /// Singular values of the product, non-increasing.
    pub sigmas: Vec<f64>,
    /// Determinant of the product's leading `min(rows, cols)` block.
    pub det: f64,
    pub unbalancedness: f64,
    /// `erank` (absent for a zero product), `nuclear`, `frobenius`, `spectral`, `schatten_half`.
    pub metrics: BTreeMap<String, f64>,
}

impl TrajectorySample {
    pub fn capture(iter: u64, net: &DeepNet, product: &Matrix, task: &CompletionTask, loss: f64) -> Result<Self> {
        let sigmas = singular_values(product)?;
        let mut metrics = BTreeMap::new();
        if let Ok(e) = effective_rank_from_sigmas(&sigmas) {
            metrics.insert("erank".to_string(), e);
        }
        for (name, p) in [
            ("nuclear", SchattenP::NUCLEAR),
            ("frobenius", SchattenP::FROBENIUS),
            ("spectral", SchattenP::SPECTRAL),
            ("schatten_half", SchattenP::Finite(0.5)),
        ] {
            metrics.insert(name.to_string(), schatten_from_sigmas(&sigmas, p)?);
        }
        Ok(Self {
            iter,
            loss,
            unobserved_entries: task.unobserved().into_iter().map(|(i, j)| ((i, j), product.get(i, j))).collect(),
            sigmas,
            det: product.leading_det(),
            unbalancedness: unbalancedness_magnitude(net)?,
            metrics,
        })
    }

    /// Value at the first unobserved position (the top-left entry for the structured tasks).
    pub fn w11(&self) -> f64 {
        self.unobserved_entries.first().map_or(f64::NAN, |e| e.1)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: DeepNet,
    pub trajectory: Vec<TrajectorySample>,
    /// Number of gradient steps taken.
    pub iterations: u64,
    /// Loss fell below the threshold before the cap.
    pub converged: bool,
}

impl TrainOutcome {
    pub fn final_sample(&self) -> &TrajectorySample {
        self.trajectory.last().expect("final state is always logged")
    }

    /// First logged sample with loss strictly below `loss`.
    pub fn first_below(&self, loss: f64) -> Option<&TrajectorySample> {
        self.trajectory.iter().find(|s| s.loss < loss)
    }
}

/// Gradient descent `W_l ← W_l − η ∂φ/∂W_l` from `net` until the loss drops
/// below `cfg.loss_threshold` or `cfg.max_iters` steps have been taken.
///
/// Logs iteration 0, every `log_stride`-th iteration, decade crossings of the
/// loss (if enabled) and the final state.
pub fn gd_train(net: DeepNet, task: &CompletionTask, cfg: &TrainConfig) -> Result<TrainOutcome> {
    gd_train_with(net, task, cfg, |_| {})
}

/// [`gd_train`] that also hands every logged sample to `on_log` as it is taken,
/// so callers keep the partial trajectory of a run that diverges.
pub fn gd_train_with<F>(net: DeepNet, task: &CompletionTask, cfg: &TrainConfig, mut on_log: F) -> Result<TrainOutcome>
where
    F: FnMut(&TrajectorySample),
{
    cfg.validate()?;
    if net.shape() != task.shape() {
        return domain(format!("net product is {:?} but task is {:?}", net.shape(), task.shape()));
    }
    let mut net = net;
    let mut trajectory = Vec::new();
    let mut prev_decade = None;
    let eta = cfg.learning_rate;
    let mut iter = 0u64;
    loop {
        let (product, residual, grads) = gradients_and_product(&net, task);
        let loss = 0.5 * residual.as_slice().iter().map(|r| r * r).sum::<f64>();
        if !loss.is_finite() {
            let last = trajectory.last().cloned().ok_or_else(|| Error::Domain("non-finite initial loss".into()))?;
            return Err(Error::Diverged { iter, last: Box::new(last) });
        }
        let decade = (loss > 0.0).then(|| loss.log10().floor() as i64);
        let converged = loss < cfg.loss_threshold;
        let done = converged || iter >= cfg.max_iters;
        let crossed = cfg.log_decades && decade != prev_decade;
        prev_decade = decade;
        if iter == 0 || iter.is_multiple_of(cfg.log_stride) || done || crossed {
            let sample = TrajectorySample::capture(iter, &net, &product, task, loss)?;
            on_log(&sample);
            trajectory.push(sample);
        }
        if done {
            return Ok(TrainOutcome { net, trajectory, iterations: iter, converged });
        }

        let next: Vec<Matrix> = net
            .factors()
            .iter()
            .zip(&grads)
            .map(|(w, g)| {
                let mut w = w.clone();
                w.sub_scaled_assign(eta, g);
                w
            })
            .collect();
        if next.iter().any(|w| !w.is_finite() || w.max_abs() > DIVERGENCE_LIMIT) {
            let last = TrajectorySample::capture(iter, &net, &product, task, loss)?;
            return Err(Error::Diverged { iter: iter + 1, last: Box::new(last) });
        }
        net.factors_mut().clone_from_slice(&next);
        iter += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfac::net::{init_balanced, init_identity, NetDims};
    use crate::matfac::task::make_analyzed_task;
    use crate::rng::stream;

    #[test]
    fn starting_on_solution_set_stops_immediately() {
        let task = make_analyzed_task();
        let w = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 0.0]]).unwrap();
        let net = DeepNet::new(vec![w.clone()]).unwrap();
        let out = gd_train(net, &task, &TrainConfig::new(1e-3)).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        assert_eq!(out.trajectory.len(), 1);
        assert_eq!(out.final_sample().loss, 0.0);
        assert_eq!(out.net.factors()[0], w);
    }

    #[test]
    fn loss_never_increases_on_analyzed_task() {
        let task = make_analyzed_task();
        let mut rng = stream(2, 0);
        let net = init_balanced(NetDims::square(2), 3, 1e-2, &mut rng).unwrap();
        let cfg = TrainConfig { max_iters: 100_000, log_stride: 100, ..TrainConfig::new(1e-3) };
        let out = gd_train(net, &task, &cfg).unwrap();
        for pair in out.trajectory.windows(2) {
            assert!(pair[1].loss <= pair[0].loss + 1e-12);
        }
    }

    #[test]
    fn identity_depth2_w11_grows_after_half() {
        let task = make_analyzed_task();
        let net = init_identity(2, 2, 1e-3).unwrap();
        let cfg = TrainConfig { max_iters: 200_000, log_stride: 500, loss_threshold: 1e-3, ..TrainConfig::new(1e-2) };
        let out = gd_train(net, &task, &cfg).unwrap();
        assert!(out.converged);
        let tail: Vec<f64> = out.trajectory.iter().filter(|s| s.loss < 0.5).map(|s| s.w11().abs()).collect();
        assert!(tail.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn decade_crossings_are_logged() {
        let task = make_analyzed_task();
        let net = init_identity(2, 2, 1e-3).unwrap();
        let cfg =
            TrainConfig { max_iters: 200_000, log_stride: 1_000_000, loss_threshold: 1e-3, ..TrainConfig::new(1e-2) };
        let out = gd_train(net, &task, &cfg).unwrap();
        for thr in [1e-1, 1e-2] {
            let s = out.first_below(thr).unwrap();
            assert!(s.loss >= thr / 10.0);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let task = make_analyzed_task();
        let net = DeepNet::new(vec![Matrix::identity(2).scale(10.0); 3]).unwrap();
        let err = gd_train(net, &task, &TrainConfig::new(10.0)).unwrap_err();
        match err {
            Error::Diverged { last, .. } => assert!(last.loss.is_finite()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn callback_sees_partial_trajectory_on_divergence() {
        let task = make_analyzed_task();
        let net = DeepNet::new(vec![Matrix::identity(2).scale(10.0); 3]).unwrap();
        let mut seen = Vec::new();
        let err =
            gd_train_with(net, &task, &TrainConfig { log_stride: 1, ..TrainConfig::new(10.0) }, |s| seen.push(s.iter));
        assert!(matches!(err, Err(Error::Diverged { .. })));
        assert_eq!(seen.first(), Some(&0));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::new(0.0).validate().is_err());
        assert!(TrainConfig { log_stride: 0, ..TrainConfig::new(1e-3) }.validate().is_err());
    }
}
