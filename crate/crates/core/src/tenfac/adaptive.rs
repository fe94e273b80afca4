use serde::{Deserialize, Serialize};

use super::model::CpModel;

/// Step size `η / (√(γ_t / (1 − β^t)) + 10⁻⁶)` with `γ` an exponential moving
/// average of the squared gradient norm. Only the step length adapts; the
/// direction is the raw gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveLrState {
    pub base_eta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub t: u64,
}

impl Default for AdaptiveLrState {
    fn default() -> Self {
        Self { base_eta: 1e-2, beta: 0.99, gamma: 0.0, t: 0 }
    }
}

impl AdaptiveLrState {
    pub const FLOOR: f64 = 1e-6;

    /// Folds in one squared gradient norm and returns the step size to use.
    pub fn advance(&mut self, grad_norm_sq: f64) -> f64 {
        self.t += 1;
        self.gamma = self.beta * self.gamma + (1.0 - self.beta) * grad_norm_sq;
        let debiased = self.gamma / (1.0 - self.beta.powf(self.t as f64));
        self.base_eta / (debiased.sqrt() + Self::FLOOR)
    }
}

/// Applies one adaptive step in place and returns the step size used.
pub fn adaptive_step(model: &mut CpModel, grads: &[Vec<f64>], state: &mut AdaptiveLrState) -> f64 {
    let g2: f64 = grads.iter().flatten().map(|g| g * g).sum();
    let eta = state.advance(g2);
    for (f, g) in model.factors_mut().iter_mut().zip(grads) {
        for (w, d) in f.iter_mut().zip(g) {
            *w -= eta * d;
        }
    }
    eta
}
