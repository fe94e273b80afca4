//! Deep matrix factorization.
//!
//! A depth-`L` net holds factors `W_1..W_L` with `W_l` of shape `d_l x d_{l-1}`;
//! its product matrix `W_L ⋯ W_1` is fit to a partially observed matrix by
//! plain gradient descent on half the squared error over the observed entries.
//! Indices are 0-based throughout.

mod dynamics;
mod net;
mod task;
mod train;

pub use dynamics::{matrix_power_psd, product_ode_step, singular_value_rates};
pub use net::{
    balance_project, factor_gradients, init_balanced, init_identity, init_unbalanced, product_matrix,
    resample_until_det_sign, unbalancedness_magnitude, DeepNet, InitKind, NetDims,
};
pub use task::{loss, make_analyzed_task, make_dxd_task, make_perturbed_task, CompletionTask};
pub use train::{gd_train, gd_train_with, TrainConfig, TrainOutcome, TrajectorySample, DIVERGENCE_LIMIT};
