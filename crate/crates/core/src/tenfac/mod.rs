//! Tensor completion with CP factorizations.
//!
//! A rank-`R` CP model of an order-`N` tensor stores one `d_n x R` factor per
//! mode; column `r` of factor `n` is the vector `w_r^(n)` and the tensor is the
//! sum over `r` of their outer products.

mod adaptive;
mod als;
mod model;
mod train;

pub use adaptive::{adaptive_step, AdaptiveLrState};
pub use als::{
    als_fit, als_fit_with, estimate_rank, gen_ground_truth, AlsFit, ALS_INIT_STD, ALS_MAX_SWEEPS, ALS_RESTARTS,
    RANK_THRESHOLD,
};
pub use model::{cp_compose, cp_loss_and_grads, default_rank, CpModel, TensorTask};
pub use train::{train_cp, CpSample, CpTrainConfig, CpTrainOutcome};
