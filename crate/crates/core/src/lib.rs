//! Deep matrix factorization and CP tensor factorization trained by gradient
//! descent, plus the rank and norm diagnostics used to study where the
//! trajectories end up.
//!
//! Modules:
//! - [`linalg`]: dense containers, Jacobi SVD, Schatten norms, entropy.
//! - [`matfac`]: completion tasks, deep linear nets, training and the product-matrix dynamics.
//! - [`metrics`]: effective rank, distance from low rank, closed-form bound evaluators.
//! - [`tenfac`]: CP models, adaptive-step training, ALS and rank estimation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod linalg;
pub mod matfac;
pub mod metrics;
pub mod rng;
pub mod tenfac;

pub use error::{Error, Result};
pub use linalg::{
    linear_index, outer_product, schatten_norm, shannon_entropy, svd, svd2x2_analytic, unravel_index, DenseTensor,
    Matrix, SchattenP, SvdResult,
};
pub use matfac::{CompletionTask, DeepNet, TrainConfig, TrajectorySample};
pub use metrics::{BoundKind, BoundReport, QuasiNormSpec};
pub use tenfac::{AdaptiveLrState, CpModel, TensorTask};
