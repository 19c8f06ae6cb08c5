//! Minimal reverse-mode automatic differentiation over dense 2-D tensors,
//! plus the optimizer and learning-rate schedule used for training.

mod graph;
mod optim;

pub use graph::{sigmoid, Graph, RowCombination, Var, BCE_EPS};
pub use optim::{lr_at_epoch, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, BASE_LR, LR_DECAY, LR_DECAY_EVERY};
