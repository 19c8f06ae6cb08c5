//! Adam with bias correction and the step-decay learning-rate schedule.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const ADAM_BETA1: f64 = 0.5;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

pub const BASE_LR: f64 = 1e-3;
pub const LR_DECAY: f64 = 0.1;
pub const LR_DECAY_EVERY: usize = 30;

/// Learning rate in effect during `epoch` (0-based).
pub fn lr_at_epoch(epoch: usize) -> f64 {
    BASE_LR * libm::pow(LR_DECAY, (epoch / LR_DECAY_EVERY) as f64)
}

/// Moment estimates for one network's parameter list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new(params: &[Matrix]) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    /// One bias-corrected Adam update of every parameter.
    ///
    /// `grads[i] == None` is an error: callers that have no gradient for a
    /// network skip the step rather than feed zeros.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Option<Matrix>], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: (params.len(), 0),
                rhs: (grads.len(), self.m.len()),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            let g = g.as_ref().ok_or(Error::MissingGradient { index: i })?;
            if g.shape() != params[i].shape() || self.m[i].shape() != params[i].shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: params[i].shape(),
                    rhs: g.shape(),
                });
            }
        }
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].as_ref().expect("checked above");
            let m = self.m[i].as_mut_slice();
            let v = self.v[i].as_mut_slice();
            for (((pj, &gj), mj), vj) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                *mj = self.beta1 * *mj + (1.0 - self.beta1) * gj;
                *vj = self.beta2 * *vj + (1.0 - self.beta2) * gj * gj;
                let m_hat = *mj / bc1;
                let v_hat = *vj / bc2;
                *pj -= lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}
