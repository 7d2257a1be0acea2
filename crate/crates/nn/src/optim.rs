use std::collections::BTreeMap;

use crate::{NnError, ParameterStore, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates keyed by parameter name, created lazily on first update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    first: BTreeMap<String, Tensor>,
    second: BTreeMap<String, Tensor>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.second.get(name)
    }
}

/// One bias-corrected Adam update of every trainable entry, then zero all
/// gradients. No weight decay.
pub fn adam_step(store: &mut ParameterStore, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (name, entry) in store.iter_mut() {
        if !entry.trainable {
            continue;
        }
        let m = state.first.entry(name.to_string()).or_insert_with(|| Tensor::zeros(entry.value.shape()));
        let v = state.second.entry(name.to_string()).or_insert_with(|| Tensor::zeros(entry.value.shape()));
        let g = entry.grad.data();
        let (m, v) = (m.data_mut(), v.data_mut());
        for (i, w) in entry.value.data_mut().iter_mut().enumerate() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    store.zero_grad();
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decay {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub decay: Decay,
}

impl LrSchedule {
    pub fn new(base_lr: f64, warmup_epochs: usize, total_epochs: usize, decay: Decay) -> Result<Self, NnError> {
        if warmup_epochs > total_epochs || total_epochs == 0 || !base_lr.is_finite() || base_lr < 0.0 {
            return Err(NnError::InvalidSchedule { warmup: warmup_epochs, total: total_epochs });
        }
        Ok(LrSchedule { base_lr, warmup_epochs, total_epochs, decay })
    }

    /// Linear ramp `base·(e+1)/warmup` during warm-up, then constant or a
    /// cosine that reaches zero at `total_epochs`.
    pub fn lr_at(&self, epoch: usize) -> Result<f64, NnError> {
        if epoch >= self.total_epochs {
            return Err(NnError::EpochOutOfRange { epoch, total: self.total_epochs });
        }
        if epoch < self.warmup_epochs {
            return Ok(self.base_lr * (epoch + 1) as f64 / self.warmup_epochs as f64);
        }
        Ok(match self.decay {
            Decay::Constant => self.base_lr,
            Decay::Cosine => {
                let span = (self.total_epochs - self.warmup_epochs) as f64;
                let progress = (epoch - self.warmup_epochs) as f64 / span;
                0.5 * self.base_lr * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        })
    }
}
