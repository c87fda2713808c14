use super::TrainError;
use crate::autodiff::ParamSet;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamW {
    pub fn new(params: &ParamSet, weight_decay: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.value.numel()]).collect();
        Self {
            beta1: BETA1,
            beta2: BETA2,
            eps: ADAM_EPS,
            weight_decay,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, i: usize) -> &[f64] {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &[f64] {
        &self.v[i]
    }

    /// One update. Decay `θ ← (1 − lr λ) θ` is applied before the adaptive
    /// step. Nothing is modified when any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Vec<f64>], lr: f64) -> Result<(), TrainError> {
        if grads.len() != params.len() || grads.len() != self.m.len() {
            return Err(TrainError::Shape(format!(
                "{} gradients for {} parameters ({} in optimizer state)",
                grads.len(),
                params.len(),
                self.m.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            let p = params.param(i);
            if g.len() != p.value.numel() || self.m[i].len() != g.len() {
                return Err(TrainError::Shape(format!(
                    "gradient for {} has {} values, parameter has {}",
                    p.name,
                    g.len(),
                    p.value.numel()
                )));
            }
            if let Some(j) = g.iter().position(|x| !x.is_finite()) {
                return Err(TrainError::NonFiniteGradient {
                    param: p.name.clone(),
                    index: j,
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - lr * self.weight_decay;
        for (i, g) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let theta = params.value_mut(i).data_mut();
            for j in 0..g.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                if self.weight_decay != 0.0 {
                    theta[j] *= decay;
                }
                let update = (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
                if update != 0.0 {
                    theta[j] -= lr * update;
                }
            }
        }
        Ok(())
    }
}

/// Reduce-on-plateau: after `patience` consecutive epochs without a strict
/// improvement of the best loss, `lr ← lr · factor` and the counter resets.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    lr0: f64,
    factor: f64,
    patience: usize,
    best: Option<f64>,
    stale: usize,
    reductions: u32,
}

impl Plateau {
    pub fn new(lr0: f64, factor: f64, patience: usize) -> Self {
        Self {
            lr0,
            factor,
            patience,
            best: None,
            stale: 0,
            reductions: 0,
        }
    }

    /// `lr0 · factor^reductions`
    pub fn lr(&self) -> f64 {
        self.lr0 * self.factor.powi(self.reductions as i32)
    }

    pub fn reductions(&self) -> u32 {
        self.reductions
    }

    /// Records one epoch loss and returns the learning rate for the next epoch.
    pub fn observe(&mut self, loss: f64) -> f64 {
        match self.best {
            Some(b) if !(loss < b) => {
                self.stale += 1;
                if self.stale >= self.patience {
                    self.reductions += 1;
                    self.stale = 0;
                }
            }
            _ => {
                self.best = Some(loss);
                self.stale = 0;
            }
        }
        self.lr()
    }
}
