use super::ModelError;
use crate::autodiff::{ParamSet, Tensor};
use crate::dataset::{rng_from_seed, uniform01};
use rand_chacha::ChaCha8Rng;

/// Seeded parameter initializer; draws happen in parameter creation order.
pub(crate) struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub(crate) fn new(seed: u64) -> Self {
        Self {
            rng: rng_from_seed(seed),
        }
    }

    pub(crate) fn uniform(&mut self, shape: &[usize], limit: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| limit * (2.0 * uniform01(&mut self.rng) - 1.0))
            .collect();
        Tensor::new(shape.to_vec(), data).expect("shape matches")
    }

    /// Glorot-uniform `[fan_in, fan_out]` weight and zero bias.
    pub(crate) fn dense(
        &mut self,
        params: &mut ParamSet,
        prefix: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Result<(), ModelError> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        params.insert(format!("{prefix}.w"), self.uniform(&[fan_in, fan_out], limit))?;
        params.insert(format!("{prefix}.b"), Tensor::zeros(&[fan_out]))?;
        Ok(())
    }
}
