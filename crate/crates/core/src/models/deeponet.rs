use super::init::Init;
use super::{Lookup, ModelError, ModelInput};
use crate::autodiff::{ParamSet, Tape, Tensor, Var, LAYER_NORM_EPS};
use serde::{Deserialize, Serialize};

/// Branch/trunk DeepONet.
///
/// Hidden layer: `tanh(a · layer_norm(x W + b))` with one trainable `a` per
/// layer. Output layers are plain affine maps to the latent dimension `p`.
///
/// Parameter count with `w = width`, `p = latent`:
/// branch `(3w + w) + (Lb-1)(w² + w) + (wp + p)`, trunk `(w + w) + (Lt-1)(w² + w) + (wp + p)`,
/// plus `2w + 1` per hidden layer for layer norm and `a` when enabled, plus `τ0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepOnetSpec {
    pub width: usize,
    pub branch_layers: usize,
    pub trunk_layers: usize,
    /// defaults to `width`
    pub latent: Option<usize>,
    pub use_layer_norm: bool,
    pub adaptive_activation: bool,
    pub seed: u64,
}

impl Default for DeepOnetSpec {
    fn default() -> Self {
        Self {
            width: 700,
            branch_layers: 4,
            trunk_layers: 3,
            latent: None,
            use_layer_norm: true,
            adaptive_activation: true,
            seed: 0,
        }
    }
}

const BRANCH_IN: usize = 3;
const TRUNK_IN: usize = 1;

impl DeepOnetSpec {
    pub fn latent_dim(&self) -> usize {
        self.latent.unwrap_or(self.width)
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if self.width == 0 || self.latent_dim() == 0 {
            return Err(ModelError::Spec("deeponet width and latent dimension must be positive".into()));
        }
        if self.branch_layers == 0 || self.trunk_layers == 0 {
            return Err(ModelError::Spec("deeponet needs at least one hidden layer per net".into()));
        }
        Ok(())
    }

    fn net_count(&self, fan_in: usize, hidden: usize) -> usize {
        let w = self.width;
        let p = self.latent_dim();
        let per_layer_extra = if self.use_layer_norm { 2 * w } else { 0 } + usize::from(self.adaptive_activation);
        (fan_in * w + w) + (hidden - 1) * (w * w + w) + hidden * per_layer_extra + (w * p + p)
    }

    pub fn param_count(&self) -> usize {
        self.net_count(BRANCH_IN, self.branch_layers) + self.net_count(TRUNK_IN, self.trunk_layers) + 1
    }

    fn init_net(&self, params: &mut ParamSet, rng: &mut Init, net: &str, fan_in: usize, hidden: usize) -> Result<(), ModelError> {
        let w = self.width;
        for l in 0..hidden {
            let prefix = format!("deeponet.{net}.{l}");
            rng.dense(params, &prefix, if l == 0 { fan_in } else { w }, w)?;
            if self.use_layer_norm {
                params.insert(format!("{prefix}.ln.gain"), Tensor::full(&[w], 1.0))?;
                params.insert(format!("{prefix}.ln.bias"), Tensor::zeros(&[w]))?;
            }
            if self.adaptive_activation {
                params.insert(format!("{prefix}.a"), Tensor::scalar(1.0))?;
            }
        }
        rng.dense(params, &format!("deeponet.{net}.out"), w, self.latent_dim())
    }

    pub(crate) fn init_params(&self, params: &mut ParamSet, rng: &mut Init) -> Result<(), ModelError> {
        self.init_net(params, rng, "branch", BRANCH_IN, self.branch_layers)?;
        self.init_net(params, rng, "trunk", TRUNK_IN, self.trunk_layers)?;
        params.insert("deeponet.tau0", Tensor::scalar(0.0))?;
        Ok(())
    }

    fn net(&self, tape: &mut Tape, p: &Lookup, net: &str, hidden: usize, x: Var) -> Result<Var, ModelError> {
        let mut h = x;
        for l in 0..hidden {
            let prefix = format!("deeponet.{net}.{l}");
            h = tape.linear(h, p.get(&format!("{prefix}.w"))?, Some(p.get(&format!("{prefix}.b"))?))?;
            if self.use_layer_norm {
                let g = p.get(&format!("{prefix}.ln.gain"))?;
                let b = p.get(&format!("{prefix}.ln.bias"))?;
                h = tape.layer_norm(h, g, b, LAYER_NORM_EPS)?;
            }
            if self.adaptive_activation {
                h = tape.scale_by_scalar_param(h, p.get(&format!("{prefix}.a"))?)?;
            }
            h = tape.tanh(h)?;
        }
        Ok(tape.linear(h, p.get(&format!("deeponet.{net}.out.w"))?, Some(p.get(&format!("deeponet.{net}.out.b"))?))?)
    }

    pub(crate) fn forward(&self, tape: &mut Tape, p: &Lookup, input: &ModelInput) -> Result<Var, ModelError> {
        let branch_in = tape.constant(input.encoded.clone());
        let trunk_in = tape.constant(Tensor::new(vec![input.len(), TRUNK_IN], input.unit_grid())?);
        let b = self.net(tape, p, "branch", self.branch_layers, branch_in)?;
        let t = self.net(tape, p, "trunk", self.trunk_layers, trunk_in)?;
        let y = tape.matmul_nt(b, t)?;
        Ok(tape.add(y, p.get("deeponet.tau0")?)?)
    }
}
