//! DeepONet, FNO and WNO: builders, parameter layouts and forward passes.
//!
//! All models map pulse inputs to normalized voltage `(V + 75)/100` on the
//! query grid; [`denormalize`] recovers millivolts.

mod deeponet;
mod init;
mod neural_op;

pub use deeponet::DeepOnetSpec;
pub use neural_op::{FnoSpec, WnoSpec};

use crate::autodiff::{
    decode_checkpoint, encode_checkpoint, grad_check, CheckpointError, GradCheckReport, ParamSet, Tape, Tensor,
    TensorError, Var, DEFAULT_STEP,
};
use crate::dataset::{discretize_pulse, encode_pulse, Sample};
use crate::hh::{SquarePulse, GRID_LEN, T_END};
use crate::spectral::SpectralError;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const VOLTAGE_SCALE: f64 = 100.0;
pub const VOLTAGE_OFFSET: f64 = -75.0;
/// Scale applied to the applied-current channel of FNO/WNO inputs.
pub const CURRENT_SCALE: f64 = 10.0;

pub fn denormalize(y: f64) -> f64 {
    VOLTAGE_SCALE * y + VOLTAGE_OFFSET
}

pub fn normalize(v: f64) -> f64 {
    (v - VOLTAGE_OFFSET) / VOLTAGE_SCALE
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint does not match the model layout: {0}")]
    Schema(String),
    #[error("bad input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
    Tanh,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var, TensorError> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Gelu => tape.gelu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

/// Architecture and hyperparameters; together with the seed it fixes every
/// initial parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Deeponet(DeepOnetSpec),
    Fno(FnoSpec),
    Wno(WnoSpec),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Deeponet(_) => "deeponet",
            ModelSpec::Fno(_) => "fno",
            ModelSpec::Wno(_) => "wno",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelSpec::Deeponet(s) => s.seed,
            ModelSpec::Fno(s) => s.seed,
            ModelSpec::Wno(s) => s.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        match &mut s {
            ModelSpec::Deeponet(d) => d.seed = seed,
            ModelSpec::Fno(f) => f.seed = seed,
            ModelSpec::Wno(w) => w.seed = seed,
        }
        s
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelSpec::Deeponet(s) => s.validate(),
            ModelSpec::Fno(s) => s.validate(),
            ModelSpec::Wno(s) => s.validate(),
        }
    }

    /// `key = value` text stored in checkpoint headers.
    pub fn to_header(&self) -> String {
        toml::to_string(self).expect("model spec serializes")
    }

    pub fn from_header(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::Spec(e.to_string()))
    }

    /// Exact number of trainable scalars for inputs of length `n`.
    pub fn param_count(&self, n: usize) -> Result<usize, ModelError> {
        match self {
            ModelSpec::Deeponet(s) => Ok(s.param_count()),
            ModelSpec::Fno(s) => Ok(s.param_count()),
            ModelSpec::Wno(s) => s.param_count(n),
        }
    }
}

/// A batch of model inputs in every representation the architectures use.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    /// `[B, 3]` scaled `(t_start, t_end, amplitude)`
    pub encoded: Tensor,
    /// `[B, n]` applied current in µA/cm²
    pub current: Tensor,
    /// query times in ms
    pub grid: Vec<f64>,
}

impl ModelInput {
    pub fn from_pulses(pulses: &[SquarePulse], grid: &[f64]) -> Self {
        let encoded = pulses.iter().flat_map(|p| encode_pulse(p)).collect();
        let current = pulses.iter().flat_map(|p| discretize_pulse(p, grid)).collect();
        Self {
            encoded: Tensor::new(vec![pulses.len(), 3], encoded).expect("3 values per pulse"),
            current: Tensor::new(vec![pulses.len(), grid.len()], current).expect("one row per pulse"),
            grid: grid.to_vec(),
        }
    }

    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a Sample>, grid: &[f64]) -> Self {
        let pulses: Vec<SquarePulse> = samples.into_iter().map(|s| s.pulse).collect();
        Self::from_pulses(&pulses, grid)
    }

    pub fn batch_size(&self) -> usize {
        self.encoded.shape()[0]
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Query times scaled to `[0, 1]`.
    pub fn unit_grid(&self) -> Vec<f64> {
        self.grid.iter().map(|t| t / T_END).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: ParamSet,
}

impl Model {
    pub fn build(spec: &ModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut rng = init::Init::new(spec.seed());
        let mut params = ParamSet::new();
        match spec {
            ModelSpec::Deeponet(s) => s.init_params(&mut params, &mut rng)?,
            ModelSpec::Fno(s) => s.init_params(&mut params, &mut rng)?,
            ModelSpec::Wno(s) => s.init_params(&mut params, &mut rng)?,
        }
        Ok(Self {
            spec: spec.clone(),
            params,
        })
    }

    /// Rebuilds the layout for `spec` and adopts `params`, which must match
    /// it name for name and shape for shape.
    pub fn with_params(spec: &ModelSpec, params: ParamSet) -> Result<Self, ModelError> {
        let skeleton = Self::build(spec)?;
        if !skeleton.params.same_schema(&params) {
            let want: Vec<String> = skeleton
                .params
                .iter()
                .map(|p| format!("{}{:?}", p.name, p.value.shape()))
                .collect();
            let got: Vec<String> = params.iter().map(|p| format!("{}{:?}", p.name, p.value.shape())).collect();
            let first = want
                .iter()
                .zip(&got)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("expected {a}, found {b}"))
                .unwrap_or_else(|| format!("expected {} parameters, found {}", want.len(), got.len()));
            return Err(ModelError::Schema(first));
        }
        Ok(Self {
            spec: spec.clone(),
            params,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn to_checkpoint(&self) -> Vec<u8> {
        encode_checkpoint(&self.spec.to_header(), &self.params)
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self, ModelError> {
        let ck = decode_checkpoint(bytes)?;
        let spec = ModelSpec::from_header(&ck.header)?;
        Self::with_params(&spec, ck.params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_checkpoint()).map_err(CheckpointError::from)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(CheckpointError::from)?;
        Self::from_checkpoint(&bytes)
    }

    /// Normalized prediction `[B, n]`, recorded on `tape` with `vars` from
    /// `self.params().attach(tape)`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: &ModelInput) -> Result<Var, ModelError> {
        if vars.len() != self.params.len() {
            return Err(ModelError::Input(format!(
                "{} parameter vars for {} parameters",
                vars.len(),
                self.params.len()
            )));
        }
        let b = input.batch_size();
        if input.current.shape() != [b, input.len()] || input.encoded.shape() != [b, 3] {
            return Err(ModelError::Input(format!(
                "inconsistent batch: encoded {:?}, current {:?}, grid {}",
                input.encoded.shape(),
                input.current.shape(),
                input.len()
            )));
        }
        let lookup = Lookup {
            params: &self.params,
            vars,
        };
        match &self.spec {
            ModelSpec::Deeponet(s) => s.forward(tape, &lookup, input),
            ModelSpec::Fno(s) => s.forward(tape, &lookup, input),
            ModelSpec::Wno(s) => s.forward(tape, &lookup, input),
        }
    }

    /// Voltage predictions in mV, evaluated without gradients in chunks of
    /// at most `chunk` samples.
    pub fn predict(&self, input: &ModelInput, chunk: usize) -> Result<Vec<Vec<f64>>, ModelError> {
        let b = input.batch_size();
        let n = input.len();
        let chunk = chunk.max(1);
        let mut out = Vec::with_capacity(b);
        for start in (0..b).step_by(chunk) {
            let end = (start + chunk).min(b);
            let sub = ModelInput {
                encoded: Tensor::new(vec![end - start, 3], input.encoded.data()[start * 3..end * 3].to_vec())?,
                current: Tensor::new(vec![end - start, n], input.current.data()[start * n..end * n].to_vec())?,
                grid: input.grid.clone(),
            };
            let mut tape = Tape::no_grad();
            let vars = self.params.attach(&mut tape);
            let y = self.forward(&mut tape, &vars, &sub)?;
            out.extend(
                tape.value(y)
                    .data()
                    .chunks(n)
                    .map(|row| row.iter().map(|&v| denormalize(v)).collect::<Vec<f64>>()),
            );
        }
        Ok(out)
    }
}

/// Name → tape variable resolution for a forward pass.
pub(crate) struct Lookup<'a> {
    params: &'a ParamSet,
    vars: &'a [Var],
}

impl Lookup<'_> {
    pub(crate) fn get(&self, name: &str) -> Result<Var, ModelError> {
        self.params
            .position(name)
            .map(|i| self.vars[i])
            .ok_or_else(|| ModelError::Schema(format!("missing parameter {name}")))
    }
}

/// Grid length the builders size wavelet weights for.
pub const DEFAULT_GRID_LEN: usize = GRID_LEN;

impl ModelSpec {
    /// Small configurations used for gradient checks and smoke runs.
    pub fn reduced(kind: &str) -> Result<Self, ModelError> {
        match kind {
            "fno" => Ok(ModelSpec::Fno(FnoSpec {
                width: 8,
                k_max: 4,
                projection: 16,
                ..FnoSpec::default()
            })),
            "wno" => Ok(ModelSpec::Wno(WnoSpec {
                width: 8,
                wavelet_order: 4,
                levels: 2,
                projection: 16,
                ..WnoSpec::default()
            })),
            "deeponet" => Ok(ModelSpec::Deeponet(DeepOnetSpec {
                width: 12,
                ..DeepOnetSpec::default()
            })),
            other => Err(ModelError::Spec(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Finite-difference check of the full model under a mean-squared-error
/// loss against `target` (normalized units).
///
/// The loss is evaluated as `mean(d² + 2 d e)` with `d = y − y₀`,
/// `e = y₀ − target` and `y₀` the output at the current parameters. That is
/// the MSE minus a constant, so gradients are unchanged while the central
/// differences subtract numbers near zero instead of O(1) loss values.
pub fn grad_check_model(
    model: &Model,
    input: &ModelInput,
    target: &Tensor,
    probes: usize,
    seed: u64,
) -> Result<GradCheckReport, ModelError> {
    grad_check_model_with(model, input, target, probes, seed, |_, y| Ok(y))
}

/// [`grad_check_model`] with `tap` applied to the model output before the
/// loss. `tap` must leave the forward value unchanged.
pub fn grad_check_model_with(
    model: &Model,
    input: &ModelInput,
    target: &Tensor,
    probes: usize,
    seed: u64,
    tap: impl Fn(&mut Tape, Var) -> Result<Var, TensorError>,
) -> Result<GradCheckReport, ModelError> {
    let b = input.batch_size();
    if target.shape() != [b, input.len()] {
        return Err(ModelError::Input(format!(
            "target shape {:?} for batch {b} on {} points",
            target.shape(),
            input.len()
        )));
    }
    let mut tape = Tape::no_grad();
    let vars = model.params.attach(&mut tape);
    let y = model.forward(&mut tape, &vars, input)?;
    let y0 = tape.value(y).clone();
    let e = Tensor::new(y0.shape().to_vec(), y0.data().iter().zip(target.data()).map(|(a, t)| a - t).collect())?;
    let report = grad_check(&model.params, probes, DEFAULT_STEP, seed, |tape, vars| {
        let y = model.forward(tape, vars, input).map_err(|e| TensorError::Invalid(e.to_string()))?;
        let y = tap(tape, y)?;
        let y0 = tape.constant(y0.clone());
        let e = tape.constant(e.clone());
        let d = tape.sub(y, y0)?;
        let d2 = tape.square(d)?;
        let de = tape.mul(d, e)?;
        let de2 = tape.scale(de, 2.0)?;
        let s = tape.add(d2, de2)?;
        tape.mean(s)
    })?;
    Ok(report)
}
