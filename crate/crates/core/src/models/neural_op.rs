//! FNO and WNO share one skeleton: pointwise lifting, `L` integral layers
//! `v ← σ(K v + W v + b)` (no σ after the last), then a two-layer pointwise
//! projection.

use super::init::Init;
use super::{Activation, Lookup, ModelError, ModelInput, CURRENT_SCALE, DEFAULT_GRID_LEN};
use crate::autodiff::{ParamSet, Tape, Tensor, Var};
use crate::spectral::{level_lengths, spectral_conv, spectrum_len, wavelet_conv, WaveletFilter, WaveletPlan};
use serde::{Deserialize, Serialize};

/// Fourier neural operator.
///
/// Parameter count with `c = 1 + coord_channel`, `w = width`, `q = projection`:
/// `(c w + w) + L (2 k_max w² + w² + w) + (w q + q) + (q + 1)`.
/// Real and imaginary parts of the spectral weights count separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FnoSpec {
    pub width: usize,
    pub k_max: usize,
    pub layers: usize,
    pub projection: usize,
    pub coord_channel: bool,
    pub seed: u64,
}

impl Default for FnoSpec {
    fn default() -> Self {
        Self {
            width: 32,
            k_max: 16,
            layers: 3,
            projection: 128,
            coord_channel: true,
            seed: 0,
        }
    }
}

/// Wavelet neural operator.
///
/// `ζ` is the coarse-band length of a `levels`-deep db`wavelet_order`
/// decomposition of a `grid_len` signal; the count is
/// `(c w + w) + L (ζ w² + w² + w) + (w q + q) + (q + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WnoSpec {
    pub width: usize,
    pub layers: usize,
    pub projection: usize,
    pub wavelet_order: usize,
    pub levels: usize,
    pub grid_len: usize,
    pub coord_channel: bool,
    pub seed: u64,
}

impl Default for WnoSpec {
    fn default() -> Self {
        Self {
            width: 16,
            layers: 3,
            projection: 128,
            wavelet_order: 24,
            levels: 4,
            grid_len: DEFAULT_GRID_LEN,
            coord_channel: true,
            seed: 0,
        }
    }
}

fn head_count(c_in: usize, w: usize, q: usize) -> usize {
    (c_in * w + w) + (w * q + q) + (q + 1)
}

fn check_common(kind: &str, width: usize, layers: usize, projection: usize) -> Result<(), ModelError> {
    if width == 0 || layers == 0 || projection == 0 {
        return Err(ModelError::Spec(format!(
            "{kind} width, layers and projection must be positive (got {width}, {layers}, {projection})"
        )));
    }
    Ok(())
}

impl FnoSpec {
    fn in_channels(&self) -> usize {
        1 + usize::from(self.coord_channel)
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        check_common("fno", self.width, self.layers, self.projection)?;
        let max = spectrum_len(DEFAULT_GRID_LEN);
        if self.k_max == 0 || self.k_max > max {
            return Err(ModelError::Spec(format!(
                "fno k_max {} outside 1..={max} for a {DEFAULT_GRID_LEN}-point grid",
                self.k_max
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let w = self.width;
        head_count(self.in_channels(), w, self.projection) + self.layers * (2 * self.k_max * w * w + w * w + w)
    }

    pub(crate) fn init_params(&self, params: &mut ParamSet, rng: &mut Init) -> Result<(), ModelError> {
        let w = self.width;
        rng.dense(params, "fno.lift", self.in_channels(), w)?;
        let s = 1.0 / (w * w) as f64;
        for l in 0..self.layers {
            params.insert(format!("fno.layer{l}.R.real"), rng.uniform(&[self.k_max, w, w], s))?;
            params.insert(format!("fno.layer{l}.R.imag"), rng.uniform(&[self.k_max, w, w], s))?;
            rng.dense(params, &format!("fno.layer{l}.W"), w, w)?;
        }
        rng.dense(params, "fno.proj1", w, self.projection)?;
        rng.dense(params, "fno.proj2", self.projection, 1)
    }

    pub(crate) fn forward(&self, tape: &mut Tape, p: &Lookup, input: &ModelInput) -> Result<Var, ModelError> {
        let k_max = self.k_max;
        skeleton(tape, p, input, "fno", self.layers, self.coord_channel, Activation::Relu, |tape, l, v| {
            let re = p.get(&format!("fno.layer{l}.R.real"))?;
            let im = p.get(&format!("fno.layer{l}.R.imag"))?;
            Ok(spectral_conv(tape, v, re, im, k_max)?)
        })
    }
}

impl WnoSpec {
    fn in_channels(&self) -> usize {
        1 + usize::from(self.coord_channel)
    }

    /// Coarse-band length the kernel weights are sized for.
    pub fn zeta(&self) -> Result<usize, ModelError> {
        self.zeta_for(self.grid_len)
    }

    fn zeta_for(&self, n: usize) -> Result<usize, ModelError> {
        let f = WaveletFilter::daubechies(self.wavelet_order)?;
        Ok(level_lengths(n, f.len(), self.levels)?[self.levels])
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        check_common("wno", self.width, self.layers, self.projection)?;
        self.zeta().map(|_| ())
    }

    pub fn param_count(&self, n: usize) -> Result<usize, ModelError> {
        let w = self.width;
        let zeta = self.zeta_for(n)?;
        Ok(head_count(self.in_channels(), w, self.projection) + self.layers * (zeta * w * w + w * w + w))
    }

    pub(crate) fn init_params(&self, params: &mut ParamSet, rng: &mut Init) -> Result<(), ModelError> {
        let w = self.width;
        let zeta = self.zeta()?;
        rng.dense(params, "wno.lift", self.in_channels(), w)?;
        let s = 1.0 / (w * w) as f64;
        for l in 0..self.layers {
            params.insert(format!("wno.layer{l}.R"), rng.uniform(&[zeta, w, w], s))?;
            rng.dense(params, &format!("wno.layer{l}.W"), w, w)?;
        }
        rng.dense(params, "wno.proj1", w, self.projection)?;
        rng.dense(params, "wno.proj2", self.projection, 1)
    }

    pub(crate) fn forward(&self, tape: &mut Tape, p: &Lookup, input: &ModelInput) -> Result<Var, ModelError> {
        let plan = WaveletPlan::cached(input.len(), self.wavelet_order, self.levels)?;
        skeleton(tape, p, input, "wno", self.layers, self.coord_channel, Activation::Gelu, |tape, l, v| {
            Ok(wavelet_conv(tape, v, p.get(&format!("wno.layer{l}.R"))?, &plan)?)
        })
    }
}

/// `[B, n, c]` input: current / 10 and optionally t / T.
fn input_channels(input: &ModelInput, coord: bool) -> Result<Tensor, ModelError> {
    let (b, n) = (input.batch_size(), input.len());
    let c = 1 + usize::from(coord);
    let unit = input.unit_grid();
    let mut data = Vec::with_capacity(b * n * c);
    for row in input.current.data().chunks(n) {
        for (j, &i_app) in row.iter().enumerate() {
            data.push(i_app / CURRENT_SCALE);
            if coord {
                data.push(unit[j]);
            }
        }
    }
    Ok(Tensor::new(vec![b, n, c], data)?)
}

#[allow(clippy::too_many_arguments)]
fn skeleton(
    tape: &mut Tape,
    p: &Lookup,
    input: &ModelInput,
    prefix: &str,
    layers: usize,
    coord: bool,
    act: Activation,
    mut kernel: impl FnMut(&mut Tape, usize, Var) -> Result<Var, ModelError>,
) -> Result<Var, ModelError> {
    let (b, n) = (input.batch_size(), input.len());
    let affine = |tape: &mut Tape, x: Var, name: &str| -> Result<Var, ModelError> {
        let w = p.get(&format!("{prefix}.{name}.w"))?;
        let bias = p.get(&format!("{prefix}.{name}.b"))?;
        Ok(tape.linear(x, w, Some(bias))?)
    };
    let x = tape.constant(input_channels(input, coord)?);
    let mut v = affine(tape, x, "lift")?;
    for l in 0..layers {
        let k = kernel(tape, l, v)?;
        let w = affine(tape, v, &format!("layer{l}.W"))?;
        v = tape.add(k, w)?;
        if l + 1 < layers {
            v = act.apply(tape, v)?;
        }
    }
    let h = affine(tape, v, "proj1")?;
    let h = act.apply(tape, h)?;
    let out = affine(tape, h, "proj2")?;
    Ok(tape.reshape(out, &[b, n])?)
}
