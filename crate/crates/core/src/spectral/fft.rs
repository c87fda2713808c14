//! Real-input DFT on top of `rustfft` (mixed radix, Bluestein for awkward
//! lengths), with the unnormalized-forward / `1/n`-inverse convention.

use super::SpectralError;
use crate::autodiff::{Backward, Tape, Tensor, TensorError, Var};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plans = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

/// Cached complex FFT plan; `inverse` selects `e^{+2πikt/n}`.
pub(crate) fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<(FftPlanner<f64>, Plans)>> = OnceLock::new();
    let cell = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cell.lock().unwrap_or_else(|e| e.into_inner());
    let (planner, cache) = &mut *guard;
    cache
        .entry((n, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Number of non-negative frequencies of a real signal of length `n`.
pub fn spectrum_len(n: usize) -> usize {
    n / 2 + 1
}

/// Weight of bin `k` when folding the one-sided spectrum back to a real
/// signal: 1 for DC and (even `n`) Nyquist, else 2.
pub(crate) fn fold_weight(k: usize, n: usize) -> f64 {
    if self_conjugate(k, n) {
        1.0
    } else {
        2.0
    }
}

/// DC and, for even `n`, Nyquist: bins whose imaginary part is zero for
/// real signals.
pub(crate) fn self_conjugate(k: usize, n: usize) -> bool {
    k == 0 || (n % 2 == 0 && k == n / 2)
}

/// One-sided spectrum of a real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
}

pub fn rfft(x: &[f64]) -> Result<Spectrum, SpectralError> {
    let n = x.len();
    if n == 0 {
        return Err(SpectralError::Length { expected: 1, found: 0 });
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let m = spectrum_len(n);
    let re: Vec<f64> = buf[..m].iter().map(|c| c.re).collect();
    let mut im: Vec<f64> = buf[..m].iter().map(|c| c.im).collect();
    // exact conjugate symmetry on the self-conjugate bins
    im[0] = 0.0;
    if n % 2 == 0 {
        im[m - 1] = 0.0;
    }
    Ok(Spectrum { re, im })
}

/// Inverse of [`rfft`]; imaginary parts of the self-conjugate bins are
/// ignored.
pub fn irfft(s: &Spectrum, n: usize) -> Result<Vec<f64>, SpectralError> {
    if n == 0 || s.re.len() != spectrum_len(n) || s.im.len() != s.re.len() {
        return Err(SpectralError::Length {
            expected: spectrum_len(n.max(1)),
            found: s.re.len().min(s.im.len()),
        });
    }
    Ok(fold_to_real(&s.re, &s.im, n))
}

/// `y[t] = (1/n)·Re Σ_k w_k·Y_k·e^{2πikt/n}` over the given (possibly
/// truncated) one-sided bins.
pub(crate) fn fold_to_real(re: &[f64], im: &[f64], n: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..re.len() {
        let w = fold_weight(k, n);
        let i = if self_conjugate(k, n) { 0.0 } else { im[k] };
        buf[k] = Complex64::new(w * re[k], w * i);
    }
    plan(n, true).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter().map(|c| c.re * inv).collect()
}

/// Adjoint of the real-linear map `x ↦ (Re X, Im X)` restricted to the given
/// bins: `x[t] = Σ_k (re_k cos θ − im_k sin θ)`, `θ = 2πkt/n`.
pub(crate) fn rfft_adjoint_into(re: &[f64], im: &[f64], out: &mut [f64]) {
    let n = out.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..re.len() {
        buf[k] = Complex64::new(re[k], im[k]);
    }
    plan(n, true).process(&mut buf);
    for (o, c) in out.iter_mut().zip(&buf) {
        *o = c.re;
    }
}

/// `(⟨F x, y⟩, ⟨x, F* y⟩)` for the one-sided real DFT `F`.
pub fn fft_adjoint_check(x: &[f64], y: &Spectrum) -> Result<(f64, f64), SpectralError> {
    let fx = rfft(x)?;
    if y.re.len() != fx.re.len() || y.im.len() != fx.re.len() {
        return Err(SpectralError::Length {
            expected: fx.re.len(),
            found: y.re.len(),
        });
    }
    let lhs: f64 = fx.re.iter().zip(&y.re).map(|(a, b)| a * b).sum::<f64>()
        + fx.im.iter().zip(&y.im).map(|(a, b)| a * b).sum::<f64>();
    let mut fty = vec![0.0; x.len()];
    rfft_adjoint_into(&y.re, &y.im, &mut fty);
    let rhs = fty.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    Ok((lhs, rhs))
}

struct RfftRe;
struct RfftIm;

fn rfft_rows(t: &Tensor) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = t.last_dim();
    let m = spectrum_len(n);
    let rows = t.numel() / n;
    let mut re = Vec::with_capacity(rows * m);
    let mut im = Vec::with_capacity(rows * m);
    for row in t.data().chunks(n) {
        let s = rfft(row).expect("non-empty row");
        re.extend_from_slice(&s.re);
        im.extend_from_slice(&s.im);
    }
    let mut shape = t.shape().to_vec();
    *shape.last_mut().unwrap() = m;
    (re, im, shape)
}

fn rfft_backward(input: &Tensor, g: &[f64], imag: bool) -> Vec<f64> {
    let n = input.last_dim();
    let m = spectrum_len(n);
    let zeros = vec![0.0; m];
    let mut gx = vec![0.0; input.numel()];
    for (gr, out) in g.chunks(m).zip(gx.chunks_mut(n)) {
        if imag {
            let mut gi = gr.to_vec();
            gi[0] = 0.0;
            if n % 2 == 0 {
                gi[m - 1] = 0.0;
            }
            rfft_adjoint_into(&zeros, &gi, out);
        } else {
            rfft_adjoint_into(gr, &zeros, out);
        }
    }
    gx
}

impl Backward for RfftRe {
    fn name(&self) -> &'static str {
        "rfft.re"
    }
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], _: &[bool]) -> Vec<Option<Vec<f64>>> {
        vec![Some(rfft_backward(inputs[0], g, false))]
    }
}

impl Backward for RfftIm {
    fn name(&self) -> &'static str {
        "rfft.im"
    }
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], _: &[bool]) -> Vec<Option<Vec<f64>>> {
        vec![Some(rfft_backward(inputs[0], g, true))]
    }
}

struct Irfft {
    n: usize,
}

impl Backward for Irfft {
    fn name(&self) -> &'static str {
        "irfft"
    }
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Vec<Option<Vec<f64>>> {
        let n = self.n;
        let m = inputs[0].last_dim();
        let mut gre = vec![0.0; inputs[0].numel()];
        let mut gim = vec![0.0; inputs[0].numel()];
        for ((gy, r), i) in g.chunks(n).zip(gre.chunks_mut(m)).zip(gim.chunks_mut(m)) {
            let s = rfft(gy).expect("non-empty row");
            for k in 0..m {
                let w = fold_weight(k, n) / n as f64;
                r[k] = w * s.re[k];
                i[k] = if self_conjugate(k, n) { 0.0 } else { w * s.im[k] };
            }
        }
        vec![needs[0].then_some(gre), needs[1].then_some(gim)]
    }
}

impl Tape {
    /// Real DFT along the last axis; returns `(re, im)` of shape
    /// `[..., n/2+1]`.
    pub fn rfft(&mut self, x: Var) -> Result<(Var, Var), TensorError> {
        self.check(x)?;
        let t = self.value(x);
        if t.last_dim() == 0 || t.numel() == 0 {
            return Err(TensorError::Invalid("rfft of an empty axis".into()));
        }
        let (re, im, shape) = rfft_rows(t);
        let re = self.push(Tensor::new(shape.clone(), re)?, &[x], RfftRe)?;
        let im = self.push(Tensor::new(shape, im)?, &[x], RfftIm)?;
        Ok((re, im))
    }

    /// Inverse of [`Tape::rfft`] to length `n` along the last axis.
    pub fn irfft(&mut self, re: Var, im: Var, n: usize) -> Result<Var, TensorError> {
        self.check(re)?;
        self.check(im)?;
        let (tr, ti) = (self.value(re), self.value(im));
        if tr.shape() != ti.shape() || n == 0 || tr.last_dim() != spectrum_len(n) {
            return Err(TensorError::Shape {
                op: "irfft",
                lhs: tr.shape().to_vec(),
                rhs: ti.shape().to_vec(),
            });
        }
        let m = tr.last_dim();
        let mut out = Vec::with_capacity(tr.numel() / m * n);
        for (r, i) in tr.data().chunks(m).zip(ti.data().chunks(m)) {
            out.extend(fold_to_real(r, i, n));
        }
        let mut shape = tr.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        self.push(Tensor::new(shape, out)?, &[re, im], Irfft { n })
    }
}
