//! Fourier and wavelet integral-kernel layers as fused tape operations.
//!
//! Both act on `[batch, n, channels]` tensors along the time axis.

use super::fft::{fold_weight, plan, self_conjugate, spectrum_len};
use super::{SpectralError, WaveletPlan};
use crate::autodiff::{gemm, Backward, Tape, Tensor, Var};
use rustfft::num_complex::Complex64;
use std::sync::Arc;

fn dims3(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize), SpectralError> {
    match *t.shape() {
        [b, n, d] => Ok((b, n, d)),
        _ => Err(SpectralError::Shape {
            op,
            expected: vec![0, 0, 0],
            found: t.shape().to_vec(),
        }),
    }
}

struct FftWork {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FftWork {
    fn new(n: usize) -> Self {
        let s = plan(n, false)
            .get_inplace_scratch_len()
            .max(plan(n, true).get_inplace_scratch_len());
        Self {
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); s],
        }
    }
}

/// Truncated spectra `X[b,k,i]` of every channel column of `x: [B,n,d]`.
fn column_spectra(x: &[f64], b: usize, n: usize, d: usize, kmax: usize, w: &mut FftWork) -> (Vec<f64>, Vec<f64>) {
    let fwd = plan(n, false);
    let mut re = vec![0.0; b * kmax * d];
    let mut im = vec![0.0; b * kmax * d];
    for bi in 0..b {
        let xb = &x[bi * n * d..(bi + 1) * n * d];
        for i in 0..d {
            for t in 0..n {
                w.buf[t] = Complex64::new(xb[t * d + i], 0.0);
            }
            fwd.process_with_scratch(&mut w.buf, &mut w.scratch);
            for k in 0..kmax {
                re[(bi * kmax + k) * d + i] = w.buf[k].re;
                im[(bi * kmax + k) * d + i] = if self_conjugate(k, n) { 0.0 } else { w.buf[k].im };
            }
        }
    }
    (re, im)
}

/// Writes `Re Σ_k s_k·Z[b,k,c]·e^{2πikt/n}` into column `c` of `out: [B,n,d]`,
/// with `s_k` from `weight`.
#[allow(clippy::too_many_arguments)]
fn synthesize_columns(
    zre: &[f64],
    zim: &[f64],
    b: usize,
    n: usize,
    d: usize,
    kmax: usize,
    weight: impl Fn(usize) -> f64,
    out: &mut [f64],
    w: &mut FftWork,
) {
    let inv = plan(n, true);
    for bi in 0..b {
        for c in 0..d {
            w.buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for k in 0..kmax {
                let s = weight(k);
                let idx = (bi * kmax + k) * d + c;
                let zi = if self_conjugate(k, n) { 0.0 } else { zim[idx] };
                w.buf[k] = Complex64::new(s * zre[idx], s * zi);
            }
            inv.process_with_scratch(&mut w.buf, &mut w.scratch);
            let ob = &mut out[bi * n * d..(bi + 1) * n * d];
            for t in 0..n {
                ob[t * d + c] = w.buf[t].re;
            }
        }
    }
}

struct SpectralConv {
    b: usize,
    n: usize,
    d_in: usize,
    d_out: usize,
    kmax: usize,
    xre: Vec<f64>,
    xim: Vec<f64>,
}

impl Backward for SpectralConv {
    fn name(&self) -> &'static str {
        "spectral_conv"
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Vec<Option<Vec<f64>>> {
        let (b, n, di, dout, kmax) = (self.b, self.n, self.d_in, self.d_out, self.kmax);
        let (rre, rim) = (inputs[1].data(), inputs[2].data());
        let mut work = FftWork::new(n);
        let (mut gyre, mut gyim) = column_spectra(g, b, n, dout, kmax, &mut work);
        for bi in 0..b {
            for k in 0..kmax {
                let s = fold_weight(k, n) / n as f64;
                for o in 0..dout {
                    let idx = (bi * kmax + k) * dout + o;
                    gyre[idx] *= s;
                    gyim[idx] *= s;
                }
            }
        }
        let mut grre = needs[1].then(|| vec![0.0; kmax * dout * di]);
        let mut grim = needs[2].then(|| vec![0.0; kmax * dout * di]);
        let mut gxre = vec![0.0; b * kmax * di];
        let mut gxim = vec![0.0; b * kmax * di];
        for bi in 0..b {
            for k in 0..kmax {
                let xo = (bi * kmax + k) * di;
                let (xr, xi) = (&self.xre[xo..xo + di], &self.xim[xo..xo + di]);
                for o in 0..dout {
                    let gi = (bi * kmax + k) * dout + o;
                    let (ar, ai) = (gyre[gi], gyim[gi]);
                    let ro = (k * dout + o) * di;
                    if let Some(gr) = grre.as_mut() {
                        for i in 0..di {
                            gr[ro + i] += ar * xr[i] + ai * xi[i];
                        }
                    }
                    if let Some(gm) = grim.as_mut() {
                        for i in 0..di {
                            gm[ro + i] += ai * xr[i] - ar * xi[i];
                        }
                    }
                    if needs[0] {
                        for i in 0..di {
                            let (r, m) = (rre[ro + i], rim[ro + i]);
                            gxre[xo + i] += ar * r + ai * m;
                            gxim[xo + i] += ai * r - ar * m;
                        }
                    }
                }
            }
        }
        let gx = needs[0].then(|| {
            let mut gx = vec![0.0; b * n * di];
            synthesize_columns(&gxre, &gxim, b, n, di, kmax, |_| 1.0, &mut gx, &mut work);
            gx
        });
        vec![gx, grre, grim]
    }
}

/// Fourier layer: per sample, keeps modes `k < k_max` of each channel,
/// mixes them with the complex matrices `R[k] = r_re[k] + i·r_im[k]`
/// (`[k_max, d_out, d_in]`) and transforms back.
pub fn spectral_conv(tape: &mut Tape, x: Var, r_re: Var, r_im: Var, k_max: usize) -> Result<Var, SpectralError> {
    for v in [x, r_re, r_im] {
        tape.check(v)?;
    }
    let (b, n, di) = dims3("spectral_conv", tape.value(x))?;
    let max = spectrum_len(n.max(1));
    if k_max == 0 || k_max > max || n == 0 {
        return Err(SpectralError::Modes { k_max, max });
    }
    let tr = tape.value(r_re);
    if tr.rank() != 3 || tr.shape()[0] != k_max || tr.shape()[2] != di || tape.value(r_im).shape() != tr.shape() {
        return Err(SpectralError::Shape {
            op: "spectral_conv",
            expected: vec![k_max, tr.shape().get(1).copied().unwrap_or(0), di],
            found: tr.shape().to_vec(),
        });
    }
    let dout = tr.shape()[1];
    let (rre, rim) = (tr.data(), tape.value(r_im).data());
    let mut work = FftWork::new(n);
    let (xre, xim) = column_spectra(tape.value(x).data(), b, n, di, k_max, &mut work);
    let mut yre = vec![0.0; b * k_max * dout];
    let mut yim = vec![0.0; b * k_max * dout];
    for bi in 0..b {
        for k in 0..k_max {
            let xo = (bi * k_max + k) * di;
            for o in 0..dout {
                let ro = (k * dout + o) * di;
                let (mut sr, mut si) = (0.0, 0.0);
                for i in 0..di {
                    let (r, m) = (rre[ro + i], rim[ro + i]);
                    let (a, c) = (xre[xo + i], xim[xo + i]);
                    sr += r * a - m * c;
                    si += r * c + m * a;
                }
                yre[(bi * k_max + k) * dout + o] = sr;
                yim[(bi * k_max + k) * dout + o] = si;
            }
        }
    }
    let mut y = vec![0.0; b * n * dout];
    let inv_n = 1.0 / n as f64;
    synthesize_columns(&yre, &yim, b, n, dout, k_max, |k| fold_weight(k, n) * inv_n, &mut y, &mut work);
    let op = SpectralConv {
        b,
        n,
        d_in: di,
        d_out: dout,
        kmax: k_max,
        xre,
        xim,
    };
    Ok(tape.push(Tensor::new(vec![b, n, dout], y)?, &[x, r_re, r_im], op)?)
}

struct WaveletConv {
    plan: Arc<WaveletPlan>,
    b: usize,
    d_in: usize,
    d_out: usize,
    /// coarse coefficients `[B, ζ, d_in]`
    approx: Vec<f64>,
}

impl Backward for WaveletConv {
    fn name(&self) -> &'static str {
        "wavelet_conv"
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Vec<Option<Vec<f64>>> {
        let p = &*self.plan;
        let (n, z, di, dout) = (p.n, p.zeta, self.d_in, self.d_out);
        let r = inputs[1].data();
        let same = di == dout;
        let mut gr = needs[1].then(|| vec![0.0; z * dout * di]);
        let mut gx = needs[0].then(|| if same { g.to_vec() } else { vec![0.0; self.b * n * di] });
        let mut proj = vec![0.0; z * dout];
        let mut ga = vec![0.0; z * di];
        for bi in 0..self.b {
            let gy = &g[bi * n * dout..(bi + 1) * n * dout];
            gemm(z, n, dout, &p.synthesis, true, gy, false, &mut proj, 0.0);
            let a = &self.approx[bi * z * di..(bi + 1) * z * di];
            if let Some(gr) = gr.as_mut() {
                for zi in 0..z {
                    for o in 0..dout {
                        let po = proj[zi * dout + o];
                        let ro = (zi * dout + o) * di;
                        for i in 0..di {
                            gr[ro + i] += po * a[zi * di + i];
                        }
                    }
                }
            }
            if let Some(gx) = gx.as_mut() {
                for zi in 0..z {
                    for i in 0..di {
                        let mut s = if same { -proj[zi * dout + i] } else { 0.0 };
                        for o in 0..dout {
                            s += r[(zi * dout + o) * di + i] * proj[zi * dout + o];
                        }
                        ga[zi * di + i] = s;
                    }
                }
                let gxb = &mut gx[bi * n * di..(bi + 1) * n * di];
                gemm(n, z, di, &p.analysis, true, &ga, false, gxb, 1.0);
            }
        }
        vec![gx, gr]
    }
}

/// Wavelet layer: per sample and channel, takes the coarse approximation
/// band of the multi-level DWT, mixes it across channels with the real
/// matrices `R[z]` (`[ζ, d_out, d_in]`) and reconstructs. Detail bands pass
/// through when `d_in = d_out` and are dropped otherwise.
pub fn wavelet_conv(tape: &mut Tape, x: Var, r: Var, plan: &Arc<WaveletPlan>) -> Result<Var, SpectralError> {
    tape.check(x)?;
    tape.check(r)?;
    let (b, n, di) = dims3("wavelet_conv", tape.value(x))?;
    if n != plan.n {
        return Err(SpectralError::Length { expected: plan.n, found: n });
    }
    let z = plan.zeta;
    let tr = tape.value(r);
    if tr.rank() != 3 || tr.shape()[0] != z || tr.shape()[2] != di {
        return Err(SpectralError::Shape {
            op: "wavelet_conv",
            expected: vec![z, tr.shape().get(1).copied().unwrap_or(0), di],
            found: tr.shape().to_vec(),
        });
    }
    let dout = tr.shape()[1];
    let same = di == dout;
    let rd = tr.data();
    let xd = tape.value(x).data();
    let mut approx = vec![0.0; b * z * di];
    let mut y = if same { xd.to_vec() } else { vec![0.0; b * n * dout] };
    let mut mixed = vec![0.0; z * dout];
    for bi in 0..b {
        let xb = &xd[bi * n * di..(bi + 1) * n * di];
        let a = &mut approx[bi * z * di..(bi + 1) * z * di];
        gemm(z, n, di, &plan.analysis, false, xb, false, a, 0.0);
        for zi in 0..z {
            for o in 0..dout {
                let ro = (zi * dout + o) * di;
                let mut s = if same { -a[zi * di + o] } else { 0.0 };
                for i in 0..di {
                    s += rd[ro + i] * a[zi * di + i];
                }
                mixed[zi * dout + o] = s;
            }
        }
        let yb = &mut y[bi * n * dout..(bi + 1) * n * dout];
        gemm(n, z, dout, &plan.synthesis, false, &mixed, false, yb, 1.0);
    }
    let op = WaveletConv {
        plan: plan.clone(),
        b,
        d_in: di,
        d_out: dout,
        approx,
    };
    Ok(tape.push(Tensor::new(vec![b, n, dout], y)?, &[x, r], op)?)
}
