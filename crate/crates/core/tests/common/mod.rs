//! Independent reference routines shared by the integration tests.
#![allow(dead_code)]

use hhop::hh::SquarePulse;
use hhop::spectral::{dwt, idwt, WaveletFilter, WaveletPyramid};
use std::f64::consts::PI;

/// Membrane right-hand side written out directly from the model equations,
/// kept separate from the library implementation.
fn rhs(y: [f64; 4], i_app: f64) -> [f64; 4] {
    let [v, m, h, n] = y;
    let am = if (v + 50.0).abs() < 1e-9 { 1.0 } else { 0.1 * (-v - 50.0) / (((-v - 50.0) / 10.0).exp() - 1.0) };
    let bm = 4.0 * ((-v - 75.0) / 18.0).exp();
    let ah = 0.07 * ((-v - 75.0) / 20.0).exp();
    let bh = 1.0 / (((-v - 45.0) / 10.0).exp() + 1.0);
    let an = if (v + 65.0).abs() < 1e-9 { 0.1 } else { 0.01 * (-v - 65.0) / (((-v - 65.0) / 10.0).exp() - 1.0) };
    let bn = 0.125 * ((-v - 75.0) / 80.0).exp();
    let dv = -(120.0 * m.powi(3) * h * (v - 40.0) + 36.0 * n.powi(4) * (v + 87.0) + 0.3 * (v + 64.387)) + i_app;
    [dv, am * (1.0 - m) - bm * m, ah * (1.0 - h) - bh * h, an * (1.0 - n) - bn * n]
}

fn rk4_step(y: [f64; 4], h: f64, i: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]];
    let k1 = rhs(y, i);
    let k2 = rhs(add(y, k1, h / 2.0), i);
    let k3 = rhs(add(y, k2, h / 2.0), i);
    let k4 = rhs(add(y, k3, h), i);
    let mut out = y;
    for j in 0..4 {
        out[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    out
}

/// Classical RK4 with step `dt`, shortened to land exactly on pulse edges and
/// grid points. Returns the full state at each grid point.
pub fn rk4_states(pulse: &SquarePulse, grid: &[f64], dt: f64) -> Vec<[f64; 4]> {
    let mut y = [-75.0, 0.05, 0.595, 0.317];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    let mut events: Vec<f64> = grid.to_vec();
    events.push(pulse.t_start);
    events.push(pulse.t_end);
    events.sort_by(f64::total_cmp);
    let mut gi = 0;
    for &target in &events {
        while t < target {
            let h = dt.min(target - t);
            let i_app = pulse.current_at(t);
            y = rk4_step(y, h, i_app);
            t = if target - t <= dt { target } else { t + h };
        }
        while gi < grid.len() && grid[gi] <= t {
            out.push(y);
            gi += 1;
        }
    }
    out
}

pub fn rk4_voltage(pulse: &SquarePulse, grid: &[f64], dt: f64) -> Vec<f64> {
    rk4_states(pulse, grid, dt).iter().map(|y| y[0]).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Counts strict local maxima above 0 mV, written independently of the library.
pub fn oracle_spikes(v: &[f64]) -> usize {
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > 0.0 && v[i] > v[i - 1] && v[i] >= v[i + 1])
        .count()
}

use hhop::autodiff::{Tape, Tensor, TensorError, Var};

/// Deterministic pseudo-random values in (-1, 1), independent of the library RNG.
pub fn lcg_values(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    Tensor::new(shape.to_vec(), lcg_values(shape.iter().product(), seed)).unwrap()
}

/// Scalarizes `out` with fixed random weights so every adjoint coordinate is
/// exercised.
pub fn weighted_sum(tape: &mut Tape, out: Var) -> Var {
    let t = tape.value(out).clone();
    let w = Tensor::new(t.shape().to_vec(), lcg_values(t.numel(), 991)).unwrap();
    let w = tape.constant(w);
    let p = tape.mul(out, w).unwrap();
    tape.sum(p).unwrap()
}

fn forward_value<F>(inputs: &[Tensor], build: &F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::no_grad();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars).unwrap();
    let l = weighted_sum(&mut tape, out);
    tape.value(l).item().unwrap()
}

/// Tape gradients of `build` at `inputs`.
pub fn tape_grads<F>(inputs: &[Tensor], build: &F) -> Vec<Vec<f64>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars).unwrap();
    let l = weighted_sum(&mut tape, out);
    let g = tape.backward(l).unwrap();
    vars.iter().zip(inputs).map(|(&v, t)| g.get_or_zeros(v, t.numel())).collect()
}

/// Worst relative error, over every input coordinate, between tape
/// gradients and central differences with step 1e-5.
pub fn fd_max_rel_error<F>(inputs: &[Tensor], build: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    fd_check(inputs, build).0
}

/// Smallest nonzero finite-difference magnitude, relative to the largest,
/// that [`fd_check`] still calls well conditioned. Below it, round-off in
/// the differenced loss is no longer small against a 1e-6 relative check.
pub const FD_CONDITIONING: f64 = 1e-4;

/// Largest relative change of a central difference under step halving for
/// [`fd_check`] to trust it.
pub const FD_STABILITY: f64 = 1e-7;

/// Worst relative error plus whether the oracle is well conditioned: every
/// nonzero numeric coordinate is at least [`FD_CONDITIONING`] times the
/// largest one and moves by at most [`FD_STABILITY`] when the step is
/// halved. Exact zeros (no dependence) do not count against conditioning.
pub fn fd_check<F>(inputs: &[Tensor], build: F) -> (f64, bool)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let h = 1e-5;
    let analytic = tape_grads(inputs, &build);
    let mut worst: f64 = 0.0;
    let mut numeric = Vec::new();
    let mut stable = true;
    let mut work = inputs.to_vec();
    for i in 0..inputs.len() {
        for j in 0..inputs[i].numel() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + h;
            let up = forward_value(&work, &build);
            work[i].data_mut()[j] = x0 - h;
            let down = forward_value(&work, &build);
            work[i].data_mut()[j] = x0;
            work[i].data_mut()[j] = x0 + h / 2.0;
            let up_half = forward_value(&work, &build);
            work[i].data_mut()[j] = x0 - h / 2.0;
            let down_half = forward_value(&work, &build);
            work[i].data_mut()[j] = x0;
            let f = (up - down) / (2.0 * h);
            let f_half = (up_half - down_half) / h;
            let a = analytic[i][j];
            worst = worst.max((a - f).abs() / a.abs().max(f.abs()).max(1e-12));
            numeric.push(f.abs());
            stable &= (f - f_half).abs() <= FD_STABILITY * f.abs().max(f_half.abs());
        }
    }
    let top = numeric.iter().cloned().fold(0.0, f64::max);
    let conditioned = stable && numeric.iter().all(|&f| f == 0.0 || f >= FD_CONDITIONING * top);
    (worst, conditioned)
}

/// Direct O(n²) DFT, `X_k = Σ_t x_t e^{−2πikt/n}`.
pub fn dense_dft(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let m = n / 2 + 1;
    let mut re = vec![0.0; m];
    let mut im = vec![0.0; m];
    for k in 0..m {
        for (t, &v) in x.iter().enumerate() {
            let th = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
            re[k] += v * th.cos();
            im[k] -= v * th.sin();
        }
    }
    (re, im)
}

/// Brute-force Fourier layer from the dense DFT, one sample.
pub fn spectral_conv_oracle(x: &[f64], n: usize, d: usize, dout: usize, rre: &[f64], rim: &[f64], kmax: usize) -> Vec<f64> {
    let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|i| dense_dft(&(0..n).map(|t| x[t * d + i]).collect::<Vec<_>>()))
        .collect();
    let mut y = vec![0.0; n * dout];
    for o in 0..dout {
        for k in 0..kmax {
            let (mut yr, mut yi) = (0.0, 0.0);
            for i in 0..d {
                let (r, m) = (rre[(k * dout + o) * d + i], rim[(k * dout + o) * d + i]);
                let (a, c) = (cols[i].0[k], cols[i].1[k]);
                yr += r * a - m * c;
                yi += r * c + m * a;
            }
            let w = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            for t in 0..n {
                let th = 2.0 * PI * (k * t) as f64 / n as f64;
                y[t * dout + o] += w * (yr * th.cos() - yi * th.sin()) / n as f64;
            }
        }
    }
    y
}

/// Full `n×n` map of the single-channel wavelet layer, assembled column by
/// column from the plain transforms.
pub fn wavelet_map_oracle(n: usize, order: usize, levels: usize, r: &[f64]) -> Vec<f64> {
    let f = WaveletFilter::daubechies(order).unwrap();
    let mut m = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let p = dwt(&e, &f, levels).unwrap();
        let q = WaveletPyramid {
            approx: p.approx.iter().zip(r).map(|(a, r)| a * r).collect(),
            ..p
        };
        let col = idwt(&q, &f).unwrap();
        for i in 0..n {
            m[i * n + j] = col[i];
        }
        e[j] = 0.0;
    }
    m
}
