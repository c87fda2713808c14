//! Differentiable primitives.
//!
//! Binary elementwise ops broadcast the right operand when its shape is a
//! suffix of the left operand's shape or when it holds a single element.

use super::gemm::gemm;
use super::{Backward, Tape, Tensor, TensorError, Var};

type Grads = Vec<Option<Vec<f64>>>;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn broadcastable(a: &Tensor, b: &Tensor) -> bool {
    b.numel() == 1 || (b.rank() <= a.rank() && a.shape().ends_with(b.shape()))
}

/// Sums `g` into a buffer of length `nb`, folding consecutive chunks.
fn fold(g: impl Iterator<Item = f64>, nb: usize) -> Vec<f64> {
    let mut out = vec![0.0; nb];
    for (i, x) in g.enumerate() {
        out[i % nb] += x;
    }
    out
}

pub fn gelu(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_C * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_C * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * x * x)
}

#[derive(Clone, Copy)]
enum BinKind {
    Add,
    Sub,
    Mul,
}

struct Binary(BinKind);

impl Backward for Binary {
    fn name(&self) -> &'static str {
        match self.0 {
            BinKind::Add => "add",
            BinKind::Sub => "sub",
            BinKind::Mul => "mul",
        }
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Grads {
        let (a, b) = (inputs[0].data(), inputs[1].data());
        let nb = b.len();
        let ga = needs[0].then(|| match self.0 {
            BinKind::Add | BinKind::Sub => g.to_vec(),
            BinKind::Mul => g.iter().enumerate().map(|(i, g)| g * b[i % nb]).collect(),
        });
        let gb = needs[1].then(|| match self.0 {
            BinKind::Add => fold(g.iter().copied(), nb),
            BinKind::Sub => fold(g.iter().map(|g| -g), nb),
            BinKind::Mul => fold(g.iter().zip(a).map(|(g, a)| g * a), nb),
        });
        vec![ga, gb]
    }
}

#[derive(Clone, Copy)]
enum UnaryKind {
    Tanh,
    Relu,
    Gelu,
    Square,
    Sqrt,
    Affine(f64),
}

struct Unary(UnaryKind);

impl Backward for Unary {
    fn name(&self) -> &'static str {
        match self.0 {
            UnaryKind::Tanh => "tanh",
            UnaryKind::Relu => "relu",
            UnaryKind::Gelu => "gelu",
            UnaryKind::Square => "square",
            UnaryKind::Sqrt => "sqrt",
            UnaryKind::Affine(_) => "affine_scalar",
        }
    }

    fn backward(&self, inputs: &[&Tensor], y: &Tensor, g: &[f64], _: &[bool]) -> Grads {
        let x = inputs[0].data();
        let y = y.data();
        let gx: Vec<f64> = match self.0 {
            UnaryKind::Tanh => g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
            UnaryKind::Relu => g.iter().zip(x).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 }).collect(),
            UnaryKind::Gelu => g.iter().zip(x).map(|(g, &x)| g * gelu_grad(x)).collect(),
            UnaryKind::Square => g.iter().zip(x).map(|(g, x)| 2.0 * x * g).collect(),
            UnaryKind::Sqrt => g
                .iter()
                .zip(y)
                .map(|(g, &y)| if y > 0.0 { g / (2.0 * y) } else { 0.0 })
                .collect(),
            UnaryKind::Affine(c) => g.iter().map(|g| c * g).collect(),
        };
        vec![Some(gx)]
    }
}

struct MatMul {
    m: usize,
    k: usize,
    n: usize,
    /// rhs stored as `n×k`
    rhs_t: bool,
}

impl Backward for MatMul {
    fn name(&self) -> &'static str {
        if self.rhs_t {
            "matmul_nt"
        } else {
            "matmul"
        }
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Grads {
        let (m, k, n) = (self.m, self.k, self.n);
        let (a, b) = (inputs[0].data(), inputs[1].data());
        let ga = needs[0].then(|| {
            let mut ga = vec![0.0; m * k];
            // g (m×n) · op(b)ᵀ (n×k)
            gemm(m, n, k, g, false, b, !self.rhs_t, &mut ga, 0.0);
            ga
        });
        let gb = needs[1].then(|| {
            let mut gb = vec![0.0; k * n];
            if self.rhs_t {
                // gᵀ (n×m) · a (m×k)
                gemm(n, m, k, g, true, a, false, &mut gb, 0.0);
            } else {
                gemm(k, m, n, a, true, g, false, &mut gb, 0.0);
            }
            gb
        });
        vec![ga, gb]
    }
}

struct Linear {
    rows: usize,
    k: usize,
    m: usize,
}

impl Backward for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Grads {
        let (r, k, m) = (self.rows, self.k, self.m);
        let (x, w) = (inputs[0].data(), inputs[1].data());
        let gx = needs[0].then(|| {
            let mut gx = vec![0.0; r * k];
            gemm(r, m, k, g, false, w, true, &mut gx, 0.0);
            gx
        });
        let gw = needs[1].then(|| {
            let mut gw = vec![0.0; k * m];
            gemm(k, r, m, x, true, g, false, &mut gw, 0.0);
            gw
        });
        let mut out = vec![gx, gw];
        if inputs.len() == 3 {
            out.push(needs[2].then(|| fold(g.iter().copied(), m)));
        }
        out
    }
}

enum ReduceKind {
    Sum,
    Mean,
    SumLast(usize),
}

struct Reduce(ReduceKind);

impl Backward for Reduce {
    fn name(&self) -> &'static str {
        match self.0 {
            ReduceKind::Sum => "sum",
            ReduceKind::Mean => "mean",
            ReduceKind::SumLast(_) => "sum_last",
        }
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], _: &[bool]) -> Grads {
        let n = inputs[0].numel();
        let gx = match self.0 {
            ReduceKind::Sum => vec![g[0]; n],
            ReduceKind::Mean => vec![g[0] / n as f64; n],
            ReduceKind::SumLast(d) => (0..n).map(|i| g[i / d]).collect(),
        };
        vec![Some(gx)]
    }
}

struct LayerNorm {
    d: usize,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Backward for LayerNorm {
    fn name(&self) -> &'static str {
        "layer_norm"
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Grads {
        let d = self.d;
        let gain = inputs[1].data();
        let gx = needs[0].then(|| {
            let mut gx = vec![0.0; g.len()];
            let mut gh = vec![0.0; d];
            for (row, ((gr, xr), out)) in g
                .chunks(d)
                .zip(self.xhat.chunks(d))
                .zip(gx.chunks_mut(d))
                .enumerate()
            {
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for j in 0..d {
                    gh[j] = gr[j] * gain[j];
                    s1 += gh[j];
                    s2 += gh[j] * xr[j];
                }
                let scale = self.inv_std[row] / d as f64;
                for j in 0..d {
                    out[j] = scale * (d as f64 * gh[j] - s1 - xr[j] * s2);
                }
            }
            gx
        });
        let ggain = needs[1].then(|| fold(g.iter().zip(&self.xhat).map(|(g, h)| g * h), d));
        let gbias = needs[2].then(|| fold(g.iter().copied(), d));
        vec![gx, ggain, gbias]
    }
}

struct DotBatched {
    k: usize,
}

impl Backward for DotBatched {
    fn name(&self) -> &'static str {
        "dot_batched"
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Grads {
        let k = self.k;
        let (a, b) = (inputs[0].data(), inputs[1].data());
        let ga = needs[0].then(|| b.iter().enumerate().map(|(i, b)| g[i / k] * b).collect());
        let gb = needs[1].then(|| a.iter().enumerate().map(|(i, a)| g[i / k] * a).collect());
        vec![ga, gb]
    }
}

/// One half of a complex product; `imag` selects which.
struct ComplexMulPart {
    imag: bool,
}

impl Backward for ComplexMulPart {
    fn name(&self) -> &'static str {
        if self.imag {
            "complex_mul.im"
        } else {
            "complex_mul.re"
        }
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], needs: &[bool]) -> Grads {
        let (ar, ai, br, bi) = (inputs[0].data(), inputs[1].data(), inputs[2].data(), inputs[3].data());
        let nb = br.len();
        // re = ar·br − ai·bi ; im = ar·bi + ai·br
        let (ca, sa, cb, sb) = if self.imag { (bi, 1.0, br, 1.0) } else { (br, -1.0, bi, 1.0) };
        let (pa, pb) = if self.imag { (ai, ar) } else { (ar, ai) };
        let gar = needs[0].then(|| g.iter().enumerate().map(|(i, g)| g * ca[i % nb]).collect());
        let gai = needs[1].then(|| g.iter().enumerate().map(|(i, g)| sa * g * cb[i % nb]).collect());
        let gbr = needs[2].then(|| fold(g.iter().zip(pa).map(|(g, a)| sb * g * a), nb));
        let gbi = needs[3].then(|| {
            let s = if self.imag { 1.0 } else { -1.0 };
            fold(g.iter().zip(pb).map(|(g, a)| s * g * a), nb)
        });
        vec![gar, gai, gbr, gbi]
    }
}

fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Copies `len` entries along an axis from `src` (axis size `ds`, offset
/// `so`) into `dst` (axis size `dd`, offset `do_`).
#[allow(clippy::too_many_arguments)]
fn copy_axis(src: &[f64], ds: usize, so: usize, dst: &mut [f64], dd: usize, do_: usize, len: usize, outer: usize, inner: usize) {
    for o in 0..outer {
        let s = (o * ds + so) * inner;
        let d = (o * dd + do_) * inner;
        dst[d..d + len * inner].copy_from_slice(&src[s..s + len * inner]);
    }
}

struct Slice {
    axis: usize,
    start: usize,
    len: usize,
}

impl Backward for Slice {
    fn name(&self) -> &'static str {
        "slice"
    }

    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f64], _: &[bool]) -> Grads {
        let (outer, dim, inner) = axis_split(inputs[0].shape(), self.axis);
        let mut gx = vec![0.0; inputs[0].numel()];
        copy_axis(g, self.len, 0, &mut gx, dim, self.start, self.len, outer, inner);
        vec![Some(gx)]
    }
}

struct Pad {
    axis: usize,
    before: usize,
}

impl Backward for Pad {
    fn name(&self) -> &'static str {
        "pad"
    }

    fn backward(&self, inputs: &[&Tensor], out: &Tensor, g: &[f64], _: &[bool]) -> Grads {
        let (outer, dim, inner) = axis_split(inputs[0].shape(), self.axis);
        let dout = out.shape()[self.axis];
        let mut gx = vec![0.0; inputs[0].numel()];
        copy_axis(g, dout, self.before, &mut gx, dim, 0, dim, outer, inner);
        vec![Some(gx)]
    }
}

struct Identity(&'static str);

impl Backward for Identity {
    fn name(&self) -> &'static str {
        self.0
    }

    fn backward(&self, _: &[&Tensor], _: &Tensor, g: &[f64], _: &[bool]) -> Grads {
        vec![Some(g.to_vec())]
    }
}

impl Tape {
    fn binary(&mut self, kind: BinKind, name: &'static str, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        if !broadcastable(ta, tb) {
            return Err(shape_err(name, ta, tb));
        }
        let bd = tb.data();
        let nb = bd.len();
        let data: Vec<f64> = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = bd[i % nb];
                match kind {
                    BinKind::Add => x + y,
                    BinKind::Sub => x - y,
                    BinKind::Mul => x * y,
                }
            })
            .collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push(out, &[a, b], Binary(kind))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(BinKind::Add, "add", a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(BinKind::Sub, "sub", a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(BinKind::Mul, "mul", a, b)
    }

    /// `a·x` for a one-element parameter `a`.
    pub fn scale_by_scalar_param(&mut self, x: Var, a: Var) -> Result<Var, TensorError> {
        self.check(a)?;
        if self.value(a).numel() != 1 {
            self.check(x)?;
            return Err(shape_err("scale_by_scalar_param", self.value(x), self.value(a)));
        }
        self.binary(BinKind::Mul, "scale_by_scalar_param", x, a)
    }

    fn unary(&mut self, kind: UnaryKind, x: Var, f: impl Fn(f64) -> f64) -> Result<Var, TensorError> {
        self.check(x)?;
        let t = self.value(x);
        let out = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect());
        self.push(out, &[x], Unary(kind))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, TensorError> {
        self.unary(UnaryKind::Tanh, x, f64::tanh)
    }

    /// Rectifier; the derivative at exactly 0 is taken as 0.
    pub fn relu(&mut self, x: Var) -> Result<Var, TensorError> {
        self.unary(UnaryKind::Relu, x, |v| if v > 0.0 { v } else { 0.0 })
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Result<Var, TensorError> {
        self.unary(UnaryKind::Gelu, x, gelu)
    }

    pub fn square(&mut self, x: Var) -> Result<Var, TensorError> {
        self.unary(UnaryKind::Square, x, |v| v * v)
    }

    /// Square root of a non-negative input; the adjoint at 0 is taken as 0.
    pub fn sqrt(&mut self, x: Var) -> Result<Var, TensorError> {
        self.unary(UnaryKind::Sqrt, x, f64::sqrt)
    }

    /// `c·x + d` with constant scalars.
    pub fn affine_scalar(&mut self, x: Var, c: f64, d: f64) -> Result<Var, TensorError> {
        self.unary(UnaryKind::Affine(c), x, |v| c * v + d)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var, TensorError> {
        self.affine_scalar(x, c, 0.0)
    }

    /// `[m,k] · [k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.matmul_impl(a, b, false)
    }

    /// `[m,k] · [n,k]ᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, rhs_t: bool) -> Result<Var, TensorError> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let name = if rhs_t { "matmul_nt" } else { "matmul" };
        if ta.rank() != 2 || tb.rank() != 2 {
            return Err(shape_err(name, ta, tb));
        }
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        let (kb, n) = if rhs_t {
            (tb.shape()[1], tb.shape()[0])
        } else {
            (tb.shape()[0], tb.shape()[1])
        };
        if k != kb {
            return Err(shape_err(name, ta, tb));
        }
        let mut c = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), rhs_t, &mut c, 0.0);
        self.push(Tensor::from_parts(vec![m, n], c), &[a, b], MatMul { m, k, n, rhs_t })
    }

    /// Pointwise affine map over the last axis: `x[...,k]·W[k,m] + b[m]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
        self.check(x)?;
        self.check(w)?;
        let (tx, tw) = (self.value(x), self.value(w));
        let k = tx.last_dim();
        if tw.rank() != 2 || tw.shape()[0] != k || tx.rank() == 0 {
            return Err(shape_err("linear", tx, tw));
        }
        let m = tw.shape()[1];
        let rows = tx.numel() / k.max(1);
        let mut y = vec![0.0; rows * m];
        if let Some(b) = b {
            self.check(b)?;
            let tb = self.value(b);
            if tb.shape() != [m] {
                return Err(shape_err("linear", tw, tb));
            }
            for row in y.chunks_mut(m) {
                row.copy_from_slice(tb.data());
            }
        }
        let beta = if b.is_some() { 1.0 } else { 0.0 };
        gemm(rows, k, m, tx.data(), false, tw.data(), false, &mut y, beta);
        let mut shape = tx.shape().to_vec();
        *shape.last_mut().unwrap() = m;
        let op = Linear { rows, k, m };
        match b {
            Some(b) => self.push(Tensor::from_parts(shape, y), &[x, w, b], op),
            None => self.push(Tensor::from_parts(shape, y), &[x, w], op),
        }
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        self.check(x)?;
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), &[x], Reduce(ReduceKind::Sum))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, TensorError> {
        self.check(x)?;
        let t = self.value(x);
        if t.numel() == 0 {
            return Err(TensorError::Invalid("mean of an empty tensor".into()));
        }
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push(Tensor::scalar(s), &[x], Reduce(ReduceKind::Mean))
    }

    /// Sums over the last axis, dropping it (a rank-1 input gives `[1]`).
    pub fn sum_last(&mut self, x: Var) -> Result<Var, TensorError> {
        self.check(x)?;
        let t = self.value(x);
        let d = t.last_dim();
        if d == 0 {
            return Err(TensorError::Invalid("sum_last over an empty axis".into()));
        }
        let data: Vec<f64> = t.data().chunks(d).map(|c| c.iter().sum()).collect();
        let mut shape = t.shape()[..t.rank().saturating_sub(1)].to_vec();
        if shape.is_empty() {
            shape.push(1);
        }
        self.push(Tensor::from_parts(shape, data), &[x], Reduce(ReduceKind::SumLast(d)))
    }

    /// Normalizes over the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var, TensorError> {
        for v in [x, gain, bias] {
            self.check(v)?;
        }
        let tx = self.value(x);
        let d = tx.last_dim();
        for p in [gain, bias] {
            let tp = self.value(p);
            if tp.shape() != [d] {
                return Err(shape_err("layer_norm", tx, tp));
            }
        }
        let (gn, bs) = (self.value(gain).data(), self.value(bias).data());
        let rows = tx.numel() / d.max(1);
        let mut xhat = vec![0.0; tx.numel()];
        let mut inv_std = Vec::with_capacity(rows);
        let mut y = vec![0.0; tx.numel()];
        for ((xr, hr), yr) in tx.data().chunks(d).zip(xhat.chunks_mut(d)).zip(y.chunks_mut(d)) {
            let mu = xr.iter().sum::<f64>() / d as f64;
            let var = xr.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..d {
                hr[j] = (xr[j] - mu) * inv;
                yr[j] = hr[j] * gn[j] + bs[j];
            }
            inv_std.push(inv);
        }
        let out = Tensor::from_parts(tx.shape().to_vec(), y);
        self.push(out, &[x, gain, bias], LayerNorm { d, xhat, inv_std })
    }

    /// Row-wise inner products of two `[B,k]` tensors, giving `[B]`.
    pub fn dot_batched(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || ta.shape() != tb.shape() {
            return Err(shape_err("dot_batched", ta, tb));
        }
        let k = ta.shape()[1];
        let data: Vec<f64> = ta
            .data()
            .chunks(k.max(1))
            .zip(tb.data().chunks(k.max(1)))
            .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x * y).sum())
            .collect();
        self.push(Tensor::from_parts(vec![ta.shape()[0]], data), &[a, b], DotBatched { k })
    }

    /// `(ar + i·ai)(br + i·bi)` with `b` broadcast like [`Tape::mul`].
    pub fn complex_mul(&mut self, ar: Var, ai: Var, br: Var, bi: Var) -> Result<(Var, Var), TensorError> {
        for v in [ar, ai, br, bi] {
            self.check(v)?;
        }
        let (tar, tai, tbr, tbi) = (self.value(ar), self.value(ai), self.value(br), self.value(bi));
        if tar.shape() != tai.shape() {
            return Err(shape_err("complex_mul", tar, tai));
        }
        if tbr.shape() != tbi.shape() || !broadcastable(tar, tbr) {
            return Err(shape_err("complex_mul", tar, tbr));
        }
        let nb = tbr.numel();
        let (a_r, a_i, b_r, b_i) = (tar.data(), tai.data(), tbr.data(), tbi.data());
        let re: Vec<f64> = (0..a_r.len()).map(|i| a_r[i] * b_r[i % nb] - a_i[i] * b_i[i % nb]).collect();
        let im: Vec<f64> = (0..a_r.len()).map(|i| a_r[i] * b_i[i % nb] + a_i[i] * b_r[i % nb]).collect();
        let shape = tar.shape().to_vec();
        let inputs = [ar, ai, br, bi];
        let re = self.push(Tensor::from_parts(shape.clone(), re), &inputs, ComplexMulPart { imag: false })?;
        let im = self.push(Tensor::from_parts(shape, im), &inputs, ComplexMulPart { imag: true })?;
        Ok((re, im))
    }

    /// `len` entries along `axis` starting at `start`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var, TensorError> {
        self.check(x)?;
        let t = self.value(x);
        if axis >= t.rank() || start + len > t.shape()[axis] {
            return Err(TensorError::Invalid(format!(
                "slice: axis {axis} range {start}..{} out of bounds for shape {:?}",
                start + len,
                t.shape()
            )));
        }
        let (outer, dim, inner) = axis_split(t.shape(), axis);
        let mut shape = t.shape().to_vec();
        shape[axis] = len;
        let mut data = vec![0.0; outer * len * inner];
        copy_axis(t.data(), dim, start, &mut data, len, 0, len, outer, inner);
        self.push(Tensor::from_parts(shape, data), &[x], Slice { axis, start, len })
    }

    /// Zero padding along `axis`.
    pub fn pad(&mut self, x: Var, axis: usize, before: usize, after: usize) -> Result<Var, TensorError> {
        self.check(x)?;
        let t = self.value(x);
        if axis >= t.rank() {
            return Err(TensorError::Invalid(format!("pad: axis {axis} out of bounds for shape {:?}", t.shape())));
        }
        let (outer, dim, inner) = axis_split(t.shape(), axis);
        let mut shape = t.shape().to_vec();
        shape[axis] = dim + before + after;
        let mut data = vec![0.0; outer * shape[axis] * inner];
        copy_axis(t.data(), dim, 0, &mut data, shape[axis], before, dim, outer, inner);
        self.push(Tensor::from_parts(shape, data), &[x], Pad { axis, before })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        self.check(x)?;
        let t = self.value(x).clone().reshaped(shape)?;
        self.push(t, &[x], Identity("reshape"))
    }
}
