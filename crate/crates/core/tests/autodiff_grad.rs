mod common;

use common::{fd_check, fd_max_rel_error, lcg_values, rand_tensor, tape_grads};
use hhop::autodiff::{grad_check, ParamSet, Tape, Tensor, TensorError, Var, LAYER_NORM_EPS};
use proptest::prelude::*;

const TOL: f64 = 1e-6;

fn check<F>(name: &str, inputs: &[Tensor], build: F)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let err = fd_max_rel_error(inputs, build);
    assert!(err < TOL, "{name}: max relative error {err:e}");
}

fn positive(shape: &[usize], seed: u64) -> Tensor {
    let t = rand_tensor(shape, seed);
    Tensor::new(shape.to_vec(), t.data().iter().map(|x| 0.5 + x.abs()).collect()).unwrap()
}

#[test]
fn elementwise_binary_ops() {
    let a = rand_tensor(&[3, 4, 5], 1);
    let same = rand_tensor(&[3, 4, 5], 2);
    let suffix = rand_tensor(&[4, 5], 3);
    let last = rand_tensor(&[5], 4);
    let one = rand_tensor(&[1], 5);
    for b in [&same, &suffix, &last, &one] {
        let ins = [a.clone(), b.clone()];
        check("add", &ins, |t, v| t.add(v[0], v[1]));
        check("sub", &ins, |t, v| t.sub(v[0], v[1]));
        check("mul", &ins, |t, v| t.mul(v[0], v[1]));
    }
    check("scale_by_scalar_param", &[a.clone(), one.clone()], |t, v| t.scale_by_scalar_param(v[0], v[1]));
}

#[test]
fn unary_ops() {
    let x = rand_tensor(&[4, 6], 7);
    check("tanh", &[x.clone()], |t, v| t.tanh(v[0]));
    check("gelu", &[x.clone()], |t, v| t.gelu(v[0]));
    check("relu", &[x.clone()], |t, v| t.relu(v[0]));
    check("square", &[x.clone()], |t, v| t.square(v[0]));
    check("affine_scalar", &[x.clone()], |t, v| t.affine_scalar(v[0], -1.7, 0.3));
    check("sqrt", &[positive(&[4, 6], 8)], |t, v| t.sqrt(v[0]));
}

#[test]
fn reductions_and_shapes() {
    let x = rand_tensor(&[3, 4, 5], 11);
    check("sum", &[x.clone()], |t, v| t.sum(v[0]));
    check("mean", &[x.clone()], |t, v| t.mean(v[0]));
    check("sum_last", &[x.clone()], |t, v| t.sum_last(v[0]));
    check("reshape", &[x.clone()], |t, v| t.reshape(v[0], &[12, 5]));
    for axis in 0..3 {
        check("slice", &[x.clone()], |t, v| t.slice(v[0], axis, 1, 2));
        check("pad", &[x.clone()], |t, v| t.pad(v[0], axis, 2, 1));
    }
}

#[test]
fn linear_algebra_ops() {
    let a = rand_tensor(&[4, 3], 21);
    let b = rand_tensor(&[3, 5], 22);
    let bt = rand_tensor(&[5, 3], 23);
    check("matmul", &[a.clone(), b.clone()], |t, v| t.matmul(v[0], v[1]));
    check("matmul_nt", &[a.clone(), bt], |t, v| t.matmul_nt(v[0], v[1]));
    let x = rand_tensor(&[2, 4, 3], 24);
    let bias = rand_tensor(&[5], 25);
    check("linear", &[x.clone(), b.clone(), bias], |t, v| t.linear(v[0], v[1], Some(v[2])));
    check("linear (no bias)", &[x, b], |t, v| t.linear(v[0], v[1], None));
    let p = rand_tensor(&[4, 6], 26);
    let q = rand_tensor(&[4, 6], 27);
    check("dot_batched", &[p, q], |t, v| t.dot_batched(v[0], v[1]));
}

#[test]
fn layer_norm_gradients() {
    let x = rand_tensor(&[3, 7], 31);
    let g = positive(&[7], 32);
    let b = rand_tensor(&[7], 33);
    check("layer_norm", &[x, g.clone(), b.clone()], |t, v| t.layer_norm(v[0], v[1], v[2], LAYER_NORM_EPS));
    // constant rows sit at the eps guard; the gain adjoint there is zero
    let c = Tensor::full(&[2, 7], 0.4);
    check("layer_norm (constant rows)", &[c.clone(), b.clone()], |t, v| {
        let gain = t.constant(g.clone());
        t.layer_norm(v[0], gain, v[1], LAYER_NORM_EPS)
    });
    let grads = tape_grads(&[c, g, b], &|t: &mut Tape, v: &[Var]| t.layer_norm(v[0], v[1], v[2], LAYER_NORM_EPS));
    assert!(grads[1].iter().all(|x| x.abs() < 1e-9), "{:?}", grads[1]);
}

#[test]
fn complex_mul_gradients() {
    let ins = [
        rand_tensor(&[2, 3, 4], 41),
        rand_tensor(&[2, 3, 4], 42),
        rand_tensor(&[3, 4], 43),
        rand_tensor(&[3, 4], 44),
    ];
    check("complex_mul.re", &ins, |t, v| Ok(t.complex_mul(v[0], v[1], v[2], v[3])?.0));
    check("complex_mul.im", &ins, |t, v| Ok(t.complex_mul(v[0], v[1], v[2], v[3])?.1));
    check("complex_mul (both)", &ins, |t, v| {
        let (re, im) = t.complex_mul(v[0], v[1], v[2], v[3])?;
        let im2 = t.scale(im, 0.7)?;
        t.add(re, im2)
    });
}

#[test]
fn adversarial_inputs() {
    let z = Tensor::zeros(&[3, 4]);
    let nz = rand_tensor(&[3, 4], 51);
    check("tanh at zero", &[z.clone()], |t, v| t.tanh(v[0]));
    check("gelu at zero", &[z.clone()], |t, v| t.gelu(v[0]));
    check("mul by zero", &[z.clone(), nz.clone()], |t, v| t.mul(v[0], v[1]));
    check("square at zero", &[z.clone()], |t, v| t.square(v[0]));

    // relu ties at 0 use subgradient 0
    let mut tie = nz.data().to_vec();
    tie[0] = 0.0;
    tie[5] = 0.0;
    let tie = Tensor::new(vec![3, 4], tie).unwrap();
    let g = tape_grads(&[tie.clone()], &|t: &mut Tape, v: &[Var]| t.relu(v[0]));
    assert_eq!(g[0][0], 0.0);
    assert_eq!(g[0][5], 0.0);
    for (i, &x) in tie.data().iter().enumerate() {
        if x < 0.0 {
            assert_eq!(g[0][i], 0.0);
        } else if x > 0.0 {
            assert_ne!(g[0][i], 0.0);
        }
    }
    // sqrt at 0 has adjoint 0
    let g = tape_grads(&[z], &|t: &mut Tape, v: &[Var]| t.sqrt(v[0]));
    assert!(g[0].iter().all(|&x| x == 0.0));
}

#[test]
fn repeated_input_accumulates() {
    let x = rand_tensor(&[5], 61);
    check("x*x", &[x.clone()], |t, v| t.mul(v[0], v[0]));
    check("x+tanh(x)", &[x], |t, v| {
        let y = t.tanh(v[0])?;
        t.add(v[0], y)
    });
}

#[test]
fn small_values_match_hand_results() {
    let mut tape = Tape::new();
    let z = tape.leaf(Tensor::scalar(0.0));
    let y = tape.tanh(z).unwrap();
    assert_eq!(tape.value(y).item(), Some(0.0));
    let g = tape.backward(y).unwrap();
    assert_eq!(g.get(z).unwrap(), &[1.0]);

    let mut tape = Tape::new();
    let z = tape.leaf(Tensor::scalar(0.0));
    let y = tape.gelu(z).unwrap();
    assert_eq!(tape.value(y).item(), Some(0.0));

    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::full(&[2, 5], 3.25));
    let g = tape.constant(Tensor::full(&[5], 2.0));
    let b = tape.constant(Tensor::zeros(&[5]));
    let y = tape.layer_norm(x, g, b, LAYER_NORM_EPS).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));

    // mean(x²) → 2x/n
    let xs = vec![1.0, -2.0, 0.5, 4.0];
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::vector(xs.clone()));
    let sq = tape.square(x).unwrap();
    let l = tape.mean(sq).unwrap();
    let g = tape.backward(l).unwrap();
    for (gi, xi) in g.get(x).unwrap().iter().zip(&xs) {
        assert_eq!(*gi, 2.0 * xi / 4.0);
    }

    // sum(W·x): every row of dW equals x
    let mut tape = Tape::new();
    let w = tape.leaf(rand_tensor(&[3, 4], 70));
    let xv = vec![0.5, -1.0, 2.0, 0.25];
    let x = tape.constant(Tensor::new(vec![4, 1], xv.clone()).unwrap());
    let wx = tape.matmul(w, x).unwrap();
    let l = tape.sum(wx).unwrap();
    let g = tape.backward(l).unwrap();
    for row in g.get(w).unwrap().chunks(4) {
        assert_eq!(row, xv.as_slice());
    }
}

#[test]
fn shape_errors_name_op_and_shapes() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::zeros(&[2, 3]));
    let b = tape.leaf(Tensor::zeros(&[2, 4]));
    let e = tape.add(a, b).unwrap_err();
    assert_eq!(
        e,
        TensorError::Shape {
            op: "add",
            lhs: vec![2, 3],
            rhs: vec![2, 4]
        }
    );
    assert!(e.to_string().contains("add") && e.to_string().contains("[2, 3]") && e.to_string().contains("[2, 4]"));
    assert!(matches!(tape.matmul(a, b), Err(TensorError::Shape { op: "matmul", .. })));
    let w = tape.leaf(Tensor::zeros(&[4, 2]));
    assert!(matches!(tape.linear(a, w, None), Err(TensorError::Shape { op: "linear", .. })));
}

#[test]
fn backward_preconditions() {
    let mut tape = Tape::new();
    let c = tape.constant(Tensor::scalar(2.0));
    assert_eq!(tape.backward(c).unwrap_err(), TensorError::Detached);
    let x = tape.leaf(Tensor::zeros(&[3]));
    assert!(matches!(tape.backward(x), Err(TensorError::NotScalar(_))));
    let mut other = Tape::new();
    let y = other.leaf(Tensor::scalar(1.0));
    assert_eq!(tape.backward(y).unwrap_err(), TensorError::Detached);
    assert!(tape.add(x, y).is_err());

    let mut ng = Tape::no_grad();
    let p = ng.leaf(Tensor::scalar(1.0));
    let q = ng.square(p).unwrap();
    assert_eq!(ng.backward(q).unwrap_err(), TensorError::Detached);
}

#[test]
fn unreachable_params_get_zero() {
    let mut ps = ParamSet::new();
    ps.insert("used", rand_tensor(&[3], 80)).unwrap();
    ps.insert("unused", rand_tensor(&[2], 81)).unwrap();
    let mut tape = Tape::new();
    let vars = ps.attach(&mut tape);
    let l = tape.sum(vars[0]).unwrap();
    let g = tape.backward(l).unwrap();
    let grads = ps.collect_grads(&g, &vars);
    assert_eq!(grads[1], vec![0.0, 0.0]);
    assert_eq!(grads[0], vec![1.0; 3]);
}

fn ffn(t: &mut Tape, v: &[Var], x: &Tensor) -> Result<Var, TensorError> {
    let x = t.constant(x.clone());
    let h = t.linear(x, v[0], Some(v[1]))?;
    let h = t.tanh(h)?;
    let y = t.linear(h, v[2], Some(v[3]))?;
    let y = t.square(y)?;
    t.mean(y)
}

fn ffn_params() -> ParamSet {
    let mut ps = ParamSet::new();
    ps.insert("l0.w", rand_tensor(&[4, 8], 90)).unwrap();
    ps.insert("l0.b", rand_tensor(&[8], 91)).unwrap();
    ps.insert("l1.w", rand_tensor(&[8, 3], 92)).unwrap();
    ps.insert("l1.b", rand_tensor(&[3], 93)).unwrap();
    ps
}

#[test]
fn two_layer_ffn_matches_finite_differences() {
    let x = rand_tensor(&[6, 4], 94);
    let ps = ffn_params();
    let inputs: Vec<Tensor> = ps.iter().map(|p| p.value.clone()).collect();
    check("ffn", &inputs, |t, v| ffn(t, v, &x));
}

#[test]
fn grad_check_quadratic_and_ffn() {
    let mut ps = ParamSet::new();
    ps.insert("theta", rand_tensor(&[10], 100)).unwrap();
    let r = grad_check(&ps, 10, 1e-5, 0, |t, v| {
        let sq = t.square(v[0])?;
        t.sum(sq)
    })
    .unwrap();
    assert!(r.max_rel_error < 1e-9, "{r:?}");
    assert_eq!(r.probes, 10);
    assert_eq!(r.skipped_kinks, 0);

    let x = rand_tensor(&[6, 4], 94);
    let r = grad_check(&ffn_params(), 40, 1e-5, 1, |t, v| ffn(t, v, &x)).unwrap();
    assert!(r.max_rel_error < 1e-6, "{r:?}");
}

#[test]
fn grad_check_rejects_nondeterminism() {
    let mut ps = ParamSet::new();
    ps.insert("theta", Tensor::vector(vec![1.0, 2.0])).unwrap();
    let mut calls = 0.0;
    let r = grad_check(&ps, 2, 1e-5, 0, |t, v| {
        calls += 1.0;
        let s = t.sum(v[0])?;
        t.affine_scalar(s, 1.0, calls)
    });
    assert!(matches!(r, Err(TensorError::NonDeterministic { .. })));
}

fn grads_of(ps: &ParamSet, a: f64, b: f64, x: &Tensor) -> Vec<Vec<f64>> {
    let mut t = Tape::new();
    let v = ps.attach(&mut t);
    let l1 = ffn(&mut t, &v, x).unwrap();
    let s = t.sum(v[0]).unwrap();
    let l2 = t.square(s).unwrap();
    let l1 = t.scale(l1, a).unwrap();
    let l2 = t.scale(l2, b).unwrap();
    let l = t.add(l1, l2).unwrap();
    let g = t.backward(l).unwrap();
    ps.collect_grads(&g, &v)
}

#[test]
fn backward_is_linear_in_the_loss() {
    let ps = ffn_params();
    let x = rand_tensor(&[6, 4], 95);
    let (a, b) = (0.37, -2.1);
    let g1 = grads_of(&ps, 1.0, 0.0, &x);
    let g2 = grads_of(&ps, 0.0, 1.0, &x);
    let g = grads_of(&ps, a, b, &x);
    for ((gi, g1i), g2i) in g.iter().zip(&g1).zip(&g2) {
        for ((&c, &p), &q) in gi.iter().zip(g1i).zip(g2i) {
            let want = a * p + b * q;
            assert!((c - want).abs() <= 1e-12 * want.abs().max(1.0), "{c} vs {want}");
        }
    }
}

#[test]
fn replay_is_bit_identical() {
    let ps = ffn_params();
    let x = rand_tensor(&[6, 4], 96);
    let run = || {
        grads_of(&ps, 1.0, 0.5, &x)
            .into_iter()
            .flatten()
            .map(f64::to_bits)
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_linear_layer_norm_chain(rows in 1usize..5, k in 1usize..6, m in 3usize..7, seed in 0u64..1000) {
        let x = rand_tensor(&[rows, k], seed);
        let w = rand_tensor(&[k, m], seed + 1);
        let b = rand_tensor(&[m], seed + 2);
        let g = Tensor::new(vec![m], lcg_values(m, seed + 3).iter().map(|v| 1.0 + 0.5 * v).collect()).unwrap();
        let beta = rand_tensor(&[m], seed + 4);
        let (err, conditioned) = fd_check(&[x, w, b, g, beta], |t, v| {
            let h = t.linear(v[0], v[1], Some(v[2]))?;
            let h = t.layer_norm(h, v[3], v[4], LAYER_NORM_EPS)?;
            t.gelu(h)
        });
        prop_assume!(conditioned);
        prop_assert!(err < TOL, "err {err:e}");
    }

    #[test]
    fn prop_matmul_shapes(m in 1usize..6, k in 1usize..6, n in 1usize..6, seed in 0u64..1000) {
        let a = rand_tensor(&[m, k], seed);
        let b = rand_tensor(&[k, n], seed + 7);
        let (err, conditioned) = fd_check(&[a, b], |t, v| {
            let c = t.matmul(v[0], v[1])?;
            t.tanh(c)
        });
        prop_assume!(conditioned);
        prop_assert!(err < TOL, "err {err:e}");
    }
}

#[test]
fn grad_check_skips_probes_across_relu_kinks() {
    let mut ps = ParamSet::new();
    for (i, v) in [3e-6, -4e-6, 0.5, -0.7].into_iter().enumerate() {
        ps.insert(format!("t{i}"), Tensor::scalar(v)).unwrap();
    }
    let r = grad_check(&ps, 4, 1e-5, 2, |t, v| {
        let mut acc = t.relu(v[0])?;
        for &x in &v[1..] {
            let y = t.relu(x)?;
            acc = t.add(acc, y)?;
        }
        Ok(acc)
    })
    .unwrap();
    assert!(r.skipped_kinks >= 2, "{r:?}");
    assert_eq!(r.probes, 4);
    assert!(r.max_rel_error < 1e-9, "{r:?}");
}
