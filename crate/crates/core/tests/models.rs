mod common;

use hhop::autodiff::{gelu, grad_check, ParamSet, Tape, Tensor, TensorError, DEFAULT_STEP};
use hhop::hh::{standard_grid, uniform_grid, SquarePulse};
use hhop::models::{denormalize, grad_check_model, DeepOnetSpec, FnoSpec, Model, ModelError, ModelInput, ModelSpec, WnoSpec};

const GRAD_TOL: f64 = 1e-5;
const BILINEAR_TOL: f64 = 1e-10;

fn pulses() -> Vec<SquarePulse> {
    vec![
        SquarePulse::new(10.0, 45.0, 3.5).unwrap(),
        SquarePulse::new(2.0, 80.0, 7.25).unwrap(),
        SquarePulse::new(55.5, 60.0, 9.0).unwrap(),
    ]
}

fn small_fno(seed: u64) -> ModelSpec {
    ModelSpec::Fno(FnoSpec {
        width: 8,
        k_max: 4,
        projection: 16,
        seed,
        ..FnoSpec::default()
    })
}

fn small_wno(seed: u64) -> ModelSpec {
    ModelSpec::Wno(WnoSpec {
        width: 8,
        wavelet_order: 4,
        levels: 2,
        projection: 16,
        seed,
        ..WnoSpec::default()
    })
}

fn small_deeponet(seed: u64) -> ModelSpec {
    ModelSpec::Deeponet(DeepOnetSpec {
        width: 12,
        seed,
        ..DeepOnetSpec::default()
    })
}

fn forward_values(model: &Model, input: &ModelInput) -> Tensor {
    let mut tape = Tape::no_grad();
    let vars = model.params().attach(&mut tape);
    let y = model.forward(&mut tape, &vars, input).unwrap();
    tape.value(y).clone()
}

fn set(model: &mut Model, name: &str, f: impl Fn(usize) -> f64) {
    let i = model.params().position(name).unwrap_or_else(|| panic!("no parameter {name}"));
    for (j, x) in model.params_mut().value_mut(i).data_mut().iter_mut().enumerate() {
        *x = f(j);
    }
}

#[test]
fn builds_are_deterministic() {
    for spec in [small_fno(4), small_wno(4), small_deeponet(4)] {
        let a = Model::build(&spec).unwrap().to_checkpoint();
        let b = Model::build(&spec).unwrap().to_checkpoint();
        assert_eq!(a, b, "{}", spec.kind());
        let c = Model::build(&spec.with_seed(5)).unwrap().to_checkpoint();
        assert_ne!(a, c);
    }
}

#[test]
fn parameter_names_are_stable() {
    let m = Model::build(&small_fno(0)).unwrap();
    let names: Vec<&str> = m.params().names().collect();
    assert_eq!(names[..2], ["fno.lift.w", "fno.lift.b"]);
    assert!(names.contains(&"fno.layer2.R.imag"));
    assert_eq!(names.last(), Some(&"fno.proj2.b"));
    let d = Model::build(&small_deeponet(0)).unwrap();
    assert_eq!(d.params().names().last(), Some("deeponet.tau0"));
    assert!(d.params().get("deeponet.branch.3.a").is_some());
    assert!(d.params().get("deeponet.trunk.3.w").is_none());
}

#[test]
fn closed_form_counts() {
    let fno = ModelSpec::Fno(FnoSpec::default());
    let m = Model::build(&fno).unwrap();
    assert_eq!(m.param_count(), 3 * (2 * 16 * 32 * 32 + 32 * 32 + 32) + (2 * 32 + 32) + (32 * 128 + 128) + (128 + 1));
    assert_eq!(m.param_count(), 105_921);
    assert_eq!(fno.param_count(500).unwrap(), m.param_count());

    let don = ModelSpec::Deeponet(DeepOnetSpec::default());
    let count = don.param_count(500).unwrap();
    assert!((count as f64 / 3.4e6 - 1.0).abs() < 0.10, "{count}");
    assert_eq!(Model::build(&don).unwrap().param_count(), count);

    for spec in [small_wno(0), small_deeponet(0), small_fno(0)] {
        assert_eq!(Model::build(&spec).unwrap().param_count(), spec.param_count(500).unwrap(), "{}", spec.kind());
    }
    let bare = ModelSpec::Deeponet(DeepOnetSpec {
        width: 5,
        latent: Some(3),
        use_layer_norm: false,
        adaptive_activation: false,
        ..DeepOnetSpec::default()
    });
    assert_eq!(Model::build(&bare).unwrap().param_count(), bare.param_count(500).unwrap());
}

#[test]
fn single_linear_layer_count() {
    let w = 7;
    let mut p = ParamSet::new();
    p.insert("w", Tensor::zeros(&[w, w])).unwrap();
    p.insert("b", Tensor::zeros(&[w])).unwrap();
    assert_eq!(p.scalar_count(), w * w + w);
}

#[test]
#[ignore = "width-64 WNO with db24/4 levels has ζ=75 and 942,721 parameters, far below the expected 13M"]
fn wno_width_64_near_13m_parameters() {
    let spec = ModelSpec::Wno(WnoSpec {
        width: 64,
        ..WnoSpec::default()
    });
    let count = spec.param_count(500).unwrap();
    assert!((count as f64 / 13e6 - 1.0).abs() < 0.25, "{count}");
}

#[test]
fn deeponet_constant_when_only_tau0_is_set() {
    let mut m = Model::build(&small_deeponet(1)).unwrap();
    let names: Vec<String> = m.params().names().map(String::from).collect();
    for n in &names {
        set(&mut m, n, |_| 0.0);
    }
    set(&mut m, "deeponet.tau0", |_| 0.37);
    for b in [1, 3] {
        let input = ModelInput::from_pulses(&pulses()[..b], &standard_grid());
        let y = forward_values(&m, &input);
        assert_eq!(y.shape(), [b, 500]);
        assert!(y.data().iter().all(|&v| v == 0.37));
    }
}

#[test]
fn fno_constant_with_zero_kernels() {
    let mut m = Model::build(&small_fno(2)).unwrap();
    for l in 0..3 {
        for part in ["R.real", "R.imag", "W.w", "W.b"] {
            set(&mut m, &format!("fno.layer{l}.{part}"), |_| 0.0);
        }
    }
    set(&mut m, "fno.proj1.w", |_| 0.0);
    set(&mut m, "fno.proj2.b", |_| -0.4);
    let y = forward_values(&m, &ModelInput::from_pulses(&pulses(), &standard_grid()));
    assert_eq!(y.shape(), [3, 500]);
    assert!(y.data().iter().all(|&v| v == -0.4));
}

#[test]
fn fno_batch_permutation_equivariance() {
    let m = Model::build(&small_fno(3)).unwrap();
    let p = pulses();
    let grid = standard_grid();
    let y = forward_values(&m, &ModelInput::from_pulses(&p, &grid));
    let perm = [2, 0, 1];
    let q: Vec<SquarePulse> = perm.iter().map(|&i| p[i]).collect();
    let yp = forward_values(&m, &ModelInput::from_pulses(&q, &grid));
    for (r, &i) in perm.iter().enumerate() {
        for j in 0..500 {
            let (a, b) = (yp.data()[r * 500 + j], y.data()[i * 500 + j]);
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "row {r} col {j}: {a} vs {b}");
        }
    }
}

/// Pointwise affine map `x W + b` over rows of width `k`.
fn dense(x: &[f64], k: usize, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let m = w.shape()[1];
    x.chunks(k)
        .flat_map(|row| (0..m).map(move |j| b.data()[j] + (0..k).map(|i| row[i] * w.data()[i * m + j]).sum::<f64>()))
        .collect()
}

#[test]
fn wno_identity_kernel_reduces_to_pointwise_path() {
    let spec = small_wno(6);
    let mut m = Model::build(&spec).unwrap();
    let w = 8;
    for l in 0..3 {
        set(&mut m, &format!("wno.layer{l}.R"), |j| {
            let (o, i) = ((j / w) % w, j % w);
            f64::from(u8::from(o == i))
        });
        set(&mut m, &format!("wno.layer{l}.W.w"), |_| 0.0);
        set(&mut m, &format!("wno.layer{l}.W.b"), |_| 0.0);
    }
    let grid = standard_grid();
    let input = ModelInput::from_pulses(&pulses(), &grid);
    let y = forward_values(&m, &input);
    assert_eq!(y.shape(), [3, 500]);

    let p = |n: &str| m.params().get(n).unwrap().clone();
    let mut x = Vec::new();
    for row in input.current.data().chunks(500) {
        for (j, &i) in row.iter().enumerate() {
            x.extend([i / 10.0, grid[j] / 100.0]);
        }
    }
    let v = dense(&x, 2, &p("wno.lift.w"), &p("wno.lift.b"));
    let v: Vec<f64> = v.iter().map(|&a| gelu(gelu(a))).collect();
    let h: Vec<f64> = dense(&v, w, &p("wno.proj1.w"), &p("wno.proj1.b")).into_iter().map(gelu).collect();
    let out = dense(&h, 16, &p("wno.proj2.w"), &p("wno.proj2.b"));
    for (a, b) in y.data().iter().zip(&out) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn deeponet_decoder_is_bilinear() {
    let base = Model::build(&small_deeponet(7)).unwrap();
    let mut m = base.clone();
    set(&mut m, "deeponet.tau0", |_| 0.2);
    let input = ModelInput::from_pulses(&pulses(), &standard_grid());
    let y0 = forward_values(&m, &input);
    for net in ["branch", "trunk"] {
        for a in [-1.5, 0.0, 3.0] {
            let mut s = m.clone();
            for part in ["w", "b"] {
                let name = format!("deeponet.{net}.out.{part}");
                let orig = m.params().get(&name).unwrap().clone();
                set(&mut s, &name, |j| a * orig.data()[j]);
            }
            let y = forward_values(&s, &input);
            for (ya, yb) in y.data().iter().zip(y0.data()) {
                let want = a * (yb - 0.2);
                assert!(((ya - 0.2) - want).abs() <= BILINEAR_TOL * (1.0 + want.abs()), "{net} a={a}");
            }
        }
    }
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let input = ModelInput::from_pulses(&pulses()[..2], &standard_grid());
    let target = common::rand_tensor(&[2, 500], 17);
    for kind in ["fno", "wno", "deeponet"] {
        for seed in [11, 12] {
            let m = Model::build(&ModelSpec::reduced(kind).unwrap().with_seed(seed)).unwrap();
            let report = grad_check_model(&m, &input, &target, 80, seed).unwrap();
            assert_eq!(report.probes, 80, "{kind}/{seed}: {report:?}");
            assert!(
                report.max_rel_error < GRAD_TOL,
                "{kind}/{seed}: {} at {}[{}] analytic {} numeric {}",
                report.max_rel_error,
                report.worst_param,
                report.worst_index,
                report.analytic,
                report.numeric
            );
        }
    }
}

/// Uncentred MSE through `grad_check`. Two probes land on the lifting weight
/// and bias, whose gradients are large against round-off in an O(1) loss.
#[test]
fn plain_mse_gradcheck_on_lifting_weights() {
    let input = ModelInput::from_pulses(&pulses()[..2], &standard_grid());
    let target = common::rand_tensor(&[2, 500], 17);
    let m = Model::build(&small_fno(11)).unwrap();
    let report = grad_check(m.params(), 2, DEFAULT_STEP, 1, |tape, vars| {
        let y = m.forward(tape, vars, &input).map_err(|e| TensorError::Invalid(e.to_string()))?;
        let t = tape.constant(target.clone());
        let d = tape.sub(y, t)?;
        let d2 = tape.square(d)?;
        tape.mean(d2)
    })
    .unwrap();
    assert!(report.max_rel_error < GRAD_TOL, "{report:?}");
}

#[test]
fn forward_is_bit_deterministic() {
    let input = ModelInput::from_pulses(&pulses(), &standard_grid());
    for spec in [small_fno(1), small_wno(1), small_deeponet(1)] {
        let m = Model::build(&spec).unwrap();
        let a: Vec<u64> = forward_values(&m, &input).data().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = forward_values(&m, &input).data().iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn invalid_specs_rejected() {
    let too_many_modes = ModelSpec::Fno(FnoSpec {
        k_max: 252,
        ..FnoSpec::default()
    });
    assert!(matches!(Model::build(&too_many_modes), Err(ModelError::Spec(_))));
    assert!(Model::build(&ModelSpec::Fno(FnoSpec {
        k_max: 251,
        width: 2,
        ..FnoSpec::default()
    }))
    .is_ok());
    let deep = ModelSpec::Wno(WnoSpec {
        levels: 9,
        ..WnoSpec::default()
    });
    assert!(matches!(Model::build(&deep), Err(ModelError::Spectral(_))));
    let odd = ModelSpec::Wno(WnoSpec {
        wavelet_order: 5,
        ..WnoSpec::default()
    });
    assert!(Model::build(&odd).is_err());
    let zero = ModelSpec::Deeponet(DeepOnetSpec {
        width: 0,
        ..DeepOnetSpec::default()
    });
    assert!(matches!(Model::build(&zero), Err(ModelError::Spec(_))));
}

#[test]
fn spec_header_round_trip() {
    for spec in [small_fno(9), small_wno(9), small_deeponet(9)] {
        let text = spec.to_header();
        assert!(text.contains(&format!("kind = \"{}\"", spec.kind())), "{text}");
        assert_eq!(ModelSpec::from_header(&text).unwrap(), spec);
    }
    let partial = ModelSpec::from_header("kind = \"fno\"\nk_max = 8\n").unwrap();
    assert_eq!(
        partial,
        ModelSpec::Fno(FnoSpec {
            k_max: 8,
            ..FnoSpec::default()
        })
    );
    assert!(ModelSpec::from_header("kind = \"fno\"\nwidht = 8\n").is_err());
    assert!(ModelSpec::from_header("kind = \"cnn\"\n").is_err());
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let input = ModelInput::from_pulses(&pulses(), &standard_grid());
    for spec in [small_fno(8), small_wno(8), small_deeponet(8)] {
        let m = Model::build(&spec).unwrap();
        let path = dir.path().join(format!("{}.ckpt", spec.kind()));
        m.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.predict(&input, 2).unwrap(), back.predict(&input, 100).unwrap());
    }
    let fno = Model::build(&small_fno(0)).unwrap();
    let other = Model::build(&small_wno(0)).unwrap();
    assert!(matches!(
        Model::with_params(fno.spec(), other.params().clone()),
        Err(ModelError::Schema(_))
    ));
}

#[test]
fn predictions_are_denormalized() {
    let m = Model::build(&small_deeponet(5)).unwrap();
    let input = ModelInput::from_pulses(&pulses(), &standard_grid());
    let y = forward_values(&m, &input);
    let mv = m.predict(&input, 2).unwrap();
    assert_eq!(mv.len(), 3);
    for (row, chunk) in mv.iter().zip(y.data().chunks(500)) {
        for (a, &b) in row.iter().zip(chunk) {
            assert_eq!(*a, denormalize(b));
            assert!((a - (100.0 * b - 75.0)).abs() < 1e-12);
        }
    }
}

#[test]
fn fno_runs_on_a_coarser_grid() {
    let m = Model::build(&small_fno(0)).unwrap();
    let coarse = uniform_grid(250, 100.0);
    let y = forward_values(&m, &ModelInput::from_pulses(&pulses(), &coarse));
    assert_eq!(y.shape(), [3, 250]);
    let wno = Model::build(&small_wno(0)).unwrap();
    let mut tape = Tape::no_grad();
    let vars = wno.params().attach(&mut tape);
    assert!(wno.forward(&mut tape, &vars, &ModelInput::from_pulses(&pulses(), &coarse)).is_err());
}

#[test]
fn forward_rejects_wrong_var_count() {
    let m = Model::build(&small_fno(0)).unwrap();
    let mut tape = Tape::no_grad();
    let mut vars = m.params().attach(&mut tape);
    vars.pop();
    let input = ModelInput::from_pulses(&pulses(), &standard_grid());
    assert!(matches!(m.forward(&mut tape, &vars, &input), Err(ModelError::Input(_))));
}
