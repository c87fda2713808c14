//! Reverse-mode gradients on the tape, checked against central differences.
//!
//!     cargo run --release --example autodiff_basics

use hhop::autodiff::{grad_check, ParamSet, Tape, Tensor, DEFAULT_STEP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // y = mean(tanh(x W + b)^2) for a 4x3 input
    let x = Tensor::new(vec![4, 3], (0..12).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let mut params = ParamSet::new();
    params.insert("w", Tensor::new(vec![3, 2], vec![0.5, -0.3, 0.8, 0.1, -0.6, 0.4])?)?;
    params.insert("b", Tensor::vector(vec![0.05, -0.02]))?;

    let mut tape = Tape::new();
    let vars = params.attach(&mut tape);
    let xv = tape.constant(x.clone());
    let h = tape.linear(xv, vars[0], Some(vars[1]))?;
    let t = tape.tanh(h)?;
    let s = tape.square(t)?;
    let loss = tape.mean(s)?;
    println!("loss {:.6} with {} recorded nodes", tape.value(loss).item().unwrap_or(f64::NAN), tape.len());
    let grads = params.collect_grads(&tape.backward(loss)?, &vars);
    println!("dL/dw = {:?}", grads[0].iter().map(|g| format!("{g:.5}")).collect::<Vec<_>>());
    println!("dL/db = {:?}", grads[1].iter().map(|g| format!("{g:.5}")).collect::<Vec<_>>());

    let report = grad_check(&params, 8, DEFAULT_STEP, 1, |tape, vars| {
        let xv = tape.constant(x.clone());
        let h = tape.linear(xv, vars[0], Some(vars[1]))?;
        let t = tape.tanh(h)?;
        let s = tape.square(t)?;
        tape.mean(s)
    })?;
    println!(
        "finite differences: worst relative error {:.2e} over {} probes ({})",
        report.max_rel_error, report.probes, report.worst_param
    );
    Ok(())
}
