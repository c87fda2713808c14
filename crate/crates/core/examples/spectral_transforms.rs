//! Real FFT and Daubechies DWT round trips, and the two operator layers
//! built on them.
//!
//!     cargo run --release --example spectral_transforms

use hhop::autodiff::{Tape, Tensor};
use hhop::spectral::{dwt, idwt, irfft, rfft, spectral_conv, wavelet_conv, WaveletFilter, WaveletPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 500;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.05).sin() + 0.3 * (i as f64 * 0.71).cos()).collect();

    let spec = rfft(&x)?;
    let back = irfft(&spec, n)?;
    let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("rfft -> irfft on {n} points: {} bins, max error {err:.2e}", spec.len());

    for order in [1, 4, 24] {
        let f = WaveletFilter::daubechies(order)?;
        let p = dwt(&x, &f, 4)?;
        let y = idwt(&p, &f)?;
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("db{order:<2} 4 levels: coarse band {:>3}, reconstruction error {err:.2e}", p.approx.len());
    }

    // one sample, two channels
    let mut tape = Tape::no_grad();
    let data: Vec<f64> = x.iter().flat_map(|&v| [v, -0.5 * v]).collect();
    let xv = tape.constant(Tensor::new(vec![1, n, 2], data)?);
    let k_max = 8;
    let r_re = tape.constant(Tensor::full(&[k_max, 2, 2], 0.5));
    let r_im = tape.constant(Tensor::zeros(&[k_max, 2, 2]));
    let y = spectral_conv(&mut tape, xv, r_re, r_im, k_max)?;
    println!("spectral_conv output shape {:?}", tape.value(y).shape());

    let plan = WaveletPlan::cached(n, 24, 4)?;
    let zeta = plan.zeta;
    let r = tape.constant(Tensor::full(&[zeta, 2, 2], 0.25));
    let y = wavelet_conv(&mut tape, xv, r, &plan)?;
    println!("wavelet_conv with zeta = {zeta}: output shape {:?}", tape.value(y).shape());
    Ok(())
}
