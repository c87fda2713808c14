//! Central finite-difference check of tape gradients.

use super::{ParamSet, Tape, TensorError, Var};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub probes: usize,
    /// probes discarded because the step straddled a kink
    pub skipped_kinks: usize,
}

pub fn relative_error(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-12)
}

fn eval<F>(params: &ParamSet, f: &mut F) -> Result<f64, TensorError>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::no_grad();
    let vars = params.attach(&mut tape);
    let loss = f(&mut tape, &vars)?;
    tape.value(loss)
        .item()
        .ok_or_else(|| TensorError::NotScalar(tape.value(loss).shape().to_vec()))
}

/// Compares tape gradients of the scalar built by `f` against central
/// differences with step `step` on `probe_count` coordinates.
///
/// Every parameter tensor is probed once before the remaining probes are
/// drawn uniformly over all coordinates. Probes whose interval contains a
/// slope discontinuity (a ReLU switching, say) are counted in
/// `skipped_kinks` and redrawn, up to four attempts per requested probe.
/// Fails with
/// [`TensorError::NonDeterministic`] when two forward passes disagree.
pub fn grad_check<F>(
    params: &ParamSet,
    probe_count: usize,
    step: f64,
    seed: u64,
    mut f: F,
) -> Result<GradCheckReport, TensorError>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape);
    let loss = f(&mut tape, &vars)?;
    let base = tape.value(loss).item().ok_or_else(|| TensorError::NotScalar(tape.value(loss).shape().to_vec()))?;
    let grads = params.collect_grads(&tape.backward(loss)?, &vars);
    drop(tape);

    let again = eval(params, &mut f)?;
    if again.to_bits() != base.to_bits() {
        return Err(TensorError::NonDeterministic { first: base, second: again });
    }

    let total = params.scalar_count();
    if total == 0 {
        return Err(TensorError::Invalid("no parameters to check".into()));
    }
    let offsets: Vec<usize> = params
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.value.numel();
            Some(o)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first: Vec<(usize, usize)> = Vec::new();
    for (pi, p) in params.iter().enumerate() {
        if first.len() == probe_count {
            break;
        }
        if p.value.numel() > 0 {
            first.push((pi, rng.gen_range(0..p.value.numel())));
        }
    }
    first.reverse();

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        probes: 0,
        skipped_kinks: 0,
    };
    let max_attempts = probe_count.saturating_mul(MAX_ATTEMPT_FACTOR).max(probe_count);
    let mut attempts = 0;
    while report.probes < probe_count && attempts < max_attempts {
        attempts += 1;
        let (pi, idx) = first.pop().unwrap_or_else(|| {
            let flat = rng.gen_range(0..total);
            let pi = offsets.partition_point(|&o| o <= flat) - 1;
            (pi, flat - offsets[pi])
        });
        let orig = work.param(pi).value.data()[idx];
        let mut at = |x: f64, work: &mut ParamSet| -> Result<f64, TensorError> {
            work.value_mut(pi).data_mut()[idx] = x;
            eval(work, &mut f)
        };
        let up = at(orig + step, &mut work)?;
        let down = at(orig - step, &mut work)?;
        let up_half = at(orig + step / 2.0, &mut work)?;
        let down_half = at(orig - step / 2.0, &mut work)?;
        work.value_mut(pi).data_mut()[idx] = orig;
        if straddles_kink(base, up, down, up_half, down_half, step) {
            report.skipped_kinks += 1;
            continue;
        }
        report.probes += 1;
        let numeric = (up - down) / (2.0 * step);
        let analytic = grads[pi][idx];
        let err = relative_error(analytic, numeric);
        if err >= report.max_rel_error {
            report.max_rel_error = err;
            report.worst_param = work.param(pi).name.clone();
            report.worst_index = idx;
            report.analytic = analytic;
            report.numeric = numeric;
        }
    }
    Ok(report)
}

/// Relative change in the numeric derivative under step halving above which
/// a probe is not used as an oracle.
const STABILITY: f64 = 1e-6;
const MAX_ATTEMPT_FACTOR: usize = 4;

/// True when the probe interval contains a slope discontinuity, detected two
/// ways: the central difference moves under step halving (kink well inside
/// the interval), or the one-sided slope gap fails to halve with the step
/// (kink near the probe point, where it is `h f'' + O(h³)` for smooth `f`).
fn straddles_kink(f0: f64, up: f64, down: f64, up_half: f64, down_half: f64, h: f64) -> bool {
    let central = (up - down) / (2.0 * h);
    let central_half = (up_half - down_half) / h;
    let scale = central.abs().max(central_half.abs()).max(1e-12);
    if (central - central_half).abs() > STABILITY * scale {
        return true;
    }
    let gap = (up - f0) / h - (f0 - down) / h;
    let gap_half = (up_half - f0) / (h / 2.0) - (f0 - down_half) / (h / 2.0);
    gap.abs() > STABILITY * scale && (gap - 2.0 * gap_half).abs() > 0.25 * gap.abs()
}
