use super::TrainError;
use crate::autodiff::{Tape, Tensor, Var};
use crate::models::{VOLTAGE_OFFSET, VOLTAGE_SCALE};

fn norm(x: impl Iterator<Item = f64>) -> f64 {
    x.map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖pred_i − target_i‖ / ‖target_i‖` for each row of two `[B, n]` buffers.
pub fn per_sample_relative_l2(pred: &[f64], target: &[f64], n: usize) -> Result<Vec<f64>, TrainError> {
    if n == 0 || pred.len() != target.len() || target.len() % n != 0 {
        return Err(TrainError::Shape(format!(
            "prediction has {} values, target {} (rows of {n})",
            pred.len(),
            target.len()
        )));
    }
    pred.chunks(n)
        .zip(target.chunks(n))
        .enumerate()
        .map(|(i, (p, t))| {
            let tn = norm(t.iter().copied());
            if tn == 0.0 {
                return Err(TrainError::ZeroNormTarget(i));
            }
            Ok(norm(p.iter().zip(t).map(|(a, b)| a - b)) / tn)
        })
        .collect()
}

/// Mean over samples of the relative ℓ² error.
pub fn relative_l2(pred: &[f64], target: &[f64], n: usize) -> Result<f64, TrainError> {
    let e = per_sample_relative_l2(pred, target, n)?;
    if e.is_empty() {
        return Err(TrainError::Shape("empty batch".into()));
    }
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Differentiable relative ℓ² loss of a normalized prediction `[B, n]`
/// against targets in mV; the prediction is denormalized first.
pub fn relative_l2_loss(tape: &mut Tape, pred: Var, target_mv: &Tensor) -> Result<Var, TrainError> {
    let shape = tape.value(pred).shape().to_vec();
    if shape.len() != 2 || target_mv.shape() != shape.as_slice() {
        return Err(TrainError::Shape(format!(
            "prediction {shape:?} against target {:?}",
            target_mv.shape()
        )));
    }
    let n = shape[1];
    let inv: Vec<f64> = target_mv
        .data()
        .chunks(n)
        .enumerate()
        .map(|(i, t)| {
            let tn = norm(t.iter().copied());
            if tn == 0.0 {
                Err(TrainError::ZeroNormTarget(i))
            } else {
                Ok(1.0 / tn)
            }
        })
        .collect::<Result<_, _>>()?;
    let mv = tape.affine_scalar(pred, VOLTAGE_SCALE, VOLTAGE_OFFSET)?;
    let t = tape.constant(target_mv.clone());
    let d = tape.sub(mv, t)?;
    let sq = tape.square(d)?;
    let ss = tape.sum_last(sq)?;
    let norms = tape.sqrt(ss)?;
    let inv = tape.constant(Tensor::vector(inv));
    let rel = tape.mul(norms, inv)?;
    Ok(tape.mean(rel)?)
}
