use super::{per_sample_relative_l2, TrainError};
use crate::dataset::{Sample, SquarePulse};
use crate::hh::count_spikes;
use crate::models::{Model, ModelInput};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

pub const HISTOGRAM_WIDTH: f64 = 0.01;
pub const HISTOGRAM_MAX: f64 = 0.30;
/// Regular bins over `[0, HISTOGRAM_MAX]`; one overflow bin follows.
pub const HISTOGRAM_BINS: usize = 30;

const EVAL_CHUNK: usize = 100;

/// Per-sample relative ℓ² errors with summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub pulses: Vec<SquarePulse>,
    pub errors: Vec<f64>,
    pub spikes_true: Vec<usize>,
    pub spikes_pred: Vec<usize>,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// `HISTOGRAM_BINS` counts of width `HISTOGRAM_WIDTH`, then the count
    /// above `HISTOGRAM_MAX`
    pub histogram: Vec<usize>,
}

impl Evaluation {
    /// Statistics for precomputed predictions (mV), one row per sample.
    pub fn from_predictions(samples: &[Sample], predictions: &[Vec<f64>]) -> Result<Self, TrainError> {
        if samples.len() != predictions.len() || samples.is_empty() {
            return Err(TrainError::Shape(format!(
                "{} predictions for {} samples",
                predictions.len(),
                samples.len()
            )));
        }
        let n = samples[0].voltage.len();
        let target: Vec<f64> = samples.iter().flat_map(|s| s.voltage.iter().copied()).collect();
        let pred: Vec<f64> = predictions.iter().flat_map(|p| p.iter().copied()).collect();
        let errors = per_sample_relative_l2(&pred, &target, n)?;
        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        let mut histogram = vec![0; HISTOGRAM_BINS + 1];
        for &e in &errors {
            histogram[histogram_bin(e)] += 1;
        }
        Ok(Self {
            pulses: samples.iter().map(|s| s.pulse).collect(),
            spikes_true: samples.iter().map(|s| count_spikes(&s.voltage)).collect(),
            spikes_pred: predictions.iter().map(|p| count_spikes(p)).collect(),
            mean: errors.iter().sum::<f64>() / k as f64,
            median,
            max: sorted[k - 1],
            histogram,
            errors,
        })
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "sample_index,t_start,t_end,amplitude,rel_l2_error,spike_count_true,spike_count_pred")?;
        for (i, p) in self.pulses.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{:e},{},{}",
                p.t_start, p.t_end, p.amplitude, self.errors[i], self.spikes_true[i], self.spikes_pred[i]
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()
    }
}

/// Bin index for an error: `floor(e / width)` on `[0, max)`, the last regular
/// bin for exactly `max`, the overflow bin above.
pub(crate) fn histogram_bin(e: f64) -> usize {
    if e > HISTOGRAM_MAX || e.is_nan() {
        HISTOGRAM_BINS
    } else {
        ((e / HISTOGRAM_WIDTH) as usize).min(HISTOGRAM_BINS - 1)
    }
}

/// Predicts every sample (chunks evaluated in parallel, results in sample
/// order) and summarizes the relative ℓ² errors.
pub fn evaluate(model: &Model, samples: &[Sample], grid: &[f64]) -> Result<Evaluation, TrainError> {
    let chunks: Vec<Vec<Vec<f64>>> = samples
        .par_chunks(EVAL_CHUNK)
        .map(|c| model.predict(&ModelInput::from_samples(c, grid), EVAL_CHUNK))
        .collect::<Result<_, _>>()?;
    let predictions: Vec<Vec<f64>> = chunks.into_iter().flatten().collect();
    Evaluation::from_predictions(samples, &predictions)
}
