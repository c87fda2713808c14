//! Square-pulse datasets of paired (current, voltage) trajectories.
//!
//! Pulses are drawn from a ChaCha8 stream (`rand_chacha::ChaCha8Rng`), which
//! is the generator bound to format version 1. Floats are formed from the top
//! 53 bits of each `u64`, so a seed reproduces the same dataset on every
//! platform.

mod io;

pub use io::{export_csv, load_dataset, save_dataset, write_summary_csv, FORMAT_VERSION, MAGIC};

pub use crate::hh::SquarePulse;
use crate::hh::{self, HhError};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Normalization constants for the pulse encoding `(t_start, t_end, amplitude)`.
pub const ENCODING_SCALE: [f64; 3] = [100.0, 100.0, 10.0];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("simulation of pulse {pulse:?} failed: {source}")]
    Simulation {
        pulse: SquarePulse,
        #[source]
        source: HhError,
    },
    #[error("invalid dataset size: {0}")]
    InvalidSize(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("dataset file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("dataset checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed dataset: {0}")]
    Malformed(String),
}

/// One simulated pulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub pulse: SquarePulse,
    pub current: Vec<f64>,
    pub voltage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub format_version: u32,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All samples in generation order (train first).
    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().chain(self.test.iter())
    }
}

/// Uniform draw on `[0, 1)` from the top 53 bits of the next word.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two independent endpoints on `[0, 100]` ms (sorted) and an amplitude on
/// `[0, 10]` μA/cm².
pub fn sample_pulse(rng: &mut impl RngCore) -> SquarePulse {
    let u = uniform01(rng) * hh::T_END;
    let v = uniform01(rng) * hh::T_END;
    let amplitude = uniform01(rng) * hh::MAX_AMPLITUDE;
    SquarePulse {
        t_start: u.min(v),
        t_end: u.max(v),
        amplitude,
    }
}

/// Branch-network encoding, each component scaled to `[0, 1]`.
pub fn encode_pulse(p: &SquarePulse) -> [f64; 3] {
    [
        p.t_start / ENCODING_SCALE[0],
        p.t_end / ENCODING_SCALE[1],
        p.amplitude / ENCODING_SCALE[2],
    ]
}

pub fn decode_pulse(e: &[f64; 3]) -> SquarePulse {
    SquarePulse {
        t_start: e[0] * ENCODING_SCALE[0],
        t_end: e[1] * ENCODING_SCALE[1],
        amplitude: e[2] * ENCODING_SCALE[2],
    }
}

/// Samples the pulse on `grid` with half-open support `[t_start, t_end)`.
pub fn discretize_pulse(p: &SquarePulse, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&t| p.current_at(t)).collect()
}

/// Number of training samples for a dataset of `n_total` (80 % rounded down,
/// keeping both splits non-empty).
pub fn train_count(n_total: usize) -> usize {
    (n_total * 4 / 5).clamp(1, n_total.saturating_sub(1).max(1))
}

/// Simulates one pulse on `grid` with default parameters.
pub fn simulate_sample(pulse: SquarePulse, grid: &[f64]) -> Result<Sample, DatasetError> {
    let tr = hh::simulate_on(&pulse, grid).map_err(|source| DatasetError::Simulation { pulse, source })?;
    Ok(Sample {
        pulse,
        current: discretize_pulse(&pulse, grid),
        voltage: tr.v,
    })
}

/// Draws `n_total` pulses from `seed`, simulates them (in parallel, collected
/// in draw order) and splits the first 80 % into the training set.
pub fn build_dataset(n_total: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if n_total < 2 {
        return Err(DatasetError::InvalidSize(format!(
            "need at least 2 samples, got {n_total}"
        )));
    }
    let grid = hh::standard_grid();
    let mut rng = rng_from_seed(seed);
    let pulses: Vec<SquarePulse> = (0..n_total).map(|_| sample_pulse(&mut rng)).collect();
    let mut samples = pulses
        .into_par_iter()
        .map(|p| simulate_sample(p, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    let test = samples.split_off(train_count(n_total));
    Ok(Dataset {
        train: samples,
        test,
        grid,
        seed,
        format_version: FORMAT_VERSION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_pulse(&mut rng_from_seed(0));
        let b = sample_pulse(&mut rng_from_seed(0));
        assert_eq!(a, b);
        assert!(a.validate().is_ok());
        assert_ne!(a, sample_pulse(&mut rng_from_seed(1)));
    }

    #[test]
    fn mean_duration_matches_order_statistics() {
        let mut rng = rng_from_seed(11);
        let n = 10_000;
        let mean = (0..n).map(|_| sample_pulse(&mut rng).duration()).sum::<f64>() / n as f64;
        assert!((30.0..=36.7).contains(&mean), "{mean}");
    }

    #[test]
    fn amplitude_is_uniform_by_kolmogorov_smirnov() {
        let mut rng = rng_from_seed(12);
        let n = 10_000;
        let mut a: Vec<f64> = (0..n).map(|_| sample_pulse(&mut rng).amplitude).collect();
        a.sort_by(f64::total_cmp);
        let d = a
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let cdf = x / 10.0;
                (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.02, "KS statistic {d}");
    }

    #[test]
    fn encoding_examples() {
        let full = SquarePulse::new(0.0, 100.0, 10.0).unwrap();
        assert_eq!(encode_pulse(&full), [0.0, 1.0, 1.0]);
        let mid = SquarePulse::new(25.0, 75.0, 5.0).unwrap();
        assert_eq!(encode_pulse(&mid), [0.25, 0.75, 0.5]);
        assert_eq!(decode_pulse(&encode_pulse(&mid)), mid);
    }

    #[test]
    fn discretization_examples() {
        let grid = hh::standard_grid();
        let zero = SquarePulse::new(10.0, 50.0, 0.0).unwrap();
        assert!(discretize_pulse(&zero, &grid).iter().all(|&x| x == 0.0));
        let full = SquarePulse::new(0.0, 100.0, 3.0).unwrap();
        let d = discretize_pulse(&full, &grid);
        assert!(d[..499].iter().all(|&x| x == 3.0));
        assert_eq!(d[499], 0.0);
    }

    #[test]
    fn split_sizes() {
        assert_eq!(train_count(2000), 1600);
        assert_eq!(train_count(10), 8);
        assert_eq!(train_count(2), 1);
        assert_eq!(train_count(3), 2);
        assert!(build_dataset(1, 0).is_err());
    }

    #[test]
    fn small_build_is_reproducible() {
        let a = build_dataset(6, 3).unwrap();
        let b = build_dataset(6, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.test.len()), (4, 2));
        for s in a.iter() {
            assert!(s.current.iter().all(|&c| c == 0.0 || c == s.pulse.amplitude));
            assert!(s.voltage.iter().all(|v| v.is_finite()));
        }
    }
}
