use super::{per_sample_relative_l2, relative_l2_loss, AdamW, Plateau, TrainError};
use crate::autodiff::{Tape, Tensor};
use crate::dataset::{Dataset, Sample};
use crate::models::{Model, ModelInput, ModelSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial learning rate; `None` picks 7e-4 for FNO and 1e-3 otherwise.
    pub lr0: Option<f64>,
    pub weight_decay: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub seed: u64,
    /// Write a periodic checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    /// When false, `seconds` is recorded as 0 so histories compare exactly.
    pub record_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 100,
            lr0: None,
            weight_decay: 1e-4,
            plateau_patience: 10,
            plateau_factor: 0.9,
            seed: 0,
            checkpoint_every: 0,
            record_wall_clock: true,
        }
    }
}

impl TrainConfig {
    pub fn lr0_for(&self, spec: &ModelSpec) -> f64 {
        self.lr0.unwrap_or(match spec {
            ModelSpec::Fno(_) => 7e-4,
            _ => 1e-3,
        })
    }

    pub fn validate(&self, train_len: usize) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.batch_size == 0 || self.batch_size > train_len {
            return bad(format!("batch_size {} must be in 1..={train_len}", self.batch_size));
        }
        if let Some(lr) = self.lr0 {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("lr0 must be positive, got {lr}"));
            }
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau_factor must be in (0, 1), got {}", self.plateau_factor));
        }
        if self.plateau_patience == 0 {
            return bad("plateau_patience must be positive".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    /// learning rate used during this epoch
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,test_loss,lr,seconds")?;
        for r in &self.epochs {
            writeln!(w, "{},{:e},{:e},{:e},{:.3}", r.epoch, r.train_loss, r.test_loss, r.lr, r.seconds)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()
    }

    pub fn read_csv(text: &str) -> Result<Self, TrainError> {
        let mut epochs = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let num = |k: usize| -> Result<f64, TrainError> {
                f.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| TrainError::Config(format!("history line {}: bad field {k}", i + 1)))
            };
            epochs.push(EpochRecord {
                epoch: num(0)? as usize,
                train_loss: num(1)?,
                test_loss: num(2)?,
                lr: num(3)?,
                seconds: num(4)?,
            });
        }
        Ok(Self { epochs })
    }
}

/// Passed to the per-epoch callback after the record is appended.
pub struct EpochEvent<'a> {
    pub record: &'a EpochRecord,
    pub model: &'a Model,
    /// the epoch improved the best test loss
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// parameters with the lowest test loss seen (the initial model if no
    /// epoch ran)
    pub best: Model,
    pub last: Model,
    pub best_epoch: Option<usize>,
    pub best_test_loss: Option<f64>,
    pub history: History,
}

struct Split {
    input: ModelInput,
    target: Tensor,
}

fn split(samples: &[Sample], grid: &[f64]) -> Result<Split, TrainError> {
    let n = grid.len();
    let mut target = Vec::with_capacity(samples.len() * n);
    for s in samples {
        if s.voltage.len() != n {
            return Err(TrainError::Shape(format!("sample voltage has {} points, grid {n}", s.voltage.len())));
        }
        target.extend_from_slice(&s.voltage);
    }
    Ok(Split {
        input: ModelInput::from_samples(samples, grid),
        target: Tensor::new(vec![samples.len(), n], target)?,
    })
}

fn gather(s: &Split, idx: &[usize]) -> Result<(ModelInput, Tensor), TrainError> {
    let n = s.input.len();
    let mut enc = Vec::with_capacity(idx.len() * 3);
    let mut cur = Vec::with_capacity(idx.len() * n);
    let mut tgt = Vec::with_capacity(idx.len() * n);
    for &i in idx {
        enc.extend_from_slice(&s.input.encoded.data()[i * 3..(i + 1) * 3]);
        cur.extend_from_slice(&s.input.current.data()[i * n..(i + 1) * n]);
        tgt.extend_from_slice(&s.target.data()[i * n..(i + 1) * n]);
    }
    let b = idx.len();
    Ok((
        ModelInput {
            encoded: Tensor::new(vec![b, 3], enc)?,
            current: Tensor::new(vec![b, n], cur)?,
            grid: s.input.grid.clone(),
        },
        Tensor::new(vec![b, n], tgt)?,
    ))
}

/// Mean relative ℓ² error (mV) over a split, without gradient recording.
fn split_loss(model: &Model, s: &Split) -> Result<f64, TrainError> {
    let pred: Vec<f64> = model.predict(&s.input, 100)?.into_iter().flatten().collect();
    let e = per_sample_relative_l2(&pred, s.target.data(), s.input.len())?;
    Ok(e.iter().sum::<f64>() / e.len().max(1) as f64)
}

/// Mini-batch training with AdamW and a plateau schedule driven by the
/// train loss.
///
/// Each epoch shuffles the train indices with ChaCha8 seeded by
/// `cfg.seed + epoch`, steps once per batch (a short last batch is kept),
/// then evaluates the full test split. `on_epoch` runs after every epoch;
/// an error from it stops training.
pub fn train(
    model: Model,
    dataset: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochEvent) -> Result<(), TrainError>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate(dataset.train.len())?;
    if dataset.test.is_empty() {
        return Err(TrainError::Config("dataset has no test samples".into()));
    }
    let train_split = split(&dataset.train, &dataset.grid)?;
    let test_split = split(&dataset.test, &dataset.grid)?;
    let mut model = model;
    let mut opt = AdamW::new(model.params(), cfg.weight_decay);
    let mut sched = Plateau::new(cfg.lr0_for(model.spec()), cfg.plateau_factor, cfg.plateau_patience);
    let mut history = History::default();
    let mut best = model.clone();
    let mut best_epoch = None;
    let mut best_test_loss: Option<f64> = None;
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();

    for epoch in 1..=cfg.epochs {
        let clock = Instant::now();
        let lr = sched.lr();
        order.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (input, target) = gather(&train_split, idx)?;
            let mut tape = Tape::new();
            let vars = model.params().attach(&mut tape);
            let y = model.forward(&mut tape, &vars, &input)?;
            let loss = relative_l2_loss(&mut tape, y, &target)?;
            let value = tape.value(loss).item().unwrap_or(f64::NAN);
            if !value.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch,
                    loss: value,
                });
            }
            let grads = model.params().collect_grads(&tape.backward(loss)?, &vars);
            drop(tape);
            opt.step(model.params_mut(), &grads, lr)?;
            weighted += value * idx.len() as f64;
        }
        let train_loss = weighted / order.len() as f64;
        let test_loss = split_loss(&model, &test_split)?;
        if !test_loss.is_finite() {
            return Err(TrainError::NonFiniteTestLoss { epoch, loss: test_loss });
        }
        sched.observe(train_loss);
        let improved = best_test_loss.map_or(true, |b| test_loss < b);
        if improved {
            best = model.clone();
            best_epoch = Some(epoch);
            best_test_loss = Some(test_loss);
        }
        let seconds = if cfg.record_wall_clock {
            clock.elapsed().as_secs_f64()
        } else {
            0.0
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            test_loss,
            lr,
            seconds,
        });
        on_epoch(&EpochEvent {
            record: history.epochs.last().expect("just pushed"),
            model: &model,
            improved,
        })?;
    }
    Ok(TrainOutcome {
        best,
        last: model,
        best_epoch,
        best_test_loss,
        history,
    })
}
