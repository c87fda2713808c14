//! The `hhop` command line: dataset generation, training, evaluation,
//! simulation, threshold search and model gradient checks.
//!
//! Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or config
//! error. `HHOP_THREADS` sets the worker thread count.

mod config;

pub use config::{DatasetConfig, PathsConfig, RunConfig};

use crate::autodiff::{Backward, Tape, Tensor, TensorError, Var};
use crate::dataset::{build_dataset, load_dataset, rng_from_seed, save_dataset, uniform01, write_summary_csv, Dataset};
use crate::hh::{find_threshold, simulate, standard_grid, HhParams, HhState, SolverOptions, SquarePulse};
use crate::models::{grad_check_model_with, Model, ModelInput, ModelSpec};
use crate::training::{evaluate, train, Evaluation, TrainError, HISTOGRAM_BINS, HISTOGRAM_WIDTH};
use clap::{Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Worst relative error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

pub const THREADS_ENV: &str = "HHOP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hhop", version, about = "Operator learning for Hodgkin-Huxley pulse responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate random pulses and write a dataset file plus a summary CSV.
    GenData {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds; each run goes to `<out_dir>/seed-<S>`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Also write grid, true and predicted potential and current for one sample.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Simulate one square pulse on the standard grid.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        t0: f64,
        #[arg(long, allow_negative_numbers = true)]
        t1: f64,
        #[arg(long, allow_negative_numbers = true)]
        amp: f64,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest spiking amplitude for a pulse starting at 0.
    Threshold {
        #[arg(long, default_value_t = 100.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 10.0)]
        hi: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Finite-difference check of a reduced-size model.
    Gradcheck {
        #[arg(long, value_enum)]
        arch: Arch,
        #[arg(long, default_value_t = 60)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale the output adjoint by this factor (negative control).
        #[arg(long, hide = true)]
        inject_fault: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Arch {
    Deeponet,
    Fno,
    Wno,
}

impl Arch {
    fn name(self) -> &'static str {
        match self {
            Arch::Deeponet => "deeponet",
            Arch::Fno => "fno",
            Arch::Wno => "wno",
        }
    }
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn failure(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        Self::failure(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message);
        return e.code;
    }
    let result = match cli.command {
        Command::GenData { n, seed, out } => gen_data(n, seed, &out),
        Command::Train { config, seeds } => train_cmd(&config, seeds.as_deref()),
        Command::Eval {
            checkpoint,
            dataset,
            split,
            sample,
            out,
        } => eval_cmd(&checkpoint, &dataset, split, sample, &out),
        Command::Simulate { t0, t1, amp, out } => simulate_cmd(t0, t1, amp, out.as_deref()),
        Command::Threshold { duration, lo, hi, tol } => threshold_cmd(duration, lo, hi, tol),
        Command::Gradcheck {
            arch,
            probes,
            seed,
            inject_fault,
        } => gradcheck_cmd(arch, probes, seed, inject_fault),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).map_err(|e| CliError::failure(format!("{}: {e}", p.display())))
        }
        _ => Ok(()),
    }
}

/// `data.hhop` → `data.summary.csv`
pub fn summary_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("summary.csv")
}

fn gen_data(n: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let ds = build_dataset(n, seed).map_err(|e| match e {
        crate::dataset::DatasetError::InvalidSize(m) => CliError::usage(m),
        other => CliError::failure(other.to_string()),
    })?;
    write_dataset(&ds, out)?;
    let all: Vec<_> = ds.iter().collect();
    let silent = all.iter().filter(|s| crate::hh::count_spikes(&s.voltage) == 0).count();
    println!("wrote {} ({} train, {} test)", out.display(), ds.train.len(), ds.test.len());
    println!("summary {}", summary_path(out).display());
    println!("zero-spike fraction {:.4}", silent as f64 / all.len() as f64);
    Ok(())
}

fn write_dataset(ds: &Dataset, out: &Path) -> Result<(), CliError> {
    create_parent(out)?;
    save_dataset(ds, out)?;
    write_summary_csv(ds, summary_path(out))?;
    Ok(())
}

fn load_or_generate(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path = &cfg.paths.dataset;
    if path.exists() {
        return Ok(load_dataset(path).map_err(|e| CliError::failure(format!("{}: {e}", path.display())))?);
    }
    eprintln!(
        "dataset {} missing, generating n={} seed={}",
        path.display(),
        cfg.dataset.n,
        cfg.dataset.seed
    );
    let ds = build_dataset(cfg.dataset.n, cfg.dataset.seed)?;
    write_dataset(&ds, path)?;
    Ok(ds)
}

fn train_cmd(config: &Path, seeds: Option<&[u64]>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config).map_err(CliError::usage)?;
    let dataset = load_or_generate(&cfg)?;
    cfg.train
        .validate(dataset.train.len())
        .map_err(|e| CliError::usage(e.to_string()))?;
    let out_dir = &cfg.paths.out_dir;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml())?;

    let Some(seeds) = seeds else {
        train_one(&cfg, &dataset, out_dir)?;
        return Ok(());
    };
    if seeds.is_empty() {
        return Err(CliError::usage("--seeds needs at least one seed"));
    }
    let mut bests = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let mut run = cfg.clone();
        run.model = run.model.with_seed(s);
        run.train.seed = s;
        run.paths.out_dir = out_dir.join(format!("seed-{s}"));
        std::fs::create_dir_all(&run.paths.out_dir)?;
        std::fs::write(run.paths.out_dir.join("config.toml"), run.to_toml())?;
        let best = train_one(&run, &dataset, &run.paths.out_dir)?;
        println!("seed {s}: best test loss {best:.6}");
        bests.push(best);
    }
    let (mean, std) = mean_std(&bests);
    println!("test relative L2 {}", format_mean_std(mean, std));
    Ok(())
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `mean±std` with four decimals, e.g. `0.0143±0.0023`
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.4}±{std:.4}")
}

/// Trains one model into `dir`; returns the best test loss.
fn train_one(cfg: &RunConfig, dataset: &Dataset, dir: &Path) -> Result<f64, CliError> {
    let model = Model::build(&cfg.model)?;
    let history_path = dir.join("history.csv");
    let best_path = dir.join("best.ckpt");
    let every = cfg.train.checkpoint_every;
    eprintln!(
        "training {} ({} parameters) for {} epochs into {}",
        cfg.model.kind(),
        model.param_count(),
        cfg.train.epochs,
        dir.display()
    );
    let mut history = crate::training::History::default();
    let outcome = train(model, dataset, &cfg.train, |ev| {
        let r = ev.record;
        history.epochs.push(r.clone());
        history.save_csv(&history_path)?;
        if ev.improved {
            ev.model.save(&best_path)?;
        }
        if every > 0 && r.epoch % every == 0 {
            ev.model.save(dir.join(format!("epoch-{:05}.ckpt", r.epoch)))?;
        }
        eprintln!(
            "epoch {:>5}  train {:.6}  test {:.6}  lr {:.3e}  {:.2}s",
            r.epoch, r.train_loss, r.test_loss, r.lr, r.seconds
        );
        Ok(())
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(e @ (TrainError::Config(_) | TrainError::Shape(_))) => return Err(CliError::usage(e.to_string())),
        Err(e) => return Err(CliError::failure(format!("{e}; checkpoints in {} left as written", dir.display()))),
    };
    outcome.history.save_csv(&history_path)?;
    outcome.last.save(dir.join("last.ckpt"))?;
    if outcome.best_epoch.is_none() {
        outcome.best.save(&best_path)?;
    }
    let final_loss = outcome.history.epochs.last().map(|r| r.test_loss);
    match (final_loss, outcome.best_test_loss, outcome.best_epoch) {
        (Some(f), Some(b), Some(e)) => {
            println!("final test loss {f:.6}");
            println!("best test loss {b:.6} at epoch {e}");
            Ok(b)
        }
        _ => {
            println!("no epochs run");
            Ok(f64::NAN)
        }
    }
}

fn eval_cmd(checkpoint: &Path, dataset: &Path, split: SplitArg, sample: Option<usize>, out: &Path) -> Result<(), CliError> {
    let model = Model::load(checkpoint).map_err(|e| CliError::failure(format!("{}: {e}", checkpoint.display())))?;
    let ds = load_dataset(dataset).map_err(|e| CliError::failure(format!("{}: {e}", dataset.display())))?;
    let samples: Vec<_> = match split {
        SplitArg::Train => ds.train.clone(),
        SplitArg::Test => ds.test.clone(),
        SplitArg::All => ds.iter().cloned().collect(),
    };
    if let Some(i) = sample {
        if i >= samples.len() {
            return Err(CliError::usage(format!(
                "--sample {i} out of range for {} samples",
                samples.len()
            )));
        }
    }
    if samples.is_empty() {
        return Err(CliError::usage("selected split is empty"));
    }
    let ev = evaluate(&model, &samples, &ds.grid)?;
    std::fs::create_dir_all(out)?;
    ev.save_csv(out.join("eval.csv"))?;
    write_histogram(&ev, &out.join("histogram.csv"))?;
    if let Some(i) = sample {
        let s = &samples[i];
        let pred = model.predict(&ModelInput::from_samples(std::slice::from_ref(s), &ds.grid), 1)?;
        let path = out.join(format!("sample-{i}.csv"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "t,v_true,v_pred,i_app")?;
        for (k, t) in ds.grid.iter().enumerate() {
            writeln!(w, "{t},{},{},{}", s.voltage[k], pred[0][k], s.current[k])?;
        }
        w.flush()?;
        println!("sample {i} written to {}", path.display());
    }
    println!(
        "{} samples  mean {:.6}  median {:.6}  max {:.6}",
        samples.len(),
        ev.mean,
        ev.median,
        ev.max
    );
    Ok(())
}

/// `bin_lo,bin_hi,count`; the overflow row has `bin_hi = inf`.
fn write_histogram(ev: &Evaluation, path: &Path) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "bin_lo,bin_hi,count")?;
    for (b, c) in ev.histogram.iter().enumerate() {
        let lo = b as f64 * HISTOGRAM_WIDTH;
        if b < HISTOGRAM_BINS {
            writeln!(w, "{lo:.2},{:.2},{c}", lo + HISTOGRAM_WIDTH)?;
        } else {
            writeln!(w, "{lo:.2},inf,{c}")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn simulate_cmd(t0: f64, t1: f64, amp: f64, out: Option<&Path>) -> Result<(), CliError> {
    let pulse = SquarePulse::new(t0, t1, amp).map_err(|e| CliError::usage(e.to_string()))?;
    let grid = standard_grid();
    let traj = simulate(
        &pulse,
        &HhParams::default(),
        &HhState::default(),
        &grid,
        &SolverOptions::default().with_gating(),
    )?;
    let gating = traj.gating.as_ref().expect("gating requested");
    let mut buf = Vec::new();
    writeln!(buf, "t,v,m,h,n,i_app")?;
    for (k, t) in traj.grid.iter().enumerate() {
        let [m, h, n] = gating[k];
        writeln!(buf, "{t},{},{m},{h},{n},{}", traj.v[k], pulse.current_at(*t))?;
    }
    match out {
        Some(p) => {
            create_parent(p)?;
            std::fs::write(p, buf)?;
            println!("wrote {} points to {}", traj.grid.len(), p.display());
        }
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn threshold_cmd(duration: f64, lo: f64, hi: f64, tol: f64) -> Result<(), CliError> {
    let th = find_threshold(duration, lo, hi, tol).map_err(|e| match e {
        crate::hh::HhError::Bracket { .. } | crate::hh::HhError::InvalidPulse(_) => CliError::usage(e.to_string()),
        other => CliError::failure(other.to_string()),
    })?;
    println!("{th:.4}");
    Ok(())
}

/// Identity in the forward pass, adjoint scaled by `factor`.
struct FaultyIdentity {
    factor: f64,
}

impl Backward for FaultyIdentity {
    fn name(&self) -> &'static str {
        "faulty_identity"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &[f64], needs: &[bool]) -> Vec<Option<Vec<f64>>> {
        vec![needs[0].then(|| grad.iter().map(|g| g * self.factor).collect())]
    }
}

fn faulty_identity(tape: &mut Tape, x: Var, factor: f64) -> Result<Var, TensorError> {
    let value = tape.value(x).clone();
    tape.push(value, &[x], FaultyIdentity { factor })
}

/// Two fixed pulses evaluated on the standard grid.
fn gradcheck_input() -> ModelInput {
    let pulses = [
        SquarePulse::new(12.0, 61.0, 6.5).expect("valid pulse"),
        SquarePulse::new(30.0, 45.0, 1.5).expect("valid pulse"),
    ];
    ModelInput::from_pulses(&pulses, &standard_grid())
}

fn gradcheck_cmd(arch: Arch, probes: usize, seed: u64, fault: Option<f64>) -> Result<(), CliError> {
    if probes == 0 {
        return Err(CliError::usage("--probes must be positive"));
    }
    let spec = ModelSpec::reduced(arch.name())?.with_seed(seed);
    let model = Model::build(&spec)?;
    let input = gradcheck_input();
    let mut rng = rng_from_seed(seed ^ 0x9e37_79b9_7f4a_7c15);
    let target = Tensor::new(
        vec![input.batch_size(), input.len()],
        (0..input.batch_size() * input.len()).map(|_| uniform01(&mut rng)).collect(),
    )?;
    let report = grad_check_model_with(&model, &input, &target, probes, seed, |tape, y| match fault {
        Some(f) => faulty_identity(tape, y, f),
        None => Ok(y),
    })?;
    println!(
        "{}: {} parameters, {} probes ({} skipped at kinks), worst relative error {:.3e} at {}[{}]",
        arch.name(),
        model.param_count(),
        report.probes,
        report.skipped_kinks,
        report.max_rel_error,
        report.worst_param,
        report.worst_index
    );
    if report.max_rel_error < GRADCHECK_TOLERANCE {
        println!("PASS");
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "gradient mismatch in parameter {} (relative error {:.3e}, analytic {:.6e}, numeric {:.6e})",
            report.worst_param, report.max_rel_error, report.analytic, report.numeric
        )))
    }
}
