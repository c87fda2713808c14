//! Train an operator model on freshly simulated pulses and report the test
//! error distribution.
//!
//!     cargo run --release --example train_operator -- [fno|wno|deeponet] [epochs] [n]
//!
//! The defaults are small enough to finish in a few seconds; the reduced
//! model sizes are used unless the epoch count is at least 100.

use hhop::dataset::build_dataset;
use hhop::models::{DeepOnetSpec, FnoSpec, Model, ModelSpec, WnoSpec};
use hhop::training::{evaluate, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let kind = args.next().unwrap_or_else(|| "fno".to_string());
    let epochs: usize = args.next().map_or(Ok(10), |s| s.parse())?;
    let n: usize = args.next().map_or(Ok(100), |s| s.parse())?;

    let spec = if epochs >= 100 {
        match kind.as_str() {
            "fno" => ModelSpec::Fno(FnoSpec::default()),
            "wno" => ModelSpec::Wno(WnoSpec::default()),
            _ => ModelSpec::Deeponet(DeepOnetSpec {
                width: 400,
                ..DeepOnetSpec::default()
            }),
        }
    } else {
        ModelSpec::reduced(&kind)?
    };
    let ds = build_dataset(n, 11)?;
    let cfg = TrainConfig {
        epochs,
        batch_size: 20.min(ds.train.len()),
        ..TrainConfig::default()
    };
    let model = Model::build(&spec)?;
    println!("{} with {} parameters, {} train samples", spec.kind(), model.param_count(), ds.train.len());
    let outcome = train(model, &ds, &cfg, |ev| {
        let r = ev.record;
        if r.epoch == 1 || r.epoch % 5 == 0 {
            println!("epoch {:>4}  train {:.4}  test {:.4}  lr {:.2e}", r.epoch, r.train_loss, r.test_loss, r.lr);
        }
        Ok(())
    })?;
    let ev = evaluate(&outcome.best, &ds.test, &ds.grid)?;
    println!(
        "best epoch {:?}: test relative L2 mean {:.4}, median {:.4}, max {:.4}",
        outcome.best_epoch, ev.mean, ev.median, ev.max
    );
    let agree = ev.spikes_true.iter().zip(&ev.spikes_pred).filter(|(a, b)| a == b).count();
    println!("spike counts agree on {agree}/{} test pulses", ev.errors.len());
    Ok(())
}
