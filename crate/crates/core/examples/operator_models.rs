//! The three operator architectures at their default sizes: parameter
//! counts, a forward pass on two pulses and a checkpoint round trip.
//!
//!     cargo run --release --example operator_models

use hhop::hh::{standard_grid, SquarePulse};
use hhop::models::{DeepOnetSpec, FnoSpec, Model, ModelInput, ModelSpec, WnoSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = standard_grid();
    let pulses = [SquarePulse::new(10.0, 60.0, 5.0)?, SquarePulse::new(40.0, 45.0, 2.0)?];
    let input = ModelInput::from_pulses(&pulses, &grid);
    let specs = [
        ModelSpec::Deeponet(DeepOnetSpec {
            width: 100,
            ..DeepOnetSpec::default()
        }),
        ModelSpec::Fno(FnoSpec::default()),
        ModelSpec::Wno(WnoSpec::default()),
    ];
    let dir = std::env::temp_dir().join(format!("hhop-models-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    for spec in specs {
        let model = Model::build(&spec)?;
        let t = std::time::Instant::now();
        let v = model.predict(&input, 2)?;
        let elapsed = t.elapsed();
        let path = dir.join(format!("{}.ckpt", spec.kind()));
        model.save(&path)?;
        let loaded = Model::load(&path)?;
        assert_eq!(loaded.predict(&input, 2)?, v);
        println!(
            "{:<9} {:>9} parameters  forward {:>6.1} ms  untrained V(50 ms) = {:.2} mV",
            spec.kind(),
            model.param_count(),
            elapsed.as_secs_f64() * 1e3,
            v[0][250]
        );
    }
    println!("header of the FNO checkpoint:\n{}", ModelSpec::Fno(FnoSpec::default()).to_header());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
