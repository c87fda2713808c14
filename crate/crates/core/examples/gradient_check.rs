//! End-to-end finite-difference checks of reduced-size models.
//!
//!     cargo run --release --example gradient_check -- [probes]

use hhop::autodiff::Tensor;
use hhop::hh::{standard_grid, SquarePulse};
use hhop::models::{grad_check_model, Model, ModelInput, ModelSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let probes: usize = std::env::args().nth(1).map_or(Ok(40), |s| s.parse())?;
    let grid = standard_grid();
    let pulses = [SquarePulse::new(5.0, 70.0, 7.0)?, SquarePulse::new(50.0, 58.0, 3.0)?];
    let input = ModelInput::from_pulses(&pulses, &grid);
    let target = Tensor::full(&[2, grid.len()], 0.2);
    for kind in ["deeponet", "fno", "wno"] {
        let model = Model::build(&ModelSpec::reduced(kind)?)?;
        let r = grad_check_model(&model, &input, &target, probes, 3)?;
        println!(
            "{kind:<9} {:>6} params  worst relative error {:.2e} at {}[{}]  ({} kink probes skipped)",
            model.param_count(),
            r.max_rel_error,
            r.worst_param,
            r.worst_index,
            r.skipped_kinks
        );
    }
    Ok(())
}
