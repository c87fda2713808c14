//! Response of the squid axon to a few square pulses, and the spiking
//! threshold of a sustained pulse.
//!
//!     cargo run --release --example simulate_pulse

use hhop::hh::{count_spikes, find_threshold, simulate, standard_grid, HhParams, HhState, SolverOptions, SquarePulse};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = standard_grid();
    let opts = SolverOptions::default().with_gating();
    for (t0, t1, amp) in [(10.0, 60.0, 1.0), (10.0, 60.0, 3.0), (10.0, 90.0, 8.0), (20.0, 22.0, 9.5)] {
        let pulse = SquarePulse::new(t0, t1, amp)?;
        let traj = simulate(&pulse, &HhParams::default(), &HhState::default(), &grid, &opts)?;
        let peak = traj.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n_max = traj.gating.as_ref().map_or(0.0, |g| g.iter().map(|s| s[2]).fold(0.0, f64::max));
        println!(
            "pulse [{t0:>4}, {t1:>4}] ms at {amp:>4} uA/cm2: {} spikes, peak {peak:7.2} mV, max n {n_max:.3}",
            count_spikes(&traj.v)
        );
    }
    let th = find_threshold(100.0, 0.0, 10.0, 1e-3)?;
    println!("threshold of a 100 ms pulse: {th:.4} uA/cm2");
    Ok(())
}
