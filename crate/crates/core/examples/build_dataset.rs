//! Generate a small pulse dataset, write it in the binary format and read
//! it back.
//!
//!     cargo run --release --example build_dataset -- [n] [seed]

use hhop::dataset::{build_dataset, load_dataset, save_dataset, write_summary_csv};
use hhop::hh::count_spikes;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(50), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(7), |s| s.parse())?;

    let ds = build_dataset(n, seed)?;
    let dir = std::env::temp_dir().join(format!("hhop-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("pulses.hhop");
    save_dataset(&ds, &path)?;
    write_summary_csv(&ds, dir.join("pulses.summary.csv"))?;
    let back = load_dataset(&path)?;
    assert_eq!(back, ds);

    println!("{} train / {} test samples on {} grid points", ds.train.len(), ds.test.len(), ds.grid.len());
    println!("file {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    let silent = ds.iter().filter(|s| count_spikes(&s.voltage) == 0).count();
    println!("zero-spike fraction {:.3}", silent as f64 / ds.len() as f64);
    for s in ds.train.iter().take(5) {
        let p = s.pulse;
        println!(
            "  [{:6.2}, {:6.2}] ms  {:5.2} uA/cm2  -> {} spikes",
            p.t_start,
            p.t_end,
            p.amplitude,
            count_spikes(&s.voltage)
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
