//! Uplink sum-rate as the user count grows past the number of RF chains.
//!
//! With `M` waveguides the receiver has `M` digital observations, so a bank
//! of linear MMSE filters separates up to `M` users cleanly. Moving the
//! elements concentrates gain on the served users but cannot add degrees of
//! freedom: past `K = M` the movable-element uplink loses rate quickly,
//! while the massive fixed array (many antennas, hence many observations)
//! degrades gracefully.
//!
//! Run with: cargo run --release --example uplink_users

use pass_mimo::config::ScenarioConfig;
use pass_mimo::harness::{aggregate, run_experiment, ExperimentSpec, Mode, Sweep, SweepAxis};

fn main() -> pass_mimo::Result<()> {
    let scenario = ScenarioConfig {
        grid_points: 1024,
        ..ScenarioConfig::default()
    };
    let seeds: Vec<u64> = (0..5).collect();
    let sweep = Sweep {
        axis: SweepAxis::Users,
        values: vec![2.0, 3.0, 4.0, 5.0, 6.0],
    };
    let modes = [Mode::UlMmse, Mode::UlBaselineMmimo, Mode::UlBaselineMimo];

    println!(
        "mean uplink sum-rate [bit/s/Hz] over {} seeds; {} waveguides / RF chains\n",
        seeds.len(),
        scenario.waveguides
    );
    print!("{:>8}", "users");
    for mode in modes {
        print!("{:>20}", mode.as_str());
    }
    println!();

    let mut tables = Vec::new();
    for mode in modes {
        let spec = ExperimentSpec {
            scenario: scenario.clone(),
            mode,
            seeds: seeds.clone(),
            sweep: Some(sweep.clone()),
        };
        tables.push(aggregate(&run_experiment(&spec)?));
    }
    for (i, &k) in sweep.values.iter().enumerate() {
        print!("{:>8}", k);
        for table in &tables {
            print!("{:>20.4}", table[i].mean_bits);
        }
        println!();
    }
    println!(
        "\nthe movable-element rate decays once K exceeds the {} RF chains; \
         the fixed massive array keeps more headroom",
        scenario.waveguides
    );
    Ok(())
}
