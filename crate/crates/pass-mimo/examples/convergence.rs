//! Convergence of the three placement designs on one random scene.
//!
//! Runs the zero-forcing downlink design from a random feasible layout,
//! warm-starts the fractional-programming design from its output, and runs
//! the greedy uplink design from the same initial layout. Prints each
//! per-iteration trace so the monotone ascent (descent for the zero-forcing
//! power penalty) and the warm-start handoff are visible.
//!
//! Run with: cargo run --release --example convergence

use pass_mimo::channel::random_feasible_locations;
use pass_mimo::config::ScenarioConfig;
use pass_mimo::downlink_fp::run_fp_bcd;
use pass_mimo::downlink_zf::run_zf;
use pass_mimo::harness::sample_users_from;
use pass_mimo::uplink::run_greedy_uplink;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pass_mimo::Result<()> {
    let seed = 1;
    let config = ScenarioConfig {
        grid_points: 4096, // desk-scale search resolution
        ..ScenarioConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = sample_users_from(&config, &mut rng);
    let init = random_feasible_locations(&config, &mut rng)?;

    println!(
        "scene: {} waveguides x {} elements, {} users, seed {seed}, {}-point grid\n",
        config.waveguides, config.elements, config.users, config.grid_points
    );

    let zf = run_zf(&config, &users, &init)?;
    println!("zero-forcing downlink (placement minimizes the power penalty tr Gamma):");
    println!("{:>5} {:>14} {:>14}", "sweep", "tr Gamma", "bit/s/Hz");
    let tr = zf.trace.column("trace_gamma").unwrap();
    let zf_nats = zf.trace.column("sum_rate_nats").unwrap();
    for i in 0..zf.trace.len() {
        println!(
            "{:>5} {:>14.6e} {:>14.6}",
            i,
            tr[i],
            zf_nats[i] / std::f64::consts::LN_2
        );
    }

    let fp = run_fp_bcd(&config, &users, &zf.precoder, &zf.locations)?;
    println!("\nfractional-programming downlink, warm-started from the zero-forcing output:");
    println!("{:>5} {:>14}", "iter", "bit/s/Hz");
    let fp_bits = fp.trace.column("objective_bits").unwrap();
    for (i, bits) in fp_bits.iter().enumerate() {
        println!("{:>5} {:>14.6}", i, bits);
    }
    println!(
        "  (row 0 above equals the converged zero-forcing rate: {:.6} bit/s/Hz)",
        zf_nats.last().unwrap() / std::f64::consts::LN_2
    );

    let ul = run_greedy_uplink(&config, &users, &init)?;
    println!("\ngreedy uplink with MMSE detection:");
    println!("{:>5} {:>14}", "sweep", "bit/s/Hz");
    let ul_bits = ul.trace.column("sum_rate_bits").unwrap();
    for (i, bits) in ul_bits.iter().enumerate() {
        println!("{:>5} {:>14.6}", i, bits);
    }

    println!(
        "\nsummary: zf {:.4} -> fp {:.4} bit/s/Hz in {} iterations; uplink {:.4} bit/s/Hz in {} sweeps",
        zf_nats.last().unwrap() / std::f64::consts::LN_2,
        fp_bits.last().unwrap(),
        fp.iterations,
        ul_bits.last().unwrap(),
        ul.iterations
    );
    Ok(())
}
