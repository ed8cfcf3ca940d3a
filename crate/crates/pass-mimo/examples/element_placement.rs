//! Where the placement search actually puts the elements.
//!
//! Two scenes make the geometry visible. First, a single user and one
//! element per waveguide: every element lands on the grid point nearest the
//! user's x-coordinate, the position that minimizes the path length. Then a
//! two-user scene with several elements per waveguide: the elements split
//! between the users' neighborhoods, spaced at least half a wavelength
//! apart along each guide.
//!
//! Run with: cargo run --release --example element_placement

use pass_mimo::channel::random_feasible_locations;
use pass_mimo::config::{ScenarioConfig, UserLayout};
use pass_mimo::downlink_zf::run_zf;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn print_locations(label: &str, locations: &pass_mimo::LocationMatrix) {
    println!("{label}");
    for m in 0..locations.ncols() {
        let column: Vec<String> = (0..locations.nrows())
            .map(|n| format!("{:8.3}", locations[(n, m)]))
            .collect();
        println!("  waveguide {m}: [{}] m", column.join(", "));
    }
}

fn main() -> pass_mimo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // One user, one element per waveguide.
    let single = ScenarioConfig {
        waveguides: 3,
        elements: 1,
        grid_points: 2001, // 25 mm steps over the 50 m guide
        ..ScenarioConfig::default()
    }
    .with_users(1);
    let user_x = 17.31;
    let users = UserLayout::from_xy(&[(user_x, 2.0)]);
    let init = random_feasible_locations(&single, &mut rng)?;
    let run = run_zf(&single, &users, &init)?;
    println!("single user at x = {user_x} m:");
    print_locations("final element positions", &run.locations);
    let step = single.guide_length() / (single.grid_points - 1) as f64;
    println!(
        "  nearest grid point to the user: {:.3} m (grid step {:.3} m)\n",
        (user_x / step).round() * step,
        step
    );

    // Two users, several elements per waveguide.
    let double = ScenarioConfig {
        waveguides: 3,
        elements: 4,
        grid_points: 2001,
        ..ScenarioConfig::default()
    }
    .with_users(2);
    let users = UserLayout::from_xy(&[(10.0, 1.0), (40.0, 5.0)]);
    let init = random_feasible_locations(&double, &mut rng)?;
    let run = run_zf(&double, &users, &init)?;
    println!("two users at x = 10 m and x = 40 m:");
    print_locations("final element positions", &run.locations);
    println!(
        "  minimum spacing on a guide must stay >= {:.4} m (half a wavelength)",
        double.min_spacing()
    );
    let mut tightest = f64::INFINITY;
    for m in 0..double.waveguides {
        let mut column: Vec<f64> = (0..double.elements).map(|n| run.locations[(n, m)]).collect();
        column.sort_by(f64::total_cmp);
        for pair in column.windows(2) {
            tightest = tightest.min(pair[1] - pair[0]);
        }
    }
    println!("  tightest spacing in this solution: {tightest:.4} m");
    Ok(())
}
