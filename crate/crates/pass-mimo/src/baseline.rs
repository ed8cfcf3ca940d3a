//! Fixed-antenna reference systems for comparison runs.
//!
//! Two fully digital baselines bracket the reconfigurable-element designs: a
//! conventional array with one antenna per RF chain (`A = M`) and a massive
//! array with as many antennas as the reconfigurable system has elements
//! (`A = M * N`). Both use a half-wavelength uniform linear array placed at
//! the region center, the same free-space line-of-sight channel law as the
//! waveguide model, the same fractional-programming precoding on the
//! downlink, and the same MMSE detection on the uplink. Only the channel
//! construction differs — the locations are fixed, so the placement sweeps
//! are skipped and the rate code paths are shared.

use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::config::{ScenarioConfig, UserLayout};
use crate::downlink_fp::{
    run_fp_fixed_channel, scale_to_power, weighted_sum_rate_dl, PrecoderMatrix,
};
use crate::error::{PassError, Result};
use crate::trace::ConvergenceTrace;
use crate::uplink::{mmse_detector, uplink_sum_rate_detfree, ReceiverMatrix};

/// A fixed half-wavelength uniform linear array and its channel.
///
/// The antennas sit on a line parallel to the y-axis through the region
/// center `[D_x/2, D_y/2, a]`, symmetric about it, with adjacent spacing
/// `lambda/2`. Entry `(i, k)` of the channel follows the free-space
/// line-of-sight law `xi * alpha_k * exp(-j kappa D_ik) / D_ik` with `D_ik`
/// the antenna-user distance. Each antenna is fed directly by an RF chain,
/// so the waveguide-specific pieces of the element model — the in-guide
/// propagation phase and the `1/sqrt(N)` power split — do not appear.
#[derive(Debug, Clone)]
pub struct UlaChannel {
    /// Antenna coordinates, one `[x, y, z]` triple per antenna.
    pub positions: Vec<[f64; 3]>,
    /// `A x K` channel matrix (antennas by users).
    pub matrix: ChannelMatrix,
}

/// Builds the centered half-wavelength array and its channel for the given
/// user layout. Deterministic: identical inputs give byte-identical output.
pub fn ula_channel(
    config: &ScenarioConfig,
    users: &UserLayout,
    antenna_count: usize,
) -> Result<UlaChannel> {
    if antenna_count == 0 {
        return Err(PassError::Argument(
            "baseline array needs at least one antenna".into(),
        ));
    }
    users.validate(config)?;
    let half_wave = config.wavelength() / 2.0;
    let center_x = config.region_x / 2.0;
    let center_y = config.region_y / 2.0;
    let mid = (antenna_count - 1) as f64 / 2.0;
    let positions: Vec<[f64; 3]> = (0..antenna_count)
        .map(|i| [center_x, center_y + (i as f64 - mid) * half_wave, config.height])
        .collect();

    let xi = config.aperture_coeff();
    let kappa = config.wave_number();
    let matrix = ChannelMatrix::from_fn(antenna_count, users.len(), |i, k| {
        let user = users.positions[k];
        let dx = positions[i][0] - user[0];
        let dy = positions[i][1] - user[1];
        let dist = (dx * dx + dy * dy + config.height * config.height).sqrt();
        Complex64::from_polar(xi * config.shadowing[k] / dist, -kappa * dist)
    });
    Ok(UlaChannel { positions, matrix })
}

/// Finished downlink baseline: precoder, rate, and the digital-iteration
/// trace.
#[derive(Debug, Clone)]
pub struct BaselineDlRun {
    /// The fixed array and channel the run used.
    pub channel: UlaChannel,
    /// Final precoder, scaled exactly onto the power budget.
    pub precoder: PrecoderMatrix,
    /// Weighted sum-rate of the final precoder (nats).
    pub sum_rate_nats: f64,
    /// Per-iteration weighted sum-rate. Columns: `iter`, `objective_nats`,
    /// `objective_bits`, `wall_ms`.
    pub trace: ConvergenceTrace,
    /// Digital iterations executed.
    pub iterations: usize,
}

/// Downlink baseline: fractional-programming precoding on the fixed array
/// channel, started from the power-scaled conjugate (matched-filter)
/// precoder.
///
/// Runs exactly the digital half of the reconfigurable-element solver — the
/// same auxiliary and precoder updates, with the placement sweep absent
/// because there is nothing to place.
pub fn run_baseline_dl(
    config: &ScenarioConfig,
    users: &UserLayout,
    antenna_count: usize,
) -> Result<BaselineDlRun> {
    config.validate()?;
    let channel = ula_channel(config, users, antenna_count)?;
    let init = scale_to_power(&channel.matrix.map(|z| z.conj()), config.power_dl)?;
    let (precoder, trace, iterations) = run_fp_fixed_channel(
        &channel.matrix,
        &init,
        config.noise_dl,
        config.power_dl,
        &config.weights_dl,
        config.epsilon,
    )?;
    let sum_rate_nats =
        weighted_sum_rate_dl(&channel.matrix, &precoder, config.noise_dl, &config.weights_dl);
    Ok(BaselineDlRun {
        channel,
        precoder,
        sum_rate_nats,
        trace,
        iterations,
    })
}

/// Finished uplink baseline: MMSE receiver bank and rate.
#[derive(Debug, Clone)]
pub struct BaselineUlRun {
    /// The fixed array and channel the run used.
    pub channel: UlaChannel,
    /// MMSE receiver bank for the array channel.
    pub receiver: ReceiverMatrix,
    /// Weighted sum-rate (nats).
    pub sum_rate_nats: f64,
}

/// Uplink baseline: MMSE detection on the fixed array channel; rate via the
/// determinant-free weighted sum-rate.
pub fn run_baseline_ul(
    config: &ScenarioConfig,
    users: &UserLayout,
    antenna_count: usize,
) -> Result<BaselineUlRun> {
    config.validate()?;
    let channel = ula_channel(config, users, antenna_count)?;
    let receiver = mmse_detector(&channel.matrix, config.power_ul, config.noise_ul)?;
    let sum_rate_nats = uplink_sum_rate_detfree(
        &channel.matrix,
        config.power_ul,
        config.noise_ul,
        &config.weights_ul,
    );
    Ok(BaselineUlRun {
        channel,
        receiver,
        sum_rate_nats,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::downlink_fp::{update_w_rzf, DualState};
    use crate::uplink::uplink_sum_rate_direct;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_users(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> UserLayout {
        UserLayout::from_xy(
            &(0..config.users)
                .map(|_| {
                    (
                        rng.gen::<f64>() * config.region_x,
                        rng.gen::<f64>() * config.region_y,
                    )
                })
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn single_antenna_sits_exactly_at_the_region_center() {
        let cfg = ScenarioConfig::default();
        let users = UserLayout::from_xy(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]);
        let ula = ula_channel(&cfg, &users, 1).unwrap();
        assert_eq!(ula.positions.len(), 1);
        assert_eq!(ula.positions[0][0], cfg.region_x / 2.0);
        assert_eq!(ula.positions[0][1], cfg.region_y / 2.0);
        assert_eq!(ula.positions[0][2], cfg.height);
    }

    #[test]
    fn adjacent_antennas_are_half_a_wavelength_apart_and_symmetric() {
        let cfg = ScenarioConfig::default();
        let users = UserLayout::from_xy(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]);
        for count in [2, 5, 8] {
            let ula = ula_channel(&cfg, &users, count).unwrap();
            let half_wave = cfg.wavelength() / 2.0;
            for pair in ula.positions.windows(2) {
                let gap = pair[1][1] - pair[0][1];
                assert!(
                    ((gap - half_wave) / half_wave).abs() < 1e-12,
                    "{count} antennas: spacing {gap} vs {half_wave}"
                );
                assert_eq!(pair[0][0], pair[1][0], "antennas share the x-coordinate");
                assert_eq!(pair[0][2], pair[1][2], "antennas share the height");
            }
            // Symmetry about the center: y_i and y_{A-1-i} average to D_y/2.
            for i in 0..count {
                let mirrored = 0.5 * (ula.positions[i][1] + ula.positions[count - 1 - i][1]);
                assert!((mirrored - cfg.region_y / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn user_under_the_center_antenna_sees_magnitude_xi_over_height() {
        let cfg = ScenarioConfig::default().with_users(1);
        let users = UserLayout::from_xy(&[(cfg.region_x / 2.0, cfg.region_y / 2.0)]);
        let ula = ula_channel(&cfg, &users, 5).unwrap();
        let magnitude = ula.matrix[(2, 0)].norm();
        let expected = cfg.aperture_coeff() / cfg.height;
        assert!(
            ((magnitude - expected) / expected).abs() < 1e-12,
            "center-antenna magnitude {magnitude} vs {expected}"
        );
    }

    #[test]
    fn channel_is_byte_identical_across_calls() {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let users = random_users(&cfg, &mut rng);
        let first = ula_channel(&cfg, &users, 7).unwrap();
        let second = ula_channel(&cfg, &users, 7).unwrap();
        for (a, b) in first.matrix.iter().zip(second.matrix.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn zero_antennas_is_rejected() {
        let cfg = ScenarioConfig::default();
        let users = UserLayout::from_xy(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]);
        assert!(matches!(
            ula_channel(&cfg, &users, 0),
            Err(PassError::Argument(_))
        ));
    }

    #[test]
    fn baseline_dl_reuses_the_digital_updates_bit_for_bit() {
        // Replaying the public auxiliary/precoder updates by hand must
        // reproduce the baseline's precoder exactly: same code path, frozen
        // channel.
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let users = random_users(&cfg, &mut rng);
        let run = run_baseline_dl(&cfg, &users, cfg.waveguides).unwrap();

        let channel = ula_channel(&cfg, &users, cfg.waveguides).unwrap();
        let mut w = scale_to_power(&channel.matrix.map(|z| z.conj()), cfg.power_dl).unwrap();
        for _ in 0..run.iterations {
            let dual = DualState::from_precoder(
                &channel.matrix,
                &w,
                cfg.noise_dl,
                cfg.power_dl,
                &cfg.weights_dl,
            )
            .unwrap();
            w = update_w_rzf(&channel.matrix, &dual, cfg.noise_dl, cfg.power_dl).unwrap();
        }
        let w = scale_to_power(&w, cfg.power_dl).unwrap();
        for (a, b) in run.precoder.iter().zip(w.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn baseline_dl_trace_is_monotone_and_rate_matches_the_trace() {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let users = random_users(&cfg, &mut rng);
        let run = run_baseline_dl(&cfg, &users, cfg.waveguides * cfg.elements).unwrap();
        let nats = run.trace.column("objective_nats").unwrap();
        for pair in nats.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9 * pair[0].abs(),
                "baseline trace decreased: {pair:?}"
            );
        }
        let last = nats.last().unwrap();
        assert!(((run.sum_rate_nats - last) / last).abs() < 1e-12);
        let power = run.precoder.norm_squared();
        assert!(((power - cfg.power_dl) / cfg.power_dl).abs() < 1e-9);
    }

    #[test]
    fn more_antennas_help_on_average_downlink() {
        let cfg = ScenarioConfig::default();
        let (mut small_total, mut large_total) = (0.0, 0.0);
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let users = random_users(&cfg, &mut rng);
            small_total += run_baseline_dl(&cfg, &users, cfg.waveguides)
                .unwrap()
                .sum_rate_nats;
            large_total += run_baseline_dl(&cfg, &users, cfg.waveguides * cfg.elements)
                .unwrap()
                .sum_rate_nats;
        }
        assert!(
            large_total > small_total,
            "massive array should beat the conventional one on average: {large_total} vs {small_total}"
        );
    }

    #[test]
    fn baseline_ul_single_user_is_the_matched_filter_rate() {
        let cfg = ScenarioConfig::default().with_users(1);
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let users = random_users(&cfg, &mut rng);
        let run = run_baseline_ul(&cfg, &users, 9).unwrap();
        let h = ula_channel(&cfg, &users, 9).unwrap().matrix;
        let expected = (1.0 + cfg.power_ul / cfg.noise_ul * h.norm_squared()).ln();
        assert!(((run.sum_rate_nats - expected) / expected).abs() < 1e-9);
    }

    #[test]
    fn baseline_ul_rate_agrees_with_the_direct_determinant_form() {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let users = random_users(&cfg, &mut rng);
        let run = run_baseline_ul(&cfg, &users, 10).unwrap();
        let direct = uplink_sum_rate_direct(
            &run.channel.matrix,
            cfg.power_ul,
            cfg.noise_ul,
            &cfg.weights_ul,
        );
        assert!(((run.sum_rate_nats - direct) / direct.abs().max(1e-12)).abs() < 1e-9);
    }

    #[test]
    fn more_antennas_help_on_average_uplink() {
        let cfg = ScenarioConfig::default();
        let (mut small_total, mut large_total) = (0.0, 0.0);
        for seed in 10..16 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let users = random_users(&cfg, &mut rng);
            small_total += run_baseline_ul(&cfg, &users, cfg.waveguides)
                .unwrap()
                .sum_rate_nats;
            large_total += run_baseline_ul(&cfg, &users, cfg.waveguides * cfg.elements)
                .unwrap()
                .sum_rate_nats;
        }
        assert!(
            large_total > small_total,
            "massive array should beat the conventional one on average: {large_total} vs {small_total}"
        );
    }
}
