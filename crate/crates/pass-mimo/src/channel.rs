//! Channel synthesis for pinching-antenna arrays.
//!
//! Each waveguide `m` carries `N` pinching elements at tunable positions
//! `l_m = [ell_1 .. ell_N]`. An element at position `ell` radiates toward user
//! `k` with a free-space spherical-wave factor and an extra in-guide phase
//! proportional to `refractive_index * ell`; its contribution is
//!
//! ```text
//! pi(k, m, ell) = xi * alpha_k * exp(-j*kappa*(D(k,m,ell) + i_ref*ell)) / (sqrt(N) * D(k,m,ell))
//! ```
//!
//! where `D` is the element-to-user distance, `kappa` the wavenumber, and
//! `xi` the aperture coefficient. The effective waveguide-to-user channel is
//! the sum of the per-element contributions, and stacking those sums gives the
//! `M x K` channel matrix shared by the downlink and the (reciprocal) uplink.
//!
//! # Example
//! ```
//! use pass_mimo::config::{ScenarioConfig, UserLayout};
//! use pass_mimo::channel;
//! use rand::SeedableRng;
//!
//! let cfg = ScenarioConfig::desk();
//! let users = UserLayout::from_xy(&[(10.0, 1.0), (40.0, 5.0), (25.0, 3.0), (5.0, 2.0)]);
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let locs = channel::random_feasible_locations(&cfg, &mut rng).unwrap();
//! let g = channel::channel_matrix(&cfg, &users, &locs).unwrap();
//! assert_eq!((g.nrows(), g.ncols()), (cfg.waveguides, cfg.users));
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::config::{ScenarioConfig, UserLayout};
use crate::error::{PassError, Result};

/// Pinching-element positions: an `N x M` real matrix whose column `m` holds
/// the element positions on waveguide `m`, each in `[0, guide_length]`.
pub type LocationMatrix = DMatrix<f64>;

/// Effective waveguide-to-user channels: an `M x K` complex matrix whose
/// column `k` is user `k`'s channel vector and row `m` belongs to waveguide
/// `m`. The downlink and uplink share this one matrix by reciprocity.
pub type ChannelMatrix = DMatrix<Complex64>;

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Distance from the point at position `ell` on waveguide `m` (0-based) to
/// `user = [x, y, 0]`. Always at least the deployment height.
pub fn distance(config: &ScenarioConfig, user: [f64; 3], m: usize, ell: f64) -> f64 {
    let dx = ell - user[0];
    let dy = config.guide_y(m) - user[1];
    (dx * dx + dy * dy + config.height * config.height).sqrt()
}

/// Single-element channel contribution `pi(k, m, ell)` of one pinching
/// element at position `ell` on waveguide `m` toward user `k`.
///
/// The magnitude is `xi * alpha_k / (sqrt(N) * D)` and the phase is
/// `-(kappa) * (D + refractive_index * ell)`; no modular reduction is applied
/// to the phase argument (it stays far below the precision limit of `f64` at
/// realistic scales).
pub fn pi_coeff(
    config: &ScenarioConfig,
    users: &UserLayout,
    k: usize,
    m: usize,
    ell: f64,
) -> Complex64 {
    let d = distance(config, users.positions[k], m, ell);
    let magnitude =
        config.aperture_coeff() * config.shadowing[k] / ((config.elements as f64).sqrt() * d);
    let phase = -config.wave_number() * (d + config.refractive_index * ell);
    Complex64::from_polar(magnitude, phase)
}

// ---------------------------------------------------------------------------
// Feasibility of element layouts
// ---------------------------------------------------------------------------

/// True iff every position lies in `[0, guide_length]` and every pair of
/// positions is at least `min_spacing` apart (gap exactly equal to the
/// minimum is allowed).
pub fn is_feasible(config: &ScenarioConfig, l_m: &[f64]) -> bool {
    let len = config.guide_length();
    if l_m
        .iter()
        .any(|&x| !x.is_finite() || x < 0.0 || x > len)
    {
        return false;
    }
    let gap = config.min_spacing();
    for i in 0..l_m.len() {
        for j in (i + 1)..l_m.len() {
            if (l_m[i] - l_m[j]).abs() < gap {
                return false;
            }
        }
    }
    true
}

fn require_feasible(config: &ScenarioConfig, l_m: &[f64]) -> Result<()> {
    if is_feasible(config, l_m) {
        Ok(())
    } else {
        Err(PassError::InfeasibleLocations(format!(
            "column {l_m:?} violates the waveguide bounds or the {:.6} m minimum spacing",
            config.min_spacing()
        )))
    }
}

// ---------------------------------------------------------------------------
// Effective channels
// ---------------------------------------------------------------------------

/// Sums the per-element contributions without a feasibility check.
///
/// The terms are accumulated in ascending order of position so that two
/// layouts that differ only by a within-column reordering produce the exact
/// same floating-point value (reordering a float sum would otherwise change
/// the last bits).
fn effective_channel_unchecked(
    config: &ScenarioConfig,
    users: &UserLayout,
    k: usize,
    m: usize,
    l_m: &[f64],
) -> Complex64 {
    let mut sorted: Vec<f64> = l_m.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("positions are finite"));
    sorted
        .iter()
        .map(|&ell| pi_coeff(config, users, k, m, ell))
        .sum()
}

/// Effective channel between waveguide `m` and user `k` for the element
/// column `l_m`: the order-invariant sum of `pi_coeff` over the elements.
///
/// Returns an error when `l_m` violates the placement constraints.
pub fn effective_channel(
    config: &ScenarioConfig,
    users: &UserLayout,
    k: usize,
    m: usize,
    l_m: &[f64],
) -> Result<Complex64> {
    require_feasible(config, l_m)?;
    Ok(effective_channel_unchecked(config, users, k, m, l_m))
}

/// Builds the `M x K` channel matrix for a full element layout; entry
/// `(m, k)` is `effective_channel(k, m, column m)`.
pub fn channel_matrix(
    config: &ScenarioConfig,
    users: &UserLayout,
    locations: &LocationMatrix,
) -> Result<ChannelMatrix> {
    if locations.nrows() != config.elements || locations.ncols() != config.waveguides {
        return Err(PassError::InvalidConfig(format!(
            "location matrix is {}x{}, scenario expects {}x{}",
            locations.nrows(),
            locations.ncols(),
            config.elements,
            config.waveguides
        )));
    }
    users.validate(config)?;
    let mut g = ChannelMatrix::zeros(config.waveguides, config.users);
    for m in 0..config.waveguides {
        let column: Vec<f64> = locations.column(m).iter().copied().collect();
        require_feasible(config, &column)?;
        for k in 0..config.users {
            g[(m, k)] = effective_channel_unchecked(config, users, k, m, &column);
        }
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// Random initial layouts
// ---------------------------------------------------------------------------

/// Draws one waveguide's worth of element positions uniformly over the
/// feasible set (up to ordering): `N` sorted uniforms on the shrunken
/// interval `[0, guide_length - (N-1)*min_spacing]` plus a ladder of
/// `min_spacing` offsets.
pub fn random_feasible_column<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = config.elements;
    let span = config.guide_length() - (n - 1) as f64 * config.min_spacing();
    if span <= 0.0 {
        return Err(PassError::InvalidConfig(format!(
            "{n} elements with minimum spacing {:.6} m cannot fit on a {:.3} m waveguide",
            config.min_spacing(),
            config.guide_length()
        )));
    }
    let mut draws: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * span).collect();
    draws.sort_by(|a, b| a.partial_cmp(b).expect("draws are finite"));
    for (i, v) in draws.iter_mut().enumerate() {
        *v += i as f64 * config.min_spacing();
    }
    Ok(draws)
}

/// Draws a full random feasible `N x M` layout, column by column in waveguide
/// order (so the RNG stream consumption is well defined).
pub fn random_feasible_locations<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<LocationMatrix> {
    let mut locations = LocationMatrix::zeros(config.elements, config.waveguides);
    for m in 0..config.waveguides {
        let column = random_feasible_column(config, rng)?;
        for (n, v) in column.iter().enumerate() {
            locations[(n, m)] = *v;
        }
    }
    Ok(locations)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scenario with convenient round numbers: wavelength 1 m (so the minimum
    /// spacing is 0.5 m) on a 1 m guide.
    fn metre_wave_config(elements: usize) -> ScenarioConfig {
        ScenarioConfig {
            waveguides: 1,
            elements,
            users: 1,
            carrier_hz: crate::config::SPEED_OF_LIGHT, // wavelength exactly 1 m
            region_x: 1.0,
            region_y: 1.0,
            weights_dl: vec![1.0],
            weights_ul: vec![1.0],
            shadowing: vec![1.0],
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn distance_matches_hand_geometry() {
        let cfg = ScenarioConfig::default(); // height 5, spacing 1.5
        // Element directly above the user: distance equals the height.
        assert_eq!(distance(&cfg, [10.0, 0.0, 0.0], 0, 10.0), 5.0);
        // 3 m along the guide, same y: sqrt(9 + 25) = sqrt(34).
        let d = distance(&cfg, [10.0, 0.0, 0.0], 0, 13.0);
        assert!(
            (d - 34.0_f64.sqrt()).abs() < 1e-12,
            "expected sqrt(34), got {d}"
        );
        // Second waveguide sits at y = 1.5: sqrt(0 + 2.25 + 25).
        let d = distance(&cfg, [0.0, 0.0, 0.0], 1, 0.0);
        assert!(
            (d - 27.25_f64.sqrt()).abs() < 1e-12,
            "expected sqrt(27.25) ~ 5.2202, got {d}"
        );
    }

    #[test]
    fn distance_never_below_height() {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let user = [
                rng.gen::<f64>() * cfg.region_x,
                rng.gen::<f64>() * cfg.region_y,
                0.0,
            ];
            let m = rng.gen_range(0..cfg.waveguides);
            let ell = rng.gen::<f64>() * cfg.guide_length();
            assert!(distance(&cfg, user, m, ell) >= cfg.height);
        }
    }

    #[test]
    fn pi_coeff_magnitude_at_five_metres() {
        // Single element, free-space fading, 28 GHz, distance 5 m:
        // |pi| = xi / 5 with xi = wavelength / (4*pi) ~ 8.5207e-4 m.
        let cfg = ScenarioConfig {
            elements: 1,
            ..ScenarioConfig::default()
        };
        let users = UserLayout::from_xy(&[(10.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        let pi = pi_coeff(&cfg, &users, 0, 0, 10.0); // directly above: D = 5
        let expected = cfg.aperture_coeff() / 5.0;
        assert!(
            (pi.norm() - expected).abs() < 1e-15,
            "expected |pi| = {expected:.6e}, got {:.6e}",
            pi.norm()
        );
        assert!((expected - 1.7041e-4).abs() < 1e-8);
    }

    #[test]
    fn pi_coeff_zero_total_phase_is_positive_real() {
        // Wavelength 1 cm and distance 5 m = 500 wavelengths with ell = 0:
        // the total phase is a multiple of 2*pi.
        let cfg = ScenarioConfig {
            elements: 1,
            carrier_hz: crate::config::SPEED_OF_LIGHT / 0.01,
            ..ScenarioConfig::default()
        };
        let users = UserLayout::from_xy(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        let pi = pi_coeff(&cfg, &users, 0, 0, 0.0);
        assert!(pi.re > 0.0, "zero-phase contribution must be positive real");
        assert!(
            pi.im.abs() <= 1e-9 * pi.norm(),
            "imaginary residue too large: {pi}"
        );
    }

    #[test]
    fn pi_coeff_magnitude_identity_on_random_inputs() {
        let cfg = ScenarioConfig::default();
        let users = UserLayout::from_xy(&[(12.0, 1.0), (30.0, 4.0), (44.0, 0.5), (3.0, 5.5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let k = rng.gen_range(0..cfg.users);
            let m = rng.gen_range(0..cfg.waveguides);
            let ell = rng.gen::<f64>() * cfg.guide_length();
            let d = distance(&cfg, users.positions[k], m, ell);
            let ratio = pi_coeff(&cfg, &users, k, m, ell).norm()
                * (cfg.elements as f64).sqrt()
                * d
                / (cfg.aperture_coeff() * cfg.shadowing[k]);
            assert!((ratio - 1.0).abs() < 1e-12, "magnitude identity broke: {ratio}");
        }
    }

    #[test]
    fn effective_channel_single_element_equals_pi_coeff() {
        let cfg = ScenarioConfig {
            elements: 1,
            ..ScenarioConfig::default()
        };
        let users = UserLayout::from_xy(&[(10.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        let h = effective_channel(&cfg, &users, 0, 2, &[17.0]).unwrap();
        assert_eq!(h, pi_coeff(&cfg, &users, 0, 2, 17.0));
    }

    #[test]
    fn effective_channel_rejects_infeasible_columns() {
        let cfg = metre_wave_config(2);
        let users = UserLayout::from_xy(&[(0.5, 0.0)]);
        // 0.4 m gap < 0.5 m minimum spacing.
        assert!(effective_channel(&cfg, &users, 0, 0, &[0.0, 0.4]).is_err());
        // Outside the guide.
        assert!(effective_channel(&cfg, &users, 0, 0, &[-0.1, 0.6]).is_err());
    }

    #[test]
    fn effective_channel_two_aligned_elements_add_coherently() {
        // Elements symmetric about the user for equal distances; their
        // separation 2*delta chosen so the in-guide phase difference
        // kappa * i_ref * 2*delta is an exact multiple of 2*pi.
        let lambda = 0.01;
        let i_ref = 1.25;
        let delta = lambda / i_ref; // i_ref * 2*delta = 2 * lambda
        let cfg = ScenarioConfig {
            waveguides: 1,
            elements: 2,
            users: 1,
            carrier_hz: crate::config::SPEED_OF_LIGHT / lambda,
            refractive_index: i_ref,
            region_x: 50.0,
            region_y: 1.0,
            weights_dl: vec![1.0],
            weights_ul: vec![1.0],
            shadowing: vec![1.0],
            ..ScenarioConfig::default()
        };
        let x_user = 25.0;
        let users = UserLayout::from_xy(&[(x_user, 0.0)]);
        let col = [x_user - delta, x_user + delta];
        assert!(is_feasible(&cfg, &col), "2*delta must clear the min spacing");
        let d = distance(&cfg, users.positions[0], 0, col[0]);
        let h = effective_channel(&cfg, &users, 0, 0, &col).unwrap();
        let coherent = 2.0 * cfg.aperture_coeff() / (2.0_f64.sqrt() * d);
        assert!(
            (h.norm() - coherent).abs() < 1e-12 * coherent,
            "expected coherent magnitude {coherent:.6e}, got {:.6e}",
            h.norm()
        );
    }

    #[test]
    fn channel_matrix_singleton_equals_pi_coeff() {
        let cfg = ScenarioConfig {
            waveguides: 1,
            elements: 1,
            users: 1,
            weights_dl: vec![1.0],
            weights_ul: vec![1.0],
            shadowing: vec![1.0],
            ..ScenarioConfig::default()
        };
        let users = UserLayout::from_xy(&[(20.0, 3.0)]);
        let locations = LocationMatrix::from_element(1, 1, 33.0);
        let g = channel_matrix(&cfg, &users, &locations).unwrap();
        assert_eq!(g[(0, 0)], pi_coeff(&cfg, &users, 0, 0, 33.0));
    }

    #[test]
    fn channel_matrix_is_bitwise_invariant_to_column_permutations() {
        let cfg = ScenarioConfig::desk();
        let users = UserLayout::from_xy(&[(10.0, 1.0), (40.0, 5.0), (25.0, 3.0), (5.0, 2.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let locations = random_feasible_locations(&cfg, &mut rng).unwrap();
            let mut shuffled = locations.clone();
            for m in 0..cfg.waveguides {
                // Deterministic scramble: reverse, then swap a random pair.
                let mut col: Vec<f64> = shuffled.column(m).iter().copied().collect();
                col.reverse();
                let i = rng.gen_range(0..col.len());
                let j = rng.gen_range(0..col.len());
                col.swap(i, j);
                for (n, v) in col.iter().enumerate() {
                    shuffled[(n, m)] = *v;
                }
            }
            let g0 = channel_matrix(&cfg, &users, &locations).unwrap();
            let g1 = channel_matrix(&cfg, &users, &shuffled).unwrap();
            for (a, b) in g0.iter().zip(g1.iter()) {
                assert_eq!(a.re.to_bits(), b.re.to_bits(), "real parts must match bitwise");
                assert_eq!(a.im.to_bits(), b.im.to_bits(), "imag parts must match bitwise");
            }
        }
    }

    #[test]
    fn channel_matrix_matches_termwise_rederivation() {
        // Independent oracle: rebuild every entry with direct cos/sin sums in
        // raw storage order instead of the library's sorted accumulation.
        let cfg = ScenarioConfig {
            waveguides: 3,
            elements: 4,
            users: 2,
            weights_dl: vec![0.5, 0.5],
            weights_ul: vec![0.5, 0.5],
            shadowing: vec![1.0, 0.8],
            ..ScenarioConfig::default()
        };
        let users = UserLayout::from_xy(&[(12.5, 0.7), (41.0, 4.9)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let locations = random_feasible_locations(&cfg, &mut rng).unwrap();
        let g = channel_matrix(&cfg, &users, &locations).unwrap();

        let kappa = 2.0 * std::f64::consts::PI * cfg.carrier_hz / crate::config::SPEED_OF_LIGHT;
        let xi = (crate::config::SPEED_OF_LIGHT / cfg.carrier_hz) / (4.0 * std::f64::consts::PI);
        for m in 0..cfg.waveguides {
            for k in 0..cfg.users {
                let (mut re, mut im) = (0.0, 0.0);
                for n in 0..cfg.elements {
                    let ell = locations[(n, m)];
                    let ddx = ell - users.positions[k][0];
                    let ddy = m as f64 * 3.0 - users.positions[k][1]; // 3 waveguides over 6 m
                    let d = (ddx * ddx + ddy * ddy + 25.0).sqrt();
                    let mag = xi * cfg.shadowing[k] / (2.0 * d); // sqrt(4) elements
                    let phase = -kappa * (d + cfg.refractive_index * ell);
                    re += mag * phase.cos();
                    im += mag * phase.sin();
                }
                let err = (g[(m, k)] - Complex64::new(re, im)).norm() / g[(m, k)].norm();
                assert!(err < 1e-12, "entry ({m},{k}) off by {err:.2e}");
            }
        }
    }

    #[test]
    fn channel_magnitude_respects_triangle_inequality() {
        let cfg = ScenarioConfig::desk();
        let users = UserLayout::from_xy(&[(10.0, 1.0), (40.0, 5.0), (25.0, 3.0), (5.0, 2.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let locations = random_feasible_locations(&cfg, &mut rng).unwrap();
            let g = channel_matrix(&cfg, &users, &locations).unwrap();
            for m in 0..cfg.waveguides {
                for k in 0..cfg.users {
                    let bound: f64 = (0..cfg.elements)
                        .map(|n| pi_coeff(&cfg, &users, k, m, locations[(n, m)]).norm())
                        .sum();
                    assert!(g[(m, k)].norm() <= bound * (1.0 + 1e-12));
                    // Every term is also bounded by the closest-approach value.
                    assert!(
                        g[(m, k)].norm()
                            <= cfg.elements as f64 * cfg.aperture_coeff()
                                / ((cfg.elements as f64).sqrt() * cfg.height)
                    );
                }
            }
        }
    }

    #[test]
    fn feasibility_boundary_cases() {
        let cfg = metre_wave_config(2);
        assert!(is_feasible(&cfg, &[0.0, 0.5]), "gap exactly at minimum is allowed");
        assert!(!is_feasible(&cfg, &[0.0, 0.4]), "gap below minimum");
        assert!(!is_feasible(&cfg, &[-0.1]), "negative position");
        assert!(!is_feasible(&cfg, &[1.1]), "beyond guide end");
        assert!(is_feasible(&cfg, &[1.0, 0.0]), "order does not matter");
        assert!(is_feasible(&cfg, &[]), "empty column is trivially feasible");
    }

    #[test]
    fn random_layouts_are_always_feasible() {
        let cfg = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let locations = random_feasible_locations(&cfg, &mut rng).unwrap();
            for m in 0..cfg.waveguides {
                let col: Vec<f64> = locations.column(m).iter().copied().collect();
                assert!(is_feasible(&cfg, &col));
            }
        }
    }

    #[test]
    fn random_single_element_is_uniform_on_the_guide() {
        let cfg = metre_wave_config(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| random_feasible_column(&cfg, &mut rng).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        // Uniform on [0,1]: mean 0.5, standard error ~ 0.289/sqrt(n).
        let tol = 3.0 * 0.289 / (n as f64).sqrt();
        assert!(
            (mean - 0.5).abs() < tol,
            "mean {mean} outside 3-sigma band around 0.5"
        );
    }

    #[test]
    fn saturated_guide_is_rejected() {
        // Two elements on a 1 m guide with a 1 m minimum spacing: the strict
        // inequality (N-1)*spacing < length fails.
        let cfg = ScenarioConfig {
            carrier_hz: crate::config::SPEED_OF_LIGHT / 2.0, // spacing 1 m
            ..metre_wave_config(2)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!(matches!(
            random_feasible_column(&cfg, &mut rng),
            Err(PassError::InvalidConfig(_))
        ));
    }
}
