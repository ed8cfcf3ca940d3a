//! Scenario geometry, radio parameters, and user layouts.
//!
//! A [`ScenarioConfig`] describes one deployment of a pinching-antenna system:
//! `M` dielectric waveguides stretched along the x-axis at height `a`, evenly
//! spaced across the y-extent of a rectangular service region, each carrying
//! `N` movable pinching elements, serving `K` single-antenna users on the
//! ground plane. All lengths are metres, powers are watts internally (the
//! constructors accept dBm), and frequencies are Hz.

use crate::error::{PassError, Result};

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power level in dBm to watts.
///
/// # Example
/// ```
/// let w = pass_mimo::config::dbm_to_watts(-90.0);
/// assert!((w - 1e-12).abs() < 1e-24);
/// ```
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power level in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

// ---------------------------------------------------------------------------
// ScenarioConfig
// ---------------------------------------------------------------------------

/// Full parameter set for one simulated deployment.
///
/// Field naming follows the physical quantities: `waveguides` is the number of
/// waveguides (one per feed antenna), `elements` the number of pinching
/// elements per waveguide, `users` the number of served single-antenna users.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of waveguides `M` (each fed by one RF chain).
    pub waveguides: usize,
    /// Number of pinching elements per waveguide `N`.
    pub elements: usize,
    /// Number of single-antenna users `K`.
    pub users: usize,
    /// Carrier frequency [Hz].
    pub carrier_hz: f64,
    /// Effective refractive index of the dielectric waveguides.
    pub refractive_index: f64,
    /// Deployment height of the waveguide plane above the user plane [m].
    pub height: f64,
    /// Service-region extent along the waveguide axis (x) [m]; also the
    /// usable length of every waveguide.
    pub region_x: f64,
    /// Service-region extent across the waveguides (y) [m].
    pub region_y: f64,
    /// Downlink transmit power budget [W].
    pub power_dl: f64,
    /// Per-user uplink transmit power [W].
    pub power_ul: f64,
    /// Downlink noise variance [W].
    pub noise_dl: f64,
    /// Effective uplink noise variance [W].
    pub noise_ul: f64,
    /// Downlink rate weights, one per user, non-negative.
    pub weights_dl: Vec<f64>,
    /// Uplink rate weights, one per user, non-negative.
    pub weights_ul: Vec<f64>,
    /// Large-scale fading amplitude per user (1.0 = free-space only).
    pub shadowing: Vec<f64>,
    /// Number of candidate points in the per-waveguide placement grid.
    pub grid_points: usize,
    /// Relative-improvement threshold that stops the iterative solvers.
    pub epsilon: f64,
}

impl Default for ScenarioConfig {
    /// Reference indoor deployment: 5 waveguides x 6 elements, 4 users,
    /// 28 GHz carrier, 50 m x 6 m region at 5 m height, -90 dBm noise,
    /// 0 dBm transmit power, uniform weights, free-space fading, and a
    /// 100 000-point placement grid.
    fn default() -> Self {
        let users = 4;
        ScenarioConfig {
            waveguides: 5,
            elements: 6,
            users,
            carrier_hz: 28e9,
            refractive_index: 1.44,
            height: 5.0,
            region_x: 50.0,
            region_y: 6.0,
            power_dl: dbm_to_watts(0.0),
            power_ul: dbm_to_watts(0.0),
            noise_dl: dbm_to_watts(-90.0),
            noise_ul: dbm_to_watts(-90.0),
            weights_dl: vec![1.0 / users as f64; users],
            weights_ul: vec![1.0 / users as f64; users],
            shadowing: vec![1.0; users],
            grid_points: 100_000,
            epsilon: 1e-3,
        }
    }
}

impl ScenarioConfig {
    /// Same deployment as [`Default`](Self::default) but with a 4096-point
    /// placement grid, sized so that full Monte-Carlo batches finish on a
    /// desktop in minutes rather than hours.
    pub fn desk() -> Self {
        ScenarioConfig {
            grid_points: 4096,
            ..ScenarioConfig::default()
        }
    }

    /// Carrier wavelength [m].
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Free-space wavenumber `2*pi/wavelength` [rad/m].
    pub fn wave_number(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }

    /// Aperture coefficient `wavelength/(4*pi)` of the free-space path-loss
    /// model [m].
    pub fn aperture_coeff(&self) -> f64 {
        self.wavelength() / (4.0 * std::f64::consts::PI)
    }

    /// Uniform y-spacing between adjacent waveguides [m]. Zero for a single
    /// waveguide.
    pub fn guide_spacing(&self) -> f64 {
        if self.waveguides > 1 {
            self.region_y / (self.waveguides - 1) as f64
        } else {
            0.0
        }
    }

    /// Usable length of each waveguide [m] (equal to the x-extent of the
    /// region).
    pub fn guide_length(&self) -> f64 {
        self.region_x
    }

    /// Minimum separation between two elements on the same waveguide [m]:
    /// half a wavelength, which keeps mutual coupling negligible.
    pub fn min_spacing(&self) -> f64 {
        self.wavelength() / 2.0
    }

    /// y-coordinate of waveguide `m` (0-based) [m].
    pub fn guide_y(&self, m: usize) -> f64 {
        m as f64 * self.guide_spacing()
    }

    /// Replaces the user count and resets the per-user vectors (weights
    /// uniform `1/K`, free-space fading) to match.
    pub fn with_users(mut self, users: usize) -> Self {
        self.users = users;
        self.weights_dl = vec![1.0 / users as f64; users];
        self.weights_ul = vec![1.0 / users as f64; users];
        self.shadowing = vec![1.0; users];
        self
    }

    /// Checks every structural constraint; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(PassError::InvalidConfig(msg));
        if self.waveguides == 0 || self.elements == 0 || self.users == 0 {
            return fail("waveguides, elements, and users must all be >= 1".into());
        }
        for (name, v) in [
            ("carrier_hz", self.carrier_hz),
            ("refractive_index", self.refractive_index),
            ("height", self.height),
            ("region_x", self.region_x),
            ("region_y", self.region_y),
            ("power_dl", self.power_dl),
            ("power_ul", self.power_ul),
            ("noise_dl", self.noise_dl),
            ("noise_ul", self.noise_ul),
            ("epsilon", self.epsilon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if self.grid_points < 2 {
            return fail(format!(
                "grid_points must be >= 2, got {}",
                self.grid_points
            ));
        }
        for (name, vec) in [
            ("weights_dl", &self.weights_dl),
            ("weights_ul", &self.weights_ul),
            ("shadowing", &self.shadowing),
        ] {
            if vec.len() != self.users {
                return fail(format!(
                    "{name} must have one entry per user ({}), got {}",
                    self.users,
                    vec.len()
                ));
            }
            if vec.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return fail(format!("{name} entries must be finite and >= 0"));
            }
        }
        // All N elements must fit on a waveguide with the half-wavelength
        // spacing between them: (N-1) * min_spacing < guide length.
        let needed = (self.elements - 1) as f64 * self.min_spacing();
        if needed >= self.guide_length() {
            return fail(format!(
                "{} elements with minimum spacing {:.6} m need more than the {:.3} m waveguide",
                self.elements,
                self.min_spacing(),
                self.guide_length()
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// UserLayout
// ---------------------------------------------------------------------------

/// Positions of the `K` users on the ground plane.
///
/// Each entry is `[x, y, 0.0]` in metres; users live at height zero.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLayout {
    /// One `[x, y, 0]` triple per user.
    pub positions: Vec<[f64; 3]>,
}

impl UserLayout {
    /// Builds a layout from `(x, y)` pairs; the z-coordinate is fixed at 0.
    pub fn from_xy(pairs: &[(f64, f64)]) -> Self {
        UserLayout {
            positions: pairs.iter().map(|&(x, y)| [x, y, 0.0]).collect(),
        }
    }

    /// Number of users in the layout.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// True when the layout holds no users.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks that the layout matches the scenario: one position per user,
    /// inside the service region, on the ground plane.
    pub fn validate(&self, config: &ScenarioConfig) -> Result<()> {
        if self.positions.len() != config.users {
            return Err(PassError::InvalidConfig(format!(
                "layout has {} users, scenario expects {}",
                self.positions.len(),
                config.users
            )));
        }
        for (k, p) in self.positions.iter().enumerate() {
            let [x, y, z] = *p;
            let inside = x.is_finite()
                && y.is_finite()
                && (0.0..=config.region_x).contains(&x)
                && (0.0..=config.region_y).contains(&y)
                && z == 0.0;
            if !inside {
                return Err(PassError::InvalidConfig(format!(
                    "user {k} at [{x}, {y}, {z}] is outside the {} m x {} m ground region",
                    config.region_x, config.region_y
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
