//! Fractional-programming downlink beamforming with joint element placement.
//!
//! The downlink design maximizes the weighted sum-rate over the digital
//! precoder `W` and the pinching-element locations `L` under a total power
//! budget. Direct maximization is intractable, so the solver works on an
//! equivalent dual objective obtained by two classical transforms:
//!
//! 1. a Lagrange lift that introduces one auxiliary rate variable `omega_k`
//!    per user (optimal value: the user's power-normalized SINR), and
//! 2. a quadratic transform that introduces one complex auxiliary `q_k` per
//!    user and turns the SINR fractions into a quadratic form in `W`.
//!
//! With both auxiliaries at their closed-form optima the dual equals the true
//! weighted sum-rate, and block-coordinate ascent over
//! `omega -> q -> W -> element locations` never decreases it. The `W` block
//! has a regularized zero-forcing closed form; each location is refreshed by
//! a one-dimensional grid scan of a cheap scalar surrogate that differs from
//! the full dual only by terms independent of the scanned position. A final
//! scaling step restores the power constraint with equality without changing
//! any SINR.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::time::Instant;

use crate::channel::{channel_matrix, effective_channel, pi_coeff, ChannelMatrix, LocationMatrix};
use crate::config::{ScenarioConfig, UserLayout};
use crate::error::{PassError, Result};
use crate::grid::{PiTable, PlacementGrid};
use crate::trace::ConvergenceTrace;

/// Digital precoder: `M x K` complex, column `k` beamforms user `k`'s stream.
pub type PrecoderMatrix = DMatrix<Complex64>;

/// Hard cap on outer iterations; a safety net only (the stopping rule fires
/// long before this in practice) so the run always terminates.
const MAX_OUTER_ITERATIONS: usize = 500;

// ---------------------------------------------------------------------------
// SINR and rate
// ---------------------------------------------------------------------------

/// `(G^T W)[k, j]`: the signal path from stream `j` to user `k` (plain
/// transpose, no conjugation).
fn stream_gain(g: &ChannelMatrix, w: &PrecoderMatrix, k: usize, j: usize) -> Complex64 {
    g.column(k).dot(&w.column(j))
}

/// Sum over all streams of `|g_k^T w_j|^2` — the total power user `k`
/// receives.
fn received_power(g: &ChannelMatrix, w: &PrecoderMatrix, k: usize) -> f64 {
    (0..w.ncols()).map(|j| stream_gain(g, w, k, j).norm_sqr()).sum()
}

/// Downlink SINR of user `k`: desired power over inter-user interference
/// plus noise.
pub fn sinr_downlink(g: &ChannelMatrix, w: &PrecoderMatrix, sigma2: f64, k: usize) -> f64 {
    let desired = stream_gain(g, w, k, k).norm_sqr();
    let interference = received_power(g, w, k) - desired;
    desired / (interference + sigma2)
}

/// Power-normalized SINR of user `k`: like [`sinr_downlink`] but with the
/// noise term replaced by `sigma2 / P_d` times the precoder energy, which
/// makes the value invariant to scaling `W`. Returns 0 for an all-zero
/// precoder (the 0/0 limit).
pub fn sinr_bar(g: &ChannelMatrix, w: &PrecoderMatrix, sigma2: f64, p_d: f64, k: usize) -> f64 {
    let energy = w.norm_squared();
    if energy == 0.0 {
        return 0.0;
    }
    let desired = stream_gain(g, w, k, k).norm_sqr();
    let interference = received_power(g, w, k) - desired;
    desired / (interference + sigma2 / p_d * energy)
}

/// Weighted sum-rate `sum_k weight_k * ln(1 + SINR_k)` in nats. Divide by
/// `ln 2` for bit/s/Hz.
pub fn weighted_sum_rate_dl(
    g: &ChannelMatrix,
    w: &PrecoderMatrix,
    sigma2: f64,
    weights: &[f64],
) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(k, &wt)| wt * (1.0 + sinr_downlink(g, w, sigma2, k)).ln())
        .sum()
}

/// Scales `W` so the total power `tr(W^H W)` equals `p_d` exactly. Errors on
/// an all-zero precoder.
pub fn scale_to_power(w: &PrecoderMatrix, p_d: f64) -> Result<PrecoderMatrix> {
    let energy = w.norm_squared();
    if energy == 0.0 {
        return Err(PassError::DegeneratePrecoder(
            "cannot scale an all-zero precoder to a positive power".into(),
        ));
    }
    Ok(w * Complex64::from((p_d / energy).sqrt()))
}

// ---------------------------------------------------------------------------
// Dual state
// ---------------------------------------------------------------------------

/// Auxiliary variables of the two transforms, together with the rate
/// weights they are tied to.
///
/// The diagonal matrices of the dual formulation are derived on demand:
/// `T = diag(q_k * sqrt(1 + omega_k) * weight_k)` and
/// `U = diag(weight_k * |q_k|^2)`, so they can never drift out of sync with
/// `omega` and `q`.
#[derive(Debug, Clone)]
pub struct DualState {
    /// Lagrange auxiliaries, one non-negative rate variable per user.
    pub omega: Vec<f64>,
    /// Quadratic-transform auxiliaries, one complex scalar per user.
    pub q: Vec<Complex64>,
    /// Rate weights the dual objective is built with.
    pub weights: Vec<f64>,
}

impl DualState {
    /// Bundles auxiliaries and weights; all three must have one entry per
    /// user.
    pub fn new(omega: Vec<f64>, q: Vec<Complex64>, weights: Vec<f64>) -> Self {
        assert!(
            omega.len() == q.len() && q.len() == weights.len(),
            "dual state vectors must share one entry per user"
        );
        DualState { omega, q, weights }
    }

    /// Computes both closed-form auxiliary updates for the given precoder.
    pub fn from_precoder(
        g: &ChannelMatrix,
        w: &PrecoderMatrix,
        sigma2: f64,
        p_d: f64,
        weights: &[f64],
    ) -> Result<Self> {
        let omega = update_omega(g, w, sigma2, p_d);
        let q = update_q(g, w, sigma2, p_d, &omega)?;
        Ok(DualState::new(omega, q, weights.to_vec()))
    }

    /// Diagonal of `T`: `q_k * sqrt(1 + omega_k) * weight_k`.
    pub fn t_diag(&self) -> Vec<Complex64> {
        (0..self.q.len())
            .map(|k| self.q[k] * (1.0 + self.omega[k]).sqrt() * self.weights[k])
            .collect()
    }

    /// Diagonal of `U`: `weight_k * |q_k|^2` (real, non-negative).
    pub fn u_diag(&self) -> Vec<f64> {
        (0..self.q.len())
            .map(|k| self.weights[k] * self.q[k].norm_sqr())
            .collect()
    }
}

/// Closed-form optimum of the Lagrange auxiliaries: `omega_k` equals the
/// power-normalized SINR of user `k`.
pub fn update_omega(g: &ChannelMatrix, w: &PrecoderMatrix, sigma2: f64, p_d: f64) -> Vec<f64> {
    (0..g.ncols()).map(|k| sinr_bar(g, w, sigma2, p_d, k)).collect()
}

/// Closed-form optimum of the quadratic-transform auxiliaries:
/// `q_k = P_d * sqrt(1 + omega_k) * g_k^T w_k /
///        (sigma2 * tr(W W^H) + P_d * sum_j |g_k^T w_j|^2)`.
///
/// Errors on an all-zero precoder (the denominator would vanish).
pub fn update_q(
    g: &ChannelMatrix,
    w: &PrecoderMatrix,
    sigma2: f64,
    p_d: f64,
    omega: &[f64],
) -> Result<Vec<Complex64>> {
    let energy = w.norm_squared();
    if energy == 0.0 {
        return Err(PassError::DegeneratePrecoder(
            "auxiliary update requires a nonzero precoder".into(),
        ));
    }
    Ok((0..g.ncols())
        .map(|k| {
            let numerator = stream_gain(g, w, k, k) * (p_d * (1.0 + omega[k]).sqrt());
            let denominator = sigma2 * energy + p_d * received_power(g, w, k);
            numerator / denominator
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Precoder block: regularized zero-forcing closed form
// ---------------------------------------------------------------------------

/// Maximizer of the dual objective over `W` at fixed locations and
/// auxiliaries:
/// `W = (G* U G^T + gamma I)^{-1} G* T` with `gamma = sigma2 * tr(U) / P_d`.
///
/// When `T = 0` the maximizer is the zero precoder and is returned directly;
/// otherwise a singular system (possible only for degenerate weight/channel
/// combinations) is reported as an error.
pub fn update_w_rzf(
    g: &ChannelMatrix,
    dual: &DualState,
    sigma2: f64,
    p_d: f64,
) -> Result<PrecoderMatrix> {
    let m = g.nrows();
    let t = dual.t_diag();
    let u = dual.u_diag();
    if t.iter().all(|tk| tk.norm_sqr() == 0.0) {
        return Ok(PrecoderMatrix::zeros(m, g.ncols()));
    }
    let gamma = sigma2 * u.iter().sum::<f64>() / p_d;
    let g_conj = g.map(|z| z.conj());
    let u_c = DVector::from_iterator(u.len(), u.iter().map(|&x| Complex64::from(x)));
    let mut system = &g_conj * DMatrix::from_diagonal(&u_c) * g.transpose();
    for i in 0..m {
        system[(i, i)] += Complex64::from(gamma);
    }
    let mut rhs = g_conj;
    for (k, tk) in t.iter().enumerate() {
        for r in 0..m {
            rhs[(r, k)] *= *tk;
        }
    }
    system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| PassError::SingularSystem("regularized Gram matrix is singular".into()))
}

/// Dual objective at fixed auxiliaries:
/// `2 Re tr(T^H G^T W) - tr(G^T W W^H G* U) - gamma * tr(W W^H)`.
///
/// Block updates of `W` and of single element locations maximize exactly
/// this quantity.
pub fn objective_f_d(
    g: &ChannelMatrix,
    w: &PrecoderMatrix,
    dual: &DualState,
    sigma2: f64,
    p_d: f64,
) -> f64 {
    let t = dual.t_diag();
    let u = dual.u_diag();
    let gamma = sigma2 * u.iter().sum::<f64>() / p_d;
    let mut value = 0.0;
    for k in 0..g.ncols() {
        value += 2.0 * (t[k].conj() * stream_gain(g, w, k, k)).re;
        value -= u[k] * received_power(g, w, k);
    }
    value - gamma * w.norm_squared()
}

/// Runs the closed-form ascent — auxiliaries then precoder, no element
/// placement — on a fixed channel until the fractional increase of the
/// weighted sum-rate falls below `epsilon`.
///
/// This is the digital half of [`run_fp_bcd`], reusing the same update
/// functions, and also serves channels that have no elements to place (for
/// example fixed antenna arrays). Returns the power-scaled precoder, the
/// per-iteration trace (same columns as the full run), and the iteration
/// count.
pub fn run_fp_fixed_channel(
    g: &ChannelMatrix,
    init_w: &PrecoderMatrix,
    sigma2: f64,
    p_d: f64,
    weights: &[f64],
    epsilon: f64,
) -> Result<(PrecoderMatrix, ConvergenceTrace, usize)> {
    if init_w.norm_squared() == 0.0 {
        return Err(PassError::DegeneratePrecoder(
            "initial precoder must be nonzero".into(),
        ));
    }
    let start = Instant::now();
    let mut w = init_w.clone();
    let mut trace = ConvergenceTrace::new(vec![
        "iter",
        "objective_nats",
        "objective_bits",
        "wall_ms",
    ]);
    let rate_of = |w: &PrecoderMatrix| -> Result<f64> {
        let scaled = scale_to_power(w, p_d)?;
        Ok(weighted_sum_rate_dl(g, &scaled, sigma2, weights))
    };
    let mut current = rate_of(&w)?;
    trace.push(vec![
        0.0,
        current,
        current / std::f64::consts::LN_2,
        start.elapsed().as_secs_f64() * 1e3,
    ]);
    let mut iterations = 0;
    for iter in 1..=MAX_OUTER_ITERATIONS {
        let dual = DualState::from_precoder(g, &w, sigma2, p_d, weights)?;
        w = update_w_rzf(g, &dual, sigma2, p_d)?;
        let rate = rate_of(&w)?;
        trace.push(vec![
            iter as f64,
            rate,
            rate / std::f64::consts::LN_2,
            start.elapsed().as_secs_f64() * 1e3,
        ]);
        if !rate.is_finite() {
            return Err(PassError::NumericalFailure {
                reason: format!("non-finite weighted sum-rate at iteration {iter}"),
                trace: Box::new(trace),
            });
        }
        iterations = iter;
        let increase = (rate - current) / current.abs().max(f64::MIN_POSITIVE);
        current = rate;
        if increase < epsilon {
            break;
        }
    }
    Ok((scale_to_power(&w, p_d)?, trace, iterations))
}

// ---------------------------------------------------------------------------
// Location block: scalar surrogate and per-element coefficients
// ---------------------------------------------------------------------------

/// Per-waveguide coefficients of the location surrogate, valid while `W`,
/// the auxiliaries, and the *other* waveguides' channel rows stay fixed.
#[derive(Debug, Clone)]
pub struct ScalarCoeffs {
    /// Linear coefficient vector `b_m`: the waveguide's row of `W T^H` minus
    /// the interference coupling to every other waveguide's current row.
    pub b: Vec<Complex64>,
    /// `(W W^H)[m, m]`: the waveguide's own transmit-correlation diagonal.
    pub f_mm: f64,
    /// Diagonal of `U`.
    pub u: Vec<f64>,
}

/// Builds the coefficients for waveguide `m` from the current channel,
/// precoder, and dual state.
pub fn scalar_coeffs(
    g: &ChannelMatrix,
    w: &PrecoderMatrix,
    dual: &DualState,
    m: usize,
) -> ScalarCoeffs {
    let users = g.ncols();
    let guides = g.nrows();
    let t = dual.t_diag();
    let u = dual.u_diag();
    // Row m of W W^H.
    let f_row: Vec<Complex64> = (0..guides)
        .map(|mp| (0..users).map(|j| w[(m, j)] * w[(mp, j)].conj()).sum())
        .collect();
    let f_mm = f_row[m].re;
    let b = (0..users)
        .map(|k| {
            // Row m of E = W T^H (T diagonal).
            let a_mk = w[(m, k)] * t[k].conj();
            let coupling: Complex64 = (0..guides)
                .filter(|&mp| mp != m)
                .map(|mp| f_row[mp] * u[k] * g[(mp, k)].conj())
                .sum();
            a_mk - coupling
        })
        .collect();
    ScalarCoeffs { b, f_mm, u }
}

/// Surrogate for one element `(m, n)`: the candidate-location objective with
/// the within-waveguide contribution of the *other* elements folded in.
#[derive(Debug, Clone)]
pub struct ElementObjective {
    /// Effective linear coefficients (per user).
    pub zeta: Vec<Complex64>,
    /// Quadratic coefficients `(W W^H)[m,m] * U[k,k]` (per user).
    pub vartheta: Vec<f64>,
}

impl ScalarCoeffs {
    /// Specializes the waveguide coefficients to one element, given `cross`:
    /// the per-user sums of the other elements' contributions on this
    /// waveguide at their current positions.
    pub fn element_objective(&self, cross: &[Complex64]) -> ElementObjective {
        let zeta = (0..self.b.len())
            .map(|k| self.b[k] - self.f_mm * self.u[k] * cross[k].conj())
            .collect();
        let vartheta = self.u.iter().map(|uk| self.f_mm * uk).collect();
        ElementObjective { zeta, vartheta }
    }
}

impl ElementObjective {
    /// Evaluates the surrogate at a candidate position whose per-user
    /// single-element contributions are `pi`. Equal to the dual objective as
    /// a function of that position, up to terms that do not depend on it.
    pub fn value(&self, pi: &[Complex64]) -> f64 {
        pi.iter()
            .zip(self.zeta.iter().zip(&self.vartheta))
            .map(|(p, (z, v))| 2.0 * (z * p).re - v * p.norm_sqr())
            .sum()
    }
}

/// One-shot convenience wrapper combining [`ScalarCoeffs::element_objective`]
/// and [`ElementObjective::value`].
pub fn scalar_objective_f_m(coeffs: &ScalarCoeffs, cross: &[Complex64], pi: &[Complex64]) -> f64 {
    coeffs.element_objective(cross).value(pi)
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

/// Everything a finished fractional-programming run reports.
#[derive(Debug, Clone)]
pub struct FpBcdRun {
    /// Final digital precoder, scaled so `tr(W^H W)` meets the power budget
    /// exactly.
    pub precoder: PrecoderMatrix,
    /// Final element locations.
    pub locations: LocationMatrix,
    /// Per-iteration weighted sum-rate (row 0 is the initial point).
    /// Columns: `iter`, `objective_nats`, `objective_bits`, `wall_ms`.
    pub trace: ConvergenceTrace,
    /// Number of outer iterations executed.
    pub iterations: usize,
    /// Non-fatal anomalies (blocked grid scans, iteration cap).
    pub warnings: Vec<String>,
}

fn push_warning(warnings: &mut Vec<String>, w: String) {
    if !warnings.contains(&w) {
        warnings.push(w);
    }
}

/// Runs the full block-coordinate ascent from the given starting precoder
/// and element layout.
///
/// Each outer iteration updates `omega`, `q`, and `W` in closed form, then
/// sweeps the elements waveguide-by-waveguide (each element re-placed by a
/// feasibility-filtered grid scan of the scalar surrogate, with the
/// waveguide's channel row refreshed after every move). The run stops when
/// the fractional increase of the weighted sum-rate — evaluated on the
/// power-scaled precoder — falls below the scenario's `epsilon`.
pub fn run_fp_bcd(
    config: &ScenarioConfig,
    users: &UserLayout,
    init_w: &PrecoderMatrix,
    init_l: &LocationMatrix,
) -> Result<FpBcdRun> {
    config.validate()?;
    if init_w.nrows() != config.waveguides || init_w.ncols() != config.users {
        return Err(PassError::InvalidConfig(format!(
            "initial precoder is {}x{}, scenario expects {}x{}",
            init_w.nrows(),
            init_w.ncols(),
            config.waveguides,
            config.users
        )));
    }
    if init_w.norm_squared() == 0.0 {
        return Err(PassError::DegeneratePrecoder(
            "initial precoder must be nonzero".into(),
        ));
    }

    let start = Instant::now();
    let grid = PlacementGrid::new(config);
    let table = PiTable::build(config, users, grid);
    let sigma2 = config.noise_dl;
    let p_d = config.power_dl;
    let weights = &config.weights_dl;

    let mut w = init_w.clone();
    let mut locations = init_l.clone();
    let mut g = channel_matrix(config, users, &locations)?;
    let mut warnings = Vec::new();
    let mut trace = ConvergenceTrace::new(vec![
        "iter",
        "objective_nats",
        "objective_bits",
        "wall_ms",
    ]);

    let rate_of = |g: &ChannelMatrix, w: &PrecoderMatrix| -> Result<f64> {
        let scaled = scale_to_power(w, p_d)?;
        Ok(weighted_sum_rate_dl(g, &scaled, sigma2, weights))
    };

    let mut current = rate_of(&g, &w)?;
    trace.push(vec![
        0.0,
        current,
        current / std::f64::consts::LN_2,
        start.elapsed().as_secs_f64() * 1e3,
    ]);

    let mut iterations = 0;
    for iter in 1..=MAX_OUTER_ITERATIONS {
        // Closed-form blocks: auxiliaries, then the precoder.
        let dual = DualState::from_precoder(&g, &w, sigma2, p_d, weights)?;
        w = update_w_rzf(&g, &dual, sigma2, p_d)?;

        // Location block: Gauss-Seidel over waveguides, then elements.
        for m in 0..config.waveguides {
            let coeffs = scalar_coeffs(&g, &w, &dual, m);
            for n in 0..config.elements {
                let others: Vec<f64> = (0..config.elements)
                    .filter(|&np| np != n)
                    .map(|np| locations[(np, m)])
                    .collect();
                let cross: Vec<Complex64> = (0..config.users)
                    .map(|k| {
                        others
                            .iter()
                            .map(|&ell| pi_coeff(config, users, k, m, ell))
                            .sum()
                    })
                    .collect();
                let element = coeffs.element_objective(&cross);
                match table
                    .grid()
                    .search(config, &others, |i, _| element.value(table.user_slice(m, i)))
                {
                    Some((_, position)) => locations[(n, m)] = position,
                    None => push_warning(
                        &mut warnings,
                        format!("grid scan found no feasible position for element ({m},{n}); kept current"),
                    ),
                }
                // The waveguide's channel row tracks every element move.
                let column: Vec<f64> = (0..config.elements).map(|np| locations[(np, m)]).collect();
                for k in 0..config.users {
                    g[(m, k)] = effective_channel(config, users, k, m, &column)?;
                }
            }
        }

        let rate = rate_of(&g, &w)?;
        trace.push(vec![
            iter as f64,
            rate,
            rate / std::f64::consts::LN_2,
            start.elapsed().as_secs_f64() * 1e3,
        ]);
        if !rate.is_finite() {
            return Err(PassError::NumericalFailure {
                reason: format!("non-finite weighted sum-rate at iteration {iter}"),
                trace: Box::new(trace),
            });
        }
        iterations = iter;
        let increase = (rate - current) / current.abs().max(f64::MIN_POSITIVE);
        current = rate;
        if increase < config.epsilon {
            break;
        }
        if iter == MAX_OUTER_ITERATIONS {
            push_warning(
                &mut warnings,
                format!("stopped at the {MAX_OUTER_ITERATIONS}-iteration safety cap"),
            );
        }
    }

    Ok(FpBcdRun {
        precoder: scale_to_power(&w, p_d)?,
        locations,
        trace,
        iterations,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
