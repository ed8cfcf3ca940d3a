//! Zero-forcing downlink beamforming with single-loop element placement.
//!
//! With more waveguides than users (`M > K`) the effective channel can be
//! inverted outright: the zero-forcing precoder `W = c * G* (G^T G*)^{-1}`
//! cancels all inter-user interference, and with the power scaling
//! `c = sqrt(P_d / tr Gamma)` (where `Gamma = (G^T G*)^{-1}`) every user
//! enjoys the identical SNR `(P_d / sigma2) / tr Gamma`. The weighted
//! sum-rate is then a strictly decreasing function of the single scalar
//! `tr Gamma`, so placing the pinching elements reduces to minimizing that
//! trace.
//!
//! The placement sweep relocates one element at a time. Removing waveguide
//! `m`'s row from `G` leaves the Gram inverse `Gamma_m` of the other rows;
//! re-inserting a candidate row `g` changes the trace by the closed-form
//! rank-1 reduction `g^H Gamma_m^2 g / (1 + g^H Gamma_m g)`, so each grid
//! scan costs one small quadratic form per candidate instead of a fresh
//! matrix inversion.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::time::Instant;

use crate::channel::{channel_matrix, effective_channel, pi_coeff, ChannelMatrix, LocationMatrix};
use crate::config::{ScenarioConfig, UserLayout};
use crate::downlink_fp::PrecoderMatrix;
use crate::error::{PassError, Result};
use crate::grid::{PiTable, PlacementGrid};
use crate::trace::ConvergenceTrace;

/// Safety cap on placement sweeps (the stopping rule fires much earlier).
const MAX_SWEEPS: usize = 500;

/// Condition-number bound above which a square (`M == K`) Gram matrix is
/// treated as rank deficient.
const SQUARE_CONDITION_LIMIT: f64 = 1e12;

// ---------------------------------------------------------------------------
// Gram algebra
// ---------------------------------------------------------------------------

/// `G^T G*`: the `K x K` Hermitian Gram matrix of the user channels.
fn gram(g: &ChannelMatrix) -> DMatrix<Complex64> {
    g.transpose() * g.map(|z| z.conj())
}

/// One-norm of a complex matrix (maximum absolute column sum), used for a
/// cheap condition estimate.
fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum())
        .fold(0.0, f64::max)
}

/// Inverts the Gram matrix of `g`, enforcing the shape and conditioning
/// rules: strictly more rows than columns is always accepted; a square
/// channel is accepted only while its Gram stays well conditioned.
fn gram_inverse(g: &ChannelMatrix) -> Result<DMatrix<Complex64>> {
    let (m, k) = (g.nrows(), g.ncols());
    if m < k {
        return Err(PassError::RankDeficient(format!(
            "zero-forcing needs at least as many waveguides as users (got {m} x {k})"
        )));
    }
    let b = gram(g);
    let inv = b.clone().try_inverse().ok_or_else(|| {
        PassError::RankDeficient("channel Gram matrix is singular".into())
    })?;
    if m == k {
        // On an exactly singular matrix the computed "inverse" can come out
        // with small entries (cancellation hits the determinant and the
        // adjugate together), so the norm product alone can look healthy.
        // The residual of B * inv against the identity exposes that case:
        // its one-norm divided by k*eps lower-bounds the condition number.
        let mut residual = &b * &inv;
        for i in 0..k {
            residual[(i, i)] -= Complex64::from(1.0);
        }
        let residual_cond = one_norm(&residual) / (k as f64 * f64::EPSILON);
        let cond = (one_norm(&b) * one_norm(&inv)).max(residual_cond);
        if !cond.is_finite() || cond >= SQUARE_CONDITION_LIMIT {
            return Err(PassError::RankDeficient(format!(
                "square channel too ill-conditioned for zero-forcing (estimate {cond:.2e})"
            )));
        }
    }
    Ok(inv)
}

/// `tr (G^T G*)^{-1}`: the interference-free power-sharing cost of the
/// current channel. Smaller is better.
pub fn trace_gamma(g: &ChannelMatrix) -> Result<f64> {
    Ok(gram_inverse(g)?.trace().re)
}

// ---------------------------------------------------------------------------
// Precoder and rate
// ---------------------------------------------------------------------------

/// Zero-forcing precoder `sqrt(P_d / tr Gamma) * G* Gamma`.
///
/// Its effective channel `G^T W` is `sqrt(P_d / tr Gamma) * I` (no
/// inter-user interference) and its total power meets `p_d` exactly.
pub fn zf_precoder(g: &ChannelMatrix, p_d: f64) -> Result<PrecoderMatrix> {
    let inv = gram_inverse(g)?;
    let tr = inv.trace().re;
    let scale = Complex64::from((p_d / tr).sqrt());
    Ok(g.map(|z| z.conj()) * inv * scale)
}

/// Weighted sum-rate of the zero-forcing design in nats:
/// `sum_k weight_k * ln(1 + (P_d/sigma2) / tr Gamma)`.
pub fn zf_sum_rate(g: &ChannelMatrix, p_d: f64, sigma2: f64, weights: &[f64]) -> Result<f64> {
    let tr = trace_gamma(g)?;
    let snr = p_d / sigma2 / tr;
    Ok(weights.iter().map(|&wt| wt * (1.0 + snr).ln()).sum())
}

// ---------------------------------------------------------------------------
// Rank-1 placement objective
// ---------------------------------------------------------------------------

/// Trace reduction achieved by inserting candidate row `candidate` into a
/// channel whose other rows have Gram inverse `gamma_m`:
/// `candidate^H gamma_m^2 candidate / (1 + candidate^H gamma_m candidate)`.
///
/// Maximizing this over candidate positions minimizes the resulting
/// `tr Gamma` of the full channel.
pub fn sm_trace_objective(gamma_m: &DMatrix<Complex64>, candidate: &[Complex64]) -> f64 {
    let k = candidate.len();
    let mut numerator = 0.0;
    let mut denominator = 1.0;
    for j in 0..k {
        let mut v = Complex64::new(0.0, 0.0);
        for i in 0..k {
            v += gamma_m[(j, i)] * candidate[i];
        }
        numerator += v.norm_sqr();
        denominator += (candidate[j].conj() * v).re;
    }
    numerator / denominator
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

/// Result of the single-loop zero-forcing design.
#[derive(Debug, Clone)]
pub struct ZfRun {
    /// Final zero-forcing precoder (power constraint met exactly).
    pub precoder: PrecoderMatrix,
    /// Final element locations.
    pub locations: LocationMatrix,
    /// Per-sweep diagnostics. Columns: `iter`, `trace_gamma`,
    /// `sum_rate_nats`, `wall_ms`; `trace_gamma` is non-increasing.
    pub trace: ConvergenceTrace,
    /// Number of placement sweeps executed.
    pub iterations: usize,
    /// Non-fatal anomalies (blocked grid scans, iteration cap).
    pub warnings: Vec<String>,
}

/// Runs the placement sweep from the given element layout, then emits the
/// zero-forcing precoder for the final channel.
///
/// Sweeps visit waveguides in ascending order and elements in ascending
/// order within each waveguide. For each waveguide the Gram inverse of the
/// *other* rows is rebuilt once (direct inversion of a `K x K` matrix) and
/// every element on the waveguide is re-placed by a feasibility-filtered
/// grid scan of the rank-1 trace reduction. Sweeping stops when the
/// fractional decrease of `tr Gamma` falls below the scenario's `epsilon`.
pub fn run_zf(
    config: &ScenarioConfig,
    users: &UserLayout,
    init_l: &LocationMatrix,
) -> Result<ZfRun> {
    config.validate()?;
    if config.waveguides <= config.users {
        return Err(PassError::RankDeficient(format!(
            "the placement sweep needs strictly more waveguides than users (got {} x {})",
            config.waveguides, config.users
        )));
    }

    let start = Instant::now();
    let grid = PlacementGrid::new(config);
    let table = PiTable::build(config, users, grid);
    let p_d = config.power_dl;
    let sigma2 = config.noise_dl;

    let mut locations = init_l.clone();
    let mut g = channel_matrix(config, users, &locations)?;
    let mut warnings = Vec::new();
    let mut trace = ConvergenceTrace::new(vec!["iter", "trace_gamma", "sum_rate_nats", "wall_ms"]);

    let mut current = trace_gamma(&g)?;
    trace.push(vec![
        0.0,
        current,
        zf_sum_rate(&g, p_d, sigma2, &config.weights_dl)?,
        start.elapsed().as_secs_f64() * 1e3,
    ]);

    let mut iterations = 0;
    let mut candidate = vec![Complex64::new(0.0, 0.0); config.users];
    for sweep in 1..=MAX_SWEEPS {
        for m in 0..config.waveguides {
            let reduced = g.clone().remove_row(m);
            let gamma_m = gram_inverse(&reduced)?;
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
                let found = table.grid().search(config, &others, |i, _| {
                    let pi = table.user_slice(m, i);
                    for k in 0..config.users {
                        candidate[k] = pi[k] + cross[k];
                    }
                    sm_trace_objective(&gamma_m, &candidate)
                });
                match found {
                    Some((_, position)) => locations[(n, m)] = position,
                    None => {
                        let note = format!(
                            "grid scan found no feasible position for element ({m},{n}); kept current"
                        );
                        if !warnings.contains(&note) {
                            warnings.push(note);
                        }
                    }
                }
                let column: Vec<f64> = (0..config.elements).map(|np| locations[(np, m)]).collect();
                for k in 0..config.users {
                    g[(m, k)] = effective_channel(config, users, k, m, &column)?;
                }
            }
        }

        let tr_new = trace_gamma(&g)?;
        trace.push(vec![
            sweep as f64,
            tr_new,
            zf_sum_rate(&g, p_d, sigma2, &config.weights_dl)?,
            start.elapsed().as_secs_f64() * 1e3,
        ]);
        if !tr_new.is_finite() {
            return Err(PassError::NumericalFailure {
                reason: format!("non-finite interference trace at sweep {sweep}"),
                trace: Box::new(trace),
            });
        }
        iterations = sweep;
        let decrease = (current - tr_new) / current.abs().max(f64::MIN_POSITIVE);
        current = tr_new;
        if decrease < config.epsilon {
            break;
        }
        if sweep == MAX_SWEEPS {
            warnings.push(format!("stopped at the {MAX_SWEEPS}-sweep safety cap"));
        }
    }

    Ok(ZfRun {
        precoder: zf_precoder(&g, p_d)?,
        locations,
        trace,
        iterations,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
