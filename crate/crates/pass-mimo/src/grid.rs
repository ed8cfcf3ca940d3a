//! Candidate-point grid for pinching-element placement.
//!
//! All three hybrid solvers relocate one element at a time by scanning a
//! uniform grid of candidate positions along the waveguide, skipping points
//! that violate the minimum spacing to the other (currently fixed) elements
//! on the same guide, and keeping the best-scoring survivor. This module
//! provides the grid, the feasibility filter, the argmax scan with its
//! deterministic tie-break, and a precomputed table of single-element channel
//! contributions at every grid point (the dominant cost of the scans, which
//! depends only on the fixed geometry and can therefore be built once per
//! scenario and reused by every iteration).

use num_complex::Complex64;

use crate::channel::pi_coeff;
use crate::config::{ScenarioConfig, UserLayout};

// ---------------------------------------------------------------------------
// PlacementGrid
// ---------------------------------------------------------------------------

/// Uniform grid of `grid_points` candidate positions spanning a waveguide,
/// endpoints included.
#[derive(Debug, Clone)]
pub struct PlacementGrid {
    points: Vec<f64>,
}

impl PlacementGrid {
    /// Builds the grid `{0, len/(L-1), ..., len}` from the scenario's
    /// `grid_points` and guide length.
    pub fn new(config: &ScenarioConfig) -> Self {
        let l = config.grid_points;
        let len = config.guide_length();
        let denom = (l - 1) as f64;
        // Scale the unit fraction rather than accumulate a step so the final
        // point lands exactly on the guide end.
        let points = (0..l).map(|i| len * (i as f64 / denom)).collect();
        PlacementGrid { points }
    }

    /// The candidate positions in ascending order.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of candidate positions.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: a grid has at least two points by configuration.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of the grid points that keep at least the minimum spacing to
    /// every position in `others` (a gap exactly equal to the minimum is
    /// kept, matching the closed feasible set).
    pub fn feasible_indices(&self, config: &ScenarioConfig, others: &[f64]) -> Vec<usize> {
        let gap = config.min_spacing();
        (0..self.points.len())
            .filter(|&i| others.iter().all(|&o| (self.points[i] - o).abs() >= gap))
            .collect()
    }

    /// Scans the feasible subset and returns `(index, position)` of the
    /// highest-scoring point, evaluating `objective(index, position)` only on
    /// feasible points. Ties are broken toward the smallest position; an
    /// empty feasible subset yields `None` (callers keep the current
    /// location and flag a warning).
    pub fn search<F>(
        &self,
        config: &ScenarioConfig,
        others: &[f64],
        mut objective: F,
    ) -> Option<(usize, f64)>
    where
        F: FnMut(usize, f64) -> f64,
    {
        let gap = config.min_spacing();
        let mut best: Option<(usize, f64, f64)> = None; // (index, position, score)
        for (i, &p) in self.points.iter().enumerate() {
            if others.iter().any(|&o| (p - o).abs() < gap) {
                continue;
            }
            let score = objective(i, p);
            // Strict comparison keeps the earliest (smallest-position) point
            // on ties.
            match best {
                Some((_, _, s)) if score <= s => {}
                _ => best = Some((i, p, score)),
            }
        }
        best.map(|(i, p, _)| (i, p))
    }
}

// ---------------------------------------------------------------------------
// PiTable
// ---------------------------------------------------------------------------

/// Precomputed single-element contributions `pi(k, m, grid point)` for every
/// user, waveguide, and candidate position.
///
/// Layout: for fixed `(m, i)` the `K` user values are contiguous, which is
/// the access pattern of every placement scan. Immutable after construction
/// and shareable across runs on the same scenario and user layout.
#[derive(Debug, Clone)]
pub struct PiTable {
    grid: PlacementGrid,
    users: usize,
    values: Vec<Complex64>,
}

impl PiTable {
    /// Evaluates the contribution of each grid point toward each user once.
    pub fn build(config: &ScenarioConfig, users: &UserLayout, grid: PlacementGrid) -> Self {
        let k_total = config.users;
        let mut values = Vec::with_capacity(config.waveguides * grid.len() * k_total);
        for m in 0..config.waveguides {
            for &p in grid.points() {
                for k in 0..k_total {
                    values.push(pi_coeff(config, users, k, m, p));
                }
            }
        }
        PiTable {
            grid,
            users: k_total,
            values,
        }
    }

    /// The underlying candidate grid.
    pub fn grid(&self) -> &PlacementGrid {
        &self.grid
    }

    /// All `K` user contributions of grid point `i` on waveguide `m`.
    pub fn user_slice(&self, m: usize, i: usize) -> &[Complex64] {
        let base = (m * self.grid.len() + i) * self.users;
        &self.values[base..base + self.users]
    }

    /// Contribution of grid point `i` on waveguide `m` toward user `k`.
    pub fn value(&self, k: usize, m: usize, i: usize) -> Complex64 {
        self.user_slice(m, i)[k]
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
