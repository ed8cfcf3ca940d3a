//! Experiment orchestration and the command-line front end.
//!
//! Everything the algorithm modules expose as "one run" is wired into a
//! Monte-Carlo batch here: seeded user sampling, per-mode dispatch with the
//! warm-start chain, parameter sweeps, CSV emission, and a thin CLI. The
//! whole pipeline is deterministic: a `(scenario, mode, seed)` triple always
//! reproduces the same sum-rate bit for bit on a given platform.
//!
//! Randomness comes exclusively from `ChaCha8Rng` seeded with the run's
//! 64-bit seed, a portable generator with a stable cross-platform stream.
//! Each run draws the user positions first and the initial element
//! locations second, so every mode sees the same user layout for the same
//! seed — comparisons across modes are paired by construction.

use std::fmt;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{run_baseline_dl, run_baseline_ul};
use crate::channel::{channel_matrix, random_feasible_locations};
use crate::config::{dbm_to_watts, ScenarioConfig, UserLayout};
use crate::downlink_fp::{run_fp_bcd, scale_to_power};
use crate::downlink_zf::run_zf;
use crate::error::{PassError, Result};
use crate::trace::ConvergenceTrace;
use crate::uplink::run_greedy_uplink;

// ---------------------------------------------------------------------------
// Modes and sweeps
// ---------------------------------------------------------------------------

/// Which algorithm a batch runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Downlink: fractional-programming precoding with element placement,
    /// warm-started from the zero-forcing design.
    DlFp,
    /// Downlink: zero-forcing precoding with element placement.
    DlZf,
    /// Uplink: MMSE detection with greedy element placement.
    UlMmse,
    /// Downlink baseline: fixed array with one antenna per RF chain.
    DlBaselineMimo,
    /// Downlink baseline: fixed array with `M * N` antennas.
    DlBaselineMmimo,
    /// Uplink baseline: fixed array with one antenna per RF chain.
    UlBaselineMimo,
    /// Uplink baseline: fixed array with `M * N` antennas.
    UlBaselineMmimo,
}

impl Mode {
    /// Every supported mode, in CLI documentation order.
    pub const ALL: [Mode; 7] = [
        Mode::DlFp,
        Mode::DlZf,
        Mode::UlMmse,
        Mode::DlBaselineMimo,
        Mode::DlBaselineMmimo,
        Mode::UlBaselineMimo,
        Mode::UlBaselineMmimo,
    ];

    /// The CLI/CSV spelling of the mode.
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::DlFp => "dl-fp",
            Mode::DlZf => "dl-zf",
            Mode::UlMmse => "ul-mmse",
            Mode::DlBaselineMimo => "dl-baseline-mimo",
            Mode::DlBaselineMmimo => "dl-baseline-mmimo",
            Mode::UlBaselineMimo => "ul-baseline-mimo",
            Mode::UlBaselineMmimo => "ul-baseline-mmimo",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = PassError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                PassError::Argument(format!(
                    "unknown mode '{s}'; expected one of: {}",
                    Mode::ALL.map(Mode::as_str).join(", ")
                ))
            })
    }
}

/// The scenario parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Transmit power in dBm; sets the downlink and uplink budgets alike.
    PowerDbm,
    /// Service-region length `D_x` in metres (also the waveguide length).
    RegionX,
    /// Elements per waveguide.
    Elements,
    /// Number of users.
    Users,
    /// Candidate positions per waveguide in the placement search.
    GridPoints,
}

impl SweepAxis {
    /// Every sweepable axis.
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::PowerDbm,
        SweepAxis::RegionX,
        SweepAxis::Elements,
        SweepAxis::Users,
        SweepAxis::GridPoints,
    ];

    /// The CLI/CSV spelling of the axis.
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::PowerDbm => "power",
            SweepAxis::RegionX => "dx",
            SweepAxis::Elements => "n",
            SweepAxis::Users => "k",
            SweepAxis::GridPoints => "grid",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = PassError;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                PassError::Argument(format!(
                    "unknown sweep axis '{s}'; expected one of: {}",
                    SweepAxis::ALL.map(SweepAxis::as_str).join(", ")
                ))
            })
    }
}

/// A parameter sweep: one axis, several values, every seed run at each.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// The varied parameter.
    pub axis: SweepAxis,
    /// The values to visit, in order.
    pub values: Vec<f64>,
}

/// Parses `axis:v1,v2,...` (for example `power:-10,0,10`).
pub fn parse_sweep(text: &str) -> Result<Sweep> {
    let (axis, rest) = text.split_once(':').ok_or_else(|| {
        PassError::Argument(format!(
            "sweep '{text}' must look like axis:v1,v2,... (for example power:-10,0,10)"
        ))
    })?;
    let axis: SweepAxis = axis.parse()?;
    let values = rest
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| PassError::Argument(format!("sweep value '{v}' is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(PassError::Argument("sweep needs at least one value".into()));
    }
    Ok(Sweep { axis, values })
}

/// Converts a sweep value that must be a whole count.
fn as_count(value: f64, what: &str) -> Result<usize> {
    if value.is_finite() && value >= 1.0 && value.fract() == 0.0 && value <= 1e12 {
        Ok(value as usize)
    } else {
        Err(PassError::InvalidConfig(format!(
            "{what} must be a positive whole number, got {value}"
        )))
    }
}

/// Returns the scenario with one swept parameter replaced, validated.
pub fn apply_axis(scenario: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut derived = scenario.clone();
    match axis {
        SweepAxis::PowerDbm => {
            let watts = dbm_to_watts(value);
            derived.power_dl = watts;
            derived.power_ul = watts;
        }
        SweepAxis::RegionX => derived.region_x = value,
        SweepAxis::Elements => derived.elements = as_count(value, "swept element count")?,
        SweepAxis::Users => derived = derived.with_users(as_count(value, "swept user count")?),
        SweepAxis::GridPoints => derived.grid_points = as_count(value, "swept grid size")?,
    }
    derived.validate()?;
    Ok(derived)
}

// ---------------------------------------------------------------------------
// Experiment specification and records
// ---------------------------------------------------------------------------

/// A complete batch description: scenario, algorithm, seeds, optional sweep.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    /// Base scenario; sweeps derive per-point variants from it.
    pub scenario: ScenarioConfig,
    /// Algorithm to run.
    pub mode: Mode,
    /// Seeds; each is one Monte-Carlo run per sweep point.
    pub seeds: Vec<u64>,
    /// Optional parameter sweep.
    pub sweep: Option<Sweep>,
}

impl ExperimentSpec {
    /// Checks the seed list, base scenario, and every sweep-derived scenario.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(PassError::InvalidConfig(
                "seed list must not be empty".into(),
            ));
        }
        self.scenario.validate()?;
        if let Some(sweep) = &self.sweep {
            for &value in &sweep.values {
                apply_axis(&self.scenario, sweep.axis, value)?;
            }
        }
        Ok(())
    }
}

/// One finished Monte-Carlo run.
///
/// A failed run keeps its seed and sweep position, stores `NaN` rates and a
/// `failed: ...` flag, and is excluded from aggregates; successful runs
/// always carry finite, non-negative rates.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Algorithm that produced the record.
    pub mode: Mode,
    /// Swept axis, if the batch swept one.
    pub sweep_axis: Option<SweepAxis>,
    /// Value of the swept parameter for this run.
    pub sweep_value: Option<f64>,
    /// RNG seed of the run.
    pub seed: u64,
    /// Final weighted sum-rate in nats (`NaN` if the run failed).
    pub sum_rate_nats: f64,
    /// Final weighted sum-rate in bit/s/Hz (`NaN` if the run failed).
    pub sum_rate_bits: f64,
    /// Iterations the algorithm executed (0 for closed-form modes).
    pub iterations: usize,
    /// Wall-clock duration of the run in milliseconds.
    pub wall_ms: f64,
    /// For the warm-started downlink mode: the sum-rate at its starting
    /// point, in bit/s/Hz.
    pub warm_start_bits: Option<f64>,
    /// Warnings from the run, or a single `failed: ...` entry.
    pub flags: Vec<String>,
    /// Per-iteration convergence trace, when the mode produces one.
    pub trace: Option<ConvergenceTrace>,
}

/// The outcome of one dispatched run, before batch bookkeeping.
#[derive(Debug, Clone)]
pub struct SingleRun {
    /// Final weighted sum-rate in nats.
    pub sum_rate_nats: f64,
    /// Iterations executed (0 for closed-form modes).
    pub iterations: usize,
    /// Warm-start sum-rate in bit/s/Hz (warm-started mode only).
    pub warm_start_bits: Option<f64>,
    /// Warnings collected along the way.
    pub flags: Vec<String>,
    /// Convergence trace, when the mode produces one.
    pub trace: Option<ConvergenceTrace>,
}

// ---------------------------------------------------------------------------
// Sampling and dispatch
// ---------------------------------------------------------------------------

/// Draws the user layout from an already-seeded generator: per user, `x`
/// uniform on `[0, D_x]` then `y` uniform on `[0, D_y]`.
pub fn sample_users_from<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> UserLayout {
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

/// Draws the user layout for a seed. This is the stream prefix of every
/// run with that seed, so all modes see identical users.
pub fn sample_users(config: &ScenarioConfig, seed: u64) -> UserLayout {
    sample_users_from(config, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Executes one `(scenario, mode, seed)` run: samples users (and, for the
/// reconfigurable-element modes, a random feasible starting layout), then
/// dispatches the algorithm.
///
/// The warm-started downlink mode runs the zero-forcing design first and
/// starts from its precoder and locations; if zero-forcing is unavailable
/// (it needs more waveguides than users), it falls back to a power-scaled
/// conjugate start from the random layout and flags the substitution.
pub fn run_single(scenario: &ScenarioConfig, mode: Mode, seed: u64) -> Result<SingleRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = sample_users_from(scenario, &mut rng);
    let antennas_massive = scenario.waveguides * scenario.elements;
    match mode {
        Mode::DlZf => {
            let init = random_feasible_locations(scenario, &mut rng)?;
            let run = run_zf(scenario, &users, &init)?;
            Ok(SingleRun {
                sum_rate_nats: run.trace.last("sum_rate_nats").unwrap_or(f64::NAN),
                iterations: run.iterations,
                warm_start_bits: None,
                flags: run.warnings,
                trace: Some(run.trace),
            })
        }
        Mode::DlFp => {
            let init = random_feasible_locations(scenario, &mut rng)?;
            let mut flags = Vec::new();
            let (init_w, init_l) = match run_zf(scenario, &users, &init) {
                Ok(zf) => {
                    flags.extend(zf.warnings.iter().map(|w| format!("zf: {w}")));
                    (zf.precoder, zf.locations)
                }
                Err(err) => {
                    flags.push(format!("zf-warm-start-unavailable: {err}"));
                    let g = channel_matrix(scenario, &users, &init)?;
                    (
                        scale_to_power(&g.map(|z| z.conj()), scenario.power_dl)?,
                        init,
                    )
                }
            };
            let run = run_fp_bcd(scenario, &users, &init_w, &init_l)?;
            flags.extend(run.warnings);
            let warm_start_bits = run
                .trace
                .column("objective_bits")
                .and_then(|bits| bits.first().copied());
            Ok(SingleRun {
                sum_rate_nats: run.trace.last("objective_nats").unwrap_or(f64::NAN),
                iterations: run.iterations,
                warm_start_bits,
                flags,
                trace: Some(run.trace),
            })
        }
        Mode::UlMmse => {
            let init = random_feasible_locations(scenario, &mut rng)?;
            let run = run_greedy_uplink(scenario, &users, &init)?;
            Ok(SingleRun {
                sum_rate_nats: run.trace.last("sum_rate_nats").unwrap_or(f64::NAN),
                iterations: run.iterations,
                warm_start_bits: None,
                flags: run.warnings,
                trace: Some(run.trace),
            })
        }
        Mode::DlBaselineMimo | Mode::DlBaselineMmimo => {
            let antennas = if mode == Mode::DlBaselineMimo {
                scenario.waveguides
            } else {
                antennas_massive
            };
            let run = run_baseline_dl(scenario, &users, antennas)?;
            Ok(SingleRun {
                sum_rate_nats: run.sum_rate_nats,
                iterations: run.iterations,
                warm_start_bits: None,
                flags: Vec::new(),
                trace: Some(run.trace),
            })
        }
        Mode::UlBaselineMimo | Mode::UlBaselineMmimo => {
            let antennas = if mode == Mode::UlBaselineMimo {
                scenario.waveguides
            } else {
                antennas_massive
            };
            let run = run_baseline_ul(scenario, &users, antennas)?;
            Ok(SingleRun {
                sum_rate_nats: run.sum_rate_nats,
                iterations: 0,
                warm_start_bits: None,
                flags: Vec::new(),
                trace: None,
            })
        }
    }
}

/// Runs the whole batch: every sweep point, every seed, in order. Per-run
/// failures become flagged records; only configuration problems abort.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let points: Vec<Option<f64>> = match &spec.sweep {
        Some(sweep) => sweep.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let axis = spec.sweep.as_ref().map(|s| s.axis);
    let mut records = Vec::new();
    for value in points {
        let scenario = match value {
            Some(v) => apply_axis(&spec.scenario, axis.expect("value implies sweep"), v)?,
            None => spec.scenario.clone(),
        };
        for &seed in &spec.seeds {
            let start = Instant::now();
            let outcome = run_single(&scenario, spec.mode, seed);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let record = match outcome {
                Ok(single) => RunRecord {
                    mode: spec.mode,
                    sweep_axis: axis,
                    sweep_value: value,
                    seed,
                    sum_rate_nats: single.sum_rate_nats,
                    sum_rate_bits: single.sum_rate_nats / std::f64::consts::LN_2,
                    iterations: single.iterations,
                    wall_ms,
                    warm_start_bits: single.warm_start_bits,
                    flags: single.flags,
                    trace: single.trace,
                },
                Err(err) => RunRecord {
                    mode: spec.mode,
                    sweep_axis: axis,
                    sweep_value: value,
                    seed,
                    sum_rate_nats: f64::NAN,
                    sum_rate_bits: f64::NAN,
                    iterations: 0,
                    wall_ms,
                    warm_start_bits: None,
                    flags: vec![format!("failed: {err}")],
                    trace: None,
                },
            };
            records.push(record);
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Per-sweep-point summary over the successful runs.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    /// Algorithm of the batch.
    pub mode: Mode,
    /// Swept axis, if any.
    pub sweep_axis: Option<SweepAxis>,
    /// Swept value, if any.
    pub sweep_value: Option<f64>,
    /// Number of successful runs aggregated.
    pub n_seeds: usize,
    /// Arithmetic mean of the sum-rates in bit/s/Hz (`NaN` if none
    /// succeeded).
    pub mean_bits: f64,
    /// Sample standard deviation of the sum-rates in bit/s/Hz (0 for a
    /// single run).
    pub std_bits: f64,
}

/// The (mode, axis, value) coordinates shared by every run of one sweep point.
type SweepPoint = (Mode, Option<SweepAxis>, Option<f64>);

/// Reduces ordered records to one row per sweep point. Failed runs (flagged,
/// `NaN` rate) are excluded from the statistics; `n_seeds` counts only the
/// successful runs.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut groups: Vec<(SweepPoint, Vec<f64>)> = Vec::new();
    for record in records {
        let point = (record.mode, record.sweep_axis, record.sweep_value);
        if groups.last().is_none_or(|(p, _)| *p != point) {
            groups.push((point, Vec::new()));
        }
        if record.sum_rate_bits.is_finite() {
            groups.last_mut().expect("group exists").1.push(record.sum_rate_bits);
        }
    }
    groups
        .into_iter()
        .map(|((mode, sweep_axis, sweep_value), bits)| {
            let n = bits.len();
            let mean = if n == 0 {
                f64::NAN
            } else {
                bits.iter().sum::<f64>() / n as f64
            };
            let std = if n < 2 {
                if n == 0 {
                    f64::NAN
                } else {
                    0.0
                }
            } else {
                let ss: f64 = bits.iter().map(|b| (b - mean) * (b - mean)).sum();
                (ss / (n - 1) as f64).sqrt()
            };
            AggregateRow {
                mode,
                sweep_axis,
                sweep_value,
                n_seeds: n,
                mean_bits: mean,
                std_bits: std,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

fn optional_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn axis_name(a: Option<SweepAxis>) -> String {
    a.map(|x| x.as_str().to_string())
        .unwrap_or_else(|| "none".into())
}

/// Writes the per-run CSV. Columns: `mode, sweep_axis, sweep_value, seed,
/// sum_rate_bits, sum_rate_nats, iters, wall_ms, warm_start_bits, flags`.
pub fn write_runs_csv<W: io::Write>(sink: W, records: &[RunRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record([
        "mode",
        "sweep_axis",
        "sweep_value",
        "seed",
        "sum_rate_bits",
        "sum_rate_nats",
        "iters",
        "wall_ms",
        "warm_start_bits",
        "flags",
    ])?;
    for r in records {
        writer.write_record([
            r.mode.as_str().to_string(),
            axis_name(r.sweep_axis),
            optional_value(r.sweep_value),
            r.seed.to_string(),
            r.sum_rate_bits.to_string(),
            r.sum_rate_nats.to_string(),
            r.iterations.to_string(),
            r.wall_ms.to_string(),
            optional_value(r.warm_start_bits),
            r.flags.join(";"),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the aggregate CSV. Columns: `mode, sweep_axis, sweep_value,
/// n_seeds, mean_bits, std_bits`.
pub fn write_aggregate_csv<W: io::Write>(sink: W, rows: &[AggregateRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record([
        "mode",
        "sweep_axis",
        "sweep_value",
        "n_seeds",
        "mean_bits",
        "std_bits",
    ])?;
    for row in rows {
        writer.write_record([
            row.mode.as_str().to_string(),
            axis_name(row.sweep_axis),
            optional_value(row.sweep_value),
            row.n_seeds.to_string(),
            row.mean_bits.to_string(),
            row.std_bits.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// File name for a record's trace: `<mode>_<seed>.csv`, with the axis and
/// value infixed (`<mode>_<axis><value>_<seed>.csv`) when the batch sweeps,
/// so per-point traces do not collide.
pub fn trace_filename(record: &RunRecord) -> String {
    match (record.sweep_axis, record.sweep_value) {
        (Some(axis), Some(value)) => {
            format!("{}_{}{}_{}.csv", record.mode, axis, value, record.seed)
        }
        _ => format!("{}_{}.csv", record.mode, record.seed),
    }
}

/// Writes every record's convergence trace under `dir` (created if absent).
pub fn write_traces(dir: &Path, records: &[RunRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for record in records {
        if let Some(trace) = &record.trace {
            trace.write_csv(File::create(dir.join(trace_filename(record)))?)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Configuration files
// ---------------------------------------------------------------------------

/// A parsed configuration file: scenario overrides plus optional batch
/// settings (all of which CLI flags override).
#[derive(Debug, Clone)]
pub struct FileConfig {
    /// Scenario with the file's overrides applied on top of the defaults.
    pub scenario: ScenarioConfig,
    /// Mode, when the file sets one.
    pub mode: Option<Mode>,
    /// Seeds, when the file sets `seeds` (a count) or `seed_list`.
    pub seeds: Option<Vec<u64>>,
    /// Sweep, when the file sets one.
    pub sweep: Option<Sweep>,
}

fn parse_number<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        PassError::InvalidConfig(format!("line {line}: invalid value '{value}' for {key}"))
    })
}

fn parse_f64_list(value: &str, key: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_number::<f64>(v, key, line))
        .collect()
}

/// Parses the flat `key=value` configuration format.
///
/// Blank lines are skipped and `#` starts a comment (full-line or trailing).
/// Keys match the scenario and batch field names; unknown keys are errors;
/// a repeated key keeps its last occurrence. Transmit and noise powers use
/// `_dbm`-suffixed keys and are stored in watts. The per-user vectors
/// (`weights_dl`, `weights_ul`, `shadowing`) are applied after the user
/// count, so they may appear in any order relative to `users`.
pub fn parse_config_str(text: &str) -> Result<FileConfig> {
    let mut scenario = ScenarioConfig::default();
    let mut mode = None;
    let mut seeds = None;
    let mut sweep = None;
    // (key, value, line) triples for vectors sized by the user count.
    let mut per_user: Vec<(String, String, usize)> = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            PassError::InvalidConfig(format!("line {line}: expected key=value, got '{content}'"))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "waveguides" => scenario.waveguides = parse_number(value, key, line)?,
            "elements" => scenario.elements = parse_number(value, key, line)?,
            "users" => {
                scenario = scenario.with_users(parse_number(value, key, line)?);
            }
            "carrier_hz" => scenario.carrier_hz = parse_number(value, key, line)?,
            "refractive_index" => scenario.refractive_index = parse_number(value, key, line)?,
            "height" => scenario.height = parse_number(value, key, line)?,
            "region_x" => scenario.region_x = parse_number(value, key, line)?,
            "region_y" => scenario.region_y = parse_number(value, key, line)?,
            "power_dl_dbm" => scenario.power_dl = dbm_to_watts(parse_number(value, key, line)?),
            "power_ul_dbm" => scenario.power_ul = dbm_to_watts(parse_number(value, key, line)?),
            "noise_dl_dbm" => scenario.noise_dl = dbm_to_watts(parse_number(value, key, line)?),
            "noise_ul_dbm" => scenario.noise_ul = dbm_to_watts(parse_number(value, key, line)?),
            "epsilon" => scenario.epsilon = parse_number(value, key, line)?,
            "grid_points" => scenario.grid_points = parse_number(value, key, line)?,
            "weights_dl" | "weights_ul" | "shadowing" => {
                per_user.push((key.to_string(), value.to_string(), line));
            }
            "mode" => mode = Some(value.parse::<Mode>()?),
            "seeds" => seeds = Some((0..parse_number::<u64>(value, key, line)?).collect()),
            "seed_list" => {
                seeds = Some(
                    value
                        .split(',')
                        .map(|v| parse_number::<u64>(v, key, line))
                        .collect::<Result<Vec<u64>>>()?,
                );
            }
            "sweep" => sweep = Some(parse_sweep(value)?),
            _ => {
                return Err(PassError::InvalidConfig(format!(
                    "line {line}: unknown configuration key '{key}'"
                )));
            }
        }
    }
    for (key, value, line) in per_user {
        let list = parse_f64_list(&value, &key, line)?;
        match key.as_str() {
            "weights_dl" => scenario.weights_dl = list,
            "weights_ul" => scenario.weights_ul = list,
            _ => scenario.shadowing = list,
        }
    }
    Ok(FileConfig {
        scenario,
        mode,
        seeds,
        sweep,
    })
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|err| {
        PassError::InvalidConfig(format!("cannot read config {}: {err}", path.display()))
    })?;
    parse_config_str(&text)
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

/// Command-line arguments of the simulator binary.
#[derive(Debug, Parser)]
#[command(
    name = "pass-sim",
    version,
    about = "Monte-Carlo link-level simulator for waveguide-fed reconfigurable antenna arrays"
)]
struct CliArgs {
    /// Path to a key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Algorithm to run: dl-fp, dl-zf, ul-mmse, dl-baseline-mimo,
    /// dl-baseline-mmimo, ul-baseline-mimo, ul-baseline-mmimo.
    #[arg(long)]
    mode: Option<String>,

    /// Number of seeds; expands to 0..N-1.
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<u64>,

    /// Explicit comma-separated seed list.
    #[arg(long)]
    seed_list: Option<String>,

    /// Parameter sweep as axis:v1,v2,... (axes: power, dx, n, k, grid).
    #[arg(long)]
    sweep: Option<String>,

    /// Override the number of candidate positions per waveguide.
    #[arg(long)]
    grid: Option<usize>,

    /// Output directory for runs.csv and aggregate.csv (created if absent).
    #[arg(long, default_value = "results")]
    out: PathBuf,

    /// Also write per-run convergence traces under <out>/traces/.
    #[arg(long)]
    trace: bool,
}

fn build_spec(args: &CliArgs) -> Result<ExperimentSpec> {
    let file = match &args.config {
        Some(path) => load_config(path)?,
        None => FileConfig {
            scenario: ScenarioConfig::default(),
            mode: None,
            seeds: None,
            sweep: None,
        },
    };
    let mut scenario = file.scenario;
    if let Some(grid) = args.grid {
        scenario.grid_points = grid;
    }
    let mode = match (&args.mode, file.mode) {
        (Some(name), _) => name.parse::<Mode>()?,
        (None, Some(mode)) => mode,
        (None, None) => {
            return Err(PassError::Argument(
                "no mode given; pass --mode or set mode= in the config file".into(),
            ));
        }
    };
    let seeds = if let Some(n) = args.seeds {
        (0..n).collect()
    } else if let Some(list) = &args.seed_list {
        list.split(',')
            .map(|v| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| PassError::Argument(format!("seed '{v}' is not a 64-bit integer")))
            })
            .collect::<Result<Vec<u64>>>()?
    } else if let Some(seeds) = file.seeds {
        seeds
    } else {
        vec![0]
    };
    let sweep = match &args.sweep {
        Some(text) => Some(parse_sweep(text)?),
        None => file.sweep,
    };
    Ok(ExperimentSpec {
        scenario,
        mode,
        seeds,
        sweep,
    })
}

fn describe(row: &AggregateRow) -> String {
    let point = match (row.sweep_axis, row.sweep_value) {
        (Some(axis), Some(value)) => format!(" {axis}={value}"),
        _ => String::new(),
    };
    format!(
        "{}{point}: mean {:.4} bit/s/Hz (std {:.4}, n={})",
        row.mode, row.mean_bits, row.std_bits, row.n_seeds
    )
}

/// Full CLI entry point: parses flags, loads configuration, runs the batch,
/// writes `runs.csv`, `aggregate.csv`, and (with `--trace`) per-run traces
/// under the output directory, and prints one summary line per sweep point.
///
/// Returns the process exit status: 0 on success, 2 for usage and
/// configuration errors, 1 for failures while running or writing results.
/// Nothing is written unless the configuration is valid, so a bad
/// invocation leaves no partial outputs behind.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(argv) {
        Ok(args) => args,
        Err(err) => {
            // clap renders its own help/version output and usage errors.
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    let spec = match build_spec(&args) {
        Ok(spec) => spec,
        Err(err) => {
            eprintln!("configuration error: {err}");
            return 2;
        }
    };
    if let Err(err) = spec.validate() {
        eprintln!("configuration error: {err}");
        return 2;
    }
    let records = match run_experiment(&spec) {
        Ok(records) => records,
        Err(err) => {
            eprintln!("run failed: {err}");
            return 1;
        }
    };
    let rows = aggregate(&records);
    let written = (|| -> Result<()> {
        fs::create_dir_all(&args.out)?;
        write_runs_csv(File::create(args.out.join("runs.csv"))?, &records)?;
        write_aggregate_csv(File::create(args.out.join("aggregate.csv"))?, &rows)?;
        if args.trace {
            write_traces(&args.out.join("traces"), &records)?;
        }
        Ok(())
    })();
    if let Err(err) = written {
        eprintln!("could not write results: {err}");
        return 1;
    }
    for row in &rows {
        println!("{}", describe(row));
    }
    0
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_scenario() -> ScenarioConfig {
        // Small grid keeps placement sweeps fast in unit tests.
        ScenarioConfig {
            grid_points: 256,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn mode_and_axis_strings_round_trip() {
        for mode in Mode::ALL {
            assert_eq!(mode.as_str().parse::<Mode>().unwrap(), mode);
        }
        for axis in SweepAxis::ALL {
            assert_eq!(axis.as_str().parse::<SweepAxis>().unwrap(), axis);
        }
        assert!("dl-unknown".parse::<Mode>().is_err());
        assert!("frequency".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn sweep_parsing_accepts_lists_and_rejects_malformed_input() {
        let sweep = parse_sweep("power:-10,0,10").unwrap();
        assert_eq!(sweep.axis, SweepAxis::PowerDbm);
        assert_eq!(sweep.values, vec![-10.0, 0.0, 10.0]);
        assert_eq!(parse_sweep("grid:256").unwrap().values, vec![256.0]);
        assert!(parse_sweep("power").is_err(), "missing colon");
        assert!(parse_sweep("volume:1,2").is_err(), "unknown axis");
        assert!(parse_sweep("power:1,x").is_err(), "non-numeric value");
    }

    #[test]
    fn apply_axis_changes_exactly_the_swept_parameter() {
        let base = quick_scenario();
        let swept = apply_axis(&base, SweepAxis::PowerDbm, 10.0).unwrap();
        assert!((swept.power_dl - 0.01).abs() < 1e-15);
        assert!((swept.power_ul - 0.01).abs() < 1e-15);
        assert_eq!(swept.users, base.users);

        let swept = apply_axis(&base, SweepAxis::Users, 6.0).unwrap();
        assert_eq!(swept.users, 6);
        assert_eq!(swept.weights_dl.len(), 6);

        assert!(apply_axis(&base, SweepAxis::Users, 2.5).is_err());
        assert!(apply_axis(&base, SweepAxis::GridPoints, 1.0).is_err());
        assert!(apply_axis(&base, SweepAxis::RegionX, -3.0).is_err());
    }

    #[test]
    fn sample_users_is_deterministic_and_in_bounds() {
        let cfg = ScenarioConfig::default();
        let a = sample_users(&cfg, 7);
        let b = sample_users(&cfg, 7);
        assert_eq!(a, b, "same seed must give the identical layout");
        assert_ne!(a, sample_users(&cfg, 8), "different seeds should differ");
        for p in &a.positions {
            assert!((0.0..=cfg.region_x).contains(&p[0]));
            assert!((0.0..=cfg.region_y).contains(&p[1]));
            assert_eq!(p[2], 0.0);
        }
    }

    #[test]
    fn sample_users_empirical_mean_matches_the_region_center() {
        let cfg = ScenarioConfig::default();
        let draws = 10_000 / cfg.users;
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0);
        for seed in 0..draws as u64 {
            for p in sample_users(&cfg, seed).positions {
                sx += p[0];
                sy += p[1];
                n += 1;
            }
        }
        let (mx, my) = (sx / n as f64, sy / n as f64);
        // Uniform on [0, D]: standard error of the mean is D/sqrt(12 n).
        let se_x = cfg.region_x / (12.0 * n as f64).sqrt();
        let se_y = cfg.region_y / (12.0 * n as f64).sqrt();
        assert!(
            (mx - cfg.region_x / 2.0).abs() < 3.0 * se_x,
            "mean x {mx} vs {} (3se {})",
            cfg.region_x / 2.0,
            3.0 * se_x
        );
        assert!(
            (my - cfg.region_y / 2.0).abs() < 3.0 * se_y,
            "mean y {my} vs {} (3se {})",
            cfg.region_y / 2.0,
            3.0 * se_y
        );
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let err = parse_config_str("waveguides = 3\nnoise_floor = 1\n").unwrap_err();
        assert!(
            err.to_string()
                .contains("unknown configuration key 'noise_floor'"),
            "got: {err}"
        );
    }

    #[test]
    fn config_file_round_trip() {
        let text = "\
# full-line comment
waveguides = 3
elements = 2
users = 2
carrier_hz = 28e9
region_x = 20.0       # trailing comment
region_y = 4.0
power_dl_dbm = 10
power_ul_dbm = 0
noise_dl_dbm = -90
noise_ul_dbm = -90
epsilon = 1e-3
grid_points = 128
weights_dl = 0.7,0.3
mode = dl-zf
seeds = 3
sweep = grid:64,128
";
        let parsed = parse_config_str(text).unwrap();
        assert_eq!(parsed.scenario.waveguides, 3);
        assert_eq!(parsed.scenario.users, 2);
        assert!((parsed.scenario.power_dl - 0.01).abs() < 1e-15);
        assert!((parsed.scenario.noise_ul - 1e-12).abs() < 1e-24);
        assert_eq!(parsed.scenario.weights_dl, vec![0.7, 0.3]);
        assert_eq!(parsed.mode, Some(Mode::DlZf));
        assert_eq!(parsed.seeds, Some(vec![0, 1, 2]));
        assert_eq!(parsed.sweep.unwrap().values, vec![64.0, 128.0]);
        parsed.scenario.validate().unwrap();
    }

    #[test]
    fn config_file_applies_per_user_vectors_after_the_user_count() {
        // weights first, users second: the weights must survive.
        let text = "weights_dl = 0.9,0.1\nusers = 2\n";
        let parsed = parse_config_str(text).unwrap();
        assert_eq!(parsed.scenario.weights_dl, vec![0.9, 0.1]);
        assert_eq!(parsed.scenario.users, 2);
    }

    #[test]
    fn config_file_rejects_garbage_lines_and_values() {
        assert!(parse_config_str("just words\n").is_err());
        assert!(parse_config_str("users = many\n").is_err());
        assert!(parse_config_str("sweep = power\n").is_err());
        assert!(parse_config_str("mode = dl-nope\n").is_err());
        // Blank lines and comments are fine.
        parse_config_str("\n# comment only\n\n").unwrap();
    }

    #[test]
    fn two_seeds_without_a_sweep_give_two_records_and_one_aggregate_row() {
        let spec = ExperimentSpec {
            scenario: quick_scenario(),
            mode: Mode::DlZf,
            seeds: vec![0, 1],
            sweep: None,
        };
        let records = run_experiment(&spec).unwrap();
        assert_eq!(records.len(), 2);
        for r in &records {
            assert!(r.sum_rate_bits.is_finite() && r.sum_rate_bits >= 0.0);
            assert!(r.flags.is_empty(), "unexpected flags: {:?}", r.flags);
        }
        let rows = aggregate(&records);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n_seeds, 2);
        let mean = (records[0].sum_rate_bits + records[1].sum_rate_bits) / 2.0;
        assert!((rows[0].mean_bits - mean).abs() < 1e-12);
    }

    #[test]
    fn warm_started_downlink_never_falls_below_its_starting_rate() {
        let spec = ExperimentSpec {
            scenario: quick_scenario(),
            mode: Mode::DlFp,
            seeds: vec![0, 1],
            sweep: None,
        };
        for record in run_experiment(&spec).unwrap() {
            let warm = record.warm_start_bits.expect("warm start must be recorded");
            assert!(
                record.sum_rate_bits >= warm,
                "seed {}: final {} below warm start {warm}",
                record.seed,
                record.sum_rate_bits
            );
        }
    }

    #[test]
    fn sweep_orders_records_by_point_then_seed() {
        let spec = ExperimentSpec {
            scenario: quick_scenario(),
            mode: Mode::UlBaselineMimo,
            seeds: vec![0, 1],
            sweep: Some(Sweep {
                axis: SweepAxis::PowerDbm,
                values: vec![-10.0, 0.0],
            }),
        };
        let records = run_experiment(&spec).unwrap();
        let observed: Vec<(f64, u64)> = records
            .iter()
            .map(|r| (r.sweep_value.unwrap(), r.seed))
            .collect();
        assert_eq!(
            observed,
            vec![(-10.0, 0), (-10.0, 1), (0.0, 0), (0.0, 1)]
        );
        assert_eq!(aggregate(&records).len(), 2);
    }

    #[test]
    fn per_run_failures_are_flagged_without_aborting_the_batch() {
        // Zero-forcing needs more waveguides than users; give it K = M.
        let scenario = quick_scenario().with_users(5);
        let spec = ExperimentSpec {
            scenario,
            mode: Mode::DlZf,
            seeds: vec![0, 1],
            sweep: None,
        };
        let records = run_experiment(&spec).unwrap();
        assert_eq!(records.len(), 2);
        for r in &records {
            assert!(r.sum_rate_bits.is_nan());
            assert!(r.flags.iter().any(|f| f.starts_with("failed:")));
        }
        let rows = aggregate(&records);
        assert_eq!(rows[0].n_seeds, 0);
        assert!(rows[0].mean_bits.is_nan());
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        for mode in [Mode::DlZf, Mode::UlMmse, Mode::DlBaselineMimo] {
            let a = run_single(&quick_scenario(), mode, 3).unwrap();
            let b = run_single(&quick_scenario(), mode, 3).unwrap();
            assert_eq!(
                a.sum_rate_nats.to_bits(),
                b.sum_rate_nats.to_bits(),
                "{mode} must be deterministic"
            );
        }
    }

    #[test]
    fn csv_output_matches_the_documented_columns() {
        let spec = ExperimentSpec {
            scenario: quick_scenario(),
            mode: Mode::DlZf,
            seeds: vec![0],
            sweep: None,
        };
        let records = run_experiment(&spec).unwrap();
        let mut runs = Vec::new();
        write_runs_csv(&mut runs, &records).unwrap();
        let runs = String::from_utf8(runs).unwrap();
        assert!(runs.starts_with(
            "mode,sweep_axis,sweep_value,seed,sum_rate_bits,sum_rate_nats,iters,wall_ms,warm_start_bits,flags"
        ));
        assert_eq!(runs.trim_end().lines().count(), 2);
        assert!(runs.contains("dl-zf,none,,0,"));

        let mut agg = Vec::new();
        write_aggregate_csv(&mut agg, &aggregate(&records)).unwrap();
        let agg = String::from_utf8(agg).unwrap();
        assert!(agg.starts_with("mode,sweep_axis,sweep_value,n_seeds,mean_bits,std_bits"));
        assert_eq!(agg.trim_end().lines().count(), 2);
    }

    #[test]
    fn trace_filenames_disambiguate_sweep_points() {
        let base = RunRecord {
            mode: Mode::DlFp,
            sweep_axis: None,
            sweep_value: None,
            seed: 4,
            sum_rate_nats: 1.0,
            sum_rate_bits: 1.0,
            iterations: 1,
            wall_ms: 1.0,
            warm_start_bits: None,
            flags: Vec::new(),
            trace: None,
        };
        assert_eq!(trace_filename(&base), "dl-fp_4.csv");
        let swept = RunRecord {
            sweep_axis: Some(SweepAxis::PowerDbm),
            sweep_value: Some(-10.0),
            ..base
        };
        assert_eq!(trace_filename(&swept), "dl-fp_power-10_4.csv");
    }
}
