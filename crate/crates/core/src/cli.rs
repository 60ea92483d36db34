//! Command-line front end. Everything funnels through [`run`], which returns
//! the would-be stdout/stderr and exit code so the binary stays a thin shell.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::fock_oracle::{run_oracle_series, FockConfig, FockError, DEFAULT_TAIL_TOL};
use crate::gaussian::OpticalInit;
use crate::model::{build_generator, classify_regime, ModelParams, DEFAULT_REGIME_TOL};
use crate::observables::{
    long_time_g2, record_at, threshold_g2, time_series, CorrelationRecord, Correlator, CriticalDetuning,
    LongTimePolicy, ObservableError,
};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Default dimension cap for `oracle-compare`, large enough for the
/// short-time comparisons the oracle is meant for.
pub const ORACLE_DIM_CAP: usize = 1 << 18;
const ORACLE_WARN_T: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "carl", version, about = "Linear CARL dynamics, photon statistics and a Fock-space cross-check")]
pub struct Cli {
    /// Emit a single JSON object instead of CSV/text.
    #[arg(long, global = true)]
    json: bool,
    /// key=value file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (default: number of processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenfrequencies and stability regime of the drift generator.
    Classify(ClassifyArgs),
    /// Correlator time series for one initial condition.
    Evolve(EvolveArgs),
    /// Correlators over an (|alpha|^2, phi) grid.
    Sweep(SweepArgs),
    /// Closed-form long-time g2 on the delta=0 and delta=4chi^2 surfaces.
    Threshold(ThresholdArgs),
    /// Gaussian pipeline against the truncated Fock-space oracle.
    OracleCompare(OracleArgs),
}

#[derive(Debug, Args)]
struct ModelFlags {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct ClassifyArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Relative tolerance for threshold detection.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct EvolveArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[command(flatten)]
    model: ModelFlags,
    /// Initial photon number |alpha|^2.
    #[arg(long)]
    alpha2: Option<f64>,
    /// Initial optical phase in radians.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    t_start: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of time points, ends included.
    #[arg(long)]
    steps: Option<usize>,
    /// Explicit comma-separated times; overrides the range.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    alpha2_min: Option<f64>,
    #[arg(long)]
    alpha2_max: Option<f64>,
    #[arg(long)]
    alpha2_count: Option<usize>,
    #[arg(long)]
    phi_min: Option<f64>,
    #[arg(long)]
    phi_max: Option<f64>,
    #[arg(long)]
    phi_count: Option<usize>,
    /// Evaluate at a single fixed time.
    #[arg(long)]
    t: Option<f64>,
    /// Evaluate the long-time limit.
    #[arg(long)]
    long_time: bool,
    #[arg(long)]
    t_start: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated output columns.
    #[arg(long, value_delimiter = ',', value_enum)]
    fields: Option<Vec<Field>>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct ThresholdArgs {
    /// Critical detuning, 0 or 4 chi^2.
    #[arg(long)]
    delta_c: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    /// Comma-separated comparison times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Relative tolerance on occupations.
    #[arg(long)]
    occ_tol: Option<f64>,
    /// Absolute tolerance on g2 values and bounds.
    #[arg(long)]
    g2_tol: Option<f64>,
    #[arg(long)]
    tail_tol: Option<f64>,
    #[arg(long)]
    dim_cap: Option<usize>,
    #[arg(long)]
    nmax_atom: Option<usize>,
    #[arg(long)]
    nmax_phot: Option<usize>,
}

/// Named parameter sets: `fig1`/`fig2` surfaces, `fig3*`/`fig4*` time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3a,
    Fig3b,
    Fig3c,
    Fig4a,
    Fig4b,
    Fig4c,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig3c => "fig3c",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig4c => "fig4c",
        }
    }

    /// `(delta, chi)`.
    pub fn params(self) -> (f64, f64) {
        match self {
            Preset::Fig1 | Preset::Fig3a | Preset::Fig3b | Preset::Fig3c => (1.0, 1.0),
            Preset::Fig2 | Preset::Fig4a | Preset::Fig4b | Preset::Fig4c => (-1.0, 1.0),
        }
    }

    pub fn is_surface(self) -> bool {
        matches!(self, Preset::Fig1 | Preset::Fig2)
    }

    /// Initial intensity of the time-series presets.
    pub fn alpha2(self) -> Option<f64> {
        match self {
            Preset::Fig3a | Preset::Fig4a => Some(0.0),
            Preset::Fig3b | Preset::Fig3c | Preset::Fig4b | Preset::Fig4c => Some(4.0),
            _ => None,
        }
    }

    /// Phase is fixed only where the intensity is zero; the other
    /// time-series presets need `--phi`.
    pub fn phi(self) -> Option<f64> {
        match self {
            Preset::Fig3a | Preset::Fig4a => Some(0.0),
            _ => None,
        }
    }

    pub fn time_grid(self) -> Option<TimeGrid> {
        match self {
            Preset::Fig3a | Preset::Fig3b | Preset::Fig3c => Some(TimeGrid { t_start: 0.05, t_end: 6.0, steps: 120 }),
            Preset::Fig4a | Preset::Fig4b | Preset::Fig4c => Some(TimeGrid { t_start: 0.05, t_end: 10.0, steps: 200 }),
            _ => None,
        }
    }

    pub fn grid(self) -> Option<Grid> {
        self.is_surface().then_some(Grid {
            alpha2_min: 0.0,
            alpha2_max: 10.0,
            alpha2_count: 21,
            phi_min: 0.0,
            phi_max: TAU,
            phi_count: 32,
        })
    }

    pub fn time_policy(self) -> Option<TimePolicy> {
        match self {
            Preset::Fig1 => Some(TimePolicy::LongTime),
            Preset::Fig2 => Some(TimePolicy::Fixed(8.0)),
            other => other.time_grid().map(TimePolicy::Series),
        }
    }

    /// Full sweep definition of a surface preset.
    pub fn sweep_spec(self) -> Option<SweepSpec> {
        let (delta, chi) = self.params();
        Some(SweepSpec {
            params: ModelParams::new(delta, chi).ok()?,
            grid: self.grid()?,
            time: self.time_policy()?,
            fields: Field::defaults_for(&self.time_policy()?),
        })
    }
}

/// Evenly spaced times, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.t_start];
        }
        let dt = (self.t_end - self.t_start) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.t_start + k as f64 * dt).collect()
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_end < self.t_start {
            return Err(CliError::usage(format!("bad time range [{}, {}]", self.t_start, self.t_end)));
        }
        if self.steps == 0 {
            return Err(CliError::usage("steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TimePolicy {
    Fixed(f64),
    LongTime,
    Series(TimeGrid),
}

/// `|alpha|^2` values are spaced with both ends included; `phi` values cover
/// the half-open `[phi_min, phi_max)` so a full turn is not sampled twice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub alpha2_min: f64,
    pub alpha2_max: f64,
    pub alpha2_count: usize,
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_count: usize,
}

impl Grid {
    pub fn point(alpha2: f64, phi: f64) -> Self {
        Self { alpha2_min: alpha2, alpha2_max: alpha2, alpha2_count: 1, phi_min: phi, phi_max: phi, phi_count: 1 }
    }

    pub fn alpha2_values(&self) -> Vec<f64> {
        TimeGrid { t_start: self.alpha2_min, t_end: self.alpha2_max, steps: self.alpha2_count }.times()
    }

    pub fn phi_values(&self) -> Vec<f64> {
        let step = (self.phi_max - self.phi_min) / self.phi_count as f64;
        (0..self.phi_count).map(|k| self.phi_min + k as f64 * step).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let all = [self.alpha2_min, self.alpha2_max, self.phi_min, self.phi_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(CliError::usage("grid ranges must be finite"));
        }
        if self.alpha2_count == 0 || self.phi_count == 0 {
            return Err(CliError::usage("grid counts must be at least 1"));
        }
        if self.alpha2_min < 0.0 || self.alpha2_max < self.alpha2_min {
            return Err(CliError::usage(format!("bad alpha2 range [{}, {}]", self.alpha2_min, self.alpha2_max)));
        }
        if self.phi_min < 0.0 || self.phi_max > TAU || self.phi_max < self.phi_min {
            return Err(CliError::usage(format!("phi range [{}, {}] must lie in [0, 2pi]", self.phi_min, self.phi_max)));
        }
        Ok(())
    }
}

/// Output column of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Field {
    N1,
    N3,
    G11,
    G33,
    G13,
    ClassicalBound,
    QuantumBound,
}

impl Field {
    pub const ALL: [Field; 7] =
        [Field::N1, Field::N3, Field::G11, Field::G33, Field::G13, Field::ClassicalBound, Field::QuantumBound];

    pub fn name(self) -> &'static str {
        match self {
            Field::N1 => "n1",
            Field::N3 => "n3",
            Field::G11 => "g11",
            Field::G33 => "g33",
            Field::G13 => "g13",
            Field::ClassicalBound => "classical_bound",
            Field::QuantumBound => "quantum_bound",
        }
    }

    fn of(self, r: &CorrelationRecord) -> Option<f64> {
        match self {
            Field::N1 => Some(r.n1),
            Field::N3 => Some(r.n3),
            Field::G11 => r.g11,
            Field::G33 => r.g33,
            Field::G13 => r.g13,
            Field::ClassicalBound => r.classical_bound,
            Field::QuantumBound => r.quantum_bound,
        }
    }

    fn correlator(self) -> Option<Correlator> {
        match self {
            Field::G11 => Some(Correlator::G11),
            Field::G33 => Some(Correlator::G33),
            Field::G13 => Some(Correlator::G13),
            _ => None,
        }
    }

    /// Every field for time-resolved policies, the three correlators for the
    /// long-time limit (occupations diverge there).
    pub fn defaults_for(time: &TimePolicy) -> Vec<Field> {
        match time {
            TimePolicy::LongTime => vec![Field::G11, Field::G33, Field::G13],
            _ => Field::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub params: ModelParams,
    pub grid: Grid,
    pub time: TimePolicy,
    pub fields: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellOutcome {
    Records { records: Vec<CorrelationRecord>, overflow_at: Option<f64> },
    LongTime { values: Vec<Option<f64>>, errors: Vec<String> },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub alpha2: f64,
    pub phi: f64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

fn evaluate_cell(spec: &SweepSpec, alpha2: f64, phi: f64) -> CellOutcome {
    let init = match OpticalInit::from_intensity(alpha2, phi) {
        Ok(i) => i,
        Err(e) => return CellOutcome::Failed { error: e.to_string() },
    };
    let gen = build_generator(spec.params);
    match spec.time {
        TimePolicy::Fixed(t) => match record_at(&gen, init, t) {
            Ok(r) => CellOutcome::Records { records: vec![r], overflow_at: None },
            Err(e) if e.is_overflow() => CellOutcome::Records { records: vec![], overflow_at: Some(t) },
            Err(e) => CellOutcome::Failed { error: e.to_string() },
        },
        TimePolicy::Series(grid) => match time_series(&gen, init, &grid.times()) {
            Ok((records, overflow_at)) => CellOutcome::Records { records, overflow_at },
            Err(e) => CellOutcome::Failed { error: e.to_string() },
        },
        TimePolicy::LongTime => {
            let policy = LongTimePolicy::default();
            let mut values = Vec::new();
            let mut errors = Vec::new();
            for f in &spec.fields {
                let Some(which) = f.correlator() else {
                    values.push(None);
                    continue;
                };
                match long_time_g2(spec.params, init, which, &policy) {
                    Ok(v) => values.push(Some(v.representative())),
                    Err(e) => {
                        values.push(None);
                        errors.push(format!("{}: {e}", f.name()));
                    }
                }
            }
            CellOutcome::LongTime { values, errors }
        }
    }
}

/// Evaluates every grid cell on a pool of `jobs` threads (`None`: one per
/// processor). Cells come back in row-major order, `alpha2` outermost.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<SweepCell>, CliError> {
    spec.grid.validate()?;
    if let TimePolicy::Series(g) = &spec.time {
        g.validate()?;
    }
    if let TimePolicy::Fixed(t) = spec.time {
        if !t.is_finite() {
            return Err(CliError::usage(format!("t must be finite, got {t}")));
        }
    }
    let points: Vec<(f64, f64)> = spec
        .grid
        .alpha2_values()
        .into_iter()
        .flat_map(|a| spec.grid.phi_values().into_iter().map(move |p| (a, p)))
        .collect();
    with_pool(jobs, || {
        points
            .par_iter()
            .map(|&(alpha2, phi)| SweepCell { alpha2, phi, outcome: evaluate_cell(spec, alpha2, phi) })
            .collect()
    })
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::new(EXIT_NUMERICAL, format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
}

/// Captured result of one invocation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Flat `key=value` settings; keys use underscores or hyphens interchangeably.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

const CONFIG_KEYS: &[&str] = &[
    "jobs", "json", "preset", "delta", "chi", "tol", "alpha2", "phi", "t_start", "t_end", "steps", "times",
    "alpha2_min", "alpha2_max", "alpha2_count", "phi_min", "phi_max", "phi_count", "t", "long_time", "fields",
    "delta_c", "occ_tol", "g2_tol", "tail_tol", "dim_cap", "nmax_atom", "nmax_phot",
];

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", n + 1)))?;
            let key = k.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!("config line {}: unknown key '{}'", n + 1, k.trim())));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| CliError::usage(format!("config: bad value for {key}: '{v}'"))),
        }
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config: bad list for {key}: '{v}'"))),
        }
    }

    fn get_enum<T: ValueEnum>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => T::from_str(v, true).map(Some).map_err(|_| CliError::usage(format!("config: bad value for {key}: '{v}'"))),
        }
    }

    fn get_enum_list<T: ValueEnum>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| T::from_str(s.trim(), true))
                .collect::<Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config: bad list for {key}: '{v}'"))),
        }
    }
}

fn required<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing --{}", name.replace('_', "-"))))
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

const RECORD_HEADER: &str = "t,n1,n3,g11,g33,g13,classical_bound,quantum_bound";

fn record_row(r: &CorrelationRecord) -> String {
    let mut row = fmt_num(r.t);
    for f in Field::ALL {
        row.push(',');
        row.push_str(&fmt_opt(f.of(r)));
    }
    row
}

fn model_params(flags: &ModelFlags, cfg: &Config, preset: Option<(f64, f64)>) -> Result<ModelParams, CliError> {
    let delta = required(flags.delta.or(cfg.get("delta")?).or(preset.map(|p| p.0)), "delta")?;
    let chi = required(flags.chi.or(cfg.get("chi")?).or(preset.map(|p| p.1)), "chi")?;
    ModelParams::new(delta, chi).map_err(|e| CliError::usage(e.to_string()))
}

fn optical_init(alpha2: f64, phi: f64) -> Result<OpticalInit, CliError> {
    OpticalInit::from_intensity(alpha2, phi).map_err(|e| CliError::usage(e.to_string()))
}

fn preset_from(flag: Option<Preset>, cfg: &Config) -> Result<Option<Preset>, CliError> {
    Ok(flag.or(cfg.get_enum("preset")?))
}

/// Runs one invocation; `args[0]` is the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: EXIT_OK, stdout: text, stderr: String::new() }
            };
        }
    };
    match dispatch(&cli) {
        Ok(out) => out,
        Err(e) => Outcome { code: e.code, stdout: String::new(), stderr: format!("error: {}\n", e.message) },
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let json = cli.json || cfg.get::<bool>("json")?.unwrap_or(false);
    let jobs = cli.jobs.or(cfg.get("jobs")?);
    if jobs == Some(0) {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    match &cli.command {
        Command::Classify(a) => cmd_classify(a, &cfg, json),
        Command::Evolve(a) => cmd_evolve(a, &cfg, json),
        Command::Sweep(a) => cmd_sweep(a, &cfg, json, jobs),
        Command::Threshold(a) => cmd_threshold(a, &cfg, json),
        Command::OracleCompare(a) => cmd_oracle_compare(a, &cfg, json, jobs),
    }
}

fn ok(stdout: String) -> Result<Outcome, CliError> {
    Ok(Outcome { code: EXIT_OK, stdout, stderr: String::new() })
}

fn to_json(value: Value) -> String {
    let mut s = serde_json::to_string_pretty(&value).expect("json values always serialize");
    s.push('\n');
    s
}

fn cmd_classify(a: &ClassifyArgs, cfg: &Config, json: bool) -> Result<Outcome, CliError> {
    let params = model_params(&a.model, cfg, None)?;
    let tol = a.tol.or(cfg.get("tol")?).unwrap_or(DEFAULT_REGIME_TOL);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(CliError::usage(format!("tol must lie in (0, 1), got {tol}")));
    }
    let report = classify_regime(&build_generator(params), tol).map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;
    let threshold = report.threshold_kind().map(|k| k.to_string());
    if json {
        let eig: Vec<Value> = report.eigenfrequencies.iter().map(|z| json!({"re": z.re, "im": z.im})).collect();
        return ok(to_json(json!({
            "schema_version": SCHEMA_VERSION,
            "command": "classify",
            "delta": params.delta(),
            "chi": params.chi(),
            "eigenfrequencies": eig,
            "regime": report.regime.label(),
            "regime_description": report.regime.to_string(),
            "omega": report.omega,
            "gamma": report.gamma,
            "threshold": threshold,
        })));
    }
    let mut out = String::new();
    let _ = writeln!(out, "delta: {}", params.delta());
    let _ = writeln!(out, "chi: {}", params.chi());
    for (k, z) in report.eigenfrequencies.iter().enumerate() {
        let _ = writeln!(out, "omega_{}: {} {} {}i", k + 1, fmt_num(z.re), if z.im < 0.0 { '-' } else { '+' }, fmt_num(z.im.abs()));
    }
    let _ = writeln!(out, "regime: {}", report.regime);
    let _ = writeln!(out, "Omega: {}", fmt_opt(report.omega));
    let _ = writeln!(out, "Gamma: {}", fmt_opt(report.gamma));
    let _ = writeln!(out, "threshold: {}", threshold.unwrap_or_else(|| "none".into()));
    ok(out)
}

fn cmd_evolve(a: &EvolveArgs, cfg: &Config, json: bool) -> Result<Outcome, CliError> {
    let preset = preset_from(a.preset, cfg)?;
    if let Some(p) = preset.filter(|p| p.is_surface()) {
        return Err(CliError::usage(format!("preset {} is a surface; use `sweep`", p.name())));
    }
    let params = model_params(&a.model, cfg, preset.map(Preset::params))?;
    let alpha2 = a.alpha2.or(cfg.get("alpha2")?).or(preset.and_then(Preset::alpha2)).unwrap_or(0.0);
    let phi = match a.phi.or(cfg.get("phi")?).or(preset.and_then(Preset::phi)) {
        Some(v) => v,
        None if preset.is_some() => return Err(CliError::usage(format!("preset {} needs --phi", preset.unwrap().name()))),
        None => 0.0,
    };
    let init = optical_init(alpha2, phi)?;
    let times = match a.times.clone().or(cfg.get_list("times")?) {
        Some(t) => t,
        None => {
            let base = preset.and_then(Preset::time_grid);
            let grid = TimeGrid {
                t_start: required(a.t_start.or(cfg.get("t_start")?).or(base.map(|g| g.t_start)), "t_start")?,
                t_end: required(a.t_end.or(cfg.get("t_end")?).or(base.map(|g| g.t_end)), "t_end")?,
                steps: required(a.steps.or(cfg.get("steps")?).or(base.map(|g| g.steps)), "steps")?,
            };
            grid.validate()?;
            grid.times()
        }
    };
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
        return Err(CliError::usage("times must be finite and non-empty"));
    }
    let gen = build_generator(params);
    let regime = classify_regime(&gen, DEFAULT_REGIME_TOL).map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;
    let (records, overflow_at) = time_series(&gen, init, &times).map_err(numerical)?;
    let code = if overflow_at.is_some() { EXIT_NUMERICAL } else { EXIT_OK };

    let stdout = if json {
        to_json(json!({
            "schema_version": SCHEMA_VERSION,
            "command": "evolve",
            "delta": params.delta(),
            "chi": params.chi(),
            "alpha2": alpha2,
            "phi": init.phase(),
            "regime": regime.regime.label(),
            "records": records,
            "overflow_at": overflow_at,
        }))
    } else {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# delta={} chi={} alpha2={} phi={} regime={}",
            params.delta(),
            params.chi(),
            alpha2,
            init.phase(),
            regime.regime.label()
        );
        let _ = writeln!(out, "{RECORD_HEADER}");
        for r in &records {
            let _ = writeln!(out, "{}", record_row(r));
        }
        if let Some(t) = overflow_at {
            let _ = writeln!(out, "# overflow at t={}", fmt_num(t));
        }
        out
    };
    Ok(Outcome { code, stdout, stderr: String::new() })
}

fn numerical(e: ObservableError) -> CliError {
    CliError::new(EXIT_NUMERICAL, e.to_string())
}

fn sweep_spec(a: &SweepArgs, cfg: &Config) -> Result<SweepSpec, CliError> {
    let preset = preset_from(a.preset, cfg)?;
    if let Some(p) = preset.filter(|p| !p.is_surface()) {
        return Err(CliError::usage(format!("preset {} is a time series; use `evolve`", p.name())));
    }
    let params = model_params(&a.model, cfg, preset.map(Preset::params))?;
    let base = preset.and_then(Preset::grid);
    let grid = Grid {
        alpha2_min: required(a.alpha2_min.or(cfg.get("alpha2_min")?).or(base.map(|g| g.alpha2_min)), "alpha2_min")?,
        alpha2_max: required(a.alpha2_max.or(cfg.get("alpha2_max")?).or(base.map(|g| g.alpha2_max)), "alpha2_max")?,
        alpha2_count: required(a.alpha2_count.or(cfg.get("alpha2_count")?).or(base.map(|g| g.alpha2_count)), "alpha2_count")?,
        phi_min: required(a.phi_min.or(cfg.get("phi_min")?).or(base.map(|g| g.phi_min)), "phi_min")?,
        phi_max: required(a.phi_max.or(cfg.get("phi_max")?).or(base.map(|g| g.phi_max)), "phi_max")?,
        phi_count: required(a.phi_count.or(cfg.get("phi_count")?).or(base.map(|g| g.phi_count)), "phi_count")?,
    };
    grid.validate()?;

    let flag_fixed = a.t;
    let flag_long = a.long_time.then_some(true);
    let flag_series = a.t_start.is_some() || a.t_end.is_some() || a.steps.is_some();
    let chosen = [flag_fixed.is_some(), flag_long.is_some(), flag_series].iter().filter(|b| **b).count();
    if chosen > 1 {
        return Err(CliError::usage("choose one of --t, --long-time, or --t-start/--t-end/--steps"));
    }
    let time = if let Some(t) = flag_fixed {
        TimePolicy::Fixed(t)
    } else if flag_long.is_some() {
        TimePolicy::LongTime
    } else if flag_series {
        series_from(a, cfg)?
    } else if let Some(t) = cfg.get::<f64>("t")? {
        TimePolicy::Fixed(t)
    } else if cfg.get::<bool>("long_time")?.unwrap_or(false) {
        TimePolicy::LongTime
    } else if cfg.get::<usize>("steps")?.is_some() {
        series_from(a, cfg)?
    } else {
        preset
            .and_then(Preset::time_policy)
            .ok_or_else(|| CliError::usage("missing time policy: --t, --long-time, or --t-start/--t-end/--steps"))?
    };
    if let TimePolicy::Fixed(t) = time {
        if !t.is_finite() {
            return Err(CliError::usage(format!("t must be finite, got {t}")));
        }
    }
    let fields = match a.fields.clone().or(cfg.get_enum_list("fields")?) {
        Some(f) if f.is_empty() => return Err(CliError::usage("--fields must name at least one column")),
        Some(f) => f,
        None => Field::defaults_for(&time),
    };
    if time == TimePolicy::LongTime {
        if let Some(bad) = fields.iter().find(|f| f.correlator().is_none()) {
            return Err(CliError::usage(format!("field {} has no long-time limit", bad.name())));
        }
    }
    Ok(SweepSpec { params, grid, time, fields })
}

fn series_from(a: &SweepArgs, cfg: &Config) -> Result<TimePolicy, CliError> {
    let grid = TimeGrid {
        t_start: required(a.t_start.or(cfg.get("t_start")?), "t_start")?,
        t_end: required(a.t_end.or(cfg.get("t_end")?), "t_end")?,
        steps: required(a.steps.or(cfg.get("steps")?), "steps")?,
    };
    grid.validate()?;
    Ok(TimePolicy::Series(grid))
}

fn cmd_sweep(a: &SweepArgs, cfg: &Config, json: bool, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let spec = sweep_spec(a, cfg)?;
    let cells = run_sweep(&spec, jobs)?;
    if json {
        let columns: Vec<&str> = spec.fields.iter().map(|f| f.name()).collect();
        return ok(to_json(json!({
            "schema_version": SCHEMA_VERSION,
            "command": "sweep",
            "delta": spec.params.delta(),
            "chi": spec.params.chi(),
            "grid": spec.grid,
            "time_policy": spec.time,
            "fields": columns,
            "cells": cells,
        })));
    }
    let mut out = String::new();
    let policy = match spec.time {
        TimePolicy::Fixed(t) => format!("t={t}"),
        TimePolicy::LongTime => "long_time".into(),
        TimePolicy::Series(g) => format!("t_start={} t_end={} steps={}", g.t_start, g.t_end, g.steps),
    };
    let _ = writeln!(out, "# delta={} chi={} {policy}", spec.params.delta(), spec.params.chi());
    let mut header = String::from("alpha2,phi");
    if spec.time != TimePolicy::LongTime {
        header.push_str(",t");
    }
    for f in &spec.fields {
        header.push(',');
        header.push_str(f.name());
    }
    let _ = writeln!(out, "{header}");
    let empty_row = |cell: &SweepCell| {
        let mut row = format!("{},{}", fmt_num(cell.alpha2), fmt_num(cell.phi));
        if spec.time != TimePolicy::LongTime {
            row.push(',');
        }
        row.push_str(&",".repeat(spec.fields.len()));
        row
    };
    let mut footer = Vec::new();
    for cell in &cells {
        let at = format!("alpha2={} phi={}", fmt_num(cell.alpha2), fmt_num(cell.phi));
        match &cell.outcome {
            CellOutcome::Records { records, overflow_at } => {
                if records.is_empty() {
                    let _ = writeln!(out, "{}", empty_row(cell));
                }
                for r in records {
                    let mut row = format!("{},{},{}", fmt_num(cell.alpha2), fmt_num(cell.phi), fmt_num(r.t));
                    for f in &spec.fields {
                        row.push(',');
                        row.push_str(&fmt_opt(f.of(r)));
                    }
                    let _ = writeln!(out, "{row}");
                }
                if let Some(t) = overflow_at {
                    footer.push(format!("# overflow at t={} ({at})", fmt_num(*t)));
                }
            }
            CellOutcome::LongTime { values, errors } => {
                let mut row = format!("{},{}", fmt_num(cell.alpha2), fmt_num(cell.phi));
                for v in values {
                    row.push(',');
                    row.push_str(&fmt_opt(*v));
                }
                let _ = writeln!(out, "{row}");
                footer.extend(errors.iter().map(|e| format!("# failed {at}: {e}")));
            }
            CellOutcome::Failed { error } => {
                let _ = writeln!(out, "{}", empty_row(cell));
                footer.push(format!("# failed {at}: {error}"));
            }
        }
    }
    for line in footer {
        let _ = writeln!(out, "{line}");
    }
    ok(out)
}

fn cmd_threshold(a: &ThresholdArgs, cfg: &Config, json: bool) -> Result<Outcome, CliError> {
    let delta_c = required(a.delta_c.or(cfg.get("delta_c")?), "delta_c")?;
    let chi = required(a.chi.or(cfg.get("chi")?), "chi")?;
    let alpha2 = a.alpha2.or(cfg.get("alpha2")?).unwrap_or(0.0);
    let phi = a.phi.or(cfg.get("phi")?).unwrap_or(0.0);
    let params = ModelParams::new(delta_c, chi).map_err(|e| CliError::usage(e.to_string()))?;
    let init = optical_init(alpha2, phi)?;
    let surface = CriticalDetuning::identify(delta_c, chi, DEFAULT_REGIME_TOL)
        .ok_or_else(|| CliError::usage(format!("delta_c={delta_c} is neither 0 nor 4 chi^2={}", 4.0 * chi * chi)))?;
    let g2 = threshold_g2(params, init, surface, DEFAULT_REGIME_TOL).map_err(|e| CliError::usage(e.to_string()))?;
    if json {
        return ok(to_json(json!({
            "schema_version": SCHEMA_VERSION,
            "command": "threshold",
            "delta_c": delta_c,
            "chi": chi,
            "alpha2": alpha2,
            "phi": init.phase(),
            "g2": g2,
        })));
    }
    ok(format!(
        "delta_c,chi,alpha2,phi,g2\n{},{},{},{},{}\n",
        fmt_num(delta_c),
        fmt_num(chi),
        fmt_num(alpha2),
        fmt_num(init.phase()),
        fmt_num(g2)
    ))
}

/// One observable compared between the two engines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub t: f64,
    pub observable: &'static str,
    pub gaussian: Option<f64>,
    pub fock: Option<f64>,
    /// Relative for occupations, absolute otherwise; `None` if either side is undefined.
    pub deviation: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Side-by-side comparison of two records: occupations by relative
/// deviation, everything else by absolute deviation. A value defined on one
/// side only is a failure.
pub fn compare_records(g: &CorrelationRecord, f: &CorrelationRecord, occ_tol: f64, g2_tol: f64) -> Vec<Comparison> {
    Field::ALL
        .iter()
        .map(|&field| {
            let (a, b) = (field.of(g), field.of(f));
            let occupation = matches!(field, Field::N1 | Field::N3);
            let tolerance = if occupation { occ_tol } else { g2_tol };
            let deviation = match (a, b) {
                (Some(x), Some(y)) if occupation => Some(if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()) }),
                (Some(x), Some(y)) => Some((x - y).abs()),
                _ => None,
            };
            let pass = match (a, b, deviation) {
                (None, None, _) => true,
                (_, _, Some(d)) => d <= tolerance,
                _ => false,
            };
            Comparison { t: g.t, observable: field.name(), gaussian: a, fock: b, deviation, tolerance, pass }
        })
        .collect()
}

fn cmd_oracle_compare(a: &OracleArgs, cfg: &Config, json: bool, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let params = model_params(&a.model, cfg, None)?;
    let alpha2 = a.alpha2.or(cfg.get("alpha2")?).unwrap_or(0.0);
    let phi = a.phi.or(cfg.get("phi")?).unwrap_or(0.0);
    let init = optical_init(alpha2, phi)?;
    let times = a.times.clone().or(cfg.get_list("times")?).unwrap_or_else(|| vec![0.5, 1.0]);
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
        return Err(CliError::usage("times must be finite and non-empty"));
    }
    let occ_tol = a.occ_tol.or(cfg.get("occ_tol")?).unwrap_or(1e-6);
    let g2_tol = a.g2_tol.or(cfg.get("g2_tol")?).unwrap_or(1e-4);
    if !(occ_tol > 0.0 && g2_tol > 0.0) {
        return Err(CliError::usage("tolerances must be positive"));
    }
    let fock = FockConfig {
        nmax_atom: a.nmax_atom.or(cfg.get("nmax_atom")?).unwrap_or(16),
        nmax_phot: a.nmax_phot.or(cfg.get("nmax_phot")?).unwrap_or(16),
        tail_tol: a.tail_tol.or(cfg.get("tail_tol")?).unwrap_or(DEFAULT_TAIL_TOL),
        dim_cap: a.dim_cap.or(cfg.get("dim_cap")?).unwrap_or(ORACLE_DIM_CAP),
    };
    fock.validate().map_err(|e| CliError::usage(e.to_string()))?;

    let mut stderr = String::new();
    for t in times.iter().filter(|t| t.abs() > ORACLE_WARN_T) {
        let _ = writeln!(stderr, "warning: t={t} is beyond the range where truncation stays affordable");
    }
    let gen = build_generator(params);
    let runs = with_pool(jobs, || run_oracle_series(params, init, &times, &fock))?;

    let mut rows = Vec::new();
    let mut failures: Vec<(f64, String)> = Vec::new();
    for (&t, run) in times.iter().zip(runs) {
        let g = match record_at(&gen, init, t) {
            Ok(r) => r,
            Err(e) => {
                failures.push((t, format!("gaussian: {e}")));
                continue;
            }
        };
        match run {
            Ok(r) => rows.extend(compare_records(&g, &r.record, occ_tol, g2_tol)),
            Err(e @ FockError::TruncationInadequate { .. }) => failures.push((t, e.to_string())),
            Err(e) => failures.push((t, format!("oracle: {e}"))),
        }
    }
    let max_dev = |occ: bool| {
        rows.iter()
            .filter(|c| matches!(c.observable, "n1" | "n3") == occ)
            .filter_map(|c| c.deviation)
            .fold(0.0, f64::max)
    };
    let (max_occ, max_g2) = (max_dev(true), max_dev(false));
    let pass = failures.is_empty() && rows.iter().all(|c| c.pass);
    let code = if pass { EXIT_OK } else { EXIT_FAIL };

    let stdout = if json {
        let fails: Vec<Value> = failures.iter().map(|(t, e)| json!({"t": t, "error": e})).collect();
        to_json(json!({
            "schema_version": SCHEMA_VERSION,
            "command": "oracle-compare",
            "delta": params.delta(),
            "chi": params.chi(),
            "alpha2": alpha2,
            "phi": init.phase(),
            "occ_tol": occ_tol,
            "g2_tol": g2_tol,
            "rows": rows,
            "failures": fails,
            "max_occupation_rel_dev": max_occ,
            "max_g2_abs_dev": max_g2,
            "pass": pass,
        }))
    } else {
        let mut out = String::new();
        let _ = writeln!(out, "# delta={} chi={} alpha2={} phi={}", params.delta(), params.chi(), alpha2, init.phase());
        let _ = writeln!(out, "t,observable,gaussian,fock,deviation,tolerance,status");
        for c in &rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_num(c.t),
                c.observable,
                fmt_opt(c.gaussian),
                fmt_opt(c.fock),
                fmt_opt(c.deviation),
                fmt_num(c.tolerance),
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        for (t, e) in &failures {
            let _ = writeln!(out, "# t={}: {e}", fmt_num(*t));
        }
        let _ = writeln!(out, "# max_occupation_rel_dev={}", fmt_num(max_occ));
        let _ = writeln!(out, "# max_g2_abs_dev={}", fmt_num(max_g2));
        let _ = writeln!(out, "# result: {}", if pass { "PASS" } else { "FAIL" });
        out
    };
    Ok(Outcome { code, stdout, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn grid_semantics() {
        let g = Grid { alpha2_min: 0.0, alpha2_max: 4.0, alpha2_count: 3, phi_min: 0.0, phi_max: TAU, phi_count: 4 };
        assert_eq!(g.alpha2_values(), vec![0.0, 2.0, 4.0]);
        assert_eq!(g.phi_values(), vec![0.0, FRAC_PI_2, std::f64::consts::PI, 3.0 * FRAC_PI_2]);
        assert_eq!(Grid::point(3.0, 1.0).phi_values(), vec![1.0]);
        assert!(Grid { phi_max: 7.0, ..g }.validate().is_err());
        assert!(Grid { alpha2_count: 0, ..g }.validate().is_err());
    }

    #[test]
    fn config_parsing() {
        let c = Config::parse("# comment\n delta = -1\nchi=1\nt-start=0.5\n\n").unwrap();
        assert_eq!(c.get::<f64>("delta").unwrap(), Some(-1.0));
        assert_eq!(c.get::<f64>("t_start").unwrap(), Some(0.5));
        assert_eq!(c.get::<f64>("phi").unwrap(), None);
        assert!(Config::parse("bogus=1").is_err());
        assert!(Config::parse("delta").is_err());
        assert!(Config::parse("delta=abc").unwrap().get::<f64>("delta").is_err());
    }

    #[test]
    fn number_format_has_17_digits() {
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(-0.25), "-2.5000000000000000e-1");
    }

    #[test]
    fn compare_handles_undefined() {
        let a = CorrelationRecord::from_parts(1.0, 0.0, 4.0, None, Some(1.0), None);
        let b = CorrelationRecord::from_parts(1.0, 0.0, 4.0 + 1e-9, None, Some(1.0 + 1e-6), None);
        assert!(compare_records(&a, &b, 1e-6, 1e-4).iter().all(|c| c.pass));
        let c = CorrelationRecord::from_parts(1.0, 1.0, 4.0, Some(2.0), Some(1.0), Some(1.0));
        assert!(!compare_records(&a, &c, 1e-6, 1e-4).iter().all(|c| c.pass));
    }
}
