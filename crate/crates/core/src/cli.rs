//! Command-line front end: `simulate`, `fit`, `loglik`, `map`, `study`,
//! `compare`.
//!
//! Exit codes: 0 success, 2 data or I/O error, 3 numerical or estimation
//! failure, 64 usage error. Every JSON document carries `schema_version`
//! and the resolved configuration; trajectory CSVs carry both as `#`
//! comment lines.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::estimate::{self, FitResult, Method, OptimizerConfig};
use crate::exact::{self, EmConfig, LoglikEstimate};
use crate::potential::ModelParams;
use crate::simbench::{self, CompareMatrix, GridSpec, MapMetrics, Scenario, SimMode, StudyConfig, SCHEMA_VERSION};
use crate::trajectory::TrajectorySet;
use crate::transition::{kessler_filled_loglik, pseudo_loglik, Scheme};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DRIFTSCAPE_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn data(context: impl Display, e: impl Display) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }

    fn numeric(e: impl Display) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

/// Optional configuration file (`--config`). Flags given on the command
/// line take precedence over its entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    pub optimizer: Option<OptimizerConfig>,
    pub em: Option<EmConfig>,
    pub grid: Option<GridSpec>,
    pub methods: Option<Vec<Method>>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::from_json(&read_text(p)?),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "driftscape", version, about = "Potential-based SDE movement models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories from a scenario.
    Simulate(SimulateArgs),
    /// Fit a model to trajectory data.
    Fit(FitArgs),
    /// Evaluate a criterion at fitted parameters.
    Loglik(LoglikArgs),
    /// Grid a fitted potential, optionally against a reference.
    Map(MapArgs),
    /// Replicated simulation and fitting study.
    Study(StudyArgs),
    /// Evaluate several fits under every criterion.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    DefaultK2,
    StandardK1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    EulerFine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Euler,
    Ozaki,
    Kessler,
    Ea,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario, used when the config has none.
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioName>,
    /// Sampling interval.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Trajectories per data set.
    #[arg(long)]
    pub g: Option<usize>,
    /// Points per trajectory.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Replication index; selects the random substream.
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Recenter on the centroid and rescale to unit RMS radius.
    #[arg(long)]
    pub anonymize: bool,
    /// Output CSV (`track_id,t,x,y`).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the true parameters as JSON.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub data: PathBuf,
    /// Number of mixture components.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Evaluation budget of each restart.
    #[arg(long)]
    pub max_evals: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output JSON; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoglikArgs {
    /// Fit document or parameter JSON.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = CriterionArg::Ea)]
    pub criterion: CriterionArg,
    /// Monte Carlo replicates per segment for the `ea` criterion.
    #[arg(long, default_value_t = 100)]
    pub mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Fit document or parameter JSON.
    #[arg(long)]
    pub fit: PathBuf,
    /// Reference parameters; enables the error grid and ISE.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cells along each axis.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Potential grid CSV (`x,y,value`).
    #[arg(long)]
    pub out: PathBuf,
    /// Absolute-error grid CSV; needs `--truth`.
    #[arg(long)]
    pub error_out: Option<PathBuf>,
    /// Metrics JSON; needs `--truth`.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    /// Replications fitted with ea-mcem.
    #[arg(long)]
    pub ea_replications: Option<usize>,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for median-map and error grids (CSV).
    #[arg(long)]
    pub grids: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Fit documents, one row each.
    #[arg(long, num_args = 1.., required = true)]
    pub fits: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method `{s}` (expected one of {})", names.join(", "))
    })
}

// ---------------------------------------------------------------------------
// Documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub scenario: Scenario,
    pub replication: u64,
    pub anonymize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: Method,
    pub k: usize,
    pub data: String,
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<EmConfig>,
}

/// Output of `fit`: the fit result plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub config: FitConfig,
    #[serde(flatten)]
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikConfig {
    pub fit: String,
    pub data: String,
    pub criterion: String,
    pub mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikDocument {
    pub schema_version: u32,
    pub config: LoglikConfig,
    pub value: f64,
    pub segments: usize,
    /// Kessler: segments left out. Ozaki: segments that fell back to Euler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ea: Option<LoglikEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub fit: String,
    pub truth: Option<String>,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub schema_version: u32,
    pub config: MapConfig,
    pub ise: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub fits: Vec<String>,
    pub data: String,
    pub mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareDocument {
    pub schema_version: u32,
    pub config: CompareConfig,
    pub matrix: CompareMatrix,
}

// ---------------------------------------------------------------------------
// Entry points

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // Fails only when a global pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Loglik(a) => cmd_loglik(&a),
        Command::Map(a) => cmd_map(&a),
        Command::Study(a) => cmd_study(&a),
        Command::Compare(a) => cmd_compare(&a),
    }
}

// ---------------------------------------------------------------------------
// I/O helpers

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::data(path.display(), e))
}

fn to_json<T: Serialize>(doc: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(doc).map_err(CliError::numeric)?;
    s.push('\n');
    Ok(s)
}

fn emit_json<T: Serialize>(out: Option<&Path>, doc: &T) -> Result<(), CliError> {
    let text = to_json(doc)?;
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Reads trajectory CSV data.
pub fn parse_trajectories(path: &Path) -> Result<TrajectorySet<f64>, CliError> {
    TrajectorySet::read_csv_path(path).map_err(|e| CliError::data(path.display(), e))
}

/// Reads parameters from a fit document or a bare parameter document.
pub fn read_theta(path: &Path) -> Result<ModelParams<f64>, CliError> {
    let text = read_text(path)?;
    if let Ok(doc) = serde_json::from_str::<FitDocument>(&text) {
        return Ok(doc.fit.theta_hat);
    }
    serde_json::from_str::<ModelParams<f64>>(&text)
        .map_err(|e| CliError::data(path.display(), format!("neither a fit document nor parameters: {e}")))
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

// ---------------------------------------------------------------------------
// Commands

fn resolve_scenario(args: &ScenarioArgs, cfg: &RunConfig) -> Result<Scenario, CliError> {
    let dt = args.dt.unwrap_or(1.0);
    let mut sc = match (&cfg.scenario, args.scenario) {
        (_, Some(ScenarioName::StandardK1)) => Scenario::standard_k1(dt),
        (_, Some(ScenarioName::DefaultK2)) => Scenario::default_k2(dt),
        (Some(s), None) => s.clone(),
        (None, None) => Scenario::default_k2(dt),
    };
    if let Some(dt) = args.dt {
        sc.dt = dt;
    }
    if let Some(g) = args.g {
        sc.g = g;
    }
    if let Some(n) = args.n {
        sc.n = n;
    }
    if let Some(seed) = args.seed.or(cfg.seed) {
        sc.seed = seed;
    }
    sc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(sc)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.scenario.config.as_deref())?;
    let mut scenario = resolve_scenario(&a.scenario, &cfg)?;
    if let Some(m) = a.mode {
        scenario.mode = match m {
            ModeArg::Exact => SimMode::Exact,
            ModeArg::EulerFine => SimMode::EulerFine,
        };
    }
    let mut data = simbench::simulate(&scenario, a.replication).map_err(CliError::numeric)?;
    if a.anonymize {
        data = data.anonymized();
    }
    let resolved = SimulateConfig {
        scenario,
        replication: a.replication,
        anonymize: a.anonymize,
    };
    let config_line = serde_json::to_string(&resolved).map_err(CliError::numeric)?;
    let text = format!(
        "# schema_version: {SCHEMA_VERSION}\n# config: {config_line}\n{}",
        data.to_csv_string()
    );
    write_text(&a.out, &text)?;
    if let Some(p) = &a.truth_out {
        write_text(p, &to_json(&resolved.scenario.theta_true)?)?;
    }
    println!(
        "simulated {} tracks, {} points -> {}",
        data.tracks().len(),
        data.n_points(),
        a.out.display()
    );
    Ok(())
}

fn resolve_optimizer(cfg: &RunConfig, restarts: Option<usize>, max_evals: Option<usize>, seed: Option<u64>) -> OptimizerConfig {
    let mut opt = cfg.optimizer.clone().unwrap_or_default();
    if let Some(r) = restarts {
        opt.restarts = r;
    }
    if let Some(m) = max_evals {
        opt.max_evals = m;
    }
    if let Some(s) = seed.or(cfg.seed) {
        opt.seed = s;
    }
    opt
}

/// Fit of `method` as run by both `fit` and `study`.
fn fit_with(
    method: Method,
    data: &TrajectorySet<f64>,
    k: usize,
    opt: &OptimizerConfig,
    em: &EmConfig,
) -> Result<FitResult, CliError> {
    match method {
        Method::EaMcem => exact::fit_ea_mcem(data, k, em, opt).map_err(CliError::numeric),
        m => estimate::fit(m, data, k, opt).map_err(CliError::numeric),
    }
}

fn resolve_em(cfg: &RunConfig, seed: u64) -> EmConfig {
    EmConfig {
        seed,
        ..cfg.em.clone().unwrap_or_default()
    }
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    if a.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let opt = resolve_optimizer(&cfg, a.restarts, a.max_evals, a.seed);
    opt.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data = parse_trajectories(&a.data)?;
    let em = resolve_em(&cfg, opt.seed);
    let fit = fit_with(a.method, &data, a.k, &opt, &em)?;
    println!(
        "method={} objective={} skipped_fraction={}",
        fit.method, fit.objective, fit.skipped_fraction
    );
    let doc = FitDocument {
        schema_version: SCHEMA_VERSION,
        config: FitConfig {
            method: a.method,
            k: a.k,
            data: path_string(&a.data),
            optimizer: opt,
            em: (a.method == Method::EaMcem).then_some(em),
        },
        fit,
    };
    emit_json(a.out.as_deref(), &doc)
}

fn cmd_loglik(a: &LoglikArgs) -> Result<(), CliError> {
    let theta = read_theta(&a.fit)?;
    let data = parse_trajectories(&a.data)?;
    if a.mc == 0 {
        return Err(CliError::Usage("--mc must be at least 1".into()));
    }
    let (criterion, value, skipped, ea) = match a.criterion {
        CriterionArg::Ea => {
            let e = exact::loglik_estimate(&theta, &data, a.mc, a.seed).map_err(CliError::numeric)?;
            ("ea", e.value, None, Some(e))
        }
        c => {
            let (name, contrast) = match c {
                CriterionArg::Euler => ("euler", pseudo_loglik(Scheme::Euler, &theta, &data)),
                CriterionArg::Ozaki => ("ozaki", pseudo_loglik(Scheme::Ozaki, &theta, &data)),
                _ => ("kessler", kessler_filled_loglik(&theta, &data)),
            };
            let contrast = contrast.map_err(CliError::numeric)?;
            (name, contrast.value, Some(contrast.skipped), None)
        }
    };
    println!("criterion={criterion} value={value}");
    let doc = LoglikDocument {
        schema_version: SCHEMA_VERSION,
        config: LoglikConfig {
            fit: path_string(&a.fit),
            data: path_string(&a.data),
            criterion: criterion.into(),
            mc: a.mc,
            seed: a.seed,
        },
        value,
        segments: data.n_segments(),
        skipped,
        ea,
    };
    emit_json(a.out.as_deref(), &doc)
}

fn cmd_map(a: &MapArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let theta = read_theta(&a.fit)?;
    let truth = a.truth.as_deref().map(read_theta).transpose()?;
    if truth.is_none() && (a.error_out.is_some() || a.metrics_out.is_some()) {
        return Err(CliError::Usage("--error-out and --metrics-out need --truth".into()));
    }
    let reference = truth.as_ref().unwrap_or(&theta);
    let mut grid = cfg.grid.unwrap_or_else(|| GridSpec::default_for(reference.potential()));
    if let Some(r) = a.resolution {
        grid.resolution = [r, r];
    }
    let values = simbench::potential_grid(theta.potential(), &grid).map_err(|e| CliError::Usage(e.to_string()))?;
    write_text(&a.out, &simbench::grid_csv(&grid, &values))?;
    if let Some(truth) = &truth {
        let m: MapMetrics = simbench::map_metrics(theta.potential(), truth.potential(), &grid).map_err(CliError::numeric)?;
        let max_abs_error = m.abs_error_grid.iter().flatten().copied().fold(0.0, f64::max);
        println!("ise={} max_abs_error={max_abs_error}", m.ise);
        if let Some(p) = &a.error_out {
            write_text(p, &m.to_csv_string())?;
        }
        if let Some(p) = &a.metrics_out {
            let doc = MapDocument {
                schema_version: SCHEMA_VERSION,
                config: MapConfig {
                    fit: path_string(&a.fit),
                    truth: a.truth.as_deref().map(path_string),
                    grid,
                },
                ise: m.ise,
                max_abs_error,
            };
            write_text(p, &to_json(&doc)?)?;
        }
    } else {
        println!("grid {}x{} -> {}", grid.resolution[0], grid.resolution[1], a.out.display());
    }
    Ok(())
}

/// Methods fitted by `study` unless told otherwise.
pub const DEFAULT_STUDY_METHODS: [Method; 4] = [Method::Euler, Method::Ozaki, Method::AdaptiveKessler, Method::EaMcem];

fn cmd_study(a: &StudyArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.scenario.config.as_deref())?;
    let mut scenario = resolve_scenario(&a.scenario, &cfg)?;
    if let Some(r) = a.replications {
        scenario.replications = r;
    }
    scenario.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let methods = a
        .methods
        .clone()
        .or_else(|| cfg.methods.clone())
        .unwrap_or_else(|| DEFAULT_STUDY_METHODS.to_vec());
    if methods.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    let optimizer = resolve_optimizer(&cfg, a.restarts, a.max_evals, Some(scenario.seed));
    optimizer.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let study_cfg = StudyConfig {
        em: resolve_em(&cfg, optimizer.seed),
        optimizer,
        ea_replications: a.ea_replications,
        grid: cfg.grid,
    };
    let report = simbench::run_study(&scenario, &methods, &study_cfg).map_err(CliError::numeric)?;
    for s in report.summaries.iter().filter(|s| s.quantity == "ise") {
        println!("{} ise median={} n={}", s.method, s.median, s.n);
    }
    write_text(&a.out, &to_json(&report)?)?;
    if let Some(dir) = &a.grids {
        std::fs::create_dir_all(dir).map_err(|e| CliError::data(dir.display(), e))?;
        let spec = report.config.grid.expect("resolved by run_study");
        let truth = simbench::potential_grid(report.scenario.theta_true.potential(), &spec).map_err(CliError::numeric)?;
        write_text(&dir.join("truth.csv"), &simbench::grid_csv(&spec, &truth))?;
        for (m, median, err) in simbench::study_grids(&report).map_err(CliError::numeric)? {
            write_text(&dir.join(format!("{m}_median.csv")), &simbench::grid_csv(&spec, &median))?;
            write_text(&dir.join(format!("{m}_median_abs_error.csv")), &simbench::grid_csv(&spec, &err))?;
        }
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    if a.mc == 0 {
        return Err(CliError::Usage("--mc must be at least 1".into()));
    }
    let data = parse_trajectories(&a.data)?;
    let mut labels = Vec::with_capacity(a.fits.len());
    let mut thetas = Vec::with_capacity(a.fits.len());
    for p in &a.fits {
        let text = read_text(p)?;
        let doc: FitDocument = serde_json::from_str(&text).map_err(|e| CliError::data(p.display(), e))?;
        labels.push(doc.fit.method.to_string());
        thetas.push(doc.fit.theta_hat);
    }
    let matrix = simbench::compare_matrix(&labels, &thetas, &data, a.mc, a.seed);
    for (label, row) in matrix.rows.iter().zip(&matrix.values) {
        let cells: Vec<String> = row
            .iter()
            .map(|v| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}")))
            .collect();
        println!("{label}: {}", cells.join(" "));
    }
    let doc = CompareDocument {
        schema_version: SCHEMA_VERSION,
        config: CompareConfig {
            fits: a.fits.iter().map(|p| path_string(p)).collect(),
            data: path_string(&a.data),
            mc: a.mc,
            seed: a.seed,
        },
        matrix,
    };
    emit_json(a.out.as_deref(), &doc)
}
