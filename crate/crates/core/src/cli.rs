//! Command-line front end. Every command writes exactly one JSON document to
//! standard output; progress and summaries go to standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::breakdown::{breakdown_bound_with_budget, empirical_breakdown_probe, DEFAULT_Q_BUDGET, PROBE_MAGNITUDES};
use crate::data::{validate, CensoredSample};
use crate::error::{Error, Result};
use crate::estimators::{fit, AnKind, Estimator, EstimatorOptions, SearchConfig};
use crate::loss::{MM_BISQUARE_C, S_BISQUARE_C};
use crate::simulation::{
    grid, objective_curve, run_table, table_scenarios, SimulationScenario, DESK_REPLICATES, FULL_REPLICATES,
    TABLE_ESTIMATORS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "censreg", version, about = "Robust regression for right-censored responses")]
struct Cli {
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true, env = "CENSREG_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one estimator to a delimited data file.
    Fit(FitArgs),
    /// Run the Monte Carlo tables.
    Simulate(SimulateArgs),
    /// Breakdown lower bound, optionally with an empirical probe.
    Breakdown(BreakdownArgs),
    /// Inner-fit norm and score over a slope grid.
    Curve(CurveArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnArg {
    Identity,
    Mad,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Delimited text file with a header row.
    input: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    /// Column of 0/1 indicators; 1 means the response was observed.
    #[arg(long, default_value = "status")]
    status: String,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Fit the natural log of the response.
    #[arg(long)]
    log_response: bool,
    #[arg(long, overrides_with = "no_intercept")]
    intercept: bool,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long, default_value = ",")]
    delimiter: char,
}

#[derive(Debug, Args)]
struct TuningArgs {
    #[arg(long, default_value_t = 500)]
    n_candidates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    b_over_a: f64,
    #[arg(long, default_value_t = S_BISQUARE_C)]
    c1: f64,
    #[arg(long, default_value_t = MM_BISQUARE_C)]
    c2: f64,
    /// Polish the selected candidate by fixed-point steps.
    #[arg(long)]
    refine: bool,
    #[arg(long, value_enum, default_value = "identity")]
    a_n: AnArg,
}

impl TuningArgs {
    fn options(&self) -> EstimatorOptions {
        EstimatorOptions {
            search: SearchConfig {
                n_candidates: self.n_candidates,
                seed: self.seed,
                refine: self.refine,
                a_n: match self.a_n {
                    AnArg::Identity => AnKind::Identity,
                    AnArg::Mad => AnKind::MadDiagonal,
                },
                ..SearchConfig::default()
            },
            b_over_a: self.b_over_a,
            c1: self.c1,
            c2: self.c2,
            ..EstimatorOptions::default()
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "mm")]
    estimator: String,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    table: u8,
    #[arg(long)]
    replicates: Option<usize>,
    /// Full-scale run (1000 replicates).
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated estimators (default: the six table estimators).
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// Flat TOML scenario replacing the table's scenarios.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    n_candidates: usize,
}

#[derive(Debug, Args)]
struct BreakdownArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.5)]
    b_over_a: f64,
    /// Maximum hyperplanes examined for the exact `q`.
    #[arg(long, default_value_t = DEFAULT_Q_BUDGET)]
    budget: usize,
    /// Also replace `--probe-k` rows with leverage outliers and refit.
    #[arg(long)]
    probe: Option<String>,
    #[arg(long, default_value_t = 0)]
    probe_k: usize,
    #[arg(long, default_value_t = 500)]
    n_candidates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    grid_min: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    grid_max: f64,
    #[arg(long, default_value_t = 61)]
    grid_steps: usize,
    #[command(flatten)]
    tuning: TuningArgs,
}

/// Loaded data with the coefficient names in design order.
pub struct Dataset {
    pub sample: CensoredSample,
    pub names: Vec<String>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

/// Reads a delimited file. Status values must be 0 or 1.
pub fn load_dataset(
    path: &std::path::Path,
    delimiter: u8,
    response: &str,
    status: &str,
    covariates: Option<&[String]>,
    log_response: bool,
    intercept: bool,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = rdr.headers().map_err(|e| usage(e.to_string()))?.iter().map(str::to_owned).collect();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| usage(format!("column '{name}' not found")))
    };
    let yi = find(response)?;
    let si = find(status)?;
    let cov: Vec<usize> = match covariates {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&k| k != yi && k != si).collect(),
    };
    let (mut y, mut rows, mut delta) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| usage(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            let field = rec.get(k).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| usage(format!("row {}: column '{}' is not numeric: '{field}'", line + 1, header[k])))
        };
        let mut v = num(yi)?;
        if log_response {
            if v <= 0.0 {
                return Err(usage(format!("row {}: log of nonpositive response {v}", line + 1)));
            }
            v = v.ln();
        }
        y.push(v);
        delta.push(match rec.get(si).unwrap_or("") {
            "1" => true,
            "0" => false,
            other => return Err(usage(format!("row {}: status must be 0 or 1, got '{other}'", line + 1))),
        });
        rows.push(cov.iter().map(|&k| num(k)).collect::<Result<Vec<f64>>>()?);
    }
    if y.is_empty() {
        return Err(usage("no data rows"));
    }
    let sample = if cov.is_empty() {
        if !intercept {
            return Err(usage("no covariates and no intercept"));
        }
        CensoredSample::new(y.clone(), vec![1.0; y.len()], delta, 1, true)?
    } else {
        CensoredSample::from_rows(y, &rows, delta, intercept)?
    };
    let mut names = Vec::new();
    if intercept {
        names.push("(intercept)".to_owned());
    }
    names.extend(cov.iter().map(|&k| header[k].clone()));
    Ok(Dataset { sample, names })
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        if !self.delimiter.is_ascii() {
            return Err(usage("delimiter must be a single ASCII character"));
        }
        load_dataset(
            &self.input,
            self.delimiter as u8,
            &self.response,
            &self.status,
            self.covariates.as_deref(),
            self.log_response,
            !self.no_intercept,
        )
    }
}

fn error_json(e: &Error) -> Value {
    json!({ "error": e.kind(), "message": e.to_string() })
}

/// Runs the CLI with the given arguments (including the program name).
/// Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = writeln!(out, "{}", json!({ "error": "usage", "message": e.to_string().trim() }));
            return EXIT_USAGE;
        }
    };
    let mut log = Vec::new();
    let result = with_threads(cli.threads, || dispatch(cli.command, &mut log));
    let _ = err.write_all(&log);
    match result {
        Ok(v) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"));
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(out, "{}", error_json(&e));
            let _ = writeln!(err, "error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    match threads {
        None => f(),
        Some(0) => Err(usage("--threads must be positive")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn dispatch(cmd: Command, err: &mut dyn Write) -> Result<Value> {
    match cmd {
        Command::Fit(a) => cmd_fit(&a, err),
        Command::Simulate(a) => cmd_simulate(&a, err),
        Command::Breakdown(a) => cmd_breakdown(&a),
        Command::Curve(a) => cmd_curve(&a),
    }
}

fn cmd_fit(a: &FitArgs, err: &mut dyn Write) -> Result<Value> {
    let estimator: Estimator = a.estimator.parse()?;
    let data = a.data.load()?;
    let diag = validate(&data.sample)?;
    let start = Instant::now();
    let f = fit(&data.sample, estimator, &a.tuning.options())?;
    let elapsed = start.elapsed().as_secs_f64();
    let _ = writeln!(err, "{} fit: n = {}, m = {}, {:.3}s", estimator.label(), diag.n, diag.m, elapsed);
    let beta: Map<String, Value> = data.names.iter().cloned().zip(f.beta.iter().map(|b| json!(b))).collect();
    Ok(json!({
        "estimator": estimator.name(),
        "beta": beta,
        "coefficients": f.beta,
        "scale": f.scale,
        "objective": f.objective,
        "n_candidates_evaluated": f.n_candidates_evaluated,
        "n": diag.n,
        "m": diag.m,
        "converged": f.converged,
        "exact_fit": f.exact_fit,
        "elapsed": elapsed,
    }))
}

fn cmd_simulate(a: &SimulateArgs, err: &mut dyn Write) -> Result<Value> {
    let replicates = a.replicates.unwrap_or(if a.full { FULL_REPLICATES } else { DESK_REPLICATES });
    let estimators: Vec<Estimator> = match &a.estimators {
        Some(list) => list.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        None => TABLE_ESTIMATORS.to_vec(),
    };
    let scenarios = match &a.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            let mut scn = SimulationScenario::from_toml(&text)?;
            if a.replicates.is_some() || a.full {
                scn.replicates = replicates;
            }
            vec![scn]
        }
        None => table_scenarios(a.table, replicates, a.seed)?,
    };
    let mut opts = EstimatorOptions::default();
    opts.search.n_candidates = a.n_candidates;
    let mut records = Vec::new();
    let mut rates = Vec::new();
    for scn in &scenarios {
        let res = run_table(scn, &estimators, &opts)?;
        let _ = writeln!(
            err,
            "scenario x0={} m={}: {} replicates in {:.1}s, censoring {:.3}",
            scn.x0, scn.m, scn.replicates, res.runtime_secs, res.censoring_rate
        );
        for r in &res.records {
            let _ = writeln!(err, "  {:>4}  mse {:.4}  failures {}", r.estimator, r.mse, r.n_fail);
        }
        rates.push(res.censoring_rate);
        records.extend(res.records);
    }
    Ok(json!({
        "table": if a.scenario.is_some() { Value::Null } else { json!(a.table) },
        "rng": crate::rng::ALGORITHM,
        "censoring_rate": rates,
        "records": records,
    }))
}

fn cmd_breakdown(a: &BreakdownArgs) -> Result<Value> {
    let data = a.data.load()?;
    validate(&data.sample)?;
    let report = breakdown_bound_with_budget(&data.sample, a.b_over_a, a.budget)?;
    let mut v = serde_json::to_value(&report).expect("json");
    if let Some(name) = &a.probe {
        let estimator: Estimator = name.parse()?;
        let mut opts = EstimatorOptions { b_over_a: a.b_over_a, ..Default::default() };
        opts.search.n_candidates = a.n_candidates;
        opts.search.seed = a.seed;
        let probe = empirical_breakdown_probe(&data.sample, estimator, &opts, a.probe_k, &PROBE_MAGNITUDES)?;
        v["probe"] = serde_json::to_value(&probe).expect("json");
    }
    Ok(v)
}

fn cmd_curve(a: &CurveArgs) -> Result<Value> {
    if a.grid_steps == 0 || !(a.grid_max >= a.grid_min) {
        return Err(usage("grid needs at least one step and grid-max ≥ grid-min"));
    }
    let data = a.data.load()?;
    validate(&data.sample)?;
    let report = objective_curve(&data.sample, &grid(a.grid_min, a.grid_max, a.grid_steps), &a.tuning.options())?;
    Ok(serde_json::to_value(&report).expect("json"))
}
