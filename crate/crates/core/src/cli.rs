//! Command-line front end. Each command writes `manifest.json` first and
//! then its CSV tables (and `metrics.json` where applicable) into `--out`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::domain::{parse_config, ModelConfig, PlatformPolicy};
use crate::error::Error;
use crate::oracle::{
    random_cases, run_battery, OracleComparison, DEFAULT_BATTERY_CASES, DEFAULT_BATTERY_EPISODES, DEFAULT_BATTERY_MAX_Z,
};
use crate::sweep::{
    all_policies, evaluate, kg_dpr_map, pareto_front, sweep, uncertainty_scan, Feasibility, SweepAxis,
    DEFAULT_BELIEF_RESOLUTION,
};

/// Largest tolerated `|z|` before `oracle-check` reports a mismatch.
pub const ORACLE_Z_LIMIT: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(
    name = "platform-egt",
    version,
    about = "Evolutionary dynamics of a two-group platform under rating bias"
)]
pub struct Cli {
    /// JSON model configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (0 or unset: one per core).
    #[arg(long, global = true, env = "PLATFORM_EGT_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary distribution, drift field and metrics for one config.
    Stationary,
    /// Metrics along one parameter axis.
    Sweep(SweepArgs),
    /// UX/DPR Pareto front over (k_G, k_M) candidates.
    Pareto(ParetoArgs),
    /// DPR-maximising k_G over an (epsilon, gamma) grid.
    Map(MapArgs),
    /// Policy choice under an uncertain rating bias, by interval width.
    Uncertainty(UncertaintyArgs),
    /// Compare the exact engine with Monte Carlo simulation.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_axis)]
    pub axis: SweepAxis,
    /// `lo:hi[:step]`; the step defaults to 1 for kg/km and 0.1 otherwise.
    #[arg(long)]
    pub range: RangeSpec,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// Restrict candidates to k_M = 0.
    #[arg(long)]
    pub km_zero: bool,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Grid points per axis, at i/(n+1) for i = 1..=n.
    #[arg(long, default_value_t = 9)]
    pub grid: usize,
    /// List length; defaults to the config's k.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FeasibilityArg {
    Every,
    Midpoint,
}

#[derive(Debug, Args)]
pub struct UncertaintyArgs {
    /// Interval widths, `lo:hi:step`.
    #[arg(long, default_value = "0:0.7:0.0875")]
    pub widths: RangeSpec,
    #[arg(long, default_value_t = DEFAULT_BELIEF_RESOLUTION)]
    pub resolution: usize,
    #[arg(long, value_enum, default_value_t = FeasibilityArg::Every)]
    pub feasibility: FeasibilityArg,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = DEFAULT_BATTERY_CASES)]
    pub cases: usize,
    #[arg(long, default_value_t = DEFAULT_BATTERY_EPISODES)]
    pub episodes: u64,
    #[arg(long, default_value_t = DEFAULT_BATTERY_MAX_Z)]
    pub max_z: usize,
}

fn parse_axis(s: &str) -> std::result::Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `lo:hi[:step]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: Option<f64>,
}

impl FromStr for RangeSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(format!("range `{s}` must look like lo:hi or lo:hi:step"));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("range `{s}`: `{p}` is not a number"))
        };
        let lo = num(parts[0])?;
        let hi = num(parts[1])?;
        let step = parts.get(2).map(|p| num(p)).transpose()?;
        if !(lo <= hi) {
            return Err(format!("range `{s}`: lo must not exceed hi"));
        }
        if let Some(st) = step {
            if !(st > 0.0 && st.is_finite()) {
                return Err(format!("range `{s}`: step must be positive"));
            }
        }
        Ok(Self { lo, hi, step })
    }
}

impl RangeSpec {
    /// `lo, lo + step, …` up to `hi`, with `hi` included when it lies on the grid.
    pub fn values(&self, default_step: f64) -> Vec<f64> {
        let step = self.step.unwrap_or(default_step);
        let n = ((self.hi - self.lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + step * i as f64).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Model(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0} oracle comparison(s) exceed |z| > {ORACLE_Z_LIMIT}")]
    OracleMismatch(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(Error::Solver(_) | Error::ReducibleChain(_) | Error::Infeasible(_)) => 3,
            CliError::Model(_) | CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::OracleMismatch(_) => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV table held in memory until the manifest is written.
#[derive(Debug, Clone)]
pub struct Table {
    pub file: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &'static str, header: &[&'static str]) -> Self {
        Self {
            file,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(self.file);
        let to_io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(e) => e,
            other => io::Error::other(format!("{other:?}")),
        };
        let mut w = csv::Writer::from_path(&path).map_err(to_io).map_err(io_err(&path))?;
        w.write_record(&self.header).map_err(to_io).map_err(io_err(&path))?;
        for r in &self.rows {
            w.write_record(r).map_err(to_io).map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))
    }
}

/// Everything one command produces.
#[derive(Debug, Clone)]
pub struct Output {
    pub command: &'static str,
    pub tables: Vec<Table>,
    pub metrics: Option<String>,
}

#[derive(Serialize)]
struct TableEntry<'a> {
    file: &'a str,
    rows: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    created_unix_seconds: u64,
    seed: u64,
    threads: usize,
    config: &'a ModelConfig,
    tables: Vec<TableEntry<'a>>,
    metrics: Option<&'a str>,
}

fn write_bundle(dir: &Path, out: &Output, config: &ModelConfig, seed: u64, threads: usize) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = Manifest {
        command: out.command,
        version: env!("CARGO_PKG_VERSION"),
        created_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed,
        threads,
        config,
        tables: out
            .tables
            .iter()
            .map(|t| TableEntry {
                file: t.file,
                rows: t.rows.len(),
            })
            .collect(),
        metrics: out.metrics.as_ref().map(|_| "metrics.json"),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    for t in &out.tables {
        t.write(dir)?;
    }
    if let Some(m) = &out.metrics {
        let path = dir.join("metrics.json");
        fs::write(&path, format!("{m}\n")).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn load_config(path: Option<&Path>) -> CliResult<ModelConfig> {
    match path {
        None => Ok(ModelConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            Ok(parse_config(&text)?)
        }
    }
}

pub fn cmd_stationary(config: &ModelConfig) -> CliResult<Output> {
    let ev = evaluate(config)?;
    let pop = ev.config.population;
    let mut stationary = Table::new("stationary.csv", &["h_m", "h_d", "prob"]);
    let mut drift = Table::new("drift.csv", &["h_m", "h_d", "d_m", "d_d"]);
    for ((s, p), (dm, dd)) in pop.states().zip(&ev.stationary.distribution).zip(&ev.stationary.drift) {
        stationary.push(vec![s.h_m.to_string(), s.h_d.to_string(), fmt_f64(*p)]);
        drift.push(vec![s.h_m.to_string(), s.h_d.to_string(), fmt_f64(*dm), fmt_f64(*dd)]);
    }
    let metrics = serde_json::to_string_pretty(&ev.report).expect("report always serializes");
    Ok(Output {
        command: "stationary",
        tables: vec![stationary, drift],
        metrics: Some(metrics),
    })
}

pub fn cmd_sweep(config: &ModelConfig, args: &SweepArgs) -> CliResult<Output> {
    let default_step = if args.axis.is_integer() { 1.0 } else { 0.1 };
    let values = args.range.values(default_step);
    if args.axis.is_integer() && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return Err(CliError::Usage(format!(
            "axis {} needs nonnegative integer values",
            args.axis
        )));
    }
    let result = sweep(config, args.axis, &values)?;
    let mut t = Table::new(
        "sweep.csv",
        &[
            "axis_value",
            "ux",
            "dpr",
            "coop_m",
            "coop_d",
            "u_bar_m",
            "u_bar_d",
            "regime",
        ],
    );
    for row in &result.rows {
        let r = &row.report;
        let axis_value = if args.axis.is_integer() {
            format!("{}", row.axis_value as usize)
        } else {
            fmt_f64(row.axis_value)
        };
        t.push(vec![
            axis_value,
            fmt_f64(r.ux),
            fmt_f64(r.dpr),
            fmt_f64(r.coop_mass_m),
            fmt_f64(r.coop_mass_d),
            fmt_f64(r.u_bar_m),
            fmt_f64(r.u_bar_d),
            r.regime.label().to_string(),
        ]);
    }
    Ok(Output {
        command: "sweep",
        tables: vec![t],
        metrics: None,
    })
}

pub fn cmd_pareto(config: &ModelConfig, args: &ParetoArgs) -> CliResult<Output> {
    let candidates: Vec<PlatformPolicy> = all_policies(config.users.k)
        .into_iter()
        .filter(|p| !args.km_zero || p.k_m == 0)
        .collect();
    let front = pareto_front(config, &candidates)?;
    let mut t = Table::new("pareto.csv", &["k_g", "k_m", "ux", "dpr", "on_front"]);
    for p in &front.points {
        t.push(vec![
            p.policy.k_g.to_string(),
            p.policy.k_m.to_string(),
            fmt_f64(p.ux),
            fmt_f64(p.dpr),
            p.on_front.to_string(),
        ]);
    }
    Ok(Output {
        command: "pareto",
        tables: vec![t],
        metrics: None,
    })
}

pub fn cmd_map(config: &ModelConfig, args: &MapArgs) -> CliResult<Output> {
    if args.grid == 0 {
        return Err(CliError::Usage("map grid needs at least one point".into()));
    }
    let k = args.k.unwrap_or(config.users.k);
    let grid: Vec<f64> = (1..=args.grid).map(|i| i as f64 / (args.grid + 1) as f64).collect();
    let cells = kg_dpr_map(config, k, &grid, &grid)?;
    let mut t = Table::new("map.csv", &["epsilon", "gamma", "kg_dpr", "feasible"]);
    for c in &cells {
        t.push(vec![
            fmt_f64(c.epsilon),
            fmt_f64(c.gamma),
            c.kg_dpr.map(|v| v.to_string()).unwrap_or_default(),
            c.kg_dpr.is_some().to_string(),
        ]);
    }
    Ok(Output {
        command: "map",
        tables: vec![t],
        metrics: None,
    })
}

pub fn cmd_uncertainty(config: &ModelConfig, args: &UncertaintyArgs) -> CliResult<Output> {
    let Some(step) = args.widths.step else {
        return Err(CliError::Usage("--widths needs an explicit step".into()));
    };
    let widths = args.widths.values(step);
    let feasibility = match args.feasibility {
        FeasibilityArg::Every => Feasibility::EveryGridPoint,
        FeasibilityArg::Midpoint => Feasibility::Midpoint,
    };
    let rows = uncertainty_scan(
        config,
        config.users.epsilon,
        &widths,
        args.resolution,
        feasibility,
        &all_policies(config.users.k),
    )?;
    let mut t = Table::new(
        "uncertainty.csv",
        &[
            "width",
            "objective",
            "k_g",
            "k_m",
            "worst_dpr",
            "avg_dpr",
            "baseline_worst_dpr",
        ],
    );
    for r in &rows {
        let o = &r.outcome;
        t.push(vec![
            fmt_f64(r.width),
            o.objective.label().to_string(),
            o.chosen.policy.k_g.to_string(),
            o.chosen.policy.k_m.to_string(),
            fmt_f64(o.worst_dpr),
            fmt_f64(o.avg_dpr),
            o.baseline_worst_dpr().map(fmt_f64).unwrap_or_default(),
        ]);
    }
    Ok(Output {
        command: "uncertainty",
        tables: vec![t],
        metrics: None,
    })
}

pub fn oracle_table(rows: &[OracleComparison]) -> Table {
    let mut t = Table::new("oracle.csv", &["category", "exact", "empirical", "stderr", "z_score"]);
    for r in rows {
        t.push(vec![
            format!("case{:02}/{}", r.case, r.category),
            fmt_f64(r.exact),
            fmt_f64(r.empirical),
            fmt_f64(r.stderr),
            fmt_f64(r.z_score),
        ]);
    }
    t
}

pub fn cmd_oracle_check(seed: u64, args: &OracleArgs) -> CliResult<(Output, usize)> {
    let cases = random_cases(args.cases, args.max_z, seed)?;
    let rows = run_battery(&cases, args.episodes, seed)?;
    let failures = rows.iter().filter(|r| !(r.z_score.abs() <= ORACLE_Z_LIMIT)).count();
    Ok((
        Output {
            command: "oracle-check",
            tables: vec![oracle_table(&rows)],
            metrics: None,
        },
        failures,
    ))
}

fn dispatch(cli: &Cli, config: &ModelConfig) -> CliResult<(Output, usize)> {
    match &cli.command {
        Command::Stationary => Ok((cmd_stationary(config)?, 0)),
        Command::Sweep(a) => Ok((cmd_sweep(config, a)?, 0)),
        Command::Pareto(a) => Ok((cmd_pareto(config, a)?, 0)),
        Command::Map(a) => Ok((cmd_map(config, a)?, 0)),
        Command::Uncertainty(a) => Ok((cmd_uncertainty(config, a)?, 0)),
        Command::OracleCheck(a) => cmd_oracle_check(cli.seed, a),
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let config = load_config(cli.config.as_deref())?;
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    let (output, failures) = pool.install(|| dispatch(cli, &config))?;
    write_bundle(&cli.out, &output, &config, cli.seed, pool.current_num_threads())?;
    if failures > 0 {
        return Err(CliError::OracleMismatch(failures));
    }
    Ok(())
}

/// Parses `args` and runs the command, reporting errors on stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_values() {
        let r: RangeSpec = "0:20".parse().unwrap();
        assert_eq!(r.values(1.0).len(), 21);
        let r: RangeSpec = "3:3".parse().unwrap();
        assert_eq!(r.values(1.0), vec![3.0]);
        let r: RangeSpec = "0:0.7:0.0875".parse().unwrap();
        let v = r.values(1.0);
        assert_eq!(v.len(), 9);
        assert!((v[8] - 0.7).abs() < 1e-12);
        assert!("5:1".parse::<RangeSpec>().is_err());
        assert!("0:1:0".parse::<RangeSpec>().is_err());
        assert!("a:1".parse::<RangeSpec>().is_err());
    }

    #[test]
    fn seventeen_significant_digits() {
        let x = 0.1 + 0.2;
        let s = fmt_f64(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(s, "3.0000000000000004e-1");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Model(Error::ConfigDocument("x".into())).exit_code(), 1);
        assert_eq!(CliError::Model(Error::Solver("x".into())).exit_code(), 3);
        assert_eq!(CliError::OracleMismatch(2).exit_code(), 4);
        let io = CliError::Io {
            path: "x".into(),
            source: io::Error::other("x"),
        };
        assert_eq!(io.exit_code(), 2);
    }
}
