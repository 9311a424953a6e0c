//! Argument parsing and subcommand dispatch.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use condmt::adaptive::StoppingRule;
use condmt::global_tests::{combine, GlobalMethod, TestOptions};
use condmt::io::{meta_report, parse_pvalues, render_meta_reports, Dataset, ResultJson};
use condmt::qualint::{gail_simon_lrt, ibga, qualitative_interaction_test, QualIntResult, TauMode};
use condmt::scan::{calibrate_alpha_scan, scan_test, ScanConfig};
use condmt::sim;
use condmt::{auto_select_tau, conditional_test, AdaptiveConfig, PValueVector};

#[derive(Debug, Parser)]
#[command(name = "condmt", version, about = "Conditional global-null tests for conservative p-values")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Combine a list of p-values with a (conditional) global test.
    Global(GlobalArgs),
    /// Test for qualitative interaction on a CSV of estimates.
    Qualint(QualintArgs),
    /// Run one of the simulation studies.
    Simulate(SimulateArgs),
    /// Scan conditional Bonferroni test (experimental).
    Scan(ScanArgs),
    /// Serve the interactive threshold-selection API.
    Serve(ServeArgs),
}

/// τ given on the command line: a number in (0, 1] or `adaptive`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauArg {
    Fixed(f64),
    Adaptive,
}

impl FromStr for TauArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("adaptive") {
            return Ok(TauArg::Adaptive);
        }
        match s.parse::<f64>() {
            Ok(t) if t > 0.0 && t <= 1.0 => Ok(TauArg::Fixed(t)),
            _ => Err(format!("expected a number in (0, 1] or 'adaptive', got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TestFlags {
    /// Truncation point of the truncated product.
    #[arg(long, default_value_t = 0.5)]
    pub trunc: f64,
    /// Upper end of the higher-criticism range.
    #[arg(long, default_value_t = 0.5)]
    pub qmax: f64,
    /// Evaluate higher criticism on the grid step, 2·step, ... instead of
    /// at the order statistics.
    #[arg(long, value_name = "STEP")]
    pub hc_grid: Option<f64>,
    /// Null draws calibrating higher criticism.
    #[arg(long, default_value_t = 10_000)]
    pub mc: usize,
    /// Stopping rule of the adaptive τ heuristic.
    #[arg(long, default_value = "hidden_count", value_parser = parse_rule)]
    pub rule: StoppingRule,
    #[arg(long, env = "CONDMT_SEED", default_value_t = 0)]
    pub seed: u64,
}

fn parse_rule(s: &str) -> Result<StoppingRule, String> {
    s.parse().map_err(|e: condmt::Error| e.to_string())
}

impl TestFlags {
    fn options(&self) -> TestOptions {
        TestOptions {
            trunc: self.trunc,
            q_max: self.qmax,
            mc_draws: self.mc,
            seed: self.seed,
            hc_grid_step: self.hc_grid,
        }
    }

    fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig::default().with_rule(self.rule)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PValueInput {
    /// File of p-values separated by commas or whitespace; `-` reads stdin.
    #[arg(long, conflicts_with = "pvalues")]
    pub input: Option<PathBuf>,
    /// Comma-separated p-values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub pvalues: Vec<f64>,
}

impl PValueInput {
    fn read(&self) -> Result<Vec<f64>, CliError> {
        match &self.input {
            Some(path) if path.as_os_str() == "-" => {
                let mut text = String::new();
                std::io::stdin().read_to_string(&mut text).map_err(|e| CliError::Data(e.to_string()))?;
                Ok(parse_pvalues(&text)?)
            }
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                Ok(parse_pvalues(&text)?)
            }
            None if self.pvalues.is_empty() => Err(CliError::Usage("give --input or --pvalues".into())),
            None => Ok(self.pvalues.clone()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    #[command(flatten)]
    pub data: PValueInput,
    #[arg(long, default_value = "bonferroni")]
    pub method: GlobalMethod,
    /// Conditioning threshold: a number in (0, 1] or `adaptive`.
    #[arg(long, default_value = "1")]
    pub tau: TauArg,
    #[command(flatten)]
    pub test: TestFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct QualintArgs {
    /// CSV with columns id,group,estimate,std_err.
    #[arg(long)]
    pub input: PathBuf,
    /// A global test, or `ibga` / `lrt`.
    #[arg(long, default_value = "fisher")]
    pub method: String,
    #[arg(long, default_value = "1")]
    pub tau: TauArg,
    /// Pool records sharing a group by inverse-variance weighting first.
    #[arg(long)]
    pub group_level: bool,
    /// Print every method and threshold in the meta-analysis table layout.
    #[arg(long)]
    pub report: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub test: TestFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    #[value(name = "2")]
    Power,
    #[value(name = "3")]
    Counts,
    #[value(name = "4")]
    Qualint,
    Equicorr,
    ScanCalib,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub table: Table,
    /// Replicates (default 10000; 1000 for table 3; 5000 for equicorr).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, env = "CONDMT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub data: PValueInput,
    #[arg(long, default_value_t = 0.05)]
    pub tau0: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    pub calib_reps: usize,
    #[arg(long, env = "CONDMT_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Idle sessions are dropped after this many seconds.
    #[arg(long, default_value_t = 3600)]
    pub ttl_secs: u64,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values; exit code 2.
    Usage(String),
    /// Bad or unreadable input data; exit code 1.
    Data(String),
}

impl From<condmt::Error> for CliError {
    fn from(e: condmt::Error) -> Self {
        match e {
            condmt::Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn usage(e: condmt::Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "usage error: {m}");
            2
        }
        Err(CliError::Data(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Global(a) => global(&a, out),
        Command::Qualint(a) => qualint(&a, out),
        Command::Simulate(a) => simulate(&a, out),
        Command::Scan(a) => scan(&a, out),
        Command::Serve(a) => crate::server::serve_blocking(&a.bind, a.port, a.ttl_secs)
            .map_err(|e| CliError::Data(format!("server: {e}"))),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Data(e.to_string()))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string(value).expect("serializable");
    s.push('\n');
    emit(out, &s)
}

fn global(a: &GlobalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = a.test.options();
    opts.validate(a.method).map_err(usage)?;
    let pv = PValueVector::new(a.data.read()?)?;
    let result = match a.tau {
        TauArg::Fixed(1.0) => combine(a.method, pv.values(), &opts)?,
        TauArg::Fixed(t) => conditional_test(&pv, t, a.method, &opts)?,
        TauArg::Adaptive => {
            let tau = auto_select_tau(&pv, &a.test.adaptive());
            conditional_test(&pv, tau, a.method, &opts)?
        }
    };
    emit_json(out, &ResultJson::new(&result, a.test.seed))
}

#[derive(Serialize)]
struct QualIntJson {
    #[serde(flatten)]
    result: QualIntResult,
    seed: u64,
}

#[derive(Serialize)]
struct LrtJson {
    method: &'static str,
    statistic: f64,
    p_final: f64,
    seed: u64,
}

fn tau_mode(tau: TauArg, flags: &TestFlags) -> TauMode {
    match tau {
        TauArg::Fixed(1.0) => TauMode::Unconditional,
        TauArg::Fixed(t) => TauMode::Fixed(t),
        TauArg::Adaptive => TauMode::Adaptive(flags.adaptive()),
    }
}

fn qualint(a: &QualintArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = a.test.options();
    let method = a.method.to_ascii_lowercase();
    let global_method = match method.as_str() {
        "ibga" | "lrt" => None,
        m => Some(m.parse::<GlobalMethod>().map_err(usage)?),
    };
    if let Some(m) = global_method {
        opts.validate(m).map_err(usage)?;
    }
    let mut data = Dataset::from_path(&a.input)?;
    if a.group_level {
        data = data.pooled()?;
    }
    if a.report {
        let label = a.input.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
        let label = if a.group_level { format!("{label} (group)") } else { label };
        let rep = meta_report(&label, &data.records, &opts)?;
        return match a.format {
            Format::Json => emit_json(out, &rep),
            Format::Text => emit(out, &render_meta_reports(&[rep])),
        };
    }
    match (method.as_str(), global_method) {
        ("lrt", _) => {
            let g = gail_simon_lrt(&data.records)?;
            emit_json(
                out,
                &LrtJson {
                    method: "lrt",
                    statistic: g.statistic,
                    p_final: g.p_value,
                    seed: a.test.seed,
                },
            )
        }
        ("ibga", _) => emit_json(
            out,
            &QualIntJson {
                result: ibga(&data.records)?,
                seed: a.test.seed,
            },
        ),
        (_, Some(m)) => {
            let result = qualitative_interaction_test(&data.records, m, &tau_mode(a.tau, &a.test), &opts)?;
            emit_json(
                out,
                &QualIntJson {
                    result,
                    seed: a.test.seed,
                },
            )
        }
        _ => unreachable!("method parsed above"),
    }
}

#[derive(Serialize)]
struct CountsJson {
    title: &'static str,
    seed: u64,
    reps: usize,
    rows: Vec<sim::CountSummary>,
}

#[derive(Serialize)]
struct EquicorrJson {
    title: &'static str,
    seed: u64,
    tau: f64,
    level: f64,
    rows: Vec<sim::EquicorrRow>,
}

#[derive(Serialize)]
struct ScanCalibRow {
    n: usize,
    tau0: f64,
    alpha: f64,
    calib_reps: usize,
    alpha_scan: f64,
}

#[derive(Serialize)]
struct ScanCalibJson {
    title: &'static str,
    seed: u64,
    rows: Vec<ScanCalibRow>,
}

/// Rendered study output, built inside the worker pool.
fn simulate_text(a: &SimulateArgs) -> Result<String, CliError> {
    let json = a.format == Format::Json;
    let pretty = |v: &dyn erased::Json| v.pretty();
    Ok(match a.table {
        Table::Power | Table::Qualint => {
            let reps = a.reps.unwrap_or(10_000);
            let t = if a.table == Table::Power {
                sim::run_power_table(
                    "Power of global tests (%)",
                    &sim::global_power_scenarios(),
                    sim::StudyKind::Global,
                    &sim::standard_methods(),
                    reps,
                    a.seed,
                )?
            } else {
                sim::run_power_table(
                    "Power of qualitative interaction tests (%)",
                    &sim::qualint_power_scenarios(),
                    sim::StudyKind::QualInt,
                    &sim::qualint_methods(),
                    reps,
                    a.seed,
                )?
            };
            if json {
                t.to_json()
            } else {
                t.render_text()
            }
        }
        Table::Counts => {
            let reps = a.reps.unwrap_or(1000);
            let mut rows = Vec::new();
            for s in sim::rejection_count_scenarios() {
                rows.extend(sim::run_rejection_count_study(
                    &s,
                    &sim::rejection_count_modes(),
                    20,
                    reps,
                    0.05,
                    a.seed,
                )?);
            }
            if json {
                pretty(&CountsJson {
                    title: "Correct rejections of Bonferroni procedures",
                    seed: a.seed,
                    reps,
                    rows,
                })
            } else {
                sim::render_counts_text(&rows)
            }
        }
        Table::Equicorr => {
            let reps = a.reps.unwrap_or(5000);
            let n = 1000;
            let rhos = [-1.0 / (n as f64 - 1.0), 0.0, 0.1, 0.5, 0.9];
            let rows = sim::equicorr_fwer_experiment(&rhos, n, reps, 0.5, 0.05, a.seed)?;
            if json {
                pretty(&EquicorrJson {
                    title: "Conditional Bonferroni under equicorrelated nulls",
                    seed: a.seed,
                    tau: 0.5,
                    level: 0.05,
                    rows,
                })
            } else {
                let mut s = format!("{:>10} {:>6} {:>8} {:>8}\n", "rho", "n", "rate", "mc_se");
                for r in &rows {
                    s += &format!("{:>10.6} {:>6} {:>8.4} {:>8.4}\n", r.rho, r.n, r.rate, r.mc_se);
                }
                s
            }
        }
        Table::ScanCalib => {
            let reps = a.reps.unwrap_or(10_000);
            let mut rows = Vec::new();
            for n in [100, 1000] {
                let cfg = ScanConfig {
                    calib_reps: reps,
                    seed: a.seed,
                    ..ScanConfig::default()
                };
                rows.push(ScanCalibRow {
                    n,
                    tau0: cfg.tau0,
                    alpha: cfg.alpha,
                    calib_reps: reps,
                    alpha_scan: calibrate_alpha_scan(n, &cfg).map_err(usage)?,
                });
            }
            if json {
                pretty(&ScanCalibJson {
                    title: "Scan conditional Bonferroni calibration",
                    seed: a.seed,
                    rows,
                })
            } else {
                let mut s = format!("{:>6} {:>6} {:>6} {:>12}\n", "n", "tau0", "alpha", "alpha_scan");
                for r in &rows {
                    s += &format!("{:>6} {:>6} {:>6} {:>12.6}\n", r.n, r.tau0, r.alpha, r.alpha_scan);
                }
                s
            }
        }
    })
}

mod erased {
    pub trait Json {
        fn pretty(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn pretty(&self) -> String {
            let mut s = serde_json::to_string_pretty(self).expect("serializable");
            s.push('\n');
            s
        }
    }
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.reps == Some(0) {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    if a.workers == Some(0) {
        return Err(CliError::Usage("--workers must be positive".into()));
    }
    let text = sim::with_workers(a.workers, || simulate_text(a))??;
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => emit(out, &text),
    }
}

#[derive(Serialize)]
struct ScanJson {
    n: usize,
    tau0: f64,
    alpha: f64,
    p_scan: f64,
    n_p_scan: f64,
    alpha_scan: f64,
    reject: bool,
    seed: u64,
}

fn scan(a: &ScanArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ScanConfig {
        tau0: a.tau0,
        alpha: a.alpha,
        calib_reps: a.calib_reps,
        seed: a.seed,
    };
    cfg.validate().map_err(usage)?;
    let pv = PValueVector::new(a.data.read()?)?;
    let r = scan_test(&pv, &cfg)?;
    emit_json(
        out,
        &ScanJson {
            n: pv.len(),
            tau0: a.tau0,
            alpha: a.alpha,
            p_scan: r.p_scan,
            n_p_scan: r.n_p_scan,
            alpha_scan: r.alpha_scan,
            reject: r.reject,
            seed: a.seed,
        },
    )
}
