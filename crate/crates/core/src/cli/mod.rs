//! Command-line front end: `calibrate`, `solve`, `sweep`, `estimate` and
//! `synth`.
//!
//! Exit codes: 0 success, 2 configuration or input-schema error, 3
//! infeasible model, 4 estimation failure, 1 output I/O failure.

mod config;
mod output;
mod plot;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use crate::numfmt::{format_number, format_opt};
pub use config::{ConfigError, RunConfig, SweepSettings};
pub use output::{
    calibration_csv, estimate_csv, sweep_csv, CalibrationSummary, CALIBRATION_HEADER,
    ESTIMATE_HEADER, SWEEP_HEADER,
};
pub use plot::{render_sweep_svg, PlotError};

use crate::analysis::{
    default_cbdc_return_grid, linspace, sweep_cbdc_return, sweep_deterministic, sweep_stochastic,
    AnalysisError, SweepOptions, SweepRecord,
};
use crate::calibration::{annualize_rate, bin_returns, binomial_outcomes, compound_rate, equity_premium};
use crate::inference::{
    default_truth, fit, synth_panel, wald_one_sided, InferenceError, PanelData, SpecKind,
    Specification, DEFAULT_LITERACY,
};
use crate::model::{AgentKind, Economy, IncomeProcess};
use crate::solver::{solve, SolveError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Estimation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Estimation(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Solve(SolveError::Infeasible(_)) => CliError::Infeasible(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Schema { .. }
            | InferenceError::Io(_)
            | InferenceError::UnknownCoefficient(_)
            | InferenceError::InvalidParameter { .. }
            | InferenceError::Domain(_) => CliError::Input(e.to_string()),
            InferenceError::Separation { .. }
            | InferenceError::RankDeficient { .. }
            | InferenceError::NoConvergence { .. }
            | InferenceError::Degenerate(_) => CliError::Estimation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cbdc", version, about = "CBDC portfolio-choice model and participation logit")]
pub struct Cli {
    /// Run configuration (`block.key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write SVG plots for sweeps.
    #[arg(long, global = true)]
    pub plot: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Deterministic,
    Stochastic,
    CbdcReturn,
}

impl SweepKind {
    fn file_stem(self) -> &'static str {
        match self {
            SweepKind::Deterministic => "sweep_deterministic",
            SweepKind::Stochastic => "sweep_stochastic",
            SweepKind::CbdcReturn => "sweep_cbdc_return",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpecArg {
    Linear,
    Dummies,
}

impl From<SpecArg> for SpecKind {
    fn from(s: SpecArg) -> Self {
        match s {
            SpecArg::Linear => SpecKind::LinearScore,
            SpecArg::Dummies => SpecKind::ScoreDummies,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Binomial return table, binned returns, premium and annualized rates.
    Calibrate,
    /// Optimal holdings of both agents before and after CBDC.
    Solve,
    /// Comparative statics over income or the CBDC return.
    Sweep {
        #[arg(value_enum)]
        which: SweepKind,
    },
    /// Fit the participation logit to a panel CSV.
    Estimate {
        panel: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        spec: SpecArg,
        /// One-sided test that the first coefficient exceeds the second.
        #[arg(long, num_args = 2, value_names = ["NAME", "NAME"])]
        wald: Option<Vec<String>>,
    },
    /// Write a synthetic panel drawn from the logit model.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "linear")]
        spec: SpecArg,
        #[arg(long, default_value_t = 4611)]
        households: usize,
        /// Literacy level probabilities, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 4)]
        literacy: Option<Vec<f64>>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Messages go to `stdout` and `stderr`.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.plot |= cli.plot;
    match cli.jobs {
        Some(0) => Err(CliError::Config("--jobs must be positive".to_string())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| dispatch(&cli.command, &cfg, stdout)),
        None => dispatch(&cli.command, &cfg, stdout),
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match cmd {
        Command::Calibrate => cmd_calibrate(cfg, stdout),
        Command::Solve => cmd_solve(cfg, stdout),
        Command::Sweep { which } => cmd_sweep(cfg, *which, stdout),
        Command::Estimate { panel, spec, wald } => {
            cmd_estimate(cfg, panel, (*spec).into(), wald.as_deref(), stdout)
        }
        Command::Synth {
            seed,
            spec,
            households,
            literacy,
        } => cmd_synth(cfg, *seed, (*spec).into(), *households, literacy.as_deref(), stdout),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn say(stdout: &mut (dyn Write + Send), msg: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    stdout
        .write_fmt(msg)
        .and_then(|()| stdout.write_all(b"\n"))
        .map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_calibrate(cfg: &RunConfig, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let rows = binomial_outcomes(&cfg.market);
    let years = cfg.market.period_years;
    let r = &cfg.instance.returns;
    let summary = CalibrationSummary {
        binned: bin_returns(&rows, cfg.bin_split, cfg.bin_truncate).ok(),
        equity_premium: equity_premium(&cfg.market),
        r_deposit_period: r.r_deposit,
        r_deposit_annualized: annualize_rate(r.r_deposit, years),
        r_cbdc_period: r.r_cbdc,
        r_cbdc_annualized: annualize_rate(r.r_cbdc, years),
        r_deposit_market_compounded: compound_rate(cfg.market.r_deposit_annual, years),
    };
    let table = write_file(
        &cfg.output_dir,
        "calibration.csv",
        &calibration_csv(&rows, cfg.bin_split, cfg.bin_truncate),
    )?;
    let scalars = write_file(&cfg.output_dir, "calibration_summary.csv", &summary.csv())?;
    stdout
        .write_all(summary.text().as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    say(stdout, format_args!("wrote {} and {}", table.display(), scalars.display()))
}

pub fn cmd_solve(cfg: &RunConfig, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for agent in [AgentKind::Hfl, AgentKind::Lfl] {
        for economy in [Economy::PreCbdc, Economy::WithCbdc] {
            let inst = cfg.instance.with_economy(economy);
            let out = solve(&inst, agent, &cfg.solver, None);
            match &out {
                Ok(s) => say(
                    stdout,
                    format_args!(
                        "{} {}: a = {} d = {} m = {} c1 = {} utility = {} residual = {:e}",
                        agent.label(),
                        economy.label(),
                        format_number(s.alloc.risky),
                        format_number(s.alloc.deposits),
                        format_number(s.alloc.cbdc),
                        format_number(s.alloc.consumption1),
                        format_number(s.utility),
                        s.residual_norm
                    ),
                )?,
                Err(e) => failures.push(format!("{} {}: {e}", agent.label(), economy.label())),
            }
            records.push(SweepRecord::from_outcome(f64::NAN, agent, &inst, out));
        }
    }
    let path = write_file(&cfg.output_dir, "solve.csv", &sweep_csv(&records))?;
    say(stdout, format_args!("wrote {}", path.display()))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Infeasible(failures.join("; ")))
    }
}

/// Runs the configured sweep of kind `which`.
pub fn sweep_records(cfg: &RunConfig, which: SweepKind) -> Result<Vec<SweepRecord>, CliError> {
    let s = &cfg.sweep;
    let opts = SweepOptions {
        solver: cfg.solver,
        mode: s.mode,
    };
    let base = cfg.instance;
    Ok(match which {
        SweepKind::Deterministic => {
            sweep_deterministic(&base, &linspace(s.s_start, s.s_end, s.s_points), &opts)?
        }
        SweepKind::Stochastic => sweep_stochastic(
            &base,
            &linspace(s.s_min_start, s.s_min_end, s.s_min_points),
            s.s_max,
            s.target_mean,
            &opts,
        )?,
        SweepKind::CbdcReturn => {
            let grid = s
                .r_m_values
                .clone()
                .unwrap_or_else(|| default_cbdc_return_grid(base.returns.r_deposit));
            sweep_cbdc_return(&base, &grid, IncomeProcess::deterministic(s.r_m_income), &opts)?
        }
    })
}

pub fn cmd_sweep(cfg: &RunConfig, which: SweepKind, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let records = sweep_records(cfg, which)?;
    let csv_text = sweep_csv(&records);
    let path = write_file(&cfg.output_dir, &format!("{}.csv", which.file_stem()), &csv_text)?;
    say(stdout, format_args!("wrote {} ({} rows)", path.display(), records.len()))?;
    if cfg.plot {
        let svg = render_sweep_svg(&csv_text).map_err(|e| CliError::Io(e.to_string()))?;
        let path = write_file(&cfg.output_dir, &format!("{}.svg", which.file_stem()), &svg)?;
        say(stdout, format_args!("wrote {}", path.display()))?;
    }
    let failed = records.iter().filter(|r| !r.converged()).count();
    if failed == records.len() {
        return Err(CliError::Infeasible("no grid point could be solved".to_string()));
    }
    if failed > 0 {
        say(stdout, format_args!("{failed} of {} cells did not solve", records.len()))?;
    }
    Ok(())
}

pub fn cmd_estimate(
    cfg: &RunConfig,
    panel_path: &Path,
    kind: SpecKind,
    wald: Option<&[String]>,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let file = fs::File::open(panel_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", panel_path.display())))?;
    let panel = PanelData::read_csv(file)?;
    let spec = Specification::for_panel(kind, &panel);
    let result = fit(&panel, &spec)?;
    for (name, b, se, oc) in result.table() {
        say(
            stdout,
            format_args!(
                "{name:>20} {:>16} ({}) odds change {}",
                format_number(b),
                format_number(se),
                format_number(oc)
            ),
        )?;
    }
    if let Some([i, j]) = wald {
        let t = wald_one_sided(&result, i, j)?;
        say(
            stdout,
            format_args!(
                "wald {i} > {j}: delta = {} se = {} z = {:.4} p = {:.3}",
                format_number(t.delta),
                format_number(t.std_error),
                t.z,
                t.p_value
            ),
        )?;
    }
    let path = write_file(&cfg.output_dir, "estimate.csv", &estimate_csv(&result))?;
    say(
        stdout,
        format_args!(
            "wrote {} ({} households, {} observations)",
            path.display(),
            result.n_households,
            result.n_observations
        ),
    )
}

pub fn cmd_synth(
    cfg: &RunConfig,
    seed: u64,
    kind: SpecKind,
    households: usize,
    literacy: Option<&[f64]>,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let dist = match literacy {
        Some(&[a, b, c, d]) => [a, b, c, d],
        Some(_) => return Err(CliError::Config("--literacy takes four probabilities".to_string())),
        None => DEFAULT_LITERACY,
    };
    let panel = synth_panel(&default_truth(kind), households, dist, seed)?;
    let mut buf = Vec::new();
    panel.write_csv(&mut buf)?;
    let text = String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))?;
    let path = write_file(&cfg.output_dir, "panel.csv", &text)?;
    say(stdout, format_args!("wrote {} ({} rows)", path.display(), panel.len()))
}
