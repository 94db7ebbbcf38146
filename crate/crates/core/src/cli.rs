//! Command-line front end: `scenario-a`, `scenario-b`, `sweep` and `solve`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::channel::{derived_stream, ChannelMatrix, StreamPurpose};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport, NoiseProfile};
use crate::precoder::{group_lasso_precoder, mrt_random};
use crate::scenarios::{emit_csv, run_sweep_with_threads, Method, Mode, ScenarioConfig};
use crate::solver::{SolverConfig, SolverResult};

#[derive(Debug, Parser)]
#[command(name = "glprecode", version, about = "Group-LASSO user selection and precoding for the MIMO downlink")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fixed-load sweep: K = ceil(alpha_k M), L = ceil(alpha_l M).
    ScenarioA(ScenarioAArgs),
    /// Fixed-users sweep: K fixed, each L in the list at every M.
    ScenarioB(ScenarioBArgs),
    /// Sweep described by a `key: value` config file.
    Sweep(SweepArgs),
    /// Precode a single channel read from a fixture file and print JSON.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Lower end of the ridge-weight search.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Lower end of the group-sparsity-weight search.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 5000)]
    max_iter: usize,
    /// Plain proximal gradient instead of FISTA.
    #[arg(long)]
    no_accel: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            mu: self.mu,
            beta: self.beta,
            eta: self.eta,
            max_iterations: self.max_iter,
            tolerance: self.tol,
            acceleration: !self.no_accel,
        }
    }
}

#[derive(Debug, Args)]
struct SweepCommon {
    /// Array sizes, comma separated and ascending.
    #[arg(long = "m", value_delimiter = ',', required = true)]
    m_values: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    /// Noise variance sigma^2 shared by all users.
    #[arg(long = "noise-var", default_value_t = 0.1)]
    noise_var: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "group-lasso,mrt")]
    methods: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

impl SweepCommon {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        cfg.m_values = self.m_values.clone();
        cfg.power = self.power;
        cfg.noise_variance = self.noise_var;
        cfg.trials = self.trials;
        cfg.master_seed = self.seed;
        cfg.beta = self.solver.beta;
        cfg.solver = self.solver.config();
        cfg.methods = self
            .methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<_>>()?;
        Ok(())
    }
}

#[derive(Debug, Args)]
struct ScenarioAArgs {
    #[arg(long = "alpha-k")]
    alpha_k: f64,
    #[arg(long = "alpha-l")]
    alpha_l: f64,
    #[command(flatten)]
    common: SweepCommon,
}

#[derive(Debug, Args)]
struct ScenarioBArgs {
    #[arg(long = "k")]
    k_users: usize,
    #[arg(long = "l", value_delimiter = ',', required = true)]
    l_values: Vec<usize>,
    #[command(flatten)]
    common: SweepCommon,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Channel fixture: `M K`, then M*K lines of `re im`, user-major.
    #[arg(long)]
    channel: PathBuf,
    #[arg(long)]
    power: f64,
    #[arg(long = "l")]
    l_users: usize,
    #[arg(long = "noise-var", default_value_t = 0.1)]
    noise_var: f64,
    #[arg(long, default_value = "group-lasso")]
    method: String,
    /// Seed for the MRT user draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Serialize)]
struct SolveReport {
    method: Method,
    m_antennas: usize,
    k_users: usize,
    l_users: usize,
    /// 0-based user indices.
    selected_users: Vec<usize>,
    power_vector: Vec<f64>,
    total_power: f64,
    solver: Option<SolverResult>,
    metrics: MetricsReport,
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e)
}

fn runtime(e: Error) -> Failure {
    Failure::Runtime(e)
}

fn run_sweep_command(cfg: ScenarioConfig, threads: Option<usize>, out: &PathBuf) -> std::result::Result<(), Failure> {
    cfg.validate().map_err(usage)?;
    if threads == Some(0) {
        return Err(usage(Error::InvalidParameter("threads must be at least 1".into())));
    }
    let threads = threads.unwrap_or_else(rayon::current_num_threads);
    let records = run_sweep_with_threads(&cfg, threads).map_err(runtime)?;
    emit_csv(&records, out).map_err(runtime)?;
    for r in records.iter().filter(|r| r.flagged) {
        eprintln!(
            "warning: {} M={} L={} had {} degenerate draws",
            r.method, r.m, r.l, r.degenerate_trials
        );
    }
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn solve(args: &SolveArgs) -> std::result::Result<(), Failure> {
    let method: Method = args.method.parse().map_err(usage)?;
    let cfg = args.solver.config();
    cfg.validate().map_err(usage)?;
    let h = ChannelMatrix::load(&args.channel).map_err(runtime)?;
    if args.l_users == 0 || args.l_users > h.k_users() {
        return Err(usage(Error::InvalidParameter(format!(
            "--l {} must lie in 1..={}",
            args.l_users,
            h.k_users()
        ))));
    }
    let noise = NoiseProfile::uniform(h.k_users(), args.noise_var).map_err(usage)?;
    let (out, diagnostics) = match method {
        Method::GroupLasso => {
            let (out, sol) = group_lasso_precoder(&h, args.power, args.l_users, &cfg).map_err(runtime)?;
            (out, Some(sol))
        }
        Method::Mrt => {
            let mut rng = derived_stream(
                args.seed,
                StreamPurpose::UserSelection,
                [h.m_antennas() as u64, ((h.k_users() as u64) << 32) | args.l_users as u64],
                0,
            );
            (mrt_random(&h, args.power, args.l_users, &mut rng).map_err(runtime)?, None)
        }
    };
    let metrics = evaluate(&h, &out, &noise, cfg.beta).map_err(runtime)?;
    let report = SolveReport {
        method,
        m_antennas: h.m_antennas(),
        k_users: h.k_users(),
        l_users: out.l_users(),
        selected_users: out.selected_set.clone(),
        total_power: out.total_power(),
        power_vector: out.power_vector.clone(),
        solver: diagnostics,
        metrics,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn dispatch(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::ScenarioA(a) => {
            let mut cfg = ScenarioConfig {
                mode: Mode::FixedLoad,
                alpha_k: a.alpha_k,
                alpha_l: a.alpha_l,
                ..ScenarioConfig::default()
            };
            a.common.apply(&mut cfg).map_err(usage)?;
            run_sweep_command(cfg, a.common.threads, &a.common.out)
        }
        Command::ScenarioB(b) => {
            let mut cfg = ScenarioConfig {
                mode: Mode::FixedUsers,
                k_users: b.k_users,
                l_values: b.l_values.clone(),
                ..ScenarioConfig::default()
            };
            b.common.apply(&mut cfg).map_err(usage)?;
            run_sweep_command(cfg, b.common.threads, &b.common.out)
        }
        Command::Sweep(s) => {
            let text = std::fs::read_to_string(&s.config).map_err(|e| runtime(Error::io(&s.config, e)))?;
            let cfg = ScenarioConfig::parse_config(&text).map_err(usage)?;
            run_sweep_command(cfg, s.threads, &s.out)
        }
        Command::Solve(s) => solve(&s),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status: 0 on success, 2 for usage errors,
/// 1 for failures during computation.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
