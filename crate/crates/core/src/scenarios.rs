//! Seeded Monte-Carlo sweeps over the array size `M`.
//!
//! Two sweep modes are supported. In fixed-load mode `K = ⌈α_K M⌉` and
//! `L = ⌈α_L M⌉` grow with the array. In fixed-users mode `K` is constant and
//! each `L` in a list is run at every `M`.
//!
//! Trial `t` of a cell draws its channel from a stream addressed by
//! `(master_seed, M, K, t)`, so every method and every `L` at that `M` sees the
//! same channel, and the result does not depend on scheduling.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{derived_stream, sample_rayleigh, StreamPurpose};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, NoiseProfile};
use crate::precoder::{group_lasso_precoder, mrt_random};
use crate::solver::SolverConfig;

/// Redraws allowed per trial after degenerate solver output.
const MAX_REDRAWS: u64 = 64;
/// Fraction of degenerate trials above which a cell is flagged.
const DEGENERATE_FLAG_FRACTION: f64 = 0.01;

pub const CSV_HEADER: &str =
    "method,M,K,L,trials,mean_avg_throughput,stderr_throughput,mean_leakage,stderr_leakage,mean_rss";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    #[serde(rename = "fixed-load")]
    FixedLoad,
    #[serde(rename = "fixed-users")]
    FixedUsers,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::FixedLoad => "fixed-load",
            Mode::FixedUsers => "fixed-users",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-load" => Ok(Mode::FixedLoad),
            "fixed-users" => Ok(Mode::FixedUsers),
            _ => Err(Error::InvalidParameter(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Method {
    #[serde(rename = "group-lasso")]
    GroupLasso,
    #[serde(rename = "mrt")]
    Mrt,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::GroupLasso => "group-lasso",
            Method::Mrt => "mrt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group-lasso" => Ok(Method::GroupLasso),
            "mrt" => Ok(Method::Mrt),
            _ => Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Mode,
    /// Strictly ascending array sizes.
    pub m_values: Vec<usize>,
    pub alpha_k: f64,
    pub alpha_l: f64,
    pub k_users: usize,
    pub l_values: Vec<usize>,
    pub power: f64,
    /// `σ²`, shared by all users.
    pub noise_variance: f64,
    pub beta: f64,
    pub trials: usize,
    pub master_seed: u64,
    /// `beta` here is overridden by [`ScenarioConfig::beta`].
    pub solver: SolverConfig,
    pub methods: Vec<Method>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::FixedLoad,
            m_values: vec![4, 8, 16, 32, 64],
            alpha_k: 1.0,
            alpha_l: 0.3,
            k_users: 16,
            l_values: vec![4, 8],
            power: 1.0,
            noise_variance: 0.1,
            beta: 1.0,
            trials: 200,
            master_seed: 0,
            solver: SolverConfig::default(),
            methods: vec![Method::GroupLasso, Method::Mrt],
        }
    }
}

/// One `(M, K, L)` point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub m: usize,
    pub k: usize,
    pub l: usize,
}

/// `⌈α·M⌉`, with products within rounding of an integer taken as that integer
/// (so `0.3·10` gives 3, not 4).
pub fn ceil_load(alpha: f64, m: usize) -> usize {
    let x = alpha * m as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m_values.is_empty() {
            return bad("m_values is empty".into());
        }
        if self.m_values[0] == 0 || self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("m_values must be positive and strictly ascending: {:?}", self.m_values));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for (name, v) in [("power", self.power), ("noise_variance", self.noise_variance), ("beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return bad("duplicate methods".into());
        }
        self.solver_config().validate()?;
        match self.mode {
            Mode::FixedLoad => {
                if !(self.alpha_l > 0.0 && self.alpha_l.is_finite() && self.alpha_k.is_finite()) {
                    return bad(format!("alpha_l = {} must be positive", self.alpha_l));
                }
                if self.alpha_l > self.alpha_k {
                    return bad(format!("alpha_l = {} exceeds alpha_k = {}", self.alpha_l, self.alpha_k));
                }
            }
            Mode::FixedUsers => {
                if self.k_users == 0 {
                    return bad("k_users must be at least 1".into());
                }
                if self.l_values.is_empty() {
                    return bad("l_values is empty".into());
                }
                if let Some(l) = self.l_values.iter().find(|&&l| l == 0 || l > self.k_users) {
                    return bad(format!("L = {l} must lie in 1..={}", self.k_users));
                }
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            beta: self.beta,
            ..self.solver
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &m in &self.m_values {
            match self.mode {
                Mode::FixedLoad => cells.push(Cell {
                    m,
                    k: ceil_load(self.alpha_k, m),
                    l: ceil_load(self.alpha_l, m),
                }),
                Mode::FixedUsers => cells.extend(self.l_values.iter().map(|&l| Cell {
                    m,
                    k: self.k_users,
                    l,
                })),
            }
        }
        cells
    }

    /// Parses the `key: value` config format written by [`ScenarioConfig::to_config_text`].
    /// Unspecified keys keep their defaults. `#` starts a comment.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `key: value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let perr = |what: &str| Error::Parse {
                line: line_no,
                msg: format!("bad {what} for `{key}`: `{value}`"),
            };
            let num = || value.parse::<f64>().map_err(|_| perr("number"));
            let int = || value.parse::<usize>().map_err(|_| perr("integer"));
            let list = || -> Result<Vec<usize>> {
                value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|_| perr("integer list")))
                    .collect()
            };
            match key {
                "mode" => cfg.mode = value.parse().map_err(|_| perr("mode"))?,
                "m_values" => cfg.m_values = list()?,
                "alpha_k" => cfg.alpha_k = num()?,
                "alpha_l" => cfg.alpha_l = num()?,
                "k_users" => cfg.k_users = int()?,
                "l_values" => cfg.l_values = list()?,
                "power" => cfg.power = num()?,
                "noise_variance" => cfg.noise_variance = num()?,
                "beta" => cfg.beta = num()?,
                "trials" => cfg.trials = int()?,
                "master_seed" => cfg.master_seed = value.parse().map_err(|_| perr("integer"))?,
                "methods" => {
                    cfg.methods = value
                        .split(',')
                        .map(|s| s.trim().parse::<Method>().map_err(|_| perr("method")))
                        .collect::<Result<_>>()?
                }
                "solver.lambda" => cfg.solver.lambda = num()?,
                "solver.mu" => cfg.solver.mu = num()?,
                "solver.eta" => cfg.solver.eta = num()?,
                "solver.max_iterations" => cfg.solver.max_iterations = int()?,
                "solver.tolerance" => cfg.solver.tolerance = num()?,
                "solver.acceleration" => {
                    cfg.solver.acceleration = value.parse().map_err(|_| perr("boolean"))?
                }
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_config_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let methods = self.methods.iter().map(Method::as_str).collect::<Vec<_>>().join(",");
        format!(
            "mode: {}\nm_values: {}\nalpha_k: {}\nalpha_l: {}\nk_users: {}\nl_values: {}\n\
             power: {}\nnoise_variance: {}\nbeta: {}\ntrials: {}\nmaster_seed: {}\nmethods: {}\n\
             solver.lambda: {}\nsolver.mu: {}\nsolver.eta: {}\nsolver.max_iterations: {}\n\
             solver.tolerance: {}\nsolver.acceleration: {}\n",
            self.mode,
            join(&self.m_values),
            self.alpha_k,
            self.alpha_l,
            self.k_users,
            join(&self.l_values),
            self.power,
            self.noise_variance,
            self.beta,
            self.trials,
            self.master_seed,
            methods,
            self.solver.lambda,
            self.solver.mu,
            self.solver.eta,
            self.solver.max_iterations,
            self.solver.tolerance,
            self.solver.acceleration,
        )
    }
}

/// Aggregate of one `(method, M, K, L)` cell.
///
/// `mean_leakage` is the leakage per unselected user, averaged over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub method: Method,
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub mean_avg_throughput: f64,
    pub mean_leakage: f64,
    pub mean_rss: f64,
    pub trials: usize,
    pub stderr_throughput: f64,
    pub stderr_leakage: f64,
    /// Redraws caused by degenerate solver output (not written to CSV).
    pub degenerate_trials: usize,
    /// Set when `degenerate_trials` exceeds 1% of `trials`.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy)]
struct TrialMetrics {
    throughput: f64,
    leakage: f64,
    rss: f64,
}

struct TrialOutcome {
    per_method: Vec<TrialMetrics>,
    degenerate: usize,
}

fn run_trial(cfg: &ScenarioConfig, cell: Cell, trial: usize) -> Result<TrialOutcome> {
    let solver = cfg.solver_config();
    let noise = NoiseProfile::uniform(cell.k, cfg.noise_variance)?;
    let mut degenerate = 0;
    'attempt: for attempt in 0..MAX_REDRAWS {
        let index = (attempt << 32) | trial as u64;
        let mut rng = derived_stream(cfg.master_seed, StreamPurpose::Channel, [cell.m as u64, cell.k as u64], index);
        let h = sample_rayleigh(cell.m, cell.k, &mut rng)?;
        let mut per_method = Vec::with_capacity(cfg.methods.len());
        for method in &cfg.methods {
            let out = match method {
                Method::GroupLasso => match group_lasso_precoder(&h, cfg.power, cell.l, &solver) {
                    Ok((out, _)) => out,
                    Err(Error::DegenerateSolution { .. }) => {
                        log::warn!("degenerate solution at M={} L={} trial {trial}; redrawing", cell.m, cell.l);
                        degenerate += 1;
                        continue 'attempt;
                    }
                    Err(e) => return Err(e),
                },
                Method::Mrt => {
                    let mut sel = derived_stream(
                        cfg.master_seed,
                        StreamPurpose::UserSelection,
                        [cell.m as u64, ((cell.k as u64) << 32) | cell.l as u64],
                        index,
                    );
                    mrt_random(&h, cfg.power, cell.l, &mut sel)?
                }
            };
            let report = evaluate(&h, &out, &noise, cfg.beta)?;
            per_method.push(TrialMetrics {
                throughput: report.avg_throughput,
                leakage: report.leakage_per_unselected,
                rss: report.rss,
            });
        }
        return Ok(TrialOutcome { per_method, degenerate });
    }
    Err(Error::Infeasible(format!(
        "{MAX_REDRAWS} consecutive degenerate channels at M={} K={} L={}",
        cell.m, cell.k, cell.l
    )))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by_key(|r| (r.method, r.m, r.l, r.k));
}

/// Runs every cell of the sweep on the current rayon pool. Output is sorted
/// by `(method, M, L)` and identical for any number of worker threads.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(cfg, cells[c], t))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let trials = &outcomes[c * cfg.trials..(c + 1) * cfg.trials];
        let degenerate: usize = trials.iter().map(|o| o.degenerate).sum();
        let flagged = degenerate as f64 > DEGENERATE_FLAG_FRACTION * cfg.trials as f64;
        if flagged {
            log::warn!(
                "cell M={} K={} L={}: {degenerate} degenerate draws over {} trials",
                cell.m, cell.k, cell.l, cfg.trials
            );
        }
        log::info!("cell M={} K={} L={}: {} trials done", cell.m, cell.k, cell.l, cfg.trials);
        for (i, &method) in cfg.methods.iter().enumerate() {
            let pick = |f: fn(&TrialMetrics) -> f64| -> Vec<f64> {
                trials.iter().map(|o| f(&o.per_method[i])).collect()
            };
            let (mean_avg_throughput, stderr_throughput) = mean_and_stderr(&pick(|t| t.throughput));
            let (mean_leakage, stderr_leakage) = mean_and_stderr(&pick(|t| t.leakage));
            let (mean_rss, _) = mean_and_stderr(&pick(|t| t.rss));
            records.push(SweepRecord {
                method,
                m: cell.m,
                k: cell.k,
                l: cell.l,
                mean_avg_throughput,
                mean_leakage,
                mean_rss,
                trials: cfg.trials,
                stderr_throughput,
                stderr_leakage,
                degenerate_trials: if method == Method::GroupLasso { degenerate } else { 0 },
                flagged: method == Method::GroupLasso && flagged,
            });
        }
    }
    sort_records(&mut records);
    Ok(records)
}

/// [`run_sweep`] on a dedicated pool with `threads` workers.
pub fn run_sweep_with_threads(cfg: &ScenarioConfig, threads: usize) -> Result<Vec<SweepRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

/// Renders records as CSV, sorted by `(method, M, L)`. Floats use the
/// shortest representation that parses back to the same value.
pub fn to_csv_string(records: &[SweepRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.m,
            r.k,
            r.l,
            r.trials,
            r.mean_avg_throughput,
            r.stderr_throughput,
            r.mean_leakage,
            r.stderr_leakage,
            r.mean_rss
        ));
    }
    out
}

pub fn emit_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no records to write".into()));
    }
    let path = path.as_ref();
    fs::write(path, to_csv_string(records)).map_err(|e| Error::io(path, e))
}

/// Reads records back from [`to_csv_string`] output. Fields not stored in
/// the CSV (`degenerate_trials`, `flagged`) come back as zero/false.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing or unexpected CSV header".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 10 fields, found {}", fields.len()),
            });
        }
        let perr = |what: &str, s: &str| Error::Parse {
            line: line_no,
            msg: format!("bad {what} `{s}`"),
        };
        let int = |s: &str| s.parse::<usize>().map_err(|_| perr("integer", s));
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr("number", s));
        records.push(SweepRecord {
            method: fields[0].parse().map_err(|_| perr("method", fields[0]))?,
            m: int(fields[1])?,
            k: int(fields[2])?,
            l: int(fields[3])?,
            trials: int(fields[4])?,
            mean_avg_throughput: num(fields[5])?,
            stderr_throughput: num(fields[6])?,
            mean_leakage: num(fields[7])?,
            stderr_leakage: num(fields[8])?,
            mean_rss: num(fields[9])?,
            degenerate_trials: 0,
            flagged: false,
        });
    }
    Ok(records)
}
