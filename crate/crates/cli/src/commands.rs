//! The five subcommands. Each returns an [`Outcome`] (verdict, printable
//! lines, written artifacts) or a [`CliError`] carrying its exit code.

use crate::artifacts::{self, fmt_f64, ArtifactError};
use crate::config::{ConfigError, ProblemBuildError, RunConfig};
use crate::suites::{self, PropertyOutcome, SuiteError};
use anipar_core::exponents::{validate, ExponentError, ExponentField, ExponentReport};
use anipar_core::monitor::{self, BoundednessVerdict, EstimateReport, MonitorError};
use anipar_core::solver::{self, ConvergencePoint, SolveStats, SolverError, SweepAxis};
use anipar_core::SampleGrid;
use serde::Serialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Refused(String),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl From<ProblemBuildError> for CliError {
    fn from(e: ProblemBuildError) -> Self {
        match e {
            ProblemBuildError::Config(c) => CliError::Config(c),
            ProblemBuildError::Solver(s) => CliError::Solver(s),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::ReadConfig { .. } | CliError::Config(_) | CliError::Suite(_) => EXIT_USAGE,
            CliError::Refused(_) => EXIT_VERDICT,
            CliError::Exponent(ExponentError::Eval(_)) => EXIT_RUNTIME,
            CliError::Exponent(_) => EXIT_USAGE,
            CliError::Solver(SolverError::Problem(_) | SolverError::Config(_) | SolverError::Boundary { .. }) => {
                EXIT_USAGE
            }
            CliError::Solver(_) => EXIT_RUNTIME,
            CliError::Monitor(MonitorError::RInadmissible { .. } | MonitorError::UnknownField(_)) => EXIT_USAGE,
            CliError::Monitor(_) | CliError::Artifact(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Solve,
    Sweep,
    Mms,
    Verify,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Mms => "mms",
            Command::Verify => "verify",
        })
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "check" => Ok(Command::Check),
            "solve" => Ok(Command::Solve),
            "sweep" => Ok(Command::Sweep),
            "mms" => Ok(Command::Mms),
            "verify" => Ok(Command::Verify),
            _ => Err(format!("unknown command `{s}`")),
        }
    }
}

/// Command-line options shared by all subcommands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_VERDICT
        }
    }
}

/// Load the config named by `opts`, apply command-line overrides and run.
pub fn run(cmd: Command, opts: &Options) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&opts.config).map_err(|source| CliError::ReadConfig {
        path: opts.config.clone(),
        source,
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(o) = &opts.out {
        cfg.output = o.clone();
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = opts.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| dispatch(cmd, &cfg, opts.force))
}

pub fn dispatch(cmd: Command, cfg: &RunConfig, force: bool) -> Result<Outcome, CliError> {
    match cmd {
        Command::Check => cmd_check(cfg),
        Command::Solve => cmd_solve(cfg, force),
        Command::Sweep => cmd_sweep(cfg, force),
        Command::Mms => cmd_mms(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

pub fn exponent_report(cfg: &RunConfig) -> Result<ExponentReport, CliError> {
    let problem = cfg.build_problem()?;
    let field = ExponentField::sample(
        problem.exponents.clone(),
        &problem.domain,
        problem.horizon,
        SampleGrid::default(),
    )?;
    Ok(validate(&field, cfg.problem.slow))
}

fn verdict_lines(rep: &ExponentReport) -> Vec<String> {
    let mut lines = vec![format!(
        "mu = {}  r* = {}  p_h = {}  p_h* = {}",
        rep.mu, rep.r_star, rep.p_h_min, rep.p_h_star_min
    )];
    for v in &rep.verdicts {
        lines.push(format!(
            "{} {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        ));
    }
    lines
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    artifacts::ensure_dir(&cfg.output)?;
    Ok(cfg.output.join(name))
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rep = exponent_report(cfg)?;
    let path = out_path(cfg, "check.json")?;
    artifacts::write_json(&path, &rep)?;
    Ok(Outcome {
        pass: rep.all_pass(),
        lines: verdict_lines(&rep),
        artifacts: vec![path],
    })
}

fn admissible_or_forced(rep: &ExponentReport, force: bool, lines: &mut Vec<String>) -> Result<(), CliError> {
    if rep.all_pass() {
        return Ok(());
    }
    let failed: Vec<&str> = rep.failed().map(|v| v.name.as_str()).collect();
    if !force {
        return Err(CliError::Refused(format!(
            "admissibility check failed ({}); rerun with --force to solve anyway",
            failed.join(", ")
        )));
    }
    lines.push(format!(
        "warning: solving despite failed checks ({})",
        failed.join(", ")
    ));
    Ok(())
}

/// Higher-integrability exponents for the monitor.
pub fn r_list(cfg: &RunConfig, r_star: f64) -> Vec<f64> {
    if !cfg.monitor.r.is_empty() {
        return cfg.monitor.r.clone();
    }
    if r_star > 0.0 {
        cfg.monitor.r_fraction.iter().map(|f| f * r_star).collect()
    } else {
        log::warn!("r* = {r_star} <= 0: higher-integrability monitor skipped");
        Vec::new()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub admissibility: ExponentReport,
    pub estimates: EstimateReport,
    pub stats: SolveStats,
    pub modes: Vec<usize>,
    pub final_time: f64,
    /// Coefficients at `T`, row-major over the mode indices.
    pub final_coefficients: Vec<f64>,
}

pub fn cmd_solve(cfg: &RunConfig, force: bool) -> Result<Outcome, CliError> {
    let rep = exponent_report(cfg)?;
    let mut lines = Vec::new();
    admissible_or_forced(&rep, force, &mut lines)?;
    let prob = cfg.build_problem()?;
    let traj = solver::solve(&prob, &cfg.solver)?;
    let (est, series) = monitor::instrument_series(&traj, &prob, &r_list(cfg, rep.r_star), rep.r_star)?;

    let bin = out_path(cfg, "snapshots.bin")?;
    artifacts::write_snapshots(&bin, &traj)?;
    let csv = cfg.output.join("monitors.csv");
    let header: Vec<String> = ["t", "l2_sq", "ut_l2_sq", "dissipation", "modular", "hessian_weighted"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = series
        .iter()
        .map(|s| {
            [s.t, s.l2, s.ut, s.dissipation, s.modular, s.hessian_weighted]
                .iter()
                .map(|&v| fmt_f64(v))
                .collect()
        })
        .collect();
    artifacts::write_csv(&csv, &header, &rows)?;

    let last = traj.last();
    lines.push(format!(
        "solved to t = {} with {} accepted / {} rejected steps",
        last.t, traj.stats.accepted, traj.stats.rejected
    ));
    lines.push(format!(
        "sup_L2 = {:e}  energy_residual = {:e}",
        est.sup_l2, est.energy_residual
    ));
    let report = SolveReport {
        admissibility: rep,
        stats: traj.stats,
        modes: traj.modes.clone(),
        final_time: last.t,
        final_coefficients: last.c.data().to_vec(),
        estimates: est,
    };
    let json = cfg.output.join("report.json");
    artifacts::write_json(&json, &report)?;
    Ok(Outcome {
        pass: true,
        lines,
        artifacts: vec![bin, json, csv],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub value: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub slack: f64,
    pub verdicts: Vec<BoundednessVerdict>,
    pub failures: Vec<SweepFailure>,
    pub reports: Vec<EstimateReport>,
}

pub fn cmd_sweep(cfg: &RunConfig, force: bool) -> Result<Outcome, CliError> {
    let block = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep needs `sweep.axis` and `sweep.values`".into()))?;
    let rep = exponent_report(cfg)?;
    let mut lines = Vec::new();
    admissible_or_forced(&rep, force, &mut lines)?;
    let prob = cfg.build_problem()?;
    let rs = r_list(cfg, rep.r_star);
    let members = solver::sweep(&prob, &cfg.solver, block.axis, &block.values)?;

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for m in &members {
        let res = m
            .result
            .as_ref()
            .map_err(|e| e.to_string())
            .and_then(|t| monitor::instrument(t, &m.problem, &rs, rep.r_star).map_err(|e| e.to_string()));
        match res {
            Ok(r) => {
                lines.push(format!("{} = {}: ok", block.axis, m.value));
                reports.push((m.value, r));
            }
            Err(error) => {
                lines.push(format!("{} = {}: FAILED {error}", block.axis, m.value));
                failures.push(SweepFailure { value: m.value, error });
            }
        }
    }
    let names = reports.first().map(|(_, r)| r.field_names()).unwrap_or_default();
    for m in &members {
        let mut row = vec![fmt_f64(m.value)];
        match reports.iter().find(|(v, _)| *v == m.value) {
            Some((_, r)) => {
                row.push("ok".into());
                row.extend(names.iter().map(|n| r.field(n).map(fmt_f64).unwrap_or_default()));
            }
            None => {
                row.push("failed".into());
                row.extend(names.iter().map(|_| String::new()));
            }
        }
        rows.push(row);
    }
    let mut header = vec![block.axis.to_string(), "status".to_string()];
    header.extend(names.iter().cloned());
    let csv = out_path(cfg, "sweep.csv")?;
    artifacts::write_csv(&csv, &header, &rows)?;

    let only: Vec<EstimateReport> = reports.into_iter().map(|(_, r)| r).collect();
    let verdicts = cfg
        .monitor
        .fields
        .iter()
        .map(|f| monitor::boundedness_verdict(&only, f, cfg.monitor.slack))
        .collect::<Result<Vec<_>, _>>()?;
    for v in &verdicts {
        lines.push(format!(
            "{} {}: variation {:.3e}, trend {}{}",
            if v.pass { "PASS" } else { "FAIL" },
            v.field,
            v.variation,
            v.trend,
            if v.diverging { ", diverging" } else { "" }
        ));
    }
    let pass = failures.is_empty() && verdicts.iter().all(|v| v.pass);
    let summary = SweepSummary {
        axis: block.axis,
        values: block.values.clone(),
        slack: cfg.monitor.slack,
        verdicts,
        failures,
        reports: only,
    };
    let json = cfg.output.join("verdicts.json");
    artifacts::write_json(&json, &summary)?;
    Ok(Outcome {
        pass,
        lines,
        artifacts: vec![csv, json],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub points: Vec<ConvergencePoint>,
    /// Errors never increase with the mode count.
    pub monotone: bool,
}

pub fn cmd_mms(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let u = cfg
        .u_exact()
        .ok_or_else(|| CliError::Usage("mms needs `problem.u_exact`".into()))?;
    if cfg.mms_modes.is_empty() {
        return Err(CliError::Usage("`mms.modes` is empty".into()));
    }
    let prob = cfg.build_problem()?;
    let points = solver::convergence_study(&prob, &cfg.solver, &u, &cfg.mms_modes)?;
    let monotone = points.windows(2).all(|w| w[1].l2_error <= w[0].l2_error);
    let header: Vec<String> = ["modes", "l2_error", "observed_order"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.modes.to_string(),
                fmt_f64(p.l2_error),
                p.observed_order.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    let csv = out_path(cfg, "convergence.csv")?;
    artifacts::write_csv(&csv, &header, &rows)?;
    let mut lines: Vec<String> = points
        .iter()
        .map(|p| match p.observed_order {
            Some(o) => format!("m = {:>3}: error {:.6e}, order {:.3}", p.modes, p.l2_error, o),
            None => format!("m = {:>3}: error {:.6e}", p.modes, p.l2_error),
        })
        .collect();
    lines.push(format!(
        "{} errors non-increasing in m",
        if monotone { "PASS" } else { "FAIL" }
    ));
    let json = cfg.output.join("convergence.json");
    artifacts::write_json(&json, &ConvergenceSummary { points, monotone })?;
    Ok(Outcome {
        pass: monotone,
        lines,
        artifacts: vec![csv, json],
    })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let props = suites::plan(&cfg.verify)?;
    if props.is_empty() {
        return Ok(Outcome {
            pass: true,
            lines: vec!["no properties selected".into()],
            artifacts: Vec::new(),
        });
    }
    let outcomes: Vec<PropertyOutcome> = suites::run_all(&props, cfg.seed);
    let lines = outcomes
        .iter()
        .map(|o| {
            format!(
                "{} {} (worst {:.3e}, tol {:.1e}, {} cases): {}",
                if o.pass { "PASS" } else { "FAIL" },
                o.name,
                o.worst,
                o.tolerance,
                o.cases,
                o.detail
            )
        })
        .collect();
    let path = out_path(cfg, "verify.json")?;
    artifacts::write_json(&path, &outcomes)?;
    Ok(Outcome {
        pass: outcomes.iter().all(|o| o.pass),
        lines,
        artifacts: vec![path],
    })
}

/// Final coefficient of the snapshot file, for quick inspection.
pub fn final_coefficients(path: &Path) -> Result<Vec<f64>, ArtifactError> {
    let (h, data) = artifacts::read_snapshots(path)?;
    let per: usize = h.modes.iter().product();
    Ok(data[data.len() - per..].to_vec())
}
