//! Run configuration: flat `key = value` text with dotted section prefixes.
//!
//! ```text
//! # unit square, anisotropic constant exponents
//! problem.lengths = 1, 1
//! problem.p1 = 2.2
//! problem.p2 = 1.9
//! problem.epsilon = 1e-3
//! problem.horizon = 0.5
//! solver.modes = 8
//! ```
//!
//! Lists are comma separated; a single value for `solver.modes` or
//! `solver.grid` is broadcast over all axes. `#` starts a comment. Unknown
//! and repeated keys are errors.

use anipar_core::solver::{Integrator, Problem, SolverConfig, SolverError, SweepAxis};
use anipar_core::{FieldExpr, RectDomain};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("`{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("`{key}`: cannot parse expression `{text}`: {msg}")]
    Expression { key: String, text: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemBlock {
    pub lengths: Vec<f64>,
    /// Exponent expressions `p_1 .. p_N`.
    pub exponents: Vec<String>,
    pub forcing: String,
    pub initial: String,
    pub epsilon: f64,
    pub horizon: f64,
    /// Use the slow-diffusion gap `1 + 2/N` in the admissibility check.
    pub slow: bool,
    /// Exact solution for manufactured-solution runs.
    pub u_exact: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorBlock {
    /// Absolute higher-integrability exponents.
    pub r: Vec<f64>,
    /// Exponents as fractions of `r*`; used when `r` is empty.
    pub r_fraction: Vec<f64>,
    pub slack: f64,
    /// Fields judged by sweep boundedness verdicts.
    pub fields: Vec<String>,
}

impl Default for MonitorBlock {
    fn default() -> Self {
        MonitorBlock {
            r: Vec::new(),
            r_fraction: vec![0.5],
            slack: anipar_core::monitor::DEFAULT_SLACK,
            fields: vec!["higher_int".into(), "hessian_weighted".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyBlock {
    /// Property names or dotted prefixes; `None` runs everything.
    pub suites: Option<Vec<String>>,
    /// Random cases per randomized property; `None` keeps each default.
    pub cases: Option<usize>,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    pub solver: SolverConfig,
    pub monitor: MonitorBlock,
    pub sweep: Option<SweepBlock>,
    pub mms_modes: Vec<usize>,
    pub verify: VerifyBlock,
    pub output: PathBuf,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| value_err(key, format!("`{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| value_err(key, format!("`{v}` is not a non-negative integer")))
}

fn parse_list<T>(key: &str, v: &str, item: fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| item(key, s)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(value_err(key, format!("`{v}` is not true/false"))),
    }
}

fn parse_names(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn check_expr(key: &str, text: &str) -> Result<String, ConfigError> {
    FieldExpr::parse(text).map_err(|e| ConfigError::Expression {
        key: key.to_string(),
        text: text.to_string(),
        msg: e.to_string(),
    })?;
    Ok(text.to_string())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: line_no });
            }
            if entries.insert(k.to_string(), (line_no, v.trim().to_string())).is_some() {
                return Err(ConfigError::Duplicate {
                    line: line_no,
                    key: k.to_string(),
                });
            }
        }
        Self::from_entries(entries)
    }

    fn from_entries(mut e: BTreeMap<String, (usize, String)>) -> Result<Self, ConfigError> {
        let mut take = |k: &str| e.remove(k).map(|(_, v)| v);
        let required = |v: Option<String>, k: &str| v.ok_or_else(|| ConfigError::Missing(k.to_string()));

        let lengths = parse_list(
            "problem.lengths",
            &required(take("problem.lengths"), "problem.lengths")?,
            parse_f64,
        )?;
        let n = lengths.len();
        if n == 0 {
            return Err(value_err("problem.lengths", "at least one length"));
        }
        if let Some(d) = take("problem.dim") {
            if parse_usize("problem.dim", &d)? != n {
                return Err(value_err("problem.dim", format!("{d} does not match {n} lengths")));
            }
        }
        let mut exponents = Vec::with_capacity(n);
        for i in 1..=n {
            let key = format!("problem.p{i}");
            let text = required(take(&key), &key)?;
            exponents.push(check_expr(&key, &text)?);
        }
        let expr_or_zero = |v: Option<String>, k: &str| v.map_or(Ok("0".to_string()), |t| check_expr(k, &t));
        let forcing = expr_or_zero(take("problem.forcing"), "problem.forcing")?;
        let initial = expr_or_zero(take("problem.initial"), "problem.initial")?;
        let u_exact = take("problem.u_exact")
            .map(|t| check_expr("problem.u_exact", &t))
            .transpose()?;
        let epsilon = parse_f64(
            "problem.epsilon",
            &required(take("problem.epsilon"), "problem.epsilon")?,
        )?;
        let horizon = parse_f64(
            "problem.horizon",
            &required(take("problem.horizon"), "problem.horizon")?,
        )?;
        let slow = take("problem.slow").map_or(Ok(false), |v| parse_bool("problem.slow", &v))?;

        let broadcast = |key: &str, v: String| -> Result<Vec<usize>, ConfigError> {
            let list = parse_list(key, &v, parse_usize)?;
            match list.len() {
                1 => Ok(vec![list[0]; n]),
                k if k == n => Ok(list),
                k => Err(value_err(key, format!("{k} entries for {n} axes"))),
            }
        };
        let mut solver = SolverConfig::new(vec![SolverConfig::default().modes[0]; n]);
        if let Some(v) = take("solver.modes") {
            solver.modes = broadcast("solver.modes", v)?;
        }
        if let Some(v) = take("solver.grid") {
            solver.grid = Some(broadcast("solver.grid", v)?);
        }
        if let Some(v) = take("solver.integrator") {
            solver.integrator = v.parse::<Integrator>().map_err(|m| value_err("solver.integrator", m))?;
        }
        for (key, slot) in [
            ("solver.dt", &mut solver.dt),
            ("solver.dt_min", &mut solver.dt_min),
            ("solver.dt_max", &mut solver.dt_max),
            ("solver.tol", &mut solver.tol),
        ] {
            if let Some(v) = take(key) {
                *slot = parse_f64(key, &v)?;
            }
        }
        if let Some(v) = take("solver.kappa") {
            solver.kappa = match v.as_str() {
                "auto" => None,
                _ => Some(parse_f64("solver.kappa", &v)?),
            };
        }
        if let Some(v) = take("solver.snapshots") {
            solver.snapshots = parse_usize("solver.snapshots", &v)?;
        }
        if let Some(v) = take("solver.max_steps") {
            solver.max_steps = parse_usize("solver.max_steps", &v)?;
        }

        let mut monitor = MonitorBlock::default();
        if let Some(v) = take("monitor.r") {
            monitor.r = parse_list("monitor.r", &v, parse_f64)?;
        }
        if let Some(v) = take("monitor.r_fraction") {
            monitor.r_fraction = parse_list("monitor.r_fraction", &v, parse_f64)?;
            if monitor.r_fraction.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
                return Err(value_err("monitor.r_fraction", "fractions must lie in (0, 1)"));
            }
        }
        if let Some(v) = take("monitor.slack") {
            monitor.slack = parse_f64("monitor.slack", &v)?;
        }
        if let Some(v) = take("monitor.fields") {
            monitor.fields = parse_names(&v);
        }

        let sweep = match (take("sweep.axis"), take("sweep.values")) {
            (None, None) => None,
            (Some(a), Some(v)) => Some(SweepBlock {
                axis: a.parse::<SweepAxis>().map_err(|m| value_err("sweep.axis", m))?,
                values: parse_list("sweep.values", &v, parse_f64)?,
            }),
            (None, Some(_)) => return Err(ConfigError::Missing("sweep.axis".into())),
            (Some(_), None) => return Err(ConfigError::Missing("sweep.values".into())),
        };
        let mms_modes = take("mms.modes").map_or(Ok(vec![4, 8, 16]), |v| parse_list("mms.modes", &v, parse_usize))?;

        let suites = take("verify.suites").map(|v| if v.trim() == "all" { None } else { Some(parse_names(&v)) });
        let cases = take("verify.cases")
            .map(|v| parse_usize("verify.cases", &v))
            .transpose()?;
        let output = take("output.dir").map_or_else(|| PathBuf::from("out"), PathBuf::from);
        let seed = take("seed").map_or(Ok(DEFAULT_SEED), |v| {
            v.parse::<u64>()
                .map_err(|_| value_err("seed", format!("`{v}` is not a u64")))
        })?;

        let mut tolerances = BTreeMap::new();
        let tol_keys: Vec<String> = e.keys().filter(|k| k.starts_with("verify.tol.")).cloned().collect();
        for k in tol_keys {
            let (_, v) = e.remove(&k).expect("key listed");
            tolerances.insert(k["verify.tol.".len()..].to_string(), parse_f64(&k, &v)?);
        }
        if let Some((k, (line, _))) = e.into_iter().next() {
            return Err(ConfigError::UnknownKey { line, key: k });
        }

        Ok(RunConfig {
            problem: ProblemBlock {
                lengths,
                exponents,
                forcing,
                initial,
                epsilon,
                horizon,
                slow,
                u_exact,
            },
            solver,
            monitor,
            sweep,
            mms_modes,
            verify: VerifyBlock {
                suites: suites.flatten(),
                cases,
                tolerances,
            },
            output,
            seed,
        })
    }

    /// Canonical text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let p = &self.problem;
        let s = &self.solver;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("problem.lengths", join(&p.lengths));
        for (i, e) in p.exponents.iter().enumerate() {
            kv(&format!("problem.p{}", i + 1), e.clone());
        }
        kv("problem.forcing", p.forcing.clone());
        kv("problem.initial", p.initial.clone());
        if let Some(u) = &p.u_exact {
            kv("problem.u_exact", u.clone());
        }
        kv("problem.epsilon", p.epsilon.to_string());
        kv("problem.horizon", p.horizon.to_string());
        kv("problem.slow", p.slow.to_string());
        kv("solver.modes", join(&s.modes));
        if let Some(g) = &s.grid {
            kv("solver.grid", join(g));
        }
        kv("solver.integrator", s.integrator.to_string());
        kv("solver.dt", s.dt.to_string());
        kv("solver.dt_min", s.dt_min.to_string());
        kv("solver.dt_max", s.dt_max.to_string());
        kv("solver.tol", s.tol.to_string());
        kv("solver.kappa", s.kappa.map_or("auto".to_string(), |k| k.to_string()));
        kv("solver.snapshots", s.snapshots.to_string());
        kv("solver.max_steps", s.max_steps.to_string());
        kv("monitor.r", join(&self.monitor.r));
        kv("monitor.r_fraction", join(&self.monitor.r_fraction));
        kv("monitor.slack", self.monitor.slack.to_string());
        kv("monitor.fields", self.monitor.fields.join(", "));
        if let Some(sw) = &self.sweep {
            kv("sweep.axis", sw.axis.to_string());
            kv("sweep.values", join(&sw.values));
        }
        kv("mms.modes", join(&self.mms_modes));
        kv(
            "verify.suites",
            self.verify.suites.as_ref().map_or("all".to_string(), |v| v.join(", ")),
        );
        if let Some(c) = self.verify.cases {
            kv("verify.cases", c.to_string());
        }
        for (k, v) in &self.verify.tolerances {
            kv(&format!("verify.tol.{k}"), v.to_string());
        }
        kv("output.dir", self.output.display().to_string());
        kv("seed", self.seed.to_string());
        out
    }

    pub fn domain(&self) -> Result<RectDomain, ConfigError> {
        RectDomain::new(self.problem.lengths.clone()).map_err(|e| value_err("problem.lengths", e.to_string()))
    }

    /// The problem with parsed expressions. Expressions were validated at parse time.
    pub fn build_problem(&self) -> Result<Problem, ProblemBuildError> {
        let p = &self.problem;
        let expr = |t: &str| FieldExpr::parse(t).expect("validated at parse time");
        Ok(Problem::new(
            self.domain()?,
            p.exponents.iter().map(|t| expr(t)).collect(),
            expr(&p.forcing),
            expr(&p.initial),
            p.horizon,
            p.epsilon,
        )?)
    }

    pub fn u_exact(&self) -> Option<FieldExpr> {
        self.problem
            .u_exact
            .as_deref()
            .map(|t| FieldExpr::parse(t).expect("validated at parse time"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemBuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
