//! Parameter sweeps over the regularization or the mode count.

use super::{solve, Problem, SolverConfig, SolverError, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Epsilon,
    Modes,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Modes => "modes",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epsilon" => Ok(SweepAxis::Epsilon),
            "modes" => Ok(SweepAxis::Modes),
            _ => Err(format!("unknown sweep axis `{s}` (expected epsilon or modes)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepMember {
    pub value: f64,
    pub problem: Problem,
    pub config: SolverConfig,
    pub result: Result<Trajectory, SolverError>,
}

/// The problem and configuration of one sweep point.
pub fn member_setup(
    prob: &Problem,
    cfg: &SolverConfig,
    axis: SweepAxis,
    value: f64,
) -> Result<(Problem, SolverConfig), SolverError> {
    match axis {
        SweepAxis::Epsilon => {
            let p = prob.with_epsilon(value);
            p.validate()?;
            Ok((p, cfg.clone()))
        }
        SweepAxis::Modes => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(SolverError::Config(format!(
                    "mode count must be a positive integer, got {value}"
                )));
            }
            let mut c = cfg.clone();
            c.modes = vec![value as usize; prob.dim()];
            c.validate(prob.dim())?;
            Ok((prob.clone(), c))
        }
    }
}

/// Solve once per value, concurrently. Values must be sorted (either
/// direction); members keep the input order and fail independently.
pub fn sweep(
    prob: &Problem,
    cfg: &SolverConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepMember>, SolverError> {
    let up = values.windows(2).all(|w| w[0] < w[1]);
    let down = values.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) {
        return Err(SolverError::Config(format!(
            "sweep values must be strictly sorted: {values:?}"
        )));
    }
    let setups = values
        .iter()
        .map(|&v| member_setup(prob, cfg, axis, v).map(|s| (v, s)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(setups
        .into_par_iter()
        .map(|(value, (problem, config))| {
            let result = solve(&problem, &config);
            SweepMember {
                value,
                problem,
                config,
                result,
            }
        })
        .collect())
}
