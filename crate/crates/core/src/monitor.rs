//! Post-processing of trajectories: every quantity appearing in the a priori
//! estimates, the energy-identity residual, contraction of pairs of runs and
//! boundedness verdicts across sweeps.
//!
//! Unknown constants are never asserted. Time integrals use the trapezoid
//! rule over snapshots; space integrals use the solver's Gauss grid.

use crate::basis::{BasisError, Derivative, SineBasis};
use crate::field_dsl::{EvalError, FieldExpr};
use crate::solver::{Problem, Trajectory};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("r = {r} is outside the higher-integrability range (0, r*) with r* = {r_star}")]
    RInadmissible { r: f64, r_star: f64 },
    #[error("snapshot times of the two trajectories differ at index {index}")]
    Misaligned { index: usize },
    #[error("unknown report field `{0}`")]
    UnknownField(String),
    #[error("trajectory has no snapshots")]
    Empty,
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HigherIntegrability {
    pub r: f64,
    /// `sum_i int int |D_i u|^{p_i + r}`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub t_grid: Vec<f64>,
    /// `sup_t ||u||_2^2`.
    #[serde(rename = "sup_L2")]
    pub sup_l2: f64,
    /// `sum_i int int (eps^2 + |D_i u|^2)^{(p_i-2)/2} |D_i u|^2`.
    pub dissipation: f64,
    /// `||u_t||^2_{2,Q_T}`, from the right-hand side at snapshots.
    #[serde(rename = "ut_L2")]
    pub ut_l2: f64,
    /// `sup_t sum_i int (eps^2 + |D_i u|^2)^{p_i/2}`.
    pub sup_modular: f64,
    /// `sum_{ij} int int (eps^2 + |D_i u|^2)^{(p_i-2)/2} (D^2_{ij} u)^2`.
    pub hessian_weighted: f64,
    pub higher_int: Vec<HigherIntegrability>,
    /// Per direction, `||V_i||_{W^{1,2}(Q_T)}` with
    /// `V_i = (eps^2 + |D_i u|^2)^{(p_i-2)/4} D_i u`.
    #[serde(rename = "second_order_W12")]
    pub second_order_w12: Vec<f64>,
    /// `1 + ||f||^2 + ||grad f||^2 (over Q_T) + sum_i int |D_i u_0|^{p_i(x,0)} + ||u_0||^2_{W^{1,2}}`.
    pub data_bound: f64,
    /// `sum_{ij} int int |D^2_{ij} u|^{p_j}`, only when every `p_j < 2` on the grid.
    pub second_derivative_modular: Option<f64>,
    pub energy_residual: f64,
    pub epsilon: f64,
    pub r_star: f64,
}

impl EstimateReport {
    /// Names accepted by [`EstimateReport::field`], in CSV column order.
    pub fn field_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["sup_L2", "dissipation", "ut_L2", "sup_modular", "hessian_weighted"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend(self.higher_int.iter().map(|h| format!("higher_int@{}", h.r)));
        names.extend((0..self.second_order_w12.len()).map(|i| format!("second_order_W12[{}]", i + 1)));
        if self.second_derivative_modular.is_some() {
            names.push("second_derivative_modular".into());
        }
        names.push("data_bound".into());
        names.push("energy_residual".into());
        names
    }

    /// Scalar field by name. `higher_int` alone selects the largest `r`;
    /// `second_order_W12` alone selects the largest direction value.
    pub fn field(&self, name: &str) -> Option<f64> {
        match name {
            "sup_L2" => Some(self.sup_l2),
            "dissipation" => Some(self.dissipation),
            "ut_L2" => Some(self.ut_l2),
            "sup_modular" => Some(self.sup_modular),
            "hessian_weighted" => Some(self.hessian_weighted),
            "data_bound" => Some(self.data_bound),
            "energy_residual" => Some(self.energy_residual),
            "second_derivative_modular" => self.second_derivative_modular,
            "higher_int" => self
                .higher_int
                .iter()
                .max_by(|a, b| a.r.total_cmp(&b.r))
                .map(|h| h.value),
            "second_order_W12" => self.second_order_w12.iter().copied().reduce(f64::max),
            _ => {
                if let Some(r) = name.strip_prefix("higher_int@") {
                    let r: f64 = r.parse().ok()?;
                    self.higher_int.iter().find(|h| h.r == r).map(|h| h.value)
                } else if let Some(i) = name.strip_prefix("second_order_W12[").and_then(|s| s.strip_suffix(']')) {
                    let i: usize = i.parse().ok()?;
                    self.second_order_w12.get(i.checked_sub(1)?).copied()
                } else {
                    None
                }
            }
        }
    }
}

pub(crate) fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(tt, vv)| 0.5 * (tt[1] - tt[0]) * (vv[0] + vv[1]))
        .sum()
}

fn eval_on(e: &FieldExpr, basis: &SineBasis, t: f64) -> Result<Vec<f64>, EvalError> {
    e.eval_columns(basis.grid().columns(), t)
}

/// Integrands of the time integrals at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMonitors {
    pub t: f64,
    /// `||u||_2^2`.
    pub l2: f64,
    /// `||u_t||_2^2`.
    pub ut: f64,
    pub dissipation: f64,
    pub modular: f64,
    pub hessian_weighted: f64,
}

/// Fill an [`EstimateReport`] from a trajectory.
pub fn instrument(
    traj: &Trajectory,
    prob: &Problem,
    r_list: &[f64],
    r_star: f64,
) -> Result<EstimateReport, MonitorError> {
    instrument_series(traj, prob, r_list, r_star).map(|(r, _)| r)
}

/// [`instrument`] together with the per-snapshot integrands.
pub fn instrument_series(
    traj: &Trajectory,
    prob: &Problem,
    r_list: &[f64],
    r_star: f64,
) -> Result<(EstimateReport, Vec<SnapshotMonitors>), MonitorError> {
    for &r in r_list {
        if !(r > 0.0 && r < r_star) {
            return Err(MonitorError::RInadmissible { r, r_star });
        }
    }
    if traj.snapshots.is_empty() {
        return Err(MonitorError::Empty);
    }
    let basis = traj.basis()?;
    let grid = basis.grid();
    let n = prob.dim();
    let eps2 = prob.epsilon * prob.epsilon;
    let times = traj.times();
    let ns = times.len();
    let dp: Vec<Vec<FieldExpr>> = prob.exponents.iter().map(|p| p.gradient(n)).collect();

    let mut l2 = Vec::with_capacity(ns);
    let mut ut = Vec::with_capacity(ns);
    let mut diss = Vec::with_capacity(ns);
    let mut modular = Vec::with_capacity(ns);
    let mut hess = Vec::with_capacity(ns);
    let mut hi = vec![Vec::with_capacity(ns); r_list.len()];
    let mut w12_space = vec![Vec::with_capacity(ns); n];
    let mut v_hist: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(ns); n];
    let mut second_mod = Vec::with_capacity(ns);
    let mut all_fast = true;

    for s in &traj.snapshots {
        l2.push(s.c.norm().powi(2));
        ut.push(s.dc_dt.norm().powi(2));
        let grads: Vec<Vec<f64>> = (0..n).map(|i| basis.eval(&s.c, Derivative::First(i))).collect();
        let hessian: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| (0..n).map(|j| basis.eval(&s.c, Derivative::Second(i, j))).collect())
            .collect();
        let pvals: Vec<Vec<f64>> = prob
            .exponents
            .iter()
            .map(|p| eval_on(p, &basis, s.t))
            .collect::<Result<_, _>>()?;
        all_fast &= pvals.iter().all(|v| v.iter().all(|&p| p < 2.0));

        let (mut d, mut m, mut h) = (0.0, 0.0, 0.0);
        let mut hr = vec![0.0; r_list.len()];
        for i in 0..n {
            let g = &grads[i];
            let p = &pvals[i];
            let w: Vec<f64> = g.iter().map(|x| eps2 + x * x).collect();
            d += grid.integrate(
                &(0..g.len())
                    .map(|k| w[k].powf(0.5 * (p[k] - 2.0)) * g[k] * g[k])
                    .collect::<Vec<_>>(),
            );
            m += grid.integrate(&(0..g.len()).map(|k| w[k].powf(0.5 * p[k])).collect::<Vec<_>>());
            let weight: Vec<f64> = (0..g.len()).map(|k| w[k].powf(0.5 * (p[k] - 2.0))).collect();
            for hij in &hessian[i] {
                h += grid.integrate(&(0..g.len()).map(|k| weight[k] * hij[k] * hij[k]).collect::<Vec<_>>());
            }
            for (acc, &r) in hr.iter_mut().zip(r_list) {
                *acc += grid.integrate(&(0..g.len()).map(|k| g[k].abs().powf(p[k] + r)).collect::<Vec<_>>());
            }

            // V_i and its spatial gradient.
            let q: Vec<f64> = (0..g.len()).map(|k| w[k].powf(0.25 * (p[k] - 2.0))).collect();
            let v: Vec<f64> = (0..g.len()).map(|k| q[k] * g[k]).collect();
            let mut sq: Vec<f64> = v.iter().map(|x| x * x).collect();
            for j in 0..n {
                let dpj = match dp[i][j].as_constant() {
                    Some(c) => vec![c; g.len()],
                    None => eval_on(&dp[i][j], &basis, s.t)?,
                };
                let hij = &hessian[i][j];
                for k in 0..g.len() {
                    let dv = q[k] * (1.0 + 0.5 * (p[k] - 2.0) * g[k] * g[k] / w[k]) * hij[k]
                        + g[k] * q[k] * 0.25 * w[k].ln() * dpj[k];
                    sq[k] += dv * dv;
                }
            }
            w12_space[i].push(grid.integrate(&sq));
            v_hist[i].push(v);
        }
        diss.push(d);
        modular.push(m);
        hess.push(h);
        for (dst, v) in hi.iter_mut().zip(hr) {
            dst.push(v);
        }
        let mut sm = 0.0;
        for hi_row in &hessian {
            for (j, hij) in hi_row.iter().enumerate() {
                sm += grid.integrate(
                    &hij.iter()
                        .zip(&pvals[j])
                        .map(|(x, &p)| x.abs().powf(p))
                        .collect::<Vec<_>>(),
                );
            }
        }
        second_mod.push(sm);
    }

    let mut second_order_w12 = Vec::with_capacity(n);
    for i in 0..n {
        let mut dt_sq = Vec::with_capacity(ns);
        for k in 0..ns {
            let (a, b) = if ns == 1 {
                (0, 0)
            } else if k == 0 {
                (0, 1)
            } else if k == ns - 1 {
                (ns - 2, ns - 1)
            } else {
                (k - 1, k + 1)
            };
            let val = if a == b {
                0.0
            } else {
                let dtk = times[b] - times[a];
                let d: Vec<f64> = v_hist[i][b]
                    .iter()
                    .zip(&v_hist[i][a])
                    .map(|(x, y)| ((x - y) / dtk).powi(2))
                    .collect();
                grid.integrate(&d)
            };
            dt_sq.push(val);
        }
        second_order_w12.push((trapezoid(&times, &w12_space[i]) + trapezoid(&times, &dt_sq)).sqrt());
    }

    let sup_l2 = l2.iter().copied().fold(0.0, f64::max);
    let series = (0..ns)
        .map(|k| SnapshotMonitors {
            t: times[k],
            l2: l2[k],
            ut: ut[k],
            dissipation: diss[k],
            modular: modular[k],
            hessian_weighted: hess[k],
        })
        .collect();
    let report = EstimateReport {
        t_grid: times.clone(),
        sup_l2,
        dissipation: trapezoid(&times, &diss),
        ut_l2: trapezoid(&times, &ut),
        sup_modular: modular.iter().copied().fold(0.0, f64::max),
        hessian_weighted: trapezoid(&times, &hess),
        higher_int: r_list
            .iter()
            .zip(&hi)
            .map(|(&r, v)| HigherIntegrability {
                r,
                value: trapezoid(&times, v),
            })
            .collect(),
        second_order_w12,
        data_bound: data_bound(prob, &basis, &times)?,
        second_derivative_modular: all_fast.then(|| trapezoid(&times, &second_mod)),
        energy_residual: energy_residual_with(traj, sup_l2),
        epsilon: prob.epsilon,
        r_star,
    };
    Ok((report, series))
}

/// `1 + ||f||^2_{Q_T} + ||grad f||^2_{Q_T} + sum_i int |D_i u_0|^{p_i(x,0)} + ||u_0||^2_{W^{1,2}}`
/// from the exact data expressions.
pub fn data_bound(prob: &Problem, basis: &SineBasis, times: &[f64]) -> Result<f64, MonitorError> {
    let grid = basis.grid();
    let n = prob.dim();
    let mut total = 1.0;
    if prob.forcing.as_constant() != Some(0.0) {
        let grad_f = prob.forcing.gradient(n);
        let mut per_t = Vec::with_capacity(times.len());
        for &t in times {
            let mut acc = grid.integrate_map(&eval_on(&prob.forcing, basis, t)?, |v| v * v);
            for g in &grad_f {
                acc += grid.integrate_map(&eval_on(g, basis, t)?, |v| v * v);
            }
            per_t.push(acc);
        }
        total += trapezoid(times, &per_t);
    }
    let u0 = eval_on(&prob.initial, basis, 0.0)?;
    total += grid.integrate_map(&u0, |v| v * v);
    for (i, g) in prob.initial.gradient(n).iter().enumerate() {
        let d = eval_on(g, basis, 0.0)?;
        let p = eval_on(&prob.exponents[i], basis, 0.0)?;
        total += grid.integrate_map(&d, |v| v * v);
        total += grid.integrate(&d.iter().zip(&p).map(|(v, &q)| v.abs().powf(q)).collect::<Vec<_>>());
    }
    Ok(total)
}

fn energy_residual_with(traj: &Trajectory, sup_l2: f64) -> f64 {
    let times = traj.times();
    let mut worst: f64 = 0.0;
    let mut acc = 0.0;
    let mut k = 1;
    for st in &traj.steps {
        acc += st.defect();
        if k < times.len() && st.t_end >= times[k] {
            worst = worst.max(acc.abs());
            acc = 0.0;
            k += 1;
        }
    }
    worst / (sup_l2 + 1.0)
}

/// Max over snapshot intervals of `|Delta(||u||^2/2) + int diss - int (f,u)|`,
/// normalized by `sup_t ||u||_2^2 + 1`.
pub fn energy_residual(traj: &Trajectory) -> f64 {
    let sup = traj.snapshots.iter().map(|s| s.c.norm().powi(2)).fold(0.0, f64::max);
    energy_residual_with(traj, sup)
}

/// Absolute drift allowed per snapshot interval by [`contraction_check`].
pub const CONTRACTION_DRIFT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub distances: Vec<f64>,
    /// Largest `d(t_{k+1}) - d(t_k)`.
    pub max_increase: f64,
    pub pass: bool,
}

/// `||u_1 - u_2||_2` must not grow between snapshots beyond [`CONTRACTION_DRIFT`].
pub fn contraction_check(a: &Trajectory, b: &Trajectory) -> Result<ContractionReport, MonitorError> {
    if a.snapshots.len() != b.snapshots.len() || a.modes != b.modes {
        return Err(MonitorError::Misaligned {
            index: a.snapshots.len().min(b.snapshots.len()),
        });
    }
    let mut distances = Vec::with_capacity(a.snapshots.len());
    for (index, (x, y)) in a.snapshots.iter().zip(&b.snapshots).enumerate() {
        if x.t != y.t {
            return Err(MonitorError::Misaligned { index });
        }
        let d2: f64 = x.c.data().iter().zip(y.c.data()).map(|(p, q)| (p - q).powi(2)).sum();
        distances.push(d2.sqrt());
    }
    let max_increase = distances
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ContractionReport {
        pass: distances.windows(2).all(|w| w[1] <= w[0] + CONTRACTION_DRIFT),
        max_increase: if distances.len() < 2 { 0.0 } else { max_increase },
        distances,
    })
}

/// Default relative slack of [`boundedness_verdict`].
pub const DEFAULT_SLACK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Flat,
    Increasing,
    Decreasing,
    Mixed,
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trend::Flat => "flat",
            Trend::Increasing => "increasing",
            Trend::Decreasing => "decreasing",
            Trend::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessVerdict {
    pub field: String,
    pub values: Vec<f64>,
    /// `value / data_bound` per sweep point.
    pub ratios: Vec<f64>,
    /// `(max - min) / max|.|` over the last half of the sweep.
    pub variation: f64,
    pub trend: Trend,
    pub diverging: bool,
    pub pass: bool,
    pub note: Option<String>,
}

/// Boundedness of a sequence of sweep values.
///
/// Passes iff there are at least 3 points, the last `ceil(n/2)` values vary
/// by at most `slack` relative, and the sequence is not diverging. Diverging
/// means strictly increasing with non-decreasing increments and total growth
/// above `slack`, i.e. no sign of saturation.
pub fn boundedness_of(field: &str, values: &[f64], data_bounds: &[f64], slack: f64) -> BoundednessVerdict {
    let n = values.len();
    let ratios = values.iter().zip(data_bounds).map(|(v, d)| v / d).collect();
    let tail = &values[n - n.div_ceil(2)..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = lo.abs().max(hi.abs());
    let variation = if n == 0 || scale == 0.0 { 0.0 } else { (hi - lo) / scale };

    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let trend = if diffs.iter().all(|&d| d == 0.0) {
        Trend::Flat
    } else if diffs.iter().all(|&d| d >= 0.0) {
        Trend::Increasing
    } else if diffs.iter().all(|&d| d <= 0.0) {
        Trend::Decreasing
    } else {
        Trend::Mixed
    };
    let accelerating = diffs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let growth = if n >= 2 && values[0] != 0.0 {
        values[n - 1] / values[0] - 1.0
    } else {
        f64::INFINITY
    };
    let diverging = n >= 3 && diffs.iter().all(|&d| d > 0.0) && accelerating && growth > slack;
    let enough = n >= 3;
    let finite = values.iter().all(|v| v.is_finite());
    BoundednessVerdict {
        field: field.to_string(),
        values: values.to_vec(),
        ratios,
        variation,
        trend,
        diverging,
        pass: enough && finite && variation <= slack && !diverging,
        note: (!enough).then(|| format!("needs at least 3 sweep points, got {n}")),
    }
}

/// [`boundedness_of`] applied to a named report field across a sweep.
pub fn boundedness_verdict(
    reports: &[EstimateReport],
    field: &str,
    slack: f64,
) -> Result<BoundednessVerdict, MonitorError> {
    let values = reports
        .iter()
        .map(|r| {
            r.field(field)
                .ok_or_else(|| MonitorError::UnknownField(field.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let bounds: Vec<f64> = reports.iter().map(|r| r.data_bound).collect();
    Ok(boundedness_of(field, &values, &bounds, slack))
}
