//! Regularized Galerkin evolution.
//!
//! The unknown is expanded in the sine basis, `u = sum_k c_k(t) psi_k`, and
//! the coefficients obey
//! `c_k' = -sum_j (F_j(x, t, D_j u), D_j psi_k) + (f(., t), psi_k)` with the
//! regularized flux `F_j = (eps^2 + |D_j u|^2)^{(p_j - 2)/2} D_j u`.
//! Projections use tensor Gauss quadrature, so the system is reproduced up
//! to quadrature error.

mod integrate;
mod mms;
mod sweep;
mod system;

pub use integrate::{phi1, phi2};
pub use mms::{
    check_boundary, convergence_study, l2_error_qt, manufactured_forcing, solve_manufactured, weak_forcing_table,
    ConvergencePoint, MmsRun, BOUNDARY_TOL, FORCING_OVERSAMPLE, FORCING_TABLE_NODES,
};
pub use sweep::{member_setup, sweep, SweepAxis, SweepMember};
pub use system::{ForcingTable, GalerkinSystem, RhsEval};

use crate::basis::{BasisError, SineBasis, SpectralCoeffs};
use crate::domain::{linspace, RectDomain};
use crate::field_dsl::{EvalError, FieldExpr};
use crate::quadrature::{default_nodes, TensorGrid};
use integrate::Stepper;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite flux or right-hand side at t = {t}")]
    NonFinite { t: f64 },
    #[error("blowup at t = {t}: max |c_k| = {max_abs:e} exceeds {BLOWUP_LIMIT:e}")]
    Blowup { t: f64, max_abs: f64 },
    #[error("stiffness failure at t = {t}: step {dt:e} fell below dt_min = {dt_min:e} (last scaled error {err:e})")]
    Stiffness { t: f64, dt: f64, dt_min: f64, err: f64 },
    #[error("step limit {steps} reached at t = {t}")]
    StepLimit { t: f64, steps: usize },
    #[error("exact solution is {value:e} on the face x{axis} = {at} at t = {t}")]
    Boundary { axis: usize, at: f64, t: f64, value: f64 },
}

/// Coefficients larger than this abort the run.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// Regularized flux `(eps^2 + xi^2)^{(p-2)/2} xi`.
///
/// For `eps = 0`, `p < 2` and `xi = 0` the singular power is resolved as `0`.
pub fn flux(xi: f64, p: f64, eps: f64) -> f64 {
    if p == 2.0 {
        return xi;
    }
    if xi == 0.0 {
        return 0.0;
    }
    (eps * eps + xi * xi).powf(0.5 * (p - 2.0)) * xi
}

/// Initial-boundary value problem on a box with homogeneous Dirichlet data.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub domain: RectDomain,
    pub exponents: Vec<FieldExpr>,
    pub forcing: FieldExpr,
    pub initial: FieldExpr,
    pub horizon: f64,
    pub epsilon: f64,
}

impl Problem {
    pub fn new(
        domain: RectDomain,
        exponents: Vec<FieldExpr>,
        forcing: FieldExpr,
        initial: FieldExpr,
        horizon: f64,
        epsilon: f64,
    ) -> Result<Self, SolverError> {
        let p = Problem {
            domain,
            exponents,
            forcing,
            initial,
            horizon,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.domain.dim();
        if self.exponents.len() != n {
            return Err(SolverError::Problem(format!(
                "{} exponents for a {n}-dimensional box",
                self.exponents.len()
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SolverError::Problem(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(SolverError::Problem(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        let exprs = self.exponents.iter().chain([&self.forcing, &self.initial]);
        for e in exprs {
            if e.space_arity() > n {
                return Err(SolverError::Problem(format!(
                    "`{e}` uses x{} in {n} dimensions",
                    e.space_arity()
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Problem {
            epsilon,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    ImexExponential,
    ExplicitRk,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::ImexExponential => "imex-exponential",
            Integrator::ExplicitRk => "explicit-rk",
        })
    }
}

impl FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "imex-exponential" => Ok(Integrator::ImexExponential),
            "explicit-rk" => Ok(Integrator::ExplicitRk),
            _ => Err(format!(
                "unknown integrator `{s}` (expected imex-exponential or explicit-rk)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sine modes per axis.
    pub modes: Vec<usize>,
    /// Gauss nodes per axis; `None` selects [`default_solver_nodes`].
    pub grid: Option<Vec<usize>>,
    pub integrator: Integrator,
    /// Initial step.
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Step tolerance, used as both absolute and relative weight.
    pub tol: f64,
    /// IMEX shift; `None` selects the mean initial diffusivity.
    pub kappa: Option<f64>,
    /// Number of snapshot intervals on `[0, T]`.
    pub snapshots: usize,
    pub max_steps: usize,
}

impl SolverConfig {
    pub fn new(modes: Vec<usize>) -> Self {
        SolverConfig {
            modes,
            ..SolverConfig::default()
        }
    }

    pub fn grid_nodes(&self) -> Vec<usize> {
        self.grid
            .clone()
            .unwrap_or_else(|| self.modes.iter().map(|&m| default_solver_nodes(m)).collect())
    }

    pub fn validate(&self, dim: usize) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if self.modes.len() != dim {
            return bad(format!("{} mode counts for {dim} axes", self.modes.len()));
        }
        if self.modes.contains(&0) {
            return bad("mode counts must be positive".into());
        }
        let grid = self.grid_nodes();
        if grid.len() != dim {
            return bad(format!("{} grid sizes for {dim} axes", grid.len()));
        }
        if grid.iter().zip(&self.modes).any(|(&g, &m)| g <= 2 * m) {
            return bad(format!(
                "grid {grid:?} does not resolve modes {:?} (need > 2m nodes)",
                self.modes
            ));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt <= dt_max (got {}, {}, {})",
                self.dt_min, self.dt, self.dt_max
            ));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if let Some(k) = self.kappa {
            if !(k >= 0.0 && k.is_finite()) {
                return bad(format!("kappa must be finite and >= 0, got {k}"));
            }
        }
        if self.snapshots == 0 {
            return bad("need at least one snapshot interval".into());
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            modes: vec![8, 8],
            grid: None,
            integrator: Integrator::ImexExponential,
            dt: 1e-4,
            dt_min: 1e-12,
            dt_max: 0.1,
            tol: 1e-6,
            kappa: None,
            snapshots: 100,
            max_steps: 5_000_000,
        }
    }
}

/// Gauss nodes per axis used by the solver: `max(4m, 2m + 14)`.
pub fn default_solver_nodes(modes: usize) -> usize {
    (4 * modes).max(default_nodes(modes))
}

/// Clamp range for the automatic IMEX shift.
pub const KAPPA_RANGE: (f64, f64) = (1e-3, 1e3);

/// Time, coefficients and their last evaluated derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinState {
    pub t: f64,
    pub c: SpectralCoeffs,
    pub dc_dt: SpectralCoeffs,
}

/// Energy bookkeeping of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t_start: f64,
    pub t_end: f64,
    /// `||u||_2^2 / 2` at both ends.
    pub energy_start: f64,
    pub energy_end: f64,
    /// Time integral of `sum_j (F_j, D_j u)` over the step.
    pub dissipation: f64,
    /// Time integral of `(f, u)` over the step.
    pub forcing_work: f64,
}

impl StepRecord {
    /// Signed defect of the energy identity over the step.
    pub fn defect(&self) -> f64 {
        self.energy_end - self.energy_start + self.dissipation - self.forcing_work
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub domain: RectDomain,
    pub modes: Vec<usize>,
    pub grid: Vec<usize>,
    pub integrator: Integrator,
    pub kappa: f64,
    pub snapshots: Vec<GalerkinState>,
    pub steps: Vec<StepRecord>,
    pub stats: SolveStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &GalerkinState {
        self.snapshots.last().expect("trajectory has snapshots")
    }

    /// Snapshots `first..=last` with the step records between them.
    pub fn window(&self, first: usize, last: usize) -> Trajectory {
        let last = last.min(self.snapshots.len().saturating_sub(1));
        let snapshots = self.snapshots[first..=last].to_vec();
        let (t0, t1) = (snapshots[0].t, snapshots[snapshots.len() - 1].t);
        Trajectory {
            domain: self.domain.clone(),
            modes: self.modes.clone(),
            grid: self.grid.clone(),
            integrator: self.integrator,
            kappa: self.kappa,
            steps: self
                .steps
                .iter()
                .filter(|s| s.t_start >= t0 && s.t_end <= t1)
                .cloned()
                .collect(),
            snapshots,
            stats: self.stats,
        }
    }

    /// Basis on the grid the trajectory was computed with.
    pub fn basis(&self) -> Result<SineBasis, BasisError> {
        SineBasis::new(&self.modes, Arc::new(TensorGrid::gauss(&self.domain, &self.grid)))
    }
}

/// Basis for a problem and configuration.
pub fn build_basis(prob: &Problem, cfg: &SolverConfig) -> Result<SineBasis, SolverError> {
    cfg.validate(prob.dim())?;
    let grid = Arc::new(TensorGrid::gauss(&prob.domain, &cfg.grid_nodes()));
    Ok(SineBasis::new(&cfg.modes, grid)?)
}

/// L2 projection of the initial datum.
pub fn initial_coeffs(prob: &Problem, basis: &SineBasis) -> Result<SpectralCoeffs, SolverError> {
    let grid = basis.grid();
    let mut vals = vec![0.0; grid.len()];
    prob.initial.eval_batch(&grid.column_refs(), 0.0, &mut vals)?;
    Ok(basis.project(&vals))
}

/// Right-hand side of the coefficient system at `(c, t)`.
pub fn rhs(prob: &Problem, cfg: &SolverConfig, c: &SpectralCoeffs, t: f64) -> Result<SpectralCoeffs, SolverError> {
    let sys = GalerkinSystem::new(prob, build_basis(prob, cfg)?)?;
    Ok(SpectralCoeffs::from_vec(&cfg.modes, sys.rhs(c, t)?.dcdt)?)
}

fn resolve_kappa(sys: &GalerkinSystem, cfg: &SolverConfig, c0: &SpectralCoeffs) -> Result<f64, SolverError> {
    Ok(match cfg.kappa {
        Some(k) => k,
        None => sys.mean_diffusivity(c0, 0.0)?.clamp(KAPPA_RANGE.0, KAPPA_RANGE.1),
    })
}

/// Integrate from `0` to `T`, recording `cfg.snapshots + 1` equispaced snapshots.
pub fn solve(prob: &Problem, cfg: &SolverConfig) -> Result<Trajectory, SolverError> {
    prob.validate()?;
    let basis = build_basis(prob, cfg)?;
    let c0 = initial_coeffs(prob, &basis)?;
    let sys = GalerkinSystem::new(prob, basis)?;
    solve_from(prob, cfg, &sys, c0)
}

/// [`solve`] from given initial coefficients on a prepared system.
pub fn solve_from(
    prob: &Problem,
    cfg: &SolverConfig,
    sys: &GalerkinSystem,
    c0: SpectralCoeffs,
) -> Result<Trajectory, SolverError> {
    cfg.validate(prob.dim())?;
    let kappa = resolve_kappa(sys, cfg, &c0)?;
    let stepper = Stepper::new(sys, cfg.integrator, cfg.tol, kappa);
    let modes = cfg.modes.clone();
    let coeffs = |v: Vec<f64>| SpectralCoeffs::from_vec(&modes, v).expect("system-shaped coefficients");
    let energy = |v: &[f64]| 0.5 * v.iter().map(|x| x * x).sum::<f64>();

    let mut stats = SolveStats {
        accepted: 0,
        rejected: 0,
        rhs_evals: 0,
    };
    let mut t = 0.0;
    let mut c = c0.into_vec();
    let mut r = sys.rhs(&coeffs(c.clone()), t)?;
    stats.rhs_evals += 1;
    let mut snapshots = vec![GalerkinState {
        t,
        c: coeffs(c.clone()),
        dc_dt: coeffs(r.dcdt.clone()),
    }];
    let mut steps = Vec::new();
    let mut dt = cfg.dt;
    let expo = stepper.controller_exponent();
    let stages = match cfg.integrator {
        Integrator::ImexExponential => 1,
        Integrator::ExplicitRk => 6,
    };

    let targets = linspace(0.0, prob.horizon, cfg.snapshots + 1);
    for &target in &targets[1..] {
        while t < target {
            if stats.accepted + stats.rejected >= cfg.max_steps {
                return Err(SolverError::StepLimit {
                    t,
                    steps: cfg.max_steps,
                });
            }
            let remaining = target - t;
            let hits = dt >= remaining * (1.0 - 1e-12);
            let h = if hits { remaining } else { dt };
            let outcome = stepper.attempt(&c, t, &r, h);
            stats.rhs_evals += stages;
            let err = match outcome {
                Err(SolverError::NonFinite { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
                Ok(a) if a.err <= 1.0 && a.c1.iter().all(|v| v.is_finite()) => {
                    let (diss, work) = stepper.rate_integrals(&a.dense, t, h)?;
                    stats.rhs_evals += 3;
                    steps.push(StepRecord {
                        t_start: t,
                        t_end: if hits { target } else { t + h },
                        energy_start: energy(&c),
                        energy_end: energy(&a.c1),
                        dissipation: diss,
                        forcing_work: work,
                    });
                    t = if hits { target } else { t + h };
                    c = a.c1;
                    r = match a.end_rhs {
                        Some(er) => er,
                        None => {
                            stats.rhs_evals += 1;
                            sys.rhs(&coeffs(c.clone()), t)?
                        }
                    };
                    stats.accepted += 1;
                    let max_abs = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if max_abs > BLOWUP_LIMIT {
                        return Err(SolverError::Blowup { t, max_abs });
                    }
                    let fac = if a.err == 0.0 {
                        2.0
                    } else {
                        (0.9 * a.err.powf(-expo)).clamp(0.2, 2.0)
                    };
                    let proposed = (h * fac).min(cfg.dt_max);
                    dt = if hits {
                        proposed.max(dt.min(cfg.dt_max))
                    } else {
                        proposed
                    };
                    continue;
                }
                Ok(a) => a.err,
            };
            stats.rejected += 1;
            dt = 0.5 * h;
            if dt < cfg.dt_min {
                return Err(SolverError::Stiffness {
                    t,
                    dt,
                    dt_min: cfg.dt_min,
                    err,
                });
            }
        }
        snapshots.push(GalerkinState {
            t,
            c: coeffs(c.clone()),
            dc_dt: coeffs(r.dcdt.clone()),
        });
    }
    log::debug!(
        "solve: {} accepted, {} rejected, {} rhs evaluations, kappa = {kappa}",
        stats.accepted,
        stats.rejected,
        stats.rhs_evals
    );
    Ok(Trajectory {
        domain: prob.domain.clone(),
        modes: cfg.modes.clone(),
        grid: cfg.grid_nodes(),
        integrator: cfg.integrator,
        kappa,
        snapshots,
        steps,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    pub(crate) fn heat_problem(initial: &str, horizon: f64) -> Problem {
        Problem::new(
            RectDomain::unit(2),
            vec![FieldExpr::constant(2.0), FieldExpr::constant(2.0)],
            FieldExpr::zero(),
            FieldExpr::parse(initial).unwrap(),
            horizon,
            0.5,
        )
        .unwrap()
    }

    const PSI11: &str = "2*sin(pi*x1)*sin(pi*x2)";

    #[test]
    fn flux_examples() {
        assert_eq!(flux(0.0, 3.0, 0.1), 0.0);
        assert_eq!(flux(0.7, 2.0, 0.3), 0.7);
        assert_eq!(flux(2.0, 3.0, 0.0), 4.0);
        assert_eq!(flux(0.0, 1.5, 0.0), 0.0);
        assert_relative_eq!(flux(-2.0, 3.0, 0.0), -4.0);
    }

    #[test]
    fn rhs_examples() {
        let prob = heat_problem("0", 1.0);
        let cfg = SolverConfig::new(vec![4, 4]);
        let basis = build_basis(&prob, &cfg).unwrap();
        let sys = GalerkinSystem::new(&prob, basis).unwrap();
        let e = SpectralCoeffs::unit(&[4, 4], &[2, 3]);
        let r = sys.rhs(&e, 0.0).unwrap();
        let lam = 13.0 * PI * PI;
        for (o, v) in r.dcdt.iter().enumerate() {
            let want = if o == e.offset(&[2, 3]) { -lam } else { 0.0 };
            assert!((v - want).abs() < 1e-11 * lam, "offset {o}: {v}");
        }
        assert_relative_eq!(r.dissipation, lam, max_relative = 1e-12);
        let zero = sys.rhs(&SpectralCoeffs::zeros(&[4, 4]), 0.0).unwrap();
        assert!(zero.dcdt.iter().all(|&v| v == 0.0));

        let forced = Problem {
            forcing: FieldExpr::parse(PSI11).unwrap(),
            ..prob
        };
        let sys = GalerkinSystem::new(&forced, build_basis(&forced, &cfg).unwrap()).unwrap();
        let r = sys.rhs(&SpectralCoeffs::zeros(&[4, 4]), 0.3).unwrap();
        let unit = SpectralCoeffs::unit(&[4, 4], &[1, 1]);
        for (a, b) in r.dcdt.iter().zip(unit.data()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn initial_projection_examples() {
        let prob = heat_problem(PSI11, 1.0);
        let cfg = SolverConfig::new(vec![5, 5]);
        let basis = build_basis(&prob, &cfg).unwrap();
        let c = initial_coeffs(&prob, &basis).unwrap();
        assert!((c.get(&[1, 1]) - 1.0).abs() < 1e-13);
        assert!(c.data().iter().map(|v| v.abs()).sum::<f64>() - 1.0 < 1e-12);

        // 1-D parabola x(1-x): c_k = sqrt(2) 4 / (pi k)^3 for odd k, 0 for even.
        let prob1 = Problem::new(
            RectDomain::unit(1),
            vec![FieldExpr::constant(2.0)],
            FieldExpr::zero(),
            FieldExpr::parse("x1*(1-x1)").unwrap(),
            1.0,
            0.5,
        )
        .unwrap();
        let cfg1 = SolverConfig::new(vec![9]);
        let c = initial_coeffs(&prob1, &build_basis(&prob1, &cfg1).unwrap()).unwrap();
        for k in 1..=9usize {
            let want = if k % 2 == 1 {
                2f64.sqrt() * 4.0 / (PI * k as f64).powi(3)
            } else {
                0.0
            };
            assert!((c.get(&[k]) - want).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn heat_decay_is_exact_with_unit_shift() {
        let prob = heat_problem(PSI11, 0.1);
        let cfg = SolverConfig {
            kappa: Some(1.0),
            ..SolverConfig::new(vec![4, 4])
        };
        let traj = solve(&prob, &cfg).unwrap();
        let last = traj.last();
        assert_eq!(last.t, 0.1);
        let want = (-2.0 * PI * PI * 0.1).exp();
        assert_relative_eq!(last.c.get(&[1, 1]), want, max_relative = 1e-12);
        assert_eq!(traj.snapshots.len(), 101);
        assert!(traj.snapshots.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn heat_decay_with_explicit_rk() {
        let prob = heat_problem(PSI11, 0.1);
        let cfg = SolverConfig {
            integrator: Integrator::ExplicitRk,
            tol: 1e-9,
            ..SolverConfig::new(vec![4, 4])
        };
        let traj = solve(&prob, &cfg).unwrap();
        let want = (-2.0 * PI * PI * 0.1).exp();
        assert_relative_eq!(traj.last().c.get(&[1, 1]), want, max_relative = 1e-6);
    }

    #[test]
    fn zero_data_stays_zero() {
        let prob = heat_problem("0", 0.2);
        let traj = solve(&prob, &SolverConfig::new(vec![3, 3])).unwrap();
        assert!(traj
            .snapshots
            .iter()
            .all(|s| s.c.max_abs() == 0.0 && s.dc_dt.max_abs() == 0.0));
    }

    #[test]
    fn stiffness_failure_is_reported() {
        let prob = heat_problem("x1*(1-x1)*x2*(1-x2)", 0.1);
        let cfg = SolverConfig {
            integrator: Integrator::ExplicitRk,
            dt: 1e-2,
            dt_min: 4e-3,
            dt_max: 1e-2,
            snapshots: 2,
            ..SolverConfig::new(vec![8, 8])
        };
        let out = solve(&prob, &cfg);
        assert!(
            matches!(out, Err(SolverError::Stiffness { .. })),
            "{:?}",
            out.map(|t| t.stats)
        );
    }

    #[test]
    fn nonlinear_step_is_second_order() {
        let prob = Problem::new(
            RectDomain::unit(2),
            vec![FieldExpr::constant(2.6), FieldExpr::parse("1.8 + 0.1*x1").unwrap()],
            FieldExpr::zero(),
            FieldExpr::parse("sin(pi*x1)*sin(2*pi*x2) + 0.3*sin(2*pi*x1)*sin(pi*x2)").unwrap(),
            1.0,
            0.1,
        )
        .unwrap();
        let cfg = SolverConfig::new(vec![4, 4]);
        let basis = build_basis(&prob, &cfg).unwrap();
        let c0 = initial_coeffs(&prob, &basis).unwrap();
        let sys = GalerkinSystem::new(&prob, basis).unwrap();
        let stepper = Stepper::new(&sys, Integrator::ImexExponential, 1.0, 1.0);
        let r0 = sys.rhs(&c0, 0.0).unwrap();
        let reference = |h: f64| {
            // 100 sub-steps of ETD2RK as a reference
            let mut c = c0.data().to_vec();
            let sub = h / 100.0;
            for i in 0..100 {
                let ci = SpectralCoeffs::from_vec(&[4, 4], c.clone()).unwrap();
                let r = sys.rhs(&ci, i as f64 * sub).unwrap();
                c = stepper.attempt(&c, i as f64 * sub, &r, sub).unwrap().c1;
            }
            c
        };
        let err = |h: f64| {
            let one = stepper.attempt(c0.data(), 0.0, &r0, h).unwrap().c1;
            let refc = reference(h);
            one.iter().zip(&refc).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let (e1, e2) = (err(2e-3), err(1e-3));
        let order = (e1 / e2).log2();
        assert!(order > 2.5, "local order {order} (errors {e1:e}, {e2:e})");
    }

    #[test]
    fn config_rejects_bad_values() {
        let cfg = SolverConfig {
            grid: Some(vec![8, 8]),
            ..SolverConfig::new(vec![4, 4])
        };
        assert!(matches!(cfg.validate(2), Err(SolverError::Config(_))));
        assert!(SolverConfig::new(vec![4]).validate(2).is_err());
        let cfg = SolverConfig {
            dt: 1.0,
            ..SolverConfig::new(vec![4, 4])
        };
        assert!(cfg.validate(2).is_err());
        assert_eq!(default_solver_nodes(4), 22);
        assert_eq!(default_solver_nodes(16), 64);
    }

    #[test]
    fn problem_rejects_bad_values() {
        let base = heat_problem("0", 1.0);
        let bad_eps = Problem::new(
            base.domain.clone(),
            base.exponents.clone(),
            FieldExpr::zero(),
            FieldExpr::zero(),
            1.0,
            0.0,
        );
        assert!(bad_eps.is_err());
        let bad_t = Problem::new(
            base.domain.clone(),
            base.exponents.clone(),
            FieldExpr::zero(),
            FieldExpr::zero(),
            0.0,
            0.5,
        );
        assert!(bad_t.is_err());
        let bad_x = Problem::new(
            base.domain.clone(),
            base.exponents.clone(),
            FieldExpr::parse("x3").unwrap(),
            FieldExpr::zero(),
            1.0,
            0.5,
        );
        assert!(bad_x.is_err());
    }
}
