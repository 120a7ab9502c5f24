//! Manufactured solutions: forcing that makes a chosen field an exact
//! solution, and the space-time error of a computed trajectory against it.

use super::system::{ForcingTable, GalerkinSystem};
use super::{build_basis, initial_coeffs, solve_from, Problem, SolverConfig, SolverError, Trajectory};
use crate::basis::{Derivative, SineBasis};
use crate::domain::{linspace, tensor_columns, RectDomain, SampleGrid};
use crate::field_dsl::{FieldExpr, Node, Var};
use crate::quadrature::TensorGrid;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Boundary values of an exact solution must stay below this, relative to
/// `max(1, max |u|)` over the sample grid.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Check that `u` vanishes on every face of the box for `t` in `[0, T]`.
pub fn check_boundary(
    u: &FieldExpr,
    domain: &RectDomain,
    horizon: f64,
    samples: SampleGrid,
) -> Result<(), SolverError> {
    let times = if u.depends_on(Var::T) {
        samples.times(horizon)
    } else {
        vec![0.0]
    };
    let interior = samples.space_columns(domain);
    let refs: Vec<&[f64]> = interior.iter().map(Vec::as_slice).collect();
    let mut buf = vec![0.0; interior[0].len()];
    let mut scale: f64 = 1.0;
    for &t in &times {
        u.eval_batch(&refs, t, &mut buf)?;
        scale = buf.iter().fold(scale, |m, v| m.max(v.abs()));
    }
    let tol = BOUNDARY_TOL * scale;
    for axis in 0..domain.dim() {
        for &at in &[0.0, domain.lengths()[axis]] {
            let axes: Vec<Vec<f64>> = domain
                .lengths()
                .iter()
                .enumerate()
                .map(|(a, &l)| {
                    if a == axis {
                        vec![at]
                    } else {
                        linspace(0.0, l, samples.space)
                    }
                })
                .collect();
            let cols = tensor_columns(&axes);
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let mut vals = vec![0.0; cols[0].len()];
            for &t in &times {
                u.eval_batch(&refs, t, &mut vals)?;
                if let Some(&value) = vals.iter().find(|v| v.abs() > tol) {
                    return Err(SolverError::Boundary {
                        axis: axis + 1,
                        at,
                        t,
                        value,
                    });
                }
            }
        }
    }
    Ok(())
}

/// `f = u_t - sum_j D_j[(eps^2 + |D_j u|^2)^{(p_j - 2)/2} D_j u]`, built
/// symbolically; the forcing already stored in `prob` is ignored.
pub fn manufactured_forcing(u_exact: &FieldExpr, prob: &Problem) -> Result<FieldExpr, SolverError> {
    check_boundary(u_exact, &prob.domain, prob.horizon, SampleGrid::new(33, 17))?;
    let eps2 = Node::constant(prob.epsilon * prob.epsilon);
    let mut f = u_exact.differentiate(Var::T).into_node();
    for (j, p) in prob.exponents.iter().enumerate() {
        let xi = u_exact.differentiate(Var::X(j)).into_node();
        let base = Node::add(eps2.clone(), Node::mul(xi.clone(), xi.clone()));
        let expo = Node::div(Node::sub(p.root().clone(), Node::constant(2.0)), Node::constant(2.0));
        let flux = FieldExpr::from_node(Node::mul(Node::pow(base, expo), xi));
        f = Node::sub(f, flux.differentiate(Var::X(j)).into_node());
    }
    Ok(FieldExpr::from_node(f))
}

/// Time nodes used by [`weak_forcing_table`].
pub const FORCING_TABLE_NODES: usize = 33;
/// Oversampling factor of the grid used by [`weak_forcing_table`].
pub const FORCING_OVERSAMPLE: usize = 4;

/// Forcing functional of a manufactured solution in weak form,
/// `<f, psi_k> = (u_t, psi_k) + sum_j (F_j(D_j u), D_j psi_k)`,
/// evaluated on a grid `FORCING_OVERSAMPLE` times finer than the basis grid
/// and tabulated at Chebyshev times.
///
/// This equals `(f, psi_k)` for the strong-form forcing of
/// [`manufactured_forcing`] (integration by parts; `psi_k` vanishes on the
/// boundary) but avoids quadrature of `|D_j u|^{p_j - 2}`, which is nearly
/// singular where `D_j u` vanishes.
pub fn weak_forcing_table(u_exact: &FieldExpr, prob: &Problem, basis: &SineBasis) -> Result<ForcingTable, SolverError> {
    check_boundary(u_exact, &prob.domain, prob.horizon, SampleGrid::new(33, 17))?;
    let nodes: Vec<usize> = basis.grid().shape().iter().map(|g| g * FORCING_OVERSAMPLE).collect();
    let fine = SineBasis::new(basis.modes(), Arc::new(TensorGrid::gauss(&prob.domain, &nodes)))?;
    let grid = fine.grid();
    let refs = grid.column_refs();
    let ut = u_exact.differentiate(Var::T);
    let grads = u_exact.gradient(prob.dim());
    let mut buf = vec![0.0; grid.len()];
    let mut pbuf = vec![0.0; grid.len()];
    let mut coeffs = Vec::with_capacity(FORCING_TABLE_NODES);
    for t in ForcingTable::nodes(prob.horizon, FORCING_TABLE_NODES) {
        ut.eval_batch(&refs, t, &mut buf)?;
        let mut acc = fine.project(&buf).into_vec();
        for (j, g) in grads.iter().enumerate() {
            g.eval_batch(&refs, t, &mut buf)?;
            prob.exponents[j].eval_batch(&refs, t, &mut pbuf)?;
            for (x, &p) in buf.iter_mut().zip(&pbuf) {
                *x = super::flux(*x, p, prob.epsilon);
            }
            let proj = fine.project_against(&buf, Derivative::First(j));
            acc.iter_mut().zip(proj.data()).for_each(|(a, b)| *a += b);
        }
        coeffs.push(acc);
    }
    Ok(ForcingTable::new(prob.horizon, coeffs))
}

/// `||u_m - u||_{L2(Q_T)}`: Gauss quadrature in space on the basis grid,
/// trapezoid over the snapshot times.
pub fn l2_error_qt(traj: &Trajectory, basis: &SineBasis, u_exact: &FieldExpr) -> Result<f64, SolverError> {
    let grid = basis.grid();
    let refs = grid.column_refs();
    let mut exact = vec![0.0; grid.len()];
    let mut sq = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        u_exact.eval_batch(&refs, s.t, &mut exact)?;
        let um = basis.eval(&s.c, Derivative::Value);
        let diff: Vec<f64> = um.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).collect();
        sq.push(grid.integrate(&diff));
    }
    Ok(trapezoid(&traj.times(), &sq).sqrt())
}

/// A manufactured-solution run: forcing, trajectory and space-time error.
#[derive(Debug, Clone)]
pub struct MmsRun {
    /// Problem with the strong-form manufactured forcing and `u_0 = u(., 0)`.
    pub problem: Problem,
    pub trajectory: Trajectory,
    pub l2_error: f64,
}

/// Solve with the manufactured forcing of `u_exact` (weak form, see
/// [`weak_forcing_table`]) starting from `u_exact(., 0)`.
pub fn solve_manufactured(prob: &Problem, cfg: &SolverConfig, u_exact: &FieldExpr) -> Result<MmsRun, SolverError> {
    let problem = Problem {
        forcing: manufactured_forcing(u_exact, prob)?,
        initial: u_exact.clone(),
        ..prob.clone()
    };
    problem.validate()?;
    let basis = build_basis(&problem, cfg)?;
    let table = weak_forcing_table(u_exact, &problem, &basis)?;
    let c0 = initial_coeffs(&problem, &basis)?;
    let sys = GalerkinSystem::new(&problem, basis)?.with_forcing_table(table);
    let trajectory = solve_from(&problem, cfg, &sys, c0)?;
    let l2_error = l2_error_qt(&trajectory, sys.basis(), u_exact)?;
    Ok(MmsRun {
        problem,
        trajectory,
        l2_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub modes: usize,
    pub l2_error: f64,
    /// `log(e_prev / e) / log(m / m_prev)`; absent for the first point.
    pub observed_order: Option<f64>,
}

/// Mode-refinement study with `m` modes on every axis, run concurrently.
pub fn convergence_study(
    prob: &Problem,
    cfg: &SolverConfig,
    u_exact: &FieldExpr,
    modes: &[usize],
) -> Result<Vec<ConvergencePoint>, SolverError> {
    let errors = modes
        .par_iter()
        .map(|&m| {
            let c = SolverConfig {
                modes: vec![m; prob.dim()],
                ..cfg.clone()
            };
            solve_manufactured(prob, &c, u_exact).map(|r| r.l2_error)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(modes
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(i, (&m, &e))| ConvergencePoint {
            modes: m,
            l2_error: e,
            observed_order: (i > 0).then(|| {
                let (m0, e0) = (modes[i - 1] as f64, errors[i - 1]);
                (e0 / e).ln() / (m as f64 / m0).ln()
            }),
        })
        .collect())
}

pub(crate) fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(tt, vv)| 0.5 * (tt[1] - tt[0]) * (vv[0] + vv[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RectDomain;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn problem(p: [&str; 2], eps: f64) -> Problem {
        Problem::new(
            RectDomain::unit(2),
            p.iter().map(|s| FieldExpr::parse(s).unwrap()).collect(),
            FieldExpr::zero(),
            FieldExpr::zero(),
            0.5,
            eps,
        )
        .unwrap()
    }

    #[test]
    fn zero_solution_has_zero_forcing() {
        let f = manufactured_forcing(&FieldExpr::zero(), &problem(["2.2", "1.9"], 1e-3)).unwrap();
        assert_eq!(f.as_constant(), Some(0.0));
    }

    #[test]
    fn heat_residual() {
        let u = FieldExpr::parse("exp(-t)*sin(pi*x1)*sin(pi*x2)").unwrap();
        let f = manufactured_forcing(&u, &problem(["2", "2"], 0.5)).unwrap();
        for (x, t) in [([0.3, 0.7], 0.1), ([0.5, 0.5], 0.4)] {
            let u0 = u.eval(&x, t).unwrap();
            assert_relative_eq!(f.eval(&x, t).unwrap(), (2.0 * PI * PI - 1.0) * u0, max_relative = 1e-12);
        }
    }

    #[test]
    fn forcing_matches_finite_difference_divergence() {
        let u = FieldExpr::parse("exp(-t)*sin(pi*x1)*sin(pi*x2)").unwrap();
        let eps = 1e-3;
        let prob = problem(["2.2 + 0.1*x1", "1.9"], eps);
        let f = manufactured_forcing(&u, &prob).unwrap();
        let grads = u.gradient(2);
        let flux_at = |j: usize, x: [f64; 2], t: f64| {
            let xi = grads[j].eval(&x, t).unwrap();
            let p = prob.exponents[j].eval(&x, t).unwrap();
            super::super::flux(xi, p, eps)
        };
        let h = 1e-5;
        for (x, t) in [([0.3, 0.2], 0.1), ([0.61, 0.37], 0.35), ([0.12, 0.83], 0.0)] {
            let mut div = 0.0;
            for j in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[j] += h;
                xm[j] -= h;
                div += (flux_at(j, xp, t) - flux_at(j, xm, t)) / (2.0 * h);
            }
            let want = -u.eval(&x, t).unwrap() - div;
            assert_relative_eq!(f.eval(&x, t).unwrap(), want, max_relative = 1e-6);
        }
    }

    #[test]
    fn forcing_table_interpolates_polynomials() {
        let nodes = ForcingTable::nodes(2.0, 9);
        assert_eq!(nodes[0], 0.0);
        assert!((nodes[8] - 2.0).abs() < 1e-15);
        let coeffs = nodes.iter().map(|&t| vec![t * t * t - t, 1.0]).collect();
        let tab = ForcingTable::new(2.0, coeffs);
        for t in [0.0, 0.33, 1.0, 1.97] {
            let v = tab.at(t);
            assert_relative_eq!(v[0], t * t * t - t, epsilon = 1e-13);
            assert_relative_eq!(v[1], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn weak_and_strong_forcing_agree_for_smooth_flux() {
        // Small amplitude and eps = 1 keep the flux analytic in a wide strip,
        // so both quadratures converge fast.
        let u = FieldExpr::parse("0.1*exp(-t)*sin(pi*x1)*sin(2*pi*x2)").unwrap();
        let prob = problem(["2.5", "3"], 1.0);
        let f = manufactured_forcing(&u, &prob).unwrap();
        let basis = build_basis(&prob, &SolverConfig::new(vec![5, 5])).unwrap();
        let tab = weak_forcing_table(&u, &prob, &basis).unwrap();
        let fine = SineBasis::new(basis.modes(), Arc::new(TensorGrid::uniform(&prob.domain, 120))).unwrap();
        for t in [0.0, 0.21, 0.5] {
            let strong = fine.project(&f.eval_columns(fine.grid().columns(), t).unwrap());
            let weak = tab.at(t);
            for (a, b) in strong.data().iter().zip(&weak) {
                assert!((a - b).abs() < 1e-11, "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn manufactured_run_is_accurate() {
        let u = FieldExpr::parse("exp(-t)*sin(pi*x1)*sin(pi*x2)").unwrap();
        let prob = Problem {
            horizon: 0.1,
            ..problem(["2.2", "1.9"], 1e-2)
        };
        let cfg = SolverConfig {
            snapshots: 10,
            ..SolverConfig::new(vec![2, 2])
        };
        let pts = convergence_study(&prob, &cfg, &u, &[2, 4]).unwrap();
        assert!(pts.iter().all(|p| p.l2_error < 1e-4), "{pts:?}");
        assert!(pts[0].observed_order.is_none() && pts[1].observed_order.is_some());
        let zero = solve_manufactured(&prob, &cfg, &FieldExpr::zero()).unwrap();
        assert_eq!(zero.l2_error, 0.0);
    }

    #[test]
    fn boundary_violation_is_rejected() {
        let u = FieldExpr::parse("x1*sin(pi*x2)").unwrap();
        let err = manufactured_forcing(&u, &problem(["2", "2"], 0.5)).unwrap_err();
        assert!(matches!(err, SolverError::Boundary { axis: 1, .. }), "{err}");
    }
}
