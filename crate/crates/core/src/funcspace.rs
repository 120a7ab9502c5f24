//! Variable-exponent Lebesgue numerics over sampled functions.
//!
//! Every quantity is a quadrature over a [`TensorGrid`]: modulars
//! `rho_p(u) = int |u|^{p(x)}`, Luxemburg norms `inf{lambda : rho_p(u/lambda) <= 1}`,
//! and checks of the Hölder, modular–norm and interpolation inequalities.
//! Embedding inequalities with unknown constants are only reported as
//! scale-invariant ratios.

use crate::exponents::{harmonic_mean, sobolev_conjugate, ExtReal};
use crate::field_dsl::{EvalError, FieldExpr};
use crate::quadrature::TensorGrid;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuncSpaceError {
    #[error("grid function has {found} values, grid has {expected} nodes")]
    Shape { expected: usize, found: usize },
    #[error("functions live on different grids")]
    GridMismatch,
    #[error("exponent must exceed 1 at every node (found {0})")]
    ExponentTooSmall(f64),
    #[error("non-finite modular contribution")]
    NonFinite,
    #[error("Luxemburg bracket failure: rho(u/{lo})={rho_lo}, rho(u/{hi})={rho_hi}")]
    Bracket { lo: f64, hi: f64, rho_lo: f64, rho_hi: f64 },
    #[error("Luxemburg iteration stalled at lambda={lambda} with |rho-1|={defect}")]
    NotConverged { lambda: f64, defect: f64 },
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Nodal values on a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<TensorGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<TensorGrid>, values: Vec<f64>) -> Result<Self, FuncSpaceError> {
        if values.len() != grid.len() {
            return Err(FuncSpaceError::Shape {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: Arc<TensorGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        GridFunction { grid, values }
    }

    /// Sample a field expression at the grid nodes at time `t`.
    pub fn from_expr(grid: Arc<TensorGrid>, e: &FieldExpr, t: f64) -> Result<Self, FuncSpaceError> {
        let mut values = vec![0.0; grid.len()];
        e.eval_batch(&grid.column_refs(), t, &mut values)?;
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Arc<TensorGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_pair(&self, other: &GridFunction) -> Result<(), FuncSpaceError> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(FuncSpaceError::GridMismatch);
        }
        Ok(())
    }
}

fn check_exponent(p: &GridFunction) -> Result<(), FuncSpaceError> {
    match p.values.iter().copied().find(|&v| !(v > 1.0)) {
        Some(bad) => Err(FuncSpaceError::ExponentTooSmall(bad)),
        None => Ok(()),
    }
}

fn modular_scaled(u: &GridFunction, p: &GridFunction, inv_lambda: f64) -> f64 {
    u.grid
        .weights()
        .iter()
        .zip(&u.values)
        .zip(&p.values)
        .map(|((w, &v), &q)| w * (v.abs() * inv_lambda).powf(q))
        .sum()
}

/// `rho_p(u) = int |u|^{p(x)} dx`.
pub fn modular(u: &GridFunction, p: &GridFunction) -> Result<f64, FuncSpaceError> {
    u.check_pair(p)?;
    check_exponent(p)?;
    let rho = modular_scaled(u, p, 1.0);
    if !rho.is_finite() {
        return Err(FuncSpaceError::NonFinite);
    }
    Ok(rho)
}

/// Classical `L^q` norm by quadrature, constant `q >= 1`.
pub fn lp_norm(u: &GridFunction, q: f64) -> f64 {
    u.grid.integrate_map(&u.values, |v| v.abs().powf(q)).powf(1.0 / q)
}

/// Default defect tolerance `|rho(u/lambda) - 1|` for Luxemburg norms.
pub const LUXEMBURG_TOL: f64 = 1e-10;
const LUXEMBURG_MAX_ITER: usize = 200;

/// Luxemburg norm by bisection on `log lambda`.
///
/// The initial bracket comes from the modular–norm relation
/// `min(|u|^{p-}, |u|^{p+}) <= rho(u) <= max(|u|^{p-}, |u|^{p+})`.
/// The bisection runs to double precision; the result must satisfy
/// `|rho(u/lambda) - 1| <= tol`.
pub fn luxemburg_norm(u: &GridFunction, p: &GridFunction, tol: f64) -> Result<f64, FuncSpaceError> {
    let rho = modular(u, p)?;
    if rho == 0.0 {
        return Ok(0.0);
    }
    let (pmin, pmax) = (p.min(), p.max());
    let a = rho.powf(1.0 / pmin);
    let b = rho.powf(1.0 / pmax);
    let mut lo = a.min(b) * (1.0 - 1e-9);
    let mut hi = a.max(b) * (1.0 + 1e-9);
    let f = |lam: f64| modular_scaled(u, p, 1.0 / lam) - 1.0;

    // rho(u/lambda) is decreasing in lambda: need f(lo) >= 0 >= f(hi).
    let mut expand = 0;
    while f(lo) < 0.0 || f(hi) > 0.0 {
        if expand == 64 || !(lo > 0.0 && hi.is_finite()) {
            return Err(FuncSpaceError::Bracket {
                lo,
                hi,
                rho_lo: f(lo) + 1.0,
                rho_hi: f(hi) + 1.0,
            });
        }
        if f(lo) < 0.0 {
            lo *= 0.5;
        }
        if f(hi) > 0.0 {
            hi *= 2.0;
        }
        expand += 1;
    }
    for _ in 0..LUXEMBURG_MAX_ITER {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    let (lambda, defect) = if flo <= fhi { (lo, flo) } else { (hi, fhi) };
    if defect > tol {
        return Err(FuncSpaceError::NotConverged { lambda, defect });
    }
    Ok(lambda)
}

/// Outcome of an inequality check `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `int |f g| <= 2 ||f||_{p} ||g||_{p'}` with `p' = p/(p-1)` nodewise.
pub fn holder_check(f: &GridFunction, g: &GridFunction, p: &GridFunction) -> Result<InequalityCheck, FuncSpaceError> {
    f.check_pair(g)?;
    f.check_pair(p)?;
    check_exponent(p)?;
    let fg: Vec<f64> = f.values.iter().zip(&g.values).map(|(a, b)| (a * b).abs()).collect();
    let lhs = f.grid.integrate(&fg);
    let conj = p.map(|q| q / (q - 1.0));
    let rhs = 2.0 * luxemburg_norm(f, p, LUXEMBURG_TOL)? * luxemburg_norm(g, &conj, LUXEMBURG_TOL)?;
    Ok(InequalityCheck {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-10,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularBounds {
    pub norm: f64,
    pub modular: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Relative slack of the modular–norm check.
pub const MODULAR_BOUNDS_TOL: f64 = 1e-8;

/// `min(|u|^{p-}, |u|^{p+}) <= rho(u) <= max(|u|^{p-}, |u|^{p+})`.
pub fn norm_modular_bounds_check(u: &GridFunction, p: &GridFunction) -> Result<ModularBounds, FuncSpaceError> {
    let rho = modular(u, p)?;
    let norm = luxemburg_norm(u, p, LUXEMBURG_TOL)?;
    let (a, b) = (norm.powf(p.min()), norm.powf(p.max()));
    let (lower, upper) = (a.min(b), a.max(b));
    let slack = MODULAR_BOUNDS_TOL * rho.abs().max(upper);
    Ok(ModularBounds {
        norm,
        modular: rho,
        lower,
        upper,
        pass: lower <= rho + slack && rho <= upper + slack,
    })
}

/// `sum_i ||D_i u||_{p_i(.)}`.
pub fn anisotropic_norm(grads: &[GridFunction], p: &[GridFunction]) -> Result<f64, FuncSpaceError> {
    if grads.len() != p.len() {
        return Err(FuncSpaceError::Inadmissible(format!(
            "{} gradients but {} exponents",
            grads.len(),
            p.len()
        )));
    }
    grads
        .iter()
        .zip(p)
        .map(|(g, q)| luxemburg_norm(g, q, LUXEMBURG_TOL))
        .sum()
}

/// Interpolation exponent `theta = (1/2 - 1/s) / ((N+2)/(2N) - 1/p_h)`.
pub fn theta(s: f64, n: usize, p_h: f64) -> Result<f64, FuncSpaceError> {
    let nf = n as f64;
    if !(p_h > 2.0 * nf / (nf + 2.0)) {
        return Err(FuncSpaceError::Inadmissible(format!(
            "p_h = {p_h} must exceed 2N/(N+2) = {}",
            2.0 * nf / (nf + 2.0)
        )));
    }
    let crit = sobolev_conjugate(p_h, n);
    if !(s > 2.0 && ExtReal::Finite(s) < crit) {
        return Err(FuncSpaceError::Inadmissible(format!(
            "need 2 < s < p_h* (s = {s}, p_h* = {crit})"
        )));
    }
    let th = (0.5 - 1.0 / s) / ((nf + 2.0) / (2.0 * nf) - 1.0 / p_h);
    if !(th > 0.0 && th < 1.0) {
        return Err(FuncSpaceError::Inadmissible(format!("theta = {th} outside (0, 1)")));
    }
    Ok(th)
}

/// `||u||_s <= ||u||_q^theta ||u||_2^{1-theta}` with `1/s = theta/q + (1-theta)/2`.
pub fn interpolation_check(u: &GridFunction, s: f64, q: f64) -> Result<InequalityCheck, FuncSpaceError> {
    if !(s > 2.0 && s <= q && q.is_finite()) {
        return Err(FuncSpaceError::Inadmissible(format!(
            "need 2 < s <= q < inf (s = {s}, q = {q})"
        )));
    }
    let th = if s == q { 1.0 } else { (0.5 - 1.0 / s) / (0.5 - 1.0 / q) };
    let lhs = lp_norm(u, s);
    let rhs = lp_norm(u, q).powf(th) * lp_norm(u, 2.0).powf(1.0 - th);
    Ok(InequalityCheck {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-10),
    })
}

/// Integrability exponent used in place of `p_h*` when `N <= p_h`, where any
/// finite exponent is admissible: `2 max(p_vee, N)`.
pub fn unbounded_embedding_exponent(p: &[f64]) -> f64 {
    let pvee = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    2.0 * pvee.max(p.len() as f64)
}

/// `||u||_{p_h*} / (sum_i ||D_i u||_{p_i} + ||u||_1)` for constant exponents.
///
/// The embedding constant is unknown; the ratio is a bounded-ratio monitor
/// and is invariant under `u -> c u`.
pub fn anisotropic_embedding_ratio(u: &GridFunction, grads: &[GridFunction], p: &[f64]) -> Result<f64, FuncSpaceError> {
    let n = p.len();
    if grads.len() != n || n == 0 {
        return Err(FuncSpaceError::Inadmissible("one gradient per exponent".into()));
    }
    let nf = n as f64;
    let pvee = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pwedge = p.iter().copied().fold(f64::INFINITY, f64::min);
    let ph = harmonic_mean(p);
    let crit = sobolev_conjugate(ph, n);
    if !(pwedge > 2.0 * nf / (nf + 2.0) && ExtReal::Finite(pvee) < crit) {
        return Err(FuncSpaceError::Inadmissible(format!(
            "need 2N/(N+2) < p_wedge <= p_vee < p_h* (p = {p:?}, p_h* = {crit})"
        )));
    }
    let target = match crit {
        ExtReal::Finite(v) => v,
        ExtReal::Infinite => unbounded_embedding_exponent(p),
    };
    let num = lp_norm(u, target);
    if num == 0.0 {
        return Ok(0.0);
    }
    let den: f64 = grads.iter().zip(p).map(|(g, &q)| lp_norm(g, q)).sum::<f64>() + lp_norm(u, 1.0);
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RectDomain;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_grid(n: usize, nodes: usize) -> Arc<TensorGrid> {
        Arc::new(TensorGrid::uniform(&RectDomain::unit(n), nodes))
    }

    #[test]
    fn modular_examples() {
        let g = unit_grid(2, 8);
        let p2 = GridFunction::constant(g.clone(), 2.0);
        assert_relative_eq!(
            modular(&GridFunction::constant(g.clone(), 2.0), &p2).unwrap(),
            4.0,
            max_relative = 1e-14
        );
        assert_eq!(modular(&GridFunction::constant(g.clone(), 0.0), &p2).unwrap(), 0.0);
        let p = GridFunction::from_fn(g.clone(), |x| 1.5 + x[0]);
        assert_relative_eq!(
            modular(&GridFunction::constant(g.clone(), 1.0), &p).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert!(matches!(
            modular(&p2, &GridFunction::constant(g, 1.0)),
            Err(FuncSpaceError::ExponentTooSmall(_))
        ));
    }

    #[test]
    fn luxemburg_examples() {
        let g = unit_grid(2, 8);
        let p2 = GridFunction::constant(g.clone(), 2.0);
        let u3 = GridFunction::constant(g.clone(), 3.0);
        assert_relative_eq!(luxemburg_norm(&u3, &p2, 1e-10).unwrap(), 3.0, max_relative = 1e-12);
        let p = GridFunction::from_fn(g.clone(), |x| 2.0 + x[0] * x[1]);
        let one = GridFunction::constant(g.clone(), 1.0);
        assert_relative_eq!(luxemburg_norm(&one, &p, 1e-10).unwrap(), 1.0, max_relative = 1e-12);
        assert_eq!(luxemburg_norm(&one.scale(0.0), &p, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn piecewise_exponent_fixed_point() {
        // p = 2 on (0, 1/2), 3 on (1/2, 1); (1/l^2 + 1/l^3)/2 = 1 has root l = 1.
        let g = unit_grid(1, 40);
        let p = GridFunction::from_fn(g.clone(), |x| if x[0] < 0.5 { 2.0 } else { 3.0 });
        let one = GridFunction::constant(g, 1.0);
        assert_relative_eq!(luxemburg_norm(&one, &p, 1e-10).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn holder_examples() {
        let g = unit_grid(2, 6);
        let one = GridFunction::constant(g.clone(), 1.0);
        let p2 = GridFunction::constant(g.clone(), 2.0);
        let chk = holder_check(&one, &one, &p2).unwrap();
        assert_relative_eq!(chk.lhs, 1.0, max_relative = 1e-14);
        assert_relative_eq!(chk.rhs, 2.0, max_relative = 1e-12);
        assert!(chk.pass);
        let chk = holder_check(&one.scale(0.0), &one, &p2).unwrap();
        assert_eq!(chk.lhs, 0.0);
        assert!(chk.pass);
    }

    #[test]
    fn modular_bounds_examples() {
        let g = unit_grid(2, 6);
        let one = GridFunction::constant(g.clone(), 1.0);
        let p = GridFunction::from_fn(g.clone(), |x| 2.0 + x[0]);
        let b = norm_modular_bounds_check(&one, &p).unwrap();
        assert!(b.pass);
        assert_relative_eq!(b.norm, 1.0, max_relative = 1e-12);
        assert_relative_eq!(b.modular, 1.0, max_relative = 1e-12);
        let u = GridFunction::from_fn(g.clone(), |x| 3.0 * x[0] + x[1]);
        let b = norm_modular_bounds_check(&u, &GridFunction::constant(g, 3.0)).unwrap();
        assert_relative_eq!(b.lower, b.upper);
        assert_relative_eq!(b.modular, b.norm.powi(3), max_relative = 1e-9);
    }

    #[test]
    fn anisotropic_norm_of_first_mode() {
        let g = unit_grid(2, 24);
        let d1 = GridFunction::from_fn(g.clone(), |x| PI * (PI * x[0]).cos() * (PI * x[1]).sin());
        let d2 = GridFunction::from_fn(g.clone(), |x| PI * (PI * x[0]).sin() * (PI * x[1]).cos());
        let p2 = GridFunction::constant(g.clone(), 2.0);
        let n = anisotropic_norm(&[d1.clone(), d2], &[p2.clone(), p2.clone()]).unwrap();
        assert_relative_eq!(n, PI, max_relative = 1e-10);
        let zero = d1.scale(0.0);
        assert_eq!(anisotropic_norm(&[zero.clone(), zero], &[p2.clone(), p2]).unwrap(), 0.0);
    }

    #[test]
    fn theta_examples() {
        assert_relative_eq!(theta(3.0, 3, 2.0).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(theta(4.0, 2, 2.0).unwrap(), 0.5, max_relative = 1e-14);
        let small = theta(2.0 + 1e-9, 3, 2.0).unwrap();
        assert!(small > 0.0 && small < 1e-8);
        assert!(theta(7.0, 3, 2.0).is_err()); // s beyond p_h* = 6
        assert!(theta(3.0, 3, 1.0).is_err()); // p_h below 2N/(N+2)
    }

    #[test]
    fn interpolation_examples() {
        let g = unit_grid(2, 6);
        let c = GridFunction::constant(g.clone(), 1.7);
        let chk = interpolation_check(&c, 3.0, 5.0).unwrap();
        assert_relative_eq!(chk.lhs, 1.7, max_relative = 1e-13);
        assert_relative_eq!(chk.rhs, 1.7, max_relative = 1e-13);
        assert!(chk.pass);
        let bump = GridFunction::from_fn(g, |x| (-(x[0] - 0.5).powi(2) * 40.0).exp());
        let chk = interpolation_check(&bump, 4.0, 4.0).unwrap();
        assert_relative_eq!(chk.lhs, chk.rhs, max_relative = 1e-14);
        assert!(interpolation_check(&bump, 2.0, 3.0).is_err());
    }

    #[test]
    fn embedding_ratio_examples() {
        let g = unit_grid(2, 24);
        let u = GridFunction::from_fn(g.clone(), |x| 2.0 * (PI * x[0]).sin() * (PI * x[1]).sin());
        let d1 = GridFunction::from_fn(g.clone(), |x| 2.0 * PI * (PI * x[0]).cos() * (PI * x[1]).sin());
        let d2 = GridFunction::from_fn(g.clone(), |x| 2.0 * PI * (PI * x[0]).sin() * (PI * x[1]).cos());
        let r = anisotropic_embedding_ratio(&u, &[d1.clone(), d2.clone()], &[2.0, 2.0]).unwrap();
        assert!(r.is_finite() && r > 0.0);
        let r2 = anisotropic_embedding_ratio(&u.scale(2.0), &[d1.scale(2.0), d2.scale(2.0)], &[2.0, 2.0]).unwrap();
        assert_relative_eq!(r, r2, max_relative = 1e-12);
        let z = u.scale(0.0);
        assert_eq!(
            anisotropic_embedding_ratio(&z, &[z.clone(), z.clone()], &[2.0, 2.0]).unwrap(),
            0.0
        );
        assert!(anisotropic_embedding_ratio(&u, &[d1, d2], &[0.9, 2.0]).is_err());
    }
}
