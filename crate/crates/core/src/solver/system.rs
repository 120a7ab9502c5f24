//! Semi-discrete Galerkin right-hand side.

use super::{Problem, SolverError};
use crate::basis::{Derivative, SineBasis, SpectralCoeffs};
use crate::field_dsl::{FieldExpr, Var};

enum ExponentData {
    /// `(p - 2) / 2` for a constant exponent.
    Constant(f64),
    /// `(p - 2) / 2` sampled once at the grid nodes.
    Frozen(Vec<f64>),
    Moving(FieldExpr),
}

enum ForcingData {
    Zero,
    Frozen(Vec<f64>),
    Moving(FieldExpr),
    Table(ForcingTable),
}

/// Forcing coefficients `(f(., t), psi_k)` tabulated at Chebyshev points of
/// `[0, T]` and interpolated barycentrically in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTable {
    horizon: f64,
    times: Vec<f64>,
    weights: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl ForcingTable {
    /// Chebyshev points of the second kind on `[0, T]`, ascending.
    pub fn nodes(horizon: f64, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let th = std::f64::consts::PI * (n - 1 - i) as f64 / (n - 1) as f64;
                0.5 * horizon * (1.0 + th.cos())
            })
            .collect()
    }

    /// `coeffs[i]` holds the forcing coefficients at `nodes(horizon, n)[i]`.
    pub fn new(horizon: f64, coeffs: Vec<Vec<f64>>) -> Self {
        let n = coeffs.len();
        let times = Self::nodes(horizon, n);
        let weights = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                if i == 0 || i == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        ForcingTable {
            horizon,
            times,
            weights,
            coeffs,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        if let Some(i) = self.times.iter().position(|&x| x == t) {
            return self.coeffs[i].clone();
        }
        let len = self.coeffs[0].len();
        let mut num = vec![0.0; len];
        let mut den = 0.0;
        for ((x, w), c) in self.times.iter().zip(&self.weights).zip(&self.coeffs) {
            let q = w / (t - x);
            den += q;
            for (a, b) in num.iter_mut().zip(c) {
                *a += q * b;
            }
        }
        num.iter_mut().for_each(|a| *a /= den);
        num
    }
}

/// One right-hand side evaluation.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub dcdt: Vec<f64>,
    /// `sum_j (F_j, D_j u)`.
    pub dissipation: f64,
    /// `(f, u)`.
    pub forcing_power: f64,
}

/// Galerkin system `c' = -sum_j (F_j(D_j u), D_j psi) + (f, psi)` on a fixed basis.
pub struct GalerkinSystem {
    basis: SineBasis,
    eps2: f64,
    exponents: Vec<ExponentData>,
    forcing: ForcingData,
}

fn half_shift(p: f64) -> f64 {
    0.5 * (p - 2.0)
}

impl GalerkinSystem {
    pub fn new(problem: &Problem, basis: SineBasis) -> Result<Self, SolverError> {
        let refs = basis.grid().column_refs();
        let npts = basis.grid().len();
        let mut exponents = Vec::with_capacity(problem.exponents.len());
        for p in &problem.exponents {
            exponents.push(if let Some(v) = p.as_constant() {
                ExponentData::Constant(half_shift(v))
            } else if !p.depends_on(Var::T) {
                let mut vals = vec![0.0; npts];
                p.eval_batch(&refs, 0.0, &mut vals)?;
                ExponentData::Frozen(vals.into_iter().map(half_shift).collect())
            } else {
                ExponentData::Moving(p.clone())
            });
        }
        let forcing = match problem.forcing.as_constant() {
            Some(z) if z == 0.0 => ForcingData::Zero,
            _ if !problem.forcing.depends_on(Var::T) => {
                let mut vals = vec![0.0; npts];
                problem.forcing.eval_batch(&refs, 0.0, &mut vals)?;
                ForcingData::Frozen(basis.project(&vals).into_vec())
            }
            _ => ForcingData::Moving(problem.forcing.clone()),
        };
        Ok(GalerkinSystem {
            basis,
            eps2: problem.epsilon * problem.epsilon,
            exponents,
            forcing,
        })
    }

    /// Replace the forcing by tabulated coefficients.
    pub fn with_forcing_table(mut self, table: ForcingTable) -> Self {
        self.forcing = ForcingData::Table(table);
        self
    }

    pub fn basis(&self) -> &SineBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Forcing coefficients `(f(., t), psi_k)`, or `None` when `f = 0`.
    pub fn forcing_coeffs(&self, t: f64) -> Result<Option<Vec<f64>>, SolverError> {
        Ok(match &self.forcing {
            ForcingData::Zero => None,
            ForcingData::Frozen(c) => Some(c.clone()),
            ForcingData::Table(tab) => Some(tab.at(t)),
            ForcingData::Moving(f) => {
                let grid = self.basis.grid();
                let mut vals = vec![0.0; grid.len()];
                f.eval_batch(&grid.column_refs(), t, &mut vals)?;
                Some(self.basis.project(&vals).into_vec())
            }
        })
    }

    /// `(p_j(x, t) - 2) / 2` at the grid nodes.
    fn shifts(&self, j: usize, t: f64) -> Result<Shift<'_>, SolverError> {
        Ok(match &self.exponents[j] {
            ExponentData::Constant(e) => Shift::Constant(*e),
            ExponentData::Frozen(v) => Shift::Nodal(std::borrow::Cow::Borrowed(v)),
            ExponentData::Moving(p) => {
                let grid = self.basis.grid();
                let mut vals = vec![0.0; grid.len()];
                p.eval_batch(&grid.column_refs(), t, &mut vals)?;
                vals.iter_mut().for_each(|v| *v = half_shift(*v));
                Shift::Nodal(std::borrow::Cow::Owned(vals))
            }
        })
    }

    /// Nodal values of the flux `F_j(x, t, D_j u)`.
    pub fn flux_values(&self, c: &SpectralCoeffs, j: usize, t: f64) -> Result<Vec<f64>, SolverError> {
        let mut g = self.basis.eval(c, Derivative::First(j));
        let eps2 = self.eps2;
        match self.shifts(j, t)? {
            Shift::Constant(e) if e == 0.0 => {}
            Shift::Constant(e) => g.iter_mut().for_each(|x| *x *= (eps2 + *x * *x).powf(e)),
            Shift::Nodal(v) => g
                .iter_mut()
                .zip(v.iter())
                .for_each(|(x, &e)| *x *= (eps2 + *x * *x).powf(e)),
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { t });
        }
        Ok(g)
    }

    pub fn rhs(&self, c: &SpectralCoeffs, t: f64) -> Result<RhsEval, SolverError> {
        let mut dcdt = vec![0.0; self.len()];
        let mut dissipation = 0.0;
        for j in 0..self.exponents.len() {
            let f = self.flux_values(c, j, t)?;
            let proj = self.basis.project_against(&f, Derivative::First(j));
            for ((d, &q), &ck) in dcdt.iter_mut().zip(proj.data()).zip(c.data()) {
                *d -= q;
                dissipation += q * ck;
            }
        }
        let mut forcing_power = 0.0;
        if let Some(fc) = self.forcing_coeffs(t)? {
            for ((d, &q), &ck) in dcdt.iter_mut().zip(&fc).zip(c.data()) {
                *d += q;
                forcing_power += q * ck;
            }
        }
        if dcdt.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { t });
        }
        Ok(RhsEval {
            dcdt,
            dissipation,
            forcing_power,
        })
    }

    /// Mean over nodes and directions of `(eps^2 + |D_j u|^2)^{(p_j-2)/2}` at time `t`.
    pub fn mean_diffusivity(&self, c: &SpectralCoeffs, t: f64) -> Result<f64, SolverError> {
        let npts = self.basis.grid().len();
        let mut acc = 0.0;
        for j in 0..self.exponents.len() {
            let g = self.basis.eval(c, Derivative::First(j));
            let sh = self.shifts(j, t)?;
            for (i, x) in g.iter().enumerate() {
                acc += (self.eps2 + x * x).powf(sh.at(i));
            }
        }
        Ok(acc / (npts * self.exponents.len()) as f64)
    }
}

enum Shift<'a> {
    Constant(f64),
    Nodal(std::borrow::Cow<'a, [f64]>),
}

impl Shift<'_> {
    fn at(&self, i: usize) -> f64 {
        match self {
            Shift::Constant(e) => *e,
            Shift::Nodal(v) => v[i],
        }
    }
}
