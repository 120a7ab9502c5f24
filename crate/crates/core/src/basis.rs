//! Dirichlet–Laplacian sine eigenbasis on the box `prod (0, l_i)`.
//!
//! `psi_k(x) = prod_i sqrt(2/l_i) sin(pi k_i x_i / l_i)`, `lambda_k = pi^2 sum k_i^2 / l_i^2`,
//! with `k_i >= 1`. The family is orthonormal and complete in `L^2` of the box.
//! Expansions are evaluated and projected through separable per-axis matrices.

use crate::domain::RectDomain;
use crate::funcspace::GridFunction;
use crate::quadrature::{default_nodes, TensorGrid};
use crate::tensor::{separable_apply, Mat};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("expected {expected} axes, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("mode count on every axis must be at least 1")]
    NoModes,
    #[error("coefficient tensor has {found} entries, modes imply {expected}")]
    Shape { expected: usize, found: usize },
}

/// Multi-index `k` with every `k_i >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EigenIndex(pub Vec<usize>);

impl EigenIndex {
    pub fn new(k: Vec<usize>) -> Option<Self> {
        (!k.is_empty() && k.iter().all(|&ki| ki >= 1)).then_some(EigenIndex(k))
    }
}

pub fn eigenvalue(k: &EigenIndex, dom: &RectDomain) -> f64 {
    PI * PI
        * k.0
            .iter()
            .zip(dom.lengths())
            .map(|(&ki, &l)| (ki as f64 / l).powi(2))
            .sum::<f64>()
}

/// Coefficient tensor indexed by `k in {1..m_1} x ... x {1..m_N}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoeffs {
    modes: Vec<usize>,
    data: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn zeros(modes: &[usize]) -> Self {
        SpectralCoeffs {
            modes: modes.to_vec(),
            data: vec![0.0; modes.iter().product()],
        }
    }

    pub fn from_vec(modes: &[usize], data: Vec<f64>) -> Result<Self, BasisError> {
        let expected: usize = modes.iter().product();
        if data.len() != expected {
            return Err(BasisError::Shape {
                expected,
                found: data.len(),
            });
        }
        Ok(SpectralCoeffs {
            modes: modes.to_vec(),
            data,
        })
    }

    /// Unit coefficient on the (1-based) index `k`.
    pub fn unit(modes: &[usize], k: &[usize]) -> Self {
        let mut c = Self::zeros(modes);
        c.set(k, 1.0);
        c
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of the 1-based index `k`.
    pub fn offset(&self, k: &[usize]) -> usize {
        debug_assert_eq!(k.len(), self.modes.len());
        k.iter().zip(&self.modes).fold(0, |acc, (&ki, &m)| {
            assert!(ki >= 1 && ki <= m, "mode index {ki} outside 1..={m}");
            acc * m + (ki - 1)
        })
    }

    /// 1-based multi-index of a flat offset.
    pub fn index_of(&self, mut offset: usize) -> Vec<usize> {
        let mut k = vec![0; self.modes.len()];
        for (a, &m) in self.modes.iter().enumerate().rev() {
            k[a] = offset % m + 1;
            offset /= m;
        }
        k
    }

    pub fn get(&self, k: &[usize]) -> f64 {
        self.data[self.offset(k)]
    }

    pub fn set(&mut self, k: &[usize], v: f64) {
        let o = self.offset(k);
        self.data[o] = v;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Which derivative of an expansion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    /// `D_j`, zero-based axis.
    First(usize),
    /// `D^2_{ij} = D_i D_j`, zero-based axes (may coincide).
    Second(usize, usize),
}

impl Derivative {
    fn order_on(self, axis: usize) -> usize {
        match self {
            Derivative::Value => 0,
            Derivative::First(j) => usize::from(j == axis),
            Derivative::Second(i, j) => usize::from(i == axis) + usize::from(j == axis),
        }
    }
}

/// One-dimensional factor `sqrt(2/l) sin(pi k x / l)` and its derivatives.
fn factor(order: usize, k: usize, x: f64, len: f64) -> f64 {
    let w = PI * k as f64 / len;
    let amp = (2.0 / len).sqrt();
    match order {
        0 => amp * (w * x).sin(),
        1 => amp * w * (w * x).cos(),
        2 => -amp * w * w * (w * x).sin(),
        _ => unreachable!("derivatives above second order are not tabulated"),
    }
}

/// Sine basis bound to a quadrature grid.
#[derive(Debug, Clone)]
pub struct SineBasis {
    modes: Vec<usize>,
    grid: Arc<TensorGrid>,
    eval_mats: Vec<[Mat; 3]>,
    proj_mats: Vec<[Mat; 3]>,
    eigenvalues: Vec<f64>,
}

impl SineBasis {
    pub fn new(modes: &[usize], grid: Arc<TensorGrid>) -> Result<Self, BasisError> {
        let dom = grid.domain();
        if modes.len() != dom.dim() {
            return Err(BasisError::Dimension {
                expected: dom.dim(),
                found: modes.len(),
            });
        }
        if modes.contains(&0) {
            return Err(BasisError::NoModes);
        }
        let mut eval_mats = Vec::with_capacity(modes.len());
        let mut proj_mats = Vec::with_capacity(modes.len());
        for (a, &m) in modes.iter().enumerate() {
            let len = dom.lengths()[a];
            let nodes = grid.axis_nodes(a);
            let weights = grid.axis_weights(a);
            let ev: [Mat; 3] =
                std::array::from_fn(|order| Mat::from_fn(nodes.len(), m, |g, k| factor(order, k + 1, nodes[g], len)));
            let pr: [Mat; 3] =
                std::array::from_fn(|order| Mat::from_fn(m, nodes.len(), |k, g| weights[g] * ev[order].get(g, k)));
            eval_mats.push(ev);
            proj_mats.push(pr);
        }
        let proto = SpectralCoeffs::zeros(modes);
        let eigenvalues = (0..proto.len())
            .map(|o| eigenvalue(&EigenIndex(proto.index_of(o)), dom))
            .collect();
        let basis = SineBasis {
            modes: modes.to_vec(),
            grid,
            eval_mats,
            proj_mats,
            eigenvalues,
        };
        if !basis.resolves() {
            log::warn!(
                "quadrature grid {:?} under-resolves modes {:?}; projections will alias",
                basis.grid.shape(),
                basis.modes
            );
        }
        Ok(basis)
    }

    /// Basis on a Gauss grid with [`default_nodes`] per axis.
    pub fn with_default_grid(domain: &RectDomain, modes: &[usize]) -> Result<Self, BasisError> {
        let nodes: Vec<usize> = modes.iter().map(|&m| default_nodes(m)).collect();
        if nodes.len() != domain.dim() {
            return Err(BasisError::Dimension {
                expected: domain.dim(),
                found: modes.len(),
            });
        }
        Self::new(modes, Arc::new(TensorGrid::gauss(domain, &nodes)))
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.grid
    }

    pub fn domain(&self) -> &RectDomain {
        self.grid.domain()
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// Eigenvalues in coefficient (flat) order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn zeros(&self) -> SpectralCoeffs {
        SpectralCoeffs::zeros(&self.modes)
    }

    /// At least `2 * modes + 1` nodes on every axis.
    pub fn resolves(&self) -> bool {
        self.modes.iter().zip(self.grid.shape()).all(|(&m, g)| g > 2 * m)
    }

    /// Values of `sum_k c_k D^alpha psi_k` at the grid nodes.
    pub fn eval(&self, c: &SpectralCoeffs, deriv: Derivative) -> Vec<f64> {
        debug_assert_eq!(c.modes(), self.modes.as_slice());
        let mats: Vec<&Mat> = (0..self.dim()).map(|a| &self.eval_mats[a][deriv.order_on(a)]).collect();
        separable_apply(c.data(), &self.modes, &mats)
    }

    pub fn eval_expansion(&self, c: &SpectralCoeffs, deriv: Derivative) -> GridFunction {
        GridFunction::new(self.grid.clone(), self.eval(c, deriv)).expect("grid-shaped values")
    }

    /// `c_k = (u, psi_k)` by quadrature.
    pub fn project(&self, values: &[f64]) -> SpectralCoeffs {
        self.project_against(values, Derivative::Value)
    }

    /// `c_k = (v, D^alpha psi_k)` by quadrature.
    pub fn project_against(&self, values: &[f64], deriv: Derivative) -> SpectralCoeffs {
        debug_assert_eq!(values.len(), self.grid.len());
        let mats: Vec<&Mat> = (0..self.dim()).map(|a| &self.proj_mats[a][deriv.order_on(a)]).collect();
        let data = separable_apply(values, &self.grid.shape(), &mats);
        SpectralCoeffs {
            modes: self.modes.clone(),
            data,
        }
    }
}

/// `(sum_k lambda_k^{2s} c_k^2)^{1/2}`: `||Delta^s u||_2` for integer `s`, the
/// Dirichlet seminorm `||grad u||_2` for `s = 1/2`.
pub fn parseval_norm(c: &SpectralCoeffs, dom: &RectDomain, order: f64) -> f64 {
    c.data()
        .iter()
        .enumerate()
        .map(|(o, &ck)| {
            let lam = eigenvalue(&EigenIndex(c.index_of(o)), dom);
            lam.powf(2.0 * order) * ck * ck
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Relative tolerance for the Laplacian/Hessian identity.
pub const LAPLACIAN_IDENTITY_TOL: f64 = 1e-9;

/// `int |Delta u|^2` against `sum_{ij} int |D^2_{ij} u|^2`, both by quadrature.
pub fn laplacian_identity_check(basis: &SineBasis, c: &SpectralCoeffs) -> IdentityCheck {
    let n = basis.dim();
    let grid = basis.grid();
    let mut lap = vec![0.0; grid.len()];
    for i in 0..n {
        for (l, v) in lap.iter_mut().zip(basis.eval(c, Derivative::Second(i, i))) {
            *l += v;
        }
    }
    let lhs = grid.integrate_map(&lap, |v| v * v);
    let mut rhs = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = basis.eval(c, Derivative::Second(i, j));
            rhs += grid.integrate_map(&d, |v| v * v);
        }
    }
    let scale = lhs.abs().max(rhs.abs());
    let pass = (lhs - rhs).abs() <= LAPLACIAN_IDENTITY_TOL * scale || scale == 0.0;
    IdentityCheck { lhs, rhs, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square(m: usize) -> SineBasis {
        SineBasis::with_default_grid(&RectDomain::unit(2), &[m, m]).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        let dom = RectDomain::unit(2);
        assert_relative_eq!(eigenvalue(&EigenIndex(vec![1, 1]), &dom), 2.0 * PI * PI);
        assert_relative_eq!(eigenvalue(&EigenIndex(vec![2, 1]), &dom), 5.0 * PI * PI);
        let big = RectDomain::new(vec![2.0, 2.0]).unwrap();
        assert_relative_eq!(
            eigenvalue(&EigenIndex(vec![2, 1]), &big),
            eigenvalue(&EigenIndex(vec![2, 1]), &dom) / 4.0
        );
        assert!(EigenIndex::new(vec![1, 0]).is_none());
    }

    #[test]
    fn index_round_trip() {
        let c = SpectralCoeffs::zeros(&[3, 4, 2]);
        for o in 0..c.len() {
            assert_eq!(c.offset(&c.index_of(o)), o);
        }
        assert_eq!(c.index_of(0), vec![1, 1, 1]);
    }

    #[test]
    fn unit_mode_round_trip() {
        let b = unit_square(4);
        let c = SpectralCoeffs::unit(&[4, 4], &[1, 2]);
        let back = b.project(&b.eval(&c, Derivative::Value));
        for (x, y) in back.data().iter().zip(c.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn first_derivative_vanishes_at_midpoint() {
        // odd node count puts a node at the centre
        let dom = RectDomain::unit(2);
        let grid = Arc::new(TensorGrid::uniform(&dom, 21));
        let b = SineBasis::new(&[2, 2], grid.clone()).unwrap();
        let d = b.eval(&SpectralCoeffs::unit(&[2, 2], &[1, 1]), Derivative::First(0));
        let centre = (0..grid.len())
            .find(|&i| grid.point(i).iter().all(|&x| (x - 0.5).abs() < 1e-15))
            .unwrap();
        assert!(d[centre].abs() < 1e-15);
    }

    #[test]
    fn derivative_norm_closed_form() {
        let dom = RectDomain::new(vec![1.5, 0.7]).unwrap();
        let b = SineBasis::with_default_grid(&dom, &[3, 3]).unwrap();
        let c = SpectralCoeffs::unit(&[3, 3], &[1, 1]);
        let d = b.eval(&c, Derivative::First(0));
        let n2 = b.grid().integrate_map(&d, |v| v * v);
        assert_relative_eq!(n2, PI * PI / (1.5 * 1.5), max_relative = 1e-12);
    }

    #[test]
    fn two_mode_projection() {
        let b = unit_square(4);
        let mut c = b.zeros();
        c.set(&[1, 1], 1.0);
        c.set(&[3, 2], 0.5);
        let back = b.project(&b.eval(&c, Derivative::Value));
        assert!((back.get(&[1, 1]) - 1.0).abs() < 1e-10);
        assert!((back.get(&[3, 2]) - 0.5).abs() < 1e-10);
        for o in 0..back.len() {
            let k = back.index_of(o);
            if k != [1, 1] && k != [3, 2] {
                assert!(back.data()[o].abs() < 1e-10);
            }
        }
        assert!(b.project(&vec![0.0; b.grid().len()]).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parseval_examples() {
        let dom = RectDomain::unit(2);
        let c = SpectralCoeffs::from_vec(&[2, 2], vec![3.0, 0.0, 4.0, 0.0]).unwrap();
        assert_relative_eq!(parseval_norm(&c, &dom, 0.0), 5.0);
        let single = SpectralCoeffs::unit(&[2, 2], &[2, 1]);
        let lam = eigenvalue(&EigenIndex(vec![2, 1]), &dom);
        assert_relative_eq!(parseval_norm(&single, &dom, 1.0), lam, max_relative = 1e-14);
        // s = 1/2 against quadrature of |grad psi|^2
        let b = unit_square(2);
        let c = SpectralCoeffs::unit(&[2, 2], &[1, 1]);
        let grad2: f64 = (0..2)
            .map(|j| b.grid().integrate_map(&b.eval(&c, Derivative::First(j)), |v| v * v))
            .sum();
        assert_relative_eq!(parseval_norm(&c, &dom, 0.5), grad2.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(
            parseval_norm(&c, &dom, 0.5),
            (2.0 * PI * PI).sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn laplacian_identity_examples() {
        let b = unit_square(3);
        let c = SpectralCoeffs::unit(&[3, 3], &[2, 3]);
        let chk = laplacian_identity_check(&b, &c);
        let lam = eigenvalue(&EigenIndex(vec![2, 3]), b.domain());
        assert!(chk.pass);
        assert_relative_eq!(chk.lhs, lam * lam, max_relative = 1e-10);
        assert_relative_eq!(chk.rhs, lam * lam, max_relative = 1e-10);
        let zero = laplacian_identity_check(&b, &b.zeros());
        assert_eq!((zero.lhs, zero.rhs, zero.pass), (0.0, 0.0, true));
    }

    #[test]
    fn under_resolved_grid_is_flagged() {
        let dom = RectDomain::unit(1);
        let b = SineBasis::new(&[8], Arc::new(TensorGrid::uniform(&dom, 10))).unwrap();
        assert!(!b.resolves());
        assert!(SineBasis::new(&[8, 8], Arc::new(TensorGrid::uniform(&dom, 30))).is_err());
    }
}
