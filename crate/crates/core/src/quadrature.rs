//! Tensor-product Gauss–Legendre quadrature on a box.

use crate::domain::{tensor_columns, RectDomain};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
///
/// Roots are found by Newton iteration on the three-term recurrence, which
/// gives weights accurate to a few ulps for the sizes used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (pn, pn1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * pn - pn1) / (x * x - 1.0);
    (pn, d)
}

/// Default Gauss nodes per axis for `modes` sine modes: resolves all
/// sine/cosine products of the basis to ~1e-14.
pub fn default_nodes(modes: usize) -> usize {
    2 * modes + 14
}

/// Tensor Gauss grid over a [`RectDomain`]; points are stored row-major with
/// the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    domain: RectDomain,
    axis_nodes: Vec<Vec<f64>>,
    axis_weights: Vec<Vec<f64>>,
    weights: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl TensorGrid {
    pub fn gauss(domain: &RectDomain, nodes_per_axis: &[usize]) -> TensorGrid {
        assert_eq!(nodes_per_axis.len(), domain.dim(), "one node count per axis");
        let mut axis_nodes = Vec::with_capacity(domain.dim());
        let mut axis_weights = Vec::with_capacity(domain.dim());
        for (&len, &n) in domain.lengths().iter().zip(nodes_per_axis) {
            let (x, w) = gauss_legendre(n.max(1));
            axis_nodes.push(x.iter().map(|s| 0.5 * len * (s + 1.0)).collect::<Vec<_>>());
            axis_weights.push(w.iter().map(|w| 0.5 * len * w).collect::<Vec<_>>());
        }
        let columns = tensor_columns(&axis_nodes);
        let weight_cols = tensor_columns(&axis_weights);
        let total = columns[0].len();
        let weights = (0..total).map(|i| weight_cols.iter().map(|c| c[i]).product()).collect();
        TensorGrid {
            domain: domain.clone(),
            axis_nodes,
            axis_weights,
            weights,
            columns,
        }
    }

    /// Same node count on every axis.
    pub fn uniform(domain: &RectDomain, nodes: usize) -> TensorGrid {
        Self::gauss(domain, &vec![nodes; domain.dim()])
    }

    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axis_nodes.iter().map(Vec::len).collect()
    }

    pub fn axis_nodes(&self, axis: usize) -> &[f64] {
        &self.axis_nodes[axis]
    }

    pub fn axis_weights(&self, axis: usize) -> &[f64] {
        &self.axis_weights[axis]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinate columns, one per axis, aligned with [`TensorGrid::weights`].
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column_refs(&self) -> Vec<&[f64]> {
        self.columns.iter().map(Vec::as_slice).collect()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `sum_g w_g f(v_g)`.
    pub fn integrate_map(&self, values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        self.weights.iter().zip(values).map(|(w, &v)| w * f(v)).sum()
    }
}
