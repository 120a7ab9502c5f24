//! Box geometry and uniform sampling grids over the closed space-time cylinder.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("domain needs at least one axis")]
    Empty,
    #[error("edge length {index} must be finite and positive, got {value}")]
    BadLength { index: usize, value: f64 },
}

/// The box `(0, l_1) x ... x (0, l_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectDomain {
    lengths: Vec<f64>,
}

impl RectDomain {
    pub fn new(lengths: Vec<f64>) -> Result<Self, DomainError> {
        if lengths.is_empty() {
            return Err(DomainError::Empty);
        }
        if let Some((index, &value)) = lengths.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l > 0.0)) {
            return Err(DomainError::BadLength { index, value });
        }
        Ok(RectDomain { lengths })
    }

    /// Unit box `(0,1)^n`.
    pub fn unit(n: usize) -> Self {
        RectDomain {
            lengths: vec![1.0; n.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// Uniform closed sampling grid: `space` points per axis (endpoints included)
/// and `time` points on `[0, T]`. Used for sup-type checks, which are
/// therefore lower bounds of the true suprema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub space: usize,
    pub time: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid { space: 64, time: 64 }
    }
}

impl SampleGrid {
    pub fn new(space: usize, time: usize) -> Self {
        SampleGrid {
            space: space.max(2),
            time: time.max(1),
        }
    }

    pub fn times(&self, horizon: f64) -> Vec<f64> {
        linspace(0.0, horizon, self.time)
    }

    /// Coordinate columns of all spatial sample points (row-major, axis 0 slowest).
    pub fn space_columns(&self, domain: &RectDomain) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = domain.lengths().iter().map(|&l| linspace(0.0, l, self.space)).collect();
        tensor_columns(&axes)
    }
}

/// `n` equispaced points on `[a, b]`, endpoints included (`n == 1` gives `[a]`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Expand per-axis node lists into one coordinate column per axis over the
/// full tensor grid (row-major, last axis fastest).
pub fn tensor_columns(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(Vec::len).product();
    let mut cols = vec![Vec::with_capacity(total); axes.len()];
    let mut inner = total;
    for (a, nodes) in axes.iter().enumerate() {
        inner /= nodes.len().max(1);
        let outer_block = nodes.len() * inner;
        for flat in 0..total {
            let idx = (flat % outer_block) / inner;
            cols[a].push(nodes[idx]);
        }
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths() {
        assert!(RectDomain::new(vec![]).is_err());
        assert!(RectDomain::new(vec![1.0, 0.0]).is_err());
        assert!(RectDomain::new(vec![f64::NAN]).is_err());
        assert_eq!(RectDomain::new(vec![2.0, 3.0]).unwrap().volume(), 6.0);
    }

    #[test]
    fn tensor_layout_is_row_major() {
        let cols = tensor_columns(&[vec![0.0, 1.0], vec![10.0, 20.0, 30.0]]);
        assert_eq!(cols[0], vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(cols[1], vec![10.0, 20.0, 30.0, 10.0, 20.0, 30.0]);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let v = linspace(0.0, std::f64::consts::PI, 7);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[6], std::f64::consts::PI);
    }
}
