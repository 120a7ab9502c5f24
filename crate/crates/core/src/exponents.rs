//! Exponent-derived quantities and admissibility verdicts.
//!
//! Suprema and infima over the closed cylinder are taken on a uniform
//! [`SampleGrid`], so every reported `mu`, bound and verdict is a statement
//! about the samples (a lower bound for the true supremum).

use crate::domain::{RectDomain, SampleGrid};
use crate::field_dsl::{lipschitz_estimate, EvalError, FieldExpr, Var};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExponentError {
    #[error("expected {expected} exponent components, got {found}")]
    Components { expected: usize, found: usize },
    #[error("exponent p_{component} takes the value {value} <= 1")]
    NotAboveOne { component: usize, value: f64 },
    #[error("mu = {mu} is not below the target gap {gap}")]
    GapViolated { mu: f64, gap: f64 },
    #[error("horizon must be positive, got {0}")]
    Horizon(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A real number or `+inf`, used for critical exponents that may be unbounded.
/// Serializes as a JSON number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(ExtReal::Finite(v)),
            Repr::Text(s) if s == "inf" => Ok(ExtReal::Infinite),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// `(max p_i, min p_i)`.
pub fn pvee_pwedge(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "need at least one exponent");
    values.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| {
        (hi.max(v), lo.min(v))
    })
}

/// `N / sum(1/p_i)`.
pub fn harmonic_mean(values: &[f64]) -> f64 {
    values.len() as f64 / values.iter().map(|p| 1.0 / p).sum::<f64>()
}

/// `N p_h / (N - p_h)` when `N > p_h`, unbounded otherwise.
pub fn sobolev_conjugate(p_h: f64, n: usize) -> ExtReal {
    let nf = n as f64;
    if nf > p_h {
        ExtReal::Finite(nf * p_h / (nf - p_h))
    } else {
        ExtReal::Infinite
    }
}

/// Higher-integrability threshold `(4 - 2N(mu - 1)) / (N + 2)`; may be `<= 0`.
pub fn r_star(mu: f64, n: usize) -> f64 {
    let nf = n as f64;
    (4.0 - 2.0 * nf * (mu - 1.0)) / (nf + 2.0)
}

fn gamma_per_beta(l: f64, n: usize, pmax: f64, pmin: f64) -> f64 {
    let nf = n as f64;
    2.0 * l * nf.sqrt() * (nf + 2.0).powi(2) / (4.0 * nf * nf) * (pmax + pmin + 2.0)
}

/// `2 beta L sqrt(N) (N+2)^2 / (4 N^2) (pmax + pmin + 2)`.
pub fn gamma(beta: f64, l: f64, n: usize, pmax: f64, pmin: f64) -> f64 {
    beta * gamma_per_beta(l, n, pmax, pmin)
}

/// Supremum of the `beta` with `mu + gamma(beta) < target_gap`.
pub fn beta_max(mu: f64, l: f64, n: usize, pmax: f64, pmin: f64, target_gap: f64) -> Result<ExtReal, ExponentError> {
    if !(mu < target_gap) {
        return Err(ExponentError::GapViolated { mu, gap: target_gap });
    }
    let slope = gamma_per_beta(l, n, pmax, pmin);
    if slope == 0.0 {
        return Ok(ExtReal::Infinite);
    }
    Ok(ExtReal::Finite((target_gap - mu) / slope))
}

/// `1 - (mu + gamma) N / (N + 2)`.
pub fn nu(mu: f64, gamma: f64, n: usize) -> f64 {
    let nf = n as f64;
    1.0 - (mu + gamma) * nf / (nf + 2.0)
}

/// Gap bound on `mu`: `1 + 1/N`, or `1 + 2/N` in the slow regime.
pub fn target_gap(n: usize, slow: bool) -> f64 {
    let nf = n as f64;
    if slow {
        1.0 + 2.0 / nf
    } else {
        1.0 + 1.0 / nf
    }
}

/// Margin below 2 for a direction to count as fast diffusion.
pub const FAST_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

/// Pointwise statistics gathered over the sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    /// max over samples of `p_vee / p_wedge`.
    pub ratio_max: f64,
    /// min over samples of the harmonic mean.
    pub p_h_min: f64,
    pub samples: usize,
}

/// Exponent components `p_1..p_N` with their sampled bounds and Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    components: Vec<FieldExpr>,
    lipschitz: f64,
    bounds: Vec<Bounds>,
    stats: SampleStats,
    grid: SampleGrid,
}

impl ExponentField {
    /// Sample every component over `domain x [0, horizon]`.
    ///
    /// Values `<= 1` are accepted here and surface through [`ExponentField::mu`]
    /// (as an error) or [`validate`] (as a failed verdict).
    pub fn sample(
        components: Vec<FieldExpr>,
        domain: &RectDomain,
        horizon: f64,
        grid: SampleGrid,
    ) -> Result<Self, ExponentError> {
        let n = domain.dim();
        if components.len() != n {
            return Err(ExponentError::Components {
                expected: n,
                found: components.len(),
            });
        }
        if !(horizon > 0.0) {
            return Err(ExponentError::Horizon(horizon));
        }
        let cols = grid.space_columns(domain);
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let npts = cols[0].len();
        let times = if components.iter().any(|c| c.depends_on(Var::T)) {
            grid.times(horizon)
        } else {
            vec![0.0]
        };

        let mut bounds = vec![
            Bounds {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY
            };
            n
        ];
        let mut ratio_max = f64::NEG_INFINITY;
        let mut p_h_min = f64::INFINITY;
        let mut vals = vec![vec![0.0; npts]; n];
        for &t in &times {
            for (c, v) in components.iter().zip(vals.iter_mut()) {
                c.eval_batch(&refs, t, v)?;
            }
            for (b, v) in bounds.iter_mut().zip(&vals) {
                for &x in v {
                    b.min = b.min.min(x);
                    b.max = b.max.max(x);
                }
            }
            let mut point = vec![0.0; n];
            for g in 0..npts {
                for (p, v) in point.iter_mut().zip(&vals) {
                    *p = v[g];
                }
                let (hi, lo) = pvee_pwedge(&point);
                ratio_max = ratio_max.max(hi / lo);
                p_h_min = p_h_min.min(harmonic_mean(&point));
            }
        }

        let mut lipschitz: f64 = 0.0;
        for c in &components {
            if c.as_constant().is_none() {
                lipschitz = lipschitz.max(lipschitz_estimate(c, domain, horizon, grid)?.value);
            }
        }
        Ok(ExponentField {
            components,
            lipschitz,
            bounds,
            stats: SampleStats {
                ratio_max,
                p_h_min,
                samples: npts * times.len(),
            },
            grid,
        })
    }

    /// Constant exponents; sampling is exact so a minimal grid is used.
    pub fn constants(values: &[f64], domain: &RectDomain, horizon: f64) -> Result<Self, ExponentError> {
        let comps = values.iter().map(|&v| FieldExpr::constant(v)).collect();
        Self::sample(comps, domain, horizon, SampleGrid::new(2, 1))
    }

    pub fn components(&self) -> &[FieldExpr] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    pub fn stats(&self) -> SampleStats {
        self.stats
    }

    pub fn sample_grid(&self) -> SampleGrid {
        self.grid
    }

    /// `max_i p_i^+` and `min_i p_i^-`.
    pub fn extremes(&self) -> (f64, f64) {
        let pmax = self.bounds.iter().map(|b| b.max).fold(f64::NEG_INFINITY, f64::max);
        let pmin = self.bounds.iter().map(|b| b.min).fold(f64::INFINITY, f64::min);
        (pmax, pmin)
    }

    pub fn is_constant(&self) -> bool {
        self.components.iter().all(|c| c.as_constant().is_some())
    }

    fn check_above_one(&self) -> Result<(), ExponentError> {
        for (i, b) in self.bounds.iter().enumerate() {
            if !(b.min > 1.0) {
                return Err(ExponentError::NotAboveOne {
                    component: i + 1,
                    value: b.min,
                });
            }
        }
        Ok(())
    }

    /// Sampled `sup p_vee / p_wedge`.
    pub fn mu(&self) -> Result<f64, ExponentError> {
        self.check_above_one()?;
        Ok(self.stats.ratio_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub mu: f64,
    pub p_h_min: f64,
    pub p_h_star_min: ExtReal,
    pub r_star: f64,
    pub slow_everywhere: bool,
    /// Zero-based component indices with `max p_i <= 2 - FAST_MARGIN`.
    pub fast_directions: Vec<usize>,
    /// `gamma` at half of `beta_max`; absent when `beta_max` does not exist.
    pub gamma_at_beta: Option<f64>,
    pub beta_max: Option<ExtReal>,
    pub nu: Option<f64>,
    pub lipschitz: f64,
    pub target_gap: f64,
    pub samples: usize,
    pub verdicts: Vec<Verdict>,
}

impl ExponentReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.pass)
    }
}

/// Run every admissibility check on the sampled field. Failures are verdicts.
pub fn validate(field: &ExponentField, slow_mode: bool) -> ExponentReport {
    let n = field.dim();
    let nf = n as f64;
    let (pmax, pmin) = field.extremes();
    let mu = field.stats.ratio_max;
    let p_h_min = field.stats.p_h_min;
    let p_h_star_min = sobolev_conjugate(p_h_min, n);
    let slow_everywhere = pmin >= 2.0;
    let gap = target_gap(n, slow_mode && slow_everywhere);
    let rs = r_star(mu, n);
    let fast_directions = field
        .bounds
        .iter()
        .enumerate()
        .filter(|(_, b)| b.max <= 2.0 - FAST_MARGIN)
        .map(|(i, _)| i)
        .collect();

    let (beta, gamma_at_beta, nu_val) = match beta_max(mu, field.lipschitz, n, pmax, pmin, gap) {
        Ok(ExtReal::Infinite) => (Some(ExtReal::Infinite), Some(0.0), Some(nu(mu, 0.0, n))),
        Ok(ExtReal::Finite(b)) => {
            let g = gamma(0.5 * b, field.lipschitz, n, pmax, pmin);
            (Some(ExtReal::Finite(b)), Some(g), Some(nu(mu, g, n)))
        }
        Err(_) => (None, None, None),
    };

    let lower = 2.0 * nf / (nf + 2.0);
    let verdicts = vec![
        Verdict {
            name: "p_i > 1".into(),
            pass: pmin > 1.0,
            detail: format!("min p_i = {pmin}"),
        },
        Verdict {
            name: "p_i > 2N/(N+2)".into(),
            pass: pmin > lower,
            detail: format!("min p_i = {pmin}, 2N/(N+2) = {lower}"),
        },
        Verdict {
            name: "p_i < p_h*".into(),
            pass: ExtReal::Finite(pmax) < p_h_star_min,
            detail: format!("max p_i = {pmax}, p_h* at min p_h = {p_h_star_min}"),
        },
        Verdict {
            name: "mu < gap".into(),
            pass: mu < gap,
            detail: format!("mu = {mu}, gap = {gap}"),
        },
        Verdict {
            name: "r_star > 0".into(),
            pass: rs > 0.0,
            detail: format!("r_star = {rs}"),
        },
    ];

    ExponentReport {
        mu,
        p_h_min,
        p_h_star_min,
        r_star: rs,
        slow_everywhere,
        fast_directions,
        gamma_at_beta,
        beta_max: beta,
        nu: nu_val,
        lipschitz: field.lipschitz,
        target_gap: gap,
        samples: field.stats.samples,
        verdicts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn square() -> RectDomain {
        RectDomain::unit(2)
    }

    #[test]
    fn vee_wedge_and_harmonic() {
        assert_eq!(pvee_pwedge(&[2.2, 1.9]), (2.2, 1.9));
        assert_eq!(pvee_pwedge(&[2.0, 2.0, 2.0]), (2.0, 2.0));
        assert_eq!(pvee_pwedge(&[3.0, 2.0, 4.0]), (4.0, 2.0));
        assert_eq!(harmonic_mean(&[2.0, 2.0]), 2.0);
        assert_relative_eq!(harmonic_mean(&[2.0, 4.0]), 8.0 / 3.0, max_relative = 1e-15);
        assert_eq!(harmonic_mean(&[2.0, 2.0, 2.0]), 2.0);
    }

    #[test]
    fn conjugate_branches() {
        assert_eq!(sobolev_conjugate(2.0, 3), ExtReal::Finite(6.0));
        assert_eq!(sobolev_conjugate(8.0 / 3.0, 2), ExtReal::Infinite);
        assert_eq!(sobolev_conjugate(2.0, 2), ExtReal::Infinite);
        assert!(ExtReal::Finite(1e300) < ExtReal::Infinite);
    }

    #[test]
    fn r_star_values() {
        assert_eq!(r_star(1.0, 2), 1.0);
        assert_eq!(r_star(1.2, 2), 0.8);
        assert_eq!(r_star(1.0, 3), 0.8);
    }

    #[test]
    fn gamma_and_beta() {
        assert_eq!(gamma(0.0, 1.0, 2, 2.2, 1.9), 0.0);
        assert_relative_eq!(
            gamma(0.1, 1.0, 2, 2.2, 1.9),
            0.2 * 2f64.sqrt() * 6.1,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            gamma(0.2, 1.0, 2, 2.2, 1.9),
            2.0 * gamma(0.1, 1.0, 2, 2.2, 1.9),
            max_relative = 1e-15
        );
        assert_eq!(beta_max(1.1, 0.0, 2, 2.2, 1.9, 1.5), Ok(ExtReal::Infinite));
        let b = beta_max(1.15789, 1.0, 2, 2.2, 1.9, 1.5).unwrap().to_f64();
        assert_relative_eq!(b, (1.5 - 1.15789) / (2.0 * 2f64.sqrt() * 6.1), max_relative = 1e-14);
        assert_relative_eq!(b, 0.01983, max_relative = 1e-3);
        assert!(matches!(
            beta_max(1.5, 1.0, 2, 2.2, 1.9, 1.5),
            Err(ExponentError::GapViolated { .. })
        ));
    }

    #[test]
    fn mu_of_constant_fields() {
        let f = ExponentField::constants(&[2.2, 1.9], &square(), 1.0).unwrap();
        assert_relative_eq!(f.mu().unwrap(), 2.2 / 1.9, max_relative = 1e-15);
        let f = ExponentField::constants(&[2.0, 2.0], &square(), 1.0).unwrap();
        assert_eq!(f.mu().unwrap(), 1.0);
        let f = ExponentField::constants(&[1.0, 2.0], &square(), 1.0).unwrap();
        assert!(matches!(f.mu(), Err(ExponentError::NotAboveOne { component: 1, .. })));
    }

    #[test]
    fn mu_of_oscillating_field() {
        let dom = RectDomain::new(vec![PI, PI]).unwrap();
        let comps = vec![FieldExpr::parse("2 + 0.2*sin(3*x1)").unwrap(), FieldExpr::constant(2.0)];
        let f = ExponentField::sample(comps, &dom, 1.0, SampleGrid::new(601, 1)).unwrap();
        // pointwise sup is max(2.2/2, 2/1.8) = 10/9
        assert_relative_eq!(f.mu().unwrap(), 10.0 / 9.0, max_relative = 1e-5);
        assert!(f.mu().unwrap() <= 10.0 / 9.0 + 1e-15);
        assert_relative_eq!(f.lipschitz(), 0.6 * LIPSCHITZ, max_relative = 1e-3);
    }
    const LIPSCHITZ: f64 = crate::field_dsl::LIPSCHITZ_SAFETY;

    #[test]
    fn validate_admissible_constants() {
        let f = ExponentField::constants(&[2.2, 1.9], &square(), 1.0).unwrap();
        let r = validate(&f, false);
        assert!(r.all_pass(), "{:?}", r.verdicts);
        assert_relative_eq!(r.mu, 2.2 / 1.9, max_relative = 1e-15);
        assert_relative_eq!(r.r_star, r_star(2.2 / 1.9, 2), max_relative = 1e-15);
        assert_eq!(r.fast_directions, vec![1]);
        assert_eq!(r.beta_max, Some(ExtReal::Infinite));
        assert_eq!(r.gamma_at_beta, Some(0.0));
    }

    #[test]
    fn validate_boundary_exponent() {
        let f = ExponentField::constants(&[1.0, 1.0], &square(), 1.0).unwrap();
        let r = validate(&f, false);
        let failed: Vec<&str> = r.failed().map(|v| v.name.as_str()).collect();
        assert!(failed.contains(&"p_i > 2N/(N+2)"));
    }

    #[test]
    fn validate_slow_mode() {
        let f = ExponentField::constants(&[3.2, 2.0], &square(), 1.0).unwrap();
        let r = validate(&f, false);
        assert_relative_eq!(r.mu, 1.6, max_relative = 1e-15);
        assert!(!r.all_pass());
        assert!(r.failed().any(|v| v.name == "mu < gap"));
        let r = validate(&f, true);
        assert!(r.slow_everywhere);
        assert_eq!(r.target_gap, 2.0);
        assert!(r.failed().all(|v| v.name != "mu < gap"));
    }

    #[test]
    fn ext_real_json() {
        let v = serde_json::to_string(&[ExtReal::Finite(1.5), ExtReal::Infinite]).unwrap();
        assert_eq!(v, "[1.5,\"inf\"]");
        let back: Vec<ExtReal> = serde_json::from_str(&v).unwrap();
        assert_eq!(back, vec![ExtReal::Finite(1.5), ExtReal::Infinite]);
    }
}
