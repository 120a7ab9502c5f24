//! Time steppers for the Galerkin system.
//!
//! `ImexExponential` is the second-order exponential Runge–Kutta scheme
//! (ETD2RK) applied to `c' = -K c + [K c + R(c, t)]` with the diagonal shift
//! `K = kappa * lambda_k`; the shifted linear part is integrated exactly.
//! `ExplicitRk` is Dormand–Prince 5(4). Both expose a dense output on the
//! accepted step, used for energy-rate quadrature.

use super::system::{GalerkinSystem, RhsEval};
use super::{Integrator, SolverError};
use crate::basis::SpectralCoeffs;

/// `(e^z - 1) / z`.
pub fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `(e^z - 1 - z) / z^2`.
pub fn phi2(z: f64) -> f64 {
    if z.abs() < 0.2 {
        // sum_k z^k / (k + 2)!
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 1..20 {
            term *= z / (k as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Weighted RMS norm with `atol = rtol = tol`.
fn scaled_error(err: &[f64], c0: &[f64], c1: &[f64], tol: f64) -> f64 {
    let s: f64 = err
        .iter()
        .zip(c0.iter().zip(c1))
        .map(|(e, (a, b))| {
            let sc = tol * (1.0 + a.abs().max(b.abs()));
            (e / sc).powi(2)
        })
        .sum();
    (s / err.len().max(1) as f64).sqrt()
}

/// Continuous extension of an accepted step on `[0, h]`.
pub(crate) enum Dense {
    Etd {
        c0: Vec<f64>,
        n0: Vec<f64>,
        dn: Vec<f64>,
        h: f64,
    },
    Hermite {
        c0: Vec<f64>,
        f0: Vec<f64>,
        c1: Vec<f64>,
        f1: Vec<f64>,
        h: f64,
    },
}

pub(crate) struct Attempt {
    pub c1: Vec<f64>,
    /// Scaled error; accept when `<= 1`.
    pub err: f64,
    /// Right-hand side at `(c1, t + h)` when the scheme already computed it.
    pub end_rhs: Option<RhsEval>,
    pub dense: Dense,
}

pub(crate) struct Stepper<'a> {
    sys: &'a GalerkinSystem,
    kind: Integrator,
    tol: f64,
    /// `kappa * lambda_k`.
    shift: Vec<f64>,
}

const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a GalerkinSystem, kind: Integrator, tol: f64, kappa: f64) -> Self {
        let shift = sys.basis().eigenvalues().iter().map(|l| kappa * l).collect();
        Stepper { sys, kind, tol, shift }
    }

    /// Exponent of the step-size controller: `1 / (q + 1)` for an error
    /// estimate of local order `q + 1`.
    pub fn controller_exponent(&self) -> f64 {
        match self.kind {
            Integrator::ImexExponential => 0.5,
            Integrator::ExplicitRk => 0.2,
        }
    }

    fn coeffs(&self, data: Vec<f64>) -> SpectralCoeffs {
        SpectralCoeffs::from_vec(self.sys.basis().modes(), data).expect("system-shaped coefficients")
    }

    pub fn attempt(&self, c: &[f64], t: f64, r0: &RhsEval, h: f64) -> Result<Attempt, SolverError> {
        match self.kind {
            Integrator::ImexExponential => self.etd2rk(c, t, r0, h),
            Integrator::ExplicitRk => self.dopri5(c, t, r0, h),
        }
    }

    fn etd2rk(&self, c: &[f64], t: f64, r0: &RhsEval, h: f64) -> Result<Attempt, SolverError> {
        let n0: Vec<f64> = r0
            .dcdt
            .iter()
            .zip(&self.shift)
            .zip(c)
            .map(|((r, k), x)| r + k * x)
            .collect();
        let a: Vec<f64> = (0..c.len())
            .map(|i| {
                let z = -h * self.shift[i];
                z.exp() * c[i] + h * phi1(z) * n0[i]
            })
            .collect();
        let ra = self.sys.rhs(&self.coeffs(a.clone()), t + h)?;
        let dn: Vec<f64> = (0..c.len())
            .map(|i| ra.dcdt[i] + self.shift[i] * a[i] - n0[i])
            .collect();
        let corr: Vec<f64> = (0..c.len()).map(|i| h * phi2(-h * self.shift[i]) * dn[i]).collect();
        let c1: Vec<f64> = a.iter().zip(&corr).map(|(x, y)| x + y).collect();
        let err = scaled_error(&corr, c, &c1, self.tol);
        Ok(Attempt {
            c1,
            err,
            end_rhs: None,
            dense: Dense::Etd {
                c0: c.to_vec(),
                n0,
                dn,
                h,
            },
        })
    }

    fn dopri5(&self, c: &[f64], t: f64, r0: &RhsEval, h: f64) -> Result<Attempt, SolverError> {
        let n = c.len();
        let mut k: Vec<Vec<f64>> = vec![r0.dcdt.clone()];
        let mut last = None;
        for (stage, row) in DP_A.iter().enumerate() {
            let y: Vec<f64> = (0..n)
                .map(|i| c[i] + h * row.iter().zip(&k).map(|(a, ks)| a * ks[i]).sum::<f64>())
                .collect();
            let r = self.sys.rhs(&self.coeffs(y.clone()), t + DP_C[stage] * h)?;
            k.push(r.dcdt.clone());
            if stage == DP_A.len() - 1 {
                last = Some((y, r));
            }
        }
        let (c1, r1) = last.expect("seven stages");
        let e: Vec<f64> = (0..n)
            .map(|i| h * DP_E.iter().zip(&k).map(|(w, ks)| w * ks[i]).sum::<f64>())
            .collect();
        let err = scaled_error(&e, c, &c1, self.tol);
        Ok(Attempt {
            dense: Dense::Hermite {
                c0: c.to_vec(),
                f0: r0.dcdt.clone(),
                c1: c1.clone(),
                f1: r1.dcdt.clone(),
                h,
            },
            c1,
            err,
            end_rhs: Some(r1),
        })
    }

    /// Dense output at `t0 + tau`, `0 <= tau <= h`.
    pub fn dense_at(&self, d: &Dense, tau: f64) -> Vec<f64> {
        match d {
            Dense::Etd { c0, n0, dn, h } => (0..c0.len())
                .map(|i| {
                    let z = -tau * self.shift[i];
                    z.exp() * c0[i] + tau * phi1(z) * n0[i] + tau * tau / h * phi2(z) * dn[i]
                })
                .collect(),
            Dense::Hermite { c0, f0, c1, f1, h } => {
                let s = tau / h;
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                (0..c0.len())
                    .map(|i| h00 * c0[i] + h10 * h * f0[i] + h01 * c1[i] + h11 * h * f1[i])
                    .collect()
            }
        }
    }

    /// Integrals of the dissipation and forcing power over the step by
    /// three-point Gauss quadrature on the dense output.
    pub fn rate_integrals(&self, d: &Dense, t0: f64, h: f64) -> Result<(f64, f64), SolverError> {
        let r = (0.6f64).sqrt();
        let nodes = [0.5 * (1.0 - r), 0.5, 0.5 * (1.0 + r)];
        let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let (mut diss, mut work) = (0.0, 0.0);
        for (s, w) in nodes.iter().zip(weights) {
            let tau = s * h;
            let ev = self.sys.rhs(&self.coeffs(self.dense_at(d, tau)), t0 + tau)?;
            diss += w * h * ev.dissipation;
            work += w * h * ev.forcing_power;
        }
        Ok((diss, work))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi_functions_are_smooth_across_the_switch() {
        for z in [-0.19999f64, -0.2, -0.20001, -1e-8, 0.0, -5.0, -700.0] {
            let direct1 = if z == 0.0 { 1.0 } else { z.exp_m1() / z };
            assert_relative_eq!(phi1(z), direct1, max_relative = 1e-14);
            if z.abs() > 0.05 {
                let direct2 = (z.exp_m1() - z) / (z * z);
                assert_relative_eq!(phi2(z), direct2, max_relative = 1e-12);
            }
        }
        assert_eq!(phi2(0.0), 0.5);
        assert_relative_eq!(phi2(-1e-6), 0.5 - 1e-6 / 6.0 + 1e-12 / 24.0, max_relative = 1e-15);
    }
}
