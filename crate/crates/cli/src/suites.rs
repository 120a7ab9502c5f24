//! Seeded property suites over every module, run by `anipar verify`.
//!
//! Each property measures a defect (`worst`) and passes iff it stays at or
//! below the property's tolerance. Randomized properties draw from a ChaCha
//! stream seeded by the run seed and the property name, so results depend
//! only on the seed.

use crate::config::{MonitorBlock, ProblemBlock, RunConfig, SweepBlock, VerifyBlock};
use anipar_core::basis::{eigenvalue, laplacian_identity_check, parseval_norm};
use anipar_core::exponents::{beta_max, gamma, r_star, ExponentField};
use anipar_core::field_dsl::{BinOp, Func, Node, Var};
use anipar_core::funcspace::{
    anisotropic_embedding_ratio, holder_check, interpolation_check, lp_norm, luxemburg_norm, modular, LUXEMBURG_TOL,
};
use anipar_core::monitor::{contraction_check, instrument};
use anipar_core::solver::{flux, solve, Integrator, Problem, SolverConfig, SweepAxis};
use anipar_core::{
    Derivative, EigenIndex, FieldExpr, GridFunction, RectDomain, SampleGrid, SineBasis, SpectralCoeffs, TensorGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuiteError {
    #[error("`{0}` matches no property")]
    UnknownSelector(String),
    #[error("tolerance override for unknown property `{0}`")]
    UnknownTolerance(String),
}

/// Measured defect of one property.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub worst: f64,
    pub detail: String,
}

type Runner = fn(&mut ChaCha8Rng, usize) -> Measure;

pub struct Property {
    pub name: &'static str,
    pub tolerance: f64,
    pub cases: usize,
    run: Runner,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub tolerance: f64,
    pub cases: usize,
    pub worst: f64,
    pub pass: bool,
    pub detail: String,
}

pub fn registry() -> Vec<Property> {
    let p = |name, tolerance, cases, run: Runner| Property {
        name,
        tolerance,
        cases,
        run,
    };
    vec![
        p("dsl.derivative_fd", 1e-6, 100, dsl_derivative_fd),
        p("dsl.round_trip", 1e-12, 100, dsl_round_trip),
        p("exponents.r_star_values", 0.0, 3, exponents_r_star_values),
        p("exponents.r_star_monotone", 0.0, 100, exponents_r_star_monotone),
        p("exponents.gamma_linear", 1e-12, 100, exponents_gamma_linear),
        p("exponents.beta_max_inverse", 1e-12, 100, exponents_beta_max_inverse),
        p("exponents.constant_mu", 0.0, 20, exponents_constant_mu),
        p("funcspace.luxemburg_fixed_point", 1e-8, 100, funcspace_fixed_point),
        p("funcspace.luxemburg_homogeneous", 1e-9, 100, funcspace_homogeneous),
        p("funcspace.constant_exponent", 1e-10, 100, funcspace_constant_exponent),
        p("funcspace.holder", 1e-10, 100, funcspace_holder),
        p("funcspace.interpolation", 1e-10, 100, funcspace_interpolation),
        p("funcspace.embedding_scale", 1e-8, 50, funcspace_embedding_scale),
        p("basis.orthonormality", 1e-12, 1, basis_orthonormality),
        p("basis.parseval", 1e-10, 20, basis_parseval),
        p("basis.derivative_norms", 1e-10, 1, basis_derivative_norms),
        p("basis.laplacian_identity", 1e-9, 20, basis_laplacian_identity),
        p("basis.projection", 1e-10, 20, basis_projection),
        p("solver.flux_monotone", 0.0, 10_000, solver_flux_monotone),
        p("solver.heat_exactness", 1e-12, 1, solver_heat_exactness),
        p("solver.energy_identity", 1.0, 1, solver_energy_identity),
        p("solver.contraction", 1e-8, 1, solver_contraction),
        p("monitor.parseval_p2", 1e-8, 1, monitor_parseval_p2),
        p("monitor.additivity", 1e-10, 1, monitor_additivity),
        p("cli.config_round_trip", 0.0, 20, cli_config_round_trip),
    ]
}

fn selected(name: &str, sel: &str) -> bool {
    name == sel || name.strip_prefix(sel).is_some_and(|rest| rest.starts_with('.'))
}

/// Properties chosen by `verify`, with tolerance and case overrides applied.
pub fn plan(verify: &VerifyBlock) -> Result<Vec<Property>, SuiteError> {
    let mut all = registry();
    for k in verify.tolerances.keys() {
        if !all.iter().any(|p| p.name == k) {
            return Err(SuiteError::UnknownTolerance(k.clone()));
        }
    }
    if let Some(sel) = &verify.suites {
        for s in sel {
            if !all.iter().any(|p| selected(p.name, s)) {
                return Err(SuiteError::UnknownSelector(s.clone()));
            }
        }
        all.retain(|p| sel.iter().any(|s| selected(p.name, s)));
    }
    for p in &mut all {
        if let Some(&t) = verify.tolerances.get(p.name) {
            p.tolerance = t;
        }
        if let Some(c) = verify.cases {
            p.cases = c.max(1);
        }
    }
    Ok(all)
}

fn stream_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a of the name, mixed into the run seed
    let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    });
    seed ^ h
}

pub fn run_property(p: &Property, seed: u64) -> PropertyOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, p.name));
    let m = (p.run)(&mut rng, p.cases);
    PropertyOutcome {
        name: p.name.to_string(),
        tolerance: p.tolerance,
        cases: p.cases,
        worst: m.worst,
        pass: m.worst <= p.tolerance,
        detail: m.detail,
    }
}

/// Run properties concurrently; outcomes keep the plan order.
pub fn run_all(props: &[Property], seed: u64) -> Vec<PropertyOutcome> {
    props.par_iter().map(|p| run_property(p, seed)).collect()
}

/// Run one named property with its default tolerance.
pub fn run_named(name: &str, seed: u64) -> Option<PropertyOutcome> {
    registry()
        .iter()
        .find(|p| p.name == name)
        .map(|p| run_property(p, seed))
}

fn measure(worst: f64, detail: impl Into<String>) -> Measure {
    Measure {
        worst,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

// ---- random data

fn random_node(rng: &mut ChaCha8Rng, depth: u32) -> Node {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..4) {
            0 => Node::Const((rng.gen_range(-3.0..3.0f64) * 100.0).round() / 100.0),
            1 => Node::Var(Var::X(0)),
            2 => Node::Var(Var::X(1)),
            _ => Node::Var(Var::T),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_node(rng, depth - 1));
    match rng.gen_range(0..7) {
        0 => Node::Binary(BinOp::Add, sub(rng), sub(rng)),
        1 => Node::Binary(BinOp::Sub, sub(rng), sub(rng)),
        2 => Node::Binary(BinOp::Mul, sub(rng), sub(rng)),
        3 => {
            let den = Node::Binary(
                BinOp::Add,
                Box::new(Node::Const(2.0)),
                Box::new(Node::Binary(BinOp::Pow, sub(rng), Box::new(Node::Const(2.0)))),
            );
            Node::Binary(BinOp::Div, sub(rng), Box::new(den))
        }
        4 => Node::Binary(BinOp::Pow, sub(rng), Box::new(Node::Const(rng.gen_range(2..4) as f64))),
        5 => Node::Neg(sub(rng)),
        _ => {
            let f = [Func::Sin, Func::Cos, Func::Tanh, Func::Exp][rng.gen_range(0..4)];
            // keep exp arguments tame
            let arg = if f == Func::Exp {
                Node::call1(Func::Sin, *sub(rng))
            } else {
                *sub(rng)
            };
            Node::Call(f, vec![arg])
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.gen_range(0.1..0.9),
        rng.gen_range(0.1..0.9),
        rng.gen_range(0.0..1.0),
    ]
}

fn square_grid() -> Arc<TensorGrid> {
    Arc::new(TensorGrid::gauss(&RectDomain::unit(2), &[24, 24]))
}

/// `offset + sum a cos(w . x + phi)` with 1 to 3 terms.
fn random_smooth(rng: &mut ChaCha8Rng, grid: &Arc<TensorGrid>, offset: f64) -> GridFunction {
    let terms: Vec<[f64; 4]> = (0..rng.gen_range(1..4))
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-6.0..6.0),
                rng.gen_range(-6.0..6.0),
                rng.gen_range(0.0..2.0 * PI),
            ]
        })
        .collect();
    GridFunction::from_fn(grid.clone(), |x| {
        offset
            + terms
                .iter()
                .map(|t| t[0] * (t[1] * x[0] + t[2] * x[1] + t[3]).cos())
                .sum::<f64>()
    })
}

/// `a + b sin(w x1 + v x2)`, values in `[lo, hi]`.
fn random_exponent(rng: &mut ChaCha8Rng, grid: &Arc<TensorGrid>, lo: f64, hi: f64) -> GridFunction {
    let b = rng.gen_range(0.0..0.3f64.min(0.5 * (hi - lo)));
    let a = rng.gen_range(lo + b..hi - b);
    let (w, v) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    GridFunction::from_fn(grid.clone(), |x| a + b * (w * x[0] + v * x[1]).sin())
}

fn random_coeffs(rng: &mut ChaCha8Rng, modes: &[usize]) -> SpectralCoeffs {
    let n = modes.iter().product();
    SpectralCoeffs::from_vec(modes, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape")
}

fn test_basis() -> SineBasis {
    let dom = RectDomain::new(vec![1.0, 1.7]).expect("lengths");
    SineBasis::new(&[5, 4], Arc::new(TensorGrid::gauss(&dom, &[26, 24]))).expect("resolving grid")
}

// ---- field_dsl

fn dsl_derivative_fd(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut worst_expr = String::new();
    while done < cases {
        let e = FieldExpr::from_node(random_node(rng, 4));
        let x = random_point(rng);
        let f = |p: [f64; 3]| e.eval(&p[..2], p[2]).unwrap_or(f64::NAN);
        let mut case_worst: f64 = 0.0;
        let mut usable = true;
        for (k, var) in [Var::X(0), Var::X(1), Var::T].into_iter().enumerate() {
            let (mut lo, mut hi) = (x, x);
            lo[k] -= h;
            hi[k] += h;
            let fd = (f(hi) - f(lo)) / (2.0 * h);
            let exact = e.differentiate(var).eval(&x[..2], x[2]).unwrap_or(f64::NAN);
            let scale = exact.abs().max(f(x).abs()).max(1.0);
            if !(fd.is_finite() && exact.is_finite() && scale < 1e4) {
                usable = false;
                break;
            }
            case_worst = case_worst.max((fd - exact).abs() / scale);
        }
        if usable {
            done += 1;
            if case_worst > worst {
                worst = case_worst;
                worst_expr = e.to_string();
            }
        }
    }
    measure(worst, format!("{cases} expressions; worst at `{worst_expr}`"))
}

fn dsl_round_trip(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let e = FieldExpr::from_node(random_node(rng, 4));
        let back = match FieldExpr::parse(&e.to_string()) {
            Ok(b) => b,
            Err(err) => return measure(f64::INFINITY, format!("`{e}` does not reparse: {err}")),
        };
        let x = random_point(rng);
        let (a, b) = (e.eval(&x[..2], x[2]), back.eval(&x[..2], x[2]));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(a), Ok(b)) => worst = worst.max(rel(a, b)),
            (Err(x), Err(y)) if x == y => {}
            _ => return measure(f64::INFINITY, format!("`{e}` evaluates differently after reparsing")),
        }
    }
    measure(worst, format!("{cases} print/parse round trips"))
}

// ---- exponents

fn exponents_r_star_values(_: &mut ChaCha8Rng, _: usize) -> Measure {
    let cases = [((1.0, 2), 1.0), ((1.2, 2), 0.8), ((1.0, 3), 0.8)];
    let worst = cases
        .iter()
        .map(|&((mu, n), want)| (r_star(mu, n) - want).abs())
        .fold(0.0, f64::max);
    measure(worst, "r_star(1, 2), r_star(1.2, 2), r_star(1, 3)")
}

fn exponents_r_star_monotone(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let mut violations = 0;
    for _ in 0..cases {
        let n = rng.gen_range(1..6);
        let mu = rng.gen_range(1.0..2.0);
        let d = rng.gen_range(1e-6..0.5);
        if !(r_star(mu + d, n) < r_star(mu, n)) || r_star(1.0, n) != 4.0 / (n as f64 + 2.0) {
            violations += 1;
        }
    }
    measure(violations as f64, format!("{violations} of {cases} pairs out of order"))
}

fn exponents_gamma_linear(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(1..5);
        let (beta, l, k) = (
            rng.gen_range(0.01..2.0),
            rng.gen_range(0.01..5.0),
            rng.gen_range(0.1..10.0),
        );
        let pmin = rng.gen_range(1.2..2.5);
        let pmax = pmin + rng.gen_range(0.0..0.3);
        let g = gamma(beta, l, n, pmax, pmin);
        worst = worst
            .max(rel(gamma(k * beta, l, n, pmax, pmin), k * g))
            .max(rel(gamma(beta, k * l, n, pmax, pmin), k * g));
    }
    measure(
        worst,
        "relative defect of gamma(k beta) = k gamma(beta) and gamma(k L) = k gamma(L)",
    )
}

fn exponents_beta_max_inverse(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < cases {
        let n = rng.gen_range(1..5);
        let slow = rng.gen_bool(0.5);
        let gap = anipar_core::exponents::target_gap(n, slow);
        let mu = rng.gen_range(1.0..gap);
        let pmin = rng.gen_range(1.2..2.5);
        let pmax = pmin * mu;
        let l = rng.gen_range(0.01..5.0);
        let Ok(b) = beta_max(mu, l, n, pmax, pmin, gap) else {
            continue;
        };
        let Some(b) = b.finite() else { continue };
        done += 1;
        worst = worst.max(rel(mu + gamma(b, l, n, pmax, pmin), gap));
    }
    measure(worst, "relative defect of mu + gamma(beta_max) = gap")
}

fn exponents_constant_mu(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(1..4);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(1.1..3.0)).collect();
        let exact = p.iter().copied().fold(f64::MIN, f64::max) / p.iter().copied().fold(f64::MAX, f64::min);
        let comps = p.iter().map(|&v| FieldExpr::constant(v)).collect::<Vec<_>>();
        let dom = RectDomain::unit(n);
        for s in [3, rng.gen_range(4..20)] {
            let mu = ExponentField::sample(comps.clone(), &dom, 1.0, SampleGrid::new(s, 3))
                .and_then(|f| f.mu())
                .unwrap_or(f64::NAN);
            worst = worst.max(if mu.is_nan() { f64::INFINITY } else { (mu - exact).abs() });
        }
    }
    measure(worst, "sampled mu of constant fields against the exact ratio")
}

// ---- funcspace

fn funcspace_fixed_point(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let g = square_grid();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let offset = rng.gen_range(-0.5..0.5);
        let u = random_smooth(rng, &g, offset);
        let p = random_exponent(rng, &g, 1.2, 3.0);
        let r = luxemburg_norm(&u, &p, LUXEMBURG_TOL)
            .and_then(|lam| modular(&u.scale(1.0 / lam), &p))
            .map_or(f64::INFINITY, |rho| (rho - 1.0).abs());
        worst = worst.max(r);
    }
    measure(worst, "|rho(u / ||u||) - 1|")
}

fn funcspace_homogeneous(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let g = square_grid();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let u = random_smooth(rng, &g, 0.3);
        let p = random_exponent(rng, &g, 1.2, 3.0);
        let c = rng.gen_range(0.05..20.0) * if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        let d = match (
            luxemburg_norm(&u, &p, LUXEMBURG_TOL),
            luxemburg_norm(&u.scale(c), &p, LUXEMBURG_TOL),
        ) {
            (Ok(a), Ok(b)) => rel(b, c.abs() * a),
            _ => f64::INFINITY,
        };
        worst = worst.max(d);
    }
    measure(worst, "relative defect of ||c u|| = |c| ||u||")
}

fn funcspace_constant_exponent(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let g = square_grid();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let u = random_smooth(rng, &g, 0.0);
        let q = rng.gen_range(1.05..5.0);
        let lux = luxemburg_norm(&u, &GridFunction::constant(g.clone(), q), LUXEMBURG_TOL);
        worst = worst.max(lux.map_or(f64::INFINITY, |l| rel(l, lp_norm(&u, q))));
    }
    measure(worst, "Luxemburg norm against the classical L^q norm")
}

fn funcspace_holder(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let g = square_grid();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cases {
        let f = random_smooth(rng, &g, 0.1);
        let h = random_smooth(rng, &g, -0.2);
        let p = random_exponent(rng, &g, 1.2, 3.5);
        let d = holder_check(&f, &h, &p).map_or(f64::INFINITY, |c| c.lhs / c.rhs - 1.0);
        worst = worst.max(d);
    }
    measure(worst, "max of int|fg| / (2 ||f||_p ||g||_p') - 1")
}

fn funcspace_interpolation(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let g = square_grid();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cases {
        let u = random_smooth(rng, &g, 0.2);
        let s = rng.gen_range(2.05..6.0);
        let q = s + rng.gen_range(0.0..4.0);
        let d = interpolation_check(&u, s, q).map_or(f64::INFINITY, |c| c.lhs / c.rhs - 1.0);
        worst = worst.max(d);
    }
    measure(worst, "max of ||u||_s / (||u||_q^theta ||u||_2^(1-theta)) - 1")
}

fn funcspace_embedding_scale(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let b = test_basis();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let c = random_coeffs(rng, b.modes());
        let k = rng.gen_range(0.01..100.0);
        let u = b.eval_expansion(&c, Derivative::Value);
        let grads: Vec<_> = (0..2).map(|i| b.eval_expansion(&c, Derivative::First(i))).collect();
        let scaled: Vec<_> = grads.iter().map(|g| g.scale(k)).collect();
        let p = [rng.gen_range(1.6..2.4), rng.gen_range(1.6..2.4)];
        let d = match (
            anisotropic_embedding_ratio(&u, &grads, &p),
            anisotropic_embedding_ratio(&u.scale(k), &scaled, &p),
        ) {
            (Ok(a), Ok(b)) => rel(a, b),
            _ => f64::INFINITY,
        };
        worst = worst.max(d);
    }
    measure(worst, "relative change of the embedding ratio under u -> k u")
}

// ---- basis

fn unit_values(b: &SineBasis, d: Derivative) -> Vec<Vec<f64>> {
    (0..b.len())
        .map(|o| {
            let mut c = b.zeros();
            c.data_mut()[o] = 1.0;
            b.eval(&c, d)
        })
        .collect()
}

fn basis_orthonormality(_: &mut ChaCha8Rng, _: usize) -> Measure {
    let b = test_basis();
    let vals = unit_values(&b, Derivative::Value);
    let mut worst: f64 = 0.0;
    for j in 0..vals.len() {
        for k in j..vals.len() {
            let prod: Vec<f64> = vals[j].iter().zip(&vals[k]).map(|(a, c)| a * c).collect();
            let want = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((b.grid().integrate(&prod) - want).abs());
        }
    }
    measure(worst, format!("{} basis functions on a 1 x 1.7 box", vals.len()))
}

fn basis_parseval(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let b = test_basis();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let c = random_coeffs(rng, b.modes());
        let l2 = b.grid().integrate_map(&b.eval(&c, Derivative::Value), |v| v * v);
        let grad: f64 = (0..2)
            .map(|i| b.grid().integrate_map(&b.eval(&c, Derivative::First(i)), |v| v * v))
            .sum();
        let lap = (0..2)
            .map(|i| b.eval(&c, Derivative::Second(i, i)))
            .reduce(|a, x| a.iter().zip(&x).map(|(p, q)| p + q).collect())
            .expect("two axes");
        let lap2 = b.grid().integrate_map(&lap, |v| v * v);
        worst = worst
            .max(rel(l2, c.norm().powi(2)))
            .max(rel(grad, parseval_norm(&c, b.domain(), 0.5).powi(2)))
            .max(rel(lap2, parseval_norm(&c, b.domain(), 1.0).powi(2)));
    }
    measure(worst, "L2, Dirichlet and Laplacian norms against coefficient sums")
}

fn basis_derivative_norms(_: &mut ChaCha8Rng, _: usize) -> Measure {
    let b = test_basis();
    let lengths = b.domain().lengths().to_vec();
    let mut worst: f64 = 0.0;
    let derivs = [
        Derivative::Value,
        Derivative::First(0),
        Derivative::First(1),
        Derivative::Second(0, 0),
        Derivative::Second(0, 1),
        Derivative::Second(1, 1),
    ];
    for d in derivs {
        let alpha = match d {
            Derivative::Value => [0, 0],
            Derivative::First(0) => [1, 0],
            Derivative::First(_) => [0, 1],
            Derivative::Second(i, j) => {
                let mut a = [0, 0];
                a[i] += 1;
                a[j] += 1;
                a
            }
        };
        for (o, v) in unit_values(&b, d).iter().enumerate() {
            let k = b.zeros().index_of(o);
            let want: f64 = (0..2)
                .map(|i| (PI * k[i] as f64 / lengths[i]).powi(2 * alpha[i]))
                .product();
            worst = worst.max(rel(b.grid().integrate_map(v, |x| x * x), want));
        }
    }
    let k = EigenIndex(vec![3, 2]);
    let lam = PI * PI * (9.0 / lengths[0].powi(2) + 4.0 / lengths[1].powi(2));
    worst = worst.max(rel(eigenvalue(&k, b.domain()), lam));
    measure(worst, "||D^a psi_k||^2 = pi^(2|a|) prod (k_i / l_i)^(2 a_i), |a| <= 2")
}

fn basis_laplacian_identity(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let b = test_basis();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let chk = laplacian_identity_check(&b, &random_coeffs(rng, b.modes()));
        worst = worst.max(rel(chk.lhs, chk.rhs));
    }
    measure(
        worst,
        format!("int |Lap v|^2 = sum int (D_ij v)^2 on {cases} random expansions"),
    )
}

fn basis_projection(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let b = test_basis();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let c = random_coeffs(rng, b.modes());
        let back = b.project(&b.eval(&c, Derivative::Value));
        for (x, y) in back.data().iter().zip(c.data()) {
            worst = worst.max((x - y).abs());
        }
    }
    measure(worst, "max |project(eval(c)) - c|")
}

// ---- solver

fn solver_flux_monotone(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let mut worst: f64 = 0.0;
    let mut flat = 0;
    for _ in 0..cases {
        let xi = rng.gen_range(-10.0..10.0);
        let eta = if rng.gen_bool(0.1) {
            xi + rng.gen_range(-1e-6..1e-6)
        } else {
            rng.gen_range(-10.0..10.0)
        };
        let p = rng.gen_range(1.2..3.0);
        let eps = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let d = (flux(xi, p, eps) - flux(eta, p, eps)) * (xi - eta);
        worst = worst.max(-d);
        if (xi - eta).abs() > 1e-12 && d <= 0.0 {
            flat += 1;
        }
    }
    let worst = if flat > 0 { f64::INFINITY } else { worst };
    measure(worst, format!("{cases} samples; {flat} non-strict pairs"))
}

fn heat_problem(initial: &str, horizon: f64) -> Problem {
    Problem::new(
        RectDomain::unit(2),
        vec![FieldExpr::constant(2.0), FieldExpr::constant(2.0)],
        FieldExpr::zero(),
        FieldExpr::parse(initial).expect("literal"),
        horizon,
        0.5,
    )
    .expect("valid")
}

fn solver_heat_exactness(_: &mut ChaCha8Rng, _: usize) -> Measure {
    let prob = heat_problem(
        "2*sin(pi*x1)*sin(pi*x2) + 0.6*sin(2*pi*x1)*sin(pi*x2) - 0.2*sin(pi*x1)*sin(3*pi*x2)",
        0.1,
    );
    let cfg = SolverConfig {
        kappa: Some(1.0),
        integrator: Integrator::ImexExponential,
        ..SolverConfig::new(vec![4, 4])
    };
    let traj = match solve(&prob, &cfg) {
        Ok(t) => t,
        Err(e) => return measure(f64::INFINITY, e.to_string()),
    };
    let c0 = &traj.snapshots[0].c;
    let last = traj.last();
    let mut worst: f64 = 0.0;
    for o in 0..c0.len() {
        let k = c0.index_of(o);
        let want = c0.data()[o] * (-eigenvalue(&EigenIndex(k), &prob.domain) * last.t).exp();
        if want.abs() > 1e-3 {
            worst = worst.max(rel(last.c.data()[o], want));
        }
    }
    measure(worst, "IMEX-exponential with unit shift against e^(-lambda_k T)")
}

fn anisotropic_problem(initial: &str) -> Problem {
    Problem::new(
        RectDomain::unit(2),
        vec![
            FieldExpr::parse("2.2 + 0.1*sin(3*x1)").expect("literal"),
            FieldExpr::constant(1.9),
        ],
        FieldExpr::parse("sin(pi*x1)*sin(pi*x2)*(1 + t)").expect("literal"),
        FieldExpr::parse(initial).expect("literal"),
        0.1,
        0.05,
    )
    .expect("valid")
}

fn solver_energy_identity(_: &mut ChaCha8Rng, _: usize) -> Measure {
    let prob = anisotropic_problem("8*x1*(1-x1)*x2*(1-x2)");
    let cfg = SolverConfig {
        snapshots: 10,
        ..SolverConfig::new(vec![6, 6])
    };
    let traj = match solve(&prob, &cfg) {
        Ok(t) => t,
        Err(e) => return measure(f64::INFINITY, e.to_string()),
    };
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    for (k, st) in traj.steps.iter().enumerate() {
        acc += st.defect();
        worst = worst.max(acc.abs() / (cfg.tol * (k + 1) as f64));
    }
    measure(
        worst,
        format!("cumulative defect / (tol x steps) over {} steps", traj.steps.len()),
    )
}

fn solver_contraction(rng: &mut ChaCha8Rng, _: usize) -> Measure {
    let mut random_initial = || {
        let (a, b, c) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        format!("{a}*sin(pi*x1)*sin(pi*x2) + {b}*sin(2*pi*x1)*sin(pi*x2) + {c}*x1*(1-x1)*sin(3*pi*x2)")
    };
    let (u1, u2) = (random_initial(), random_initial());
    let cfg = SolverConfig {
        snapshots: 25,
        ..SolverConfig::new(vec![5, 5])
    };
    let run = |u: &str| solve(&anisotropic_problem(u), &cfg);
    match (run(&u1), run(&u2)) {
        (Ok(a), Ok(b)) => match contraction_check(&a, &b) {
            Ok(r) => measure(
                r.max_increase.max(0.0),
                "largest growth of ||u1 - u2|| between snapshots",
            ),
            Err(e) => measure(f64::INFINITY, e.to_string()),
        },
        (Err(e), _) | (_, Err(e)) => measure(f64::INFINITY, e.to_string()),
    }
}

// ---- monitor

fn monitor_parseval_p2(_: &mut ChaCha8Rng, _: usize) -> Measure {
    let prob = heat_problem("x1*(1-x1)*sin(pi*x2)", 0.02);
    let cfg = SolverConfig {
        kappa: Some(1.0),
        snapshots: 50,
        ..SolverConfig::new(vec![5, 5])
    };
    let traj = match solve(&prob, &cfg) {
        Ok(t) => t,
        Err(e) => return measure(f64::INFINITY, e.to_string()),
    };
    let rep = match instrument(&traj, &prob, &[0.5], 1.0) {
        Ok(r) => r,
        Err(e) => return measure(f64::INFINITY, e.to_string()),
    };
    let t = traj.times();
    let trap = |v: &[f64]| -> f64 {
        t.windows(2)
            .zip(v.windows(2))
            .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
            .sum()
    };
    let dir: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|s| parseval_norm(&s.c, &prob.domain, 0.5).powi(2))
        .collect();
    let hes: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|s| parseval_norm(&s.c, &prob.domain, 1.0).powi(2))
        .collect();
    let worst = rel(rep.dissipation, trap(&dir)).max(rel(rep.hessian_weighted, trap(&hes)));
    measure(
        worst,
        "dissipation and hessian_weighted against coefficient formulas at p = 2",
    )
}

fn monitor_additivity(_: &mut ChaCha8Rng, _: usize) -> Measure {
    let prob = anisotropic_problem("8*x1*(1-x1)*x2*(1-x2)");
    let cfg = SolverConfig {
        snapshots: 20,
        ..SolverConfig::new(vec![4, 4])
    };
    let traj = match solve(&prob, &cfg) {
        Ok(t) => t,
        Err(e) => return measure(f64::INFINITY, e.to_string()),
    };
    let r = [0.3];
    let reps = [
        instrument(&traj, &prob, &r, 1.0),
        instrument(&traj.window(0, 7), &prob, &r, 1.0),
        instrument(&traj.window(7, 20), &prob, &r, 1.0),
    ];
    let [Ok(full), Ok(a), Ok(b)] = reps else {
        return measure(f64::INFINITY, "instrument failed");
    };
    let worst = ["dissipation", "ut_L2", "hessian_weighted", "higher_int"]
        .iter()
        .map(|f| {
            let (x, y, z) = (
                full.field(f).unwrap_or(f64::NAN),
                a.field(f).unwrap_or(f64::NAN),
                b.field(f).unwrap_or(f64::NAN),
            );
            rel(x, y + z)
        })
        .fold(0.0, f64::max);
    measure(worst, "time integrals over [0, T] against the sum over two windows")
}

// ---- cli

fn random_config(rng: &mut ChaCha8Rng) -> RunConfig {
    let n = rng.gen_range(1..4);
    let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| xs[rng.gen_range(0..xs.len())].to_string();
    let exprs = ["2", "2.2 + 0.1*sin(3*x1)", "1.9", "2 + 0.05*t", "min(2.1, 1.8 + x1)"];
    let mut solver = SolverConfig::new((0..n).map(|_| rng.gen_range(1..20)).collect());
    solver.tol = rng.gen::<f64>() * 1e-4;
    solver.kappa = rng.gen_bool(0.5).then(|| rng.gen_range(0.01..10.0));
    solver.integrator = if rng.gen_bool(0.5) {
        Integrator::ImexExponential
    } else {
        Integrator::ExplicitRk
    };
    if rng.gen_bool(0.5) {
        solver.grid = Some(solver.modes.iter().map(|m| 4 * m + 1).collect());
    }
    RunConfig {
        problem: ProblemBlock {
            lengths: (0..n).map(|_| rng.gen_range(0.1..5.0)).collect(),
            exponents: (0..n).map(|_| pick(rng, &exprs)).collect(),
            forcing: pick(rng, &["0", "sin(pi*x1)*exp(-t)", "1"]),
            initial: pick(rng, &["0", "x1*(1-x1)"]),
            epsilon: rng.gen_range(1e-4..1.0),
            horizon: rng.gen_range(0.01..2.0),
            slow: rng.gen_bool(0.5),
            u_exact: rng.gen_bool(0.5).then(|| "exp(-t)*sin(pi*x1)".to_string()),
        },
        solver,
        monitor: MonitorBlock {
            r: if rng.gen_bool(0.5) {
                vec![rng.gen_range(0.01..0.5)]
            } else {
                Vec::new()
            },
            r_fraction: vec![rng.gen_range(0.01..0.99)],
            slack: rng.gen_range(0.01..0.5),
            fields: vec!["higher_int".into()],
        },
        sweep: rng.gen_bool(0.5).then(|| SweepBlock {
            axis: SweepAxis::Epsilon,
            values: vec![0.1, 0.01, rng.gen_range(1e-5..1e-3)],
        }),
        mms_modes: vec![2, rng.gen_range(3..9)],
        verify: VerifyBlock {
            suites: rng.gen_bool(0.5).then(|| vec!["basis".to_string()]),
            cases: rng.gen_bool(0.5).then(|| rng.gen_range(1..50)),
            tolerances: BTreeMap::from([("basis.orthonormality".to_string(), rng.gen::<f64>())]),
        },
        output: PathBuf::from(format!("runs/r{}", rng.gen::<u16>())),
        seed: rng.gen(),
    }
}

fn cli_config_round_trip(rng: &mut ChaCha8Rng, cases: usize) -> Measure {
    let mut bad = 0;
    for _ in 0..cases {
        let c = random_config(rng);
        match RunConfig::parse(&c.to_text()) {
            Ok(back) if back == c && back.to_text() == c.to_text() => {}
            _ => bad += 1,
        }
    }
    measure(
        bad as f64,
        format!("{bad} of {cases} random configs changed on round trip"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_dotted() {
        let reg = registry();
        let mut names: Vec<_> = reg.iter().map(|p| p.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), reg.len());
        assert!(reg.iter().all(|p| p.name.contains('.')));
    }

    #[test]
    fn selection_by_prefix() {
        let v = |s: &[&str]| VerifyBlock {
            suites: Some(s.iter().map(|x| x.to_string()).collect()),
            cases: None,
            tolerances: BTreeMap::new(),
        };
        let basis = plan(&v(&["basis"])).unwrap();
        assert!(basis.len() == 5 && basis.iter().all(|p| p.name.starts_with("basis.")));
        assert_eq!(plan(&v(&["basis.parseval"])).unwrap().len(), 1);
        assert!(plan(&v(&[])).unwrap().is_empty());
        assert!(matches!(plan(&v(&["bas"])), Err(SuiteError::UnknownSelector(_))));
    }

    #[test]
    fn tampered_tolerance_fails() {
        let mut v = VerifyBlock {
            suites: Some(vec!["basis.orthonormality".into()]),
            cases: None,
            tolerances: BTreeMap::new(),
        };
        assert!(run_all(&plan(&v).unwrap(), 1)[0].pass);
        v.tolerances.insert("basis.orthonormality".into(), 1e-20);
        let out = run_all(&plan(&v).unwrap(), 1);
        assert!(!out[0].pass, "{out:?}");
    }

    #[test]
    fn outcomes_depend_only_on_the_seed() {
        let a = run_named("funcspace.holder", 9).unwrap();
        let b = run_named("funcspace.holder", 9).unwrap();
        assert_eq!(a, b);
        assert!(a.pass, "{a:?}");
    }
}
