//! Acceptance run: every criterion at its stated tolerance, one line each.
//!
//! Runs as a plain binary (`harness = false`) so the lines appear in order
//! and the process exits nonzero when any criterion fails.

use anipar_cli::commands;
use anipar_cli::suites::run_named;
use anipar_cli::RunConfig;
use anipar_core::monitor::{contraction_check, energy_residual, CONTRACTION_DRIFT};
use anipar_core::solver;
use std::error::Error;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

type Check = Result<(bool, String), Box<dyn Error>>;

const SEED: u64 = 0x5eed;

const HEAT: &str = "\
problem.lengths = 1, 1
problem.p1 = 2
problem.p2 = 2
problem.forcing = 0
problem.initial = 2*sin(pi*x1)*sin(pi*x2)
problem.epsilon = 0.5
problem.horizon = 0.1
solver.modes = 8
";

const MMS: &str = "\
problem.lengths = 1, 1
problem.p1 = 2.2
problem.p2 = 1.9
problem.epsilon = 1e-3
problem.horizon = 0.5
problem.u_exact = exp(-t)*sin(pi*x1)*sin(pi*x2)
mms.modes = 4, 8, 16
";

const CONTRACTION: &str = "\
problem.lengths = 1, 1
problem.p1 = 2.2
problem.p2 = 1.9
problem.forcing = 10*x1*(1-x1)*x2*(1-x2)*cos(4*t)
problem.epsilon = 1e-3
problem.horizon = 0.5
solver.modes = 8
";

const SWEEP: &str = "\
problem.lengths = 3.141592653589793, 3.141592653589793
problem.p1 = 2 + 0.2*sin(3*x1)
problem.p2 = 2
problem.forcing = 0
problem.initial = x1*(pi-x1)*x2*(pi-x2)
problem.epsilon = 1e-1
problem.horizon = 0.25
solver.modes = 16
monitor.r_fraction = 0.5
monitor.fields = higher_int, hessian_weighted
sweep.axis = epsilon
sweep.values = 1e-1, 1e-2, 1e-3
";

const DETERMINISM: &str = "\
problem.lengths = 1, 1.5
problem.p1 = 2.1 + 0.1*sin(3*x1)*cos(t)
problem.p2 = 1.95
problem.forcing = x1*(1-x1)*sin(2*x2)
problem.initial = sin(pi*x1)*x2*(1.5-x2)
problem.epsilon = 1e-2
problem.horizon = 0.2
solver.modes = 10
";

fn parse(text: &str, out: &Path) -> Result<RunConfig, Box<dyn Error>> {
    let mut cfg = RunConfig::parse(text)?;
    cfg.output = out.to_path_buf();
    Ok(cfg)
}

fn within(budget: Duration, start: Instant) -> (bool, String) {
    let e = start.elapsed();
    (e < budget, format!("{:.1}s of {}s", e.as_secs_f64(), budget.as_secs()))
}

fn suites(names: &[&str]) -> Check {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in names {
        let o = run_named(name, SEED).ok_or_else(|| format!("unknown property {name}"))?;
        pass &= o.pass;
        detail.push(format!("{} {:.2e}/{:.0e}", name, o.worst, o.tolerance));
    }
    Ok((pass, detail.join(", ")))
}

fn heat_exactness(tmp: &Path) -> Check {
    let start = Instant::now();
    let want = (-2.0 * PI * PI * 0.1f64).exp();
    let mut errs = Vec::new();
    for (tag, extra) in [
        ("default", ""),
        ("kappa1", "solver.integrator = imex-exponential\nsolver.kappa = 1\n"),
    ] {
        let cfg = parse(&format!("{HEAT}{extra}"), &tmp.join(tag))?;
        commands::cmd_solve(&cfg, false)?;
        let c = commands::final_coefficients(&cfg.output.join("snapshots.bin"))?;
        errs.push((c[0] - want).abs() / want);
    }
    let (fast, time) = within(Duration::from_secs(10), start);
    Ok((
        errs[0] <= 1e-6 && errs[1] <= 1e-12 && fast,
        format!(
            "rel err default {:.2e} (<= 1e-6), kappa=1 {:.2e} (<= 1e-12), {time}",
            errs[0], errs[1]
        ),
    ))
}

fn mms_convergence(tmp: &Path) -> Check {
    let start = Instant::now();
    let cfg = parse(MMS, tmp)?;
    let prob = cfg.build_problem()?;
    let u = cfg.u_exact().ok_or("u_exact missing")?;
    let pts = solver::convergence_study(&prob, &cfg.solver, &u, &cfg.mms_modes)?;
    let e: Vec<f64> = pts.iter().map(|p| p.l2_error).collect();
    let strict = e.windows(2).all(|w| w[1] < w[0]);
    let factor = e[0] / e[2];
    let (fast, time) = within(Duration::from_secs(300), start);
    Ok((
        strict && factor >= 5.0 && fast,
        format!(
            "errors {:.3e}, {:.3e}, {:.3e}; e4/e16 = {factor:.1} (>= 5), {time}",
            e[0], e[1], e[2]
        ),
    ))
}

fn energy_identity(tmp: &Path) -> Check {
    let cfg = parse(MMS, tmp)?;
    let prob = cfg.build_problem()?;
    let u = cfg.u_exact().ok_or("u_exact missing")?;
    let mut residuals = Vec::new();
    for &m in &cfg.mms_modes {
        let sc = solver::SolverConfig {
            modes: vec![m; 2],
            ..cfg.solver.clone()
        };
        residuals.push(energy_residual(&solver::solve_manufactured(&prob, &sc, &u)?.trajectory));
    }
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let m = *cfg.mms_modes.last().unwrap();
    let tight = solver::SolverConfig {
        modes: vec![m; 2],
        tol: cfg.solver.tol / 4.0,
        ..cfg.solver.clone()
    };
    let quartered = energy_residual(&solver::solve_manufactured(&prob, &tight, &u)?.trajectory);
    let ratio = quartered / residuals.last().unwrap();
    Ok((
        worst <= 1e-5 && (0.175..=0.325).contains(&ratio),
        format!("max residual {worst:.2e} (<= 1e-5); tol/4 ratio at m = {m}: {ratio:.3} (0.25 +- 30%)"),
    ))
}

fn contraction(tmp: &Path) -> Check {
    let a = parse(
        &format!("{CONTRACTION}problem.initial = 2*sin(pi*x1)*sin(pi*x2)\n"),
        tmp,
    )?;
    let b = parse(
        &format!("{CONTRACTION}problem.initial = sin(pi*x1)*sin(pi*x2) + 0.6*sin(2*pi*x1)*sin(pi*x2)\n"),
        tmp,
    )?;
    let ta = solver::solve(&a.build_problem()?, &a.solver)?;
    let tb = solver::solve(&b.build_problem()?, &b.solver)?;
    let r = contraction_check(&ta, &tb)?;
    Ok((
        r.pass,
        format!(
            "distance {:.4e} -> {:.4e} over {} snapshots, max increase {:.2e} (<= {CONTRACTION_DRIFT:.0e})",
            r.distances[0],
            r.distances.last().unwrap(),
            r.distances.len(),
            r.max_increase
        ),
    ))
}

fn eps_boundedness(tmp: &Path) -> Check {
    let start = Instant::now();
    let cfg = parse(SWEEP, tmp)?;
    let outcome = commands::cmd_sweep(&cfg, false)?;
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.join("verdicts.json"))?)?;
    let verdicts = summary["verdicts"].as_array().ok_or("no verdicts")?;
    let detail: Vec<String> = verdicts
        .iter()
        .map(|v| {
            format!(
                "{} variation {:.2e} trend {} {}",
                v["field"].as_str().unwrap_or("?"),
                v["variation"].as_f64().unwrap_or(f64::NAN),
                v["trend"].as_str().unwrap_or("?"),
                if v["pass"].as_bool() == Some(true) {
                    "ok"
                } else {
                    "FAIL"
                }
            )
        })
        .collect();
    let (fast, time) = within(Duration::from_secs(900), start);
    Ok((
        outcome.pass && verdicts.len() == 2 && fast,
        format!("{}; {time}", detail.join("; ")),
    ))
}

fn determinism(tmp: &Path) -> Check {
    let cfg = tmp.join("det.cfg");
    fs::write(&cfg, DETERMINISM)?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.join(run);
        let st = Command::new(env!("CARGO_BIN_EXE_anipar"))
            .args(["solve", "--threads", "3", "--seed", "7", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()?;
        if !st.status.success() {
            return Ok((false, format!("solve exited {:?}", st.status.code())));
        }
        let files = ["snapshots.bin", "report.json", "monitors.csv"]
            .iter()
            .map(|f| fs::read(out.join(f)))
            .collect::<Result<Vec<_>, _>>()?;
        outputs.push(files);
    }
    let bytes: usize = outputs[0].iter().map(Vec::len).sum();
    Ok((outputs[0] == outputs[1], format!("3 artifacts, {bytes} bytes compared")))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: [(&str, Box<dyn Fn(&Path) -> Check>); 10] = [
        ("heat exactness", Box::new(heat_exactness)),
        ("manufactured convergence", Box::new(mms_convergence)),
        ("energy identity", Box::new(energy_identity)),
        ("contraction", Box::new(contraction)),
        (
            "basis identities",
            Box::new(|_: &Path| {
                suites(&[
                    "basis.orthonormality",
                    "basis.parseval",
                    "basis.derivative_norms",
                    "basis.laplacian_identity",
                ])
            }),
        ),
        (
            "function spaces",
            Box::new(|_: &Path| {
                suites(&[
                    "funcspace.luxemburg_fixed_point",
                    "funcspace.constant_exponent",
                    "funcspace.holder",
                    "funcspace.interpolation",
                ])
            }),
        ),
        ("epsilon-uniform bounds", Box::new(eps_boundedness)),
        (
            "exponent arithmetic",
            Box::new(|_: &Path| suites(&["exponents.r_star_values", "exponents.beta_max_inverse"])),
        ),
        (
            "flux monotonicity",
            Box::new(|_: &Path| suites(&["solver.flux_monotone"])),
        ),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let dir = tmp.path().join(format!("c{}", i + 1));
        fs::create_dir_all(&dir).expect("criterion dir");
        let (pass, detail) = check(&dir).unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {name}: {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} of 10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
