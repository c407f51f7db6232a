//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use plapctl::adjoint::max_gradient;
use plapctl::cli::multistart_seeds;
use plapctl::homotopy::{bootstrap_reference, run_homotopy, HomotopyConfig, HomotopyOutcome, HomotopyTelemetry};
use plapctl::library::instance;
use plapctl::verifier::{check_degenerate_set, check_hamiltonian_max, relative_degenerate_norm};
use plapctl::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

fn report(label: &str, pass: bool, detail: String) {
    println!("{} {label}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{label}: {detail}");
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Nonincreasing up to a relative slack, ignoring values below `floor`.
fn nonincreasing(seq: &[f64], slack: f64, floor: f64) -> bool {
    seq.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack) || w[1] <= floor)
}

struct Run {
    spec: ProblemSpec<f64>,
    out: HomotopyOutcome<f64>,
    elapsed: Duration,
}

fn run(name: &str) -> Run {
    let t = Instant::now();
    let spec = instance(name).unwrap().data.build::<f64>().unwrap();
    let grid = spec.grid(256).unwrap();
    let cfg = HomotopyConfig::default();
    let boot = bootstrap_reference(&spec, &grid, &cfg, None).unwrap();
    let out = run_homotopy(&spec, &grid, &boot.reference, &cfg).map_err(|e| e.error).unwrap();
    Run { spec, out, elapsed: t.elapsed() }
}

fn monotone() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run("monotone_decoupled"))
}

fn bangbang() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run("bangbang_sec6"))
}

#[test]
fn closed_form_maximum() {
    let t = Instant::now();
    let spec = instance("closed_form_1d").unwrap().data.build::<f64>().unwrap();
    let grid = spec.grid(512).unwrap();
    let op = spec.operator(&grid).unwrap();
    let (y, rep) = op
        .solve_state(&CellField::constant(&grid, 1.0), 1e-6, &Field::zeros(&grid), &NewtonConfig::default())
        .unwrap();
    let elapsed = t.elapsed();
    let err = (y.max_value() - 1.0 / 24.0).abs();
    report(
        "closed-form state maximum",
        rep.converged && err <= 1e-3 && elapsed < Duration::from_secs(10),
        format!("max {:.8e}, error {err:.2e}, {elapsed:?}", y.max_value()),
    );
}

fn manufactured_error(n: usize, eps: f64, p: f64) -> f64 {
    let grid = build_grid(DomainSpec::<f64>::unit_interval(), n).unwrap();
    let op = PLaplacian::new(&grid, p).unwrap();
    let rhs = |x: [f64; 2]| {
        let g = 0.1 * PI * (PI * x[0]).cos();
        let ypp = -0.1 * PI * PI * (PI * x[0]).sin();
        let s2 = eps * eps + g * g;
        -s2.powf((p - 2.0) / 2.0) * (1.0 + (p - 2.0) * g * g / s2) * ypp
    };
    let load = grid.load_from_fn(rhs, 8);
    let (y, rep) = op.solve_state_load(&load, eps, &Field::zeros(&grid), &NewtonConfig::default()).unwrap();
    assert!(rep.converged);
    let exact = CellField::from_fn(&grid, |x| 0.1 * (PI * x[0]).sin());
    CellField::from_values(&grid, y.values_at_quadrature()).sub(&exact).l2_norm()
}

#[test]
fn manufactured_convergence_order() {
    let t = Instant::now();
    let errs: Vec<f64> = [64, 128, 256, 512].iter().map(|&n| manufactured_error(n, 1e-3, 1.5)).collect();
    let elapsed = t.elapsed();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let worst = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    report(
        "manufactured-solution L2 order",
        worst >= 1.5 && elapsed < Duration::from_secs(60),
        format!("errors {}, orders {orders:.3?}, {elapsed:?}", sci(&errs)),
    );
}

#[test]
fn adjoint_gradient_matches_differences() {
    let spec = instance("bangbang_sec6").unwrap().data.build::<f64>().unwrap();
    let grid = spec.grid(64).unwrap();
    let op = spec.operator(&grid).unwrap();
    let newton = NewtonConfig { atol: 1e-13, rtol: 1e-13, ..Default::default() };
    let load = grid.load_vector(&vec![1.5; grid.n_quad()]);
    let (ybar, _) = op.solve_state_load(&load, 1e-2, &Field::zeros(&grid), &newton).unwrap();
    let reference = Reference::new(&spec, ybar, CellField::constant(&grid, 1.0));
    let params = PenaltyParams::new(&reference, 1e-2, 10.0, 0.1, 0.1).unwrap();
    let pen = Penalized::new(&spec, &grid, params, newton).unwrap();
    let pair = ControlPair::new(
        CellField::from_fn(&grid, |x| 1.2 + 0.3 * (5.0 * x[0]).sin()),
        CellField::from_fn(&grid, |x| 1.0 + 0.5 * (3.0 * x[0]).cos()),
    );
    let g = pen.gradient(&pair, &Field::zeros(&grid)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut random = || CellField::from_values(&grid, (0..grid.n_quad()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = ControlPair::new(random(), random());
        let plus = ControlPair::new(pair.v.axpy(h, &d.v), pair.u.axpy(h, &d.u));
        let minus = ControlPair::new(pair.v.axpy(-h, &d.v), pair.u.axpy(-h, &d.u));
        let (yp, _) = pen.state(&plus, &g.y).unwrap();
        let (ym, _) = pen.state(&minus, &g.y).unwrap();
        let fd = (pen.cost(&plus, &yp) - pen.cost(&minus, &ym)) / (2.0 * h);
        let an = g.directional(&d);
        worst = worst.max((fd - an).abs() / an.abs().max(1e-300));
    }
    report("adjoint gradient vs central differences", worst <= 1e-4, format!("worst relative error {worst:.3e} over 20 directions"));
}

#[test]
fn tensor_eigenvalue_bounds() {
    let p = 1.5;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for eps in [1e-1, 1e-3] {
        for _ in 0..10_000 {
            let scale = 10f64.powf(rng.gen_range(-4.0..2.0));
            let g = [scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0)];
            let t = DiffusionTensor::new(g, eps, p);
            let [[a, b], [_, d]] = t.a;
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            let coef = t.s.powf(p - 2.0);
            let lo = (p - 1.0) * coef - 1e-12;
            let hi = coef + 1e-12;
            for lam in [mid - rad, mid + rad] {
                worst = worst.max(lo - lam).max(lam - hi);
                if lam < lo || lam > hi {
                    violations += 1;
                }
            }
        }
    }
    report("diffusion tensor coercivity", violations == 0, format!("{violations} violations, worst excess {worst:.3e}"));
}

fn penalty_norms(tel: &HomotopyTelemetry) -> Vec<(f64, Vec<f64>)> {
    let mut blocks: Vec<(f64, Vec<f64>)> = Vec::new();
    for (s, _) in tel.block_ends() {
        match blocks.last_mut() {
            Some((tau, seq)) if *tau == s.tau => seq.push(s.penalty_norm),
            _ => blocks.push((s.tau, vec![s.penalty_norm])),
        }
    }
    blocks
}

#[test]
fn penalty_convergence() {
    let run = monotone();
    let blocks = penalty_norms(&run.out.telemetry);
    let ms: Vec<f64> = run.out.telemetry.block_ends().filter(|(s, _)| s.tau == blocks[0].0).map(|(s, _)| s.m).collect();
    let monotone_ok = blocks.iter().all(|(_, seq)| nonincreasing(seq, 0.05, 1e-8));
    let last = *blocks.last().unwrap().1.last().unwrap();
    report(
        "penalty norm along m",
        ms == [1.0, 1e1, 1e2, 1e3, 1e4] && monotone_ok && last <= 1e-2,
        format!("m {ms:?}, norms per tau {}, final {last:.2e}", blocks.iter().map(|(t, seq)| format!("{t:e}: {}", sci(seq))).collect::<Vec<_>>().join(" ")),
    );
}

fn independent_penalty_residual(run: &Run) -> (f64, f64) {
    let out = &run.out;
    let fy = run.spec.f_at_quadrature(&out.y);
    let psi = out.psi_raw.values_at_quadrature();
    let m = out.params.m;
    let tau = out.params.tau;
    let worst = out
        .pair
        .v
        .values()
        .iter()
        .zip(fy.values())
        .zip(&psi)
        .map(|((v, f), s)| ((m * (v - f)).abs() - 2.0 * s.abs() - tau).max(0.0))
        .fold(0.0, f64::max);
    (worst, 1e-6 * out.psi_raw.norms().linf + 1e-8)
}

#[test]
fn penalty_bound() {
    let mut lines = Vec::new();
    let mut pass = true;
    for run in [monotone(), bangbang()] {
        let recs: Vec<_> = run.out.telemetry.block_ends().filter(|(_, m)| m.past_n_tau).collect();
        let worst = recs.iter().map(|(_, m)| m.penalty_bound_residual - m.penalty_bound_tolerance).fold(f64::NEG_INFINITY, f64::max);
        let (final_res, final_tol) = independent_penalty_residual(run);
        pass &= !recs.is_empty() && worst <= 0.0 && final_res <= final_tol;
        lines.push(format!(
            "{}: {} blocks past N_tau, worst excess {worst:.2e}, final {final_res:.2e} <= {final_tol:.2e}",
            run.spec.name,
            recs.len()
        ));
    }
    report("pointwise penalty bound", pass, lines.join("; "));
}

#[test]
fn optimality_system() {
    let mut lines = Vec::new();
    let mut pass = true;
    for run in [monotone(), bangbang()] {
        let out = &run.out;
        let mult = &out.multiplier;
        let norm = (mult.psi.norms().l2 + mult.mu - 1.0).abs();
        let ham = check_hamiltonian_max(&out.pair.u, &mult.psi, mult.mu, &run.spec, 1000);
        let theta = 1e-4 * max_gradient(&out.y);
        let mask = DegenerateMask::new(&out.y, theta);
        let deg_final = relative_degenerate_norm(&mult.psi, &mask);
        let deg_check = check_degenerate_set(&out.y, &mult.psi, theta);
        let stages: Vec<_> = out.telemetry.stages().collect();
        let last = stages.last().unwrap();
        let seq: Vec<f64> = stages
            .iter()
            .filter(|s| s.tau == last.tau && s.m == last.m && s.sigma == last.sigma)
            .map(|s| s.degenerate_norm)
            .collect();
        let ok = norm <= 1e-12 && ham.pass && nonincreasing(&seq, 0.05, 1e-8) && deg_final <= 1e-4 && deg_check.pass;
        pass &= ok;
        lines.push(format!(
            "{}: normalization {norm:.1e}, hamiltonian gap {:.2e}, degenerate norms {}, final {deg_final:.2e}",
            run.spec.name,
            ham.value,
            sci(&seq)
        ));
    }
    report("optimality system on homotopy output", pass, lines.join("; "));
}

#[test]
fn bang_bang_structure() {
    let run = bangbang();
    let t = Instant::now();
    let out = &run.out;
    let (a, b) = (run.spec.a, run.spec.b);
    let u = out.pair.u.values();
    let bang = u.iter().filter(|&&x| x == a || x == b).count() as f64 / u.len() as f64;
    let mult = &out.multiplier;
    let slope = match run.spec.g {
        ControlCost::Linear { c } => c,
        _ => panic!("bang-bang instance needs a linear control cost"),
    };
    let delta = plapctl::verifier::default_delta_flat(&mult.psi, mult.mu * slope);
    let theta = 1e-4 * max_gradient(&out.y);
    let check = plapctl::verifier::check_bangbang(&out.pair.u, &mult.psi, mult.mu, slope, a, b, Some(delta), &out.y, theta);
    let flat: f64 = check.diagnostic("flat_fraction").and_then(|s| s.parse().ok()).unwrap_or(f64::NAN);
    let elapsed = run.elapsed + t.elapsed();
    report(
        "bang-bang control",
        bang >= 0.99 && flat <= 0.01 && elapsed < Duration::from_secs(300),
        format!("bang fraction {bang:.4}, flat fraction {flat:.4}, {elapsed:?}"),
    );
}

#[test]
fn multiple_state_solutions() {
    let spec = instance("multisolution").unwrap().data.build::<f64>().unwrap();
    let grid = spec.grid(128).unwrap();
    let op = spec.operator(&grid).unwrap();
    let u = CellField::constant(&grid, spec.a.max(0.0).min(spec.b));
    let seeds = multistart_seeds(&grid, 0);
    let found = op
        .multistart_semilinear(&u, 1e-3, &spec.f, &spec.growth, &seeds, &NewtonConfig::default(), 1e-3)
        .unwrap();
    let residuals: Vec<f64> = found
        .iter()
        .map(|(y, _)| linalg_norm(&op.semilinear_residual(y, &u, 1e-3, &spec.f).unwrap()))
        .collect();
    let mut sep = f64::INFINITY;
    for i in 0..found.len() {
        for j in i + 1..found.len() {
            sep = sep.min(found[i].0.linf_distance(&found[j].0));
        }
    }
    report(
        "multiple state solutions",
        found.len() >= 2 && sep >= 0.1 && residuals.iter().all(|&r| r <= 1e-8),
        format!("{} solutions, min separation {sep:.3}, residuals {}", found.len(), sci(&residuals)),
    );
}

fn linalg_norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn inner_solvers_agree() {
    let spec = instance("quadratic_tracking").unwrap().data.build::<f64>().unwrap();
    let grid = spec.grid(64).unwrap();
    let op = spec.operator(&grid).unwrap();
    let newton = NewtonConfig::default();
    let ubar = CellField::constant(&grid, 0.5);
    let (ybar, _) = op.solve_semilinear(&ubar, 1e-2, &spec.f, &spec.growth, &Field::zeros(&grid), &newton).unwrap();
    let reference = Reference::new(&spec, ybar.clone(), ubar);
    let params = PenaltyParams::new(&reference, 1e-2, 10.0, 0.1, 0.0).unwrap();
    let pen = Penalized::new(&spec, &grid, params, newton).unwrap();
    let start = ControlPair::at_reference(&reference);
    let solve = |strategy| {
        let cfg = InnerSolveConfig { strategy, max_sweeps: 5000, tol: 1e-10, ..Default::default() };
        solve_inner(&pen, &start, &ybar, &cfg).unwrap()
    };
    let alt = solve(InnerStrategy::Alternating);
    let pg = solve(InnerStrategy::ProjectedGradient);
    let diff = (alt.objective - pg.objective).abs();
    report(
        "alternating vs projected gradient",
        diff <= 1e-6,
        format!(
            "objectives {:.10} / {:.10}, difference {diff:.2e}, sweeps {} / {}",
            alt.objective, pg.objective, alt.sweeps, pg.sweeps
        ),
    );
}
