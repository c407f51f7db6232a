//! `plapctl` command line front end.

use crate::adjoint::max_gradient;
use crate::config::{load_config, RunConfig};
use crate::discretization::{CellField, Field};
use crate::error::{Error, Result};
use crate::homotopy::{bootstrap_reference, run_homotopy, HomotopyOutcome, HomotopyTelemetry};
use crate::library::{catalog, GExpr};
use crate::objective::{ControlPair, Penalized, ProblemSpec};
use crate::state::DEDUP_THRESHOLD;
use crate::verifier::{
    check_adjoint_residual, check_bangbang, check_degenerate_set, check_hamiltonian_max, check_nontriviality,
    check_spike_derivative, CheckReport, VerificationReport,
};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

/// Environment variable selecting log verbosity (`error` ... `trace`).
pub const LOG_ENV: &str = "PLAPCTL_LOG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "plapctl", version, about = "Optimal control of p-Laplacian equations with 1 < p < 2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the state equation for the instance's constant control.
    SolveState(RunArgs),
    /// Bootstrap a reference pair and run the penalty homotopy.
    Optimize(RunArgs),
    /// Optimize and verify the optimality system.
    Verify(RunArgs),
    /// Search for several states of the multisolution instance.
    DemoMultiplicity(RunArgs),
    /// Optimize and verify the bang-bang instance.
    DemoBangbang(RunArgs),
    /// Print the builtin problem catalog.
    ListInstances,
}

#[derive(Args, Debug, Clone, Default)]
struct RunArgs {
    #[arg(long)]
    instance: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(Error),
    Solver(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownInstance(_) | Error::InvalidParameter(_) => Failure::Config(e),
            other => Failure::Solver(other),
        }
    }
}

fn resolve(args: &RunArgs, default_instance: &str) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match (&args.config, &args.instance) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => RunConfig::for_instance(name)?,
        (None, None) => RunConfig::for_instance(default_instance)?,
    };
    if args.config.is_some() {
        if let Some(name) = &args.instance {
            let base = RunConfig::for_instance(name)?;
            cfg.instance = base.instance;
            cfg.problem = base.problem;
        }
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(eps) = args.eps {
        cfg.eps = eps;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

fn io(e: std::io::Error) -> Failure {
    Failure::Solver(Error::Io(e.to_string()))
}

fn write_text(dir: &Path, name: &str, text: &str) -> std::result::Result<(), Failure> {
    std::fs::write(dir.join(name), text).map_err(io)
}

/// Regularization ladder in decades from `1e-1` down to `eps`.
fn eps_ladder(eps: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut e = 1e-1;
    while e > eps * 1.000001 {
        v.push(e);
        e *= 0.1;
    }
    v.push(eps);
    v
}

fn solve_state(cfg: &RunConfig) -> std::result::Result<i32, Failure> {
    let spec: ProblemSpec<f64> = cfg.problem.build()?;
    let grid = spec.grid(cfg.n)?;
    let op = spec.operator(&grid)?;
    let u = CellField::constant(&grid, cfg.problem.control);
    let mut y = Field::zeros(&grid);
    let mut last = None;
    for eps in eps_ladder(cfg.eps) {
        let (next, rep) = op.solve_semilinear(&u, eps, &spec.f, &spec.growth, &y, &cfg.homotopy.newton)?;
        y = next;
        last = Some(rep);
    }
    let rep = last.expect("nonempty ladder");
    std::fs::create_dir_all(&cfg.out).map_err(io)?;
    y.write_csv(cfg.out.join("y.csv"))?;
    println!(
        "state: max {:.12e} residual {:.3e} iterations {} converged {}",
        y.max_value(),
        rep.residual,
        rep.iterations,
        rep.converged
    );
    if !rep.converged {
        return Err(Failure::Solver(Error::NonConvergence(format!("state residual {:e}", rep.residual))));
    }
    Ok(EXIT_OK)
}

/// Bootstrap, homotopy, and the field / telemetry dump.
fn optimize(cfg: &RunConfig) -> std::result::Result<(ProblemSpec<f64>, HomotopyOutcome<f64>), Failure> {
    let spec: ProblemSpec<f64> = cfg.problem.build()?;
    let grid = spec.grid(cfg.n)?;
    std::fs::create_dir_all(&cfg.out).map_err(io)?;
    let boot = bootstrap_reference(&spec, &grid, &cfg.homotopy, None)?;
    log::info!("reference cost {:.12e} after {} projected-gradient steps", boot.cost, boot.iterations);
    let outcome = match run_homotopy(&spec, &grid, &boot.reference, &cfg.homotopy) {
        Ok(o) => o,
        Err(abort) => {
            let mut t = HomotopyTelemetry { records: vec![boot.record()] };
            t.records.extend(abort.telemetry.records);
            write_text(&cfg.out, "telemetry.ndrec", &t.to_lines())?;
            return Err(Failure::Solver(abort.error));
        }
    };
    let mut t = HomotopyTelemetry { records: vec![boot.record()] };
    t.records.extend(outcome.telemetry.records.iter().cloned());
    write_text(&cfg.out, "telemetry.ndrec", &t.to_lines())?;
    outcome.y.write_csv(cfg.out.join("y.csv"))?;
    outcome.pair.u.write_csv(cfg.out.join("u.csv"))?;
    outcome.pair.v.write_csv(cfg.out.join("v.csv"))?;
    outcome.multiplier.psi.write_csv(cfg.out.join("psi.csv"))?;
    println!(
        "optimize: cost {:.12e} mu {:.12e} stages {}",
        crate::objective::eval_j(&spec, &outcome.y, &outcome.pair.u),
        outcome.multiplier.mu,
        outcome.telemetry.stages().count()
    );
    Ok((spec, outcome))
}

/// Runs every check on a homotopy outcome. The bang-bang check is added
/// for linear control costs.
pub fn verify_outcome(spec: &ProblemSpec<f64>, out: &HomotopyOutcome<f64>, cfg: &RunConfig) -> Result<VerificationReport> {
    let mp = &out.multiplier;
    let theta = cfg.homotopy.theta_rel * max_gradient(&out.y);
    let mut rep = VerificationReport::default();
    rep.push(check_nontriviality(mp));
    let res = check_adjoint_residual(&out.y, &mp.psi, mp.mu, spec, theta, out.params.eps)?;
    let bound = 10.0 * (out.params.tau + 1.0 / out.params.m.max(1.0));
    rep.push(CheckReport {
        name: "adjoint_residual".into(),
        pass: res.is_finite() && res <= bound,
        value: res,
        threshold: bound,
        diagnostics: vec![("eps_check".into(), out.params.eps.to_string()), ("theta".into(), theta.to_string())],
    });
    rep.push(check_degenerate_set(&out.y, &mp.psi, theta));
    rep.push(check_hamiltonian_max(&out.pair.u, &mp.psi, mp.mu, spec, cfg.homotopy.n_probes));
    let pen = Penalized::new(spec, out.y.grid(), out.params.clone(), cfg.homotopy.newton)?;
    let probe = random_pair(spec, &out.params.fybar, cfg.seed);
    rep.push(check_spike_derivative(&pen, &out.pair, &out.y, &probe, &[1e-2, 1e-3, 1e-4])?);
    if let GExpr::Linear(c) = cfg.problem.g {
        rep.push(check_bangbang(&out.pair.u, &mp.psi, mp.mu, c, spec.a, spec.b, None, &out.y, theta));
    }
    Ok(rep)
}

/// Uniform random feasible pair.
pub fn random_pair(spec: &ProblemSpec<f64>, fybar: &CellField<f64>, seed: u64) -> ControlPair<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = fybar.grid();
    let v = fybar.values().iter().map(|&f| f + rng.gen_range(-1.0..=1.0)).collect();
    let u = (0..grid.n_quad()).map(|_| rng.gen_range(spec.a..=spec.b)).collect();
    ControlPair::new(CellField::from_values(grid, v), CellField::from_values(grid, u))
}

fn verify(cfg: &RunConfig) -> std::result::Result<i32, Failure> {
    let (spec, out) = optimize(cfg)?;
    let rep = verify_outcome(&spec, &out, cfg)?;
    write_text(&cfg.out, "report.txt", &rep.to_string())?;
    for c in &rep.checks {
        println!("{:<18} {} value {:e}", c.name, if c.pass { "pass" } else { "FAIL" }, c.value);
    }
    if rep.passed() {
        Ok(EXIT_OK)
    } else {
        Err(Failure::Verification("verification failed; see report.txt".into()))
    }
}

/// Seeds for the multistart search: scaled bumps of both signs.
pub fn multistart_seeds(grid: &std::sync::Arc<crate::discretization::Grid<f64>>, seed: u64) -> Vec<Field<f64>> {
    let bump = |s: f64| {
        Field::from_fn(grid, move |x| {
            let d = grid.domain();
            let (lo, hi) = match *d {
                crate::discretization::DomainSpec::Interval { x0, x1 } => (x0, x1),
                crate::discretization::DomainSpec::Rectangle { x0, x1, .. } => (x0, x1),
            };
            let t = (x[0] - lo) / (hi - lo);
            s * 4.0 * t * (1.0 - t)
        })
    };
    let mut seeds: Vec<Field<f64>> = [-2.0, -1.0, -0.3, 0.0, 0.3, 1.0, 2.0].iter().map(|&s| bump(s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..3 {
        let s = rng.gen_range(-2.0..2.0);
        seeds.push(bump(s));
    }
    seeds
}

fn demo_multiplicity(cfg: &RunConfig) -> std::result::Result<i32, Failure> {
    let spec: ProblemSpec<f64> = cfg.problem.build()?;
    let grid = spec.grid(cfg.n)?;
    let op = spec.operator(&grid)?;
    let u = CellField::constant(&grid, cfg.problem.control);
    let seeds = multistart_seeds(&grid, cfg.seed);
    let eps = cfg.eps.max(1e-3);
    let found = op.multistart_semilinear(&u, eps, &spec.f, &spec.growth, &seeds, &cfg.homotopy.newton, DEDUP_THRESHOLD)?;
    std::fs::create_dir_all(&cfg.out).map_err(io)?;
    let mut text = format!("solutions = {}\neps = {eps}\n", found.len());
    for (k, (y, r)) in found.iter().enumerate() {
        y.write_csv(cfg.out.join(format!("y_{k}.csv")))?;
        text.push_str(&format!("solution.{k}.max = {:e}\nsolution.{k}.residual = {:e}\n", y.max_value(), r.residual));
        println!("solution {k}: max {:.6e} L-inf {:.6e} residual {:.3e}", y.max_value(), r.linf, r.residual);
    }
    let mut sep = 0.0f64;
    for i in 0..found.len() {
        for j in i + 1..found.len() {
            sep = sep.max(found[i].0.linf_distance(&found[j].0));
        }
    }
    text.push_str(&format!("max_separation = {sep:e}\n"));
    write_text(&cfg.out, "report.txt", &text)?;
    if found.len() >= 2 {
        Ok(EXIT_OK)
    } else {
        Err(Failure::Verification(format!("found {} solution(s)", found.len())))
    }
}

fn list_instances() -> i32 {
    for inst in catalog() {
        println!("{}\t{}", inst.name, inst.summary);
    }
    EXIT_OK
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::ListInstances => Ok(list_instances()),
        Command::SolveState(a) => resolve(a, "closed_form_1d").and_then(|c| solve_state(&c)),
        Command::Optimize(a) => resolve(a, "bangbang_sec6").and_then(|c| optimize(&c).map(|_| EXIT_OK)),
        Command::Verify(a) => resolve(a, "bangbang_sec6").and_then(|c| verify(&c)),
        Command::DemoMultiplicity(a) => resolve(a, "multisolution").and_then(|c| demo_multiplicity(&c)),
        Command::DemoBangbang(a) => {
            let mut a = a.clone();
            if a.instance.is_none() && a.config.is_none() {
                a.instance = Some("bangbang_sec6".into());
            }
            resolve(&a, "bangbang_sec6").and_then(|c| verify(&c))
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("plapctl: configuration error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Solver(e)) => {
            eprintln!("plapctl: solver failure: {e}");
            EXIT_SOLVER
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("plapctl: {msg}");
            EXIT_VERIFICATION
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_ends_at_target() {
        assert_eq!(eps_ladder(1e-3).len(), 3);
        assert_eq!(*eps_ladder(1e-6).last().unwrap(), 1e-6);
        assert_eq!(eps_ladder(0.5), vec![0.5]);
    }

    #[test]
    fn exit_codes_for_bad_input() {
        assert_eq!(cli_main(["plapctl", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(cli_main(["plapctl", "solve-state", "--instance", "nope"]), EXIT_CONFIG);
        assert_eq!(cli_main(["plapctl", "list-instances"]), EXIT_OK);
    }
}
