//! Flat `key = value` run configuration with dotted section names.
//!
//! ```text
//! instance = bangbang_sec6
//! n = 256
//! schedule.m = 1, 10, 100
//! problem.p = 1.5
//! ```
//!
//! Every key is optional once `instance` is given; `problem.*` keys then
//! override the catalog entry. Unknown and repeated keys are errors.

use crate::discretization::DomainSpec;
use crate::error::{Error, Result};
use crate::homotopy::HomotopyConfig;
use crate::library::{instance, parse_call, ProblemData};
use crate::optimizer::{InnerStrategy, UMaximizerMode};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Catalog entry the problem data started from.
    pub instance: Option<String>,
    pub problem: ProblemData,
    pub n: usize,
    /// Regularization of plain state solves.
    pub eps: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub homotopy: HomotopyConfig,
}

impl RunConfig {
    /// Defaults for a catalog instance.
    pub fn for_instance(name: &str) -> Result<Self> {
        let inst = instance(name)?;
        Ok(RunConfig {
            instance: Some(inst.name.to_string()),
            problem: inst.data,
            n: inst.default_n,
            eps: 1e-6,
            seed: 0,
            out: PathBuf::from("out"),
            homotopy: HomotopyConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Config("eps must lie in (0,1]".into()));
        }
        self.problem.build::<f64>().map_err(|e| Error::Config(invalid(e)))?;
        self.homotopy.validate().map_err(|e| Error::Config(invalid(e)))
    }
}

fn invalid(e: Error) -> String {
    match e {
        Error::InvalidParameter(s) | Error::Config(s) => s,
        other => other.to_string(),
    }
}

fn fmt_domain(d: &DomainSpec<f64>) -> String {
    match *d {
        DomainSpec::Interval { x0, x1 } => format!("interval({x0},{x1})"),
        DomainSpec::Rectangle { x0, x1, y0, y1 } => format!("rectangle({x0},{x1},{y0},{y1})"),
    }
}

fn parse_domain(s: &str) -> std::result::Result<DomainSpec<f64>, String> {
    let (name, a) = parse_call(s).map_err(invalid)?;
    match (name.as_str(), a.len()) {
        ("interval", 2) => Ok(DomainSpec::Interval { x0: a[0], x1: a[1] }),
        ("rectangle", 4) => Ok(DomainSpec::Rectangle { x0: a[0], x1: a[1], y0: a[2], y1: a[3] }),
        _ => Err(format!("expected interval(x0,x1) or rectangle(x0,x1,y0,y1), got `{s}`")),
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|t| num::<f64>(t.trim())).collect()
}

fn num<N: std::str::FromStr>(s: &str) -> std::result::Result<N, String> {
    s.parse::<N>().map_err(|_| format!("cannot parse `{s}`"))
}

fn strategy_name(s: InnerStrategy) -> &'static str {
    match s {
        InnerStrategy::Alternating => "alternating",
        InnerStrategy::ProjectedGradient => "projected_gradient",
        InnerStrategy::Newton => "newton",
    }
}

fn u_mode_name(m: UMaximizerMode) -> &'static str {
    match m {
        UMaximizerMode::ClosedForm => "closed_form",
        UMaximizerMode::GoldenSection => "golden_section",
    }
}

/// Every key with its current value, in file order.
fn entries(c: &RunConfig) -> Vec<(&'static str, String)> {
    let h = &c.homotopy;
    let p = &c.problem;
    vec![
        ("instance", c.instance.clone().unwrap_or_default()),
        ("n", c.n.to_string()),
        ("eps", c.eps.to_string()),
        ("seed", c.seed.to_string()),
        ("out", c.out.display().to_string()),
        ("problem.name", p.name.clone()),
        ("problem.domain", fmt_domain(&p.domain)),
        ("problem.p", p.p.to_string()),
        ("problem.a", p.a.to_string()),
        ("problem.b", p.b.to_string()),
        ("problem.f", p.f.to_string()),
        ("problem.f0", p.f0.to_string()),
        ("problem.g", p.g.to_string()),
        ("problem.control", p.control.to_string()),
        ("schedule.eps", list(&h.schedule.eps)),
        ("schedule.sigma", list(&h.schedule.sigma)),
        ("schedule.m", list(&h.schedule.m)),
        ("schedule.tau", list(&h.schedule.tau)),
        ("homotopy.theta_rel", h.theta_rel.to_string()),
        ("homotopy.max_insertions", h.max_insertions.to_string()),
        ("homotopy.n_probes", h.n_probes.to_string()),
        ("inner.strategy", strategy_name(h.inner.strategy).into()),
        ("inner.max_sweeps", h.inner.max_sweeps.to_string()),
        ("inner.tol", h.inner.tol.to_string()),
        ("inner.armijo_c", h.inner.armijo_c.to_string()),
        ("inner.backtrack", h.inner.backtrack.to_string()),
        ("inner.max_halvings", h.inner.max_halvings.to_string()),
        ("inner.u_mode", u_mode_name(h.inner.u_mode).into()),
        ("inner.golden_iters", h.inner.golden_iters.to_string()),
        ("inner.n_probes", h.inner.n_probes.to_string()),
        ("inner.probe_seed", h.inner.probe_seed.to_string()),
        ("inner.cg_iters", h.inner.cg_iters.to_string()),
        ("newton.max_iter", h.newton.max_iter.to_string()),
        ("newton.atol", h.newton.atol.to_string()),
        ("newton.rtol", h.newton.rtol.to_string()),
        ("newton.armijo_c", h.newton.armijo_c.to_string()),
        ("newton.backtrack", h.newton.backtrack.to_string()),
        ("newton.max_halvings", h.newton.max_halvings.to_string()),
        ("bootstrap.random_starts", h.bootstrap.random_starts.to_string()),
        ("bootstrap.max_iter", h.bootstrap.max_iter.to_string()),
        ("bootstrap.tol", h.bootstrap.tol.to_string()),
        ("bootstrap.seed", h.bootstrap.seed.to_string()),
    ]
}

fn set(c: &mut RunConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    let h = &mut c.homotopy;
    let p = &mut c.problem;
    match key {
        "instance" => {}
        "n" => c.n = num(v)?,
        "eps" => c.eps = num(v)?,
        "seed" => c.seed = num(v)?,
        "out" => c.out = PathBuf::from(v),
        "problem.name" => p.name = v.to_string(),
        "problem.domain" => p.domain = parse_domain(v)?,
        "problem.p" => {
            p.p = num(v)?;
            if !(p.p > 1.0 && p.p < 2.0) {
                return Err("p must lie in (1,2)".into());
            }
        }
        "problem.a" => p.a = num(v)?,
        "problem.b" => p.b = num(v)?,
        "problem.f" => p.f = v.parse().map_err(invalid)?,
        "problem.f0" => p.f0 = v.parse().map_err(invalid)?,
        "problem.g" => p.g = v.parse().map_err(invalid)?,
        "problem.control" => p.control = num(v)?,
        "schedule.eps" => h.schedule.eps = parse_list(v)?,
        "schedule.sigma" => h.schedule.sigma = parse_list(v)?,
        "schedule.m" => h.schedule.m = parse_list(v)?,
        "schedule.tau" => h.schedule.tau = parse_list(v)?,
        "homotopy.theta_rel" => h.theta_rel = num(v)?,
        "homotopy.max_insertions" => h.max_insertions = num(v)?,
        "homotopy.n_probes" => h.n_probes = num(v)?,
        "inner.strategy" => {
            h.inner.strategy = match v {
                "alternating" => InnerStrategy::Alternating,
                "projected_gradient" => InnerStrategy::ProjectedGradient,
                "newton" => InnerStrategy::Newton,
                _ => return Err(format!("unknown strategy `{v}` (alternating, projected_gradient, newton)")),
            }
        }
        "inner.max_sweeps" => h.inner.max_sweeps = num(v)?,
        "inner.tol" => h.inner.tol = num(v)?,
        "inner.armijo_c" => h.inner.armijo_c = num(v)?,
        "inner.backtrack" => h.inner.backtrack = num(v)?,
        "inner.max_halvings" => h.inner.max_halvings = num(v)?,
        "inner.u_mode" => {
            h.inner.u_mode = match v {
                "closed_form" => UMaximizerMode::ClosedForm,
                "golden_section" => UMaximizerMode::GoldenSection,
                _ => return Err(format!("unknown u_mode `{v}` (closed_form, golden_section)")),
            }
        }
        "inner.golden_iters" => h.inner.golden_iters = num(v)?,
        "inner.n_probes" => h.inner.n_probes = num(v)?,
        "inner.probe_seed" => h.inner.probe_seed = num(v)?,
        "inner.cg_iters" => h.inner.cg_iters = num(v)?,
        "newton.max_iter" => h.newton.max_iter = num(v)?,
        "newton.atol" => h.newton.atol = num(v)?,
        "newton.rtol" => h.newton.rtol = num(v)?,
        "newton.armijo_c" => h.newton.armijo_c = num(v)?,
        "newton.backtrack" => h.newton.backtrack = num(v)?,
        "newton.max_halvings" => h.newton.max_halvings = num(v)?,
        "bootstrap.random_starts" => h.bootstrap.random_starts = num(v)?,
        "bootstrap.max_iter" => h.bootstrap.max_iter = num(v)?,
        "bootstrap.tol" => h.bootstrap.tol = num(v)?,
        "bootstrap.seed" => h.bootstrap.seed = num(v)?,
        _ => return Err("unknown key".into()),
    }
    Ok(())
}

/// Keys required when no `instance` is named.
const REQUIRED_WITHOUT_INSTANCE: [&str; 5] = ["problem.domain", "problem.p", "problem.a", "problem.b", "problem.f"];

/// Parses configuration text; errors name the offending line and key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut items: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {lineno}: expected `key = value`, got `{line}`")));
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if let Some((prev, _)) = items.get(&k) {
            return Err(Error::Config(format!("line {lineno}: key `{k}` already set on line {prev}")));
        }
        items.insert(k, (lineno, v));
    }
    let mut cfg = match items.get("instance").filter(|(_, v)| !v.is_empty()) {
        Some((lineno, name)) => {
            RunConfig::for_instance(name).map_err(|e| Error::Config(format!("line {lineno}: key `instance`: {e}")))?
        }
        None => {
            for k in REQUIRED_WITHOUT_INSTANCE {
                if !items.contains_key(k) {
                    return Err(Error::Config(format!("key `{k}` is required when no instance is named")));
                }
            }
            let mut c = RunConfig::for_instance("closed_form_1d")?;
            c.instance = None;
            c.problem.name = "custom".into();
            c.problem.f0 = crate::library::F0Expr::Zero;
            c.problem.g = crate::library::GExpr::Linear(1.0);
            c.problem.control = f64::NAN;
            c.n = 64;
            c
        }
    };
    let mut ordered: Vec<_> = items.iter().collect();
    ordered.sort_by_key(|(_, (l, _))| *l);
    for (k, (lineno, v)) in ordered {
        set(&mut cfg, k, v).map_err(|e| Error::Config(format!("line {lineno}: key `{k}`: {e}")))?;
    }
    if cfg.problem.control.is_nan() {
        cfg.problem.control = cfg.problem.a;
    }
    let line_of = |k: &str| items.get(k).map(|(l, _)| *l);
    if !(cfg.problem.a < cfg.problem.b) {
        let at = line_of("problem.b").or(line_of("problem.a"));
        return Err(Error::Config(match at {
            Some(l) => format!("line {l}: key `problem.b`: control bounds need a < b"),
            None => "control bounds need a < b".into(),
        }));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config<P: AsRef<Path>>(path: P) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
    parse_config(&text)
}

/// Renders every key; [`parse_config`] reads the output back unchanged.
pub fn write_config(c: &RunConfig) -> String {
    let mut out = String::new();
    for (k, v) in entries(c) {
        if k == "instance" && v.is_empty() {
            continue;
        }
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_config(self))
    }
}

/// Names of every recognized key.
pub fn known_keys() -> Vec<&'static str> {
    entries(&RunConfig::for_instance("closed_form_1d").expect("catalog instance")).into_iter().map(|(k, _)| k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("instance = bangbang_sec6\n").unwrap();
        assert_eq!(c, RunConfig::for_instance("bangbang_sec6").unwrap());
    }

    #[test]
    fn rejects_p_out_of_range() {
        let e = parse_config("instance = closed_form_1d\nproblem.p = 2.5\n").unwrap_err().to_string();
        assert!(e.contains("p must lie in (1,2)"), "{e}");
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn rejects_inverted_bounds() {
        let e = parse_config("instance = closed_form_1d\nproblem.a = 3\nproblem.b = 1\n").unwrap_err().to_string();
        assert!(e.contains("a < b"), "{e}");
    }

    #[test]
    fn unknown_and_repeated_keys() {
        let e = parse_config("instance = closed_form_1d\nsolver.speed = 3\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("solver.speed") && e.contains("unknown key"), "{e}");
        let e = parse_config("n = 3\nn = 4\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("line 1"), "{e}");
        assert!(parse_config("just words\n").is_err());
    }

    #[test]
    fn inline_problem_without_instance() {
        let text = "problem.domain = interval(0,2)\nproblem.p = 1.4\nproblem.a = -1\nproblem.b = 1\nproblem.f = arctan(1,2,0)\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.instance, None);
        assert_eq!(c.problem.control, -1.0);
        assert_eq!(parse_config(&write_config(&c)).unwrap(), c);
        assert!(parse_config("problem.p = 1.4\n").is_err());
    }

    #[test]
    fn write_lists_every_key() {
        let c = RunConfig::for_instance("multisolution").unwrap();
        let text = write_config(&c);
        assert_eq!(text.lines().count(), known_keys().len());
        assert_eq!(parse_config(&text).unwrap(), c);
    }
}
