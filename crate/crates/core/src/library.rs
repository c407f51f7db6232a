//! Builtin problem instances and the small expression catalog used to
//! describe nonlinearities and costs in configuration files.

use crate::discretization::DomainSpec;
use crate::error::{Error, Result};
use crate::objective::{ControlCost, ProblemSpec, RunningCost};
use crate::scalar::{lit, Real};
use crate::state::{GrowthSpec, Nonlinearity};
use std::fmt;
use std::str::FromStr;

/// Nonlinearity `f(y)` of the state equation.
#[derive(Clone, Debug, PartialEq)]
pub enum FExpr {
    /// `Σ c_k y^k`
    Poly(Vec<f64>),
    /// `offset + scale · arctan(rate · y)`
    Arctan { scale: f64, rate: f64, offset: f64 },
    /// `slope · y + intercept`
    Affine { slope: f64, intercept: f64 },
}

/// Running cost `f⁰(y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum F0Expr {
    Zero,
    /// `Σ c_k y^k`
    Poly(Vec<f64>),
    /// `weight · (y - target)²`
    Track { target: f64, weight: f64 },
}

/// Control cost `g(u)`.
#[derive(Clone, Debug, PartialEq)]
pub enum GExpr {
    Linear(f64),
    Quadratic { alpha: f64, beta: f64 },
}

fn poly_eval<T: Real>(c: &[T], y: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &ck| acc * y + ck)
}

fn poly_deriv<T: Real>(c: &[T], y: T) -> T {
    c.iter().enumerate().skip(1).rev().fold(T::zero(), |acc, (k, &ck)| acc * y + ck * T::from_usize(k).unwrap())
}

impl FExpr {
    pub fn build<T: Real>(&self) -> Nonlinearity<T> {
        let label = self.to_string();
        match self {
            FExpr::Poly(c) => {
                let c: Vec<T> = c.iter().map(|&v| lit(v)).collect();
                let d = c.clone();
                Nonlinearity::new(label, move |y| poly_eval(&c, y), move |y| poly_deriv(&d, y))
            }
            &FExpr::Arctan { scale, rate, offset } => {
                let (s, r, o) = (lit::<T>(scale), lit::<T>(rate), lit::<T>(offset));
                Nonlinearity::new(label, move |y: T| o + s * (r * y).atan(), move |y: T| s * r / (T::one() + r * r * y * y))
            }
            &FExpr::Affine { slope, intercept } => {
                let (s, i) = (lit::<T>(slope), lit::<T>(intercept));
                Nonlinearity::new(label, move |y| s * y + i, move |_| s)
            }
        }
    }

    /// A growth bound `|f(y)| <= C(1 + |y|^{r-1})` valid for the expression.
    pub fn growth<T: Real>(&self) -> GrowthSpec<T> {
        let (c, r) = match self {
            FExpr::Poly(c) => {
                let deg = c.iter().rposition(|&v| v != 0.0).unwrap_or(0);
                (c.iter().map(|v| v.abs()).sum::<f64>(), deg as f64 + 1.0)
            }
            FExpr::Arctan { scale, offset, .. } => (offset.abs() + scale.abs() * std::f64::consts::FRAC_PI_2, 1.0),
            FExpr::Affine { slope, intercept } => (slope.abs().max(intercept.abs()), 2.0),
        };
        GrowthSpec { c: lit(if c > 0.0 { c } else { 1.0 }), r: lit(r) }
    }
}

impl F0Expr {
    pub fn build<T: Real>(&self) -> RunningCost<T> {
        match self {
            F0Expr::Zero => RunningCost::zero(),
            F0Expr::Poly(c) => {
                let c: Vec<T> = c.iter().map(|&v| lit(v)).collect();
                let d = c.clone();
                RunningCost::new(self.to_string(), move |_, y| poly_eval(&c, y), move |_, y| poly_deriv(&d, y))
            }
            &F0Expr::Track { target, weight } => RunningCost::tracking(lit(target), lit(weight)),
        }
    }
}

impl GExpr {
    pub fn build<T: Real>(&self) -> ControlCost<T> {
        match *self {
            GExpr::Linear(c) => ControlCost::Linear { c: lit(c) },
            GExpr::Quadratic { alpha, beta } => ControlCost::Quadratic { alpha: lit(alpha), beta: lit(beta) },
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for FExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FExpr::Poly(c) => write!(f, "poly({})", join(c)),
            FExpr::Arctan { scale, rate, offset } => write!(f, "arctan({scale},{rate},{offset})"),
            FExpr::Affine { slope, intercept } => write!(f, "affine({slope},{intercept})"),
        }
    }
}

impl fmt::Display for F0Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            F0Expr::Zero => write!(f, "zero"),
            F0Expr::Poly(c) => write!(f, "poly({})", join(c)),
            F0Expr::Track { target, weight } => write!(f, "track({target},{weight})"),
        }
    }
}

impl fmt::Display for GExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GExpr::Linear(c) => write!(f, "linear({c})"),
            GExpr::Quadratic { alpha, beta } => write!(f, "quadratic({alpha},{beta})"),
        }
    }
}

/// Splits `name(a,b,...)` into the name and its numeric arguments.
pub(crate) fn parse_call(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    let Some(open) = s.find('(') else {
        return Ok((s.to_string(), vec![]));
    };
    if !s.ends_with(')') {
        return Err(Error::Config(format!("malformed expression `{s}`")));
    }
    let name = s[..open].trim().to_string();
    let inner = &s[open + 1..s.len() - 1];
    let args = if inner.trim().is_empty() {
        vec![]
    } else {
        inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{}` in `{s}`", a.trim()))))
            .collect::<Result<Vec<_>>>()?
    };
    if args.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config(format!("non-finite argument in `{s}`")));
    }
    Ok((name, args))
}

fn arity(s: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(Error::Config(format!("`{s}` expects {n} arguments, got {}", args.len())))
    }
}

impl FromStr for FExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        match name.as_str() {
            "poly" if !a.is_empty() => Ok(FExpr::Poly(a)),
            "arctan" => {
                arity(s, &a, 3)?;
                Ok(FExpr::Arctan { scale: a[0], rate: a[1], offset: a[2] })
            }
            "affine" => {
                arity(s, &a, 2)?;
                Ok(FExpr::Affine { slope: a[0], intercept: a[1] })
            }
            _ => Err(Error::Config(format!("unknown nonlinearity `{s}` (expected poly, arctan or affine)"))),
        }
    }
}

impl FromStr for F0Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        match name.as_str() {
            "zero" => {
                arity(s, &a, 0)?;
                Ok(F0Expr::Zero)
            }
            "poly" if !a.is_empty() => Ok(F0Expr::Poly(a)),
            "track" => {
                arity(s, &a, 2)?;
                Ok(F0Expr::Track { target: a[0], weight: a[1] })
            }
            _ => Err(Error::Config(format!("unknown running cost `{s}` (expected zero, poly or track)"))),
        }
    }
}

impl FromStr for GExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        match name.as_str() {
            "linear" => {
                arity(s, &a, 1)?;
                Ok(GExpr::Linear(a[0]))
            }
            "quadratic" => {
                arity(s, &a, 2)?;
                if a[0] < 0.0 {
                    return Err(Error::Config(format!("`{s}`: quadratic control cost needs alpha >= 0")));
                }
                Ok(GExpr::Quadratic { alpha: a[0], beta: a[1] })
            }
            _ => Err(Error::Config(format!("unknown control cost `{s}` (expected linear or quadratic)"))),
        }
    }
}

/// Serializable description of a control problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemData {
    pub name: String,
    pub domain: DomainSpec<f64>,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub f: FExpr,
    pub f0: F0Expr,
    pub g: GExpr,
    /// Constant control used by plain state solves.
    pub control: f64,
}

impl ProblemData {
    pub fn build<T: Real>(&self) -> Result<ProblemSpec<T>> {
        let domain = match self.domain {
            DomainSpec::Interval { x0, x1 } => DomainSpec::Interval { x0: lit(x0), x1: lit(x1) },
            DomainSpec::Rectangle { x0, x1, y0, y1 } => {
                DomainSpec::Rectangle { x0: lit(x0), x1: lit(x1), y0: lit(y0), y1: lit(y1) }
            }
        };
        let spec = ProblemSpec {
            name: self.name.clone(),
            domain,
            p: lit(self.p),
            a: lit(self.a),
            b: lit(self.b),
            f: self.f.build(),
            growth: self.f.growth(),
            f0: self.f0.build(),
            g: self.g.build(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Catalog entry.
#[derive(Clone, Debug)]
pub struct LibraryInstance {
    pub name: &'static str,
    pub summary: &'static str,
    /// Structural assumptions the instance satisfies.
    pub assumptions: &'static [&'static str],
    pub expected: &'static str,
    pub default_n: usize,
    pub data: ProblemData,
}

/// Amplitude `λ` of `f(y) = λ arctan(κ y)` in the multisolution instance.
pub const MULTISOLUTION_LAMBDA: f64 = 4.0;
/// Rate `κ` of `f(y) = λ arctan(κ y)` in the multisolution instance.
pub const MULTISOLUTION_KAPPA: f64 = 10.0;

fn unit() -> DomainSpec<f64> {
    DomainSpec::unit_interval()
}

fn closed_form_1d() -> LibraryInstance {
    LibraryInstance {
        name: "closed_form_1d",
        summary: "p = 3/2, f = 0, unit load on (0,1); exact maximum 1/24",
        assumptions: &["bounded box", "f = 0 (monotone)", "convex control cost"],
        expected: "state maximum 1/24 attained at x = 1/2",
        default_n: 512,
        data: ProblemData {
            name: "closed_form_1d".into(),
            domain: unit(),
            p: 1.5,
            a: 0.0,
            b: 2.0,
            f: FExpr::Poly(vec![0.0]),
            f0: F0Expr::Zero,
            g: GExpr::Linear(1.0),
            control: 1.0,
        },
    }
}

fn monotone_decoupled() -> LibraryInstance {
    LibraryInstance {
        name: "monotone_decoupled",
        summary: "f(y) = -y, no running cost, g(u) = u on [0.5, 1.5]",
        assumptions: &["bounded box", "f' <= 0 (well-posed state)", "bounded running cost", "linear control cost"],
        expected: "unique optimum u = a = 0.5, adjoint zero, mu = 1",
        default_n: 256,
        data: ProblemData {
            name: "monotone_decoupled".into(),
            domain: unit(),
            p: 1.5,
            a: 0.5,
            b: 1.5,
            f: FExpr::Affine { slope: -1.0, intercept: 0.0 },
            f0: F0Expr::Zero,
            g: GExpr::Linear(1.0),
            control: 0.5,
        },
    }
}

fn multisolution() -> LibraryInstance {
    LibraryInstance {
        name: "multisolution",
        summary: "f(y) = 4 arctan(10 y), zero control: solutions 0 and a symmetric pair",
        assumptions: &["bounded box", "bounded nonmonotone f (growth r = 1)", "convex control cost"],
        expected: "zero-control state equation has at least the solutions 0, y+ and -y+",
        default_n: 128,
        data: ProblemData {
            name: "multisolution".into(),
            domain: unit(),
            p: 1.5,
            a: -1.0,
            b: 1.0,
            f: FExpr::Arctan { scale: MULTISOLUTION_LAMBDA, rate: MULTISOLUTION_KAPPA, offset: 0.0 },
            f0: F0Expr::Track { target: 0.0, weight: 1.0 },
            g: GExpr::Quadratic { alpha: 1.0, beta: 0.0 },
            control: 0.0,
        },
    }
}

fn bangbang_sec6() -> LibraryInstance {
    LibraryInstance {
        name: "bangbang_sec6",
        summary: "f(y) = 1 + arctan(y)/2 > 0, f0 = 40 (y - 0.3)^2, g(u) = u on [0, 2]",
        assumptions: &[
            "f bounded and f(y) + a > 0",
            "running cost depends on y only",
            "{f' = f0_y} is finite",
            "g(u) = u",
        ],
        expected: "optimal control is bang-bang: u in {0, 2} almost everywhere",
        default_n: 256,
        data: ProblemData {
            name: "bangbang_sec6".into(),
            domain: unit(),
            p: 1.5,
            a: 0.0,
            b: 2.0,
            f: FExpr::Arctan { scale: 0.5, rate: 1.0, offset: 1.0 },
            f0: F0Expr::Track { target: 0.3, weight: 40.0 },
            g: GExpr::Linear(1.0),
            control: 1.0,
        },
    }
}

fn radial_degenerate() -> LibraryInstance {
    LibraryInstance {
        name: "radial_degenerate",
        summary: "square (-1,1)^2, f = 0, symmetric data; the state has a critical point at the center",
        assumptions: &["bounded box", "f = 0 (monotone)", "bounded running cost", "linear control cost"],
        expected: "gradient of the adjoint vanishes near the center as eps decreases",
        default_n: 24,
        data: ProblemData {
            name: "radial_degenerate".into(),
            domain: DomainSpec::Rectangle { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 },
            p: 1.5,
            a: 0.0,
            b: 2.0,
            f: FExpr::Poly(vec![0.0]),
            f0: F0Expr::Track { target: 0.5, weight: 10.0 },
            g: GExpr::Linear(1.0),
            control: 1.0,
        },
    }
}

/// Quadratic tracking problem with `f = 0`; the frozen-state inner
/// objective is strictly convex.
pub fn quadratic_tracking() -> LibraryInstance {
    LibraryInstance {
        name: "quadratic_tracking",
        summary: "f = 0, f0 = (y - 0.05)^2, g(u) = u^2/50 on [-1, 2]",
        assumptions: &["bounded box", "f = 0 (monotone)", "strictly convex control cost"],
        expected: "alternating and projected-gradient inner solvers reach the same objective",
        default_n: 64,
        data: ProblemData {
            name: "quadratic_tracking".into(),
            domain: unit(),
            p: 1.5,
            a: -1.0,
            b: 2.0,
            f: FExpr::Poly(vec![0.0]),
            f0: F0Expr::Track { target: 0.05, weight: 1.0 },
            g: GExpr::Quadratic { alpha: 0.04, beta: 0.0 },
            control: 0.5,
        },
    }
}

/// The listed catalog.
pub fn catalog() -> Vec<LibraryInstance> {
    vec![closed_form_1d(), monotone_decoupled(), multisolution(), bangbang_sec6(), radial_degenerate()]
}

/// Looks up a catalog entry (or the auxiliary quadratic-tracking problem).
pub fn instance(name: &str) -> Result<LibraryInstance> {
    if name == "quadratic_tracking" {
        return Ok(quadratic_tracking());
    }
    catalog().into_iter().find(|i| i.name == name).ok_or_else(|| Error::UnknownInstance(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_five_valid_entries() {
        let c = catalog();
        assert_eq!(c.len(), 5);
        for inst in c.iter().chain(std::iter::once(&quadratic_tracking())) {
            assert!(inst.data.build::<f64>().is_ok(), "{}", inst.name);
            assert!(inst.data.build::<f32>().is_ok(), "{}", inst.name);
        }
        assert!(matches!(instance("nope"), Err(Error::UnknownInstance(_))));
    }

    #[test]
    fn expression_round_trip() {
        for s in ["poly(1,-2.5,3)", "arctan(2,10,0)", "affine(-1,0.5)"] {
            assert_eq!(s.parse::<FExpr>().unwrap().to_string(), s);
        }
        for s in ["zero", "poly(0,0,1)", "track(0.3,40)"] {
            assert_eq!(s.parse::<F0Expr>().unwrap().to_string(), s);
        }
        for s in ["linear(1)", "quadratic(0.04,0)"] {
            assert_eq!(s.parse::<GExpr>().unwrap().to_string(), s);
        }
        assert!("arctan(1,2)".parse::<FExpr>().is_err());
        assert!("exp(1)".parse::<FExpr>().is_err());
        assert!("quadratic(-1,0)".parse::<GExpr>().is_err());
    }

    #[test]
    fn expressions_evaluate() {
        let f = FExpr::Poly(vec![1.0, -2.0, 3.0]).build::<f64>();
        assert_eq!(f.eval(2.0), 1.0 - 4.0 + 12.0);
        assert_eq!(f.deriv(2.0), -2.0 + 12.0);
        let a = FExpr::Arctan { scale: 2.0, rate: 10.0, offset: 1.0 }.build::<f64>();
        assert!((a.eval(0.1) - (1.0 + 2.0 * 1.0f64.atan())).abs() < 1e-15);
        assert!((a.deriv(0.0) - 20.0).abs() < 1e-15);
        let g = FExpr::Arctan { scale: 2.0, rate: 10.0, offset: 0.0 }.growth::<f64>();
        assert!((g.c - std::f64::consts::PI).abs() < 1e-15 && g.r == 1.0);
    }
}
