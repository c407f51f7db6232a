//! Problem data, cost functionals, Hamiltonians and adjoint gradients.

use crate::adjoint::{solve_adjoint, AdjointSource};
use crate::discretization::{build_grid, CellField, DomainSpec, Field, Grid, Point};
use crate::error::{Error, Result};
use crate::scalar::{clip, lit, Real};
use crate::state::{GrowthSpec, NewtonConfig, Nonlinearity, PLaplacian, SolveReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

type PointFn<T> = Arc<dyn Fn(Point<T>, T) -> T + Send + Sync>;
type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Running cost `f⁰(x, y)` with its `y`-derivative.
#[derive(Clone)]
pub struct RunningCost<T> {
    label: String,
    f0: PointFn<T>,
    dy: PointFn<T>,
}

impl<T: fmt::Debug> fmt::Debug for RunningCost<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RunningCost({})", self.label)
    }
}

impl<T: Real> RunningCost<T> {
    pub fn new<F, D>(label: impl Into<String>, f0: F, dy: D) -> Self
    where
        F: Fn(Point<T>, T) -> T + Send + Sync + 'static,
        D: Fn(Point<T>, T) -> T + Send + Sync + 'static,
    {
        RunningCost { label: label.into(), f0: Arc::new(f0), dy: Arc::new(dy) }
    }

    pub fn zero() -> Self {
        RunningCost::new("0", |_, _| T::zero(), |_, _| T::zero())
    }

    /// `w (y - c)²`
    pub fn tracking(target: T, weight: T) -> Self {
        let two = lit::<T>(2.0);
        RunningCost::new(
            format!("{weight}*(y-{target})^2"),
            move |_, y| weight * (y - target) * (y - target),
            move |_, y| two * weight * (y - target),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: Point<T>, y: T) -> T {
        (self.f0)(x, y)
    }

    #[inline]
    pub fn dy(&self, x: Point<T>, y: T) -> T {
        (self.dy)(x, y)
    }
}

/// Convex control cost `g(u)`.
#[derive(Clone)]
pub enum ControlCost<T> {
    /// `c u`
    Linear { c: T },
    /// `α u²/2 + β u`, `α >= 0`
    Quadratic { alpha: T, beta: T },
    /// Arbitrary convex cost; pointwise maximization by golden section.
    Custom { label: String, g: ScalarFn<T>, dg: Option<ScalarFn<T>> },
}

impl<T: fmt::Debug> fmt::Debug for ControlCost<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlCost::Linear { c } => write!(f, "Linear({c:?})"),
            ControlCost::Quadratic { alpha, beta } => write!(f, "Quadratic({alpha:?}, {beta:?})"),
            ControlCost::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// Outcome of a pointwise control maximization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maximizer<T> {
    pub u: T,
    /// The objective was flat in `u` and the midpoint was chosen.
    pub tie: bool,
}

impl<T: Real> ControlCost<T> {
    pub fn eval(&self, u: T) -> T {
        match self {
            ControlCost::Linear { c } => *c * u,
            ControlCost::Quadratic { alpha, beta } => *alpha * u * u * lit(0.5) + *beta * u,
            ControlCost::Custom { g, .. } => g(u),
        }
    }

    /// `g'(u)`; a custom cost without derivative uses a central difference
    /// of width `h`.
    pub fn deriv(&self, u: T, h: T) -> T {
        match self {
            ControlCost::Linear { c } => *c,
            ControlCost::Quadratic { alpha, beta } => *alpha * u + *beta,
            ControlCost::Custom { g, dg, .. } => match dg {
                Some(d) => d(u),
                None => (g(u + h) - g(u - h)) / (h + h),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            ControlCost::Linear { c } => format!("linear({c})"),
            ControlCost::Quadratic { alpha, beta } => format!("quadratic({alpha}, {beta})"),
            ControlCost::Custom { label, .. } => label.clone(),
        }
    }

    /// Maximizes `ψ u - μ g(u) - κ (u - w)²` over `[a, b]`, where
    /// `κ w = τ ū + σ u_c` and `κ = τ + σ` collect the proximal terms.
    #[allow(clippy::too_many_arguments)]
    pub fn argmax(&self, psi: T, mu: T, kappa: T, center: T, a: T, b: T, golden_iters: usize) -> Maximizer<T> {
        let two = lit::<T>(2.0);
        match self {
            ControlCost::Linear { c } => {
                let slope = psi - mu * *c;
                if kappa > T::zero() {
                    let u = clip(center + slope / (two * kappa), a, b);
                    Maximizer { u, tie: false }
                } else if slope > T::zero() {
                    Maximizer { u: b, tie: false }
                } else if slope < T::zero() {
                    Maximizer { u: a, tie: false }
                } else {
                    Maximizer { u: (a + b) * lit(0.5), tie: true }
                }
            }
            ControlCost::Quadratic { alpha, beta } => {
                let curv = mu * *alpha + two * kappa;
                let slope = psi - mu * *beta;
                if curv > T::zero() {
                    Maximizer { u: clip((slope + two * kappa * center) / curv, a, b), tie: false }
                } else if slope > T::zero() {
                    Maximizer { u: b, tie: false }
                } else if slope < T::zero() {
                    Maximizer { u: a, tie: false }
                } else {
                    Maximizer { u: (a + b) * lit(0.5), tie: true }
                }
            }
            ControlCost::Custom { g, .. } => {
                let h = |u: T| psi * u - mu * g(u) - kappa * (u - center) * (u - center);
                let u = golden_section_max(h, a, b, golden_iters.max(30));
                // the interior search never lands exactly on the endpoints
                let best = [a, u, b].into_iter().fold(u, |best, c| if h(c) > h(best) { c } else { best });
                Maximizer { u: best, tie: false }
            }
        }
    }
}

/// Maximum of a unimodal function on `[a, b]`.
pub fn golden_section_max<T: Real, F: Fn(T) -> T>(h: F, a: T, b: T, iters: usize) -> T {
    let r = (lit::<T>(5.0).sqrt() - T::one()) * lit(0.5);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut h1, mut h2) = (h(x1), h(x2));
    for _ in 0..iters {
        if h1 < h2 {
            lo = x1;
            x1 = x2;
            h1 = h2;
            x2 = lo + r * (hi - lo);
            h2 = h(x2);
        } else {
            hi = x2;
            x2 = x1;
            h2 = h1;
            x1 = hi - r * (hi - lo);
            h1 = h(x1);
        }
    }
    (lo + hi) * lit(0.5)
}

/// Data of one control problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec<T> {
    pub name: String,
    pub domain: DomainSpec<T>,
    pub p: T,
    pub a: T,
    pub b: T,
    pub f: Nonlinearity<T>,
    pub growth: GrowthSpec<T>,
    pub f0: RunningCost<T>,
    pub g: ControlCost<T>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > T::one() && self.p < lit(2.0)) {
            return Err(Error::InvalidParameter("p must lie in (1,2)".into()));
        }
        if !(self.a < self.b) {
            return Err(Error::InvalidParameter(format!("control bounds need a < b, got a = {}, b = {}", self.a, self.b)));
        }
        self.domain.validate()?;
        self.growth.validate(self.domain.dim(), self.p)?;
        let samples: Vec<T> = (0..=200).map(|i| lit::<T>(-50.0 + 0.5 * i as f64)).collect();
        self.growth.check(&self.f, &samples)?;
        if samples.iter().any(|&y| !self.f.eval(y).is_finite() || !self.f.deriv(y).is_finite()) {
            return Err(Error::InvalidParameter("nonlinearity is not finite on [-50, 50]".into()));
        }
        self.check_control_convexity()?;
        self.check_running_cost()
    }

    /// Midpoint convexity of `g` on random pairs from `[a, b]` at 100
    /// sample points of the domain (the cost here does not depend on `x`).
    fn check_control_convexity(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let (a, b) = (self.a.to_f64_lossy(), self.b.to_f64_lossy());
        for _ in 0..50 {
            let u1 = lit::<T>(rng.gen_range(a..=b));
            let u2 = lit::<T>(rng.gen_range(a..=b));
            let mid = self.g.eval((u1 + u2) * lit(0.5));
            let avg = (self.g.eval(u1) + self.g.eval(u2)) * lit(0.5);
            let scale = T::one() + avg.abs();
            if mid > avg + lit::<T>(1e-12) * scale {
                return Err(Error::InvalidParameter(format!("control cost {} is not convex on [a,b]", self.g.label())));
            }
        }
        Ok(())
    }

    fn check_running_cost(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0xf0);
        let (lo, hi) = match self.domain {
            DomainSpec::Interval { x0, x1 } => ([x0, T::zero()], [x1, T::zero()]),
            DomainSpec::Rectangle { x0, x1, y0, y1 } => ([x0, y0], [x1, y1]),
        };
        for _ in 0..100 {
            let t: f64 = rng.gen();
            let s: f64 = rng.gen();
            let x = [lo[0] + (hi[0] - lo[0]) * lit(t), lo[1] + (hi[1] - lo[1]) * lit(s)];
            let y = lit::<T>(rng.gen_range(-10.0..10.0));
            if !self.f0.eval(x, y).is_finite() || !self.f0.dy(x, y).is_finite() {
                return Err(Error::InvalidParameter("running cost is not finite on bounded states".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self, n: usize) -> Result<Arc<Grid<T>>> {
        build_grid(self.domain.clone(), n)
    }

    pub fn operator(&self, grid: &Arc<Grid<T>>) -> Result<PLaplacian<T>> {
        PLaplacian::new(grid, self.p)
    }

    /// `f(y)` at the quadrature points.
    pub fn f_at_quadrature(&self, y: &Field<T>) -> CellField<T> {
        CellField::from_values(y.grid(), y.values_at_quadrature().into_iter().map(|v| self.f.eval(v)).collect())
    }

    /// Finite-difference width for control-cost derivatives.
    pub fn derivative_step(&self) -> T {
        lit::<T>(1e-6) * (self.b - self.a)
    }
}

/// Controls `(v, u)` at the quadrature points.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPair<T> {
    pub v: CellField<T>,
    pub u: CellField<T>,
}

impl<T: Real> ControlPair<T> {
    pub fn new(v: CellField<T>, u: CellField<T>) -> Self {
        ControlPair { v, u }
    }

    /// `v = f(ȳ)`, `u = ū`.
    pub fn at_reference(reference: &Reference<T>) -> Self {
        ControlPair { v: reference.fybar.clone(), u: reference.ubar.clone() }
    }

    pub fn source(&self) -> CellField<T> {
        self.v.axpy(T::one(), &self.u)
    }

    /// Exact box feasibility against the reference `f(ȳ)`.
    pub fn is_feasible(&self, spec: &ProblemSpec<T>, fybar: &CellField<T>) -> bool {
        let u_ok = self.u.values().iter().all(|&u| u >= spec.a && u <= spec.b);
        let v_ok = self
            .v
            .values()
            .iter()
            .zip(fybar.values())
            .all(|(&v, &fr)| v >= fr - T::one() && v <= fr + T::one());
        u_ok && v_ok
    }

    /// `sqrt(|v - v'|² + |u - u'|²)` in `L²`.
    pub fn distance(&self, other: &ControlPair<T>) -> T {
        let dv = self.v.sub(&other.v).l2_norm();
        let du = self.u.sub(&other.u).l2_norm();
        (dv * dv + du * du).sqrt()
    }
}

/// Reference optimal pair `(ȳ, ū)` the penalization is centered at.
#[derive(Clone, Debug)]
pub struct Reference<T> {
    pub ybar: Field<T>,
    pub ubar: CellField<T>,
    pub fybar: CellField<T>,
}

impl<T: Real> Reference<T> {
    pub fn new(spec: &ProblemSpec<T>, ybar: Field<T>, ubar: CellField<T>) -> Self {
        let fybar = spec.f_at_quadrature(&ybar);
        Reference { ybar, ubar, fybar }
    }
}

/// Penalty weights plus reference data and proximal centers.
#[derive(Clone, Debug)]
pub struct PenaltyParams<T> {
    pub eps: T,
    pub m: T,
    pub tau: T,
    pub sigma: T,
    pub ubar: CellField<T>,
    pub fybar: CellField<T>,
    pub vc: CellField<T>,
    pub uc: CellField<T>,
}

/// Pointwise slice of [`PenaltyParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalParams<T> {
    pub m: T,
    pub tau: T,
    pub sigma: T,
    pub fybar: T,
    pub ubar: T,
    pub vc: T,
    pub uc: T,
}

impl<T: Real> LocalParams<T> {
    pub fn weights(m: T, tau: T, sigma: T) -> Self {
        let z = T::zero();
        LocalParams { m, tau, sigma, fybar: z, ubar: z, vc: z, uc: z }
    }
}

impl<T: Real> PenaltyParams<T> {
    /// Proximal centers start at the reference pair.
    pub fn new(reference: &Reference<T>, eps: T, m: T, tau: T, sigma: T) -> Result<Self> {
        let p = PenaltyParams {
            eps,
            m,
            tau,
            sigma,
            ubar: reference.ubar.clone(),
            fybar: reference.fybar.clone(),
            vc: reference.fybar.clone(),
            uc: reference.ubar.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_centers(mut self, centers: &ControlPair<T>) -> Self {
        self.vc = centers.v.clone();
        self.uc = centers.u.clone();
        self
    }

    pub fn with_weights(mut self, eps: T, m: T, tau: T, sigma: T) -> Result<Self> {
        self.eps = eps;
        self.m = m;
        self.tau = tau;
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > T::zero() && self.eps <= T::one()) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0,1], got {}", self.eps)));
        }
        if !(self.tau >= T::zero() && self.tau < T::one()) {
            return Err(Error::InvalidParameter(format!("tau must lie in [0,1), got {}", self.tau)));
        }
        if !(self.m >= T::zero() && self.sigma >= T::zero()) {
            return Err(Error::InvalidParameter("m and sigma must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn local(&self, q: usize) -> LocalParams<T> {
        LocalParams {
            m: self.m,
            tau: self.tau,
            sigma: self.sigma,
            fybar: self.fybar.values()[q],
            ubar: self.ubar.values()[q],
            vc: self.vc.values()[q],
            uc: self.uc.values()[q],
        }
    }
}

/// Which Hamiltonian to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HamiltonianMode<T> {
    /// Full regularized Hamiltonian with proximal terms.
    SigmaEps,
    /// Penalized Hamiltonian without proximal terms.
    TauM,
    /// `ψ u - μ g(u)`
    Limit { mu: T },
}

/// `∫ (f⁰(x, y) + g(u))`
pub fn eval_j<T: Real>(spec: &ProblemSpec<T>, y: &Field<T>, u: &CellField<T>) -> T {
    let g = y.grid();
    let yq = y.values_at_quadrature();
    (0..g.n_quad())
        .map(|q| g.quad_weight(q) * (spec.f0.eval(g.quad_point(q), yq[q]) + spec.g.eval(u.values()[q])))
        .sum()
}

fn sq<T: Real>(x: T) -> T {
    x * x
}

fn penalty_terms<T: Real>(spec: &ProblemSpec<T>, pair: &ControlPair<T>, params: &PenaltyParams<T>, y: &Field<T>) -> T {
    let fy = spec.f_at_quadrature(y);
    let g = y.grid();
    (0..g.n_quad())
        .map(|q| {
            let lp = params.local(q);
            let (v, u) = (pair.v.values()[q], pair.u.values()[q]);
            g.quad_weight(q) * (lp.m * sq(v - fy.values()[q]) + lp.tau * sq(u - lp.ubar) + lp.tau * sq(v - lp.fybar))
        })
        .sum()
}

fn proximal_terms<T: Real>(pair: &ControlPair<T>, params: &PenaltyParams<T>) -> T {
    let du = pair.u.sub(&params.uc).l2_norm();
    let dv = pair.v.sub(&params.vc).l2_norm();
    params.sigma * (du * du + dv * dv)
}

/// `J + ∫ (m|v - f(y)|² + τ|u - ū|² + τ|v - f(ȳ)|²)`
pub fn eval_j_tau_m<T: Real>(spec: &ProblemSpec<T>, pair: &ControlPair<T>, params: &PenaltyParams<T>, y: &Field<T>) -> T {
    eval_j(spec, y, &pair.u) + penalty_terms(spec, pair, params, y)
}

/// [`eval_j_tau_m`] plus `σ(|v - v_c|² + |u - u_c|²)`.
pub fn eval_j_sigma_eps<T: Real>(
    spec: &ProblemSpec<T>,
    pair: &ControlPair<T>,
    params: &PenaltyParams<T>,
    y: &Field<T>,
) -> T {
    eval_j_tau_m(spec, pair, params, y) + proximal_terms(pair, params)
}

/// Pointwise Hamiltonian; `fy = f(y(x))`.
#[allow(clippy::too_many_arguments)]
pub fn eval_hamiltonian<T: Real>(
    spec: &ProblemSpec<T>,
    fy: T,
    psi: T,
    v: T,
    u: T,
    lp: &LocalParams<T>,
    mode: HamiltonianMode<T>,
) -> T {
    match mode {
        HamiltonianMode::Limit { mu } => psi * u - mu * spec.g.eval(u),
        HamiltonianMode::TauM | HamiltonianMode::SigmaEps => {
            let mut h = psi * (v + u)
                - spec.g.eval(u)
                - lp.m * sq(v - fy)
                - lp.tau * sq(u - lp.ubar)
                - lp.tau * sq(v - lp.fybar);
            if mode == HamiltonianMode::SigmaEps {
                h = h - lp.sigma * sq(u - lp.uc) - lp.sigma * sq(v - lp.vc);
            }
            h
        }
    }
}

/// `∫ H` over the domain for frozen `(y, ψ)`.
pub fn hamiltonian_integral<T: Real>(
    spec: &ProblemSpec<T>,
    y: &Field<T>,
    psi: &Field<T>,
    pair: &ControlPair<T>,
    params: &PenaltyParams<T>,
    mode: HamiltonianMode<T>,
) -> T {
    let g = y.grid();
    let fy = spec.f_at_quadrature(y);
    let pq = psi.values_at_quadrature();
    (0..g.n_quad())
        .map(|q| {
            g.quad_weight(q)
                * eval_hamiltonian(
                    spec,
                    fy.values()[q],
                    pq[q],
                    pair.v.values()[q],
                    pair.u.values()[q],
                    &params.local(q),
                    mode,
                )
        })
        .sum()
}

/// Adjoint source `-f⁰_y(x, y) - 2m (f(y) - v) f'(y)` of the penalized cost.
pub fn penalized_adjoint_source<T: Real>(spec: &ProblemSpec<T>, y: &Field<T>, v: &CellField<T>, m: T) -> AdjointSource<T> {
    let g = y.grid();
    let yq = y.values_at_quadrature();
    let two = lit::<T>(2.0);
    let vals = (0..g.n_quad())
        .map(|q| {
            let yv = yq[q];
            -spec.f0.dy(g.quad_point(q), yv) - two * m * (spec.f.eval(yv) - v.values()[q]) * spec.f.deriv(yv)
        })
        .collect();
    AdjointSource::from_values(g, vals)
}

/// Gradient of the regularized penalized cost with respect to `(v, u)`.
#[derive(Clone, Debug)]
pub struct Gradient<T> {
    pub grad_v: CellField<T>,
    pub grad_u: CellField<T>,
    pub psi: Field<T>,
    pub y: Field<T>,
}

impl<T: Real> Gradient<T> {
    /// `∫ (grad_v d_v + grad_u d_u)`
    pub fn directional(&self, dir: &ControlPair<T>) -> T {
        self.grad_v.inner(&dir.v) + self.grad_u.inner(&dir.u)
    }
}

/// The inner problem for fixed penalty parameters on a fixed grid.
#[derive(Clone, Debug)]
pub struct Penalized<'a, T> {
    pub spec: &'a ProblemSpec<T>,
    pub op: PLaplacian<T>,
    pub params: PenaltyParams<T>,
    pub newton: NewtonConfig,
}

impl<'a, T: Real> Penalized<'a, T> {
    pub fn new(spec: &'a ProblemSpec<T>, grid: &Arc<Grid<T>>, params: PenaltyParams<T>, newton: NewtonConfig) -> Result<Self> {
        params.validate()?;
        Ok(Penalized { spec, op: spec.operator(grid)?, params, newton })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.op.grid()
    }

    /// Regularized state driven by `v + u`.
    pub fn state(&self, pair: &ControlPair<T>, warm: &Field<T>) -> Result<(Field<T>, SolveReport<T>)> {
        let load = self.grid().load_vector(pair.source().values());
        let (y, rep) = self.op.solve_state_robust(&load, self.params.eps, warm, &self.newton)?;
        if !rep.converged {
            return Err(Error::NonConvergence(format!(
                "state solve at eps = {} stalled with residual {}",
                self.params.eps, rep.residual
            )));
        }
        Ok((y, rep))
    }

    pub fn cost(&self, pair: &ControlPair<T>, y: &Field<T>) -> T {
        eval_j_sigma_eps(self.spec, pair, &self.params, y)
    }

    pub fn adjoint(&self, pair: &ControlPair<T>, y: &Field<T>) -> Result<Field<T>> {
        let src = penalized_adjoint_source(self.spec, y, &pair.v, self.params.m);
        solve_adjoint(&self.op, y, self.params.eps, &src)
    }

    /// Gradient at a solved state `y` with adjoint `ψ`.
    pub fn gradient_at(&self, pair: &ControlPair<T>, y: Field<T>, psi: Field<T>) -> Gradient<T> {
        let g = y.grid().clone();
        let fy = self.spec.f_at_quadrature(&y);
        let pq = psi.values_at_quadrature();
        let two = lit::<T>(2.0);
        let h = self.spec.derivative_step();
        let mut gv = Vec::with_capacity(g.n_quad());
        let mut gu = Vec::with_capacity(g.n_quad());
        for q in 0..g.n_quad() {
            let lp = self.params.local(q);
            let (v, u) = (pair.v.values()[q], pair.u.values()[q]);
            gv.push(-pq[q] + two * lp.m * (v - fy.values()[q]) + two * lp.tau * (v - lp.fybar) + two * lp.sigma * (v - lp.vc));
            gu.push(-pq[q] + self.spec.g.deriv(u, h) + two * lp.tau * (u - lp.ubar) + two * lp.sigma * (u - lp.uc));
        }
        Gradient { grad_v: CellField::from_values(&g, gv), grad_u: CellField::from_values(&g, gu), psi, y }
    }

    /// State solve, adjoint solve and gradient assembly.
    pub fn gradient(&self, pair: &ControlPair<T>, warm: &Field<T>) -> Result<Gradient<T>> {
        let (y, _) = self.state(pair, warm)?;
        let psi = self.adjoint(pair, &y)?;
        Ok(self.gradient_at(pair, y, psi))
    }
}

/// Free-function form of [`Penalized::gradient`] starting from `y = 0`.
pub fn gradient_via_adjoint<T: Real>(
    spec: &ProblemSpec<T>,
    grid: &Arc<Grid<T>>,
    pair: &ControlPair<T>,
    params: &PenaltyParams<T>,
    newton: &NewtonConfig,
) -> Result<Gradient<T>> {
    let pen = Penalized::new(spec, grid, params.clone(), *newton)?;
    pen.gradient(pair, &Field::zeros(grid))
}
