//! Regularized p-Laplacian state equation and its semilinear variant.
//!
//! The weak residual is
//! `R_i(y) = ∫ (ε² + |∇y|²)^{(p-2)/2} ∇y·∇φ_i - ∫ rhs φ_i`,
//! whose Jacobian kernel is the diffusion tensor
//! `A(g; ε) = s^{p-2} (I + (p-2) g gᵀ / s²)`, `s = sqrt(ε² + |g|²)`.

use crate::discretization::{CellField, Field, Grid, Point};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, SymBandMatrix};
use crate::scalar::{lit, Real};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Nonlinearity `f` of the semilinear equation together with `f'`.
#[derive(Clone)]
pub struct Nonlinearity<T> {
    label: String,
    f: ScalarFn<T>,
    df: ScalarFn<T>,
}

impl<T: fmt::Debug> fmt::Debug for Nonlinearity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity({})", self.label)
    }
}

impl<T: Real> Nonlinearity<T> {
    pub fn new<F, D>(label: impl Into<String>, f: F, df: D) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
        D: Fn(T) -> T + Send + Sync + 'static,
    {
        Nonlinearity { label: label.into(), f: Arc::new(f), df: Arc::new(df) }
    }

    pub fn zero() -> Self {
        Nonlinearity::new("0", |_| T::zero(), |_| T::zero())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, y: T) -> T {
        (self.f)(y)
    }

    #[inline]
    pub fn deriv(&self, y: T) -> T {
        (self.df)(y)
    }
}

/// Growth bound `|f(y)| <= C (1 + |y|^{r-1})` with `1 <= r < p*`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSpec<T> {
    pub c: T,
    pub r: T,
}

impl<T: Real> GrowthSpec<T> {
    /// Critical Sobolev exponent; `None` stands for `+∞`.
    pub fn critical_exponent(dim: usize, p: T) -> Option<T> {
        let n = T::from_usize(dim).unwrap();
        if n > p {
            Some(n * p / (n - p))
        } else {
            None
        }
    }

    pub fn validate(&self, dim: usize, p: T) -> Result<()> {
        if !(self.c > T::zero()) {
            return Err(Error::InvalidParameter("growth constant C must be positive".into()));
        }
        if self.r < T::one() {
            return Err(Error::InvalidParameter("growth exponent r must be >= 1".into()));
        }
        if let Some(ps) = Self::critical_exponent(dim, p) {
            if !(self.r < ps) {
                return Err(Error::InvalidParameter(format!("growth exponent r = {} must be below p* = {ps}", self.r)));
            }
        }
        Ok(())
    }

    pub fn bound(&self, y: T) -> T {
        self.c * (T::one() + y.abs().powf(self.r - T::one()))
    }

    /// Checks the bound at the given sample values.
    pub fn check(&self, f: &Nonlinearity<T>, ys: &[T]) -> Result<()> {
        for &y in ys {
            let fy = f.eval(y);
            let b = self.bound(y);
            if fy.abs() > b * (T::one() + lit(1e-12)) {
                return Err(Error::GrowthViolation { y: y.to_f64_lossy(), fy: fy.to_f64_lossy(), bound: b.to_f64_lossy() });
            }
        }
        Ok(())
    }
}

/// Linearized flux tensor at one quadrature point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionTensor<T> {
    pub a: [[T; 2]; 2],
    pub s: T,
}

impl<T: Real> DiffusionTensor<T> {
    /// Requires `ε² + |g|² > 0`.
    pub fn new(g: Point<T>, eps: T, p: T) -> Self {
        let s2 = eps * eps + g[0] * g[0] + g[1] * g[1];
        let s = s2.sqrt();
        let coef = s.powf(p - lit(2.0));
        let k = (p - lit(2.0)) / s2;
        let a = [
            [coef * (T::one() + k * g[0] * g[0]), coef * k * g[0] * g[1]],
            [coef * k * g[1] * g[0], coef * (T::one() + k * g[1] * g[1])],
        ];
        DiffusionTensor { a, s }
    }

    #[inline]
    pub fn apply(&self, v: Point<T>) -> Point<T> {
        [self.a[0][0] * v[0] + self.a[0][1] * v[1], self.a[1][0] * v[0] + self.a[1][1] * v[1]]
    }

    /// `vᵀ A w`
    #[inline]
    pub fn bilinear(&self, v: Point<T>, w: Point<T>) -> T {
        let aw = self.apply(w);
        v[0] * aw[0] + v[1] * aw[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iter: usize,
    pub atol: f64,
    pub rtol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { max_iter: 200, atol: 1e-11, rtol: 1e-11, armijo_c: 1e-4, backtrack: 0.5, max_halvings: 30 }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return Err(Error::InvalidParameter("Newton tolerances must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter("backtracking factor must lie in (0,1)".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("invalid Armijo parameters".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub iterations: usize,
    pub residual: T,
    pub tolerance: T,
    pub converged: bool,
    /// Backtracking halvings taken at each accepted step.
    pub line_search: Vec<usize>,
    /// Merit values (energy or half squared residual) after each step,
    /// starting with the initial guess.
    pub merit_history: Vec<T>,
    pub linf: T,
    /// Negative pivots of the last Jacobian (semilinear solves only).
    pub negative_pivots: usize,
    pub growth_ok: bool,
}

impl<T: Real> SolveReport<T> {
    pub fn indefinite(&self) -> bool {
        self.negative_pivots > 0
    }
}

/// Behaviour of the flux at `ε = 0` where `∇y = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegeneratePolicy {
    Reject,
    /// Extend `|∇y|^{p-2} ∇y` by zero (continuous since `p > 1`).
    ExtendByZero,
}

/// The ε-regularized p-Laplacian on a fixed grid.
#[derive(Clone)]
pub struct PLaplacian<T> {
    grid: Arc<Grid<T>>,
    p: T,
}

impl<T: fmt::Debug> fmt::Debug for PLaplacian<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PLaplacian(p = {:?}, {:?})", self.p, self.grid)
    }
}

impl<T: Real> PLaplacian<T> {
    pub fn new(grid: &Arc<Grid<T>>, p: T) -> Result<Self> {
        if !(p > T::one() && p < lit(2.0)) {
            return Err(Error::InvalidParameter(format!("p must lie in (1,2), got {p}")));
        }
        Ok(PLaplacian { grid: Arc::clone(grid), p })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn p(&self) -> T {
        self.p
    }

    fn check_field(&self, y: &Field<T>) -> Result<()> {
        if y.belongs_to(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Scalar flux coefficient `(ε² + |g|²)^{(p-2)/2}`.
    fn flux_coef(&self, g: Point<T>, eps: T, q: usize, policy: DegeneratePolicy) -> Result<T> {
        let s2 = eps * eps + g[0] * g[0] + g[1] * g[1];
        if s2 == T::zero() {
            return match policy {
                DegeneratePolicy::ExtendByZero => Ok(T::zero()),
                DegeneratePolicy::Reject => Err(Error::DegenerateEvaluation { quad: q }),
            };
        }
        Ok(s2.powf((self.p - lit(2.0)) * lit(0.5)))
    }

    /// `∫ (ε²+|∇y|²)^{(p-2)/2} ∇y·∇φ_i`
    pub fn flux_vector(&self, y: &Field<T>, eps: T, policy: DegeneratePolicy) -> Result<Vec<T>> {
        self.check_field(y)?;
        if eps < T::zero() {
            return Err(Error::InvalidParameter("eps must be nonnegative".into()));
        }
        let g = &*self.grid;
        let grads = y.gradient_at_quadrature();
        let mut r = vec![T::zero(); g.n_dofs()];
        for e in 0..g.n_elements() {
            let nodes = g.element_nodes(e);
            for q in g.element_quads(e) {
                let gq = grads[q];
                let c = self.flux_coef(gq, eps, q, policy)? * g.quad_weight(q);
                for (a, &node) in nodes.iter().enumerate() {
                    if let Some(i) = g.dof_of_node(node) {
                        let d = g.shape_grad(q, a);
                        r[i] = r[i] + c * (gq[0] * d[0] + gq[1] * d[1]);
                    }
                }
            }
        }
        Ok(r)
    }

    pub fn assemble_residual(
        &self,
        y: &Field<T>,
        rhs: &CellField<T>,
        eps: T,
        policy: DegeneratePolicy,
    ) -> Result<Vec<T>> {
        let load = self.grid.load_vector(rhs.values());
        self.residual_with_load(y, &load, eps, policy)
    }

    pub fn residual_with_load(&self, y: &Field<T>, load: &[T], eps: T, policy: DegeneratePolicy) -> Result<Vec<T>> {
        let mut r = self.flux_vector(y, eps, policy)?;
        for (ri, &bi) in r.iter_mut().zip(load) {
            *ri = *ri - bi;
        }
        Ok(r)
    }

    pub fn diffusion_tensors(&self, y: &Field<T>, eps: T) -> Vec<DiffusionTensor<T>> {
        y.gradient_at_quadrature().into_iter().map(|g| DiffusionTensor::new(g, eps, self.p)).collect()
    }

    /// Banded matrix of the bilinear form `∫ ∇φ_jᵀ K_q ∇φ_i` for per-point kernels.
    pub fn assemble_tensor_form(&self, tensors: &[DiffusionTensor<T>]) -> SymBandMatrix<T> {
        let g = &*self.grid;
        let mut k = SymBandMatrix::zeros(g.n_dofs(), g.bandwidth());
        for e in 0..g.n_elements() {
            let nodes = g.element_nodes(e);
            for q in g.element_quads(e) {
                let w = g.quad_weight(q);
                let t = &tensors[q];
                for (a, &na) in nodes.iter().enumerate() {
                    let Some(i) = g.dof_of_node(na) else { continue };
                    let da = g.shape_grad(q, a);
                    for (b, &nb) in nodes.iter().enumerate() {
                        let Some(j) = g.dof_of_node(nb) else { continue };
                        if j > i {
                            continue;
                        }
                        k.add(i, j, w * t.bilinear(g.shape_grad(q, b), da));
                    }
                }
            }
        }
        k
    }

    /// Newton Jacobian `K_ij = ∫ ∇φ_jᵀ A(∇y; ε) ∇φ_i`; `ε > 0` strictly.
    pub fn assemble_jacobian(&self, y: &Field<T>, eps: T) -> Result<SymBandMatrix<T>> {
        self.check_field(y)?;
        if !(eps > T::zero()) {
            return Err(Error::InvalidParameter("jacobian requires eps > 0".into()));
        }
        Ok(self.assemble_tensor_form(&self.diffusion_tensors(y, eps)))
    }

    /// Standard stiffness matrix `∫ ∇φ_j·∇φ_i`.
    pub fn stiffness(&self) -> SymBandMatrix<T> {
        let id = DiffusionTensor { a: [[T::one(), T::zero()], [T::zero(), T::one()]], s: T::one() };
        self.assemble_tensor_form(&vec![id; self.grid.n_quad()])
    }

    /// Weighted mass matrix `∫ c φ_i φ_j` for per-point weights `c`.
    pub fn weighted_mass(&self, c: &[T]) -> SymBandMatrix<T> {
        let g = &*self.grid;
        let mut m = SymBandMatrix::zeros(g.n_dofs(), g.bandwidth());
        for e in 0..g.n_elements() {
            let nodes = g.element_nodes(e);
            for q in g.element_quads(e) {
                let w = g.quad_weight(q) * c[q];
                for (a, &na) in nodes.iter().enumerate() {
                    let Some(i) = g.dof_of_node(na) else { continue };
                    for (b, &nb) in nodes.iter().enumerate() {
                        let Some(j) = g.dof_of_node(nb) else { continue };
                        if j <= i {
                            m.add(i, j, w * g.shape(q, a) * g.shape(q, b));
                        }
                    }
                }
            }
        }
        m
    }

    /// `∫ (ε²+|∇y|²)^{p/2}/p - load·y`
    pub fn energy(&self, y: &Field<T>, load: &[T], eps: T) -> T {
        let g = &*self.grid;
        let grads = y.gradient_at_quadrature();
        let half_p = self.p * lit(0.5);
        let e: T = grads
            .iter()
            .enumerate()
            .map(|(q, d)| g.quad_weight(q) * (eps * eps + d[0] * d[0] + d[1] * d[1]).powf(half_p))
            .sum::<T>()
            / self.p;
        e - dot(load, &y.dofs())
    }

    pub fn solve_state(
        &self,
        rhs: &CellField<T>,
        eps: T,
        y0: &Field<T>,
        cfg: &NewtonConfig,
    ) -> Result<(Field<T>, SolveReport<T>)> {
        let load = self.grid.load_vector(rhs.values());
        self.solve_state_load(&load, eps, y0, cfg)
    }

    /// Damped Newton on the strictly convex energy for a given load vector.
    pub fn solve_state_load(
        &self,
        load: &[T],
        eps: T,
        y0: &Field<T>,
        cfg: &NewtonConfig,
    ) -> Result<(Field<T>, SolveReport<T>)> {
        self.check_field(y0)?;
        cfg.validate()?;
        if !(eps > T::zero()) {
            return Err(Error::InvalidParameter("solve_state requires eps > 0".into()));
        }
        let policy = DegeneratePolicy::Reject;
        let tol = lit::<T>(cfg.atol) + lit::<T>(cfg.rtol) * norm2(load);
        let c1 = lit::<T>(cfg.armijo_c);
        let shrink = lit::<T>(cfg.backtrack);
        let mut y = y0.clone();
        let mut energy = self.energy(&y, load, eps);
        let mut r = self.residual_with_load(&y, load, eps, policy)?;
        let mut rn = norm2(&r);
        let mut report = SolveReport {
            iterations: 0,
            residual: rn,
            tolerance: tol,
            converged: false,
            line_search: vec![],
            merit_history: vec![energy],
            linf: T::zero(),
            negative_pivots: 0,
            growth_ok: true,
        };
        while report.iterations < cfg.max_iter {
            if rn <= tol {
                report.converged = true;
                break;
            }
            let k = self.assemble_jacobian(&y, eps)?;
            let mut d = k.cholesky()?.solve(&r);
            d.iter_mut().for_each(|v| *v = -*v);
            let slope = dot(&r, &d);
            let base = y.dofs();
            let mut alpha = T::one();
            let mut accepted = None;
            for halvings in 0..=cfg.max_halvings {
                let trial_dofs: Vec<T> = base.iter().zip(&d).map(|(&b, &di)| b + alpha * di).collect();
                let trial = Field::from_dofs(&self.grid, &trial_dofs);
                let e_t = self.energy(&trial, load, eps);
                if e_t <= energy + c1 * alpha * slope {
                    accepted = Some((trial, e_t, halvings));
                    break;
                }
                // Near convergence the energy decrease drops below round-off.
                if e_t - energy <= lit::<T>(16.0) * T::epsilon() * energy.abs().max(T::one()) {
                    let rt = self.residual_with_load(&trial, load, eps, policy)?;
                    if norm2(&rt) < rn {
                        accepted = Some((trial, e_t, halvings));
                        break;
                    }
                }
                alpha = alpha * shrink;
            }
            let Some((trial, e_t, halvings)) = accepted else {
                break;
            };
            y = trial;
            energy = e_t;
            r = self.residual_with_load(&y, load, eps, policy)?;
            rn = norm2(&r);
            report.iterations += 1;
            report.line_search.push(halvings);
            report.merit_history.push(energy);
        }
        report.converged = rn <= tol;
        report.residual = rn;
        report.linf = y.norms().linf;
        Ok((y, report))
    }

    /// Solve at `eps_target` by walking `ε` down geometrically from
    /// `eps_start`, warm-starting each step.
    pub fn solve_state_continuation(
        &self,
        load: &[T],
        eps_start: T,
        eps_target: T,
        y0: &Field<T>,
        cfg: &NewtonConfig,
    ) -> Result<(Field<T>, SolveReport<T>)> {
        let mut eps = eps_start.max(eps_target);
        let mut y = y0.clone();
        let factor = lit::<T>(0.1);
        loop {
            let (sol, rep) = self.solve_state_load(load, eps, &y, cfg)?;
            if eps <= eps_target {
                return Ok((sol, rep));
            }
            y = sol;
            eps = (eps * factor).max(eps_target);
        }
    }

    /// State solve that falls back to ε-continuation from `ε = 1` if the
    /// direct damped Newton solve stalls.
    pub fn solve_state_robust(
        &self,
        load: &[T],
        eps: T,
        y0: &Field<T>,
        cfg: &NewtonConfig,
    ) -> Result<(Field<T>, SolveReport<T>)> {
        let (y, rep) = self.solve_state_load(load, eps, y0, cfg)?;
        if rep.converged || eps >= T::one() {
            return Ok((y, rep));
        }
        self.solve_state_continuation(load, T::one(), eps, &Field::zeros(&self.grid), cfg)
    }

    /// Residual of `-div(a_ε(∇y)∇y) = f(y) + u`.
    pub fn semilinear_residual(&self, y: &Field<T>, u: &CellField<T>, eps: T, f: &Nonlinearity<T>) -> Result<Vec<T>> {
        let yq = y.values_at_quadrature();
        let src: Vec<T> = yq.iter().zip(u.values()).map(|(&yv, &uv)| f.eval(yv) + uv).collect();
        let load = self.grid.load_vector(&src);
        self.residual_with_load(y, &load, eps, DegeneratePolicy::Reject)
    }

    /// Jacobian `K(y, ε) - ∫ f'(y) φ_i φ_j` of the semilinear residual.
    pub fn semilinear_jacobian(&self, y: &Field<T>, eps: T, f: &Nonlinearity<T>) -> Result<SymBandMatrix<T>> {
        let k = self.assemble_jacobian(y, eps)?;
        let dfq: Vec<T> = y.values_at_quadrature().iter().map(|&v| f.deriv(v)).collect();
        Ok(k.axpy(-T::one(), &self.weighted_mass(&dfq)))
    }

    /// `∫ (ε²+|∇y|²)^{p/2}/p - ∫ F(y) - ∫ u y` with `F' = f`, `F(0) = 0`.
    pub fn semilinear_energy(&self, y: &Field<T>, u: &CellField<T>, eps: T, f: &Nonlinearity<T>) -> T {
        let g = &*self.grid;
        let load = g.load_vector(u.values());
        let prim: T = y
            .values_at_quadrature()
            .iter()
            .enumerate()
            .map(|(q, &v)| g.quad_weight(q) * primitive(f, v))
            .sum();
        self.energy(y, &load, eps) - prim
    }

    /// Energy-descent Newton for the semilinear equation: Newton steps
    /// where the Jacobian is positive definite, `K⁻¹`-preconditioned
    /// gradient steps elsewhere. Finishes with Newton on `½|R|²` if the
    /// energy phase stalls away from a solution.
    pub fn solve_semilinear(
        &self,
        u: &CellField<T>,
        eps: T,
        f: &Nonlinearity<T>,
        growth: &GrowthSpec<T>,
        y0: &Field<T>,
        cfg: &NewtonConfig,
    ) -> Result<(Field<T>, SolveReport<T>)> {
        self.check_field(y0)?;
        cfg.validate()?;
        if !(eps > T::zero()) {
            return Err(Error::InvalidParameter("solve_semilinear requires eps > 0".into()));
        }
        growth.check(f, y0.values())?;
        let tol = lit::<T>(cfg.atol) + lit::<T>(cfg.rtol) * norm2(&self.grid.load_vector(u.values()));
        let c1 = lit::<T>(cfg.armijo_c);
        let shrink = lit::<T>(cfg.backtrack);
        let mut y = y0.clone();
        let mut r = self.semilinear_residual(&y, u, eps, f)?;
        let mut rn = norm2(&r);
        let mut report = SolveReport {
            iterations: 0,
            residual: rn,
            tolerance: tol,
            converged: false,
            line_search: vec![],
            merit_history: vec![lit::<T>(0.5) * rn * rn],
            linf: T::zero(),
            negative_pivots: 0,
            growth_ok: true,
        };
        let mut energy = self.semilinear_energy(&y, u, eps, f);
        while report.iterations < cfg.max_iter && rn > tol {
            let jac = self.semilinear_jacobian(&y, eps, f)?;
            let fac = jac.ldlt()?;
            report.negative_pivots = fac.negative_pivots();
            let mut d = if fac.negative_pivots() == 0 {
                fac.solve(&r)
            } else {
                self.assemble_jacobian(&y, eps)?.cholesky()?.solve(&r)
            };
            d.iter_mut().for_each(|v| *v = -*v);
            let slope = dot(&r, &d);
            if !(slope < T::zero()) {
                break;
            }
            let base = y.dofs();
            let mut alpha = T::one();
            let mut accepted = None;
            for halvings in 0..=cfg.max_halvings {
                let trial_dofs: Vec<T> = base.iter().zip(&d).map(|(&b, &di)| b + alpha * di).collect();
                let trial = Field::from_dofs(&self.grid, &trial_dofs);
                let e_t = self.semilinear_energy(&trial, u, eps, f);
                let ok = e_t <= energy + c1 * alpha * slope;
                let flat = e_t - energy <= lit::<T>(16.0) * T::epsilon() * energy.abs().max(T::one());
                if ok || flat {
                    let rt = self.semilinear_residual(&trial, u, eps, f)?;
                    let rtn = norm2(&rt);
                    if ok || rtn < rn {
                        accepted = Some((trial, e_t, rt, rtn, halvings));
                        break;
                    }
                }
                alpha = alpha * shrink;
            }
            let Some((trial, e_t, rt, rtn, halvings)) = accepted else {
                break;
            };
            y = trial;
            energy = e_t;
            r = rt;
            rn = rtn;
            report.iterations += 1;
            report.line_search.push(halvings);
            report.merit_history.push(lit::<T>(0.5) * rn * rn);
        }
        let merit_start = report.iterations;
        while report.iterations < merit_start + cfg.max_iter {
            if rn <= tol {
                break;
            }
            let jac = self.semilinear_jacobian(&y, eps, f)?;
            let fac = jac.ldlt()?;
            report.negative_pivots = fac.negative_pivots();
            let mut d = fac.solve(&r);
            d.iter_mut().for_each(|v| *v = -*v);
            let base = y.dofs();
            let mut alpha = T::one();
            let mut accepted = None;
            for halvings in 0..=cfg.max_halvings {
                let trial_dofs: Vec<T> = base.iter().zip(&d).map(|(&b, &di)| b + alpha * di).collect();
                let trial = Field::from_dofs(&self.grid, &trial_dofs);
                let rt = self.semilinear_residual(&trial, u, eps, f)?;
                let rtn = norm2(&rt);
                if rtn * rtn <= (T::one() - lit::<T>(2.0) * c1 * alpha) * rn * rn {
                    accepted = Some((trial, rt, rtn, halvings));
                    break;
                }
                alpha = alpha * shrink;
            }
            let Some((trial, rt, rtn, halvings)) = accepted else {
                break;
            };
            y = trial;
            r = rt;
            rn = rtn;
            report.iterations += 1;
            report.line_search.push(halvings);
            report.merit_history.push(lit::<T>(0.5) * rn * rn);
        }
        report.converged = rn <= tol;
        report.residual = rn;
        report.linf = y.norms().linf;
        report.growth_ok = growth.check(f, y.values()).is_ok();
        Ok((y, report))
    }

    /// Solve from every seed and keep converged solutions that differ by
    /// more than `dedup` in the max norm.
    #[allow(clippy::too_many_arguments)]
    pub fn multistart_semilinear(
        &self,
        u: &CellField<T>,
        eps: T,
        f: &Nonlinearity<T>,
        growth: &GrowthSpec<T>,
        seeds: &[Field<T>],
        cfg: &NewtonConfig,
        dedup: T,
    ) -> Result<Vec<(Field<T>, SolveReport<T>)>> {
        if seeds.len() < 2 {
            return Err(Error::InvalidParameter("multistart needs at least two seeds".into()));
        }
        let mut found: Vec<(Field<T>, SolveReport<T>)> = Vec::new();
        for seed in seeds {
            let Ok((y, rep)) = self.solve_semilinear(u, eps, f, growth, seed, cfg) else {
                continue;
            };
            if !rep.converged {
                continue;
            }
            if found.iter().all(|(z, _)| z.linf_distance(&y) > dedup) {
                found.push((y, rep));
            }
        }
        Ok(found)
    }
}

/// `∫₀^y f` by 8-point Gauss-Legendre.
fn primitive<T: Real>(f: &Nonlinearity<T>, y: T) -> T {
    const NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let half = y * lit(0.5);
    let mut acc = T::zero();
    for (&x, &w) in NODES.iter().zip(&WEIGHTS) {
        let x = lit::<T>(x);
        acc = acc + lit::<T>(w) * (f.eval(half * (T::one() + x)) + f.eval(half * (T::one() - x)));
    }
    acc * half
}

/// Default multistart dedup threshold in the max norm.
pub const DEDUP_THRESHOLD: f64 = 1e-3;
