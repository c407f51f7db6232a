//! Inner solver for the regularized penalized problem at fixed parameters.

use crate::discretization::{CellField, Field};
use crate::error::{Error, Result};
use crate::objective::{
    golden_section_max, hamiltonian_integral, ControlCost, ControlPair, Gradient, HamiltonianMode, Penalized, PenaltyParams,
    ProblemSpec,
};
use crate::scalar::{clip, lit, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMaximizerMode {
    ClosedForm,
    GoldenSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStrategy {
    /// Pointwise Hamiltonian maximization with projected-gradient fallback.
    Alternating,
    /// Projected gradient only.
    ProjectedGradient,
    /// Projected Gauss-Newton steps with conjugate gradients on the free
    /// set, falling back to the alternating step and projected gradient.
    Newton,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolveConfig {
    pub max_sweeps: usize,
    /// Stop once the `L²` control change of a sweep drops below this.
    pub tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    pub u_mode: UMaximizerMode,
    pub golden_iters: usize,
    pub strategy: InnerStrategy,
    pub n_probes: usize,
    pub probe_seed: u64,
    /// Conjugate-gradient iterations per Newton step.
    pub cg_iters: usize,
}

impl Default for InnerSolveConfig {
    fn default() -> Self {
        InnerSolveConfig {
            max_sweeps: 400,
            tol: 1e-8,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_halvings: 40,
            u_mode: UMaximizerMode::ClosedForm,
            golden_iters: 60,
            strategy: InnerStrategy::Alternating,
            n_probes: 100,
            probe_seed: 20240607,
            cg_iters: 200,
        }
    }
}

impl InnerSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("inner tolerance and sweep count must be positive".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0 && self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter("invalid Armijo parameters".into()));
        }
        if self.golden_iters < 30 {
            return Err(Error::InvalidParameter("golden-section iterations must be at least 30".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct InnerSolveResult<T> {
    pub pair: ControlPair<T>,
    pub y: Field<T>,
    pub psi: Field<T>,
    pub objective: T,
    pub history: Vec<T>,
    /// `min_k ∫ (H(result) - H(probe_k))` over the random probes.
    pub hamiltonian_gap: T,
    /// `∫ H(result)`
    pub hamiltonian: T,
    pub converged: bool,
    pub sweeps: usize,
    pub fallbacks: usize,
    pub ties: usize,
    pub control_change: T,
}

impl<T: Real> InnerSolveResult<T> {
    /// Variational-inequality check `min gap >= -1e-6 (1 + |∫H|)`.
    pub fn gap_ok(&self) -> bool {
        self.hamiltonian_gap >= -lit::<T>(1e-6) * (T::one() + self.hamiltonian.abs())
    }
}

/// Pointwise maximizer of the `v`-part of the regularized Hamiltonian.
pub fn update_v_pointwise<T: Real>(spec: &ProblemSpec<T>, psi: &Field<T>, y: &Field<T>, params: &PenaltyParams<T>) -> CellField<T> {
    let fy = spec.f_at_quadrature(y);
    let pq = psi.values_at_quadrature();
    let half = lit::<T>(0.5);
    let vals = (0..pq.len())
        .map(|q| {
            let lp = params.local(q);
            let den = lp.m + lp.tau + lp.sigma;
            let raw = if den > T::zero() {
                (half * pq[q] + lp.m * fy.values()[q] + lp.tau * lp.fybar + lp.sigma * lp.vc) / den
            } else if pq[q] >= T::zero() {
                lp.fybar + T::one()
            } else {
                lp.fybar - T::one()
            };
            clip(raw, lp.fybar - T::one(), lp.fybar + T::one())
        })
        .collect();
    CellField::from_values(y.grid(), vals)
}

/// Pointwise maximizer of `ψu - g(u) - τ|u-ū|² - σ|u-u_c|²` on `[a, b]`;
/// also returns the number of flat (tied) points.
pub fn update_u_pointwise<T: Real>(
    spec: &ProblemSpec<T>,
    psi: &Field<T>,
    params: &PenaltyParams<T>,
    mode: UMaximizerMode,
    golden_iters: usize,
) -> (CellField<T>, usize) {
    let pq = psi.values_at_quadrature();
    let mut ties = 0;
    let vals = (0..pq.len())
        .map(|q| {
            let lp = params.local(q);
            let kappa = lp.tau + lp.sigma;
            let center = if kappa > T::zero() { (lp.tau * lp.ubar + lp.sigma * lp.uc) / kappa } else { T::zero() };
            match mode {
                UMaximizerMode::ClosedForm => {
                    let m = spec.g.argmax(pq[q], T::one(), kappa, center, spec.a, spec.b, golden_iters);
                    ties += usize::from(m.tie);
                    m.u
                }
                UMaximizerMode::GoldenSection => golden_u(&spec.g, pq[q], kappa, center, spec.a, spec.b, golden_iters),
            }
        })
        .collect();
    (CellField::from_values(psi.grid(), vals), ties)
}

fn golden_u<T: Real>(g: &ControlCost<T>, psi: T, kappa: T, center: T, a: T, b: T, iters: usize) -> T {
    let h = |u: T| psi * u - g.eval(u) - kappa * (u - center) * (u - center);
    let u = golden_section_max(h, a, b, iters.max(30));
    [a, b].into_iter().fold(u, |best, c| if h(c) > h(best) { c } else { best })
}

/// Projection onto `[f(ȳ)-1, f(ȳ)+1] × [a, b]`.
pub fn project<T: Real>(spec: &ProblemSpec<T>, params: &PenaltyParams<T>, pair: &ControlPair<T>) -> ControlPair<T> {
    let v = pair.v.zip_map(&params.fybar, |v, fr| clip(v, fr - T::one(), fr + T::one()));
    let u = pair.u.map(|u| clip(u, spec.a, spec.b));
    ControlPair::new(v, u)
}

fn combine<T: Real>(c: &ControlPair<T>, alpha: T, d: &ControlPair<T>) -> ControlPair<T> {
    ControlPair::new(c.v.axpy(alpha, &d.v), c.u.axpy(alpha, &d.u))
}

fn difference<T: Real>(a: &ControlPair<T>, b: &ControlPair<T>) -> ControlPair<T> {
    ControlPair::new(a.v.sub(&b.v), a.u.sub(&b.u))
}

fn norm<T: Real>(d: &ControlPair<T>) -> T {
    let (a, b) = (d.v.l2_norm(), d.u.l2_norm());
    (a * a + b * b).sqrt()
}

struct Iterate<T> {
    pair: ControlPair<T>,
    y: Field<T>,
    cost: T,
}

/// Extra exact v-steps allowed once the control change is below tolerance.
const MAX_POLISH: usize = 20;
/// Sweeps without cost improvement before a near-tolerance iterate is accepted.
const STALL_SWEEPS: usize = 20;

/// Solves the inner problem from `warm`, warm-starting the state at `y_warm`.
pub fn solve_inner<T: Real>(
    pen: &Penalized<'_, T>,
    warm: &ControlPair<T>,
    y_warm: &Field<T>,
    cfg: &InnerSolveConfig,
) -> Result<InnerSolveResult<T>> {
    cfg.validate()?;
    let spec = pen.spec;
    let params = &pen.params;
    let tol = lit::<T>(cfg.tol);
    let c1 = lit::<T>(cfg.armijo_c);
    let shrink = lit::<T>(cfg.backtrack);
    let slack = lit::<T>(1e-10);
    let round_off = lit::<T>(1e-13);
    // natural step of the frozen problem in the v-block
    let s0 = T::one() / (lit::<T>(2.0) * (params.m + params.tau + params.sigma).max(lit(0.5)));

    let pair0 = project(spec, params, warm);
    let (y0, _) = pen.state(&pair0, y_warm)?;
    let cost0 = pen.cost(&pair0, &y0);
    let mut it = Iterate { pair: pair0, y: y0, cost: cost0 };
    let mut history = vec![cost0];
    let mut fallbacks = 0;
    let mut ties = 0;
    let mut converged = false;
    let mut change = T::infinity();
    let mut pg_step = s0;
    let mut sweeps = 0;
    let mut polish = 0;
    let mut best = cost0;
    let mut stall = 0;
    let mut psi = pen.adjoint(&it.pair, &it.y)?;

    while sweeps < cfg.max_sweeps {
        let grad = pen.gradient_at(&it.pair, it.y.clone(), psi.clone());
        let v_star = update_v_pointwise(spec, &psi, &it.y, params);
        let (u_star, t) = update_u_pointwise(spec, &psi, params, cfg.u_mode, cfg.golden_iters);
        ties = t;
        let target = ControlPair::new(v_star, u_star);
        let d_alt = difference(&target, &it.pair);
        change = norm(&d_alt);
        // a stalled cost with a near-tolerance change is the noise floor of the state solves
        let stalled = stall >= STALL_SWEEPS && change < lit::<T>(1e3) * tol;
        if change < tol || stalled {
            // pointwise v-stationarity, which controls |m(v - f(y))|
            let weight = lit::<T>(2.0) * (params.m + params.tau + params.sigma);
            let vres = d_alt.v.linf_norm() * weight;
            if vres <= tol || polish >= MAX_POLISH {
                converged = true;
                break;
            }
            polish += 1;
            let trial = ControlPair::new(target.v, it.pair.u.clone());
            let (yt, _) = pen.state(&trial, &it.y)?;
            let ct = pen.cost(&trial, &yt);
            if ct > it.cost + slack {
                converged = true;
                break;
            }
            it = Iterate { pair: trial, y: yt, cost: ct };
            history.push(it.cost);
            sweeps += 1;
            psi = pen.adjoint(&it.pair, &it.y)?;
            continue;
        }
        let line_search = |d: &ControlPair<T>, projected: bool| -> Option<Iterate<T>> {
            let mut alpha = T::one();
            for _ in 0..=cfg.max_halvings {
                let mut trial = combine(&it.pair, alpha, d);
                if projected {
                    trial = project(spec, params, &trial);
                }
                let slope = grad.directional(&difference(&trial, &it.pair));
                if slope < T::zero() && -slope < round_off * (T::one() + it.cost.abs()) {
                    // decrease below cost resolution: accept the full step
                    if let Ok((yt, _)) = pen.state(&trial, &it.y) {
                        let ct = pen.cost(&trial, &yt);
                        return Some(Iterate { pair: trial, y: yt, cost: ct });
                    }
                }
                if slope < T::zero() {
                    if let Ok((yt, _)) = pen.state(&trial, &it.y) {
                        let ct = pen.cost(&trial, &yt);
                        if ct <= it.cost + c1 * slope {
                            return Some(Iterate { pair: trial, y: yt, cost: ct });
                        }
                    }
                }
                alpha = alpha * shrink;
            }
            None
        };

        let mut accepted = None;
        if cfg.strategy == InnerStrategy::Newton {
            accepted = newton_direction(pen, &it.pair, &it.y, &grad, cfg).ok().and_then(|d| line_search(&d, true));
        }
        if accepted.is_none() && cfg.strategy != InnerStrategy::ProjectedGradient {
            // the pointwise maximizer is feasible, so no projection is needed
            accepted = line_search(&d_alt, false);
            if accepted.is_none() {
                fallbacks += 1;
            }
        }
        if accepted.is_none() {
            // projected gradient with Armijo along the projection arc
            let mut step = pg_step;
            let neg_grad = ControlPair::new(grad.grad_v.map(|g| -g), grad.grad_u.map(|g| -g));
            for _ in 0..=cfg.max_halvings {
                let trial = project(spec, params, &combine(&it.pair, step, &neg_grad));
                let d = difference(&trial, &it.pair);
                let slope = grad.directional(&d);
                if let Ok((yt, _)) = pen.state(&trial, &it.y) {
                    let ct = pen.cost(&trial, &yt);
                    if ct <= it.cost + c1 * slope || (ct <= it.cost + slack && norm(&d) < tol) {
                        accepted = Some(Iterate { pair: trial, y: yt, cost: ct });
                        break;
                    }
                }
                step = step * shrink;
            }
            pg_step = (step / shrink).min(s0 * lit(1e6));
        }

        log::trace!("sweep {sweeps} change {:e} cost {:e}", change.to_f64_lossy(), it.cost.to_f64_lossy());
        let Some(next) = accepted else {
            break;
        };
        if next.cost > it.cost + slack {
            break;
        }
        it = next;
        if it.cost < best - slack * (T::one() + best.abs()) {
            best = it.cost;
            stall = 0;
        } else {
            stall += 1;
        }
        history.push(it.cost);
        sweeps += 1;
        psi = pen.adjoint(&it.pair, &it.y)?;
    }

    let (gap, h_res) = hamiltonian_gap(spec, &it.y, &psi, &it.pair, params, cfg.n_probes, cfg.probe_seed);
    Ok(InnerSolveResult {
        objective: it.cost,
        pair: it.pair,
        y: it.y,
        psi,
        history,
        hamiltonian_gap: gap,
        hamiltonian: h_res,
        converged,
        sweeps,
        fallbacks,
        ties,
        control_change: change,
    })
}

/// Second derivative of the control cost.
fn control_curvature<T: Real>(g: &ControlCost<T>, u: T, h: T) -> T {
    match g {
        ControlCost::Linear { .. } => T::zero(),
        ControlCost::Quadratic { alpha, .. } => *alpha,
        ControlCost::Custom { .. } => ((g.deriv(u + h, h) - g.deriv(u - h, h)) / (h + h)).max(T::zero()),
    }
}

/// Projected Gauss-Newton direction. Variables at a bound whose gradient
/// points outward get a diagonally scaled gradient step; the free block
/// solves the Gauss-Newton system by preconditioned conjugate gradients,
/// with Hessian products assembled from linearized state solves.
fn newton_direction<T: Real>(
    pen: &Penalized<'_, T>,
    pair: &ControlPair<T>,
    y: &Field<T>,
    grad: &Gradient<T>,
    cfg: &InnerSolveConfig,
) -> Result<ControlPair<T>> {
    let spec = pen.spec;
    let params = &pen.params;
    let grid = y.grid();
    let nq = grid.n_quad();
    let w = grid.quad_weights();
    let two = lit::<T>(2.0);
    let (m, kappa) = (params.m, params.tau + params.sigma);
    let chol = pen.op.assemble_jacobian(y, params.eps)?.cholesky()?;
    let yq = y.values_at_quadrature();
    let fp: Vec<T> = yq.iter().map(|&v| spec.f.deriv(v)).collect();
    let f0yy: Vec<T> = (0..nq)
        .map(|q| {
            let h = lit::<T>(1e-6) * (T::one() + yq[q].abs());
            let x = grid.quad_point(q);
            ((spec.f0.dy(x, yq[q] + h) - spec.f0.dy(x, yq[q] - h)) / (h + h)).max(T::zero())
        })
        .collect();
    let dstep = spec.derivative_step();
    let guu: Vec<T> = pair.u.values().iter().map(|&u| control_curvature(&spec.g, u, dstep) + two * kappa).collect();
    let dv_diag = two * (m + kappa);
    let floor = lit::<T>(1e-8) * dv_diag.max(T::one());
    let tikhonov = lit::<T>(1e-12) * dv_diag.max(T::one());

    // ε-active set from the scaled projected-gradient residual
    let (gv, gu) = (grad.grad_v.values(), grad.grad_u.values());
    let (vv, uu) = (pair.v.values(), pair.u.values());
    let fr = params.fybar.values();
    let mut resid = T::zero();
    for q in 0..nq {
        let vt = clip(vv[q] - gv[q] / dv_diag.max(floor), fr[q] - T::one(), fr[q] + T::one());
        let ut = clip(uu[q] - gu[q] / guu[q].max(floor), spec.a, spec.b);
        resid = resid.max((vt - vv[q]).abs()).max((ut - uu[q]).abs());
    }
    let delta = resid.min(lit(1e-3));
    let active = |x: T, lo: T, hi: T, g: T| (x <= lo + delta && g > T::zero()) || (x >= hi - delta && g < T::zero());
    let free_v: Vec<bool> = (0..nq).map(|q| !active(vv[q], fr[q] - T::one(), fr[q] + T::one(), gv[q])).collect();
    let free_u: Vec<bool> = (0..nq).map(|q| !active(uu[q], spec.a, spec.b, gu[q])).collect();

    let solve_quad = |src: &[T]| -> Vec<T> {
        let load = grid.load_vector(src);
        Field::from_dofs(grid, &chol.solve(&load)).values_at_quadrature()
    };
    // Gauss-Newton Hessian restricted to the free set
    let hess = |dv: &[T], du: &[T]| -> (Vec<T>, Vec<T>) {
        let dw: Vec<T> = (0..nq).map(|q| dv[q] + du[q]).collect();
        let dy = solve_quad(&dw);
        let r: Vec<T> = (0..nq).map(|q| dv[q] - fp[q] * dy[q]).collect();
        let e: Vec<T> = (0..nq).map(|q| -two * m * fp[q] * r[q] + f0yy[q] * dy[q]).collect();
        let z = solve_quad(&e);
        let hv = (0..nq)
            .map(|q| if free_v[q] { two * m * r[q] + (two * kappa + tikhonov) * dv[q] + z[q] } else { T::zero() })
            .collect();
        let hu = (0..nq)
            .map(|q| if free_u[q] { (guu[q] + tikhonov) * du[q] + z[q] } else { T::zero() })
            .collect();
        (hv, hu)
    };
    let dot = |a: &(Vec<T>, Vec<T>), b: &(Vec<T>, Vec<T>)| -> T {
        (0..nq).map(|q| w[q] * (a.0[q] * b.0[q] + a.1[q] * b.1[q])).sum::<T>()
    };
    let prec = |r: &(Vec<T>, Vec<T>)| -> (Vec<T>, Vec<T>) {
        (
            (0..nq).map(|q| r.0[q] / dv_diag.max(floor)).collect(),
            (0..nq).map(|q| r.1[q] / guu[q].max(floor)).collect(),
        )
    };

    let mut r = (
        (0..nq).map(|q| if free_v[q] { -gv[q] } else { T::zero() }).collect::<Vec<T>>(),
        (0..nq).map(|q| if free_u[q] { -gu[q] } else { T::zero() }).collect::<Vec<T>>(),
    );
    let mut x = (vec![T::zero(); nq], vec![T::zero(); nq]);
    let mut z = prec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let r0 = rz.abs().sqrt();
    let eta = lit::<T>(1e-2).min(r0.sqrt()).max(lit(1e-6));
    for _ in 0..cfg.cg_iters.max(1) {
        if rz.abs().sqrt() <= eta * r0 || r0 == T::zero() {
            break;
        }
        let hp = hess(&p.0, &p.1);
        let curv = dot(&p, &hp);
        if !(curv > T::zero()) {
            break;
        }
        let alpha = rz / curv;
        for q in 0..nq {
            x.0[q] = x.0[q] + alpha * p.0[q];
            x.1[q] = x.1[q] + alpha * p.1[q];
            r.0[q] = r.0[q] - alpha * hp.0[q];
            r.1[q] = r.1[q] - alpha * hp.1[q];
        }
        z = prec(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for q in 0..nq {
            p.0[q] = z.0[q] + beta * p.0[q];
            p.1[q] = z.1[q] + beta * p.1[q];
        }
    }
    if x.0.iter().chain(&x.1).all(|v| *v == T::zero()) && r0 > T::zero() {
        // no CG progress: scaled gradient on the free block
        x = prec(&r);
    }
    for q in 0..nq {
        if !free_v[q] {
            x.0[q] = -gv[q] / dv_diag.max(floor);
        }
        if !free_u[q] {
            x.1[q] = -gu[q] / guu[q].max(floor);
        }
    }
    Ok(ControlPair::new(CellField::from_values(grid, x.0), CellField::from_values(grid, x.1)))
}

/// `min_k ∫ (H(pair) - H(probe_k))` over uniform random probes in the
/// control boxes, with the frozen `(y, ψ)`; also returns `∫ H(pair)`.
pub fn hamiltonian_gap<T: Real>(
    spec: &ProblemSpec<T>,
    y: &Field<T>,
    psi: &Field<T>,
    pair: &ControlPair<T>,
    params: &PenaltyParams<T>,
    n_probes: usize,
    seed: u64,
) -> (T, T) {
    let mode = HamiltonianMode::SigmaEps;
    let h_res = hamiltonian_integral(spec, y, psi, pair, params, mode);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (spec.a.to_f64_lossy(), spec.b.to_f64_lossy());
    let mut gap = T::infinity();
    for _ in 0..n_probes {
        let grid = y.grid();
        let v = params.fybar.values().iter().map(|&fr| fr + lit::<T>(rng.gen_range(-1.0..=1.0))).collect();
        let u = (0..pair.u.len()).map(|_| lit::<T>(rng.gen_range(a..=b))).collect();
        let (v, u) = (CellField::from_values(grid, v), CellField::from_values(grid, u));
        let probe = ControlPair::new(v, u);
        gap = gap.min(h_res - hamiltonian_integral(spec, y, psi, &probe, params, mode));
    }
    (gap, h_res)
}
