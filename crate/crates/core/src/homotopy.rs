//! Nested continuation in `τ`, `m`, `σ` and `ε` around a reference pair.

use crate::adjoint::{normalize_multiplier, solve_adjoint_semilinear, AdjointSource, DegenerateMask, MultiplierPair};
use crate::discretization::{CellField, Field, Grid};
use crate::error::{Error, Result};
use crate::objective::{eval_j, ControlPair, Penalized, PenaltyParams, ProblemSpec, Reference};
use crate::optimizer::{solve_inner, InnerSolveConfig, InnerSolveResult};
use crate::scalar::{clip, lit, Real};
use crate::state::NewtonConfig;
use crate::verifier::{hamiltonian_max_gaps, relative_degenerate_norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

/// Largest penalty weight the driver will use.
pub const M_CAP: f64 = 1e4;
/// Smallest regularization the driver will use.
pub const EPS_FLOOR: f64 = 1e-8;

/// Parameter sequences, executed as `τ { m { σ { ε } } }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eps: Vec<f64>,
    pub sigma: Vec<f64>,
    pub m: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            eps: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            sigma: vec![1e-2, 1e-4, 0.0],
            m: vec![1.0, 1e1, 1e2, 1e3, 1e4],
            tau: vec![1e-1, 1e-2, 1e-3, 1e-4],
        }
    }
}

fn monotone(xs: &[f64], increasing: bool) -> bool {
    xs.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

impl Schedule {
    /// Single-point schedule.
    pub fn single(eps: f64, sigma: f64, m: f64, tau: f64) -> Self {
        Schedule { eps: vec![eps], sigma: vec![sigma], m: vec![m], tau: vec![tau] }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidParameter(s.into()));
        if self.eps.is_empty() || self.sigma.is_empty() || self.m.is_empty() || self.tau.is_empty() {
            return bad("every schedule sequence needs at least one entry");
        }
        if !monotone(&self.eps, false) || !self.eps.iter().all(|&e| e > 0.0 && e <= 1.0) {
            return bad("eps schedule must decrease within (0,1]");
        }
        if !monotone(&self.sigma, false) || !self.sigma.iter().all(|&s| s >= 0.0) {
            return bad("sigma schedule must decrease and stay nonnegative");
        }
        if !monotone(&self.m, true) || !self.m.iter().all(|&m| m >= 0.0) {
            return bad("m schedule must increase and stay nonnegative");
        }
        if !monotone(&self.tau, false) || !self.tau.iter().all(|&t| (0.0..1.0).contains(&t)) {
            return bad("tau schedule must decrease within [0,1)");
        }
        Ok(())
    }

    /// Schedule with `m` capped and `ε` floored; reports whether either bit.
    pub fn capped(&self) -> (Schedule, bool) {
        let mut s = self.clone();
        let mut hit = false;
        for m in &mut s.m {
            if *m > M_CAP {
                *m = M_CAP;
                hit = true;
            }
        }
        for e in &mut s.eps {
            if *e < EPS_FLOOR {
                *e = EPS_FLOOR;
                hit = true;
            }
        }
        s.m.dedup();
        s.eps.dedup();
        (s, hit)
    }

    pub fn eps_max(&self) -> f64 {
        self.eps[0]
    }

    pub fn eps_min(&self) -> f64 {
        *self.eps.last().expect("validated schedule")
    }
}

/// Reduced projected-gradient search used to produce a reference pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Random starts on top of the constant controls `a`, `b`, `(a+b)/2`.
    pub random_starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { random_starts: 2, max_iter: 400, tol: 1e-10, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyConfig {
    pub schedule: Schedule,
    pub inner: InnerSolveConfig,
    pub newton: NewtonConfig,
    pub bootstrap: BootstrapConfig,
    /// Degenerate threshold relative to `max|∇y|`.
    pub theta_rel: f64,
    pub max_insertions: usize,
    pub n_probes: usize,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        HomotopyConfig {
            schedule: Schedule::default(),
            inner: InnerSolveConfig { strategy: crate::optimizer::InnerStrategy::Newton, ..Default::default() },
            newton: NewtonConfig::default(),
            bootstrap: BootstrapConfig::default(),
            theta_rel: crate::adjoint::DEGENERATE_REL,
            max_insertions: 3,
            n_probes: 1000,
        }
    }
}

impl HomotopyConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.inner.validate()?;
        self.newton.validate()?;
        if !(self.theta_rel >= 0.0) || self.n_probes < 100 {
            return Err(Error::InvalidParameter("theta_rel must be nonnegative and n_probes at least 100".into()));
        }
        Ok(())
    }
}

/// Multiplier diagnostics recorded at the end of every `(τ, m)` block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRecord {
    pub mu: f64,
    pub normalization_residual: f64,
    /// Worst relative pointwise gap of `Φu - μg(u)`.
    pub limit_hamiltonian_gap: f64,
    /// `max(0, |m(v - f(y))| - 2|ψ| - τ)` over quadrature points.
    pub penalty_bound_residual: f64,
    pub penalty_bound_tolerance: f64,
    pub psi_raw_linf: f64,
    pub weighted_energy: f64,
    /// `‖2μm(v - f(y)) - Φ‖_{L²}`
    pub multiplier_indicator: f64,
    /// `‖f(y) - f(ȳ)‖` at quadrature points in the max norm.
    pub f_distance_c0: f64,
    pub past_n_tau: bool,
}

/// One inner solve of the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub eps: f64,
    pub sigma: f64,
    pub m: f64,
    pub tau: f64,
    /// Point inserted after a failed stage.
    pub inserted: bool,
    pub objective: f64,
    pub cost: f64,
    /// `‖v - f(y)‖_{L²}`
    pub penalty_norm: f64,
    /// `‖u - u_prev‖_{L²}` against the previous stage.
    pub control_shift: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub inner_change: f64,
    /// Variational-inequality residual of the inner solve.
    pub vi_gap: f64,
    pub degenerate_norm: f64,
    pub degenerate_measure: f64,
    pub multiplier: Option<MultiplierRecord>,
}

/// Line-delimited telemetry record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TelemetryRecord {
    Reference { heuristic: bool, cost: f64, candidates: Vec<f64>, pg_iterations: usize, stationarity: f64 },
    Caps { m_cap: f64, eps_floor: f64, capped: bool },
    Stage(StageRecord),
    Failure { stage: usize, message: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HomotopyTelemetry {
    pub records: Vec<TelemetryRecord>,
}

impl HomotopyTelemetry {
    pub fn stages(&self) -> impl Iterator<Item = &StageRecord> {
        self.records.iter().filter_map(|r| match r {
            TelemetryRecord::Stage(s) => Some(s),
            _ => None,
        })
    }

    /// Stages that close a `(τ, m)` block.
    pub fn block_ends(&self) -> impl Iterator<Item = (&StageRecord, &MultiplierRecord)> {
        self.stages().filter_map(|s| s.multiplier.as_ref().map(|m| (s, m)))
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("telemetry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_lines().as_bytes())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::Config(format!("telemetry line: {e}"))))
            .collect::<Result<_>>()?;
        Ok(HomotopyTelemetry { records })
    }
}

/// Final candidate of the homotopy.
#[derive(Clone, Debug)]
pub struct HomotopyOutcome<T> {
    pub y: Field<T>,
    pub pair: ControlPair<T>,
    pub multiplier: MultiplierPair<T>,
    pub psi_raw: Field<T>,
    pub params: PenaltyParams<T>,
    pub telemetry: HomotopyTelemetry,
}

impl<T: Real> HomotopyOutcome<T> {
    pub fn u(&self) -> &CellField<T> {
        &self.pair.u
    }
}

/// Aborted run with the telemetry collected so far.
#[derive(Debug)]
pub struct HomotopyAbort {
    pub error: Error,
    pub telemetry: HomotopyTelemetry,
}

impl fmt::Display for HomotopyAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "homotopy aborted: {}", self.error)
    }
}

impl std::error::Error for HomotopyAbort {}

impl From<HomotopyAbort> for Error {
    fn from(a: HomotopyAbort) -> Self {
        a.error
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Weights {
    eps: f64,
    sigma: f64,
    m: f64,
    tau: f64,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 0.0 {
        (lo * hi).sqrt()
    } else {
        0.5 * (lo + hi)
    }
}

impl Weights {
    fn between(self, other: Weights) -> Weights {
        Weights {
            eps: midpoint(self.eps, other.eps),
            sigma: midpoint(self.sigma, other.sigma),
            m: midpoint(self.m, other.m),
            tau: midpoint(self.tau, other.tau),
        }
    }
}

fn l2<T: Real>(c: &CellField<T>) -> f64 {
    c.l2_norm().to_f64_lossy()
}

struct Driver<'a, T> {
    spec: &'a ProblemSpec<T>,
    grid: &'a Arc<Grid<T>>,
    reference: &'a Reference<T>,
    cfg: &'a HomotopyConfig,
    telemetry: HomotopyTelemetry,
    stage: usize,
}

impl<'a, T: Real> Driver<'a, T> {
    fn params(&self, w: Weights, centers: &ControlPair<T>) -> Result<PenaltyParams<T>> {
        Ok(PenaltyParams::new(self.reference, lit(w.eps), lit(w.m), lit(w.tau), lit(w.sigma))?.with_centers(centers))
    }

    fn solve(&self, w: Weights, warm: &(ControlPair<T>, Field<T>)) -> Result<(InnerSolveResult<T>, PenaltyParams<T>)> {
        let params = self.params(w, &warm.0)?;
        let pen = Penalized::new(self.spec, self.grid, params.clone(), self.cfg.newton)?;
        let res = solve_inner(&pen, &warm.0, &warm.1, &self.cfg.inner)?;
        if !res.converged {
            return Err(Error::NonConvergence(format!(
                "inner solve at eps={} sigma={} m={} tau={} stopped after {} sweeps with change {:e}",
                w.eps,
                w.sigma,
                w.m,
                w.tau,
                res.sweeps,
                res.control_change.to_f64_lossy()
            )));
        }
        Ok((res, params))
    }

    fn record(&mut self, w: Weights, inserted: bool, res: &InnerSolveResult<T>, prev_u: &CellField<T>) {
        let fy = self.spec.f_at_quadrature(&res.y);
        let mask = DegenerateMask::relative(&res.y, lit(self.cfg.theta_rel));
        let rec = StageRecord {
            stage: self.stage,
            eps: w.eps,
            sigma: w.sigma,
            m: w.m,
            tau: w.tau,
            inserted,
            objective: res.objective.to_f64_lossy(),
            cost: eval_j(self.spec, &res.y, &res.pair.u).to_f64_lossy(),
            penalty_norm: l2(&res.pair.v.sub(&fy)),
            control_shift: l2(&res.pair.u.sub(prev_u)),
            sweeps: res.sweeps,
            converged: res.converged,
            inner_change: res.control_change.to_f64_lossy(),
            vi_gap: res.hamiltonian_gap.to_f64_lossy(),
            degenerate_norm: relative_degenerate_norm(&res.psi, &mask).to_f64_lossy(),
            degenerate_measure: mask.measure().to_f64_lossy(),
            multiplier: None,
        };
        log::debug!(
            "stage {} eps {:e} sigma {:e} m {:e} tau {:e}: J {:.12e} sweeps {}",
            rec.stage,
            w.eps,
            w.sigma,
            w.m,
            w.tau,
            rec.objective,
            rec.sweeps
        );
        self.telemetry.records.push(TelemetryRecord::Stage(rec));
        self.stage += 1;
    }

    fn multiplier(&self, w: Weights, res: &InnerSolveResult<T>, past: &mut bool) -> (MultiplierPair<T>, MultiplierRecord) {
        let theta = lit::<T>(self.cfg.theta_rel) * crate::adjoint::max_gradient(&res.y);
        let mp = normalize_multiplier(&res.psi).with_weighted_energy(&res.y, T::zero(), theta, self.spec.p);
        let fy = self.spec.f_at_quadrature(&res.y);
        let psi_q = res.psi.values_at_quadrature();
        let phi_q = mp.psi.values_at_quadrature();
        let m = lit::<T>(w.m);
        let tau = lit::<T>(w.tau);
        let two = lit::<T>(2.0);
        let mut bound = T::zero();
        let mut indicator = T::zero();
        let grid = res.y.grid();
        for q in 0..grid.n_quad() {
            let pen = m * (res.pair.v.values()[q] - fy.values()[q]);
            bound = bound.max((pen.abs() - two * psi_q[q].abs() - tau).max(T::zero()));
            let d = two * mp.mu * pen - phi_q[q];
            indicator = indicator + grid.quad_weight(q) * d * d;
        }
        let psi_linf = psi_q.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let gaps = hamiltonian_max_gaps(&self.spec.g, res.pair.u.values(), &phi_q, mp.mu, self.spec.a, self.spec.b, self.cfg.n_probes);
        let gap = gaps.iter().fold(T::zero(), |acc, &(g, best)| acc.max(g / (T::one() + best.abs())));
        let fdist = fy.sub(&self.reference.fybar).linf_norm();
        if fdist < lit(0.5) {
            *past = true;
        }
        let rec = MultiplierRecord {
            mu: mp.mu.to_f64_lossy(),
            normalization_residual: mp.normalization_residual.to_f64_lossy(),
            limit_hamiltonian_gap: gap.to_f64_lossy(),
            penalty_bound_residual: bound.to_f64_lossy(),
            penalty_bound_tolerance: 1e-6 * psi_linf.to_f64_lossy() + 1e-8,
            psi_raw_linf: psi_linf.to_f64_lossy(),
            weighted_energy: mp.weighted_energy.map(|e| e.to_f64_lossy()).unwrap_or(0.0),
            multiplier_indicator: indicator.sqrt().to_f64_lossy(),
            f_distance_c0: fdist.to_f64_lossy(),
            past_n_tau: *past,
        };
        (mp, rec)
    }

    fn abort(mut self, error: Error) -> HomotopyAbort {
        self.telemetry.records.push(TelemetryRecord::Failure { stage: self.stage, message: error.to_string() });
        HomotopyAbort { error, telemetry: self.telemetry }
    }
}

/// Runs the nested schedule from the reference pair, warm-starting every
/// stage from the previous one and centering the proximal terms there.
/// Multipliers are normalized at the end of every `(τ, m)` block and the
/// last block's pair is returned.
pub fn run_homotopy<T: Real>(
    spec: &ProblemSpec<T>,
    grid: &Arc<Grid<T>>,
    reference: &Reference<T>,
    cfg: &HomotopyConfig,
) -> std::result::Result<HomotopyOutcome<T>, HomotopyAbort> {
    let empty = || HomotopyTelemetry::default();
    if let Err(error) = cfg.validate() {
        return Err(HomotopyAbort { error, telemetry: empty() });
    }
    let (schedule, capped) = cfg.schedule.capped();
    let mut drv = Driver { spec, grid, reference, cfg, telemetry: empty(), stage: 0 };
    drv.telemetry.records.push(TelemetryRecord::Caps { m_cap: M_CAP, eps_floor: EPS_FLOOR, capped });

    let start = ControlPair::at_reference(reference);
    let mut warm = (start, reference.ybar.clone());
    let mut last = Weights { eps: schedule.eps[0], sigma: schedule.sigma[0], m: schedule.m[0], tau: schedule.tau[0] };
    let mut final_block = None;
    for &tau in &schedule.tau {
        let mut past = false;
        for &m in &schedule.m {
            let mut block_end = None;
            for &sigma in &schedule.sigma {
                for &eps in &schedule.eps {
                    let target = Weights { eps, sigma, m, tau };
                    let mut hi = target;
                    let mut insertions = 0;
                    loop {
                        match drv.solve(hi, &warm) {
                            Ok((res, params)) => {
                                drv.record(hi, hi != target, &res, &warm.0.u);
                                warm = (res.pair.clone(), res.y.clone());
                                last = hi;
                                if hi == target {
                                    block_end = Some((res, params));
                                    break;
                                }
                                hi = target;
                            }
                            Err(e) => {
                                if insertions == cfg.max_insertions {
                                    return Err(drv.abort(e));
                                }
                                log::info!("stage {} failed ({e}); inserting an intermediate point", drv.stage);
                                insertions += 1;
                                hi = last.between(hi);
                            }
                        }
                    }
                }
            }
            let (res, params) = block_end.expect("nonempty schedule");
            let w = Weights { eps: schedule.eps_min(), sigma: *schedule.sigma.last().unwrap(), m, tau };
            let (mp, rec) = drv.multiplier(w, &res, &mut past);
            if let Some(TelemetryRecord::Stage(s)) = drv.telemetry.records.last_mut() {
                s.multiplier = Some(rec);
            }
            final_block = Some((res, params, mp));
        }
    }
    let (res, params, multiplier) = final_block.expect("nonempty schedule");
    Ok(HomotopyOutcome { y: res.y, pair: res.pair, multiplier, psi_raw: res.psi, params, telemetry: drv.telemetry })
}

/// Reference candidate from the bootstrap search.
#[derive(Clone, Debug)]
pub struct BootstrapResult<T> {
    pub reference: Reference<T>,
    pub cost: T,
    /// Best cost reached from every start.
    pub candidates: Vec<T>,
    pub iterations: usize,
    pub stationarity: T,
}

impl<T: Real> BootstrapResult<T> {
    pub fn record(&self) -> TelemetryRecord {
        TelemetryRecord::Reference {
            heuristic: true,
            cost: self.cost.to_f64_lossy(),
            candidates: self.candidates.iter().map(|c| c.to_f64_lossy()).collect(),
            pg_iterations: self.iterations,
            stationarity: self.stationarity.to_f64_lossy(),
        }
    }
}

struct Reduced<'a, T> {
    spec: &'a ProblemSpec<T>,
    op: crate::state::PLaplacian<T>,
    eps: T,
    newton: NewtonConfig,
}

impl<T: Real> Reduced<'_, T> {
    fn state(&self, u: &CellField<T>, warm: &Field<T>) -> Result<Field<T>> {
        let (y, rep) = self.op.solve_semilinear(u, self.eps, &self.spec.f, &self.spec.growth, warm, &self.newton)?;
        if !rep.converged {
            return Err(Error::NonConvergence(format!("semilinear state stalled at residual {}", rep.residual)));
        }
        Ok(y)
    }

    /// `g'(u) - ψ` with `(K - M_{f'}) ψ = -f⁰_y`.
    fn gradient(&self, u: &CellField<T>, y: &Field<T>) -> Result<CellField<T>> {
        let grid = y.grid();
        let yq = y.values_at_quadrature();
        let src = (0..grid.n_quad()).map(|q| -self.spec.f0.dy(grid.quad_point(q), yq[q])).collect();
        let psi = solve_adjoint_semilinear(&self.op, y, self.eps, &self.spec.f, &AdjointSource::from_values(grid, src))?;
        let pq = psi.values_at_quadrature();
        let h = self.spec.derivative_step();
        Ok(CellField::from_values(grid, (0..grid.n_quad()).map(|q| self.spec.g.deriv(u.values()[q], h) - pq[q]).collect()))
    }

    fn project_step(&self, u: &CellField<T>, grad: &CellField<T>, s: T) -> CellField<T> {
        u.zip_map(grad, |a, g| clip(a - s * g, self.spec.a, self.spec.b))
    }

    /// Projected gradient with Armijo backtracking along the projection arc.
    fn descend(&self, mut u: CellField<T>, mut y: Field<T>, cfg: &BootstrapConfig) -> Result<(CellField<T>, Field<T>, T, usize, T)> {
        let tol = lit::<T>(cfg.tol);
        let c1 = lit::<T>(1e-4);
        let mut cost = eval_j(self.spec, &y, &u);
        let mut step = T::one();
        let mut stat = T::infinity();
        let mut it = 0;
        while it < cfg.max_iter {
            let grad = self.gradient(&u, &y)?;
            stat = self.project_step(&u, &grad, T::one()).sub(&u).l2_norm();
            if stat < tol {
                break;
            }
            let mut accepted = None;
            let mut s = step;
            for _ in 0..50 {
                let trial = self.project_step(&u, &grad, s);
                let d = trial.sub(&u);
                if let Ok(yt) = self.state(&trial, &y) {
                    let ct = eval_j(self.spec, &yt, &trial);
                    if ct <= cost + c1 * grad.inner(&d) || (d.l2_norm() < tol && ct <= cost) {
                        accepted = Some((trial, yt, ct, s == step));
                        break;
                    }
                }
                s = s * lit(0.5);
            }
            let Some((un, yn, cn, first)) = accepted else {
                break;
            };
            step = if first { s * lit(2.0) } else { s };
            u = un;
            y = yn;
            cost = cn;
            it += 1;
        }
        Ok((u, y, cost, it, stat))
    }
}

/// Heuristic reference pair: multistart projected gradient on the reduced
/// semilinear problem at `ε_max`, then the best candidate is continued
/// along the `ε` schedule down to `ε_min`. `warm`, when given, replaces
/// the multistart.
pub fn bootstrap_reference<T: Real>(
    spec: &ProblemSpec<T>,
    grid: &Arc<Grid<T>>,
    cfg: &HomotopyConfig,
    warm: Option<&CellField<T>>,
) -> Result<BootstrapResult<T>> {
    let bc = &cfg.bootstrap;
    let schedule = cfg.schedule.capped().0;
    let mk = |eps: f64| -> Result<Reduced<'_, T>> {
        Ok(Reduced { spec, op: spec.operator(grid)?, eps: lit(eps), newton: cfg.newton })
    };
    let starts: Vec<CellField<T>> = match warm {
        Some(u) => vec![u.clone()],
        None => {
            let mid = (spec.a + spec.b) * lit(0.5);
            let mut v = vec![CellField::constant(grid, spec.a), CellField::constant(grid, spec.b), CellField::constant(grid, mid)];
            let mut rng = ChaCha8Rng::seed_from_u64(bc.seed);
            let (a, b) = (spec.a.to_f64_lossy(), spec.b.to_f64_lossy());
            for _ in 0..bc.random_starts {
                v.push(CellField::from_values(grid, (0..grid.n_quad()).map(|_| lit(rng.gen_range(a..=b))).collect()));
            }
            v
        }
    };
    let coarse = mk(schedule.eps_max())?;
    let mut best: Option<(CellField<T>, Field<T>, T, usize, T)> = None;
    let mut candidates = Vec::new();
    for u0 in starts {
        let Ok(y0) = coarse.state(&u0, &Field::zeros(grid)) else {
            continue;
        };
        let Ok(run) = coarse.descend(u0, y0, bc) else {
            continue;
        };
        candidates.push(run.2);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (mut u, mut y, mut cost, mut iters, mut stat) =
        best.ok_or_else(|| Error::NonConvergence("no bootstrap start produced a state".into()))?;
    for &eps in schedule.eps.iter().skip(1) {
        let red = mk(eps)?;
        let y0 = red.state(&u, &y)?;
        let run = red.descend(u, y0, bc)?;
        iters += run.3;
        (u, y, cost, stat) = (run.0, run.1, run.2, run.4);
    }
    Ok(BootstrapResult { reference: Reference::new(spec, y, u), cost, candidates, iterations: iters, stationarity: stat })
}
