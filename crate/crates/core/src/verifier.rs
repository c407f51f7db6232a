//! Numerical checks of the limit optimality system on a final candidate.

use crate::adjoint::{degenerate_gradient_norm, DegenerateMask, MultiplierPair};
use crate::discretization::{CellField, Field};
use crate::error::Result;
use crate::objective::{ControlCost, ControlPair, Penalized, ProblemSpec};
use crate::scalar::{lit, Real};
use crate::state::DiffusionTensor;
use std::fmt;

/// Below this `μ` the multiplier is reported as possibly abnormal.
pub const ABNORMAL_MU: f64 = 1e-6;
/// Relative tolerance of the pointwise Hamiltonian maximum check.
pub const HAMILTONIAN_REL_TOL: f64 = 1e-6;
/// Relative tolerance of the degenerate-set check.
pub const DEGENERATE_TOL: f64 = 1e-4;

/// Outcome of a single check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub diagnostics: Vec<(String, String)>,
}

impl CheckReport {
    fn new(name: &str, pass: bool, value: f64, threshold: f64) -> Self {
        CheckReport { name: name.into(), pass, value, threshold, diagnostics: Vec::new() }
    }

    fn diag(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.diagnostics.push((key.into(), value.to_string()));
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<&str> {
        self.diagnostics.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.name)?;
        writeln!(f, "status = {}", if self.pass { "pass" } else { "fail" })?;
        writeln!(f, "value = {:e}", self.value)?;
        writeln!(f, "threshold = {:e}", self.threshold)?;
        for (k, v) in &self.diagnostics {
            writeln!(f, "diagnostics.{k} = {v}")?;
        }
        Ok(())
    }
}

/// Collection of checks, rendered as one section per check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<CheckReport>,
}

impl VerificationReport {
    pub fn push(&mut self, check: CheckReport) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "overall = {}", if self.passed() { "pass" } else { "fail" })?;
        for c in &self.checks {
            writeln!(f)?;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64_lossy()
}

/// `μ + ‖ψ‖_{H¹₀} > 1e-8`, cross-checking `‖ψ‖_{L²} + μ = 1`.
pub fn check_nontriviality<T: Real>(pair: &MultiplierPair<T>) -> CheckReport {
    let n = pair.psi.norms();
    let value = f64_of(pair.mu + n.h10);
    let mut r = CheckReport::new("nontriviality", value > 1e-8, value, 1e-8)
        .diag("mu", f64_of(pair.mu))
        .diag("psi_h10", f64_of(n.h10))
        .diag("l2_normalization", f64_of(n.l2 + pair.mu));
    if f64_of(pair.mu) < ABNORMAL_MU {
        r = r.diag("multiplier", "possibly abnormal multiplier");
    }
    r
}

/// Dual-norm residual of `-div(A_ε(∇y)∇ψ) = f'(y)ψ - μ f⁰_y(x, y)`, tested
/// only with hat functions supported in cells where `|∇y| > θ`, and
/// normalized by `‖ψ‖_{H¹₀} + μ`.
pub fn check_adjoint_residual<T: Real>(
    y: &Field<T>,
    psi: &Field<T>,
    mu: T,
    spec: &ProblemSpec<T>,
    theta: T,
    eps_check: T,
) -> Result<T> {
    let g = y.grid();
    let op = spec.operator(g)?;
    let gy = y.gradient_at_quadrature();
    let yq = y.values_at_quadrature();
    let gp = psi.gradient_at_quadrature();
    let pq = psi.values_at_quadrature();
    let nondeg: Vec<bool> = gy.iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt() > theta).collect();
    let mut r = vec![T::zero(); g.n_dofs()];
    let mut excluded = vec![false; g.n_dofs()];
    let npe = g.nodes_per_element();
    for e in 0..g.n_elements() {
        let quads = g.element_quads(e);
        let good = quads.clone().all(|q| nondeg[q]);
        let nodes = g.element_nodes(e);
        if !good {
            for &node in nodes {
                if let Some(i) = g.dof_of_node(node) {
                    excluded[i] = true;
                }
            }
            continue;
        }
        for q in quads {
            let t = DiffusionTensor::new(gy[q], eps_check, spec.p);
            let flux = t.apply(gp[q]);
            let zeroth = -spec.f.deriv(yq[q]) * pq[q] + mu * spec.f0.dy(g.quad_point(q), yq[q]);
            let w = g.quad_weight(q);
            for (a, &node) in nodes.iter().enumerate().take(npe) {
                let Some(i) = g.dof_of_node(node) else { continue };
                let dphi = g.shape_grad(q, a);
                r[i] = r[i] + w * (flux[0] * dphi[0] + flux[1] * dphi[1] + zeroth * g.shape(q, a));
            }
        }
    }
    for (ri, &ex) in r.iter_mut().zip(&excluded) {
        if ex {
            *ri = T::zero();
        }
    }
    let z = op.stiffness().cholesky()?.solve(&r);
    let dual: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum::<T>().max(T::zero()).sqrt();
    let scale = psi.norms().h10 + mu;
    Ok(if scale > T::zero() { dual / scale } else { dual })
}

/// `∫_{|∇y| ≤ θ} |∇ψ|²` relative to `‖∇ψ‖²_{L²}`; zero when both vanish.
pub fn relative_degenerate_norm<T: Real>(psi: &Field<T>, mask: &DegenerateMask<T>) -> T {
    let num = degenerate_gradient_norm(psi, mask);
    let h = psi.norms().h10;
    let den = h * h;
    if num == T::zero() {
        T::zero()
    } else {
        num / den
    }
}

pub fn check_degenerate_set<T: Real>(y: &Field<T>, psi: &Field<T>, theta: T) -> CheckReport {
    let mask = DegenerateMask::new(y, theta);
    let value = f64_of(relative_degenerate_norm(psi, &mask));
    CheckReport::new("degenerate_set", value <= DEGENERATE_TOL, value, DEGENERATE_TOL)
        .diag("theta", f64_of(theta))
        .diag("mask_measure", f64_of(mask.measure()))
        .diag("absolute_norm", f64_of(degenerate_gradient_norm(psi, &mask)))
}

/// Pointwise gaps `max_grid H - H(u)` of `H(u) = ψu - μg(u)` together
/// with the pointwise maxima; the grid has `n_probes` equispaced points.
pub fn hamiltonian_max_gaps<T: Real>(
    g: &ControlCost<T>,
    u: &[T],
    psi_q: &[T],
    mu: T,
    a: T,
    b: T,
    n_probes: usize,
) -> Vec<(T, T)> {
    let n = n_probes.max(2);
    let denom = lit::<T>((n - 1) as f64);
    u.iter()
        .zip(psi_q)
        .map(|(&uc, &ps)| {
            let h = |w: T| ps * w - mu * g.eval(w);
            let hc = h(uc);
            let best = (0..n)
                .map(|k| h(a + (b - a) * lit::<T>(k as f64) / denom))
                .fold(hc, |m, v| m.max(v));
            (best - hc, best)
        })
        .collect()
}

/// Passes iff every pointwise gap is within `1e-6 (1 + |pointwise max|)`.
pub fn check_hamiltonian_max<T: Real>(
    u: &CellField<T>,
    psi: &Field<T>,
    mu: T,
    spec: &ProblemSpec<T>,
    n_probes: usize,
) -> CheckReport {
    let pq = psi.values_at_quadrature();
    let gaps = hamiltonian_max_gaps(&spec.g, u.values(), &pq, mu, spec.a, spec.b, n_probes);
    let tol = lit::<T>(HAMILTONIAN_REL_TOL);
    let mut worst_rel = T::zero();
    let mut worst_abs = T::zero();
    let mut worst_q = 0;
    for (q, &(gap, best)) in gaps.iter().enumerate() {
        let rel = gap / (T::one() + best.abs());
        if rel > worst_rel {
            worst_rel = rel;
            worst_q = q;
        }
        worst_abs = worst_abs.max(gap);
    }
    let value = f64_of(worst_rel);
    CheckReport::new("hamiltonian_max", worst_rel <= tol, value, HAMILTONIAN_REL_TOL)
        .diag("worst_abs_gap", f64_of(worst_abs))
        .diag("worst_point", worst_q)
        .diag("n_probes", n_probes.max(2))
}

/// One-sided difference quotients of the regularized cost along the
/// convex combination `(1-δ) pair + δ probe`, linearly extrapolated to
/// `δ = 0` and compared with the adjoint directional derivative.
pub fn check_spike_derivative<T: Real>(
    pen: &Penalized<'_, T>,
    pair: &ControlPair<T>,
    y: &Field<T>,
    probe: &ControlPair<T>,
    deltas: &[T],
) -> Result<CheckReport> {
    let (y0, _) = pen.state(pair, y)?;
    let j0 = pen.cost(pair, &y0);
    let grad = pen.gradient(pair, &y0)?;
    let dir = ControlPair::new(probe.v.sub(&pair.v), probe.u.sub(&pair.u));
    let predicted = grad.directional(&dir);
    let mut quotients = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let trial = ControlPair::new(pair.v.axpy(d, &dir.v), pair.u.axpy(d, &dir.u));
        let (yt, _) = pen.state(&trial, &y0)?;
        quotients.push((pen.cost(&trial, &yt) - j0) / d);
    }
    let limit = match quotients.len() {
        0 => predicted,
        1 => quotients[0],
        k => {
            let (d1, d2) = (deltas[k - 2], deltas[k - 1]);
            let (q1, q2) = (quotients[k - 2], quotients[k - 1]);
            q2 - d2 * (q1 - q2) / (d1 - d2)
        }
    };
    let err = (limit - predicted).abs();
    let rel = if err == T::zero() { T::zero() } else { err / predicted.abs().max(lit(1e-12)) };
    let pass = limit >= lit(-1e-5) && rel <= lit(1e-3);
    let qs: Vec<String> = quotients.iter().map(|q| format!("{:e}", f64_of(*q))).collect();
    Ok(CheckReport::new("spike_derivative", pass, f64_of(limit), -1e-5)
        .diag("predicted", format!("{:e}", f64_of(predicted)))
        .diag("relative_error", format!("{:e}", f64_of(rel)))
        .diag("quotients", qs.join(" ")))
}

/// Default flat-set band `1e-3 (|μ| + ‖ψ‖_{L∞})`.
pub fn default_delta_flat<T: Real>(psi: &Field<T>, mu: T) -> T {
    let linf = psi.values_at_quadrature().iter().fold(T::zero(), |m, v| m.max(v.abs()));
    lit::<T>(1e-3) * (mu.abs() + linf)
}

/// Bang-bang structure for a linear control cost `g(u) = c u`: fraction of
/// quadrature points with `u ∈ {a, b}`, measure fraction of
/// `{|ψ - μc| ≤ δ_flat}` and of the degenerate set `{|∇y| ≤ θ}`.
#[allow(clippy::too_many_arguments)]
pub fn check_bangbang<T: Real>(
    u: &CellField<T>,
    psi: &Field<T>,
    mu: T,
    slope: T,
    a: T,
    b: T,
    delta_flat: Option<T>,
    y: &Field<T>,
    theta: T,
) -> CheckReport {
    let g = u.grid();
    let tol = lit::<T>(1e-9);
    let nq = g.n_quad();
    let bang = u.values().iter().filter(|&&v| (v - a).abs() <= tol || (v - b).abs() <= tol).count();
    let frac_bang = bang as f64 / nq as f64;
    let delta = delta_flat.unwrap_or_else(|| default_delta_flat(psi, mu * slope));
    let pq = psi.values_at_quadrature();
    let total = g.domain().measure();
    let flat: T = (0..nq).filter(|&q| (pq[q] - mu * slope).abs() <= delta).map(|q| g.quad_weight(q)).sum();
    let frac_flat = f64_of(flat / total);
    let frac_deg = f64_of(DegenerateMask::new(y, theta).fraction());
    let pass = frac_bang >= 0.99 && frac_flat <= 0.01 && frac_deg <= 0.01;
    CheckReport::new("bang_bang", pass, frac_bang, 0.99)
        .diag("flat_fraction", frac_flat)
        .diag("degenerate_fraction", frac_deg)
        .diag("delta_flat", f64_of(delta))
        .diag("interior_points", nq - bang)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::DomainSpec;
    use crate::objective::RunningCost;
    use crate::state::{GrowthSpec, Nonlinearity};

    fn spec(g: ControlCost<f64>, a: f64, b: f64) -> ProblemSpec<f64> {
        ProblemSpec {
            name: "t".into(),
            domain: DomainSpec::unit_interval(),
            p: 1.5,
            a,
            b,
            f: Nonlinearity::zero(),
            growth: GrowthSpec { c: 1.0, r: 1.0 },
            f0: RunningCost::zero(),
            g,
        }
    }

    #[test]
    fn nontriviality_cases() {
        let s = spec(ControlCost::Linear { c: 1.0 }, 0.0, 1.0);
        let grid = s.grid(8).unwrap();
        let z = Field::zeros(&grid);
        assert!(check_nontriviality(&MultiplierPair::new(z.clone(), 1.0)).pass);
        let r = check_nontriviality(&MultiplierPair::new(z, 0.0));
        assert!(!r.pass);
        assert_eq!(r.diagnostic("multiplier"), Some("possibly abnormal multiplier"));
    }

    #[test]
    fn linear_hamiltonian_picks_endpoints() {
        let s = spec(ControlCost::Linear { c: 1.0 }, 0.0, 2.0);
        let grid = s.grid(8).unwrap();
        let psi = Field::from_fn(&grid, |x| 4.0 * x[0] * (1.0 - x[0]) * 3.0);
        let pq = psi.values_at_quadrature();
        let good = CellField::from_values(&grid, pq.iter().map(|&p| if p > 1.0 { 2.0 } else { 0.0 }).collect());
        assert!(check_hamiltonian_max(&good, &psi, 1.0, &s, 100).pass);
        let bad = CellField::from_values(&grid, pq.iter().map(|&p| if p > 1.0 { 0.0 } else { 2.0 }).collect());
        assert!(!check_hamiltonian_max(&bad, &psi, 1.0, &s, 100).pass);
    }

    #[test]
    fn quadratic_hamiltonian_interior_maximizer() {
        let s = spec(ControlCost::Quadratic { alpha: 1.0, beta: 0.0 }, -1.0, 1.0);
        let gaps = hamiltonian_max_gaps(&s.g, &[0.3], &[0.3], 1.0, -1.0, 1.0, 1001);
        assert_eq!(gaps[0].0, 0.0);
        assert!((gaps[0].1 - 0.045).abs() < 1e-15);
    }

    #[test]
    fn degenerate_check_on_shared_zeros() {
        let s = spec(ControlCost::Linear { c: 1.0 }, 0.0, 1.0);
        let grid = s.grid(16).unwrap();
        let y = Field::from_fn(&grid, |x| x[0] * (1.0 - x[0]));
        let r = check_degenerate_set(&y, &y, 0.0);
        assert!(r.pass);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn bangbang_flat_set_fails() {
        let s = spec(ControlCost::Linear { c: 1.0 }, 0.0, 1.0);
        let grid = s.grid(16).unwrap();
        let y = Field::from_fn(&grid, |x| x[0] * (1.0 - x[0]));
        let psi = Field::from_fn(&grid, |x| 0.2 + x[0] * (1.0 - x[0]));
        let u = CellField::constant(&grid, 0.0);
        let r = check_bangbang(&u, &psi, 0.1, 1.0, 0.0, 1.0, None, &y, 1e-12);
        assert!(r.pass);
        assert_eq!(r.value, 1.0);
        let mu = 0.5;
        let flat = Field::from_fn(&grid, |x| if x[0] > 0.0 && x[0] < 1.0 { mu } else { 0.0 });
        let r = check_bangbang(&u, &flat, mu, 1.0, 0.0, 1.0, None, &y, 1e-12);
        assert!(!r.pass);
    }

    #[test]
    fn report_is_deterministic() {
        let s = spec(ControlCost::Linear { c: 1.0 }, 0.0, 1.0);
        let grid = s.grid(8).unwrap();
        let mk = || {
            let mut rep = VerificationReport::default();
            rep.push(check_nontriviality(&MultiplierPair::new(Field::zeros(&grid), 1.0)));
            rep.to_string()
        };
        assert_eq!(mk(), mk());
        assert!(mk().contains("[nontriviality]\nstatus = pass"));
    }
}
