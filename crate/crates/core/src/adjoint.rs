//! Linear adjoint equations and multiplier diagnostics.

use crate::discretization::{CellField, Field, Grid};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::scalar::{lit, Real};
use crate::state::{Nonlinearity, PLaplacian};
use std::sync::Arc;

/// Per-quadrature-point right-hand side of an adjoint equation.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointSource<T> {
    values: CellField<T>,
}

impl<T: Real> AdjointSource<T> {
    pub fn from_values(grid: &Arc<Grid<T>>, values: Vec<T>) -> Self {
        AdjointSource { values: CellField::from_values(grid, values) }
    }

    pub fn from_cells(values: CellField<T>) -> Self {
        AdjointSource { values }
    }

    pub fn values(&self) -> &CellField<T> {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.values().iter().all(|v| v.is_finite())
    }
}

fn check_source<T: Real>(y: &Field<T>, src: &AdjointSource<T>) -> Result<()> {
    if !Arc::ptr_eq(y.grid(), src.values.grid()) {
        return Err(Error::GridMismatch);
    }
    if !src.is_finite() {
        return Err(Error::InvalidParameter("adjoint source is not finite".into()));
    }
    Ok(())
}

/// Solves `K(y, ε) ψ = load(source)` with the state Newton Jacobian.
pub fn solve_adjoint<T: Real>(op: &PLaplacian<T>, y: &Field<T>, eps: T, src: &AdjointSource<T>) -> Result<Field<T>> {
    check_source(y, src)?;
    let k = op.assemble_jacobian(y, eps)?;
    let load = op.grid().load_vector(src.values.values());
    let psi = k.cholesky()?.solve(&load);
    Ok(Field::from_dofs(op.grid(), &psi))
}

/// Solves `(K(y, ε) - M_{f'(y)}) ψ = load(source)`, the adjoint of the
/// semilinear equation (possibly indefinite).
pub fn solve_adjoint_semilinear<T: Real>(
    op: &PLaplacian<T>,
    y: &Field<T>,
    eps: T,
    f: &Nonlinearity<T>,
    src: &AdjointSource<T>,
) -> Result<Field<T>> {
    check_source(y, src)?;
    let k = op.semilinear_jacobian(y, eps, f)?;
    let load = op.grid().load_vector(src.values.values());
    let psi = k.ldlt()?.solve(&load);
    Ok(Field::from_dofs(op.grid(), &psi))
}

/// Quadrature points where `|∇y| <= θ`.
#[derive(Clone, Debug)]
pub struct DegenerateMask<T> {
    mask: Vec<bool>,
    theta: T,
    grid: Arc<Grid<T>>,
}

impl<T: Real> DegenerateMask<T> {
    pub fn new(y: &Field<T>, theta: T) -> Self {
        let mask = y.gradient_at_quadrature().iter().map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt() <= theta).collect();
        DegenerateMask { mask, theta, grid: y.grid().clone() }
    }

    /// Threshold `rel · max|∇y|`.
    pub fn relative(y: &Field<T>, rel: T) -> Self {
        Self::new(y, rel * max_gradient(y))
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn measure(&self) -> T {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(q, _)| self.grid.quad_weight(q)).sum()
    }

    pub fn fraction(&self) -> T {
        self.measure() / self.grid.domain().measure()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }
}

/// Default relative degeneracy threshold.
pub const DEGENERATE_REL: f64 = 1e-4;

pub fn max_gradient<T: Real>(y: &Field<T>) -> T {
    y.gradient_at_quadrature().iter().fold(T::zero(), |m, g| m.max((g[0] * g[0] + g[1] * g[1]).sqrt()))
}

/// `∫_{|∇y| > θ} (ε² + |∇y|²)^{(p-2)/2} |∇ψ|²`
pub fn weighted_energy<T: Real>(y: &Field<T>, psi: &Field<T>, eps: T, theta: T, p: T) -> T {
    let g = y.grid();
    let gy = y.gradient_at_quadrature();
    let gp = psi.gradient_at_quadrature();
    let half = (p - lit(2.0)) * lit(0.5);
    (0..g.n_quad())
        .filter_map(|q| {
            let ny2 = gy[q][0] * gy[q][0] + gy[q][1] * gy[q][1];
            let s2 = eps * eps + ny2;
            if ny2.sqrt() <= theta || s2 == T::zero() {
                return None;
            }
            Some(g.quad_weight(q) * s2.powf(half) * (gp[q][0] * gp[q][0] + gp[q][1] * gp[q][1]))
        })
        .sum()
}

/// `∫_mask |∇ψ|²`
pub fn degenerate_gradient_norm<T: Real>(psi: &Field<T>, mask: &DegenerateMask<T>) -> T {
    let g = psi.grid();
    let gp = psi.gradient_at_quadrature();
    (0..g.n_quad())
        .filter(|&q| mask.mask[q])
        .map(|q| g.quad_weight(q) * (gp[q][0] * gp[q][0] + gp[q][1] * gp[q][1]))
        .sum()
}

/// Normalized multiplier pair `(μ, ψ)` with `‖ψ‖_{L²} + μ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierPair<T> {
    pub psi: Field<T>,
    pub mu: T,
    pub normalization_residual: T,
    pub weighted_energy: Option<T>,
}

impl<T: Real> MultiplierPair<T> {
    pub fn new(psi: Field<T>, mu: T) -> Self {
        let normalization_residual = (psi.norms().l2 + mu - T::one()).abs();
        MultiplierPair { psi, mu, normalization_residual, weighted_energy: None }
    }

    pub fn with_weighted_energy(mut self, y: &Field<T>, eps: T, theta: T, p: T) -> Self {
        self.weighted_energy = Some(weighted_energy(y, &self.psi, eps, theta, p));
        self
    }
}

/// `μ = 1/(‖ψ_raw‖_{L²} + 1)`, `ψ = μ ψ_raw`.
pub fn normalize_multiplier<T: Real>(psi_raw: &Field<T>) -> MultiplierPair<T> {
    let mu = T::one() / (psi_raw.norms().l2 + T::one());
    MultiplierPair::new(psi_raw.scaled(mu), mu)
}

/// `|K ψ - load|₂` for a candidate adjoint.
pub fn adjoint_residual_norm<T: Real>(op: &PLaplacian<T>, y: &Field<T>, eps: T, psi: &Field<T>, src: &AdjointSource<T>) -> Result<T> {
    let k = op.assemble_jacobian(y, eps)?;
    let load = op.grid().load_vector(src.values.values());
    let r: Vec<T> = k.matvec(&psi.dofs()).iter().zip(&load).map(|(&a, &b)| a - b).collect();
    Ok(norm2(&r))
}
