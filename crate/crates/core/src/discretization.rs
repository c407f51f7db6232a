//! Structured P1/Q1 finite element meshes on intervals and rectangles.
//!
//! Nodal fields carry homogeneous Dirichlet data; cell fields live at the
//! Gauss points of each element (two per interval cell, 2x2 per square).

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

/// A point in the plane; 1D grids keep the second coordinate at zero.
pub type Point<T> = [T; 2];

#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec<T> {
    Interval { x0: T, x1: T },
    Rectangle { x0: T, x1: T, y0: T, y1: T },
}

impl<T: Real> DomainSpec<T> {
    pub fn unit_interval() -> Self {
        DomainSpec::Interval { x0: T::zero(), x1: T::one() }
    }

    pub fn unit_square() -> Self {
        DomainSpec::Rectangle { x0: T::zero(), x1: T::one(), y0: T::zero(), y1: T::one() }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Rectangle { .. } => 2,
        }
    }

    pub fn measure(&self) -> T {
        match *self {
            DomainSpec::Interval { x0, x1 } => x1 - x0,
            DomainSpec::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DomainSpec::Interval { x0, x1 } => x1 > x0 && (x1 - x0).is_finite(),
            DomainSpec::Rectangle { x0, x1, y0, y1 } => {
                x1 > x0 && y1 > y0 && (x1 - x0).is_finite() && (y1 - y0).is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!("degenerate extents {self:?}")))
        }
    }
}

/// Immutable structured mesh with precomputed quadrature data.
pub struct Grid<T> {
    domain: DomainSpec<T>,
    dim: usize,
    n: usize,
    hx: T,
    hy: T,
    nodes: Vec<Point<T>>,
    elements: Vec<[usize; 4]>,
    dof_of_node: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
    quad_x: Vec<Point<T>>,
    quad_w: Vec<T>,
    phi: Vec<T>,
    dphi: Vec<Point<T>>,
}

impl<T: fmt::Debug> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("domain", &self.domain)
            .field("n", &self.n)
            .field("nodes", &self.nodes.len())
            .field("dofs", &self.node_of_dof.len())
            .finish()
    }
}

/// Build a uniform grid with `n_cells_per_axis` cells along every axis.
pub fn build_grid<T: Real>(domain: DomainSpec<T>, n_cells_per_axis: usize) -> Result<Arc<Grid<T>>> {
    Grid::new(domain, n_cells_per_axis).map(Arc::new)
}

impl<T: Real> Grid<T> {
    pub fn new(domain: DomainSpec<T>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells per axis, got {n}")));
        }
        domain.validate()?;
        let nf = T::from_usize(n).unwrap();
        let g = lit::<T>(0.5) / lit::<T>(3.0).sqrt();
        let half = lit::<T>(0.5);
        let gauss = [half - g, half + g];
        match domain {
            DomainSpec::Interval { x0, x1 } => {
                let hx = (x1 - x0) / nf;
                let nodes: Vec<Point<T>> = (0..=n)
                    .map(|i| [x0 + hx * T::from_usize(i).unwrap(), T::zero()])
                    .collect();
                let elements: Vec<[usize; 4]> = (0..n).map(|e| [e, e + 1, 0, 0]).collect();
                let mut dof_of_node = vec![None; n + 1];
                let mut node_of_dof = Vec::with_capacity(n - 1);
                for (i, d) in dof_of_node.iter_mut().enumerate().take(n).skip(1) {
                    *d = Some(node_of_dof.len());
                    node_of_dof.push(i);
                }
                let mut quad_x = Vec::with_capacity(2 * n);
                let mut quad_w = Vec::with_capacity(2 * n);
                let mut phi = Vec::with_capacity(4 * n);
                let mut dphi = Vec::with_capacity(4 * n);
                for e in 0..n {
                    let xl = nodes[e][0];
                    for &xi in &gauss {
                        quad_x.push([xl + xi * hx, T::zero()]);
                        quad_w.push(half * hx);
                        phi.push(T::one() - xi);
                        phi.push(xi);
                        dphi.push([-T::one() / hx, T::zero()]);
                        dphi.push([T::one() / hx, T::zero()]);
                    }
                }
                Ok(Grid {
                    domain,
                    dim: 1,
                    n,
                    hx,
                    hy: T::zero(),
                    nodes,
                    elements,
                    dof_of_node,
                    node_of_dof,
                    quad_x,
                    quad_w,
                    phi,
                    dphi,
                })
            }
            DomainSpec::Rectangle { x0, x1, y0, y1 } => {
                let hx = (x1 - x0) / nf;
                let hy = (y1 - y0) / nf;
                let np = n + 1;
                let mut nodes = Vec::with_capacity(np * np);
                let mut dof_of_node = vec![None; np * np];
                let mut node_of_dof = Vec::with_capacity((n - 1) * (n - 1));
                for j in 0..np {
                    for i in 0..np {
                        let id = j * np + i;
                        nodes.push([
                            x0 + hx * T::from_usize(i).unwrap(),
                            y0 + hy * T::from_usize(j).unwrap(),
                        ]);
                        if i > 0 && i < n && j > 0 && j < n {
                            dof_of_node[id] = Some(node_of_dof.len());
                            node_of_dof.push(id);
                        }
                    }
                }
                let mut elements = Vec::with_capacity(n * n);
                for j in 0..n {
                    for i in 0..n {
                        let a = j * np + i;
                        elements.push([a, a + 1, a + 1 + np, a + np]);
                    }
                }
                let w = lit::<T>(0.25) * hx * hy;
                let mut quad_x = Vec::with_capacity(4 * n * n);
                let mut quad_w = Vec::with_capacity(4 * n * n);
                let mut phi = Vec::with_capacity(16 * n * n);
                let mut dphi = Vec::with_capacity(16 * n * n);
                for el in &elements {
                    let [xl, yl] = nodes[el[0]];
                    for &eta in &gauss {
                        for &xi in &gauss {
                            quad_x.push([xl + xi * hx, yl + eta * hy]);
                            quad_w.push(w);
                            let (one_xi, one_eta) = (T::one() - xi, T::one() - eta);
                            phi.extend_from_slice(&[one_xi * one_eta, xi * one_eta, xi * eta, one_xi * eta]);
                            dphi.extend_from_slice(&[
                                [-one_eta / hx, -one_xi / hy],
                                [one_eta / hx, -xi / hy],
                                [eta / hx, xi / hy],
                                [-eta / hx, one_xi / hy],
                            ]);
                        }
                    }
                }
                Ok(Grid {
                    domain,
                    dim: 2,
                    n,
                    hx,
                    hy,
                    nodes,
                    elements,
                    dof_of_node,
                    node_of_dof,
                    quad_x,
                    quad_w,
                    phi,
                    dphi,
                })
            }
        }
    }

    pub fn domain(&self) -> &DomainSpec<T> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    /// Largest element edge length.
    pub fn h(&self) -> T {
        self.hx.max(self.hy)
    }

    pub fn spacing(&self) -> (T, T) {
        (self.hx, self.hy)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_quad(&self) -> usize {
        self.quad_w.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.dim == 1 {
            2
        } else {
            4
        }
    }

    pub fn quad_per_element(&self) -> usize {
        self.nodes_per_element()
    }

    pub fn node(&self, i: usize) -> Point<T> {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[Point<T>] {
        &self.nodes
    }

    pub fn element_nodes(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.nodes_per_element()]
    }

    pub fn element_quads(&self, e: usize) -> Range<usize> {
        let k = self.quad_per_element();
        e * k..(e + 1) * k
    }

    pub fn element_of_quad(&self, q: usize) -> usize {
        q / self.quad_per_element()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.node_of_dof[dof]
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dof_of_node[node].is_none()
    }

    pub fn quad_point(&self, q: usize) -> Point<T> {
        self.quad_x[q]
    }

    pub fn quad_points(&self) -> &[Point<T>] {
        &self.quad_x
    }

    pub fn quad_weight(&self, q: usize) -> T {
        self.quad_w[q]
    }

    pub fn quad_weights(&self) -> &[T] {
        &self.quad_w
    }

    /// Value of local shape function `a` at quadrature point `q`.
    pub fn shape(&self, q: usize, a: usize) -> T {
        self.phi[q * self.nodes_per_element() + a]
    }

    /// Gradient of local shape function `a` at quadrature point `q`.
    pub fn shape_grad(&self, q: usize, a: usize) -> Point<T> {
        self.dphi[q * self.nodes_per_element() + a]
    }

    /// Half-bandwidth of interior-dof matrices in natural ordering.
    pub fn bandwidth(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.n
        }
    }

    /// Load vector `b_i = sum_q w_q s_q phi_i(x_q)` over interior dofs.
    pub fn load_vector(&self, cell_values: &[T]) -> Vec<T> {
        assert_eq!(cell_values.len(), self.n_quad());
        let mut b = vec![T::zero(); self.n_dofs()];
        for e in 0..self.n_elements() {
            let nodes = self.element_nodes(e);
            for q in self.element_quads(e) {
                let ws = self.quad_w[q] * cell_values[q];
                for (a, &node) in nodes.iter().enumerate() {
                    if let Some(i) = self.dof_of_node[node] {
                        b[i] = b[i] + ws * self.shape(q, a);
                    }
                }
            }
        }
        b
    }

    /// Load vector of a pointwise source integrated with a composite
    /// Gauss-Legendre rule of `sub` subcells per axis and element.
    pub fn load_from_fn<F: Fn(Point<T>) -> T>(&self, source: F, sub: usize) -> Vec<T> {
        let sub = sub.max(1);
        let subf = T::from_usize(sub).unwrap();
        // 3-point Gauss on [0,1]
        let r = lit::<T>(0.6).sqrt();
        let half = lit::<T>(0.5);
        let pts = [half * (T::one() - r), half, half * (T::one() + r)];
        let wts = [lit::<T>(5.0 / 18.0), lit::<T>(8.0 / 18.0), lit::<T>(5.0 / 18.0)];
        let mut b = vec![T::zero(); self.n_dofs()];
        for e in 0..self.n_elements() {
            let nodes = self.element_nodes(e);
            let origin = self.nodes[nodes[0]];
            if self.dim == 1 {
                for s in 0..sub {
                    for k in 0..3 {
                        let xi = (T::from_usize(s).unwrap() + pts[k]) / subf;
                        let w = wts[k] * self.hx / subf;
                        let val = source([origin[0] + xi * self.hx, T::zero()]) * w;
                        let shapes = [T::one() - xi, xi];
                        for (a, &node) in nodes.iter().enumerate() {
                            if let Some(i) = self.dof_of_node[node] {
                                b[i] = b[i] + val * shapes[a];
                            }
                        }
                    }
                }
            } else {
                for sj in 0..sub {
                    for si in 0..sub {
                        for kj in 0..3 {
                            for ki in 0..3 {
                                let xi = (T::from_usize(si).unwrap() + pts[ki]) / subf;
                                let eta = (T::from_usize(sj).unwrap() + pts[kj]) / subf;
                                let w = wts[ki] * wts[kj] * self.hx * self.hy / (subf * subf);
                                let x = [origin[0] + xi * self.hx, origin[1] + eta * self.hy];
                                let val = source(x) * w;
                                let (oxi, oeta) = (T::one() - xi, T::one() - eta);
                                let shapes = [oxi * oeta, xi * oeta, xi * eta, oxi * eta];
                                for (a, &node) in nodes.iter().enumerate() {
                                    if let Some(i) = self.dof_of_node[node] {
                                        b[i] = b[i] + val * shapes[a];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        b
    }

    /// Element containing `x` and the local reference coordinates there.
    fn locate(&self, x: Point<T>) -> (usize, T, T) {
        let n = self.n;
        let cell = |t: T, lo: T, h: T| -> (usize, T) {
            let s = ((t - lo) / h).max(T::zero());
            let i = s.floor().to_usize().unwrap_or(0).min(n - 1);
            (i, s - T::from_usize(i).unwrap())
        };
        match self.domain {
            DomainSpec::Interval { x0, .. } => {
                let (i, xi) = cell(x[0], x0, self.hx);
                (i, xi, T::zero())
            }
            DomainSpec::Rectangle { x0, y0, .. } => {
                let (i, xi) = cell(x[0], x0, self.hx);
                let (j, eta) = cell(x[1], y0, self.hy);
                (j * n + i, xi, eta)
            }
        }
    }
}

/// `L2`, `Linf` and `H1_0` seminorm of a nodal field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms<T> {
    pub l2: T,
    pub linf: T,
    pub h10: T,
}

/// Continuous piecewise linear (bilinear) function vanishing on the boundary.
#[derive(Clone)]
pub struct Field<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field").field("nodes", &self.values.len()).finish()
    }
}

impl<T: PartialEq> PartialEq for Field<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) && self.values == other.values
    }
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Field { grid: Arc::clone(grid), values: vec![T::zero(); grid.n_nodes()] }
    }

    /// Nodal interpolant of `f`; boundary values are forced to zero.
    pub fn from_fn<F: Fn(Point<T>) -> T>(grid: &Arc<Grid<T>>, f: F) -> Self {
        let values = (0..grid.n_nodes())
            .map(|i| if grid.is_dirichlet(i) { T::zero() } else { f(grid.node(i)) })
            .collect();
        Field { grid: Arc::clone(grid), values }
    }

    pub fn from_dofs(grid: &Arc<Grid<T>>, dofs: &[T]) -> Self {
        assert_eq!(dofs.len(), grid.n_dofs());
        let mut values = vec![T::zero(); grid.n_nodes()];
        for (d, &v) in dofs.iter().enumerate() {
            values[grid.node_of_dof(d)] = v;
        }
        Field { grid: Arc::clone(grid), values }
    }

    /// Build from nodal values; nonzero Dirichlet values are rejected.
    pub fn from_nodal(grid: &Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch);
        }
        if (0..values.len()).any(|i| grid.is_dirichlet(i) && values[i] != T::zero()) {
            return Err(Error::InvalidParameter("nonzero Dirichlet value".into()));
        }
        Ok(Field { grid: Arc::clone(grid), values })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dofs(&self) -> Vec<T> {
        (0..self.grid.n_dofs()).map(|d| self.values[self.grid.node_of_dof(d)]).collect()
    }

    pub fn set_dofs(&mut self, dofs: &[T]) {
        assert_eq!(dofs.len(), self.grid.n_dofs());
        for (d, &v) in dofs.iter().enumerate() {
            self.values[self.grid.node_of_dof(d)] = v;
        }
    }

    pub fn belongs_to(&self, grid: &Arc<Grid<T>>) -> bool {
        Arc::ptr_eq(&self.grid, grid)
    }

    pub fn scaled(&self, c: T) -> Self {
        Field { grid: Arc::clone(&self.grid), values: self.values.iter().map(|&v| v * c).collect() }
    }

    /// `self + c * other`
    pub fn axpy(&self, c: T, other: &Field<T>) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + c * b).collect();
        Field { grid: Arc::clone(&self.grid), values }
    }

    pub fn linf_distance(&self, other: &Field<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// Exact gradient of the interpolant at every quadrature point.
    pub fn gradient_at_quadrature(&self) -> Vec<Point<T>> {
        let g = &*self.grid;
        let mut out = Vec::with_capacity(g.n_quad());
        for e in 0..g.n_elements() {
            let nodes = g.element_nodes(e);
            for q in g.element_quads(e) {
                let mut grad = [T::zero(); 2];
                for (a, &node) in nodes.iter().enumerate() {
                    let d = g.shape_grad(q, a);
                    grad[0] = grad[0] + self.values[node] * d[0];
                    grad[1] = grad[1] + self.values[node] * d[1];
                }
                out.push(grad);
            }
        }
        out
    }

    pub fn values_at_quadrature(&self) -> Vec<T> {
        let g = &*self.grid;
        let mut out = Vec::with_capacity(g.n_quad());
        for e in 0..g.n_elements() {
            let nodes = g.element_nodes(e);
            for q in g.element_quads(e) {
                let v = nodes
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |s, (a, &node)| s + self.values[node] * g.shape(q, a));
                out.push(v);
            }
        }
        out
    }

    pub fn norms(&self) -> Norms<T> {
        let vals = self.values_at_quadrature();
        let grads = self.gradient_at_quadrature();
        let w = self.grid.quad_weights();
        let l2 = w.iter().zip(&vals).map(|(&w, &v)| w * v * v).sum::<T>().sqrt();
        let h10 = w
            .iter()
            .zip(&grads)
            .map(|(&w, g)| w * (g[0] * g[0] + g[1] * g[1]))
            .sum::<T>()
            .sqrt();
        let linf = self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        Norms { l2, linf, h10 }
    }

    /// Point evaluation of the interpolant.
    pub fn eval_at(&self, x: Point<T>) -> T {
        let g = &*self.grid;
        let (e, xi, eta) = g.locate(x);
        let nodes = g.element_nodes(e);
        if g.dim == 1 {
            self.values[nodes[0]] * (T::one() - xi) + self.values[nodes[1]] * xi
        } else {
            let (oxi, oeta) = (T::one() - xi, T::one() - eta);
            self.values[nodes[0]] * oxi * oeta
                + self.values[nodes[1]] * xi * oeta
                + self.values[nodes[2]] * xi * eta
                + self.values[nodes[3]] * oxi * eta
        }
    }

    pub fn to_csv(&self) -> String {
        csv_dump(self.grid.dim, self.grid.nodes(), &self.values)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_text(path, &self.to_csv())
    }
}

/// Scalar data at every quadrature point (controls, sources, coefficients).
#[derive(Clone)]
pub struct CellField<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for CellField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CellField").field("points", &self.values.len()).finish()
    }
}

impl<T: PartialEq> PartialEq for CellField<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) && self.values == other.values
    }
}

impl<T: Real> CellField<T> {
    pub fn constant(grid: &Arc<Grid<T>>, c: T) -> Self {
        CellField { grid: Arc::clone(grid), values: vec![c; grid.n_quad()] }
    }

    pub fn from_fn<F: Fn(Point<T>) -> T>(grid: &Arc<Grid<T>>, f: F) -> Self {
        CellField { grid: Arc::clone(grid), values: grid.quad_points().iter().map(|&x| f(x)).collect() }
    }

    pub fn from_values(grid: &Arc<Grid<T>>, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.n_quad());
        CellField { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        CellField { grid: Arc::clone(&self.grid), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map<F: Fn(T, T) -> T>(&self, other: &CellField<T>, f: F) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        CellField { grid: Arc::clone(&self.grid), values }
    }

    /// `self + c * other`
    pub fn axpy(&self, c: T, other: &CellField<T>) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn sub(&self, other: &CellField<T>) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn integral(&self) -> T {
        self.grid.quad_weights().iter().zip(&self.values).map(|(&w, &v)| w * v).sum()
    }

    /// Quadrature-weighted `L2` inner product.
    pub fn inner(&self, other: &CellField<T>) -> T {
        self.grid
            .quad_weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum()
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn linf_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        csv_dump(self.grid.dim, self.grid.quad_points(), &self.values)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_text(path, &self.to_csv())
    }
}

fn csv_dump<T: Real>(dim: usize, points: &[Point<T>], values: &[T]) -> String {
    let mut s = String::with_capacity(32 * values.len());
    s.push_str(if dim == 1 { "x,value\n" } else { "x,y,value\n" });
    for (x, v) in points.iter().zip(values) {
        if dim == 1 {
            s.push_str(&format!("{},{}\n", x[0], v));
        } else {
            s.push_str(&format!("{},{},{}\n", x[0], x[1], v));
        }
    }
    s
}

pub(crate) fn write_text<P: AsRef<Path>>(path: P, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Arc<Grid<f64>> {
        build_grid(DomainSpec::unit_interval(), n).unwrap()
    }

    #[test]
    fn counts_1d_and_2d() {
        let g = unit(4);
        assert_eq!(g.n_nodes(), 5);
        assert_eq!(g.n_dofs(), 3);
        assert_eq!(g.h(), 0.25);
        let g2 = build_grid(DomainSpec::<f64>::unit_square(), 4).unwrap();
        assert_eq!(g2.n_nodes(), 25);
        assert_eq!(g2.n_dofs(), 9);
    }

    #[test]
    fn uniform_spacing_on_scaled_interval() {
        let g = build_grid(DomainSpec::Interval { x0: 0.0, x1: 2.0 }, 8).unwrap();
        assert_eq!(g.h(), 0.25);
        for (i, x) in g.nodes().iter().enumerate() {
            assert_eq!(x[0], 0.25 * i as f64);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_grid(DomainSpec::<f64>::unit_interval(), 1).is_err());
        assert!(build_grid(DomainSpec::Interval { x0: 1.0, x1: 1.0 }, 4).is_err());
        assert!(build_grid(DomainSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 2.0, y1: 1.0 }, 4).is_err());
    }

    #[test]
    fn weights_sum_to_element_measure() {
        for g in [unit(7), build_grid(DomainSpec::Rectangle { x0: 0.0, x1: 2.0, y0: -1.0, y1: 0.5 }, 5).unwrap()] {
            let (hx, hy) = g.spacing();
            let meas = if g.dim() == 1 { hx } else { hx * hy };
            for e in 0..g.n_elements() {
                let s: f64 = g.element_quads(e).map(|q| g.quad_weight(q)).sum();
                assert!((s - meas).abs() < 1e-14);
                assert!(g.element_quads(e).all(|q| g.quad_weight(q) > 0.0));
                for q in g.element_quads(e) {
                    let mut sum = [0.0; 2];
                    for a in 0..g.nodes_per_element() {
                        let d = g.shape_grad(q, a);
                        sum[0] += d[0];
                        sum[1] += d[1];
                    }
                    assert!(sum[0].abs() < 1e-12 && sum[1].abs() < 1e-12);
                }
            }
            let on_boundary = |x: Point<f64>| match *g.domain() {
                DomainSpec::Interval { x0, x1 } => x[0] == x0 || x[0] == x1,
                DomainSpec::Rectangle { x0, x1, y0, y1 } => {
                    x[0] == x0 || x[0] == x1 || x[1] == y0 || x[1] == y1
                }
            };
            for i in 0..g.n_nodes() {
                assert_eq!(on_boundary(g.node(i)), g.is_dirichlet(i));
            }
        }
    }

    #[test]
    fn zero_field_has_zero_gradients_and_norms() {
        let g = unit(6);
        let y = Field::zeros(&g);
        assert!(y.gradient_at_quadrature().iter().all(|d| d[0] == 0.0 && d[1] == 0.0));
        let n = y.norms();
        assert_eq!((n.l2, n.linf, n.h10), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hat_function_slopes() {
        let g = unit(2);
        let y = Field::from_dofs(&g, &[1.0]);
        let grads = y.gradient_at_quadrature();
        // finite difference of the interpolant inside each element
        for (q, d) in grads.iter().enumerate() {
            let x = g.quad_point(q)[0];
            let fd = (y.eval_at([x + 1e-7, 0.0]) - y.eval_at([x - 1e-7, 0.0])) / 2e-7;
            assert!((d[0] - fd).abs() < 1e-6);
        }
        assert_eq!(grads[0][0], 2.0);
        assert_eq!(grads[3][0], -2.0);
    }

    #[test]
    fn quadratic_interpolant_gradient_is_exact_chord_slope() {
        let g = unit(8);
        let y = Field::from_fn(&g, |x| x[0] * (1.0 - x[0]));
        let grads = y.gradient_at_quadrature();
        for e in 0..g.n_elements() {
            let nd = g.element_nodes(e);
            let (xa, xb) = (g.node(nd[0])[0], g.node(nd[1])[0]);
            let slope = (xb * (1.0 - xb) - xa * (1.0 - xa)) / (xb - xa);
            for q in g.element_quads(e) {
                assert!((grads[q][0] - slope).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bilinear_reproduction_2d() {
        let g = build_grid(DomainSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 2.0 }, 6).unwrap();
        // x y (1-x)(2-y) is not bilinear; use a bilinear function on the interior only,
        // checking gradients on elements away from the boundary.
        let f = |x: Point<f64>| 0.3 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let vals: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
        let field = Field { grid: Arc::clone(&g), values: vals };
        let grads = field.gradient_at_quadrature();
        for (q, d) in grads.iter().enumerate() {
            let x = g.quad_point(q);
            assert!((d[0] - (2.0 + 0.5 * x[1])).abs() < 1e-12);
            assert!((d[1] - (-1.0 + 0.5 * x[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn norms_converge_for_parabola() {
        let g = unit(1024);
        let y = Field::from_fn(&g, |x| x[0] * (1.0 - x[0]));
        let n = y.norms();
        assert!((n.l2 - (1.0f64 / 30.0).sqrt()).abs() < 1e-5);
        assert!((n.h10 - (1.0f64 / 3.0).sqrt()).abs() < 1e-5);
        assert!((n.linf - 0.25).abs() < 1e-12);
    }

    #[test]
    fn interpolation_error_order() {
        let mut errs = vec![];
        for n in [16, 32, 64, 128] {
            let g = unit(n);
            let exact = |x: f64| (std::f64::consts::PI * x).sin();
            let y = Field::from_fn(&g, |x| exact(x[0]));
            // refined quadrature for the error integral
            let mut e2 = 0.0;
            for e in 0..g.n_elements() {
                let nd = g.element_nodes(e);
                let (xa, xb) = (g.node(nd[0])[0], g.node(nd[1])[0]);
                for k in 0..20 {
                    let x = xa + (k as f64 + 0.5) / 20.0 * (xb - xa);
                    let d = y.eval_at([x, 0.0]) - exact(x);
                    e2 += d * d * (xb - xa) / 20.0;
                }
            }
            errs.push(e2.sqrt());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let g = unit(4);
        let y = Field::from_fn(&g, |x| x[0]);
        let s = y.to_csv();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("x,value"));
        assert_eq!(s.lines().count(), 6);
        let g2 = build_grid(DomainSpec::<f64>::unit_square(), 2).unwrap();
        assert!(Field::zeros(&g2).to_csv().starts_with("x,y,value\n"));
    }

    #[test]
    fn f32_grid_works() {
        let g = build_grid(DomainSpec::<f32>::unit_interval(), 64).unwrap();
        let y = Field::from_fn(&g, |x| x[0] * (1.0 - x[0]));
        assert!((y.norms().l2 - (1.0f32 / 30.0).sqrt()).abs() < 1e-3);
    }
}
