//! Periodic tensor grids on flat tori and grid functions.
//!
//! Nodes are stored row-major (last axis fastest) and every axis wraps
//! around. A [`Field`] stores `n` values per node, node-major then component.
//!
//! The Laplacian uses the geometric (positive) sign convention
//! `Δf = -Σ ∂²f/∂x_i²`, discretized with the centered three-point stencil on
//! each axis. Quadrature is the equal-weight periodic trapezoid rule. All
//! reductions run sequentially in node order so results are bit-identical
//! regardless of the thread count used for nodewise maps.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Upper bound on `Π N_i`.
pub const MAX_NODES: usize = 1 << 24;

/// Node counts at or above this threshold run nodewise maps on the rayon pool.
const PAR_THRESHOLD: usize = 1 << 13;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid {
    points: Vec<usize>,
    lengths: Vec<f64>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    node_count: usize,
    /// Extra multiplicative weight on the volume element. Transverse grids
    /// produced by foliation reduction carry the leaf volume here.
    fiber_volume: f64,
}

impl PeriodicGrid {
    pub fn new(points: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        let m = points.len();
        if !(1..=4).contains(&m) {
            return Err(Error::InvalidGrid(format!("dimension {m} outside 1..=4")));
        }
        if lengths.len() != m {
            return Err(Error::InvalidGrid(format!(
                "{} period lengths given for a {m}-dimensional grid",
                lengths.len()
            )));
        }
        if let Some(&bad) = points.iter().find(|&&p| p < 4) {
            return Err(Error::InvalidGrid(format!("axis with {bad} points; need at least 4")));
        }
        if let Some(&bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGrid(format!("period length {bad} must be positive")));
        }
        let node_count = points
            .iter()
            .try_fold(1usize, |acc, &p| acc.checked_mul(p))
            .filter(|&c| c <= MAX_NODES)
            .ok_or_else(|| Error::InvalidGrid(format!("more than {MAX_NODES} nodes")))?;

        let spacing = points
            .iter()
            .zip(&lengths)
            .map(|(&p, &l)| l / p as f64)
            .collect();
        let mut strides = vec![1usize; m];
        for axis in (0..m.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * points[axis + 1];
        }
        Ok(Self {
            points,
            lengths,
            spacing,
            strides,
            node_count,
            fiber_volume: 1.0,
        })
    }

    /// Grid with every period equal to 2π.
    pub fn with_default_lengths(points: Vec<usize>) -> Result<Self> {
        let lengths = vec![TAU; points.len()];
        Self::new(points, lengths)
    }

    pub fn with_fiber_volume(mut self, fiber_volume: f64) -> Result<Self> {
        if !(fiber_volume.is_finite() && fiber_volume > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "fiber volume {fiber_volume} must be positive"
            )));
        }
        self.fiber_volume = fiber_volume;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn fiber_volume(&self) -> f64 {
        self.fiber_volume
    }

    /// Volume element attached to every node.
    pub fn cell_volume(&self) -> f64 {
        self.fiber_volume * self.spacing.iter().product::<f64>()
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volume() * self.node_count as f64
    }

    /// Position of `node` along `axis`.
    #[inline]
    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.points[axis]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.axis_index(node, a)).collect()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.strides)
            .zip(&self.points)
            .map(|((&i, &s), &p)| (i % p) * s)
            .sum()
    }

    pub fn coordinates(&self, node: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.axis_index(node, a) as f64 * self.spacing[a])
            .collect()
    }

    /// Neighbor one step forward along `axis`, wrapping around.
    #[inline]
    pub fn forward(&self, node: usize, axis: usize) -> usize {
        let s = self.strides[axis];
        if self.axis_index(node, axis) + 1 == self.points[axis] {
            node + s - s * self.points[axis]
        } else {
            node + s
        }
    }

    /// Neighbor one step backward along `axis`, wrapping around.
    #[inline]
    pub fn backward(&self, node: usize, axis: usize) -> usize {
        let s = self.strides[axis];
        if self.axis_index(node, axis) == 0 {
            node + s * (self.points[axis] - 1)
        } else {
            node - s
        }
    }

    /// Same nodes and periods; the fiber weight is ignored.
    pub fn same_nodes(&self, other: &PeriodicGrid) -> bool {
        self.points == other.points && self.lengths == other.lengths
    }
}

/// Runs `op(node, out_node)` over every node of `out`, in parallel on large grids.
pub(crate) fn map_nodes<F>(grid: &PeriodicGrid, n: usize, out: &mut [f64], op: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(out.len(), n * grid.node_count());
    if n == 0 {
        return;
    }
    if grid.node_count() >= PAR_THRESHOLD {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(node, chunk)| op(node, chunk));
    } else {
        out.chunks_mut(n)
            .enumerate()
            .for_each(|(node, chunk)| op(node, chunk));
    }
}

/// An `n`-vector valued function sampled on a [`PeriodicGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: PeriodicGrid,
    n: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &PeriodicGrid, n: usize) -> Self {
        Self {
            grid: grid.clone(),
            n,
            data: vec![0.0; n * grid.node_count()],
        }
    }

    pub fn constant(grid: &PeriodicGrid, value: &[f64]) -> Self {
        let mut data = Vec::with_capacity(value.len() * grid.node_count());
        for _ in 0..grid.node_count() {
            data.extend_from_slice(value);
        }
        Self {
            grid: grid.clone(),
            n: value.len(),
            data,
        }
    }

    pub fn from_vec(grid: &PeriodicGrid, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for n = {n}, got {}",
                n * grid.node_count(),
                data.len()
            )));
        }
        let field = Self {
            grid: grid.clone(),
            n,
            data,
        };
        field.check_finite("field")?;
        Ok(field)
    }

    /// Samples `f(x, out)` at every node; `out` has length `n`.
    pub fn from_fn<F>(grid: &PeriodicGrid, n: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let mut field = Self::zeros(grid, n);
        for node in 0..grid.node_count() {
            let x = grid.coordinates(node);
            f(&x, field.node_mut(node));
        }
        field
    }

    pub fn scalar_from_fn<F>(grid: &PeriodicGrid, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64,
    {
        Self::from_fn(grid, 1, |x, out| out[0] = f(x))
    }

    /// Stacks scalar fields into one vector-valued field.
    pub fn from_components(components: &[Field]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::ShapeMismatch("no components".into()))?;
        let grid = first.grid.clone();
        if let Some(bad) = components
            .iter()
            .find(|c| c.n != 1 || !c.grid.same_nodes(&grid))
        {
            return Err(Error::ShapeMismatch(format!(
                "component with n = {} on grid {:?} cannot be stacked",
                bad.n, bad.grid.points
            )));
        }
        let n = components.len();
        let mut field = Self::zeros(&grid, n);
        for node in 0..grid.node_count() {
            for (c, comp) in components.iter().enumerate() {
                field.data[node * n + c] = comp.data[node];
            }
        }
        Ok(field)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn node(&self, node: usize) -> &[f64] {
        &self.data[node * self.n..(node + 1) * self.n]
    }

    #[inline]
    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.data[node * self.n..(node + 1) * self.n]
    }

    pub fn component(&self, c: usize) -> Field {
        let data = self.data.iter().skip(c).step_by(self.n).copied().collect();
        Field {
            grid: self.grid.clone(),
            n: 1,
            data,
        }
    }

    /// Same field on a grid with identical nodes (e.g. a different fiber weight).
    pub fn with_grid(mut self, grid: &PeriodicGrid) -> Result<Self> {
        if grid.node_count() != self.grid.node_count() || grid.points != self.grid.points {
            return Err(Error::ShapeMismatch("grids have different nodes".into()));
        }
        self.grid = grid.clone();
        Ok(self)
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { what, index }),
            None => Ok(()),
        }
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn compatible(&self, other: &Field) -> bool {
        self.n == other.n && self.grid.same_nodes(&other.grid)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        debug_assert!(self.compatible(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn add(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Adds the same vector at every node.
    pub fn add_constant(&mut self, value: &[f64]) {
        assert_eq!(value.len(), self.n);
        for chunk in self.data.chunks_mut(self.n) {
            for (v, c) in chunk.iter_mut().zip(value) {
                *v += c;
            }
        }
    }

    /// Equal-weight nodal mean per component.
    pub fn mean(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for chunk in self.data.chunks(self.n) {
            for (s, v) in sums.iter_mut().zip(chunk) {
                *s += v;
            }
        }
        let count = self.grid.node_count() as f64;
        sums.iter_mut().for_each(|s| *s /= count);
        sums
    }

    /// `max_nodes |f(x) - mean(f)|` over all components.
    pub fn deviation_from_mean(&self) -> f64 {
        let mean = self.mean();
        self.data
            .chunks(self.n)
            .flat_map(|chunk| chunk.iter().zip(&mean).map(|(v, m)| (v - m).abs()))
            .fold(0.0, f64::max)
    }
}

/// Volume-weighted L² inner product `Σ_nodes ⟨f, g⟩ · cell_volume`.
pub fn inner(f: &Field, g: &Field) -> f64 {
    debug_assert!(f.compatible(g));
    let sum: f64 = f.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
    sum * f.grid.cell_volume()
}

/// Component integrals `∫ f vol` by the periodic trapezoid rule.
pub fn integrate(f: &Field) -> Vec<f64> {
    let vol = f.grid.cell_volume();
    let mut sums = vec![0.0; f.n];
    for chunk in f.data.chunks(f.n.max(1)) {
        for (s, v) in sums.iter_mut().zip(chunk) {
            *s += v;
        }
    }
    sums.iter_mut().for_each(|s| *s *= vol);
    sums
}

pub(crate) fn laplacian_into(grid: &PeriodicGrid, n: usize, src: &[f64], dst: &mut [f64]) {
    let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
    map_nodes(grid, n, dst, |node, out| {
        out.iter_mut().for_each(|v| *v = 0.0);
        let center = &src[node * n..(node + 1) * n];
        for (axis, &w) in inv_h2.iter().enumerate() {
            let fwd = grid.forward(node, axis);
            let bwd = grid.backward(node, axis);
            for c in 0..n {
                out[c] += w * (2.0 * center[c] - src[fwd * n + c] - src[bwd * n + c]);
            }
        }
    });
}

/// Geometric Laplacian `Δf = -Σ ∂²f/∂x_i²`, componentwise.
pub fn laplacian(f: &Field) -> Result<Field> {
    f.check_finite("laplacian input")?;
    Ok(laplacian_unchecked(f))
}

pub(crate) fn laplacian_unchecked(f: &Field) -> Field {
    let mut out = Field::zeros(&f.grid, f.n);
    laplacian_into(&f.grid, f.n, &f.data, &mut out.data);
    out
}

/// `Σ_axes Σ_nodes ⟨D_i f, D_i g⟩ · cell_volume` with forward differences `D_i`.
pub fn gradient_inner(f: &Field, g: &Field) -> f64 {
    debug_assert!(f.compatible(g));
    let grid = &f.grid;
    let n = f.n;
    let mut total = 0.0;
    for (axis, h) in grid.spacing().iter().enumerate() {
        let inv_h2 = 1.0 / (h * h);
        let mut sum = 0.0;
        for node in 0..grid.node_count() {
            let fwd = grid.forward(node, axis);
            for c in 0..n {
                let df = f.data[fwd * n + c] - f.data[node * n + c];
                let dg = g.data[fwd * n + c] - g.data[node * n + c];
                sum += df * dg;
            }
        }
        total += sum * inv_h2;
    }
    total * grid.cell_volume()
}

/// Quadratic part `½ ∫ |dξ|²` of the energy.
pub fn dirichlet_energy(f: &Field) -> Result<f64> {
    f.check_finite("dirichlet_energy input")?;
    Ok(0.5 * gradient_inner(f, f))
}
