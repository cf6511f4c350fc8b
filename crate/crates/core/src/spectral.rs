//! Fourier diagonalization of the periodic second-difference stencil.
//!
//! The discrete Fourier modes are exact eigenvectors of the stencil used by
//! [`crate::grid::laplacian`], with eigenvalue `Σ_i (2 - 2cos(2πk_i/N_i))/h_i²`.
//! Inverting through the FFT therefore inverts the very same operator, which
//! is what the Newton solver needs from its preconditioner.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};

pub struct SpectralLaplacian {
    grid: PeriodicGrid,
    eigenvalues: Vec<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl SpectralLaplacian {
    pub fn new(grid: &PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid
            .points()
            .iter()
            .map(|&p| planner.plan_fft_forward(p))
            .collect();
        let inverse = grid
            .points()
            .iter()
            .map(|&p| planner.plan_fft_inverse(p))
            .collect();

        let per_axis: Vec<Vec<f64>> = grid
            .points()
            .iter()
            .zip(grid.spacing())
            .map(|(&p, &h)| {
                (0..p)
                    .map(|k| {
                        let theta = std::f64::consts::TAU * k as f64 / p as f64;
                        (2.0 - 2.0 * theta.cos()) / (h * h)
                    })
                    .collect()
            })
            .collect();
        let eigenvalues = (0..grid.node_count())
            .map(|node| {
                (0..grid.dim())
                    .map(|a| per_axis[a][grid.axis_index(node, a)])
                    .sum()
            })
            .collect();

        Self {
            grid: grid.clone(),
            eigenvalues,
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Stencil eigenvalue per Fourier mode, indexed like grid nodes.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn transform(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let grid = &self.grid;
        for (axis, plan) in plans.iter().enumerate() {
            let len = grid.points()[axis];
            let stride = grid.strides()[axis];
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            for start in 0..grid.node_count() {
                if grid.axis_index(start, axis) != 0 {
                    continue;
                }
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = buf[start + i * stride];
                }
                plan.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    buf[start + i * stride] = *v;
                }
            }
        }
    }

    /// Solves `(Δ + shift_c) f_c = r_c` for every component `c`.
    ///
    /// Modes whose symbol vanishes (the constant mode with zero shift) are
    /// set to zero, so with `shift = 0` the result is the zero-mean solution.
    pub fn solve_shifted(&self, n: usize, rhs: &[f64], shift: &[f64], out: &mut [f64]) {
        let count = self.grid.node_count();
        debug_assert_eq!(rhs.len(), n * count);
        debug_assert_eq!(shift.len(), n);
        let scale = 1.0 / count as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); count];
        for c in 0..n {
            for (node, slot) in buf.iter_mut().enumerate() {
                *slot = Complex64::new(rhs[node * n + c], 0.0);
            }
            self.transform(&mut buf, &self.forward);
            for (slot, &lambda) in buf.iter_mut().zip(&self.eigenvalues) {
                let symbol = lambda + shift[c];
                *slot = if symbol > 0.0 {
                    *slot * (scale / symbol)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            self.transform(&mut buf, &self.inverse);
            for (node, v) in buf.iter().enumerate() {
                out[node * n + c] = v.re;
            }
        }
    }
}

/// Result of [`poisson_solve`]: the zero-mean solution and the mean that was
/// projected out of the right-hand side.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub field: Field,
    pub removed_mean: Vec<f64>,
}

/// Default tolerance on the nodal mean of a Poisson right-hand side.
pub fn mean_tolerance(rhs: &Field) -> f64 {
    1e-12 * (1.0 + rhs.norm_inf())
}

/// Zero-mean solution of `Δf = rhs`.
///
/// A nonzero mean is projected out and returned in `removed_mean`; in strict
/// mode a mean above [`mean_tolerance`] is an error instead.
pub fn poisson_solve(rhs: &Field, strict: bool) -> Result<PoissonSolution> {
    rhs.check_finite("poisson_solve rhs")?;
    let removed_mean = rhs.mean();
    let tolerance = mean_tolerance(rhs);
    if strict {
        if let Some((component, &mean)) = removed_mean
            .iter()
            .enumerate()
            .find(|(_, m)| m.abs() > tolerance)
        {
            return Err(Error::ZeroMeanViolation {
                component,
                mean,
                tolerance,
            });
        }
    }
    let spectral = SpectralLaplacian::new(rhs.grid());
    let n = rhs.n();
    let mut field = Field::zeros(rhs.grid(), n);
    spectral.solve_shifted(n, rhs.data(), &vec![0.0; n], field.data_mut());
    // The FFT leaves round-off in the constant mode.
    let residual_mean = field.mean();
    let shift: Vec<f64> = residual_mean.iter().map(|m| -m).collect();
    field.add_constant(&shift);
    Ok(PoissonSolution {
        field,
        removed_mean,
    })
}
