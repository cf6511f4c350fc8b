//! Residual, energy and Hessian action of the discretized equation
//!
//! ```text
//! Δξ + Σ_j a_j e^{⟨u_j, ξ⟩} u_j = w
//! ```
//!
//! The energy
//!
//! ```text
//! E(ξ) = ½∫|dξ|² + Σ_j ∫ a_j e^{⟨u_j, ξ⟩} vol - ∫ ⟨w, ξ⟩ vol
//! ```
//!
//! has the residual as its gradient in the volume-weighted inner product,
//! exactly at the discrete level because the Dirichlet form and the
//! Laplacian satisfy summation by parts.

use serde::Serialize;

use crate::cone::{self, ActiveSet, ConeCertificate, WeightSystem};
use crate::error::{Error, Result};
use crate::grid::{self, map_nodes, Field, PeriodicGrid};

/// Largest exponent `⟨u_j, ξ⟩` accepted before reporting overflow.
pub const EXPONENT_GUARD: f64 = 700.0;

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    grid: PeriodicGrid,
    weights: WeightSystem,
    coefficients: Vec<Field>,
    rhs: Field,
    active: ActiveSet,
    rhs_integral: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(
        weights: WeightSystem,
        coefficients: Vec<Field>,
        rhs: Field,
        tau_active: f64,
    ) -> Result<Self> {
        let grid = rhs.grid().clone();
        if rhs.n() != weights.n() {
            return Err(Error::ShapeMismatch(format!(
                "rhs has {} components, weights live in R^{}",
                rhs.n(),
                weights.n()
            )));
        }
        if coefficients.len() != weights.d() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficient fields for {} weights",
                coefficients.len(),
                weights.d()
            )));
        }
        if let Some(j) = coefficients.iter().position(|a| !a.grid().same_nodes(&grid)) {
            return Err(Error::ShapeMismatch(format!(
                "coefficient a_{j} lives on a different grid"
            )));
        }
        rhs.check_finite("rhs")?;
        let active = cone::active_set(&coefficients, tau_active)?;
        let coefficients = coefficients
            .into_iter()
            .map(|a| a.with_grid(&grid))
            .collect::<Result<Vec<_>>>()?;
        let rhs_integral = grid::integrate(&rhs);
        Ok(Self {
            grid,
            weights,
            coefficients,
            rhs,
            active,
            rhs_integral,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn weights(&self) -> &WeightSystem {
        &self.weights
    }

    pub fn coefficients(&self) -> &[Field] {
        &self.coefficients
    }

    pub fn rhs(&self) -> &Field {
        &self.rhs
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    /// Cached `W = ∫ w vol`.
    pub fn rhs_integral(&self) -> &[f64] {
        &self.rhs_integral
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn d(&self) -> usize {
        self.weights.d()
    }

    pub fn kernel_basis(&self) -> Vec<Vec<f64>> {
        cone::kernel_basis(&self.weights, &self.active)
    }

    pub fn certificate(&self, tau_cone: Option<f64>) -> Result<ConeCertificate> {
        cone::cone_membership(&self.rhs_integral, &self.weights, &self.active, tau_cone)
    }

    fn check_unknown(&self, xi: &Field) -> Result<()> {
        if xi.n() != self.n() || !xi.grid().same_nodes(&self.grid) {
            return Err(Error::ShapeMismatch(format!(
                "unknown has n = {} on {:?}, instance expects n = {} on {:?}",
                xi.n(),
                xi.grid().points(),
                self.n(),
                self.grid.points()
            )));
        }
        xi.check_finite("unknown")
    }

    /// `a_j(x) e^{⟨u_j, ξ(x)⟩}` for every node and active `j`, laid out
    /// node-major with the active index fastest.
    pub(crate) fn reaction(&self, xi: &Field) -> Result<Vec<f64>> {
        let k = self.active.len();
        let n = self.n();
        let mut out = vec![0.0; k * self.grid.node_count()];
        if k == 0 {
            return Ok(out);
        }
        map_nodes(&self.grid, k, &mut out, |node, slot| {
            let x = &xi.data()[node * n..(node + 1) * n];
            for (s, &j) in slot.iter_mut().zip(&self.active.indices) {
                let a = self.coefficients[j].data()[node];
                *s = if a > 0.0 {
                    let e = cone::dot(self.weights.weight(j), x);
                    if e > EXPONENT_GUARD {
                        f64::NAN
                    } else {
                        a * e.exp()
                    }
                } else {
                    0.0
                };
            }
        });
        if let Some(pos) = out.iter().position(|v| v.is_nan()) {
            let node = pos / k;
            let weight = self.active.indices[pos % k];
            let value = cone::dot(self.weights.weight(weight), xi.node(node));
            return Err(Error::ExponentOverflow { weight, node, value });
        }
        Ok(out)
    }

    pub(crate) fn residual_from(&self, xi: &Field, reaction: &[f64]) -> Field {
        let n = self.n();
        let k = self.active.len();
        let mut out = grid::laplacian_unchecked(xi);
        let rhs = self.rhs.data();
        map_nodes(&self.grid, n, out.data_mut(), |node, r| {
            for (slot, &j) in self.active.indices.iter().enumerate() {
                let coef = reaction[node * k + slot];
                for (ri, u) in r.iter_mut().zip(self.weights.weight(j)) {
                    *ri += coef * u;
                }
            }
            for (ri, w) in r.iter_mut().zip(&rhs[node * n..(node + 1) * n]) {
                *ri -= w;
            }
        });
        out
    }

    pub(crate) fn energy_from(&self, xi: &Field, reaction: &[f64]) -> f64 {
        let dirichlet = 0.5 * grid::gradient_inner(xi, xi);
        let exponential: f64 = reaction.iter().sum::<f64>() * self.grid.cell_volume();
        dirichlet + exponential - grid::inner(&self.rhs, xi)
    }

    pub(crate) fn hessian_from(&self, reaction: &[f64], eta: &Field) -> Field {
        let n = self.n();
        let k = self.active.len();
        let mut out = grid::laplacian_unchecked(eta);
        let eta_data = eta.data();
        map_nodes(&self.grid, n, out.data_mut(), |node, r| {
            let e = &eta_data[node * n..(node + 1) * n];
            for (slot, &j) in self.active.indices.iter().enumerate() {
                let u = self.weights.weight(j);
                let coef = reaction[node * k + slot] * cone::dot(u, e);
                for (ri, ui) in r.iter_mut().zip(u) {
                    *ri += coef * ui;
                }
            }
        });
        out
    }
}

/// `R(ξ) = Δξ + Σ_j a_j e^{⟨u_j,ξ⟩} u_j - w`, nodewise.
pub fn residual(inst: &ProblemInstance, xi: &Field) -> Result<Field> {
    inst.check_unknown(xi)?;
    let reaction = inst.reaction(xi)?;
    Ok(inst.residual_from(xi, &reaction))
}

pub fn energy(inst: &ProblemInstance, xi: &Field) -> Result<f64> {
    inst.check_unknown(xi)?;
    let reaction = inst.reaction(xi)?;
    Ok(inst.energy_from(xi, &reaction))
}

/// `H(ξ)η = Δη + Σ_j a_j e^{⟨u_j,ξ⟩} ⟨u_j, η⟩ u_j`.
pub fn hessian_apply(inst: &ProblemInstance, xi: &Field, eta: &Field) -> Result<Field> {
    inst.check_unknown(xi)?;
    inst.check_unknown(eta)?;
    let reaction = inst.reaction(xi)?;
    Ok(inst.hessian_from(&reaction, eta))
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientReport {
    pub index: usize,
    pub nonnegative: bool,
    pub min: f64,
    pub max: f64,
    /// Fraction of nodes with `a_j ≤ τ_active`.
    pub degenerate_fraction: f64,
    pub active: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub coefficients: Vec<CoefficientReport>,
    pub active_set: Vec<usize>,
    pub tau_active: f64,
    pub rhs_integral: Vec<f64>,
    pub kernel_basis: Vec<Vec<f64>>,
    pub certificate: ConeCertificate,
}

impl ValidationReport {
    pub fn all_nonnegative(&self) -> bool {
        self.coefficients.iter().all(|c| c.nonnegative)
    }
}

pub fn validate(inst: &ProblemInstance, tau_cone: Option<f64>) -> Result<ValidationReport> {
    let active = inst.active();
    let coefficients = inst
        .coefficients()
        .iter()
        .enumerate()
        .map(|(index, a)| {
            let min = a.data().iter().copied().fold(f64::INFINITY, f64::min);
            if min < 0.0 {
                let node = a.data().iter().position(|v| *v < 0.0).unwrap_or(0);
                return Err(Error::NegativeCoefficient {
                    index,
                    node,
                    value: min,
                });
            }
            Ok(CoefficientReport {
                index,
                nonnegative: true,
                min,
                max: active.evidence[index],
                degenerate_fraction: active.degeneracy[index],
                active: active.contains(index),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport {
        coefficients,
        active_set: active.indices.clone(),
        tau_active: active.tau_active,
        rhs_integral: inst.rhs_integral().to_vec(),
        kernel_basis: inst.kernel_basis(),
        certificate: inst.certificate(tau_cone)?,
    })
}
