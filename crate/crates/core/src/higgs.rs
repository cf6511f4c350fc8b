//! Cyclic Higgs data: the weights `v_j = e_{j+1} - e_j`, `v_r = e_1 - e_r`
//! with coefficients `4k_j`, solved either on all of R^r, on its trace-zero
//! hyperplane, or on the symmetric subspace V.

use serde::{Deserialize, Serialize};

use crate::cone::{self, WeightSystem};
use crate::error::{Error, Result};
use crate::functional::ProblemInstance;
use crate::grid::{Field, PeriodicGrid};

pub const DEFAULT_TAU_SYM: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct CyclicHiggsSpec {
    pub r: usize,
    /// `k_1, ..., k_r`, all nonnegative.
    pub k: Vec<Field>,
    /// R^r-valued right-hand side.
    pub rhs: Field,
    /// Asserts `k_j = k_{r-j}` for `j < r` and rhs with values in V.
    pub symmetric: bool,
    /// Relative symmetry tolerance; scaled by `1 + max ‖k_j‖∞ + ‖rhs‖∞`.
    pub tau_sym: f64,
    pub tau_active: f64,
}

impl CyclicHiggsSpec {
    pub fn new(k: Vec<Field>, rhs: Field, symmetric: bool) -> Self {
        Self {
            r: k.len(),
            k,
            rhs,
            symmetric,
            tau_sym: DEFAULT_TAU_SYM,
            tau_active: 0.0,
        }
    }

    fn scale(&self) -> f64 {
        1.0 + self.k.iter().map(Field::norm_inf).fold(0.0, f64::max) + self.rhs.norm_inf()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HiggsCoordinates {
    /// Unknown in R^r; the diagonal constants form the kernel.
    Ambient,
    /// Orthonormal coordinates on `{Σx_j = 0}`.
    TraceZero,
    /// Orthonormal coordinates on V. The default for symmetric data.
    #[default]
    Symmetric,
}

pub fn cyclic_weights(r: usize) -> Result<WeightSystem> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("rank r = {r} must be at least 2")));
    }
    let vectors = (0..r)
        .map(|j| {
            let mut v = vec![0.0; r];
            let next = (j + 1) % r;
            v[next] += 1.0;
            v[j] -= 1.0;
            v
        })
        .collect();
    WeightSystem::new(r, vectors)?.with_labels((1..=r).map(|j| format!("v_{j}")).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetricSubspace {
    pub r: usize,
    /// Orthonormal basis of `V = {x_j = -x_{r+1-j}, Σx_j = 0}`.
    pub basis: Vec<Vec<f64>>,
}

impl SymmetricSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

pub fn symmetric_subspace(r: usize) -> Result<SymmetricSubspace> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("rank r = {r} must be at least 2")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let basis = (0..r / 2)
        .map(|j| {
            let mut b = vec![0.0; r];
            b[j] = -s;
            b[r - 1 - j] = s;
            b
        })
        .collect();
    Ok(SymmetricSubspace { r, basis })
}

/// Helmert basis of the trace-zero hyperplane of R^r.
pub fn trace_zero_basis(r: usize) -> Vec<Vec<f64>> {
    (1..r)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            let mut b = vec![0.0; r];
            b[..k].iter_mut().for_each(|v| *v = 1.0 / norm);
            b[k] = -(k as f64) / norm;
            b
        })
        .collect()
}

/// `max |ξ_j + ξ_{r+1-j}|` over nodes and components.
pub fn check_symmetry(xi: &Field, r: usize) -> Result<f64> {
    if xi.n() != r {
        return Err(Error::ShapeMismatch(format!(
            "field has {} components, expected {r}",
            xi.n()
        )));
    }
    Ok(xi
        .data()
        .chunks(r)
        .flat_map(|x| (0..r).map(move |j| (x[j] + x[r - 1 - j]).abs()))
        .fold(0.0, f64::max))
}

/// A built instance together with the frame relating its unknown to R^r.
#[derive(Clone, Debug)]
pub struct HiggsInstance {
    pub instance: ProblemInstance,
    pub coordinates: HiggsCoordinates,
    /// Orthonormal vectors in R^r; the unknown η corresponds to `ξ = Σ η_k f_k`.
    pub frame: Vec<Vec<f64>>,
}

impl HiggsInstance {
    pub fn r(&self) -> usize {
        self.frame.first().map_or(0, Vec::len)
    }

    pub fn to_ambient(&self, eta: &Field) -> Result<Field> {
        change_frame(eta, &self.frame, self.r(), true)
    }

    pub fn from_ambient(&self, xi: &Field) -> Result<Field> {
        change_frame(xi, &self.frame, self.r(), false)
    }
}

fn change_frame(f: &Field, frame: &[Vec<f64>], r: usize, up: bool) -> Result<Field> {
    let (from, to) = if up { (frame.len(), r) } else { (r, frame.len()) };
    if f.n() != from {
        return Err(Error::ShapeMismatch(format!(
            "field has {} components, expected {from}",
            f.n()
        )));
    }
    let data = f
        .data()
        .chunks(from)
        .flat_map(|x| {
            (0..to).map(move |i| {
                if up {
                    frame.iter().zip(x).map(|(b, c)| b[i] * c).sum()
                } else {
                    cone::dot(&frame[i], x)
                }
            })
        })
        .collect();
    Field::from_vec(f.grid(), to, data)
}

fn frame_defect(f: &Field, frame: &[Vec<f64>]) -> f64 {
    f.data()
        .chunks(f.n())
        .map(|x| {
            let mut v = x.to_vec();
            cone::project_out(frame, &mut v);
            v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
        })
        .fold(0.0, f64::max)
}

/// Builds the instance with weights `v_j` and coefficients `4k_j` in the
/// requested coordinates.
pub fn build_instance(spec: &CyclicHiggsSpec, coordinates: HiggsCoordinates) -> Result<HiggsInstance> {
    let r = spec.r;
    if spec.k.len() != r {
        return Err(Error::ShapeMismatch(format!("expected {r} coefficients k_j, got {}", spec.k.len())));
    }
    if spec.rhs.n() != r {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} components, expected {r}",
            spec.rhs.n()
        )));
    }
    let ws = cyclic_weights(r)?;
    let tau = spec.tau_sym * spec.scale();

    if spec.symmetric {
        for j in 1..r {
            let defect = spec.k[j - 1].sub(&spec.k[r - j - 1]).norm_inf();
            if defect > tau {
                return Err(Error::AsymmetricData(format!(
                    "k_{j} and k_{} differ by {defect:e}",
                    r - j
                )));
            }
        }
        let defect = frame_defect(&spec.rhs, &symmetric_subspace(r)?.basis);
        if defect > tau {
            return Err(Error::AsymmetricData(format!(
                "rhs leaves the symmetric subspace by {defect:e}"
            )));
        }
    } else if coordinates == HiggsCoordinates::Symmetric {
        return Err(Error::AsymmetricData(
            "symmetric coordinates need data flagged symmetric".into(),
        ));
    }

    let frame = match coordinates {
        HiggsCoordinates::Ambient => (0..r)
            .map(|i| {
                let mut e = vec![0.0; r];
                e[i] = 1.0;
                e
            })
            .collect(),
        HiggsCoordinates::TraceZero => {
            let basis = trace_zero_basis(r);
            let defect = frame_defect(&spec.rhs, &basis);
            if defect > tau {
                return Err(Error::InvalidArgument(format!(
                    "rhs has a trace component of size {defect:e}; use ambient coordinates"
                )));
            }
            basis
        }
        HiggsCoordinates::Symmetric => symmetric_subspace(r)?.basis,
    };

    let coefficients = spec.k.iter().map(|k| k.scaled(4.0)).collect();
    let weights = if coordinates == HiggsCoordinates::Ambient {
        ws
    } else {
        ws.in_frame(&frame)?
    };
    let rhs = change_frame(&spec.rhs, &frame, r, false)?;
    let instance = ProblemInstance::new(weights, coefficients, rhs, spec.tau_active)?;
    Ok(HiggsInstance {
        instance,
        coordinates,
        frame,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    /// Integer frequency per grid axis.
    pub freq: Vec<i64>,
    /// Complex amplitude as `[re, im]`.
    pub amp: [f64; 2],
}

/// Samples `|q|²` for the trigonometric polynomial
/// `q(x) = Σ amp · exp(i Σ_a 2π freq_a x_a / L_a)`.
pub fn q_modulus_squared(grid: &PeriodicGrid, terms: &[FourierTerm]) -> Result<Field> {
    if let Some(t) = terms.iter().find(|t| t.freq.len() != grid.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "frequency {:?} does not match a {}-dimensional grid",
            t.freq,
            grid.dim()
        )));
    }
    Ok(Field::scalar_from_fn(grid, |x| {
        let (mut re, mut im) = (0.0, 0.0);
        for t in terms {
            let phase: f64 = t
                .freq
                .iter()
                .zip(x)
                .zip(grid.lengths())
                .map(|((&k, &xa), &l)| std::f64::consts::TAU * k as f64 * xa / l)
                .sum();
            let (s, c) = phase.sin_cos();
            re += t.amp[0] * c - t.amp[1] * s;
            im += t.amp[0] * s + t.amp[1] * c;
        }
        re * re + im * im
    }))
}
