//! Weight systems and the solvability cone.
//!
//! The equation is solvable exactly when `W = ∫ w vol` is a strictly positive
//! combination of the active weights. [`cone_membership`] decides this with
//! the linear program
//!
//! ```text
//! max t  s.t.  Σ_{j∈J} c_j u_j = W,  c_j ≥ t,  t ≤ 1
//! ```
//!
//! and reads a separating functional off the dual when the optimum is not
//! positive.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::lp::{self, LpOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSystem {
    n: usize,
    vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl WeightSystem {
    pub fn new(n: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("weight dimension n must be >= 1".into()));
        }
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "weight {j} has {} entries, expected {n}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("weight {j} is not finite")));
            }
        }
        Ok(Self {
            n,
            vectors,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.vectors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} weights",
                labels.len(),
                self.vectors.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.vectors.len()
    }

    pub fn weight(&self, j: usize) -> &[f64] {
        &self.vectors[j]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Weights expressed in new coordinates: `u_j ↦ Fᵀ u_j` for a frame `F`
    /// given as a list of `k` column vectors in `R^n`.
    pub fn in_frame(&self, frame: &[Vec<f64>]) -> Result<WeightSystem> {
        let vectors = self
            .vectors
            .iter()
            .map(|u| frame.iter().map(|col| dot(col, u)).collect())
            .collect();
        let mut ws = WeightSystem::new(frame.len(), vectors)?;
        ws.labels = self.labels.clone();
        Ok(ws)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Indices `j` whose coefficient `a_j` is not identically zero on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
    /// `max_nodes |a_j|` per weight.
    pub evidence: Vec<f64>,
    /// Fraction of nodes with `a_j ≤ τ_active`, a proxy for the size of the
    /// zero set of `a_j`.
    pub degeneracy: Vec<f64>,
    pub tau_active: f64,
}

impl ActiveSet {
    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Every weight counted as active, for callers that only have vectors.
    pub fn all(d: usize) -> Self {
        Self {
            indices: (0..d).collect(),
            evidence: vec![1.0; d],
            degeneracy: vec![0.0; d],
            tau_active: 0.0,
        }
    }
}

pub fn active_set(a: &[Field], tau_active: f64) -> Result<ActiveSet> {
    let mut indices = Vec::new();
    let mut evidence = Vec::with_capacity(a.len());
    let mut degeneracy = Vec::with_capacity(a.len());
    for (j, aj) in a.iter().enumerate() {
        if aj.n() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "coefficient a_{j} must be scalar, has n = {}",
                aj.n()
            )));
        }
        aj.check_finite("coefficient")?;
        if let Some((node, &value)) = aj.data().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeCoefficient { index: j, node, value });
        }
        let max = aj.data().iter().fold(0.0f64, |acc, v| acc.max(*v));
        let low = aj.data().iter().filter(|v| **v <= tau_active).count();
        if max > tau_active {
            indices.push(j);
        }
        evidence.push(max);
        degeneracy.push(low as f64 / aj.data().len() as f64);
    }
    Ok(ActiveSet {
        indices,
        evidence,
        degeneracy,
        tau_active,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Inside,
    Outside,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub verdict: Verdict,
    /// Length-`d` coefficients with `Σ c_j u_j = W`; entries outside the
    /// active set are zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separator_lambda: Option<Vec<f64>>,
    /// LP optimum `t*`; `-inf` (serialized as null) when `W` is not even in
    /// the span of the active weights.
    #[serde(serialize_with = "ser_margin", deserialize_with = "de_margin")]
    pub margin: f64,
    pub tau_cone: f64,
}

fn ser_margin<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn de_margin<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

/// Default `τ_cone = 1e-9 · (1 + ‖W‖∞)`.
pub fn default_tau_cone(w: &[f64]) -> f64 {
    1e-9 * (1.0 + norm_inf(w))
}

/// Numbers behind a certificate, recomputed from the raw data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub witness_defect: Option<f64>,
    pub min_active_coefficient: Option<f64>,
    /// `max_{j∈J} ⟨λ, u_j⟩`.
    pub separator_max_weight: Option<f64>,
    /// `min_{j∈J} ⟨λ, u_j⟩`.
    pub separator_min_weight: Option<f64>,
    /// `⟨λ, W⟩`.
    pub separator_value: Option<f64>,
    /// The certificate is a strict separator: `⟨λ,u_j⟩ ≤ τ` and `⟨λ,W⟩ > τ`.
    pub strict_separator: bool,
    pub sound: bool,
}

impl ConeCertificate {
    /// Re-verifies the certificate against `W` and the weights.
    ///
    /// An Inside certificate is sound when the witness reproduces `W` to
    /// `1e-9 (1 + ‖W‖∞)` with all active coefficients above `τ_cone`. An
    /// Outside certificate is sound when `⟨λ,u_j⟩ ≤ τ` on the active set and
    /// either `⟨λ,W⟩ > τ` (strict separation) or `⟨λ,W⟩ ≥ -τ` with some
    /// `⟨λ,u_j⟩ < -τ`, which rules out strictly positive combinations at
    /// boundary points of the closed cone.
    pub fn check(&self, w: &[f64], ws: &WeightSystem, active: &ActiveSet) -> CertificateCheck {
        let tau = self.tau_cone;
        let mut out = CertificateCheck {
            witness_defect: None,
            min_active_coefficient: None,
            separator_max_weight: None,
            separator_min_weight: None,
            separator_value: None,
            strict_separator: false,
            sound: false,
        };
        match self.verdict {
            Verdict::Inside => {
                let Some(c) = &self.witness_c else { return out };
                if c.len() != ws.d() {
                    return out;
                }
                let mut sum = vec![0.0; ws.n()];
                for &j in &active.indices {
                    for (s, u) in sum.iter_mut().zip(ws.weight(j)) {
                        *s += c[j] * u;
                    }
                }
                let defect = sum
                    .iter()
                    .zip(w)
                    .fold(0.0f64, |acc, (s, x)| acc.max((s - x).abs()));
                let min_c = active
                    .indices
                    .iter()
                    .map(|&j| c[j])
                    .fold(f64::INFINITY, f64::min);
                out.witness_defect = Some(defect);
                out.min_active_coefficient = Some(min_c);
                out.sound = defect < 1e-9 * (1.0 + norm_inf(w)) && min_c > tau;
            }
            Verdict::Outside => {
                let Some(lambda) = &self.separator_lambda else { return out };
                let dots: Vec<f64> = active
                    .indices
                    .iter()
                    .map(|&j| dot(lambda, ws.weight(j)))
                    .collect();
                let max = dots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = dots.iter().copied().fold(f64::INFINITY, f64::min);
                let value = dot(lambda, w);
                out.separator_max_weight = Some(max);
                out.separator_min_weight = Some(min);
                out.separator_value = Some(value);
                let bounded = dots.iter().all(|&v| v <= tau);
                out.strict_separator = bounded && value > tau;
                out.sound = out.strict_separator || (bounded && value >= -tau && min < -tau);
            }
        }
        out
    }
}

/// Decides `W ∈ Σ_{j∈J} R_{>0} u_j`.
///
/// `tau_cone` defaults to [`default_tau_cone`]. Margins `t* ≤ τ_cone` count
/// as Outside, so boundary points of the closed cone are rejected.
pub fn cone_membership(
    w: &[f64],
    ws: &WeightSystem,
    active: &ActiveSet,
    tau_cone: Option<f64>,
) -> Result<ConeCertificate> {
    let n = ws.n();
    if w.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "W has {} entries, weights live in R^{n}",
            w.len()
        )));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("W is not finite".into()));
    }
    let tau = tau_cone.unwrap_or_else(|| default_tau_cone(w));
    let d = ws.d();

    if active.is_empty() {
        let w_norm = norm_inf(w);
        return Ok(if w_norm <= tau {
            ConeCertificate {
                verdict: Verdict::Inside,
                witness_c: Some(vec![0.0; d]),
                separator_lambda: None,
                margin: 1.0,
                tau_cone: tau,
            }
        } else {
            ConeCertificate {
                verdict: Verdict::Outside,
                witness_c: None,
                separator_lambda: Some(w.iter().map(|x| x / w_norm).collect()),
                margin: f64::NEG_INFINITY,
                tau_cone: tau,
            }
        });
    }

    // Substituting c_j = 1 - p + s_j with s, p ≥ 0 turns the problem into
    // min p  s.t.  Σ s_j u_j - p Σ u_j = W - Σ u_j.
    let k = active.len();
    let mut total = vec![0.0; n];
    for &j in &active.indices {
        for (t, u) in total.iter_mut().zip(ws.weight(j)) {
            *t += u;
        }
    }
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = active.indices.iter().map(|&j| ws.weight(j)[i]).collect();
            row.push(-total[i]);
            row
        })
        .collect();
    let b: Vec<f64> = w.iter().zip(&total).map(|(x, t)| x - t).collect();
    let mut cost = vec![0.0; k + 1];
    cost[k] = 1.0;

    let certificate = match lp::minimize(&cost, &a, &b) {
        LpOutcome::Optimal { x, y, value } => {
            let margin = 1.0 - value;
            if margin > tau {
                let mut c = vec![0.0; d];
                for (slot, &j) in active.indices.iter().enumerate() {
                    c[j] = margin + x[slot];
                }
                ConeCertificate {
                    verdict: Verdict::Inside,
                    witness_c: Some(c),
                    separator_lambda: None,
                    margin,
                    tau_cone: tau,
                }
            } else {
                ConeCertificate {
                    verdict: Verdict::Outside,
                    witness_c: None,
                    separator_lambda: Some(y),
                    margin,
                    tau_cone: tau,
                }
            }
        }
        LpOutcome::Infeasible { farkas, .. } => ConeCertificate {
            verdict: Verdict::Outside,
            witness_c: None,
            separator_lambda: Some(farkas),
            margin: f64::NEG_INFINITY,
            tau_cone: tau,
        },
        LpOutcome::Unbounded => {
            return Err(Error::LpNumericalFailure {
                reason: "bounded LP reported unbounded".into(),
                witness: None,
                separator: None,
            })
        }
    };

    if !certificate.check(w, ws, active).sound {
        return Err(Error::LpNumericalFailure {
            reason: format!(
                "{:?} certificate with margin {:e} failed verification",
                certificate.verdict, certificate.margin
            ),
            witness: certificate.witness_c,
            separator: certificate.separator_lambda,
        });
    }
    Ok(certificate)
}

/// Orthonormal basis of `(span{u_j : j ∈ J})⊥`, via the SVD of the weight
/// matrix. Singular values below `1e-10 · max(1, σ_max)` count as zero.
pub fn kernel_basis(ws: &WeightSystem, active: &ActiveSet) -> Vec<Vec<f64>> {
    let n = ws.n();
    let cols = active.len().max(n);
    let mut m = DMatrix::<f64>::zeros(n, cols);
    for (c, &j) in active.indices.iter().enumerate() {
        for i in 0..n {
            m[(i, c)] = ws.weight(j)[i];
        }
    }
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = 1e-10 * sigma_max.max(1.0);
    let mut basis: Vec<Vec<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, _)| u.column(i).iter().copied().collect())
        .collect();
    for v in &mut basis {
        // Fix the sign so the largest entry is positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for x in v.iter_mut() {
            if x.abs() < 1e-15 {
                *x = 0.0;
            }
        }
    }
    basis
}

/// Removes from `v` its components along an orthonormal `basis`.
pub fn project_out(basis: &[Vec<f64>], v: &mut [f64]) {
    for b in basis {
        let coef = dot(b, v);
        for (x, e) in v.iter_mut().zip(b) {
            *x -= coef * e;
        }
    }
}
