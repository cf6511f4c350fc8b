//! Damped Newton–Krylov minimization of the convex energy.
//!
//! Each step solves `H(ξ)δ = -R(ξ)` by preconditioned conjugate gradients on
//! the orthogonal complement of the kernel constants, then backtracks on the
//! energy until the Armijo condition holds. The preconditioner is the shifted
//! Laplacian `Δ + σ_c` inverted in Fourier space, with `σ_c` the mean
//! diagonal of the reaction term.
//!
//! Existence is decided up front by the cone certificate. Iteration never
//! starts on an Outside instance unless audit mode is requested, in which
//! case the minimizer runs to exhibit the unbounded energy descent.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{self, ActiveSet, ConeCertificate, Verdict};
use crate::error::{Error, Result};
use crate::functional::ProblemInstance;
use crate::grid::{self, Field, PeriodicGrid};
use crate::spectral::SpectralLaplacian;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    /// Refuse to iterate unless the certificate is Inside with margin.
    #[default]
    Strict,
    /// Run the minimizer even on Outside or near-boundary instances.
    Audit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// ∞-norm stopping threshold; `None` means `1e-10 · (1 + ‖w‖∞)`.
    pub tol_residual: Option<f64>,
    pub max_newton: usize,
    /// CG stops once `‖r‖∞ ≤ min(forcing_cap, √‖R‖∞) · ‖R‖∞`.
    pub forcing_cap: f64,
    pub max_cg: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Iterate ∞-norm that counts as divergence.
    pub divergence_norm: f64,
    pub seed: u64,
    pub mode: SolveMode,
    /// `None` means the certificate default `1e-9 · (1 + ‖W‖∞)`.
    pub tau_cone: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_residual: None,
            max_newton: 100,
            forcing_cap: 0.5,
            max_cg: 2000,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            divergence_norm: 1e3,
            seed: 0,
            mode: SolveMode::Strict,
            tau_cone: None,
        }
    }
}

impl SolveOptions {
    pub fn audit() -> Self {
        Self {
            mode: SolveMode::Audit,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("forcing_cap", self.forcing_cap),
            ("armijo_c1", self.armijo_c1),
            ("backtrack", self.backtrack),
            ("divergence_norm", self.divergence_norm),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
        }
        if let Some(t) = self.tol_residual {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidArgument(format!("tol_residual = {t} must be positive")));
            }
        }
        if self.armijo_c1 >= 1.0 || self.backtrack >= 1.0 {
            return Err(Error::InvalidArgument(
                "armijo_c1 and backtrack must lie in (0, 1)".into(),
            ));
        }
        if self.max_newton == 0 || self.max_cg == 0 || self.max_backtracks == 0 {
            return Err(Error::InvalidArgument("iteration caps must be positive".into()));
        }
        Ok(())
    }

    pub fn resolved_tolerance(&self, inst: &ProblemInstance) -> f64 {
        self.tol_residual
            .unwrap_or_else(|| 1e-10 * (1.0 + inst.rhs().norm_inf()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solution,
    NoSolutionCertified,
    MaxIterations,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual_inf: f64,
    /// Step length accepted after this iteration's line search (0 on the
    /// final record).
    pub step_length: f64,
    pub cg_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditSummary {
    pub initial_energy: f64,
    pub final_energy: f64,
    pub energy_drop: f64,
    pub final_norm: f64,
    /// Energy fell by more than `divergence_norm` while `‖ξ‖∞` exceeded it.
    pub confirmed: bool,
    pub monotone: bool,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Normalized when `status == Solution`, otherwise the last iterate.
    pub xi: Field,
    /// Constant added to the final iterate by normalization.
    pub gauge_shift: Vec<f64>,
    pub diagnostics: Vec<IterationRecord>,
    pub certificate: ConeCertificate,
    pub residual_inf: f64,
    pub tol_residual: f64,
    pub audit: Option<AuditSummary>,
    pub message: Option<String>,
}

impl SolveOutcome {
    pub fn iterations(&self) -> usize {
        self.diagnostics.len().saturating_sub(1)
    }

    pub fn summary(&self) -> OutcomeSummary {
        OutcomeSummary {
            status: self.status,
            residual_inf: self.residual_inf,
            tol_residual: self.tol_residual,
            newton_iterations: self.iterations(),
            certificate: self.certificate.clone(),
            audit: self.audit.clone(),
            message: self.message.clone(),
        }
    }
}

/// Serializable part of a [`SolveOutcome`]; the field itself goes to `.gkwf`.
#[derive(Clone, Debug, Serialize)]
pub struct OutcomeSummary {
    pub status: SolveStatus,
    pub residual_inf: f64,
    pub tol_residual: f64,
    pub newton_iterations: usize,
    pub certificate: ConeCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Writes `iteration,energy,residual_inf,step_length,cg_iters` rows.
pub fn write_diagnostics_csv<W: Write>(mut out: W, records: &[IterationRecord]) -> Result<()> {
    writeln!(out, "iteration,energy,residual_inf,step_length,cg_iters")?;
    for r in records {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{}",
            r.iteration, r.energy, r.residual_inf, r.step_length, r.cg_iters
        )?;
    }
    Ok(())
}

/// Smooth pseudo-random field: a random constant plus a few random Fourier
/// modes per component, all of amplitude at most one.
pub fn random_initial_guess(grid: &PeriodicGrid, n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grid.dim();
    let mut modes = Vec::new();
    for c in 0..n {
        let offset: f64 = rng.random_range(-1.0..1.0);
        modes.push((c, vec![0; m], offset, 0.0));
        for _ in 0..3 {
            let k: Vec<i32> = (0..m).map(|_| rng.random_range(-2..=2)).collect();
            let amp: f64 = rng.random_range(-0.5..0.5);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            modes.push((c, k, amp, phase));
        }
    }
    Field::from_fn(grid, n, |x, out| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (c, k, amp, phase) in &modes {
            let arg: f64 = k
                .iter()
                .zip(x)
                .zip(grid.lengths())
                .map(|((&ki, &xi), &l)| ki as f64 * xi * std::f64::consts::TAU / l)
                .sum();
            out[*c] += amp * (arg + phase).cos();
        }
    })
}

fn kernel_shift(mean: &[f64], kernel: &[Vec<f64>]) -> Vec<f64> {
    let mut shift = vec![0.0; mean.len()];
    for b in kernel {
        let coef = cone::dot(b, mean);
        for (s, e) in shift.iter_mut().zip(b) {
            *s -= coef * e;
        }
    }
    shift
}

/// Subtracts the kernel component of the mean: the result has zero average
/// along every vector of `kernel` (an orthonormal basis).
pub fn normalize_with_kernel(xi: &Field, kernel: &[Vec<f64>]) -> Field {
    let mut out = xi.clone();
    project_field(kernel, &mut out);
    out
}

/// Normal form modulo constants in `(span{u_j : j ∈ J})⊥`.
pub fn normalize(xi: &Field, ws: &cone::WeightSystem, active: &ActiveSet) -> Field {
    normalize_with_kernel(xi, &cone::kernel_basis(ws, active))
}

fn project_field(kernel: &[Vec<f64>], f: &mut Field) {
    if !kernel.is_empty() {
        f.add_constant(&kernel_shift(&f.mean(), kernel));
    }
}

struct Newton<'a> {
    inst: &'a ProblemInstance,
    opts: &'a SolveOptions,
    kernel: Vec<Vec<f64>>,
    spectral: SpectralLaplacian,
    audit: bool,
}

struct State {
    xi: Field,
    reaction: Vec<f64>,
    energy: f64,
    /// Magnitude of the terms summed into the energy, for round-off slack.
    energy_scale: f64,
    residual: Field,
}

struct CgResult {
    step: Field,
    iterations: usize,
    flat_direction: bool,
}

impl<'a> Newton<'a> {
    fn state(&self, xi: Field) -> Result<State> {
        let reaction = self.inst.reaction(&xi)?;
        let (energy, energy_scale) = self.energy(&xi, &reaction);
        let residual = self.inst.residual_from(&xi, &reaction);
        Ok(State {
            xi,
            reaction,
            energy,
            energy_scale,
            residual,
        })
    }

    fn energy(&self, xi: &Field, reaction: &[f64]) -> (f64, f64) {
        let dirichlet = 0.5 * grid::gradient_inner(xi, xi);
        let exponential = reaction.iter().sum::<f64>() * xi.grid().cell_volume();
        let linear = grid::inner(self.inst.rhs(), xi);
        (
            dirichlet + exponential - linear,
            dirichlet + exponential + linear.abs(),
        )
    }

    fn shifts(&self, reaction: &[f64]) -> Vec<f64> {
        let n = self.inst.n();
        let k = self.inst.active().len();
        let ws = self.inst.weights();
        let mut shift = vec![0.0; n];
        for node_terms in reaction.chunks(k.max(1)) {
            for (slot, &j) in self.inst.active().indices.iter().enumerate() {
                let r = node_terms[slot];
                for (s, u) in shift.iter_mut().zip(ws.weight(j)) {
                    *s += r * u * u;
                }
            }
        }
        let count = self.inst.grid().node_count() as f64;
        shift.iter().map(|s| (s / count).max(1e-6)).collect()
    }

    fn precondition(&self, shift: &[f64], r: &Field) -> Field {
        let mut z = Field::zeros(r.grid(), r.n());
        self.spectral
            .solve_shifted(r.n(), r.data(), shift, z.data_mut());
        project_field(&self.kernel, &mut z);
        z
    }

    /// PCG for `H δ = -g` on the complement of the kernel.
    fn conjugate_gradient(&self, state: &State, g: &Field, target: f64) -> CgResult {
        let shift = self.shifts(&state.reaction);
        let grid = state.xi.grid();
        let h_min = grid.spacing().iter().copied().fold(f64::INFINITY, f64::min);
        let curvature_floor = 1e-14 * grid.dim() as f64 * 4.0 / (h_min * h_min);

        let mut x = Field::zeros(grid, g.n());
        let mut r = g.scaled(-1.0);
        let mut z = self.precondition(&shift, &r);
        let mut p = z.clone();
        let mut rz = grid::inner(&r, &z);
        for it in 0..self.opts.max_cg {
            if r.norm_inf() <= target {
                return CgResult {
                    step: x,
                    iterations: it,
                    flat_direction: false,
                };
            }
            let mut hp = self.inst.hessian_from(&state.reaction, &p);
            project_field(&self.kernel, &mut hp);
            let php = grid::inner(&p, &hp);
            if php <= curvature_floor * grid::inner(&p, &p) {
                // Flat or negative curvature: the energy is unbounded along p
                // unless an earlier iterate already makes progress.
                let step = if it == 0 { p } else { x };
                return CgResult {
                    step,
                    iterations: it,
                    flat_direction: true,
                };
            }
            let alpha = rz / php;
            x.axpy(alpha, &p);
            r.axpy(-alpha, &hp);
            z = self.precondition(&shift, &r);
            let rz_next = grid::inner(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            p.scale(beta);
            p.axpy(1.0, &z);
        }
        CgResult {
            step: x,
            iterations: self.opts.max_cg,
            flat_direction: false,
        }
    }

    fn trial(&self, base: &Field, step: &Field, alpha: f64) -> Option<State> {
        let mut xi = base.clone();
        xi.axpy(alpha, step);
        if xi.data().iter().any(|v| !v.is_finite()) {
            return None;
        }
        self.state(xi).ok()
    }

    fn run(&self, xi0: Field, tol: f64, certificate: ConeCertificate) -> Result<SolveOutcome> {
        let opts = self.opts;
        let mut state = self.state(xi0)?;
        let initial_energy = state.energy;
        let mut diagnostics = Vec::new();
        let mut monotone = true;
        let mut message = None;

        let status = loop {
            let iteration = diagnostics.len();
            let rnorm = state.residual.norm_inf();
            diagnostics.push(IterationRecord {
                iteration,
                energy: state.energy,
                residual_inf: rnorm,
                step_length: 0.0,
                cg_iters: 0,
            });
            let xnorm = state.xi.norm_inf();
            if self.audit {
                if xnorm > opts.divergence_norm
                    && initial_energy - state.energy > opts.divergence_norm
                {
                    break SolveStatus::NoSolutionCertified;
                }
            } else {
                if rnorm <= tol {
                    break SolveStatus::Solution;
                }
                if xnorm > opts.divergence_norm {
                    break SolveStatus::Diverged;
                }
            }
            if iteration >= opts.max_newton {
                break SolveStatus::MaxIterations;
            }

            let mut g = state.residual.clone();
            project_field(&self.kernel, &mut g);
            let target = opts.forcing_cap.min(rnorm.sqrt()) * rnorm;
            let cg = self.conjugate_gradient(&state, &g, target);
            let mut step = cg.step;
            let mut slope = grid::inner(&g, &step);
            if !(slope < 0.0) {
                step = self.precondition(&self.shifts(&state.reaction), &g);
                step.scale(-1.0);
                slope = grid::inner(&g, &step);
            }

            let slack = 1e-13 * (1.0 + state.energy_scale);
            let armijo = |s: &State, alpha: f64| {
                s.energy <= state.energy + opts.armijo_c1 * alpha * slope + slack
            };
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_backtracks {
                if let Some(t) = self.trial(&state.xi, &step, alpha) {
                    if armijo(&t, alpha) {
                        accepted = Some(t);
                        break;
                    }
                }
                alpha *= opts.backtrack;
            }
            let Some(mut next) = accepted else {
                message = Some(format!(
                    "line search failed at iteration {iteration} (residual {rnorm:e})"
                ));
                break SolveStatus::MaxIterations;
            };
            if cg.flat_direction && alpha == 1.0 {
                // Along a flat direction, keep doubling while the energy drops.
                for _ in 0..64 {
                    match self.trial(&state.xi, &step, 2.0 * alpha) {
                        Some(t) if t.energy < next.energy && armijo(&t, 2.0 * alpha) => {
                            alpha *= 2.0;
                            next = t;
                        }
                        _ => break,
                    }
                }
            }
            if next.energy > state.energy {
                monotone = false;
            }
            let last = diagnostics.last_mut().expect("record pushed above");
            last.step_length = alpha;
            last.cg_iters = cg.iterations;
            state = next;
        };

        let audit = self.audit.then(|| AuditSummary {
            initial_energy,
            final_energy: state.energy,
            energy_drop: initial_energy - state.energy,
            final_norm: state.xi.norm_inf(),
            confirmed: status == SolveStatus::NoSolutionCertified,
            monotone,
        });
        let mut gauge_shift = vec![0.0; self.inst.n()];
        let (status, xi, residual_inf) = match status {
            SolveStatus::Solution => {
                gauge_shift = kernel_shift(&state.xi.mean(), &self.kernel);
                let mut xi = state.xi;
                xi.add_constant(&gauge_shift);
                let r = self.inst.residual_from(&xi, &self.inst.reaction(&xi)?);
                (status, xi, r.norm_inf())
            }
            _ if self.audit && certificate.verdict == Verdict::Outside => {
                if status != SolveStatus::NoSolutionCertified {
                    message.get_or_insert_with(|| {
                        "audit run ended before the divergence thresholds were crossed".into()
                    });
                }
                (
                    SolveStatus::NoSolutionCertified,
                    state.xi,
                    state.residual.norm_inf(),
                )
            }
            _ => (status, state.xi, state.residual.norm_inf()),
        };
        Ok(SolveOutcome {
            status,
            xi,
            gauge_shift,
            diagnostics,
            certificate,
            residual_inf,
            tol_residual: tol,
            audit,
            message,
        })
    }
}

/// Solves the instance, or certifies that no solution exists.
pub fn solve(
    inst: &ProblemInstance,
    opts: &SolveOptions,
    xi0: Option<&Field>,
) -> Result<SolveOutcome> {
    opts.validate()?;
    let xi0 = match xi0 {
        Some(f) => {
            if f.n() != inst.n() || !f.grid().same_nodes(inst.grid()) {
                return Err(Error::ShapeMismatch("initial guess does not match instance".into()));
            }
            f.check_finite("initial guess")?;
            f.clone().with_grid(inst.grid())?
        }
        None => Field::zeros(inst.grid(), inst.n()),
    };
    let tol = opts.resolved_tolerance(inst);
    let certificate = inst.certificate(opts.tau_cone)?;
    let audit = opts.mode == SolveMode::Audit;

    match certificate.verdict {
        Verdict::Outside if !audit => {
            let residual_inf = crate::functional::residual(inst, &xi0)
                .map(|r| r.norm_inf())
                .unwrap_or(f64::INFINITY);
            return Ok(SolveOutcome {
                status: SolveStatus::NoSolutionCertified,
                gauge_shift: vec![0.0; xi0.n()],
                xi: xi0,
                diagnostics: Vec::new(),
                certificate,
                residual_inf,
                tol_residual: tol,
                audit: None,
                message: None,
            });
        }
        Verdict::Inside if !audit && certificate.margin <= 10.0 * certificate.tau_cone => {
            return Err(Error::NearBoundary {
                margin: certificate.margin,
            });
        }
        _ => {}
    }

    // Kernel directions are projected out only when the data is solvable;
    // on Outside instances the descent may run off along them.
    let kernel = if certificate.verdict == Verdict::Inside {
        inst.kernel_basis()
    } else {
        Vec::new()
    };
    let newton = Newton {
        inst,
        opts,
        kernel,
        spectral: SpectralLaplacian::new(inst.grid()),
        audit: audit && certificate.verdict == Verdict::Outside,
    };
    newton.run(xi0, tol, certificate)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub residual_inf: f64,
    /// `c_j = ∫ a_j e^{⟨u_j,ξ⟩} vol` for every weight.
    pub integrated_weights: Vec<f64>,
    pub rhs_integral: Vec<f64>,
    /// `‖Σ c_j u_j - W‖∞`.
    pub identity_defect: f64,
    pub positive: Vec<bool>,
    pub all_active_positive: bool,
    /// Norm of the kernel component of the mean of `ξ`.
    pub kernel_component: f64,
}

impl VerificationReport {
    /// The integrated weights viewed as an Inside certificate.
    pub fn as_witness(&self, tau_cone: f64) -> ConeCertificate {
        ConeCertificate {
            verdict: Verdict::Inside,
            witness_c: Some(self.integrated_weights.clone()),
            separator_lambda: None,
            margin: f64::NAN,
            tau_cone,
        }
    }
}

pub fn verify_solution(inst: &ProblemInstance, xi: &Field) -> Result<VerificationReport> {
    let r = crate::functional::residual(inst, xi)?;
    let reaction = inst.reaction(xi)?;
    let k = inst.active().len();
    let vol = inst.grid().cell_volume();
    let mut integrated = vec![0.0; inst.d()];
    for (slot, &j) in inst.active().indices.iter().enumerate() {
        let sum: f64 = reaction.iter().skip(slot).step_by(k).sum();
        integrated[j] = sum * vol;
    }
    let ws = inst.weights();
    let mut combo = vec![0.0; inst.n()];
    for (j, c) in integrated.iter().enumerate() {
        for (s, u) in combo.iter_mut().zip(ws.weight(j)) {
            *s += c * u;
        }
    }
    let identity_defect = combo
        .iter()
        .zip(inst.rhs_integral())
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let positive: Vec<bool> = integrated.iter().map(|c| *c > 0.0).collect();
    let all_active_positive = inst.active().indices.iter().all(|&j| positive[j]);
    let mean = xi.mean();
    let kernel_component = inst
        .kernel_basis()
        .iter()
        .map(|b| cone::dot(b, &mean).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(VerificationReport {
        residual_inf: r.norm_inf(),
        integrated_weights: integrated,
        rhs_integral: inst.rhs_integral().to_vec(),
        identity_defect,
        positive,
        all_active_positive,
        kernel_component,
    })
}
