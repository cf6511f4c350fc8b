//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line, then exits nonzero if any
//! criterion failed.

use std::f64::consts::TAU;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use gkw_core::cone::{self, ActiveSet, ConeCertificate, Verdict, WeightSystem};
use gkw_core::foliate::{self, Foliation};
use gkw_core::functional::{self, ProblemInstance};
use gkw_core::grid::{self, Field, PeriodicGrid};
use gkw_core::higgs::{self, CyclicHiggsSpec, HiggsCoordinates};
use gkw_core::solver::{self, SolveOptions, SolveStatus};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 variational consistency", variational_consistency),
        ("2 existence and certified nonexistence", existence_and_nonexistence),
        ("3 uniqueness modulo kernel constants", uniqueness),
        ("4 integrated-weight identity", integrated_weight_identity),
        ("5 basic solutions on foliated tori", basicness),
        ("6 manufactured-solution convergence", manufactured_convergence),
        ("7 cone oracle equivalence", cone_oracle),
        ("8 cyclic Higgs", cyclic_higgs),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

// ---------------------------------------------------------------------------
// Random instances

fn random_weights(rng: &mut ChaCha8Rng, n: usize, d: usize) -> WeightSystem {
    let vectors = (0..d)
        .map(|_| loop {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2..=2) as f64).collect();
            if v.iter().any(|&x| x != 0.0) {
                break v;
            }
        })
        .collect();
    WeightSystem::new(n, vectors).unwrap()
}

fn random_grid(rng: &mut ChaCha8Rng) -> PeriodicGrid {
    if rng.random_bool(0.5) {
        PeriodicGrid::new(vec![32], vec![TAU]).unwrap()
    } else {
        PeriodicGrid::new(vec![16, 16], vec![TAU, TAU]).unwrap()
    }
}

/// Smooth positive coefficient, or with probability 1/4 one that vanishes on
/// a hypersurface.
fn random_coefficient(rng: &mut ChaCha8Rng, g: &PeriodicGrid) -> Field {
    let m = g.dim();
    let base: f64 = rng.random_range(0.5..2.0);
    let amp: f64 = rng.random_range(0.0..0.4) * base;
    let axis = rng.random_range(0..m);
    let k = rng.random_range(1..=2) as f64;
    let phase: f64 = rng.random_range(0.0..TAU);
    if rng.random_bool(0.25) {
        Field::scalar_from_fn(g, |x| base * (0.5 * x[axis] + phase).sin().powi(2))
    } else {
        Field::scalar_from_fn(g, |x| base + amp * (k * x[axis] + phase).cos())
    }
}

/// Zero-mean smooth modes added to the constant `mean`.
fn random_rhs(rng: &mut ChaCha8Rng, g: &PeriodicGrid, mean: &[f64], amp: f64) -> Field {
    let n = mean.len();
    let m = g.dim();
    let modes: Vec<(usize, Vec<f64>, f64, f64)> = (0..2 * n)
        .map(|i| {
            let k = loop {
                let k: Vec<f64> = (0..m).map(|_| rng.random_range(-2..=2) as f64).collect();
                if k.iter().any(|&v| v != 0.0) {
                    break k;
                }
            };
            (i % n, k, rng.random_range(-amp..amp), rng.random_range(0.0..TAU))
        })
        .collect();
    Field::from_fn(g, n, |x, out| {
        out.copy_from_slice(mean);
        for (c, k, a, ph) in &modes {
            let arg: f64 = k
                .iter()
                .zip(x)
                .zip(g.lengths())
                .map(|((k, x), l)| k * x * TAU / l)
                .sum();
            out[*c] += a * (arg + ph).sin();
        }
    })
}

/// Instance whose integrated right-hand side is a strictly positive
/// combination of all weights.
fn inside_instance(rng: &mut ChaCha8Rng) -> ProblemInstance {
    let g = random_grid(rng);
    let n = rng.random_range(1..=3);
    let d = rng.random_range(1..=5);
    let ws = random_weights(rng, n, d);
    let coeffs: Vec<Field> = (0..d).map(|_| random_coefficient(rng, &g)).collect();
    let vol = g.total_volume();
    let mut mean = vec![0.0; n];
    for j in 0..d {
        let c: f64 = rng.random_range(0.5..2.0);
        for (m, u) in mean.iter_mut().zip(ws.weight(j)) {
            *m += c * u / vol;
        }
    }
    let rhs = random_rhs(rng, &g, &mean, 0.5);
    ProblemInstance::new(ws, coeffs, rhs, 0.0).unwrap()
}

fn inside_instances(count: usize, seed: u64) -> Vec<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| inside_instance(&mut rng)).collect()
}

fn outside_instance(rng: &mut ChaCha8Rng) -> ProblemInstance {
    loop {
        let g = random_grid(rng);
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=4);
        let ws = random_weights(rng, n, d);
        let coeffs: Vec<Field> = (0..d).map(|_| random_coefficient(rng, &g)).collect();
        let vol = g.total_volume();
        let mean: Vec<f64> = (0..n).map(|_| rng.random_range(-2..=2) as f64 / vol).collect();
        let rhs = random_rhs(rng, &g, &mean, 0.5);
        let inst = ProblemInstance::new(ws, coeffs, rhs, 0.0).unwrap();
        let cert = inst.certificate(None).unwrap();
        if cert.verdict == Verdict::Outside && cert.margin < -10.0 * cert.tau_cone {
            return inst;
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

// ---------------------------------------------------------------------------
// 1

fn variational_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let g = random_grid(&mut rng);
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=5);
        let ws = random_weights(&mut rng, n, d);
        let coeffs: Vec<Field> = (0..d).map(|_| random_coefficient(&mut rng, &g)).collect();
        let mean: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rhs = random_rhs(&mut rng, &g, &mean, 1.0);
        let inst = ProblemInstance::new(ws, coeffs, rhs, 0.0).unwrap();

        let xi = solver::random_initial_guess(&g, n, rng.random());
        let r = functional::residual(&inst, &xi).unwrap();
        let noise = solver::random_initial_guess(&g, n, rng.random());
        let r_norm = grid::inner(&r, &r).sqrt();
        let noise_norm = grid::inner(&noise, &noise).sqrt();
        let mut eta = r.scaled(1.0 / r_norm);
        eta.axpy(0.3 / noise_norm, &noise);

        let exact = grid::inner(&r, &eta);
        let eps = 1e-5;
        let mut plus = xi.clone();
        plus.axpy(eps, &eta);
        let mut minus = xi.clone();
        minus.axpy(-eps, &eta);
        let fd = (functional::energy(&inst, &plus).unwrap()
            - functional::energy(&inst, &minus).unwrap())
            / (2.0 * eps);
        let rel = (fd - exact).abs() / exact.abs().max(1e-300);
        worst = worst.max(rel);
        ensure!(rel < 1e-6, "case {case}: relative error {rel:e} (fd {fd:e}, exact {exact:e})");
    }
    Ok(format!("50 instances, worst relative error {worst:.2e} < 1e-6"))
}

// ---------------------------------------------------------------------------
// 2

fn existence_and_nonexistence() -> Outcome {
    let opts = SolveOptions::default();
    let mut worst_iters = 0;
    let mut worst_ratio = 0.0f64;
    for (case, inst) in inside_instances(50, 202).iter().enumerate() {
        ensure!(
            inst.certificate(None).unwrap().verdict == Verdict::Inside,
            "case {case}: generated instance not certified Inside"
        );
        let out = solver::solve(inst, &opts, None).map_err(|e| format!("case {case}: {e}"))?;
        let tol = 1e-10 * (1.0 + inst.rhs().norm_inf());
        ensure!(
            out.status == SolveStatus::Solution,
            "Inside case {case}: status {:?} ({:?})",
            out.status,
            out.message
        );
        ensure!(out.residual_inf <= tol, "case {case}: residual {:e} > {tol:e}", out.residual_inf);
        let check = functional::residual(inst, &out.xi).unwrap().norm_inf();
        ensure!(check <= tol, "case {case}: recomputed residual {check:e} > {tol:e}");
        ensure!(out.iterations() <= 100, "case {case}: {} iterations", out.iterations());
        worst_iters = worst_iters.max(out.iterations());
        worst_ratio = worst_ratio.max(check / tol);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(203);
    let mut min_drop = f64::INFINITY;
    for case in 0..20 {
        let inst = outside_instance(&mut rng);
        let out = solver::solve(&inst, &opts, None).map_err(|e| format!("outside {case}: {e}"))?;
        ensure!(
            out.status == SolveStatus::NoSolutionCertified,
            "Outside case {case}: status {:?}",
            out.status
        );
        let audit = solver::solve(&inst, &SolveOptions::audit(), None)
            .map_err(|e| format!("audit {case}: {e}"))?;
        let summary = audit.audit.ok_or_else(|| format!("audit {case}: no summary"))?;
        let e1 = functional::energy(&inst, &audit.xi).unwrap();
        let norm = audit.xi.norm_inf();
        ensure!(
            summary.confirmed && norm > 1e3 && summary.initial_energy - e1 > 1e3,
            "audit {case}: confirmed {}, ‖ξ‖∞ {norm:e}, drop {:e}",
            summary.confirmed,
            summary.initial_energy - e1
        );
        min_drop = min_drop.min(summary.initial_energy - e1);
    }
    Ok(format!(
        "50/50 Inside solved (max {worst_iters} Newton iterations, residual/tol ≤ {worst_ratio:.2}); \
         20/20 Outside certified, audit energy drop ≥ {min_drop:.3e}"
    ))
}

// ---------------------------------------------------------------------------
// 3 and 4

fn uniqueness() -> Outcome {
    let opts = SolveOptions::default();
    let (mut dev, mut span, mut agree) = (0.0f64, 0.0f64, 0.0f64);
    for (case, inst) in inside_instances(50, 202).iter().enumerate() {
        let n = inst.n();
        let g = inst.grid();
        let a0 = solver::random_initial_guess(g, n, 1000 + case as u64);
        let b0 = solver::random_initial_guess(g, n, 2000 + case as u64);
        let a = solver::solve(inst, &opts, Some(&a0)).map_err(|e| e.to_string())?;
        let b = solver::solve(inst, &opts, Some(&b0)).map_err(|e| e.to_string())?;
        ensure!(
            a.status == SolveStatus::Solution && b.status == SolveStatus::Solution,
            "case {case}: {:?} / {:?}",
            a.status,
            b.status
        );
        let raw = |o: &solver::SolveOutcome| {
            let mut f = o.xi.clone();
            f.add_constant(&o.gauge_shift.iter().map(|s| -s).collect::<Vec<_>>());
            f
        };
        let diff = raw(&a).sub(&raw(&b));
        let mean = diff.mean();
        let mut centered = diff.clone();
        centered.add_constant(&mean.iter().map(|m| -m).collect::<Vec<_>>());
        let d = centered.norm_inf();
        let mut off_kernel = mean.clone();
        cone::project_out(&inst.kernel_basis(), &mut off_kernel);
        let s = max_abs(&off_kernel);
        let post = a.xi.sub(&b.xi).norm_inf();
        ensure!(d < 1e-8, "case {case}: deviation from mean {d:e}");
        ensure!(s < 1e-8, "case {case}: mean leaves the kernel span by {s:e}");
        ensure!(post < 1e-6, "case {case}: normalized solutions differ by {post:e}");
        dev = dev.max(d);
        span = span.max(s);
        agree = agree.max(post);
    }
    Ok(format!(
        "50 instances: deviation {dev:.2e}, off-kernel mean {span:.2e}, normalized gap {agree:.2e}"
    ))
}

fn integrated_weight_identity() -> Outcome {
    let opts = SolveOptions::default();
    let mut worst = 0.0f64;
    let mut min_c = f64::INFINITY;
    let mut instances = inside_instances(50, 202);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    instances.extend((0..20).map(|_| inside_instance(&mut rng)));
    for (case, inst) in instances.iter().enumerate() {
        let out = solver::solve(inst, &opts, None).map_err(|e| e.to_string())?;
        ensure!(out.status == SolveStatus::Solution, "case {case}: {:?}", out.status);
        let report = solver::verify_solution(inst, &out.xi).map_err(|e| e.to_string())?;
        let bound = 1e-8 * (1.0 + max_abs(inst.rhs_integral()));

        // Recompute c_j with the trapezoid rule directly.
        let vol = inst.grid().cell_volume();
        let mut combo = vec![0.0; inst.n()];
        for j in 0..inst.d() {
            let u = inst.weights().weight(j);
            let a = &inst.coefficients()[j];
            let c: f64 = (0..inst.grid().node_count())
                .map(|node| {
                    let e: f64 = u.iter().zip(out.xi.node(node)).map(|(u, x)| u * x).sum();
                    a.data()[node] * e.exp()
                })
                .sum::<f64>()
                * vol;
            ensure!(
                (c - report.integrated_weights[j]).abs() <= 1e-10 * (1.0 + c.abs()),
                "case {case}: c_{j} recomputed {c:e} vs reported {:e}",
                report.integrated_weights[j]
            );
            if inst.active().contains(j) {
                ensure!(c > 0.0, "case {case}: c_{j} = {c:e} not positive");
                min_c = min_c.min(c);
            }
            for (s, u) in combo.iter_mut().zip(u) {
                *s += c * u;
            }
        }
        let defect = combo
            .iter()
            .zip(inst.rhs_integral())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure!(defect <= bound, "case {case}: identity defect {defect:e} > {bound:e}");
        ensure!(report.all_active_positive, "case {case}: report flags a nonpositive c_j");
        worst = worst.max(defect / bound);
    }
    Ok(format!(
        "{} solved instances, defect/bound ≤ {worst:.2e}, min active c_j {min_c:.3e}",
        instances.len()
    ))
}

// ---------------------------------------------------------------------------
// 5

fn basicness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let opts = SolveOptions::default();
    let (mut worst_defect, mut worst_cross) = (0.0f64, 0.0f64);
    for case in 0..20 {
        let (full, fol) = if case < 10 {
            let g = PeriodicGrid::new(vec![24, 12], vec![TAU, 3.0]).unwrap();
            let leaf = rng.random_range(0..2);
            (g, Foliation::new(2, vec![leaf]).unwrap())
        } else {
            let g = PeriodicGrid::new(vec![12, 8, 8], vec![TAU, TAU, 4.0]).unwrap();
            let leaves = if rng.random_bool(0.5) {
                vec![rng.random_range(0..3)]
            } else {
                let skip = rng.random_range(0..3);
                (0..3).filter(|&a| a != skip).collect()
            };
            (g, Foliation::new(3, leaves).unwrap())
        };
        let trans_grid = fol.transverse_grid(&full).unwrap();
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=4);
        let ws = random_weights(&mut rng, n, d);
        let coeffs: Vec<Field> = (0..d)
            .map(|_| random_coefficient(&mut rng, &trans_grid))
            .map(|a| foliate::lift(&a, &full, &fol).unwrap())
            .collect();
        let vol = full.total_volume();
        let mut mean = vec![0.0; n];
        for j in 0..d {
            let c: f64 = rng.random_range(0.5..2.0);
            for (m, u) in mean.iter_mut().zip(ws.weight(j)) {
                *m += c * u / vol;
            }
        }
        let rhs = random_rhs(&mut rng, &trans_grid, &mean, 0.5);
        let rhs = foliate::lift(&rhs, &full, &fol).unwrap();
        let inst = ProblemInstance::new(ws, coeffs, rhs, 0.0).unwrap();

        let report = foliate::theorem_harness(&inst, &fol, &opts, None)
            .map_err(|e| format!("case {case} (leaves {:?}): {e}", fol.leaf_axes()))?;
        ensure!(
            report.clause_i && report.clause_ii && report.clause_iii && report.clause_iv,
            "case {case}: clauses {} {} {} {} (verdict {:?}, margin {:e}, weights {:?}, W {:?})",
            report.clause_i,
            report.clause_ii,
            report.clause_iii,
            report.clause_iv,
            report.verdict,
            report.margin,
            inst.weights().vectors(),
            inst.rhs_integral()
        );

        // Independent check on the returned fields.
        let tol = opts.resolved_tolerance(&inst);
        let xi = report.full_solution.as_ref().unwrap();
        let defect = foliate::basic_defect(xi, &fol).unwrap();
        let lifted = foliate::lift(report.transverse_solution.as_ref().unwrap(), &full, &fol).unwrap();
        let cross = xi.sub(&lifted).norm_inf();
        ensure!(
            defect <= (10.0 * tol).max(1e-8),
            "case {case}: basic defect {defect:e}"
        );
        ensure!(cross <= 1e-6, "case {case}: cross defect {cross:e}");
        worst_defect = worst_defect.max(defect);
        worst_cross = worst_cross.max(cross);
    }
    Ok(format!(
        "20 instances (10 2D, 10 3D): basic defect ≤ {worst_defect:.2e}, lifted gap ≤ {worst_cross:.2e}"
    ))
}

// ---------------------------------------------------------------------------
// 6

fn manufactured_convergence() -> Outcome {
    let ws = WeightSystem::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]]).unwrap();
    let v = [1.0, 0.5];
    let a = |j: usize, x: &[f64]| match j {
        0 => 1.0 + 0.3 * x[1].cos(),
        1 => 2.0 + (x[0] + x[1]).sin(),
        _ => 1.0,
    };
    let mut errors = Vec::new();
    let sizes = [16usize, 32, 64, 128];
    for &size in &sizes {
        let g = PeriodicGrid::new(vec![size, size], vec![TAU, TAU]).unwrap();
        let coeffs: Vec<Field> = (0..3).map(|j| Field::scalar_from_fn(&g, |x| a(j, x))).collect();
        // -∂²(sin x₁) = sin x₁ for the geometric Laplacian.
        let rhs = Field::from_fn(&g, 2, |x, out| {
            let s = x[0].sin();
            for i in 0..2 {
                out[i] = s * v[i];
            }
            for j in 0..3 {
                let u = ws.weight(j);
                let e = (u[0] * v[0] + u[1] * v[1]) * s;
                for i in 0..2 {
                    out[i] += a(j, x) * e.exp() * u[i];
                }
            }
        });
        let exact = Field::from_fn(&g, 2, |x, out| {
            for i in 0..2 {
                out[i] = x[0].sin() * v[i];
            }
        });
        let inst = ProblemInstance::new(ws.clone(), coeffs, rhs, 0.0).unwrap();
        let out = solver::solve(&inst, &SolveOptions::default(), None).map_err(|e| e.to_string())?;
        ensure!(out.status == SolveStatus::Solution, "N = {size}: {:?}", out.status);
        errors.push(out.xi.sub(&exact).norm_inf());
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let text = sizes
        .iter()
        .zip(&errors)
        .map(|(n, e)| format!("N={n}: {e:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure!(
        orders.iter().all(|p| (p - 2.0).abs() <= 0.2),
        "orders {orders:.3?} ({text})"
    );
    Ok(format!("orders {orders:.3?} ({text})"))
}

// ---------------------------------------------------------------------------
// 7

#[derive(Debug, PartialEq)]
enum Oracle {
    Inside,
    Outside,
    Inconclusive,
    Contradiction,
}

fn dot_i(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Searches `c ∈ {1..K}^d`, `k ∈ {1..K}` with `Σ c_j u_j = k W`.
fn lattice_witness(u: &[Vec<i64>], w: &[i64], bound: i64) -> bool {
    let d = u.len();
    let n = w.len();
    let mut c = vec![1i64; d];
    loop {
        let s: Vec<i64> = (0..n).map(|i| (0..d).map(|j| c[j] * u[j][i]).sum()).collect();
        let multiple = if w.iter().all(|&x| x == 0) {
            s.iter().all(|&x| x == 0)
        } else {
            let i = w.iter().position(|&x| x != 0).unwrap();
            s[i] % w[i] == 0 && {
                let k = s[i] / w[i];
                (1..=bound).contains(&k) && s.iter().zip(w).all(|(a, b)| *a == k * b)
            }
        };
        if multiple {
            return true;
        }
        let mut pos = 0;
        loop {
            if pos == d {
                return false;
            }
            c[pos] += 1;
            if c[pos] <= bound {
                break;
            }
            c[pos] = 1;
            pos += 1;
        }
    }
}

/// Searches integer `λ ∈ {-8..8}^n` that rules out every strictly positive
/// combination: `⟨λ,u_j⟩ ≤ 0` for all j and either `⟨λ,W⟩ > 0`, or
/// `⟨λ,W⟩ = 0` with some `⟨λ,u_j⟩ < 0`.
fn lattice_separator(u: &[Vec<i64>], w: &[i64]) -> bool {
    let n = w.len();
    let total = 17i64.pow(n as u32);
    (0..total).any(|mut code| {
        let lambda: Vec<i64> = (0..n)
            .map(|_| {
                let v = code % 17 - 8;
                code /= 17;
                v
            })
            .collect();
        let values: Vec<i64> = u.iter().map(|uj| dot_i(&lambda, uj)).collect();
        let lw = dot_i(&lambda, w);
        values.iter().all(|&v| v <= 0) && (lw > 0 || (lw == 0 && values.iter().any(|&v| v < 0)))
    })
}

fn oracle(u: &[Vec<i64>], w: &[i64]) -> Oracle {
    let witness = lattice_witness(u, w, 12) || lattice_witness(u, w, 24);
    let separator = lattice_separator(u, w);
    match (witness, separator) {
        (true, false) => Oracle::Inside,
        (false, true) => Oracle::Outside,
        (true, true) => Oracle::Contradiction,
        (false, false) => Oracle::Inconclusive,
    }
}

fn cone_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (mut inside, mut outside, mut drawn) = (0, 0, 0);
    while inside + outside < 500 {
        drawn += 1;
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=4);
        let u: Vec<Vec<i64>> = (0..d)
            .map(|_| loop {
                let v: Vec<i64> = (0..n).map(|_| rng.random_range(-2..=2)).collect();
                if v.iter().any(|&x| x != 0) {
                    break v;
                }
            })
            .collect();
        let w: Vec<i64> = (0..n).map(|_| rng.random_range(-3..=3)).collect();
        let ws = WeightSystem::new(
            n,
            u.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect(),
        )
        .unwrap();
        let wf: Vec<f64> = w.iter().map(|&x| x as f64).collect();
        let active = ActiveSet::all(d);
        let cert = cone::cone_membership(&wf, &ws, &active, None)
            .map_err(|e| format!("u = {u:?}, W = {w:?}: {e}"))?;
        if cert.margin.abs() <= 10.0 * cert.tau_cone {
            continue;
        }
        let expected = oracle(&u, &w);
        let got = match cert.verdict {
            Verdict::Inside => Oracle::Inside,
            Verdict::Outside => Oracle::Outside,
        };
        ensure!(
            expected == got,
            "u = {u:?}, W = {w:?}: LP says {got:?} (margin {:e}), oracle says {expected:?}",
            cert.margin
        );
        let check = cert.check(&wf, &ws, &active);
        ensure!(check.sound, "u = {u:?}, W = {w:?}: certificate fails verification: {check:?}");
        match cert.verdict {
            Verdict::Inside => {
                let c = cert.witness_c.as_ref().unwrap();
                ensure!(
                    check.witness_defect.unwrap() <= 1e-9 * (1.0 + max_abs(&wf))
                        && c.iter().all(|&x| x > cert.tau_cone),
                    "u = {u:?}, W = {w:?}: witness {c:?}"
                );
                inside += 1;
            }
            Verdict::Outside => outside += 1,
        }
    }
    Ok(format!(
        "500 samples ({inside} Inside, {outside} Outside; {} near-boundary draws skipped) agree with the lattice oracle",
        drawn - 500
    ))
}

// ---------------------------------------------------------------------------
// 8

/// Dense Newton solve of `Lf - 4k₁e^{-2f} + 4k₂e^{2f} = 0` on a 1D periodic
/// grid, with `L` the negated three-point second difference.
fn sinh_gordon_reference(k1: &[f64], k2: &[f64], h: f64) -> Vec<f64> {
    let n = k1.len();
    let mut f = DVector::<f64>::zeros(n);
    for _ in 0..50 {
        let mut jac = DMatrix::<f64>::zeros(n, n);
        let mut res = DVector::<f64>::zeros(n);
        for i in 0..n {
            let (l, r) = ((i + n - 1) % n, (i + 1) % n);
            let em = (-2.0 * f[i]).exp();
            let ep = (2.0 * f[i]).exp();
            res[i] = (2.0 * f[i] - f[l] - f[r]) / (h * h) - 4.0 * k1[i] * em + 4.0 * k2[i] * ep;
            jac[(i, i)] += 2.0 / (h * h) + 8.0 * k1[i] * em + 8.0 * k2[i] * ep;
            jac[(i, l)] -= 1.0 / (h * h);
            jac[(i, r)] -= 1.0 / (h * h);
        }
        if res.amax() < 1e-13 {
            break;
        }
        let step = jac.lu().solve(&res).expect("nonsingular Jacobian");
        f -= step;
    }
    f.iter().copied().collect()
}

fn cyclic_higgs() -> Outcome {
    let opts = SolveOptions::default();
    let g = PeriodicGrid::new(vec![16, 16], vec![TAU, TAU]).unwrap();
    let mut notes = Vec::new();
    for r in [2usize, 3, 4] {
        // k_j = k_{r-j} for j < r; k_r is unconstrained.
        let k: Vec<Field> = (1..=r)
            .map(|j| {
                if j == r {
                    Field::scalar_from_fn(&g, |x| x[0].sin().powi(2) + 0.2 * x[1].cos().powi(2))
                } else {
                    let s = j.min(r - j) as f64;
                    Field::scalar_from_fn(&g, move |x| 1.0 + 0.4 * (s * x[0] + x[1]).cos())
                }
            })
            .collect();
        let spec = CyclicHiggsSpec::new(k, Field::zeros(&g, r), true);
        let sym = higgs::build_instance(&spec, HiggsCoordinates::Symmetric).map_err(|e| e.to_string())?;

        let ones = ConeCertificate {
            verdict: Verdict::Inside,
            witness_c: Some(vec![1.0; r]),
            separator_lambda: None,
            margin: 1.0,
            tau_cone: cone::default_tau_cone(&vec![0.0; r]),
        };
        let amb = higgs::build_instance(&spec, HiggsCoordinates::Ambient).unwrap();
        ensure!(
            ones.check(&vec![0.0; r], amb.instance.weights(), amb.instance.active()).sound,
            "r = {r}: c = (1,...,1) is not a valid witness"
        );
        let cert = sym.instance.certificate(None).unwrap();
        ensure!(cert.verdict == Verdict::Inside, "r = {r}: certificate {:?}", cert.verdict);
        ensure!(
            sym.instance.kernel_basis().is_empty(),
            "r = {r}: kernel is nontrivial in symmetric coordinates"
        );

        let dim = sym.instance.n();
        let a = solver::solve(&sym.instance, &opts, Some(&solver::random_initial_guess(&g, dim, 11)))
            .map_err(|e| e.to_string())?;
        let b = solver::solve(&sym.instance, &opts, Some(&solver::random_initial_guess(&g, dim, 12)))
            .map_err(|e| e.to_string())?;
        ensure!(
            a.status == SolveStatus::Solution && b.status == SolveStatus::Solution,
            "r = {r}: {:?} / {:?}",
            a.status,
            b.status
        );
        ensure!(
            a.gauge_shift.iter().chain(&b.gauge_shift).all(|&s| s == 0.0),
            "r = {r}: normalization shifted a symmetric solution"
        );
        let gap = a.xi.sub(&b.xi).norm_inf();
        ensure!(gap < 1e-6, "r = {r}: solutions from two starts differ by {gap:e}");

        let tz = higgs::build_instance(&spec, HiggsCoordinates::TraceZero).unwrap();
        let t = solver::solve(&tz.instance, &opts, Some(&solver::random_initial_guess(&g, r - 1, 13)))
            .map_err(|e| e.to_string())?;
        ensure!(t.status == SolveStatus::Solution, "r = {r}: trace-zero solve {:?}", t.status);
        let xi_tz = tz.to_ambient(&t.xi).unwrap();
        let defect = higgs::check_symmetry(&xi_tz, r).unwrap();
        ensure!(defect <= 1e-8, "r = {r}: symmetry defect {defect:e}");
        let across = xi_tz.sub(&sym.to_ambient(&a.xi).unwrap()).norm_inf();
        ensure!(across < 1e-6, "r = {r}: trace-zero and V solutions differ by {across:e}");
        notes.push(format!("r={r}: gap {gap:.1e}, symmetry {defect:.1e}"));
    }

    let line = PeriodicGrid::new(vec![64], vec![TAU]).unwrap();
    let k1 = Field::constant(&line, &[1.0]);
    let k2 = Field::scalar_from_fn(&line, |x| x[0].sin().powi(2) + 0.1);
    let spec = CyclicHiggsSpec::new(vec![k1.clone(), k2.clone()], Field::zeros(&line, 2), true);
    let hi = higgs::build_instance(&spec, HiggsCoordinates::Symmetric).unwrap();
    let out = solver::solve(&hi.instance, &opts, None).map_err(|e| e.to_string())?;
    ensure!(out.status == SolveStatus::Solution, "sinh-Gordon: {:?}", out.status);
    let xi = hi.to_ambient(&out.xi).unwrap();
    let reference = sinh_gordon_reference(k1.data(), k2.data(), line.spacing()[0]);
    let gap = (0..64)
        .map(|i| (xi.node(i)[0] - reference[i]).abs())
        .fold(0.0, f64::max);
    ensure!(gap < 1e-6, "r = 2 differs from the scalar sinh-Gordon solve by {gap:e}");
    ensure!(
        (0..64).all(|i| (xi.node(i)[0] + xi.node(i)[1]).abs() < 1e-12),
        "r = 2 solution is not of the form (f, -f)"
    );
    notes.push(format!("sinh-Gordon gap {gap:.1e}"));
    Ok(notes.join("; "))
}
