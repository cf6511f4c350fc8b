//! Orchestrates validate, certify, solve or harness, verify, and writes the
//! artifacts of a run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use gkw_core::cone::Verdict;
use gkw_core::foliate::{self, EquivalenceReport, Foliation};
use gkw_core::functional::{self, ProblemInstance, ValidationReport};
use gkw_core::grid::Field;
use gkw_core::higgs::{self, HiggsCoordinates, HiggsInstance};
use gkw_core::io;
use gkw_core::solver::{
    self, OutcomeSummary, SolveMode, SolveOptions, SolveStatus, VerificationReport,
};
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, ErrorReport, EXIT_NO_SOLUTION, EXIT_NUMERICAL, EXIT_OK};
use crate::plot;

pub const DEFAULT_OUTPUT: &str = "gkw-out";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub mode: Mode,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub reproducible: bool,
    pub audit: bool,
    pub strict_basic: bool,
    /// Field file for verify mode.
    pub field: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub m: usize,
    #[serde(rename = "N")]
    pub points: Vec<usize>,
    #[serde(rename = "L")]
    pub lengths: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemSummary {
    pub n: usize,
    pub d: usize,
    pub weights: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub higgs_coordinates: Option<HiggsCoordinates>,
    /// Orthonormal frame in R^r for cyclic Higgs runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: Mode,
    pub exit_code: i32,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<OutcomeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_basic_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_basic_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harness: Option<EquivalenceReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

impl Report {
    fn new(mode: Mode, seed: Option<u64>) -> Self {
        Self {
            tool: "gkw",
            version: env!("CARGO_PKG_VERSION"),
            mode,
            exit_code: EXIT_OK,
            status: String::new(),
            seed,
            grid: None,
            problem: None,
            validation: None,
            outcome: None,
            verification: None,
            data_basic_defect: None,
            solution_basic_defect: None,
            symmetry_defect: None,
            harness: None,
            artifacts: Vec::new(),
            error: None,
            generated_at_unix: None,
            elapsed_seconds: None,
        }
    }
}

pub struct RunResult {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub report: Report,
}

struct Context<'a> {
    cfg: &'a RunConfig,
    opts: &'a RunOptions,
    out: PathBuf,
}

impl Context<'_> {
    fn write(&self, report: &mut Report, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::io(format!("creating {}", parent.display()), e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        report.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_field(&self, report: &mut Report, name: &str, f: &Field) -> Result<(), CliError> {
        let mut buf = Vec::new();
        io::write_field(&mut buf, f)?;
        self.write(report, name, &buf)
    }

    fn solve_options(&self) -> SolveOptions {
        let mut s = self.cfg.solver.clone();
        if self.opts.audit {
            s.mode = SolveMode::Audit;
        }
        if let Some(seed) = self.opts.seed {
            s.seed = seed;
        }
        s
    }
}

/// Executes a run and writes `report.json` whatever the outcome.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> RunResult {
    let started = Instant::now();
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let ctx = Context {
        cfg,
        opts,
        out: out.clone(),
    };
    let mut report = Report::new(opts.mode, opts.seed);
    let exit_code = match execute(&ctx, &mut report) {
        Ok(code) => code,
        Err(e) => {
            report.status = "error".into();
            report.error = Some(e.report());
            e.exit_code()
        }
    };
    report.exit_code = exit_code;
    if !opts.reproducible {
        report.generated_at_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        report.elapsed_seconds = Some(started.elapsed().as_secs_f64());
    }
    report.artifacts.push("report.json".into());
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let written = fs::create_dir_all(&out)
        .and_then(|_| fs::write(out.join("report.json"), json.as_bytes()));
    let exit_code = match written {
        Ok(()) => exit_code,
        Err(e) => {
            eprintln!("gkw: cannot write report to {}: {e}", out.display());
            if exit_code == EXIT_OK {
                crate::error::EXIT_CONFIG
            } else {
                exit_code
            }
        }
    };
    RunResult {
        exit_code,
        out_dir: out,
        report,
    }
}

/// Report for failures that happen before a config exists, such as schema
/// errors. Returns the exit code.
pub fn write_error_report(out: &Path, mode: Mode, err: &CliError, reproducible: bool) -> i32 {
    let mut report = Report::new(mode, None);
    report.status = "error".into();
    report.exit_code = err.exit_code();
    report.error = Some(err.report());
    report.artifacts.push("report.json".into());
    if !reproducible {
        report.generated_at_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(e) = fs::create_dir_all(out).and_then(|_| fs::write(out.join("report.json"), json)) {
        eprintln!("gkw: cannot write report to {}: {e}", out.display());
    }
    report.exit_code
}

fn summarize(inst: &ProblemInstance, higgs: Option<&HiggsInstance>) -> ProblemSummary {
    ProblemSummary {
        n: inst.n(),
        d: inst.d(),
        weights: inst.weights().vectors().to_vec(),
        labels: inst.weights().labels().map(<[String]>::to_vec),
        higgs_coordinates: higgs.map(|h| h.coordinates),
        frame: higgs.map(|h| h.frame.clone()),
    }
}

fn max_data_defect(inst: &ProblemInstance, fol: &Foliation) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for f in inst.coefficients().iter().chain(std::iter::once(inst.rhs())) {
        worst = worst.max(foliate::basic_defect(f, fol)?);
    }
    Ok(worst)
}

fn execute(ctx: &Context, report: &mut Report) -> Result<i32, CliError> {
    let cfg = ctx.cfg;
    let built = cfg.build()?;
    let inst = &built.instance;
    let grid = inst.grid();
    report.grid = Some(GridSummary {
        m: grid.dim(),
        points: grid.points().to_vec(),
        lengths: grid.lengths().to_vec(),
    });
    report.problem = Some(summarize(inst, built.higgs.as_ref()));

    let sopts = ctx.solve_options();
    let tol = sopts.resolved_tolerance(inst);
    let tau_basic = cfg.tau_basic.unwrap_or(10.0 * tol);
    let fol = cfg.foliation();
    if let Some(fol) = &fol {
        report.data_basic_defect = Some(max_data_defect(inst, fol)?);
        if ctx.opts.strict_basic {
            foliate::reduce(inst, fol, tau_basic)?;
        }
    }

    let validation = functional::validate(inst, sopts.tau_cone)?;
    let verdict = validation.certificate.verdict;
    report.validation = Some(validation);

    let ambient = |xi: &Field| -> Result<Field, CliError> {
        Ok(match &built.higgs {
            Some(h) => h.to_ambient(xi)?,
            None => xi.clone(),
        })
    };

    match ctx.opts.mode {
        Mode::Check => {
            report.status = format!("{verdict:?}").to_lowercase();
            Ok(if verdict == Verdict::Inside {
                EXIT_OK
            } else {
                EXIT_NO_SOLUTION
            })
        }
        Mode::Solve => {
            let xi0 = ctx
                .opts
                .seed
                .map(|seed| solver::random_initial_guess(grid, inst.n(), seed));
            let outcome = solver::solve(inst, &sopts, xi0.as_ref())?;
            let mut csv = Vec::new();
            solver::write_diagnostics_csv(&mut csv, &outcome.diagnostics)?;
            ctx.write(report, "convergence.csv", &csv)?;
            report.outcome = Some(outcome.summary());
            report.status = status_name(outcome.status).into();
            match outcome.status {
                SolveStatus::Solution => {
                    report.verification = Some(solver::verify_solution(inst, &outcome.xi)?);
                    ctx.write_field(report, "solution.gkwf", &outcome.xi)?;
                    let xi = ambient(&outcome.xi)?;
                    if let Some(h) = &built.higgs {
                        report.symmetry_defect = Some(higgs::check_symmetry(&xi, h.r())?);
                        if h.coordinates != HiggsCoordinates::Ambient {
                            ctx.write_field(report, "solution_ambient.gkwf", &xi)?;
                        }
                    }
                    if let Some(fol) = &fol {
                        report.solution_basic_defect = Some(foliate::basic_defect(&outcome.xi, fol)?);
                    }
                    write_plots(ctx, report, &xi)?;
                    Ok(EXIT_OK)
                }
                SolveStatus::NoSolutionCertified => Ok(EXIT_NO_SOLUTION),
                SolveStatus::MaxIterations | SolveStatus::Diverged => Ok(EXIT_NUMERICAL),
            }
        }
        Mode::Harness => {
            let fol = fol.unwrap_or_else(|| Foliation::trivial(grid.dim()));
            let mut eq = foliate::theorem_harness(inst, &fol, &sopts, Some(tau_basic))?;
            if let Some(xi) = eq.full_solution.take() {
                ctx.write_field(report, "solution.gkwf", &xi)?;
                report.verification = Some(solver::verify_solution(inst, &xi)?);
                let amb = ambient(&xi)?;
                if let Some(h) = &built.higgs {
                    report.symmetry_defect = Some(higgs::check_symmetry(&amb, h.r())?);
                }
                write_plots(ctx, report, &amb)?;
            }
            if let Some(t) = eq.transverse_solution.take() {
                ctx.write_field(report, "transverse_solution.gkwf", &t)?;
            }
            report.solution_basic_defect = eq.solution_basic_defect;
            report.status = if eq.verdict == Verdict::Inside {
                "consistent_solution".into()
            } else {
                "consistent_no_solution".into()
            };
            let code = if eq.verdict == Verdict::Inside {
                EXIT_OK
            } else {
                EXIT_NO_SOLUTION
            };
            report.harness = Some(eq);
            Ok(code)
        }
        Mode::Verify => {
            let path = ctx
                .opts
                .field
                .as_ref()
                .ok_or_else(|| CliError::Usage("verify needs a field file".into()))?;
            let xi = load(path)?;
            if xi.n() != inst.n() || !xi.grid().same_nodes(grid) {
                return Err(CliError::Usage(format!(
                    "{} does not match the configured grid and unknown",
                    path.display()
                )));
            }
            let xi = xi.with_grid(grid)?;
            let v = solver::verify_solution(inst, &xi)?;
            if let Some(h) = &built.higgs {
                report.symmetry_defect = Some(higgs::check_symmetry(&ambient(&xi)?, h.r())?);
            }
            if let Some(fol) = &fol {
                report.solution_basic_defect = Some(foliate::basic_defect(&xi, fol)?);
            }
            let w_scale = 1.0 + inst.rhs_integral().iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let ok = v.residual_inf <= tol
                && v.identity_defect <= 1e-8 * w_scale
                && v.all_active_positive;
            report.status = if ok { "verified" } else { "not_verified" }.into();
            report.verification = Some(v);
            Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
        }
    }
}

fn load(path: &Path) -> Result<Field, CliError> {
    io::load_field(path).map_err(|e| match e {
        gkw_core::Error::Io(source) => CliError::io(format!("reading {}", path.display()), source),
        other => CliError::Core(other),
    })
}

fn write_plots(ctx: &Context, report: &mut Report, xi: &Field) -> Result<(), CliError> {
    for (name, bytes) in plot::slices(xi) {
        ctx.write(report, &format!("plotdata/{name}"), &bytes)?;
    }
    Ok(())
}

pub fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Solution => "solution",
        SolveStatus::NoSolutionCertified => "no_solution_certified",
        SolveStatus::MaxIterations => "max_iterations",
        SolveStatus::Diverged => "diverged",
    }
}
