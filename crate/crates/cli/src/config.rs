//! JSON run configuration.
//!
//! Unknown keys are rejected. Every error carries the JSON pointer of the
//! offending value; expression errors also carry the character position.

use gkw_core::cone::WeightSystem;
use gkw_core::foliate::Foliation;
use gkw_core::functional::ProblemInstance;
use gkw_core::grid::{Field, PeriodicGrid};
use gkw_core::higgs::{self, CyclicHiggsSpec, FourierTerm, HiggsCoordinates, HiggsInstance};
use gkw_core::solver::SolveOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::expr::Expr;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Check,
    #[default]
    Solve,
    Harness,
    Verify,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub m: usize,
    #[serde(rename = "N")]
    pub points: Vec<usize>,
    /// Defaults to 2π on every axis.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationSpec {
    /// One-based axes tangent to the leaves.
    pub leaf_axes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Explicit {
        weights: Vec<Vec<f64>>,
        coefficients: Vec<String>,
        rhs: Vec<String>,
    },
    KazdanWarner {
        h: String,
        c: String,
    },
    CyclicHiggs {
        r: usize,
        /// All r coefficients, or the first r-1 when `q` is given.
        k: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<FourierTerm>>,
        /// r expressions; zero when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rhs: Option<Vec<String>>,
        #[serde(default = "yes")]
        symmetric: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coordinates: Option<HiggsCoordinates>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foliation: Option<FoliationSpec>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Coefficients with `max a_j ≤ tau_active` are inactive.
    #[serde(default)]
    pub tau_active: f64,
    /// Basicness threshold; defaults to ten times the residual tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_basic: Option<f64>,
}

fn schema(pointer: &str, message: impl Into<String>) -> CliError {
    CliError::Schema {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        schema(&pointer, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), CliError> {
        let m = self.grid.m;
        if !(1..=4).contains(&m) {
            return Err(schema("/grid/m", format!("m = {m} must lie in 1..=4")));
        }
        if self.grid.points.len() != m {
            return Err(schema(
                "/grid/N",
                format!("expected {m} entries, found {}", self.grid.points.len()),
            ));
        }
        if let Some(l) = &self.grid.lengths {
            if l.len() != m {
                return Err(schema("/grid/L", format!("expected {m} entries, found {}", l.len())));
            }
        }
        if let Some(f) = &self.foliation {
            for (i, &a) in f.leaf_axes.iter().enumerate() {
                if a == 0 || a > m {
                    return Err(schema(
                        &format!("/foliation/leaf_axes/{i}"),
                        format!("axis {a} is outside 1..={m}"),
                    ));
                }
            }
            let mut axes = f.leaf_axes.clone();
            axes.sort_unstable();
            axes.dedup();
            if axes.len() >= m {
                return Err(schema(
                    "/foliation/leaf_axes",
                    "leaf axes must be a proper subset of the grid axes",
                ));
            }
        }
        if let Err(e) = self.solver.validate() {
            return Err(schema("/solver", e.to_string()));
        }
        if !(self.tau_active.is_finite() && self.tau_active >= 0.0) {
            return Err(schema("/tau_active", "must be a nonnegative number"));
        }
        if let Some(t) = self.tau_basic {
            if !(t.is_finite() && t > 0.0) {
                return Err(schema("/tau_basic", "must be positive"));
            }
        }
        match &self.problem {
            ProblemSpec::Explicit {
                weights,
                coefficients,
                rhs,
            } => {
                let n = rhs.len();
                if n == 0 {
                    return Err(schema("/problem/rhs", "at least one component is required"));
                }
                if weights.len() != coefficients.len() {
                    return Err(schema(
                        "/problem/coefficients",
                        format!("{} weights but {} coefficients", weights.len(), coefficients.len()),
                    ));
                }
                for (j, u) in weights.iter().enumerate() {
                    if u.len() != n {
                        return Err(schema(
                            &format!("/problem/weights/{j}"),
                            format!("weight has {} entries, rhs has {n} components", u.len()),
                        ));
                    }
                }
                self.parse_all("/problem/coefficients", coefficients)?;
                self.parse_all("/problem/rhs", rhs)?;
            }
            ProblemSpec::KazdanWarner { h, c } => {
                self.parse_one("/problem/h", h)?;
                self.parse_one("/problem/c", c)?;
            }
            ProblemSpec::CyclicHiggs {
                r,
                k,
                q,
                rhs,
                symmetric,
                coordinates,
            } => {
                let r = *r;
                if r < 2 {
                    return Err(schema("/problem/r", "rank must be at least 2"));
                }
                let expected = if q.is_some() { r - 1 } else { r };
                if k.len() != expected {
                    return Err(schema(
                        "/problem/k",
                        format!(
                            "expected {expected} expressions{}, found {}",
                            if q.is_some() { " alongside q" } else { "" },
                            k.len()
                        ),
                    ));
                }
                if let Some(q) = q {
                    for (i, t) in q.iter().enumerate() {
                        if t.freq.len() != m {
                            return Err(schema(
                                &format!("/problem/q/{i}/freq"),
                                format!("expected {m} frequencies, found {}", t.freq.len()),
                            ));
                        }
                    }
                }
                self.parse_all("/problem/k", k)?;
                if let Some(rhs) = rhs {
                    if rhs.len() != r {
                        return Err(schema(
                            "/problem/rhs",
                            format!("expected {r} expressions, found {}", rhs.len()),
                        ));
                    }
                    self.parse_all("/problem/rhs", rhs)?;
                }
                if !symmetric && *coordinates == Some(HiggsCoordinates::Symmetric) {
                    return Err(schema(
                        "/problem/coordinates",
                        "symmetric coordinates need symmetric data",
                    ));
                }
            }
        }
        Ok(())
    }

    fn parse_one(&self, pointer: &str, src: &str) -> Result<Expr, CliError> {
        Expr::parse(src, self.grid.m).map_err(|e| CliError::Expression {
            pointer: pointer.to_string(),
            position: e.position,
            message: e.message,
        })
    }

    fn parse_all(&self, pointer: &str, srcs: &[String]) -> Result<Vec<Expr>, CliError> {
        srcs.iter()
            .enumerate()
            .map(|(i, s)| self.parse_one(&format!("{pointer}/{i}"), s))
            .collect()
    }

    pub fn grid(&self) -> Result<PeriodicGrid, CliError> {
        let g = match &self.grid.lengths {
            Some(l) => PeriodicGrid::new(self.grid.points.clone(), l.clone()),
            None => PeriodicGrid::with_default_lengths(self.grid.points.clone()),
        };
        g.map_err(|e| schema("/grid", e.to_string()))
    }

    pub fn foliation(&self) -> Option<Foliation> {
        self.foliation.as_ref().map(|f| {
            Foliation::new(self.grid.m, f.leaf_axes.iter().map(|a| a - 1).collect())
                .expect("validated leaf axes")
        })
    }

    fn sample(&self, grid: &PeriodicGrid, pointer: &str, srcs: &[String]) -> Result<Field, CliError> {
        let exprs = self.parse_all(pointer, srcs)?;
        let mut data = Vec::with_capacity(grid.node_count() * exprs.len());
        for node in 0..grid.node_count() {
            let x = grid.coordinates(node);
            for (i, e) in exprs.iter().enumerate() {
                let v = e.eval(&x).map_err(|err| CliError::Expression {
                    pointer: format!("{pointer}/{i}"),
                    position: err.position,
                    message: err.message,
                })?;
                data.push(v);
            }
        }
        Ok(Field::from_vec(grid, exprs.len(), data)?)
    }

    fn scalar(&self, grid: &PeriodicGrid, pointer: &str, src: &str) -> Result<Field, CliError> {
        let field = self.sample(grid, "", std::slice::from_ref(&src.to_string()));
        field.map_err(|e| match e {
            CliError::Expression {
                position, message, ..
            } => CliError::Expression {
                pointer: pointer.to_string(),
                position,
                message,
            },
            other => other,
        })
    }

    /// Samples every expression and assembles the instance.
    pub fn build(&self) -> Result<BuiltProblem, CliError> {
        let grid = self.grid()?;
        match &self.problem {
            ProblemSpec::Explicit {
                weights,
                coefficients,
                rhs,
            } => {
                let ws = WeightSystem::new(rhs.len(), weights.clone())?;
                let a = (0..coefficients.len())
                    .map(|j| {
                        self.scalar(&grid, &format!("/problem/coefficients/{j}"), &coefficients[j])
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let w = self.sample(&grid, "/problem/rhs", rhs)?;
                Ok(BuiltProblem {
                    instance: ProblemInstance::new(ws, a, w, self.tau_active)?,
                    higgs: None,
                })
            }
            ProblemSpec::KazdanWarner { h, c } => {
                let ws = WeightSystem::new(1, vec![vec![1.0]])?;
                let a = self.scalar(&grid, "/problem/h", h)?;
                let w = self.scalar(&grid, "/problem/c", c)?;
                Ok(BuiltProblem {
                    instance: ProblemInstance::new(ws, vec![a], w, self.tau_active)?,
                    higgs: None,
                })
            }
            ProblemSpec::CyclicHiggs {
                r,
                k,
                q,
                rhs,
                symmetric,
                coordinates,
            } => {
                let mut ks = (0..k.len())
                    .map(|j| self.scalar(&grid, &format!("/problem/k/{j}"), &k[j]))
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(q) = q {
                    ks.push(higgs::q_modulus_squared(&grid, q)?);
                }
                let w = match rhs {
                    Some(rhs) => self.sample(&grid, "/problem/rhs", rhs)?,
                    None => Field::zeros(&grid, *r),
                };
                let mut spec = CyclicHiggsSpec::new(ks, w, *symmetric);
                spec.tau_active = self.tau_active;
                let coords = coordinates.unwrap_or(if *symmetric {
                    HiggsCoordinates::Symmetric
                } else {
                    HiggsCoordinates::TraceZero
                });
                let built = higgs::build_instance(&spec, coords)?;
                Ok(BuiltProblem {
                    instance: built.instance.clone(),
                    higgs: Some(built),
                })
            }
        }
    }
}

pub struct BuiltProblem {
    pub instance: ProblemInstance,
    pub higgs: Option<HiggsInstance>,
}
