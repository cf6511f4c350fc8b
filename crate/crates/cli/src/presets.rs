//! Ready-made configurations for `gkw make-example`.

use gkw_core::higgs::FourierTerm;

use crate::config::{FoliationSpec, GridSpec, ProblemSpec, RunConfig};
use crate::error::CliError;

pub const PRESETS: &[&str] = &[
    "kazdan-warner",
    "kazdan-warner-outside",
    "cyclic-higgs",
    "harness-2d",
    "explicit-2d",
];

struct Params {
    pairs: Vec<(String, String)>,
    used: Vec<String>,
}

impl Params {
    fn parse(raw: &[String]) -> Result<Self, CliError> {
        let pairs = raw
            .iter()
            .map(|p| {
                p.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| CliError::Usage(format!("parameter '{p}' is not key=value")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            pairs,
            used: Vec::new(),
        })
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.used.push(key.into());
        self.pairs
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map_or_else(|| default.to_string(), |(_, v)| v.clone())
    }

    fn number(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        let s = self.string(key, &default.to_string());
        s.parse()
            .map_err(|_| CliError::Usage(format!("parameter {key}={s} is not a nonnegative integer")))
    }

    fn finish(self) -> Result<(), CliError> {
        match self.pairs.iter().find(|(k, _)| !self.used.contains(k)) {
            Some((k, _)) => Err(CliError::Usage(format!(
                "unknown parameter '{k}' (accepted: {})",
                self.used.join(", ")
            ))),
            None => Ok(()),
        }
    }
}

fn grid(m: usize, n: usize) -> GridSpec {
    GridSpec {
        m,
        points: vec![n; m],
        lengths: None,
    }
}

fn base(grid: GridSpec, problem: ProblemSpec) -> RunConfig {
    RunConfig {
        grid,
        foliation: None,
        problem,
        solver: Default::default(),
        output: None,
        mode: None,
        tau_active: 0.0,
        tau_basic: None,
    }
}

/// Builds the named preset; `params` are `key=value` overrides.
pub fn make_example(preset: &str, params: &[String]) -> Result<RunConfig, CliError> {
    let mut p = Params::parse(params)?;
    let cfg = match preset {
        "kazdan-warner" | "kazdan-warner-outside" => {
            let m = p.number("m", 1)?;
            let n = p.number("N", 64)?;
            let default_c = if preset == "kazdan-warner" { "1" } else { "-1" };
            let h = p.string("h", "1");
            let c = p.string("c", default_c);
            base(grid(m, n), ProblemSpec::KazdanWarner { h, c })
        }
        "cyclic-higgs" => {
            let r = p.number("r", 3)?;
            let n = p.number("N", 32)?;
            if r < 2 {
                return Err(CliError::Usage("cyclic-higgs needs r >= 2".into()));
            }
            let k = p.string("k", "1 + 0.5*cos(x1)");
            base(
                grid(2, n),
                ProblemSpec::CyclicHiggs {
                    r,
                    k: vec![k; r - 1],
                    q: Some(vec![
                        FourierTerm {
                            freq: vec![1, 0],
                            amp: [1.0, 0.0],
                        },
                        FourierTerm {
                            freq: vec![0, 1],
                            amp: [0.5, 0.0],
                        },
                    ]),
                    rhs: None,
                    symmetric: true,
                    coordinates: None,
                },
            )
        }
        "harness-2d" => {
            let n = p.number("N", 32)?;
            let mut cfg = base(
                GridSpec {
                    m: 2,
                    points: vec![n, n / 2],
                    lengths: None,
                },
                ProblemSpec::Explicit {
                    weights: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]],
                    coefficients: vec![
                        "1 + 0.5*cos(x1)".into(),
                        "2 + sin(x1)".into(),
                        "1".into(),
                    ],
                    rhs: vec!["0.3*sin(x1)".into(), "0.5 + 0.2*cos(2*x1)".into()],
                },
            );
            cfg.foliation = Some(FoliationSpec { leaf_axes: vec![2] });
            cfg.mode = Some(crate::config::Mode::Harness);
            cfg
        }
        "explicit-2d" => {
            let n = p.number("N", 32)?;
            base(
                grid(2, n),
                ProblemSpec::Explicit {
                    weights: vec![vec![1.0, 0.0], vec![-1.0, 1.0]],
                    coefficients: vec!["1 + 0.5*cos(x1)".into(), "sin(x2)^2 + 0.1".into()],
                    rhs: vec!["0.5 + 0.2*cos(x2)".into(), "1 + 0.1*sin(x1 + x2)".into()],
                },
            )
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    p.finish()?;
    Ok(cfg)
}
