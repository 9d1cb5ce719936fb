//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use totc::study::StudyMode;
use totc::{Discretization, FunctionRegistry, InnerOptions, OuterOptions, ProblemSpec, StudyConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Sweep,
    Eoc,
    GrowthCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Eoc => "eoc",
            Command::GrowthCheck => "growth-check",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedFunction {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub y0: NamedFunction,
    pub y_target: NamedFunction,
    #[serde(default = "default_p")]
    pub p_exponent: f64,
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    #[serde(rename = "M")]
    pub m: usize,
    pub n_div: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub mode: StudyMode,
    /// `[M, n_div]` pairs.
    pub sequence: Vec<(usize, usize)>,
    pub reference: (usize, usize),
    #[serde(default)]
    pub reference_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub t_start: f64,
    pub t_end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    command: Option<Command>,
    problem: ProblemSection,
    #[serde(default)]
    discretization: Option<DiscretizationSection>,
    #[serde(default)]
    outer: Option<serde_json::Value>,
    #[serde(default)]
    inner: Option<serde_json::Value>,
    #[serde(default)]
    study: Option<StudySection>,
    #[serde(default)]
    sweep: Option<SweepSection>,
    #[serde(default)]
    output_path: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    samples: Option<usize>,
}

/// Validated configuration for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub spec: ProblemSpec,
    pub discretization: Option<DiscretizationSection>,
    pub outer: OuterOptions,
    pub inner: InnerOptions,
    pub study: Option<StudySection>,
    pub sweep: Option<SweepSection>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub samples: usize,
    /// `H(Π y0)` on the run's discretization, when one is configured.
    pub initial_constraint: Option<f64>,
}

impl RunConfig {
    pub fn study_config(&self) -> Result<StudyConfig, CliError> {
        let s = self.study.as_ref().ok_or_else(|| CliError::Config("missing key `study`".into()))?;
        Ok(StudyConfig {
            mode: s.mode,
            sequence: s.sequence.clone(),
            reference: s.reference,
            spec: self.spec.clone(),
            outer: self.outer,
            inner: self.inner,
            reference_time: s.reference_time,
        })
    }

    pub fn disc(&self) -> Result<Discretization, CliError> {
        let d = self.discretization.ok_or_else(|| CliError::Config("missing key `discretization`".into()))?;
        Ok(Discretization::uniform(d.n_div, d.m)?)
    }
}

/// Options section with omitted fields taken from `T::default()`.
fn with_defaults<T>(key: &str, partial: Option<serde_json::Value>) -> Result<T, CliError>
where
    T: Default + serde::Serialize + serde::de::DeserializeOwned,
{
    let mut merged = serde_json::to_value(T::default()).expect("options serialize");
    match partial {
        None => {}
        Some(serde_json::Value::Object(fields)) => {
            let slots = merged.as_object_mut().expect("options are a struct");
            for (k, v) in fields {
                if !slots.contains_key(&k) {
                    return Err(CliError::Config(format!("unknown key `{key}.{k}`")));
                }
                slots.insert(k, v);
            }
        }
        Some(_) => return Err(CliError::Config(format!("key `{key}` must be an object"))),
    }
    serde_json::from_value(merged).map_err(|e| CliError::Config(format!("key `{key}`: {e}")))
}

pub fn parse_config(path: &Path, command: Command) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text, command)
}

pub fn parse_config_str(text: &str, command: Command) -> Result<RunConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(c) = raw.command {
        if c != command {
            return Err(CliError::Config(format!(
                "key `command` is `{}` but `{}` was requested",
                c.name(),
                command.name()
            )));
        }
    }

    let registry = FunctionRegistry;
    let resolve = |key: &str, f: &NamedFunction| {
        registry.resolve(&f.name, &f.params).map_err(|e| CliError::Config(format!("key `problem.{key}`: {e}")))
    };
    let p = &raw.problem;
    let spec = ProblemSpec {
        a: p.a,
        b: p.b,
        alpha: p.alpha,
        lambda: p.lambda,
        y0: resolve("y0", &p.y0)?,
        y_target: resolve("y_target", &p.y_target)?,
        p_exponent: p.p_exponent,
    };
    if !(spec.a < spec.b) {
        return Err(CliError::Config(format!("keys `problem.a`, `problem.b`: need a < b, got {} >= {}", spec.a, spec.b)));
    }
    if !(spec.lambda > 0.0) {
        return Err(CliError::Config(format!("key `problem.lambda`: must be positive, got {}", spec.lambda)));
    }
    spec.validate().map_err(|e| CliError::Config(format!("key `problem`: {e}")))?;
    let outer: OuterOptions = with_defaults("outer", raw.outer)?;
    outer.validate().map_err(|e| CliError::Config(format!("key `outer`: {e}")))?;

    let needs = |present: bool, key: &str| {
        if present {
            Ok(())
        } else {
            Err(CliError::Config(format!("missing key `{key}` for command `{}`", command.name())))
        }
    };
    match command {
        Command::Solve | Command::GrowthCheck => needs(raw.discretization.is_some(), "discretization")?,
        Command::Sweep => {
            needs(raw.discretization.is_some(), "discretization")?;
            needs(raw.sweep.is_some(), "sweep")?;
        }
        Command::Eoc => needs(raw.study.is_some(), "study")?,
    }

    let mut cfg = RunConfig {
        command,
        spec,
        discretization: raw.discretization,
        outer,
        inner: with_defaults("inner", raw.inner)?,
        study: raw.study,
        sweep: raw.sweep,
        output_path: raw.output_path,
        seed: raw.seed.unwrap_or(0),
        samples: raw.samples.unwrap_or(50),
        initial_constraint: None,
    };
    // the initial state must lie outside the target ball
    let gate_disc = match (&cfg.discretization, &cfg.study) {
        (Some(_), _) => Some(cfg.disc()?),
        (None, Some(s)) => Some(Discretization::uniform(s.reference.1, 1)?),
        _ => None,
    };
    if let Some(disc) = gate_disc {
        cfg.initial_constraint = Some(cfg.spec.check_gate(&disc)?);
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = include_str!("../../../configs/example_solve.json");

    #[test]
    fn shipped_example_passes_the_gate() {
        let cfg = parse_config_str(EXAMPLE, Command::Solve).unwrap();
        let h0 = cfg.initial_constraint.unwrap();
        assert!((h0 - (0.5 * 12.15 - 0.005)).abs() < 1e-2);
        assert_eq!(cfg.spec, ProblemSpec::paper_example());
    }

    fn with(patch: &str, value: serde_json::Value) -> String {
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE).unwrap();
        let mut slot = &mut v;
        for key in patch.split('.') {
            slot = &mut slot[key];
        }
        *slot = value;
        v.to_string()
    }

    #[test]
    fn rejected_configs_name_the_key() {
        let cases = [
            (with("problem.a", 3.0.into()), "problem.a"),
            (with("problem.lambda", 0.0.into()), "problem.lambda"),
            (with("problem.extra", 1.0.into()), "extra"),
            (with("problem.y0.name", "nope".into()), "problem.y0"),
            (with("problem.y0.params", serde_json::json!({"k": 1.0})), "problem.y0"),
        ];
        for (text, key) in cases {
            let err = parse_config_str(&text, Command::Solve).unwrap_err();
            assert_eq!(err.code(), "config-error", "{err}");
            assert!(err.to_string().contains(key), "{err} should mention {key}");
        }
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE).unwrap();
        v.as_object_mut().unwrap().remove("discretization");
        let err = parse_config_str(&v.to_string(), Command::Solve).unwrap_err();
        assert!(err.to_string().contains("discretization"));
        let err = parse_config_str(EXAMPLE, Command::Eoc).unwrap_err();
        assert!(err.to_string().contains("command"));
    }

    #[test]
    fn initial_state_inside_ball_is_infeasible() {
        let text = with("problem.y0", serde_json::json!({"name": "zero"}));
        assert_eq!(parse_config_str(&text, Command::Solve).unwrap_err().code(), "infeasible-data");
    }
}
