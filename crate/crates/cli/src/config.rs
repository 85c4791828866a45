//! Run configuration: a strict JSON document plus dotted-path overrides.

use std::path::{Path, PathBuf};

use fraplace_core::{
    assemble_kernel, build_grid, EigenOptions, Grid, Kernel, Reaction, ReactionKind, SolveOptions,
    SpatialWeight,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv, Format::Svg],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainConfig,
    pub s: f64,
    pub p: f64,
    pub reaction: ReactionKind,
    /// Spatial factor multiplying the reaction; constant 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction_weight: Option<SpatialWeight>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Grid, kernel and reaction built from a validated config.
pub struct Problem {
    pub grid: Grid,
    pub kernel: Kernel,
    pub reaction: Reaction,
}

impl Config {
    /// Reads `path`, applies `overrides` (`dotted.path`, raw value) in order,
    /// and validates the result.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        Config::from_str_with(&text, overrides)
    }

    pub fn from_str_with(text: &str, overrides: &[(String, String)]) -> Result<Config, CliError> {
        let mut doc: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("config is not valid JSON: {e}")))?;
        for (key, raw) in overrides {
            apply_override(&mut doc, key, raw)?;
        }
        let cfg: Config = serde_json::from_value(doc)
            .map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            seed: self.seed,
            ..self.solver
        }
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            seed: self.seed,
            ..self.eigen
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.domain;
        if !(d.lo.is_finite() && d.hi.is_finite() && d.lo < d.hi) {
            return Err(CliError::field(
                "domain.lo",
                format!("need finite lo < hi, got [{}, {}]", d.lo, d.hi),
            ));
        }
        if d.n < 2 {
            return Err(CliError::field(
                "domain.n",
                format!("need n >= 2, got {}", d.n),
            ));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(CliError::field(
                "s",
                format!("need 0 < s < 1, got {}", self.s),
            ));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(CliError::field(
                "p",
                format!("need finite p > 1, got {}", self.p),
            ));
        }
        self.solver.validate()?;
        let e = &self.eigen;
        if !(e.tol > 0.0 && e.tol.is_finite()) {
            return Err(CliError::field("eigen.tol", "must be positive"));
        }
        if e.max_iter == 0 {
            return Err(CliError::field("eigen.max_iter", "must be at least 1"));
        }
        if self
            .output
            .formats
            .iter()
            .enumerate()
            .any(|(i, f)| self.output.formats[..i].contains(f))
        {
            return Err(CliError::field("output.formats", "duplicate entry"));
        }
        self.reaction()?;
        Ok(())
    }

    pub fn reaction(&self) -> Result<Reaction, CliError> {
        let weight = self
            .reaction_weight
            .clone()
            .unwrap_or(SpatialWeight::Constant { value: 1.0 });
        Ok(Reaction::with_weight(
            self.reaction.clone(),
            self.p,
            weight,
        )?)
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let grid = build_grid(self.domain.lo, self.domain.hi, self.domain.n)?;
        let kernel = assemble_kernel(&grid, self.s, self.p)?;
        let reaction = self.reaction()?;
        Ok(Problem {
            grid,
            kernel,
            reaction,
        })
    }
}

/// Parses an override value as JSON, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Validation(format!(
            "override key '{key}' is malformed"
        )));
    }
    let mut node = doc;
    for (depth, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Validation(format!(
                "override '{key}': '{}' is not an object",
                parts[..depth].join(".")
            ))
        })?;
        if depth + 1 == parts.len() {
            obj.insert(part.to_string(), parse_value(raw));
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one component")
}
