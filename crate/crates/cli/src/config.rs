use std::path::Path;

use anyhow::{bail, Context, Result};
use idmcal::calibration::{ParameterSpace, SpaceMode};
use idmcal::objectives::{Mop, ObjectiveSpec, DEFAULT_COLLISION_PENALTY};
use idmcal::optimizer::OptimizerConfig;
use idmcal::synth::BenchmarkSpec;
use idmcal::trajectory::SelectionCriteria;
use idmcal::{ModelKind, ParameterSet};
use serde::{Deserialize, Serialize};

/// Objective section of a config file. Weights are optional so that a
/// weight given for a non-combined objective can be rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveFile {
    pub mop: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub collision_penalty: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub lower: ParameterSet,
    pub upper: ParameterSet,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionFile {
    pub tg_min: Option<f64>,
    pub tg_max: Option<f64>,
    pub min_duration: Option<f64>,
    pub v_eps: Option<f64>,
}

/// On-disk run configuration. Every field is optional; command-line flags
/// take precedence over file values, which take precedence over defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<ModelKind>,
    pub space: Option<String>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub objective: ObjectiveFile,
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub selection: SelectionFile,
    pub bounds: Option<BoundsFile>,
    pub synth: Option<BenchmarkSpec>,
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn load_bounds(path: &Path) -> Result<BoundsFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading bounds {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing bounds {}", path.display()))
}

/// Objective and weight flags as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct ObjectiveFlags {
    pub objective: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

pub fn resolve_objective(file: &ObjectiveFile, flags: &ObjectiveFlags) -> Result<ObjectiveSpec> {
    let mop_name = flags.objective.as_ref().or(file.mop.as_ref());
    let mop: Mop = match mop_name {
        Some(name) => name.parse().map_err(anyhow::Error::msg)?,
        None => Mop::Spacing,
    };
    let alpha = flags.alpha.or(file.alpha);
    let beta = flags.beta.or(file.beta);
    if mop != Mop::Combined && (alpha.is_some() || beta.is_some()) {
        bail!(
            "alpha/beta only apply to the combined objective, but the objective is {}",
            mop.as_str()
        );
    }
    let spec = ObjectiveSpec {
        mop,
        alpha: alpha.unwrap_or(1.0),
        beta: beta.unwrap_or(1.0),
        collision_penalty: file.collision_penalty.unwrap_or(DEFAULT_COLLISION_PENALTY),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn resolve_space(
    mode: Option<&str>,
    bounds: Option<BoundsFile>,
) -> Result<ParameterSpace> {
    let mode: Option<SpaceMode> = mode.map(str::parse).transpose().map_err(anyhow::Error::msg)?;
    match (mode, bounds) {
        (Some(SpaceMode::Custom) | None, Some(b)) => Ok(ParameterSpace::custom(b.lower, b.upper)?),
        (Some(SpaceMode::Custom), None) => bail!("--space custom needs --bounds or a [bounds] table"),
        (Some(m), Some(_)) => bail!("bounds given but the parameter space is {m}; use --space custom"),
        (Some(m), None) => Ok(ParameterSpace::for_mode(m).expect("built-in space")),
        (None, None) => Ok(ParameterSpace::drone4()),
    }
}

/// Selection thresholds for a source, overridden field by field.
pub fn resolve_selection(
    base: SelectionCriteria,
    file: &SelectionFile,
    tg_min: Option<f64>,
    tg_max: Option<f64>,
    min_duration: Option<f64>,
) -> Result<SelectionCriteria> {
    let c = SelectionCriteria {
        tg_min: tg_min.or(file.tg_min).unwrap_or(base.tg_min),
        tg_max: tg_max.or(file.tg_max).unwrap_or(base.tg_max),
        min_duration: min_duration.or(file.min_duration).unwrap_or(base.min_duration),
        v_eps: file.v_eps.unwrap_or(base.v_eps),
    };
    if !(c.tg_min >= 0.0 && c.tg_max > c.tg_min) {
        bail!("time-gap band [{}, {}] is empty or negative", c.tg_min, c.tg_max);
    }
    if !(c.min_duration >= 0.0 && c.v_eps > 0.0) {
        bail!("min duration must be >= 0 and v_eps > 0");
    }
    Ok(c)
}
