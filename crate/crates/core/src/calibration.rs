//! Per-event and batch calibration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compliance::compliance_series;
use crate::models::{ModelError, ModelKind, ParameterSet};
use crate::objectives::{error_report, evaluate_objective, ErrorReport, ObjectiveError, ObjectiveSpec};
use crate::optimizer::{optimize, Bounds, OptimizerConfig, OptimizerError, StopReason};
use crate::sim::simulate_follower;
use crate::stats::{box_plot, BoxPlot};
use crate::trajectory::CfEvent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("objective: {0}")]
    Objective(#[from] ObjectiveError),
    #[error("optimizer: {0}")]
    Optimizer(#[from] OptimizerError),
    #[error("parameter space: {0}")]
    Space(String),
    #[error("event has {0} samples; at least 2 are needed")]
    TooShort(usize),
    #[error("no events to calibrate")]
    NoEvents,
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceMode {
    Simulator6,
    Drone4,
    Custom,
}

impl SpaceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpaceMode::Simulator6 => "simulator6",
            SpaceMode::Drone4 => "drone4",
            SpaceMode::Custom => "custom",
        }
    }
}

impl fmt::Display for SpaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpaceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simulator6" | "simulator" | "6p" => Ok(SpaceMode::Simulator6),
            "drone4" | "drone" | "4p" => Ok(SpaceMode::Drone4),
            "custom" => Ok(SpaceMode::Custom),
            other => Err(format!(
                "unknown parameter space '{other}' (expected simulator6, drone4 or custom)"
            )),
        }
    }
}

/// Box over the seven IDM parameters. Dimensions whose bounds coincide are
/// held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub mode: SpaceMode,
    pub lower: ParameterSet,
    pub upper: ParameterSet,
}

impl ParameterSpace {
    pub fn simulator6() -> Self {
        Self {
            mode: SpaceMode::Simulator6,
            lower: ParameterSet::new(0.1, 0.1, 20.0, 2.0, 2.0, 0.0, 0.5),
            upper: ParameterSet::new(6.0, 6.0, 40.0, 4.0, 5.0, 0.0, 6.0),
        }
    }

    pub fn drone4() -> Self {
        Self {
            mode: SpaceMode::Drone4,
            lower: ParameterSet::new(0.1, 0.1, 20.0, 4.0, 2.0, 0.0, 0.5),
            upper: ParameterSet::new(6.0, 6.0, 40.0, 4.0, 2.0, 0.0, 6.0),
        }
    }

    pub fn custom(lower: ParameterSet, upper: ParameterSet) -> Result<Self, CalibrationError> {
        let space = Self {
            mode: SpaceMode::Custom,
            lower,
            upper,
        };
        space.validate()?;
        Ok(space)
    }

    /// Built-in space for `simulator6` / `drone4`; `custom` needs bounds.
    pub fn for_mode(mode: SpaceMode) -> Option<Self> {
        match mode {
            SpaceMode::Simulator6 => Some(Self::simulator6()),
            SpaceMode::Drone4 => Some(Self::drone4()),
            SpaceMode::Custom => None,
        }
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |e: ModelError| CalibrationError::Space(e.to_string());
        self.lower.validate().map_err(bad)?;
        self.upper.validate().map_err(bad)?;
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        for (i, name) in ParameterSet::NAMES.iter().enumerate() {
            if lo[i] > hi[i] {
                return Err(CalibrationError::Space(format!(
                    "{name}: lower bound {} exceeds upper bound {}",
                    lo[i], hi[i]
                )));
            }
        }
        if self.free_names().is_empty() {
            return Err(CalibrationError::Space("every parameter is fixed".into()));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<Bounds, CalibrationError> {
        self.validate()?;
        Ok(Bounds::new(self.lower.to_array().to_vec(), self.upper.to_array().to_vec())?)
    }

    pub fn free_names(&self) -> Vec<&'static str> {
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        ParameterSet::NAMES
            .iter()
            .enumerate()
            .filter(|&(i, _)| lo[i] != hi[i])
            .map(|(_, &n)| n)
            .collect()
    }

    pub fn contains(&self, p: &ParameterSet) -> bool {
        let (lo, hi, x) = (self.lower.to_array(), self.upper.to_array(), p.to_array());
        (0..7).all(|i| x[i] >= lo[i] && x[i] <= hi[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub evaluations: usize,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub refinement_improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub event_id: String,
    pub model: ModelKind,
    pub space: SpaceMode,
    pub objective: ObjectiveSpec,
    pub params: ParameterSet,
    pub objective_value: f64,
    pub errors: ErrorReport,
    pub compliance: f64,
    pub diagnostics: Diagnostics,
}

/// Objective value of `p` on `event`. Anything that makes the objective
/// undefined for this candidate scores as a collision.
pub fn objective_at(
    model: ModelKind,
    p: &ParameterSet,
    event: &CfEvent,
    spec: &ObjectiveSpec,
) -> f64 {
    let sim = simulate_follower(model, p, event);
    evaluate_objective(spec, p, event, &sim).unwrap_or(spec.collision_penalty)
}

pub fn calibrate_event(
    event: &CfEvent,
    model: ModelKind,
    space: &ParameterSpace,
    spec: &ObjectiveSpec,
    cfg: &OptimizerConfig,
) -> Result<CalibrationResult, CalibrationError> {
    spec.validate()?;
    cfg.validate()?;
    if event.derived.len() < 2 || event.samples.len() != event.derived.len() {
        return Err(CalibrationError::TooShort(event.derived.len()));
    }
    let bounds = space.bounds()?;

    // Degenerate observed series make every candidate undefined; report
    // them instead of optimizing a constant penalty.
    let center = ParameterSet::from_array(to_array7(&bounds.center()));
    let sim = simulate_follower(model, &center, event);
    if !sim.collided() {
        evaluate_objective(spec, &center, event, &sim)?;
    }

    let f = |x: &[f64]| objective_at(model, &ParameterSet::from_array(to_array7(x)), event, spec);
    let out = optimize(f, &bounds, cfg)?;
    let params = ParameterSet::from_array(to_array7(&out.best_point));

    let sim = simulate_follower(model, &params, event);
    Ok(CalibrationResult {
        event_id: event.id.clone(),
        model,
        space: space.mode,
        objective: *spec,
        params,
        objective_value: out.best_value,
        errors: error_report(&params, event, &sim),
        compliance: compliance_series(&params, event).average,
        diagnostics: Diagnostics {
            evaluations: out.evaluations,
            iterations: out.iterations,
            stop_reason: out.stop_reason,
            refinement_improved: out.refinement_improved,
        },
    })
}

fn to_array7(x: &[f64]) -> [f64; 7] {
    x.try_into().expect("parameter vectors have seven entries")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFailure {
    pub event_id: String,
    pub error: String,
}

/// Box-plot statistics across the successfully calibrated events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub calibrated: usize,
    pub failed: usize,
    /// Keyed by `nrmse_spacing`, `nrmse_speed`, `nrmse_timegap`,
    /// `nrmse_sstar`, `compliance`.
    pub metrics: BTreeMap<String, BoxPlot>,
    /// Keyed by free parameter name.
    pub parameters: BTreeMap<String, BoxPlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutcome {
    /// One entry per input event, in input order.
    pub results: Vec<Result<CalibrationResult, EventFailure>>,
    pub summary: BatchSummary,
}

impl BatchOutcome {
    pub fn successes(&self) -> impl Iterator<Item = &CalibrationResult> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &EventFailure> {
        self.results.iter().filter_map(|r| r.as_ref().err())
    }
}

pub const METRIC_NAMES: [&str; 5] = [
    "nrmse_spacing",
    "nrmse_speed",
    "nrmse_timegap",
    "nrmse_sstar",
    "compliance",
];

pub fn metric_value(r: &CalibrationResult, name: &str) -> Option<f64> {
    match name {
        "nrmse_spacing" => r.errors.nrmse_spacing,
        "nrmse_speed" => r.errors.nrmse_speed,
        "nrmse_timegap" => r.errors.nrmse_timegap,
        "nrmse_sstar" => r.errors.nrmse_sstar,
        "compliance" => Some(r.compliance),
        _ => None,
    }
}

/// Summaries over `results`; parameter statistics cover `parameters`
/// (names from [`ParameterSet::NAMES`]).
pub fn summarize(results: &[&CalibrationResult], parameters: &[&str], failed: usize) -> BatchSummary {
    let mut metrics = BTreeMap::new();
    for name in METRIC_NAMES {
        let values: Vec<f64> = results.iter().filter_map(|r| metric_value(r, name)).collect();
        if let Some(b) = box_plot(&values) {
            metrics.insert(name.to_string(), b);
        }
    }
    let mut params = BTreeMap::new();
    for &name in parameters {
        let Some(idx) = ParameterSet::NAMES.iter().position(|&n| n == name) else {
            continue;
        };
        let values: Vec<f64> = results.iter().map(|r| r.params.to_array()[idx]).collect();
        if let Some(b) = box_plot(&values) {
            params.insert(name.to_string(), b);
        }
    }
    BatchSummary {
        calibrated: results.len(),
        failed,
        metrics,
        parameters: params,
    }
}

/// Calibrates every event independently on `jobs` worker threads. Results
/// keep input order and do not depend on `jobs`.
pub fn calibrate_batch(
    events: &[CfEvent],
    model: ModelKind,
    space: &ParameterSpace,
    spec: &ObjectiveSpec,
    cfg: &OptimizerConfig,
    jobs: usize,
) -> Result<BatchOutcome, CalibrationError> {
    if events.is_empty() {
        return Err(CalibrationError::NoEvents);
    }
    spec.validate()?;
    cfg.validate()?;
    space.bounds()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CalibrationError::Pool(e.to_string()))?;
    let results: Vec<Result<CalibrationResult, EventFailure>> = pool.install(|| {
        events
            .par_iter()
            .map(|ev| {
                calibrate_event(ev, model, space, spec, cfg).map_err(|e| EventFailure {
                    event_id: ev.id.clone(),
                    error: e.to_string(),
                })
            })
            .collect()
    });
    let ok: Vec<&CalibrationResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failed = results.len() - ok.len();
    let summary = summarize(&ok, &space.free_names(), failed);
    Ok(BatchOutcome { results, summary })
}
