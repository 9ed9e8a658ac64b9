//! Leader/follower trajectories, derived kinematics and car-following
//! event extraction.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelKind, ParameterSet};

/// Follower speed below which the time gap is taken as +inf.
pub const DEFAULT_V_EPS: f64 = 0.1;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("row {row}: non-numeric value '{value}' in column '{column}'")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: time {t} does not increase (previous {prev})")]
    NonMonotonicTime { row: usize, t: f64, prev: f64 },
    #[error("row {row}: irregular sample interval {interval} s (nominal {dt} s)")]
    IrregularSampling { row: usize, interval: f64, dt: f64 },
    #[error("row {row}: {what} must be non-negative, got {value}")]
    Negative {
        row: usize,
        what: &'static str,
        value: f64,
    },
    #[error("trajectory needs at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("initial gap {0} m is not positive")]
    NonPositiveInitialGap(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One raw measurement record. `gap` is kept separately from the
/// positions so that a gap read from file survives untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x_lead: f64,
    pub v_lead: f64,
    pub x_foll: f64,
    pub v_foll: f64,
    pub lead_length: f64,
    pub gap: f64,
}

impl TrajectorySample {
    /// Builds a sample whose gap follows from the positions.
    pub fn from_positions(
        t: f64,
        x_lead: f64,
        v_lead: f64,
        x_foll: f64,
        v_foll: f64,
        lead_length: f64,
    ) -> Self {
        Self {
            t,
            x_lead,
            v_lead,
            x_foll,
            v_foll,
            lead_length,
            gap: x_lead - x_foll - lead_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    dt: f64,
}

impl Trajectory {
    /// Validates ordering, uniform sampling and sign constraints. The
    /// nominal interval is the median of the observed intervals.
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self, TrajectoryError> {
        if samples.len() < 2 {
            return Err(TrajectoryError::TooShort {
                needed: 2,
                got: samples.len(),
            });
        }
        for (i, s) in samples.iter().enumerate() {
            let row = i + 1;
            for (what, value) in [
                ("leader speed", s.v_lead),
                ("follower speed", s.v_foll),
                ("leader length", s.lead_length),
            ] {
                if value < 0.0 {
                    return Err(TrajectoryError::Negative { row, what, value });
                }
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(TrajectoryError::NonMonotonicTime {
                    row,
                    t: s.t,
                    prev: samples[i - 1].t,
                });
            }
        }
        let mut intervals: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        intervals.sort_by(f64::total_cmp);
        let dt = intervals[intervals.len() / 2];
        for (i, w) in samples.windows(2).enumerate() {
            let interval = w[1].t - w[0].t;
            if (interval - dt).abs() >= 0.1 * dt {
                return Err(TrajectoryError::IrregularSampling {
                    row: i + 2,
                    interval,
                    dt,
                });
            }
        }
        Ok(Self { samples, dt })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }
}

/// Maps canonical column roles onto header names in an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSchema {
    pub time: String,
    pub lead_pos: String,
    pub lead_speed: String,
    pub foll_pos: String,
    pub foll_speed: String,
    pub lead_length: String,
    pub gap: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            time: "time_s".into(),
            lead_pos: "lead_pos_m".into(),
            lead_speed: "lead_speed_mps".into(),
            foll_pos: "foll_pos_m".into(),
            foll_speed: "foll_speed_mps".into(),
            lead_length: "lead_length_m".into(),
            gap: "gap_m".into(),
        }
    }
}

pub fn parse_trajectory_csv(
    path: impl AsRef<Path>,
    schema: &ColumnSchema,
) -> Result<Trajectory, TrajectoryError> {
    let file = std::fs::File::open(path)?;
    read_trajectory_csv(file, schema)
}

/// Reads a trajectory from CSV. When a gap column is present it is taken
/// verbatim; positions missing from such a file are synthesized by
/// integrating the follower speed from zero (trapezoidal rule) and
/// placing the leader `gap` ahead with zero length.
pub fn read_trajectory_csv<R: Read>(
    reader: R,
    schema: &ColumnSchema,
) -> Result<Trajectory, TrajectoryError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &str| index.get(name).copied();
    let require = |name: &str| find(name).ok_or_else(|| TrajectoryError::MissingColumn(name.into()));

    let time = require(&schema.time)?;
    let lead_speed = require(&schema.lead_speed)?;
    let foll_speed = require(&schema.foll_speed)?;
    let gap_col = find(&schema.gap);
    let positions = match (
        find(&schema.lead_pos),
        find(&schema.foll_pos),
        find(&schema.lead_length),
    ) {
        (Some(l), Some(f), Some(len)) => Some((l, f, len)),
        _ if gap_col.is_some() => None,
        (l, f, _) => {
            let missing = if l.is_none() {
                &schema.lead_pos
            } else if f.is_none() {
                &schema.foll_pos
            } else {
                &schema.lead_length
            };
            return Err(TrajectoryError::MissingColumn(missing.clone()));
        }
    };

    let mut samples = Vec::new();
    let mut prev: Option<(f64, f64, f64)> = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // Data rows are numbered from 1, excluding the header.
        let row = i + 1;
        let cell = |col: usize| -> Result<f64, TrajectoryError> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| TrajectoryError::NonNumeric {
                    row,
                    column: headers.get(col).unwrap_or("?").to_string(),
                    value: raw.to_string(),
                })
        };
        let t = cell(time)?;
        let v_lead = cell(lead_speed)?;
        let v_foll = cell(foll_speed)?;
        if let Some((_, prev_t, _)) = prev {
            if t <= prev_t {
                return Err(TrajectoryError::NonMonotonicTime {
                    row,
                    t,
                    prev: prev_t,
                });
            }
        }
        let sample = match positions {
            Some((l, f, len)) => {
                let mut s =
                    TrajectorySample::from_positions(t, cell(l)?, v_lead, cell(f)?, v_foll, cell(len)?);
                if let Some(g) = gap_col {
                    s.gap = cell(g)?;
                }
                s
            }
            None => {
                let gap = cell(gap_col.expect("gap column checked above"))?;
                let x_foll = match prev {
                    None => 0.0,
                    Some((px, pt, pv)) => px + 0.5 * (pv + v_foll) * (t - pt),
                };
                TrajectorySample {
                    t,
                    x_lead: x_foll + gap,
                    v_lead,
                    x_foll,
                    v_foll,
                    lead_length: 0.0,
                    gap,
                }
            }
        };
        prev = Some((sample.x_foll, t, v_foll));
        samples.push(sample);
    }
    Trajectory::new(samples)
}

/// Writes samples with the canonical column names, including `gap_m`.
/// Values use the shortest round-trip float formatting.
pub fn write_trajectory_csv<W: Write>(
    writer: W,
    samples: &[TrajectorySample],
) -> Result<(), TrajectoryError> {
    let schema = ColumnSchema::default();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        &schema.time,
        &schema.lead_pos,
        &schema.lead_speed,
        &schema.foll_pos,
        &schema.foll_speed,
        &schema.lead_length,
        &schema.gap,
    ])?;
    for s in samples {
        wtr.write_record(
            [s.t, s.x_lead, s.v_lead, s.x_foll, s.v_foll, s.lead_length, s.gap]
                .iter()
                .map(|v| v.to_string()),
        )?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedSample {
    pub t: f64,
    pub v: f64,
    pub dv: f64,
    pub gap: f64,
    /// Time gap, s. `+inf` below the standstill threshold.
    pub tg: f64,
}

pub fn derive_sample(s: &TrajectorySample, v_eps: f64) -> DerivedSample {
    let tg = if s.v_foll >= v_eps {
        s.gap / s.v_foll
    } else {
        f64::INFINITY
    };
    DerivedSample {
        t: s.t,
        v: s.v_foll,
        dv: s.v_foll - s.v_lead,
        gap: s.gap,
        tg,
    }
}

pub fn derive_kinematics(traj: &Trajectory, v_eps: f64) -> Vec<DerivedSample> {
    traj.samples().iter().map(|s| derive_sample(s, v_eps)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Drone,
    Simulator,
    Synthetic,
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "drone" => Ok(Source::Drone),
            "simulator" => Ok(Source::Simulator),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(format!("unknown source '{other}'")),
        }
    }
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Source::Drone => "drone",
            Source::Simulator => "simulator",
            Source::Synthetic => "synthetic",
        })
    }
}

/// Time-gap band and minimum duration used to select car-following events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionCriteria {
    pub tg_min: f64,
    pub tg_max: f64,
    pub min_duration: f64,
    pub v_eps: f64,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        Self::drone()
    }
}

impl SelectionCriteria {
    pub fn drone() -> Self {
        Self {
            tg_min: 0.25,
            tg_max: 3.0,
            min_duration: 20.0,
            v_eps: DEFAULT_V_EPS,
        }
    }

    /// Simulator events only bound the time gap from above.
    pub fn simulator() -> Self {
        Self {
            tg_min: 0.0,
            ..Self::drone()
        }
    }

    pub fn for_source(source: Source) -> Self {
        match source {
            Source::Simulator => Self::simulator(),
            Source::Drone | Source::Synthetic => Self::drone(),
        }
    }

    fn admits(&self, d: &DerivedSample) -> bool {
        d.gap > 0.0 && d.tg >= self.tg_min && d.tg <= self.tg_max
    }
}

/// Ground truth attached to synthetic events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub model: ModelKind,
    pub params: ParameterSet,
}

/// A contiguous car-following segment ready for calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CfEvent {
    pub id: String,
    pub source: Source,
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
    pub derived: Vec<DerivedSample>,
    pub truth: Option<GroundTruth>,
}

impl CfEvent {
    /// Wraps a whole trajectory as a single event without re-applying the
    /// selection band. The first gap must be positive.
    pub fn from_trajectory(
        id: impl Into<String>,
        source: Source,
        traj: &Trajectory,
        v_eps: f64,
    ) -> Result<Self, TrajectoryError> {
        let first_gap = traj.samples()[0].gap;
        if first_gap <= 0.0 {
            return Err(TrajectoryError::NonPositiveInitialGap(first_gap));
        }
        Ok(Self {
            id: id.into(),
            source,
            dt: traj.dt(),
            samples: traj.samples().to_vec(),
            derived: derive_kinematics(traj, v_eps),
            truth: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Rebuilds the event as a validated trajectory.
    pub fn trajectory(&self) -> Result<Trajectory, TrajectoryError> {
        Trajectory::new(self.samples.clone())
    }
}

/// Maximal runs of in-band samples lasting at least `min_duration`.
/// Event ids are `{prefix}-{k}` with `k` counting kept events from zero.
pub fn extract_cf_events(
    traj: &Trajectory,
    criteria: &SelectionCriteria,
    source: Source,
    prefix: &str,
) -> Vec<CfEvent> {
    let derived = derive_kinematics(traj, criteria.v_eps);
    let samples = traj.samples();
    let mut events = Vec::new();
    let mut i = 0;
    while i < derived.len() {
        if !criteria.admits(&derived[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < derived.len() && criteria.admits(&derived[i]) {
            i += 1;
        }
        let end = i;
        let duration = derived[end - 1].t - derived[start].t;
        if end - start >= 2 && duration >= criteria.min_duration {
            events.push(CfEvent {
                id: format!("{prefix}-{}", events.len()),
                source,
                dt: traj.dt(),
                samples: samples[start..end].to_vec(),
                derived: derived[start..end].to_vec(),
                truth: None,
            });
        }
    }
    events
}
