//! Intelligent Driver Model (IDM) and IDM+ acceleration functions.
//!
//! All functions here are pure. The approaching rate is always
//! `dv = v_follower - v_leader`, positive when the follower is closing in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-positive gap {gap} m: vehicles collided")]
    Collision { gap: f64 },
    #[error("no equilibrium: speed {v} m/s is not below desired speed {v0} m/s")]
    NoEquilibrium { v: f64, v0: f64 },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// The seven IDM parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    /// Maximum acceleration, m/s².
    pub a: f64,
    /// Desired (comfortable) deceleration, m/s².
    pub b: f64,
    /// Desired speed, m/s.
    pub v0: f64,
    /// Acceleration exponent.
    pub delta: f64,
    /// Jam distance, m.
    pub s0: f64,
    /// Second jam distance, m.
    pub s1: f64,
    /// Safe time headway, s.
    #[serde(rename = "T")]
    pub t: f64,
}

impl ParameterSet {
    /// Names in vector order, as used by parameter boxes and result files.
    pub const NAMES: [&'static str; 7] = ["a", "b", "v0", "delta", "s0", "s1", "T"];

    pub fn new(a: f64, b: f64, v0: f64, delta: f64, s0: f64, s1: f64, t: f64) -> Self {
        Self {
            a,
            b,
            v0,
            delta,
            s0,
            s1,
            t,
        }
    }

    pub fn from_array(x: [f64; 7]) -> Self {
        Self::new(x[0], x[1], x[2], x[3], x[4], x[5], x[6])
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.a, self.b, self.v0, self.delta, self.s0, self.s1, self.t]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |name, value: f64, ok: bool, reason| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason,
                })
            }
        };
        check("a", self.a, self.a > 0.0, "must be > 0")?;
        check("b", self.b, self.b > 0.0, "must be > 0")?;
        check("v0", self.v0, self.v0 > 0.0, "must be > 0")?;
        check("delta", self.delta, self.delta >= 1.0, "must be >= 1")?;
        check("s0", self.s0, self.s0 >= 0.0, "must be >= 0")?;
        check("s1", self.s1, self.s1 >= 0.0, "must be >= 0")?;
        check("T", self.t, self.t > 0.0, "must be > 0")?;
        Ok(())
    }
}

/// Follower state as seen by the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    /// Follower speed, m/s.
    pub v: f64,
    /// Approaching rate (follower minus leader speed), m/s.
    pub dv: f64,
    /// Net distance gap, m.
    pub s: f64,
}

impl KinematicState {
    pub fn new(v: f64, dv: f64, s: f64) -> Self {
        Self { v, dv, s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "idm")]
    Idm,
    #[serde(rename = "idm+")]
    IdmPlus,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Idm => "idm",
            ModelKind::IdmPlus => "idm+",
        }
    }

    pub fn accel(&self, p: &ParameterSet, state: KinematicState) -> Result<f64, ModelError> {
        match self {
            ModelKind::Idm => idm_accel(p, state),
            ModelKind::IdmPlus => idm_plus_accel(p, state),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "idm" => Ok(ModelKind::Idm),
            "idm+" | "idmplus" | "idm_plus" => Ok(ModelKind::IdmPlus),
            other => Err(format!("unknown model '{other}' (expected idm or idm+)")),
        }
    }
}

/// Desired dynamic gap `s*(v, dv)`. Not clamped: strongly negative `dv`
/// can push it below `s0` or below zero.
#[inline]
pub fn desired_gap(p: &ParameterSet, v: f64, dv: f64) -> f64 {
    p.s0 + p.s1 * (v / p.v0).sqrt() + p.t * v + v * dv / (2.0 * (p.a * p.b).sqrt())
}

/// Free-road term `1 - (v/v0)^delta`.
#[inline]
fn free_term(p: &ParameterSet, v: f64) -> f64 {
    1.0 - speed_ratio_pow(v / p.v0, p.delta)
}

#[inline]
fn speed_ratio_pow(ratio: f64, delta: f64) -> f64 {
    if delta == 4.0 {
        let r2 = ratio * ratio;
        r2 * r2
    } else {
        ratio.powf(delta)
    }
}

/// Interaction term `1 - (s*/s)^2`.
#[inline]
fn interaction_term(p: &ParameterSet, state: &KinematicState) -> Result<f64, ModelError> {
    if state.s <= 0.0 || state.s.is_nan() {
        return Err(ModelError::Collision { gap: state.s });
    }
    let ratio = desired_gap(p, state.v, state.dv) / state.s;
    Ok(1.0 - ratio * ratio)
}

/// IDM acceleration `a [1 - (v/v0)^delta - (s*/s)^2]`.
pub fn idm_accel(p: &ParameterSet, state: KinematicState) -> Result<f64, ModelError> {
    let interaction = interaction_term(p, &state)?;
    Ok(p.a * (free_term(p, state.v) + interaction - 1.0))
}

/// IDM+ acceleration `a min[1 - (v/v0)^delta, 1 - (s*/s)^2]`.
pub fn idm_plus_accel(p: &ParameterSet, state: KinematicState) -> Result<f64, ModelError> {
    let interaction = interaction_term(p, &state)?;
    Ok(p.a * free_term(p, state.v).min(interaction))
}

/// Steady-state gap of the IDM at speed `v` with zero approaching rate.
pub fn equilibrium_gap(p: &ParameterSet, v: f64) -> Result<f64, ModelError> {
    if !(0.0..p.v0).contains(&v) {
        return Err(ModelError::NoEquilibrium { v, v0: p.v0 });
    }
    Ok(desired_gap(p, v, 0.0) / free_term(p, v).sqrt())
}
