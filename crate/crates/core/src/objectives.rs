//! NRMSE measures of performance, the safety-spacing objective and their
//! weighted combination.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{desired_gap, ParameterSet};
use crate::sim::SimulatedTrajectory;
use crate::trajectory::{CfEvent, DEFAULT_V_EPS};

pub const DEFAULT_COLLISION_PENALTY: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("observed series has zero energy; NRMSE undefined")]
    UndefinedDenominator,
    #[error("series lengths differ: observed {obs}, simulated {sim}")]
    LengthMismatch { obs: usize, sim: usize },
    #[error("empty series")]
    Empty,
    #[error("invalid objective: {0}")]
    InvalidSpec(String),
}

/// Measure of performance compared by the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mop {
    Spacing,
    Speed,
    Timegap,
    /// `alpha * NRMSE(spacing) + beta * NRMSE(desired gap)`.
    Combined,
}

impl Mop {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mop::Spacing => "spacing",
            Mop::Speed => "speed",
            Mop::Timegap => "timegap",
            Mop::Combined => "combined",
        }
    }
}

impl std::fmt::Display for Mop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mop {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spacing" => Ok(Mop::Spacing),
            "speed" => Ok(Mop::Speed),
            "timegap" | "time-gap" | "tg" => Ok(Mop::Timegap),
            "combined" | "combined_safety" | "safety" => Ok(Mop::Combined),
            other => Err(format!(
                "unknown objective '{other}' (expected spacing, speed, timegap or combined)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub mop: Mop,
    pub alpha: f64,
    pub beta: f64,
    pub collision_penalty: f64,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self::spacing()
    }
}

impl ObjectiveSpec {
    pub fn spacing() -> Self {
        Self {
            mop: Mop::Spacing,
            alpha: 1.0,
            beta: 1.0,
            collision_penalty: DEFAULT_COLLISION_PENALTY,
        }
    }

    pub fn combined(alpha: f64, beta: f64) -> Self {
        Self {
            mop: Mop::Combined,
            alpha,
            beta,
            ..Self::spacing()
        }
    }

    pub fn with_mop(mop: Mop) -> Self {
        Self {
            mop,
            ..Self::spacing()
        }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(ObjectiveError::InvalidSpec(format!(
                "weights must be non-negative (alpha {}, beta {})",
                self.alpha, self.beta
            )));
        }
        if self.mop == Mop::Combined && self.alpha + self.beta <= 0.0 {
            return Err(ObjectiveError::InvalidSpec(
                "alpha + beta must be positive for the combined objective".into(),
            ));
        }
        if !(self.collision_penalty.is_finite() && self.collision_penalty > 1.0) {
            return Err(ObjectiveError::InvalidSpec(format!(
                "collision penalty {} must be finite and dominate NRMSE values",
                self.collision_penalty
            )));
        }
        Ok(())
    }
}

/// Root-mean-square error normalized by the RMS of the observed series.
pub fn nrmse(obs: &[f64], sim: &[f64]) -> Result<f64, ObjectiveError> {
    if obs.len() != sim.len() {
        return Err(ObjectiveError::LengthMismatch {
            obs: obs.len(),
            sim: sim.len(),
        });
    }
    nrmse_pairs(obs.iter().copied().zip(sim.iter().copied()))
}

fn nrmse_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Result<f64, ObjectiveError> {
    let (mut n, mut err2, mut obs2) = (0usize, 0.0, 0.0);
    for (o, s) in pairs {
        let d = o - s;
        err2 += d * d;
        obs2 += o * o;
        n += 1;
    }
    if n == 0 {
        return Err(ObjectiveError::Empty);
    }
    if obs2 <= 0.0 {
        return Err(ObjectiveError::UndefinedDenominator);
    }
    // The 1/N factors cancel.
    Ok((err2 / obs2).sqrt())
}

pub fn sstar_series(p: &ParameterSet, v: &[f64], dv: &[f64]) -> Vec<f64> {
    debug_assert_eq!(v.len(), dv.len());
    v.iter()
        .zip(dv)
        .map(|(&v, &dv)| desired_gap(p, v, dv))
        .collect()
}

fn nrmse_spacing(event: &CfEvent, sim: &SimulatedTrajectory, n: usize) -> Result<f64, ObjectiveError> {
    nrmse_pairs(event.derived[..n].iter().zip(&sim.gap[..n]).map(|(d, &g)| (d.gap, g)))
}

fn nrmse_speed(event: &CfEvent, sim: &SimulatedTrajectory, n: usize) -> Result<f64, ObjectiveError> {
    nrmse_pairs(event.derived[..n].iter().zip(&sim.v[..n]).map(|(d, &v)| (d.v, v)))
}

/// Time gaps over steps where both observed and simulated speeds reach the
/// standstill threshold.
fn nrmse_timegap(event: &CfEvent, sim: &SimulatedTrajectory, n: usize) -> Result<f64, ObjectiveError> {
    nrmse_pairs(
        event.derived[..n]
            .iter()
            .zip(sim.v[..n].iter().zip(&sim.gap[..n]))
            .filter(|(d, (&v, _))| d.v >= DEFAULT_V_EPS && v >= DEFAULT_V_EPS)
            .map(|(d, (&v, &g))| (d.gap / d.v, g / v)),
    )
}

/// Desired gap under observed kinematics against the desired gap under
/// simulated kinematics, both with the candidate parameters.
fn nrmse_sstar(
    p: &ParameterSet,
    event: &CfEvent,
    sim: &SimulatedTrajectory,
    n: usize,
) -> Result<f64, ObjectiveError> {
    nrmse_pairs(
        event.derived[..n]
            .iter()
            .zip(&sim.sstar[..n])
            .map(|(d, &s)| (desired_gap(p, d.v, d.dv), s)),
    )
}

pub fn evaluate_objective(
    spec: &ObjectiveSpec,
    p: &ParameterSet,
    event: &CfEvent,
    sim: &SimulatedTrajectory,
) -> Result<f64, ObjectiveError> {
    if sim.collided() {
        return Ok(spec.collision_penalty);
    }
    if sim.len() != event.derived.len() {
        return Err(ObjectiveError::LengthMismatch {
            obs: event.derived.len(),
            sim: sim.len(),
        });
    }
    let n = sim.len();
    match spec.mop {
        Mop::Spacing => nrmse_spacing(event, sim, n),
        Mop::Speed => nrmse_speed(event, sim, n),
        Mop::Timegap => nrmse_timegap(event, sim, n),
        Mop::Combined => {
            let spacing = nrmse_spacing(event, sim, n)?;
            if spec.beta == 0.0 {
                return Ok(spec.alpha * spacing);
            }
            Ok(spec.alpha * spacing + spec.beta * nrmse_sstar(p, event, sim, n)?)
        }
    }
}

/// All four NRMSE measures of one simulation. A collided simulation is
/// scored over the steps before the collision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub nrmse_spacing: Option<f64>,
    pub nrmse_speed: Option<f64>,
    pub nrmse_timegap: Option<f64>,
    pub nrmse_sstar: Option<f64>,
    pub collided: bool,
}

pub fn error_report(p: &ParameterSet, event: &CfEvent, sim: &SimulatedTrajectory) -> ErrorReport {
    let n = match sim.collision_step {
        Some(k) => k,
        None => sim.len().min(event.derived.len()),
    };
    ErrorReport {
        nrmse_spacing: nrmse_spacing(event, sim, n).ok(),
        nrmse_speed: nrmse_speed(event, sim, n).ok(),
        nrmse_timegap: nrmse_timegap(event, sim, n).ok(),
        nrmse_sstar: nrmse_sstar(p, event, sim, n).ok(),
        collided: sim.collided(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::sim::simulate_follower;
    use crate::trajectory::{Source, Trajectory, TrajectorySample};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reference() -> ParameterSet {
        ParameterSet::new(1.0, 1.5, 30.0, 4.0, 2.0, 0.0, 1.5)
    }

    /// Event whose follower data are exactly the IDM simulation behind a
    /// braking leader, so the true parameters reproduce it perfectly.
    fn self_consistent_event(p: &ParameterSet) -> CfEvent {
        let dt = 0.1;
        let mut speeds = vec![20.0; 50];
        speeds.extend((0..30).map(|i| 20.0 - 0.2 * i as f64));
        speeds.extend(vec![14.0; 120]);
        let mut x = 40.0;
        let mut samples = Vec::new();
        for (i, &v) in speeds.iter().enumerate() {
            if i > 0 {
                x += 0.5 * (speeds[i - 1] + v) * dt;
            }
            samples.push(TrajectorySample::from_positions(i as f64 * dt, x, v, 0.0, 20.0, 5.0));
        }
        let mut ev = CfEvent::from_trajectory(
            "sc",
            Source::Synthetic,
            &Trajectory::new(samples.clone()).unwrap(),
            DEFAULT_V_EPS,
        )
        .unwrap();
        let sim = simulate_follower(ModelKind::Idm, p, &ev);
        for (s, (&xf, &vf)) in samples.iter_mut().zip(sim.x.iter().zip(&sim.v)) {
            *s = TrajectorySample::from_positions(s.t, s.x_lead, s.v_lead, xf, vf, s.lead_length);
        }
        ev = CfEvent::from_trajectory(
            "sc",
            Source::Synthetic,
            &Trajectory::new(samples).unwrap(),
            DEFAULT_V_EPS,
        )
        .unwrap();
        ev
    }

    #[test]
    fn nrmse_examples() {
        assert_abs_diff_eq!(nrmse(&[10.0, 10.0], &[8.0, 12.0]).unwrap(), 0.2, epsilon = 1e-12);
        assert_eq!(nrmse(&[3.0, -1.0, 7.5], &[3.0, -1.0, 7.5]).unwrap(), 0.0);
        let scaled = nrmse(&[70.0, 70.0], &[56.0, 84.0]).unwrap();
        assert_abs_diff_eq!(scaled, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn nrmse_errors() {
        assert_eq!(nrmse(&[0.0, 0.0], &[1.0, 2.0]), Err(ObjectiveError::UndefinedDenominator));
        assert!(matches!(nrmse(&[1.0], &[1.0, 2.0]), Err(ObjectiveError::LengthMismatch { .. })));
        assert_eq!(nrmse(&[], &[]), Err(ObjectiveError::Empty));
    }

    #[test]
    fn sstar_series_examples() {
        let p = reference();
        assert_eq!(sstar_series(&p, &[20.0], &[0.0]), vec![32.0]);
        assert_eq!(sstar_series(&p, &[0.0, 0.0], &[0.0, 0.0]), vec![p.s0, p.s0]);
    }

    #[test]
    fn perfect_simulation_scores_zero() {
        let p = reference();
        let ev = self_consistent_event(&p);
        let sim = simulate_follower(ModelKind::Idm, &p, &ev);
        let report = error_report(&p, &ev, &sim);
        for v in [
            report.nrmse_spacing,
            report.nrmse_speed,
            report.nrmse_timegap,
            report.nrmse_sstar,
        ] {
            assert!(v.unwrap() <= 1e-6, "{report:?}");
        }
        let spacing = evaluate_objective(&ObjectiveSpec::spacing(), &p, &ev, &sim).unwrap();
        assert!(spacing <= 1e-9);
    }

    #[test]
    fn zero_beta_matches_spacing() {
        let truth = reference();
        let ev = self_consistent_event(&truth);
        let p = ParameterSet { a: 2.0, t: 1.1, ..truth };
        let sim = simulate_follower(ModelKind::Idm, &p, &ev);
        let spacing = evaluate_objective(&ObjectiveSpec::spacing(), &p, &ev, &sim).unwrap();
        let combined = evaluate_objective(&ObjectiveSpec::combined(1.0, 0.0), &p, &ev, &sim).unwrap();
        assert!(spacing > 0.0);
        assert_eq!(spacing, combined);
    }

    #[test]
    fn combined_is_weighted_sum() {
        let truth = reference();
        let ev = self_consistent_event(&truth);
        let p = ParameterSet { b: 3.0, t: 1.2, ..truth };
        let sim = simulate_follower(ModelKind::Idm, &p, &ev);
        let report = error_report(&p, &ev, &sim);
        let (s, ss) = (report.nrmse_spacing.unwrap(), report.nrmse_sstar.unwrap());
        let combined = evaluate_objective(&ObjectiveSpec::combined(1.0, 1.0), &p, &ev, &sim).unwrap();
        assert_abs_diff_eq!(combined, s + ss, epsilon = 1e-12);
        let weighted = evaluate_objective(&ObjectiveSpec::combined(0.3, 2.5), &p, &ev, &sim).unwrap();
        assert_abs_diff_eq!(weighted, 0.3 * s + 2.5 * ss, epsilon = 1e-12);
    }

    #[test]
    fn collided_simulation_gets_penalty_and_prefix_report() {
        let p = reference();
        let ev = self_consistent_event(&p);
        let mut sim = simulate_follower(ModelKind::Idm, &p, &ev);
        sim.collision_step = Some(100);
        sim.gap[100] = -0.5;
        for field in [&mut sim.t, &mut sim.v, &mut sim.x, &mut sim.gap, &mut sim.dv, &mut sim.sstar] {
            field.truncate(101);
        }
        for mop in [Mop::Spacing, Mop::Speed, Mop::Timegap, Mop::Combined] {
            let spec = ObjectiveSpec::with_mop(mop);
            assert_eq!(evaluate_objective(&spec, &p, &ev, &sim).unwrap(), DEFAULT_COLLISION_PENALTY);
        }
        let report = error_report(&p, &ev, &sim);
        assert!(report.collided);
        assert!(report.nrmse_spacing.unwrap() <= 1e-9);
    }

    #[test]
    fn timegap_skips_standstill() {
        let p = reference();
        let ev = self_consistent_event(&p);
        let mut sim = simulate_follower(ModelKind::Idm, &p, &ev);
        sim.v[10] = 0.0;
        let report = error_report(&p, &ev, &sim);
        assert!(report.nrmse_timegap.unwrap() <= 1e-9);
        assert!(report.nrmse_speed.unwrap() > 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(ObjectiveSpec::combined(0.0, 0.0).validate().is_err());
        assert!(ObjectiveSpec::combined(-1.0, 1.0).validate().is_err());
        assert!(ObjectiveSpec::combined(1.0, 1.0).validate().is_ok());
        let spec = ObjectiveSpec { collision_penalty: 0.5, ..ObjectiveSpec::spacing() };
        assert!(spec.validate().is_err());
    }

    proptest! {
        #[test]
        fn nrmse_scale_invariant(
            pairs in proptest::collection::vec((1.0..100.0f64, -100.0..100.0f64), 1..60),
            c in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64],
        ) {
            let (obs, sim): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = nrmse(&obs, &sim).unwrap();
            let obs_c: Vec<f64> = obs.iter().map(|v| v * c).collect();
            let sim_c: Vec<f64> = sim.iter().map(|v| v * c).collect();
            let scaled = nrmse(&obs_c, &sim_c).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-9 * (1.0 + base));
        }

        #[test]
        fn nrmse_zero_iff_equal(
            obs in proptest::collection::vec(0.5..100.0f64, 1..60),
            k in 0usize..60, bump in prop_oneof![Just(0.0), 1e-6..10.0f64],
        ) {
            let mut sim = obs.clone();
            let idx = k % obs.len();
            sim[idx] += bump;
            let value = nrmse(&obs, &sim).unwrap();
            prop_assert_eq!(value == 0.0, bump == 0.0);
        }

        #[test]
        fn combined_monotone_in_beta(beta in 0.0..5.0f64, extra in 0.0..5.0f64, a in 0.5..3.0f64) {
            let truth = reference();
            let ev = self_consistent_event(&truth);
            let p = ParameterSet { a, ..truth };
            let sim = simulate_follower(ModelKind::Idm, &p, &ev);
            let lo = evaluate_objective(&ObjectiveSpec::combined(1.0, beta), &p, &ev, &sim).unwrap();
            let hi = evaluate_objective(&ObjectiveSpec::combined(1.0, beta + extra), &p, &ev, &sim).unwrap();
            prop_assert!(hi >= lo);
        }

        #[test]
        fn collided_always_worse(a in 0.5..3.0f64, t in 0.6..3.0f64) {
            let truth = reference();
            let ev = self_consistent_event(&truth);
            let p = ParameterSet { a, t, ..truth };
            let sim = simulate_follower(ModelKind::Idm, &p, &ev);
            let spec = ObjectiveSpec::combined(1.0, 1.0);
            let clean = evaluate_objective(&spec, &p, &ev, &sim).unwrap();
            let mut crashed = sim.clone();
            crashed.collision_step = Some(5);
            prop_assert!(evaluate_objective(&spec, &p, &ev, &crashed).unwrap() > clean);
        }
    }
}
