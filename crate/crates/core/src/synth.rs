//! Synthetic car-following events: scripted leaders followed by a
//! ground-truth model driver, with optional measurement noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{equilibrium_gap, ModelKind, ParameterSet};
use crate::sim::simulate_follower;
use crate::trajectory::{
    derive_kinematics, CfEvent, GroundTruth, Source, Trajectory, TrajectorySample, DEFAULT_V_EPS,
};

/// Leader vehicle length used for all synthetic events, m.
pub const LEADER_LENGTH: f64 = 4.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("leader speed would become negative at t = {t:.3} s")]
    NegativeSpeed { t: f64 },
    #[error("script lasts {script} s, shorter than requested {total} s")]
    ScriptTooShort { script: f64, total: f64 },
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("invalid noise: {0}")]
    InvalidNoise(String),
    #[error("initial gap must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("ground-truth follower collided at step {step}")]
    Collision { step: usize },
    #[error("trajectory: {0}")]
    Trajectory(String),
}

/// One constant-acceleration leg of a leader script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub accel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderScript {
    pub initial_speed: f64,
    pub initial_position: f64,
    pub segments: Vec<Segment>,
}

impl LeaderScript {
    pub fn new(initial_speed: f64, segments: Vec<Segment>) -> Self {
        Self {
            initial_speed,
            initial_position: 0.0,
            segments,
        }
    }

    pub fn constant(speed: f64, duration: f64) -> Self {
        Self::new(
            speed,
            vec![Segment {
                duration,
                accel: 0.0,
            }],
        )
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.initial_speed >= 0.0 && self.initial_speed.is_finite()) {
            return Err(SynthError::InvalidScript(format!(
                "initial speed {} must be non-negative",
                self.initial_speed
            )));
        }
        if let Some(seg) = self.segments.iter().find(|s| !(s.duration > 0.0)) {
            return Err(SynthError::InvalidScript(format!(
                "segment duration {} must be positive",
                seg.duration
            )));
        }
        Ok(())
    }
}

/// Leader state at one sample instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderSample {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

/// Integrates the script exactly, splitting steps at segment boundaries.
/// Produces `round(total / dt) + 1` samples.
pub fn generate_leader(
    script: &LeaderScript,
    dt: f64,
    total: f64,
) -> Result<Vec<LeaderSample>, SynthError> {
    script.validate()?;
    if !(dt > 0.0) {
        return Err(SynthError::InvalidScript(format!("dt {dt} must be positive")));
    }
    let steps = (total / dt).round() as usize;
    let script_total = script.duration();
    if steps as f64 * dt > script_total + 1e-9 * script_total.max(1.0) {
        return Err(SynthError::ScriptTooShort {
            script: script_total,
            total,
        });
    }
    // Absolute segment end times.
    let ends: Vec<f64> = script
        .segments
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.duration;
            Some(*acc)
        })
        .collect();

    let mut out = Vec::with_capacity(steps + 1);
    let (mut x, mut v) = (script.initial_position, script.initial_speed);
    let mut seg = 0;
    out.push(LeaderSample { t: 0.0, x, v });
    for k in 1..=steps {
        let (t0, t1) = ((k - 1) as f64 * dt, k as f64 * dt);
        let mut t = t0;
        while t1 - t > 1e-12 {
            while seg + 1 < ends.len() && ends[seg] <= t + 1e-12 {
                seg += 1;
            }
            let piece_end = ends[seg].min(t1);
            let tau = if piece_end > t { piece_end - t } else { t1 - t };
            let a = script.segments[seg].accel;
            let v_next = v + a * tau;
            if v_next < -1e-9 {
                return Err(SynthError::NegativeSpeed { t: t + tau });
            }
            x += v * tau + 0.5 * a * tau * tau;
            v = v_next.max(0.0);
            t += tau;
        }
        out.push(LeaderSample { t: t1, x, v });
    }
    Ok(out)
}

/// Additive Gaussian measurement noise on recorded positions and speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub position_std: f64,
    pub speed_std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            position_std: 0.0,
            speed_std: 0.0,
            seed: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.position_std == 0.0 && self.speed_std == 0.0
    }
}

/// Simulates `model` with `p_true` behind the scripted leader, starting
/// `init_gap` behind it at the leader's initial speed, then applies noise.
#[allow(clippy::too_many_arguments)]
pub fn generate_event(
    id: impl Into<String>,
    model: ModelKind,
    p_true: &ParameterSet,
    script: &LeaderScript,
    init_gap: f64,
    dt: f64,
    noise: &NoiseSpec,
) -> Result<CfEvent, SynthError> {
    if !(init_gap > 0.0) {
        return Err(SynthError::NonPositiveGap(init_gap));
    }
    if !(noise.position_std >= 0.0 && noise.speed_std >= 0.0) {
        return Err(SynthError::InvalidNoise(format!(
            "standard deviations must be non-negative ({}, {})",
            noise.position_std, noise.speed_std
        )));
    }
    let steps = (script.duration() / dt + 1e-9).floor();
    let leader = generate_leader(script, dt, steps * dt)?;
    let x_foll0 = leader[0].x - LEADER_LENGTH - init_gap;
    let v_foll0 = leader[0].v;
    let mut samples: Vec<TrajectorySample> = leader
        .iter()
        .map(|l| TrajectorySample::from_positions(l.t, l.x, l.v, x_foll0, v_foll0, LEADER_LENGTH))
        .collect();
    samples[0].gap = init_gap;

    let scaffold = CfEvent {
        id: String::new(),
        source: Source::Synthetic,
        dt,
        derived: Vec::new(),
        samples: samples.clone(),
        truth: None,
    };
    let sim = simulate_follower(model, p_true, &scaffold);
    if let Some(step) = sim.collision_step {
        return Err(SynthError::Collision { step });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let pos_noise = Normal::new(0.0, noise.position_std).expect("std checked");
    let speed_noise = Normal::new(0.0, noise.speed_std).expect("std checked");
    for (i, s) in samples.iter_mut().enumerate() {
        let (mut x_lead, mut v_lead) = (s.x_lead, s.v_lead);
        let (mut x_foll, mut v_foll) = (sim.x[i], sim.v[i]);
        if !noise.is_zero() {
            x_lead += pos_noise.sample(&mut rng);
            x_foll += pos_noise.sample(&mut rng);
            v_lead = (v_lead + speed_noise.sample(&mut rng)).max(0.0);
            v_foll = (v_foll + speed_noise.sample(&mut rng)).max(0.0);
        }
        *s = TrajectorySample::from_positions(s.t, x_lead, v_lead, x_foll, v_foll, s.lead_length);
        if i == 0 && noise.is_zero() {
            s.gap = init_gap;
        }
    }
    if samples[0].gap <= 0.0 {
        return Err(SynthError::NonPositiveGap(samples[0].gap));
    }
    let traj = Trajectory::new(samples).map_err(|e| SynthError::Trajectory(e.to_string()))?;
    Ok(CfEvent {
        id: id.into(),
        source: Source::Synthetic,
        dt: traj.dt(),
        derived: derive_kinematics(&traj, DEFAULT_V_EPS),
        samples: traj.samples().to_vec(),
        truth: Some(GroundTruth {
            model,
            params: *p_true,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptKind {
    /// Cruise at constant speed from an off-equilibrium start, then one
    /// mild braking pulse.
    Cruise,
    BrakingPulse,
    StopAndGo,
    /// Leader far ahead and accelerating; the follower drives freely before
    /// it catches up.
    FreePrelude,
}

impl ScriptKind {
    const ALL: [ScriptKind; 4] = [
        ScriptKind::Cruise,
        ScriptKind::BrakingPulse,
        ScriptKind::StopAndGo,
        ScriptKind::FreePrelude,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub count: usize,
    pub seed: u64,
    pub dt: f64,
    pub model: ModelKind,
    pub position_noise_std: f64,
    pub speed_noise_std: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            count: 50,
            seed: 7,
            dt: 0.1,
            model: ModelKind::Idm,
            position_noise_std: 0.0,
            speed_noise_std: 0.0,
        }
    }
}

/// Everything needed to regenerate one benchmark event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub id: String,
    pub kind: ScriptKind,
    pub model: ModelKind,
    pub p_true: ParameterSet,
    pub script: LeaderScript,
    pub init_gap: f64,
    pub dt: f64,
    pub noise: NoiseSpec,
}

impl BenchmarkCase {
    pub fn generate(&self) -> Result<CfEvent, SynthError> {
        generate_event(
            self.id.clone(),
            self.model,
            &self.p_true,
            &self.script,
            self.init_gap,
            self.dt,
            &self.noise,
        )
    }
}

/// Human-like ground truth inside the drone-mode bounds
/// (`delta = 4`, `s0 = 2`, `s1 = 0`).
fn sample_params(rng: &mut impl Rng) -> ParameterSet {
    ParameterSet::new(
        rng.gen_range(0.8..2.0),
        rng.gen_range(1.0..3.0),
        rng.gen_range(26.0..36.0),
        4.0,
        2.0,
        0.0,
        rng.gen_range(0.8..2.0),
    )
}

fn seg(duration: f64, accel: f64) -> Segment {
    Segment { duration, accel }
}

fn sample_script(kind: ScriptKind, p: &ParameterSet, rng: &mut impl Rng) -> (LeaderScript, f64) {
    match kind {
        ScriptKind::Cruise => {
            let v = rng.gen_range(14.0..24.0);
            let factor = if rng.gen_bool(0.5) {
                rng.gen_range(0.55..0.8)
            } else {
                rng.gen_range(1.3..1.8)
            };
            let gap = equilibrium_gap(p, v).expect("cruise speed below v0") * factor;
            let brake = rng.gen_range(1.0..2.0);
            let script = LeaderScript::new(
                v,
                vec![
                    seg(rng.gen_range(20.0..25.0), 0.0),
                    seg(2.0, -brake),
                    seg(rng.gen_range(10.0..14.0), 0.0),
                ],
            );
            (script, gap)
        }
        ScriptKind::BrakingPulse => {
            let v = rng.gen_range(18.0..26.0);
            let gap = equilibrium_gap(p, v).expect("cruise speed below v0") * rng.gen_range(0.9..1.1);
            let decel = rng.gen_range(2.0..4.0);
            let brake_time = rng.gen_range(2.0..3.5);
            let accel = rng.gen_range(0.8..1.5);
            let recover = decel * brake_time / accel;
            let script = LeaderScript::new(
                v,
                vec![
                    seg(rng.gen_range(6.0..9.0), 0.0),
                    seg(brake_time, -decel),
                    seg(rng.gen_range(4.0..7.0), 0.0),
                    seg(recover, accel),
                    seg(rng.gen_range(10.0..14.0), 0.0),
                ],
            );
            (script, gap)
        }
        ScriptKind::StopAndGo => {
            let v = rng.gen_range(14.0..20.0);
            let gap = equilibrium_gap(p, v).expect("cruise speed below v0") * rng.gen_range(0.9..1.1);
            let mut segments = vec![seg(rng.gen_range(4.0..6.0), 0.0)];
            // Two slow-down / speed-up cycles dipping to a crawl.
            for _ in 0..2 {
                let low = rng.gen_range(2.0..6.0);
                let decel = rng.gen_range(1.5..3.0);
                let accel = rng.gen_range(1.0..2.0);
                segments.push(seg((v - low) / decel, -decel));
                segments.push(seg(rng.gen_range(2.0..4.0), 0.0));
                segments.push(seg((v - low) / accel, accel));
                segments.push(seg(rng.gen_range(3.0..5.0), 0.0));
            }
            (LeaderScript::new(v, segments), gap)
        }
        ScriptKind::FreePrelude => {
            let v = rng.gen_range(10.0..14.0);
            let v_cruise = rng.gen_range(20.0..(p.v0 - 4.0));
            let accel = rng.gen_range(1.0..1.6);
            let gap = rng.gen_range(70.0..110.0);
            let decel = rng.gen_range(2.0..3.5);
            let brake_time = rng.gen_range(2.0..3.0);
            let script = LeaderScript::new(
                v,
                vec![
                    seg((v_cruise - v) / accel, accel),
                    seg(rng.gen_range(12.0..18.0), 0.0),
                    seg(brake_time, -decel),
                    seg(rng.gen_range(8.0..12.0), 0.0),
                ],
            );
            (script, gap)
        }
    }
}

/// Seeded benchmark suite. Kinds rotate through constant cruising,
/// braking pulses, stop-and-go and free-driving preludes. Draws that lead
/// to a ground-truth collision are redrawn.
pub fn benchmark_cases(spec: &BenchmarkSpec) -> Result<Vec<BenchmarkCase>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cases = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let kind = ScriptKind::ALL[i % ScriptKind::ALL.len()];
        let mut attempts = 0;
        loop {
            let p_true = sample_params(&mut rng);
            let (script, init_gap) = sample_script(kind, &p_true, &mut rng);
            let case = BenchmarkCase {
                id: format!("syn-{i:03}"),
                kind,
                model: spec.model,
                p_true,
                script,
                init_gap,
                dt: spec.dt,
                noise: NoiseSpec {
                    position_std: spec.position_noise_std,
                    speed_std: spec.speed_noise_std,
                    seed: rng.gen(),
                },
            };
            match case.generate() {
                Ok(_) => {
                    cases.push(case);
                    break;
                }
                Err(SynthError::Collision { .. } | SynthError::NonPositiveGap(_)) if attempts < 20 => {
                    attempts += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(cases)
}

/// Generates the benchmark events in case order.
pub fn benchmark_events(spec: &BenchmarkSpec) -> Result<Vec<CfEvent>, SynthError> {
    benchmark_cases(spec)?.iter().map(BenchmarkCase::generate).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn truth() -> ParameterSet {
        ParameterSet::new(1.5, 2.0, 30.0, 4.0, 2.0, 0.0, 1.5)
    }

    #[test]
    fn constant_leader() {
        let leader = generate_leader(&LeaderScript::constant(20.0, 30.0), 0.1, 30.0).unwrap();
        assert_eq!(leader.len(), 301);
        assert_abs_diff_eq!(leader[300].x - leader[0].x, 600.0, epsilon = 1e-9);
    }

    #[test]
    fn braking_leader_final_speed() {
        let script = LeaderScript::new(20.0, vec![seg(5.0, -2.0)]);
        let leader = generate_leader(&script, 0.1, 5.0).unwrap();
        assert_abs_diff_eq!(leader.last().unwrap().v, 10.0, epsilon = 1e-9);
        // 20 * 5 - 0.5 * 2 * 25
        assert_abs_diff_eq!(leader.last().unwrap().x, 75.0, epsilon = 1e-9);
    }

    #[test]
    fn misaligned_segments_integrate_exactly() {
        let script = LeaderScript::new(10.0, vec![seg(0.25, 2.0), seg(0.35, -1.0)]);
        let leader = generate_leader(&script, 0.1, 0.6).unwrap();
        let last = leader.last().unwrap();
        assert_abs_diff_eq!(last.v, 10.0 + 0.5 - 0.35, epsilon = 1e-12);
        let x1 = 10.0 * 0.25 + 0.5 * 2.0 * 0.0625;
        let x2 = 10.5 * 0.35 - 0.5 * 0.35 * 0.35;
        assert_abs_diff_eq!(last.x, x1 + x2, epsilon = 1e-12);
    }

    #[test]
    fn rejects_negative_speed_and_short_script() {
        let script = LeaderScript::new(5.0, vec![seg(5.0, -2.0)]);
        assert!(matches!(
            generate_leader(&script, 0.1, 5.0),
            Err(SynthError::NegativeSpeed { .. })
        ));
        assert!(matches!(
            generate_leader(&LeaderScript::constant(5.0, 2.0), 0.1, 3.0),
            Err(SynthError::ScriptTooShort { .. })
        ));
    }

    #[test]
    fn equilibrium_event_keeps_constant_gap() {
        let p = truth();
        let gap = equilibrium_gap(&p, 20.0).unwrap();
        let ev = generate_event(
            "eq",
            ModelKind::Idm,
            &p,
            &LeaderScript::constant(20.0, 30.0),
            gap,
            0.1,
            &NoiseSpec::none(),
        )
        .unwrap();
        assert_eq!(ev.truth.unwrap().params, p);
        for d in &ev.derived {
            assert!((d.gap - gap).abs() <= 1e-3);
        }
    }

    #[test]
    fn braking_pulse_dips_and_recovers() {
        // Leader brakes at -3 m/s² for 3 s and then regains its speed.
        let p = ParameterSet::new(1.5, 2.0, 30.0, 4.0, 2.0, 0.0, 1.5);
        let gap0 = equilibrium_gap(&p, 20.0).unwrap();
        let script = LeaderScript::new(
            20.0,
            vec![seg(5.0, 0.0), seg(3.0, -3.0), seg(9.0, 1.0), seg(30.0, 0.0)],
        );
        let ev = generate_event("pulse", ModelKind::Idm, &p, &script, gap0, 0.1, &NoiseSpec::none())
            .unwrap();
        let gaps: Vec<f64> = ev.derived.iter().map(|d| d.gap).collect();
        let (k_min, &min_gap) = gaps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(min_gap < gap0 - 1.0, "min gap {min_gap} vs {gap0}");
        assert!(min_gap > 0.0);
        assert!(gaps[k_min..].iter().any(|&g| g > gap0), "no recovery above {gap0}");
    }

    #[test]
    fn noise_is_seeded() {
        let p = truth();
        let noise = NoiseSpec {
            position_std: 0.5,
            speed_std: 0.1,
            seed: 42,
        };
        let script = LeaderScript::constant(20.0, 10.0);
        let a = generate_event("n", ModelKind::Idm, &p, &script, 40.0, 0.1, &noise).unwrap();
        let b = generate_event("n", ModelKind::Idm, &p, &script, 40.0, 0.1, &noise).unwrap();
        assert_eq!(a, b);
        let c = generate_event(
            "n",
            ModelKind::Idm,
            &p,
            &script,
            40.0,
            0.1,
            &NoiseSpec { seed: 43, ..noise },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn benchmark_is_deterministic_and_complete() {
        let spec = BenchmarkSpec::default();
        let a = benchmark_cases(&spec).unwrap();
        let b = benchmark_cases(&spec).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
        let other = benchmark_cases(&BenchmarkSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, other);
        for case in &a {
            let ev = case.generate().unwrap();
            assert!(ev.duration() >= 20.0, "{} lasts {}", case.id, ev.duration());
            assert!(ev.derived.iter().all(|d| d.gap > 0.0));
        }
    }
}
