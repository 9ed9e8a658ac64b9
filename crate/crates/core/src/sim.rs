//! Global-fitting simulation: the follower starts from its first observed
//! position and speed and is then driven purely by the model against the
//! recorded leader.

use crate::models::{desired_gap, KinematicState, ModelKind, ParameterSet};
use crate::trajectory::CfEvent;

/// Constant-acceleration update over one step. A decelerating vehicle
/// stops and stays at rest instead of reversing.
#[inline]
pub fn step_ballistic(v: f64, accel: f64, dt: f64) -> (f64, f64) {
    let v_next = v + accel * dt;
    if v_next >= 0.0 {
        (v_next, v * dt + 0.5 * accel * dt * dt)
    } else {
        (0.0, v * v / (2.0 * accel.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulatedTrajectory {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub x: Vec<f64>,
    pub gap: Vec<f64>,
    pub dv: Vec<f64>,
    pub sstar: Vec<f64>,
    /// Index of the first step with a non-positive gap; nothing is
    /// recorded after it.
    pub collision_step: Option<usize>,
}

impl SimulatedTrajectory {
    pub fn collided(&self) -> bool {
        self.collision_step.is_some()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            x: Vec::with_capacity(n),
            gap: Vec::with_capacity(n),
            dv: Vec::with_capacity(n),
            sstar: Vec::with_capacity(n),
            collision_step: None,
        }
    }
}

pub fn simulate_follower(model: ModelKind, p: &ParameterSet, event: &CfEvent) -> SimulatedTrajectory {
    let n = event.samples.len();
    let mut out = SimulatedTrajectory::with_capacity(n);
    let Some(first) = event.samples.first() else {
        return out;
    };
    let dt = event.dt;
    let mut x = first.x_foll;
    let mut v = first.v_foll;
    // The recorded gap may differ from the position difference by rounding;
    // anchor on it so that step 0 reproduces the observed gap exactly.
    let offset = first.gap - (first.x_lead - first.x_foll - first.lead_length);

    for (i, lead) in event.samples.iter().enumerate() {
        let gap = if i == 0 {
            first.gap
        } else {
            lead.x_lead - x - lead.lead_length + offset
        };
        let dv = v - lead.v_lead;
        out.t.push(lead.t);
        out.v.push(v);
        out.x.push(x);
        out.gap.push(gap);
        out.dv.push(dv);
        out.sstar.push(desired_gap(p, v, dv));
        if gap <= 0.0 {
            out.collision_step = Some(i);
            break;
        }
        if i + 1 == n {
            break;
        }
        let accel = model
            .accel(p, KinematicState::new(v, dv, gap))
            .expect("gap checked positive");
        let (v_next, dx) = step_ballistic(v, accel, dt);
        v = v_next;
        x += dx;
    }
    out
}
