//! Binary safety compliance of observed driving against the thresholds
//! implied by a parameter set: the required gap `s*(v, dv)`, the safe
//! time headway `T`, and the desired speed `v0`.

use serde::{Deserialize, Serialize};

use crate::models::{desired_gap, ParameterSet};
use crate::stats::{five_number, FiveNumber};
use crate::trajectory::{CfEvent, DerivedSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplianceStep {
    pub compliant: bool,
    pub s_req: f64,
}

pub fn compliance_step(p: &ParameterSet, d: &DerivedSample) -> ComplianceStep {
    let s_req = desired_gap(p, d.v, d.dv);
    ComplianceStep {
        compliant: d.gap >= s_req && d.tg >= p.t && d.v <= p.v0,
        s_req,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceSeries {
    pub sc: Vec<u8>,
    pub s_req: Vec<f64>,
    pub average: f64,
}

/// Per-step compliance over the event's observed samples.
pub fn compliance_series(p: &ParameterSet, event: &CfEvent) -> ComplianceSeries {
    let (sc, s_req): (Vec<u8>, Vec<f64>) = event
        .derived
        .iter()
        .map(|d| {
            let step = compliance_step(p, d);
            (u8::from(step.compliant), step.s_req)
        })
        .unzip();
    let average = mean_compliance(&sc);
    ComplianceSeries { sc, s_req, average }
}

pub fn mean_compliance(sc: &[u8]) -> f64 {
    if sc.is_empty() {
        return 0.0;
    }
    sc.iter().map(|&c| f64::from(c)).sum::<f64>() / sc.len() as f64
}

pub fn compliance_summary(values: &[f64]) -> Option<FiveNumber> {
    five_number(values)
}
