//! Calibration of the Intelligent Driver Model (IDM) and IDM+ against
//! leader/follower trajectories, with a safety-spacing objective and a
//! binary safety-compliance metric.

pub mod calibration;
pub mod compliance;
pub mod models;
pub mod objectives;
pub mod optimizer;
pub mod sim;
pub mod stats;
pub mod synth;
pub mod trajectory;

pub use models::{ModelKind, ParameterSet};
