//! Planning and simulation scenario definitions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::{QVec, Vec3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    /// Torque optimization over the actuated joints only.
    Toaj,
    /// Torque optimization over actuated and unactuated joints.
    #[default]
    Toauj,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Toaj => "toaj",
            Method::Toauj => "toauj",
        }
    }
}

/// Generalized coordinate names used in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Coordinate {
    #[cfg_attr(feature = "serde", serde(rename = "pmx"))]
    PlatformX,
    #[cfg_attr(feature = "serde", serde(rename = "pmy"))]
    PlatformY,
    #[cfg_attr(feature = "serde", serde(rename = "pmz"))]
    PlatformZ,
    #[cfg_attr(feature = "serde", serde(rename = "alpha"))]
    Roll,
    #[cfg_attr(feature = "serde", serde(rename = "beta"))]
    Pitch,
    #[cfg_attr(feature = "serde", serde(rename = "gamma"))]
    Yaw,
    #[cfg_attr(feature = "serde", serde(rename = "theta_p1"))]
    Pendulum1,
    #[cfg_attr(feature = "serde", serde(rename = "theta_p2"))]
    Pendulum2,
    #[cfg_attr(feature = "serde", serde(rename = "theta_a1"))]
    Arm1,
    #[cfg_attr(feature = "serde", serde(rename = "theta_a2"))]
    Arm2,
    #[cfg_attr(feature = "serde", serde(rename = "theta_a3"))]
    Arm3,
}

impl Coordinate {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Constant generalized force on one coordinate over `[start, stop)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Pulse {
    pub coordinate: Coordinate,
    /// N or N m depending on the coordinate.
    pub amplitude: f64,
    pub start: f64,
    pub stop: f64,
}

/// Sum of all pulses active at time `t`.
pub fn pulse(t: f64, pulses: &[Pulse]) -> QVec {
    let mut tau = QVec::zeros();
    for p in pulses {
        if t >= p.start && t < p.stop {
            tau[p.coordinate.index()] += p.amplitude;
        }
    }
    tau
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Waypoint {
    pub position: Vec3,
    #[cfg_attr(feature = "serde", serde(default = "Vec3::zeros"))]
    pub velocity: Vec3,
}

/// Planner clamps. Velocity vectors are ordered like the actuated set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Limits {
    pub qdot_min: [f64; 5],
    pub qdot_max: [f64; 5],
    /// Bounds on the per-step change of the actuated velocities.
    pub dqdot_min: [f64; 5],
    pub dqdot_max: [f64; 5],
    #[cfg_attr(feature = "serde", serde(default))]
    pub q_min: Option<[f64; 11]>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub q_max: Option<[f64; 11]>,
    /// Waypoint arrival tolerance (m).
    pub switch_tolerance: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            qdot_min: [-3.0, -3.0, -25.0, -25.0, -25.0],
            qdot_max: [3.0, 3.0, 25.0, 25.0, 25.0],
            dqdot_min: [-30.0, -30.0, -250.0, -250.0, -250.0],
            dqdot_max: [30.0, 30.0, 250.0, 250.0, 250.0],
            q_min: None,
            q_max: None,
            switch_tolerance: 2.22e-16,
        }
    }
}

/// Diagonal damping gains (1/s).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Damping {
    pub actuated: [f64; 5],
    pub unactuated: [f64; 3],
}

/// Diagonal PID gains over `[pmx, pmy, theta_p1, theta_p2, theta_a1..3]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ControlGains {
    pub kp: [f64; 7],
    pub kd: [f64; 7],
    pub ki: [f64; 7],
    /// Clamp on each integral accumulator.
    #[cfg_attr(feature = "serde", serde(default = "default_integral_limit"))]
    pub integral_limit: f64,
}

fn default_integral_limit() -> f64 {
    1e3
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            kp: [0.0; 7],
            kd: [0.0; 7],
            ki: [0.0; 7],
            integral_limit: default_integral_limit(),
        }
    }
}

#[cfg(feature = "serde")]
fn default_tracking_gain() -> f64 {
    10.0
}

#[cfg(feature = "serde")]
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ScenarioConfig {
    pub name: String,
    pub t_start: f64,
    pub t_end: f64,
    pub sample_time: f64,
    pub waypoints: Vec<Waypoint>,
    /// Arrival times, one per waypoint. Evenly spaced over the horizon
    /// when absent.
    #[cfg_attr(feature = "serde", serde(default))]
    pub waypoint_times: Option<Vec<f64>>,
    /// Starting configuration. Home pose when absent.
    #[cfg_attr(feature = "serde", serde(default))]
    pub initial_q: Option<[f64; 11]>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub method: Method,
    pub damping: Damping,
    #[cfg_attr(feature = "serde", serde(default))]
    pub limits: Limits,
    /// Position and velocity feedback gain of the task command (1/s).
    #[cfg_attr(feature = "serde", serde(default = "default_tracking_gain"))]
    pub tracking_gain: f64,
    /// Disturbances assumed by the planner.
    #[cfg_attr(feature = "serde", serde(default))]
    pub disturbances: Vec<Pulse>,
    /// Disturbances applied to the simulated plant. Same as the planner's
    /// when absent.
    #[cfg_attr(feature = "serde", serde(default))]
    pub plant_disturbances: Option<Vec<Pulse>>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub control: ControlGains,
    #[cfg_attr(feature = "serde", serde(default = "default_true"))]
    pub control_on: bool,
}

impl ScenarioConfig {
    /// One-second point-to-point transfer with a pulse on the unactuated
    /// coordinates between 0.1 s and 0.3 s.
    pub fn reference_transfer() -> Self {
        ScenarioConfig {
            name: "scenario1".into(),
            t_start: 0.0,
            t_end: 1.0,
            sample_time: 0.0002,
            waypoints: vec![
                Waypoint {
                    position: Vec3::new(0.0, 0.334, 0.0),
                    velocity: Vec3::zeros(),
                },
                Waypoint {
                    position: Vec3::new(0.35, 0.5, 0.1),
                    velocity: Vec3::zeros(),
                },
            ],
            waypoint_times: None,
            initial_q: None,
            method: Method::Toauj,
            damping: Damping {
                actuated: [500.0; 5],
                unactuated: [500.0; 3],
            },
            limits: Limits::default(),
            tracking_gain: 10.0,
            disturbances: vec![
                Pulse {
                    coordinate: Coordinate::PlatformZ,
                    amplitude: 20.0,
                    start: 0.1,
                    stop: 0.3,
                },
                Pulse {
                    coordinate: Coordinate::Roll,
                    amplitude: 2.0,
                    start: 0.1,
                    stop: 0.3,
                },
                Pulse {
                    coordinate: Coordinate::Pitch,
                    amplitude: 2.0,
                    start: 0.1,
                    stop: 0.3,
                },
            ],
            plant_disturbances: None,
            control: ControlGains::default(),
            control_on: false,
        }
    }

    /// The transfer replayed on the plant under joint-space PID control,
    /// without a plant disturbance.
    pub fn reference_tracking() -> Self {
        ScenarioConfig {
            name: "scenario2".into(),
            plant_disturbances: Some(Vec::new()),
            control: ControlGains {
                kp: [1.0, 1.0, 0.001, 0.001, 1.5, 1.8, 1.5],
                kd: [10.0, 30.0, 0.1, 0.1, 0.05, 0.09, 0.05],
                ki: [1.0, 1.0, 0.1, 0.1, 2.0, 6.75, 5.0],
                integral_limit: 1e3,
            },
            control_on: true,
            ..Self::reference_transfer()
        }
    }

    pub fn initial_configuration(&self) -> QVec {
        self.initial_q
            .map(|q| QVec::from_column_slice(&q))
            .unwrap_or_else(QVec::zeros)
    }

    /// Unactuated damping actually applied: zero for the actuated-only
    /// method.
    pub fn effective_unactuated_damping(&self, method: Method) -> [f64; 3] {
        match method {
            Method::Toaj => [0.0; 3],
            Method::Toauj => self.damping.unactuated,
        }
    }

    /// Disturbances for the simulated plant.
    pub fn plant_pulses(&self) -> &[Pulse] {
        self.plant_disturbances.as_deref().unwrap_or(&self.disturbances)
    }

    /// Waypoint times, explicit or evenly spaced.
    pub fn times(&self) -> Vec<f64> {
        match &self.waypoint_times {
            Some(t) => t.clone(),
            None => {
                let n = self.waypoints.len().max(2) - 1;
                (0..=n)
                    .map(|i| self.t_start + (self.t_end - self.t_start) * i as f64 / n as f64)
                    .collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_time.is_finite() && self.sample_time > 0.0) {
            return Err(Error::invalid("sample_time", "must be positive"));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return Err(Error::invalid("t_end", "must be greater than t_start"));
        }
        if self.waypoints.len() < 2 {
            return Err(Error::invalid("waypoints", "at least two are required"));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !w.position.iter().chain(w.velocity.iter()).all(|v| v.is_finite()) {
                return Err(Error::invalid(&format!("waypoints[{i}]"), "not finite"));
            }
        }
        if let Some(t) = &self.waypoint_times {
            if t.len() != self.waypoints.len() {
                return Err(Error::invalid(
                    "waypoint_times",
                    "length differs from the waypoint count",
                ));
            }
            if t.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid("waypoint_times", "must be increasing"));
            }
            if t[0] != self.t_start || t[t.len() - 1] != self.t_end {
                return Err(Error::invalid(
                    "waypoint_times",
                    "must start at t_start and end at t_end",
                ));
            }
        }
        if let Some(q) = &self.initial_q {
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("initial_q", "not finite"));
            }
            if q[crate::YAW] != 0.0 {
                return Err(Error::invalid("initial_q", "yaw must be zero"));
            }
        }
        let nonneg = |field: &str, v: &[f64]| -> Result<()> {
            if v.iter().all(|x| x.is_finite() && *x >= 0.0) {
                Ok(())
            } else {
                Err(Error::invalid(field, "entries must be nonnegative"))
            }
        };
        nonneg("damping.actuated", &self.damping.actuated)?;
        nonneg("damping.unactuated", &self.damping.unactuated)?;
        nonneg("control.kp", &self.control.kp)?;
        nonneg("control.kd", &self.control.kd)?;
        nonneg("control.ki", &self.control.ki)?;
        nonneg("control.integral_limit", &[self.control.integral_limit])?;
        nonneg("tracking_gain", &[self.tracking_gain])?;
        let l = &self.limits;
        let ordered = |field: &str, lo: &[f64], hi: &[f64]| -> Result<()> {
            if lo.iter().zip(hi).all(|(a, b)| a <= b) {
                Ok(())
            } else {
                Err(Error::invalid(field, "max below min"))
            }
        };
        ordered("limits.qdot", &l.qdot_min, &l.qdot_max)?;
        ordered("limits.dqdot", &l.dqdot_min, &l.dqdot_max)?;
        if let (Some(lo), Some(hi)) = (&l.q_min, &l.q_max) {
            ordered("limits.q", lo, hi)?;
        }
        if !(l.switch_tolerance > 0.0) {
            return Err(Error::invalid("limits.switch_tolerance", "must be positive"));
        }
        let windows = self.disturbances.iter().chain(self.plant_disturbances.iter().flatten());
        for p in windows {
            if !(p.stop > p.start) {
                return Err(Error::invalid("disturbances", "stop must follow start"));
            }
            if p.start < self.t_start || p.stop > self.t_end {
                return Err(Error::invalid(
                    "disturbances",
                    "window must lie within [t_start, t_end]",
                ));
            }
        }
        Ok(())
    }
}
