//! Quintic point-to-point Cartesian reference with position and velocity
//! feedback on the commanded end-effector motion.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: Vec3,
    pub end: Vec3,
    pub t_start: f64,
    pub t_end: f64,
    /// Number of sample intervals; the segment has samples `1..=steps+1`.
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    /// Commanded end-effector velocity.
    pub command_velocity: Vec3,
    /// Commanded end-effector acceleration.
    pub command_acceleration: Vec3,
}

/// Blend `s(eta) = 6 eta^5 - 15 eta^4 + 10 eta^3` and its first two
/// derivatives with respect to `eta`.
pub fn blend(eta: f64) -> (f64, f64, f64) {
    let e2 = eta * eta;
    let e3 = e2 * eta;
    (
        e3 * (10.0 + eta * (-15.0 + 6.0 * eta)),
        e2 * (30.0 + eta * (-60.0 + 30.0 * eta)),
        eta * (60.0 + eta * (-180.0 + 120.0 * eta)),
    )
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Normalized time of sample `k`, clamped to 1 on the overshooting
    /// final sample.
    pub fn eta(&self, k: usize) -> Result<f64> {
        if k < 1 || k > self.steps + 1 {
            return Err(Error::OutOfRange {
                index: k,
                max: self.steps + 1,
            });
        }
        Ok((k as f64 / self.steps as f64).min(1.0))
    }

    /// Reference position, velocity and acceleration at normalized time
    /// `eta`.
    pub fn reference_at(&self, eta: f64) -> (Vec3, Vec3, Vec3) {
        let d = self.end - self.start;
        let t = self.duration();
        let (s, sd, sdd) = blend(eta);
        let position = if eta == 1.0 { self.end } else { self.start + d * s };
        (position, d * (sd / t), d * (sdd / (t * t)))
    }

    pub fn sample(&self, k: usize, gain: f64, measured: &Vec3, measured_velocity: &Vec3) -> Result<TrajectorySample> {
        let (position, velocity, acceleration) = self.reference_at(self.eta(k)?);
        Ok(TrajectorySample {
            position,
            velocity,
            acceleration,
            command_velocity: velocity + (position - measured) * gain,
            command_acceleration: acceleration + (velocity - measured_velocity) * gain,
        })
    }
}

/// Split waypoints into consecutive segments with `N = round(dt / T_s)`
/// sample intervals each.
pub fn segment_schedule(waypoints: &[Vec3], times: &[f64], sample_time: f64) -> Result<Vec<Segment>> {
    if waypoints.len() < 2 {
        return Err(Error::invalid("waypoints", "at least two are required"));
    }
    if times.len() != waypoints.len() {
        return Err(Error::invalid(
            "waypoint_times",
            "length differs from the waypoint count",
        ));
    }
    if !(sample_time > 0.0) {
        return Err(Error::invalid("sample_time", "must be positive"));
    }
    let mut out = Vec::with_capacity(waypoints.len() - 1);
    for i in 1..waypoints.len() {
        let dt = times[i] - times[i - 1];
        if !(dt > 0.0) {
            return Err(Error::invalid("waypoint_times", "must be increasing"));
        }
        let steps = libm::round(dt / sample_time) as usize;
        if steps == 0 {
            return Err(Error::invalid("waypoint_times", "segment shorter than one sample"));
        }
        out.push(Segment {
            start: waypoints[i - 1],
            end: waypoints[i],
            t_start: times[i - 1],
            t_end: times[i],
            steps,
        });
    }
    Ok(out)
}
