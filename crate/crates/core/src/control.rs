//! Joint-space PID tracking controller over
//! `[pmx, pmy, theta_p1, theta_p2, theta_a1..3]`.
//!
//! The output is `u = [dT3, dT4, tau_p1, tau_p2, tau_a1, tau_a2, tau_a3]`:
//! the two platform channels go through the inverse of the lower-cable
//! block of the planar tension matrix, the rest pass straight through.

use nalgebra::{Matrix2, SVector, Vector2};

use crate::error::{Error, Result};
use crate::scenario::ControlGains;

pub type V7 = SVector<f64, 7>;

/// Lower-cable blocks worse conditioned than this are rejected.
pub const MAX_BLOCK_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlState {
    /// Trapezoidal integral of the error, clamped per channel.
    pub integral: V7,
    /// Error of the previous call; `None` before the first.
    pub previous_error: Option<V7>,
}

/// Rates used for the derivative term.
#[derive(Debug, Clone, Copy)]
pub enum Rates<'a> {
    /// Reference rate minus measured rate.
    Given { reference: &'a V7, measured: &'a V7 },
    /// Backward difference of the error.
    Differenced,
}

/// Raw PID sum `K_p e + K_d de + K_i int(e)` before the input map.
pub fn pid(
    reference: &V7,
    measured: &V7,
    rates: Rates,
    sample_time: f64,
    gains: &ControlGains,
    state: &mut ControlState,
) -> V7 {
    let e = reference - measured;
    let de = match rates {
        Rates::Given { reference, measured } => reference - measured,
        Rates::Differenced => match state.previous_error {
            Some(prev) => (e - prev) / sample_time,
            None => V7::zeros(),
        },
    };
    if let Some(prev) = state.previous_error {
        let lim = gains.integral_limit;
        state.integral += (e + prev) * (0.5 * sample_time);
        state.integral = state.integral.map(|v| v.clamp(-lim, lim));
    }
    state.previous_error = Some(e);
    let kp = V7::from_column_slice(&gains.kp);
    let kd = V7::from_column_slice(&gains.kd);
    let ki = V7::from_column_slice(&gains.ki);
    kp.component_mul(&e) + kd.component_mul(&de) + ki.component_mul(&state.integral)
}

/// Map a PID sum to physical inputs.
pub fn input_map(raw: &V7, lower_block: &Matrix2<f64>) -> Result<V7> {
    let sv = lower_block.singular_values();
    let condition = sv.max() / sv.min();
    let lu = lower_block.lu();
    let dt = match lu.solve(&Vector2::new(raw[0], raw[1])) {
        Some(x) if condition.is_finite() && condition <= MAX_BLOCK_CONDITION => x,
        _ => {
            return Err(Error::Singular {
                what: "lower cable block",
                condition,
            })
        }
    };
    let mut u = *raw;
    u[0] = dt[0];
    u[1] = dt[1];
    Ok(u)
}

/// One controller update.
pub fn control_step(
    reference: &V7,
    measured: &V7,
    rates: Rates,
    lower_block: &Matrix2<f64>,
    sample_time: f64,
    gains: &ControlGains,
    state: &mut ControlState,
) -> Result<V7> {
    let raw = pid(reference, measured, rates, sample_time, gains, state);
    input_map(&raw, lower_block)
}
