//! Multibody model, torque-optimal redundancy resolution and closed-loop
//! plant simulation for an 11-DOF hybrid cable-driven robot: a planar
//! cable-suspended platform carrying a 3-joint arm and two balancing
//! pendulums.
//!
//! The crate is `no_std` and only needs `alloc`. All IO lives in the
//! companion `hcdr` crate.
//!
//! Generalized coordinates (0-based):
//!
//! | index | coordinate | set |
//! |-------|------------|-----|
//! | 0, 1  | platform x, y | actuated |
//! | 2     | platform z | unactuated |
//! | 3, 4  | platform roll, pitch | unactuated |
//! | 5     | platform yaw | pinned to zero |
//! | 6, 7  | pendulum angles | equilibrium-solved |
//! | 8..11 | arm joints | actuated |
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cable_tension;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod kinematics;
mod math;
pub mod params;
pub mod redundancy;
pub mod scenario;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
pub use params::HcdrParams;
pub use scenario::{Method, ScenarioConfig};

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
/// Full generalized coordinate vector.
pub type QVec = SVector<f64, 11>;
/// Full inertia / Coriolis matrix.
pub type QMat = SMatrix<f64, 11, 11>;

pub const NQ: usize = 11;
/// Actuated coordinates: platform x, y and the three arm joints.
pub const ACTUATED: [usize; 5] = [0, 1, 8, 9, 10];
/// Unactuated coordinates: platform z, roll, pitch.
pub const UNACTUATED: [usize; 3] = [2, 3, 4];
/// Coordinates of the reduced coupled model, actuated block first as
/// stored in the 8x8 inertia sub-matrix (q indices 0..5 then 8..11).
pub const REDUCED: [usize; 8] = [0, 1, 2, 3, 4, 8, 9, 10];
pub const YAW: usize = 5;
pub const PENDULUMS: [usize; 2] = [6, 7];
