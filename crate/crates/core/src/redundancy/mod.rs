//! Velocity-level redundancy resolution that minimizes joint torques.
//!
//! Two step laws are provided. [`toaj_step`] optimizes over the actuated
//! joints with the actuated inertia alone. [`toauj_step`] couples the
//! actuated and unactuated joints through the 8x8 inertia and damps both.
//! [`plan`] drives either law over a scenario.

mod pendulum;
mod planner;

pub use pendulum::{equilibrium, nelder_mead, static_symmetric, MomentModel, NelderMead, PendulumSolution};
pub use planner::{plan, PlanResult, PlanRow, BLOW_UP_NORM};

use nalgebra::{SMatrix, SVector};

use crate::dynamics::{condition_estimate, ReducedTerms, REDUCED_ACTUATED, REDUCED_UNACTUATED};
use crate::error::{Error, Result};
use crate::kinematics::TaskJac;

pub type V3 = SVector<f64, 3>;
pub type V5 = SVector<f64, 5>;
pub type V8 = SVector<f64, 8>;
pub type M5 = SMatrix<f64, 5, 5>;
pub type M3 = SMatrix<f64, 3, 3>;
pub type Pinv = SMatrix<f64, 5, 3>;

/// Singular values below this fraction of the largest are dropped.
pub const PINV_RELATIVE_TOLERANCE: f64 = 1e-10;
/// Newton-Schulz steps applied after the truncated SVD, which alone is
/// only accurate to about 1e-11.
pub const PINV_REFINEMENT_STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverse {
    pub pinv: Pinv,
    /// Number of singular values kept.
    pub rank: usize,
}

impl PseudoInverse {
    /// `I - J^+ J`.
    pub fn null_projector(&self, j: &TaskJac) -> M5 {
        M5::identity() - self.pinv * j
    }
}

/// Moore-Penrose pseudo-inverse by SVD with relative truncation.
pub fn pseudo_inverse(j: &TaskJac) -> PseudoInverse {
    let svd = j.transpose().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.max();
    let mut pinv = Pinv::zeros();
    let mut rank = 0;
    // J^T = U S V^T, so J^+ = U S^+ V^T
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > PINV_RELATIVE_TOLERANCE * smax && s > 0.0 {
            pinv += u.column(i) * vt.row(i) / s;
            rank += 1;
        }
    }
    // Newton-Schulz polish; the iteration keeps the truncated range
    for _ in 0..PINV_REFINEMENT_STEPS {
        pinv = pinv * 2.0 - pinv * j * pinv;
    }
    PseudoInverse { pinv, rank }
}

/// Inputs shared by both step laws.
#[derive(Debug, Clone)]
pub struct StepInput<'a> {
    pub jacobian: &'a TaskJac,
    pub pinv: &'a PseudoInverse,
    /// Commanded end-effector velocity.
    pub command: &'a V3,
    pub qd_a_prev: &'a V5,
    pub qd_u_prev: &'a V3,
    pub sample_time: f64,
    /// Diagonal damping of the actuated self-motion (1/s).
    pub damping_a: &'a V5,
    /// Diagonal damping of the unactuated joints (1/s).
    pub damping_u: &'a V3,
    pub terms: &'a ReducedTerms,
}

/// Actuated-only update:
/// `qd_A = J^+ pd + P [(I - T_s K_A) qd_A(k-1) - T_s M_A^-1 F_A]`
/// with `F_A = C_A qd_A(k-1) + G_A + tau_dA`.
pub fn toaj_step(s: &StepInput) -> Result<V5> {
    let ts = s.sample_time;
    let p = s.pinv.null_projector(s.jacobian);
    let drift = solve_spd(&s.terms.m_aa, &s.terms.f_a, "actuated inertia")?;
    let damped = s.qd_a_prev - s.damping_a.component_mul(s.qd_a_prev) * ts;
    Ok(s.pinv.pinv * s.command + p * (damped - drift * ts))
}

/// Schur-complement bias terms `(Xi_A, Xi_U)`, equal to
/// `M_AU^-1 [F_A; F_U]` split by block.
pub fn schur_bias(t: &ReducedTerms) -> Result<(V5, V3)> {
    let muu_inv_mua = solve_spd_mat(&t.m_uu, &t.m_u_a, "unactuated inertia")?;
    let muu_inv_fu = solve_spd(&t.m_uu, &t.f_u, "unactuated inertia")?;
    let maa_inv_mau = solve_spd_mat(&t.m_aa, &t.m_a_u, "actuated inertia")?;
    let maa_inv_fa = solve_spd(&t.m_aa, &t.f_a, "actuated inertia")?;
    let schur_a = t.m_aa - t.m_a_u * muu_inv_mua;
    let schur_u = t.m_uu - t.m_u_a * maa_inv_mau;
    let xi_a = solve_spd(&schur_a, &(t.f_a - t.m_a_u * muu_inv_fu), "actuated Schur complement")?;
    let xi_u = solve_spd(&schur_u, &(t.f_u - t.m_u_a * maa_inv_fa), "unactuated Schur complement")?;
    Ok((xi_a, xi_u))
}

/// Coupled update:
/// `qd_A = J^+ pd + P [(I - T_s K_A) qd_A(k-1) - T_s Xi_A]`,
/// `qd_U = (I - T_s K_U) qd_U(k-1) - T_s Xi_U`.
pub fn toauj_step(s: &StepInput) -> Result<(V5, V3)> {
    let ts = s.sample_time;
    let (xi_a, xi_u) = schur_bias(s.terms)?;
    let p = s.pinv.null_projector(s.jacobian);
    let damped_a = s.qd_a_prev - s.damping_a.component_mul(s.qd_a_prev) * ts;
    let damped_u = s.qd_u_prev - s.damping_u.component_mul(s.qd_u_prev) * ts;
    let qd_a = s.pinv.pinv * s.command + p * (damped_a - xi_a * ts);
    let qd_u = damped_u - xi_u * ts;
    Ok((qd_a, qd_u))
}

/// Scatter actuated and unactuated parts into the 8-vector ordering of
/// the reduced inertia.
pub fn stack(a: &V5, u: &V3) -> V8 {
    let mut out = V8::zeros();
    for (i, &r) in REDUCED_ACTUATED.iter().enumerate() {
        out[r] = a[i];
    }
    for (i, &r) in REDUCED_UNACTUATED.iter().enumerate() {
        out[r] = u[i];
    }
    out
}

pub fn unstack(v: &V8) -> (V5, V3) {
    (
        V5::from_fn(|i, _| v[REDUCED_ACTUATED[i]]),
        V3::from_fn(|i, _| v[REDUCED_UNACTUATED[i]]),
    )
}

/// Torque-cost diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCost {
    /// `0.5 ||M_AU^-1 tau||^2` over the coupled coordinates.
    pub coupled: f64,
    /// `0.5 ||M_AA^-1 tau_A||^2`.
    pub actuated: f64,
}

/// Costs of the torques `tau = M_AU [qdd_A; qdd_U] + [F_A; F_U]`.
pub fn step_cost(t: &ReducedTerms, qdd_a: &V5, qdd_u: &V3) -> Result<StepCost> {
    let tau = t.m_au * stack(qdd_a, qdd_u) + stack(&t.f_a, &t.f_u);
    let scaled = solve_spd(&t.m_au, &tau, "reduced inertia")?;
    let (tau_a, _) = unstack(&tau);
    let scaled_a = solve_spd(&t.m_aa, &tau_a, "actuated inertia")?;
    Ok(StepCost {
        coupled: 0.5 * scaled.norm_squared(),
        actuated: 0.5 * scaled_a.norm_squared(),
    })
}

fn solve_spd<const N: usize>(
    m: &SMatrix<f64, N, N>,
    b: &SVector<f64, N>,
    what: &'static str,
) -> Result<SVector<f64, N>> {
    m.cholesky().map(|c| c.solve(b)).ok_or_else(|| Error::Singular {
        what,
        condition: condition_estimate(m),
    })
}

fn solve_spd_mat<const N: usize, const C: usize>(
    m: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, C>,
    what: &'static str,
) -> Result<SMatrix<f64, N, C>> {
    m.cholesky().map(|c| c.solve(b)).ok_or_else(|| Error::Singular {
        what,
        condition: condition_estimate(m),
    })
}
