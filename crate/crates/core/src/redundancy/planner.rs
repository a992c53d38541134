//! Discrete planner: samples the Cartesian reference, resolves the
//! redundancy one step at a time and integrates the joint states.

use alloc::vec::Vec;

use nalgebra::Vector4;

use super::pendulum::{equilibrium, MomentModel, NelderMead};
use super::{pseudo_inverse, step_cost, toauj_step, StepInput, V3, V5};
use crate::cable_tension::optimal_tensions;
use crate::dynamics::reduced_terms;
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, task_jacobian, task_jacobian_dot};
use crate::params::HcdrParams;
use crate::scenario::{pulse, Method, ScenarioConfig};
use crate::trajectory::segment_schedule;
use crate::{QVec, Vec3, ACTUATED, PENDULUMS, UNACTUATED, YAW};

/// Velocities above this norm abort the plan.
pub const BLOW_UP_NORM: f64 = 1e6;

/// One planner sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRow {
    pub time: f64,
    /// Full configuration at this sample, pendulum angles included.
    pub q: QVec,
    /// Velocities resolved at this sample. Pendulum entries are the
    /// backward difference of the nominal angles.
    pub qd: QVec,
    /// End-effector position from the actuated coordinates.
    pub end_effector: Vec3,
    pub reference: Vec3,
    pub command_velocity: Vec3,
    /// `||pd_cmd - J_e qd_A||`.
    pub residual: f64,
    /// `0.5 ||M_AU^-1 tau||^2`.
    pub cost: f64,
    /// `0.5 ||M_AA^-1 tau_A||^2`.
    pub actuated_cost: f64,
    /// A velocity or velocity-change clamp was active.
    pub clamped: bool,
    /// Rank of the task Jacobian after truncation.
    pub rank: usize,
    /// Group tensions (upper-right, upper-left, lower-right, lower-left).
    pub tensions: Vector4<f64>,
    pub pendulum_residual: f64,
    pub pendulum_converged: bool,
}

impl PlanRow {
    pub fn q_a(&self) -> V5 {
        V5::from_fn(|i, _| self.q[ACTUATED[i]])
    }

    pub fn qd_a(&self) -> V5 {
        V5::from_fn(|i, _| self.qd[ACTUATED[i]])
    }

    pub fn q_u(&self) -> V3 {
        V3::from_fn(|i, _| self.q[UNACTUATED[i]])
    }

    pub fn qd_u(&self) -> V3 {
        V3::from_fn(|i, _| self.qd[UNACTUATED[i]])
    }

    pub fn pendulum_angles(&self) -> [f64; 2] {
        [self.q[PENDULUMS[0]], self.q[PENDULUMS[1]]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub method: Method,
    pub sample_time: f64,
    pub rows: Vec<PlanRow>,
}

impl PlanResult {
    pub fn last(&self) -> &PlanRow {
        self.rows.last().expect("a plan has at least one row")
    }

    pub fn clamped_steps(&self) -> usize {
        self.rows.iter().filter(|r| r.clamped).count()
    }

    pub fn pendulum_failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pendulum_converged).count()
    }
}

/// Configuration seen by the task map: unactuated coordinates and yaw
/// zeroed.
fn task_configuration(q: &QVec) -> QVec {
    let mut t = *q;
    for i in UNACTUATED {
        t[i] = 0.0;
    }
    t[YAW] = 0.0;
    t
}

fn scatter_actuated(v: &V5) -> QVec {
    let mut out = QVec::zeros();
    for (i, &c) in ACTUATED.iter().enumerate() {
        out[c] = v[i];
    }
    out
}

fn clamp_velocity(new: &V5, prev: &V5, s: &ScenarioConfig) -> (V5, bool) {
    let l = &s.limits;
    let mut out = *new;
    let mut clamped = false;
    for i in 0..5 {
        let v = out[i].clamp(l.qdot_min[i], l.qdot_max[i]);
        let d = (v - prev[i]).clamp(l.dqdot_min[i], l.dqdot_max[i]);
        let v = prev[i] + d;
        clamped |= v != out[i];
        out[i] = v;
    }
    (out, clamped)
}

/// Run the planner over the whole scenario horizon with the given method.
pub fn plan(p: &HcdrParams, s: &ScenarioConfig, method: Method) -> Result<PlanResult> {
    s.validate()?;
    let ts = s.sample_time;
    let waypoints: Vec<Vec3> = s.waypoints.iter().map(|w| w.position).collect();
    let segments = segment_schedule(&waypoints, &s.times(), ts)?;
    let total: usize = segments.iter().map(|g| g.steps).sum();
    let k_a = V5::from_column_slice(&s.damping.actuated);
    let k_u = V3::from_column_slice(&s.effective_unactuated_damping(method));
    let nm = NelderMead {
        initial_step: 0.01,
        ..NelderMead::default()
    };

    let mut q = s.initial_configuration();
    q[YAW] = 0.0;
    let mut qd_a_prev = V5::zeros();
    let mut qd_u_prev = V3::zeros();
    let mut theta_prev = [q[PENDULUMS[0]], q[PENDULUMS[1]]];
    let mut seg = 0;
    let mut k = 1;
    let mut rows = Vec::with_capacity(total + 1);

    for r in 0..=total {
        let time = s.t_start + r as f64 * ts;
        let at = |e: Error| e.at_step(r);
        let segment = &segments[seg];

        let qt = task_configuration(&q);
        let end_effector = forward_kinematics(p, &qt).end_effector();
        let j = task_jacobian(p, &qt);
        let measured_velocity = j * qd_a_prev;
        let sample = segment
            .sample(k, s.tracking_gain, &end_effector, &measured_velocity)
            .map_err(at)?;
        let tau_d = pulse(time, &s.disturbances);

        let mut qd_full = scatter_actuated(&qd_a_prev);
        for (i, &c) in UNACTUATED.iter().enumerate() {
            qd_full[c] = qd_u_prev[i];
        }
        for (i, &c) in PENDULUMS.iter().enumerate() {
            qd_full[c] = (q[c] - theta_prev[i]) / ts;
        }
        let terms = reduced_terms(p, &q, &qd_full, &tau_d).map_err(at)?;
        let pinv = pseudo_inverse(&j);
        let jdot = task_jacobian_dot(p, &qt, &scatter_actuated(&qd_a_prev));

        let mut planar = QVec::zeros();
        planar[0] = q[0];
        planar[1] = q[1];
        let tensions = optimal_tensions(p, &planar).map_err(at)?.tensions;

        let input = StepInput {
            jacobian: &j,
            pinv: &pinv,
            command: &sample.command_velocity,
            qd_a_prev: &qd_a_prev,
            qd_u_prev: &qd_u_prev,
            sample_time: ts,
            damping_a: &k_a,
            damping_u: &k_u,
            terms: &terms,
        };
        let (qd_a_raw, qd_u) = toauj_step(&input).map_err(at)?;
        let (qd_a, clamped) = clamp_velocity(&qd_a_raw, &qd_a_prev, s);
        let residual = (sample.command_velocity - j * qd_a).norm();

        let qdd_a = pinv.pinv * (sample.command_acceleration - jdot * qd_a_prev);
        let qdd_u = (qd_u - qd_u_prev) / ts;
        let cost = step_cost(&terms, &qdd_a, &qdd_u).map_err(at)?;

        let mut qd = scatter_actuated(&qd_a);
        for (i, &c) in UNACTUATED.iter().enumerate() {
            qd[c] = qd_u[i];
        }
        for c in PENDULUMS {
            qd[c] = qd_full[c];
        }
        let norm = qd.norm();
        if !norm.is_finite() || norm > BLOW_UP_NORM {
            return Err(Error::BlowUp { step: r, norm });
        }

        // nominal pendulum angles for the next sample, balancing the arm
        // on the task configuration
        let qd_task = scatter_actuated(&qd_a);
        let qdd_task = (qd_task - scatter_actuated(&qd_a_prev)) / ts;
        let model = MomentModel::new(p, &qt, &qd_task, &qdd_task);
        let current = [q[PENDULUMS[0]], q[PENDULUMS[1]]];
        let pend = equilibrium(&model, current, &nm);

        rows.push(PlanRow {
            time,
            q,
            qd,
            end_effector,
            reference: sample.position,
            command_velocity: sample.command_velocity,
            residual,
            cost: cost.coupled,
            actuated_cost: cost.actuated,
            clamped,
            rank: pinv.rank,
            tensions,
            pendulum_residual: pend.residual,
            pendulum_converged: pend.converged,
        });

        theta_prev = current;
        for (i, &c) in ACTUATED.iter().enumerate() {
            q[c] += ts * qd_a[i];
        }
        for (i, &c) in UNACTUATED.iter().enumerate() {
            q[c] += ts * qd_u[i];
        }
        q[PENDULUMS[0]] = pend.angles[0];
        q[PENDULUMS[1]] = pend.angles[1];
        if let (Some(lo), Some(hi)) = (&s.limits.q_min, &s.limits.q_max) {
            for i in 0..q.len() {
                q[i] = q[i].clamp(lo[i], hi[i]);
            }
        }
        qd_a_prev = qd_a;
        qd_u_prev = qd_u;

        let last = seg + 1 == segments.len();
        let arrived = (segment.end - forward_kinematics(p, &task_configuration(&q)).end_effector()).norm()
            <= s.limits.switch_tolerance;
        if last {
            k = (k + 1).min(segment.steps + 1);
        } else if k >= segment.steps || arrived {
            seg += 1;
            k = 1;
        } else {
            k += 1;
        }
    }
    Ok(PlanResult {
        method,
        sample_time: ts,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(method: Method) -> PlanResult {
        let mut s = ScenarioConfig::reference_transfer();
        s.t_end = 0.02;
        s.disturbances.clear();
        plan(&HcdrParams::reference(), &s, method).unwrap()
    }

    #[test]
    fn row_count_and_times() {
        let r = short(Method::Toauj);
        assert_eq!(r.rows.len(), 101);
        assert_eq!(r.rows[0].time, 0.0);
        assert!((r.last().time - 0.02).abs() < 1e-12);
    }

    #[test]
    fn starts_at_home() {
        let r = short(Method::Toaj);
        assert!((r.rows[0].end_effector - Vec3::new(0.0, 0.334, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn deterministic() {
        assert_eq!(short(Method::Toauj), short(Method::Toauj));
    }

    #[test]
    fn velocities_respect_limits() {
        let s = ScenarioConfig::reference_transfer();
        let r = short(Method::Toauj);
        for row in &r.rows {
            let v = row.qd_a();
            for i in 0..5 {
                assert!(v[i] >= s.limits.qdot_min[i] && v[i] <= s.limits.qdot_max[i]);
            }
        }
    }

    #[test]
    fn methods_agree_without_unactuated_damping() {
        let mut s = ScenarioConfig::reference_transfer();
        s.t_end = 0.02;
        s.disturbances.clear();
        s.damping.unactuated = [0.0; 3];
        let a = plan(&HcdrParams::reference(), &s, Method::Toaj).unwrap();
        let b = plan(&HcdrParams::reference(), &s, Method::Toauj).unwrap();
        assert_eq!(a.rows, b.rows);
    }
}
