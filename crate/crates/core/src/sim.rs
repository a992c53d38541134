//! Closed-loop plant: the whole-body model driven by elastic upper cables,
//! force-controlled lower cables and joint torques, integrated with
//! fixed-step RK4 while the controller output is held over each sample.
//!
//! Yaw is pinned: its row and column are dropped, leaving ten free
//! coordinates.

use alloc::vec::Vec;

use nalgebra::{SMatrix, SVector, Vector4};

use crate::cable_tension::{lower_block, optimal_tensions, reduced_structure_matrix};
use crate::control::{control_step, ControlState, Rates, V7};
use crate::dynamics::{coriolis_forces, gravity_potential, gravity_vector, kinetic_energy, mass_matrix};
use crate::error::{Error, Result};
use crate::kinematics::{cable_geometry, forward_kinematics, CableGeometry};
use crate::params::HcdrParams;
use crate::redundancy::{PlanResult, BLOW_UP_NORM};
use crate::scenario::{pulse, ControlGains, Pulse, ScenarioConfig};
use crate::{QVec, Vec3, UNACTUATED};

/// Coordinates integrated by the plant (all but yaw).
pub const FREE: [usize; 10] = [0, 1, 2, 3, 4, 6, 7, 8, 9, 10];
/// Controlled coordinates, in controller channel order.
pub const CONTROLLED: [usize; 7] = [0, 1, 6, 7, 8, 9, 10];

type V10 = SVector<f64, 10>;
type M10 = SMatrix<f64, 10, 10>;

/// Cable and joint inputs held over one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    /// Unstretched lengths of the two upper groups.
    pub unstretched: [f64; 2],
    /// Feed-forward lower group tensions.
    pub lower: [f64; 2],
    /// Controller output `[dT3, dT4, tau_p1, tau_p2, tau_a1..3]`.
    pub u: V7,
}

impl Drive {
    /// Drive holding the optimal tension distribution of a planar pose.
    pub fn feed_forward(p: &HcdrParams, q: &QVec) -> Result<Self> {
        let mut planar = QVec::zeros();
        planar[0] = q[0];
        planar[1] = q[1];
        let sol = optimal_tensions(p, &planar)?;
        Ok(Drive {
            unstretched: sol.unstretched,
            lower: [sol.tensions[2], sol.tensions[3]],
            u: V7::zeros(),
        })
    }

    /// Applied lower tensions; cables cannot push.
    pub fn lower_tensions(&self) -> [f64; 2] {
        [
            (self.lower[0] + self.u[0]).max(0.0),
            (self.lower[1] + self.u[1]).max(0.0),
        ]
    }
}

fn member_tensions(p: &HcdrParams, geom: &CableGeometry, drive: &Drive) -> SVector<f64, 12> {
    let lower = drive.lower_tensions();
    let mut t = SVector::<f64, 12>::zeros();
    for (g, members) in p.cables.groups.iter().enumerate() {
        for &i in members {
            t[i - 1] = if g < 2 {
                let l0 = drive.unstretched[g];
                p.cables.upper_stiffness[g] / l0 * (geom.lengths[i - 1] - l0).max(0.0)
            } else {
                lower[g - 2]
            };
        }
    }
    t
}

/// Group tensions at a state: upper groups as the mean member tension.
pub fn group_tensions(p: &HcdrParams, q: &QVec, drive: &Drive) -> Result<Vector4<f64>> {
    let geom = cable_geometry(p, q)?;
    let t = member_tensions(p, &geom, drive);
    let mut out = Vector4::zeros();
    for (g, members) in p.cables.groups.iter().enumerate() {
        out[g] = members.iter().map(|&i| t[i - 1]).sum::<f64>() / members.len() as f64;
    }
    Ok(out)
}

/// Generalized input forces: cables on the platform rows, controller
/// torques on the pendulum and arm rows.
pub fn input_forces(p: &HcdrParams, q: &QVec, drive: &Drive) -> Result<QVec> {
    let geom = cable_geometry(p, q)?;
    let mut tau = geom.generalized_forces(&member_tensions(p, &geom, drive));
    for k in 2..7 {
        tau[CONTROLLED[k]] += drive.u[k];
    }
    Ok(tau)
}

/// Accelerations of the pinned-yaw model; the yaw entry is zero.
pub fn acceleration(p: &HcdrParams, q: &QVec, qd: &QVec, tau: &QVec, tau_d: &QVec) -> Result<QVec> {
    let m = mass_matrix(p, q);
    let rhs = tau - coriolis_forces(p, q, qd) - gravity_vector(p, q, None)? - tau_d;
    let mr = M10::from_fn(|i, j| m[(FREE[i], FREE[j])]);
    let br = V10::from_fn(|i, _| rhs[FREE[i]]);
    let x = mr.cholesky().ok_or(Error::Singular {
        what: "plant inertia",
        condition: crate::dynamics::condition_estimate(&mr),
    })?;
    let a = x.solve(&br);
    let mut out = QVec::zeros();
    for (i, &c) in FREE.iter().enumerate() {
        out[c] = a[i];
    }
    Ok(out)
}

/// One RK4 step of length `h` from time `t` with the drive held.
pub fn rk4_step(
    p: &HcdrParams,
    q: &QVec,
    qd: &QVec,
    t: f64,
    h: f64,
    drive: &Drive,
    pulses: &[Pulse],
) -> Result<(QVec, QVec)> {
    let f = |t: f64, q: &QVec, qd: &QVec| -> Result<QVec> {
        let tau = input_forces(p, q, drive)?;
        acceleration(p, q, qd, &tau, &pulse(t, pulses))
    };
    let a1 = f(t, q, qd)?;
    let (q2, v2) = (q + qd * (h / 2.0), qd + a1 * (h / 2.0));
    let a2 = f(t + h / 2.0, &q2, &v2)?;
    let (q3, v3) = (q + v2 * (h / 2.0), qd + a2 * (h / 2.0));
    let a3 = f(t + h / 2.0, &q3, &v3)?;
    let (q4, v4) = (q + v3 * h, qd + a3 * h);
    let a4 = f(t + h, &q4, &v4)?;
    let qn = q + (qd + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0);
    let vn = qd + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    Ok((qn, vn))
}

/// Kinetic plus gravity energy, elastic energy of the upper cables and
/// the potential `T L` of the constant-tension lower cables.
pub fn mechanical_energy(p: &HcdrParams, q: &QVec, qd: &QVec, drive: &Drive) -> Result<f64> {
    let geom = cable_geometry(p, q)?;
    let lower = drive.lower_tensions();
    let mut cables = 0.0;
    for (g, members) in p.cables.groups.iter().enumerate() {
        for &i in members {
            let l = geom.lengths[i - 1];
            cables += if g < 2 {
                let l0 = drive.unstretched[g];
                let s = (l - l0).max(0.0);
                0.5 * p.cables.upper_stiffness[g] / l0 * s * s
            } else {
                lower[g - 2] * l
            };
        }
    }
    Ok(kinetic_energy(p, q, qd) + gravity_potential(p, q) + cables)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub time: Vec<f64>,
    pub q: Vec<QVec>,
    pub qd: Vec<QVec>,
    pub u: Vec<V7>,
    /// Group tensions (upper-right, upper-left, lower-right, lower-left).
    pub tensions: Vec<Vector4<f64>>,
    pub end_effector: Vec<Vec3>,
    pub reference: Vec<Vec3>,
    pub energy: Vec<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Componentwise maximum of `|p_e - reference|`.
    pub fn max_error(&self) -> Vec3 {
        self.end_effector
            .iter()
            .zip(&self.reference)
            .fold(Vec3::zeros(), |m, (e, r)| m.sup(&(e - r).abs()))
    }

    /// Largest `|qd_U|_inf` strictly after `t`.
    pub fn unactuated_peak_after(&self, t: f64) -> f64 {
        self.time
            .iter()
            .zip(&self.qd)
            .filter(|(&s, _)| s > t)
            .map(|(_, v)| UNACTUATED.iter().map(|&i| v[i].abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// `|qd_U|_2` at the last sample.
    pub fn unactuated_final(&self) -> f64 {
        self.qd
            .last()
            .map(|v| UNACTUATED.iter().map(|&i| v[i] * v[i]).sum::<f64>())
            .map(libm::sqrt)
            .unwrap_or(0.0)
    }
}

fn channels(v: &QVec) -> V7 {
    V7::from_fn(|i, _| v[CONTROLLED[i]])
}

/// Replay a plan on the plant starting from its first row at rest.
pub fn simulate(p: &HcdrParams, s: &ScenarioConfig, plan: &PlanResult, gains: &ControlGains) -> Result<SimTrace> {
    let q0 = plan.rows.first().map(|r| r.q).unwrap_or_else(QVec::zeros);
    simulate_from(p, s, plan, gains, &q0, &QVec::zeros())
}

/// Replay a plan on the plant from an explicit initial state.
pub fn simulate_from(
    p: &HcdrParams,
    s: &ScenarioConfig,
    plan: &PlanResult,
    gains: &ControlGains,
    q0: &QVec,
    qd0: &QVec,
) -> Result<SimTrace> {
    s.validate()?;
    let ts = s.sample_time;
    let expected = libm::round((s.t_end - s.t_start) / ts) as usize + 1;
    if plan.rows.len() != expected {
        return Err(Error::invalid("plan", "row count does not match the scenario horizon"));
    }
    if (plan.sample_time - ts).abs() > 1e-12 * ts {
        return Err(Error::invalid("plan", "sample time does not match the scenario"));
    }
    let pulses = s.plant_pulses();
    let mut state = ControlState::default();
    let mut q = *q0;
    let mut qd = *qd0;
    let mut tr = SimTrace::default();
    for (r, row) in plan.rows.iter().enumerate() {
        let at = |e: Error| e.at_step(r);
        let time = s.t_start + r as f64 * ts;
        let mut drive = Drive::feed_forward(p, &row.q).map_err(at)?;
        let geom = cable_geometry(p, &q).map_err(at)?;
        let block = lower_block(&reduced_structure_matrix(p, &geom));
        let reference_rates = channels(&row.qd);
        let measured_rates = channels(&qd);
        drive.u = control_step(
            &channels(&row.q),
            &channels(&q),
            Rates::Given {
                reference: &reference_rates,
                measured: &measured_rates,
            },
            &block,
            ts,
            gains,
            &mut state,
        )
        .map_err(at)?;

        tr.time.push(time);
        tr.q.push(q);
        tr.qd.push(qd);
        tr.u.push(drive.u);
        tr.tensions.push(group_tensions(p, &q, &drive).map_err(at)?);
        tr.end_effector.push(forward_kinematics(p, &q).end_effector());
        tr.reference.push(row.end_effector);
        tr.energy.push(mechanical_energy(p, &q, &qd, &drive).map_err(at)?);

        if r + 1 == plan.rows.len() {
            break;
        }
        let (qn, vn) = rk4_step(p, &q, &qd, time, ts, &drive, pulses).map_err(at)?;
        let norm = vn.norm();
        if !norm.is_finite() || norm > BLOW_UP_NORM {
            return Err(Error::BlowUp { step: r + 1, norm });
        }
        q = qn;
        qd = vn;
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::redundancy::plan;
    use crate::Method;

    fn still(t_end: f64) -> (HcdrParams, ScenarioConfig, PlanResult) {
        let p = HcdrParams::reference();
        let mut s = ScenarioConfig::reference_transfer();
        s.t_end = t_end;
        s.waypoints[1].position = s.waypoints[0].position;
        s.disturbances.clear();
        let r = plan(&p, &s, Method::Toauj).unwrap();
        (p, s, r)
    }

    #[test]
    fn home_is_in_equilibrium() {
        let p = HcdrParams::reference();
        let q = QVec::zeros();
        let drive = Drive::feed_forward(&p, &q).unwrap();
        let tau = input_forces(&p, &q, &drive).unwrap();
        let residual = tau - gravity_vector(&p, &q, None).unwrap();
        assert!(residual.amax() < 1e-6, "{residual}");
    }

    #[test]
    fn equilibrium_persists() {
        let (p, s, r) = still(1.0);
        let tr = simulate(&p, &s, &r, &ControlGains::default()).unwrap();
        assert_eq!(tr.len(), r.rows.len());
        let start = Vec3::new(tr.q[0][0], tr.q[0][1], tr.q[0][2]);
        for q in &tr.q {
            assert!((Vec3::new(q[0], q[1], q[2]) - start).norm() < 1e-3);
        }
    }

    #[test]
    fn energy_is_conserved_without_input() {
        let (p, s, r) = still(1.0);
        let mut qd0 = QVec::zeros();
        qd0[0] = 0.01;
        qd0[2] = 0.01;
        qd0[3] = 0.02;
        qd0[6] = 0.1;
        let tr = simulate_from(&p, &s, &r, &ControlGains::default(), &r.rows[0].q, &qd0).unwrap();
        let e0 = tr.energy[0];
        let drift = tr.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
        assert!(drift / e0.abs() < 1e-4, "drift {drift} of {e0}");
    }

    #[test]
    fn rk4_matches_free_fall() {
        // no cables below a platform far from the frame: remove them by
        // zeroing tensions and stiffness, then only gravity acts
        let mut p = HcdrParams::reference();
        p.cables.upper_stiffness = [0.0; 2];
        let drive = Drive {
            unstretched: [1.0; 2],
            lower: [0.0; 2],
            u: V7::zeros(),
        };
        let q = QVec::zeros();
        let mut state = (q, QVec::zeros());
        let h = 1e-3;
        for k in 0..100 {
            state = rk4_step(&p, &state.0, &state.1, k as f64 * h, h, &drive, &[]).unwrap();
        }
        assert!((state.0[1] + 0.5 * p.gravity * 0.01).abs() < 1e-9);
        assert!(state.0[0].abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let (p, s, r) = still(0.01);
        let g = ScenarioConfig::reference_tracking().control;
        assert_eq!(simulate(&p, &s, &r, &g).unwrap(), simulate(&p, &s, &r, &g).unwrap());
    }

    #[test]
    fn wrong_horizon_is_rejected() {
        let (p, s, mut r) = still(0.01);
        r.rows.pop();
        assert!(matches!(
            simulate(&p, &s, &r, &ControlGains::default()),
            Err(Error::Invalid { .. })
        ));
    }

    #[test]
    fn blow_up_is_reported() {
        let (p, s, r) = still(0.01);
        let mut qd0 = QVec::zeros();
        qd0[8] = 2e6;
        let err = simulate_from(&p, &s, &r, &ControlGains::default(), &r.rows[0].q, &qd0).unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 1, .. }), "{err}");
    }

    #[test]
    fn halving_the_step_converges() {
        let p = HcdrParams::reference();
        let run = |ts: f64| {
            let mut s = ScenarioConfig::reference_transfer();
            s.t_end = 0.05;
            s.sample_time = ts;
            s.waypoints[1].position = s.waypoints[0].position;
            s.disturbances.clear();
            let r = plan(&p, &s, Method::Toauj).unwrap();
            let mut qd0 = QVec::zeros();
            qd0[0] = 0.05;
            qd0[3] = 0.05;
            let tr = simulate_from(&p, &s, &r, &ControlGains::default(), &r.rows[0].q, &qd0).unwrap();
            *tr.end_effector.last().unwrap()
        };
        assert!((run(2e-4) - run(1e-4)).norm() < 1e-5);
    }
}
