//! Inertia, Coriolis and gravity terms of the whole-body model
//! `M(q) qdd + C(q, qd) qd + G(q) + tau_d = tau`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::kinematics::{bodies, cable_geometry, Chain};
use crate::params::HcdrParams;
use crate::{QMat, QVec, ACTUATED, NQ, REDUCED, UNACTUATED, YAW};

/// Step used for the inertia derivatives.
pub const INERTIA_FD_STEP: f64 = 1e-6;

/// Positions of the actuated block inside the 8x8 reduced inertia.
pub const REDUCED_ACTUATED: [usize; 5] = [0, 1, 5, 6, 7];
/// Positions of the unactuated block inside the 8x8 reduced inertia.
pub const REDUCED_UNACTUATED: [usize; 3] = [2, 3, 4];

pub fn mass_matrix(p: &HcdrParams, q: &QVec) -> QMat {
    let chain = Chain::new(p, q);
    let mut m = QMat::zeros();
    for b in bodies(p, &chain) {
        let world_inertia = b.rotation * b.inertia * b.rotation.transpose();
        m += b.jv.transpose() * b.jv * b.mass + b.jw.transpose() * world_inertia * b.jw;
    }
    // exact symmetry
    (m + m.transpose()) * 0.5
}

/// Kinetic energy summed body by body from COM velocities and body-frame
/// angular velocities.
pub fn kinetic_energy(p: &HcdrParams, q: &QVec, qd: &QVec) -> f64 {
    let chain = Chain::new(p, q);
    bodies(p, &chain)
        .iter()
        .map(|b| {
            let v = b.jv * qd;
            let w = b.rotation.transpose() * (b.jw * qd);
            0.5 * b.mass * v.dot(&v) + 0.5 * w.dot(&(b.inertia * w))
        })
        .sum()
}

pub fn gravity_potential(p: &HcdrParams, q: &QVec) -> f64 {
    let chain = Chain::new(p, q);
    bodies(p, &chain).iter().map(|b| b.mass * p.gravity * b.com[1]).sum()
}

/// Elastic energy of the twelve cables with unstretched lengths `l0`.
/// Slack cables store nothing.
pub fn cable_potential(p: &HcdrParams, q: &QVec, l0: &SVector<f64, 12>) -> Result<f64> {
    let geom = cable_geometry(p, q)?;
    Ok((0..12)
        .map(|i| {
            let stretch = (geom.lengths[i] - l0[i]).max(0.0);
            0.5 * p.cable_stiffness(i) / l0[i] * stretch * stretch
        })
        .sum())
}

/// Gravity plus cable elastic energy.
pub fn potential_energy(p: &HcdrParams, q: &QVec, l0: &SVector<f64, 12>) -> Result<f64> {
    Ok(gravity_potential(p, q) + cable_potential(p, q, l0)?)
}

/// `dV/dq`. The cable elastic term is included only when unstretched
/// lengths are given; in the equations of motion cable forces enter on
/// the right-hand side instead.
pub fn gravity_vector(p: &HcdrParams, q: &QVec, cables: Option<&SVector<f64, 12>>) -> Result<QVec> {
    let chain = Chain::new(p, q);
    let mut g = QVec::zeros();
    for b in bodies(p, &chain) {
        g += b.jv.row(1).transpose() * (b.mass * p.gravity);
    }
    if let Some(l0) = cables {
        let geom = cable_geometry(p, q)?;
        for i in 0..12 {
            let tension = p.cable_stiffness(i) / l0[i] * (geom.lengths[i] - l0[i]).max(0.0);
            g += geom.length_gradient(i) * tension;
        }
    }
    Ok(g)
}

/// `dM/dq_k` for every coordinate by central differences. The inertia
/// does not depend on the platform position, so those slices are zero.
pub fn mass_matrix_derivatives(p: &HcdrParams, q: &QVec) -> [QMat; NQ] {
    let mut out = [QMat::zeros(); NQ];
    let h = INERTIA_FD_STEP;
    for (k, slot) in out.iter_mut().enumerate().skip(3) {
        let mut qp = *q;
        let mut qm = *q;
        qp[k] += h;
        qm[k] -= h;
        *slot = (mass_matrix(p, &qp) - mass_matrix(p, &qm)) / (2.0 * h);
    }
    out
}

/// Coriolis matrix from Christoffel symbols of the first kind.
pub fn coriolis_matrix(p: &HcdrParams, q: &QVec, qd: &QVec) -> QMat {
    coriolis_from_derivatives(&mass_matrix_derivatives(p, q), qd)
}

pub fn coriolis_from_derivatives(dm: &[QMat; NQ], qd: &QVec) -> QMat {
    let mut c = QMat::zeros();
    for i in 0..NQ {
        for j in 0..NQ {
            let mut s = 0.0;
            for k in 0..NQ {
                s += (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * qd[k];
            }
            c[(i, j)] = 0.5 * s;
        }
    }
    c
}

/// `C(q, qd) qd` without forming `C`.
pub fn coriolis_forces(p: &HcdrParams, q: &QVec, qd: &QVec) -> QVec {
    let dm = mass_matrix_derivatives(p, q);
    let mut mdot = QMat::zeros();
    for k in 0..NQ {
        mdot += dm[k] * qd[k];
    }
    let mut out = mdot * qd;
    for i in 0..NQ {
        out[i] -= 0.5 * qd.dot(&(dm[i] * qd));
    }
    out
}

fn cholesky_solve(m: QMat, rhs: QVec, what: &'static str) -> Result<QVec> {
    match m.cholesky() {
        Some(c) => Ok(c.solve(&rhs)),
        None => Err(Error::Singular {
            what,
            condition: condition_estimate(&m),
        }),
    }
}

/// Ratio of the largest to the smallest absolute diagonal entry. Cheap
/// diagnostic only.
pub fn condition_estimate<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    let d = m.diagonal();
    let hi = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let lo = d.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    hi / lo
}

/// `qdd = M^-1 (tau - C qd - G - tau_d)` with gravity only in `G`.
pub fn forward_dynamics(p: &HcdrParams, q: &QVec, qd: &QVec, tau: &QVec, tau_d: &QVec) -> Result<QVec> {
    let rhs = tau - coriolis_forces(p, q, qd) - gravity_vector(p, q, None)? - tau_d;
    cholesky_solve(mass_matrix(p, q), rhs, "inertia matrix")
}

/// Generalized forces that produce `qdd`.
pub fn inverse_dynamics(p: &HcdrParams, q: &QVec, qd: &QVec, qdd: &QVec, tau_d: &QVec) -> Result<QVec> {
    Ok(mass_matrix(p, q) * qdd + coriolis_forces(p, q, qd) + gravity_vector(p, q, None)? + tau_d)
}

/// Inertia and bias blocks of the actuated/unactuated coupled model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTerms {
    /// Inertia over q indices `[0..5, 8..11]`.
    pub m_au: SMatrix<f64, 8, 8>,
    pub m_aa: SMatrix<f64, 5, 5>,
    pub m_a_u: SMatrix<f64, 5, 3>,
    pub m_u_a: SMatrix<f64, 3, 5>,
    pub m_uu: SMatrix<f64, 3, 3>,
    pub f_a: SVector<f64, 5>,
    pub f_u: SVector<f64, 3>,
    /// Gravity plus disturbance on the actuated rows.
    pub g_a: SVector<f64, 5>,
}

/// Extract the 8x8 inertia, its blocks and the bias vectors
/// `F_A = C_AA qd_A + (G + tau_d)_A`, `F_U = C_UU qd_U + (G + tau_d)_U`.
/// `qd` is the previous-step velocity; cable forces are not part of `G`.
pub fn reduced_terms(p: &HcdrParams, q: &QVec, qd: &QVec, tau_d: &QVec) -> Result<ReducedTerms> {
    if q[YAW] != 0.0 {
        return Err(Error::invalid("q", "yaw must be zero in the reduced model"));
    }
    let m = mass_matrix(p, q);
    let c = coriolis_matrix(p, q, qd);
    let bias = gravity_vector(p, q, None)? + tau_d;
    let m_au = SMatrix::<f64, 8, 8>::from_fn(|i, j| m[(REDUCED[i], REDUCED[j])]);
    let (ra, ru) = (REDUCED_ACTUATED, REDUCED_UNACTUATED);
    let qd_a = SVector::<f64, 5>::from_fn(|i, _| qd[ACTUATED[i]]);
    let qd_u = SVector::<f64, 3>::from_fn(|i, _| qd[UNACTUATED[i]]);
    let c_aa = SMatrix::<f64, 5, 5>::from_fn(|i, j| c[(ACTUATED[i], ACTUATED[j])]);
    let c_uu = SMatrix::<f64, 3, 3>::from_fn(|i, j| c[(UNACTUATED[i], UNACTUATED[j])]);
    let g_a = SVector::<f64, 5>::from_fn(|i, _| bias[ACTUATED[i]]);
    let g_u = SVector::<f64, 3>::from_fn(|i, _| bias[UNACTUATED[i]]);
    Ok(ReducedTerms {
        m_au,
        m_aa: SMatrix::from_fn(|i, j| m_au[(ra[i], ra[j])]),
        m_a_u: SMatrix::from_fn(|i, j| m_au[(ra[i], ru[j])]),
        m_u_a: SMatrix::from_fn(|i, j| m_au[(ru[i], ra[j])]),
        m_uu: SMatrix::from_fn(|i, j| m_au[(ru[i], ru[j])]),
        f_a: c_aa * qd_a + g_a,
        f_u: c_uu * qd_u + g_u,
        g_a,
    })
}
