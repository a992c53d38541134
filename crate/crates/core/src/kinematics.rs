//! Rotation chain, body positions and velocities, cable geometry and the
//! end-effector task Jacobian.
//!
//! Platform orientation is the x-y'-z'' Euler sequence. Pendulums hinge
//! about the platform x axis; arm joint 1 turns about the platform y axis,
//! joints 2 and 3 about the z axis of the preceding link. Gravity acts
//! along -y.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::math::{cos, sin, sqrt};
use crate::params::HcdrParams;
use crate::{Mat3, QVec, Vec3, NQ};

/// Linear or angular Jacobian of one point or body (3x11).
pub type Jac = SMatrix<f64, 3, NQ>;
/// End-effector Jacobian restricted to the actuated coordinates.
pub type TaskJac = SMatrix<f64, 3, 5>;
pub type Structure = SMatrix<f64, 6, 12>;

/// Cables shorter than this are treated as degenerate.
pub const MIN_CABLE_LENGTH: f64 = 1e-9;

pub fn rot_x(t: f64) -> Mat3 {
    let (s, c) = (sin(t), cos(t));
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(t: f64) -> Mat3 {
    let (s, c) = (sin(t), cos(t));
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(t: f64) -> Mat3 {
    let (s, c) = (sin(t), cos(t));
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn platform_rotation(q: &QVec) -> Mat3 {
    rot_x(q[3]) * rot_y(q[4]) * rot_z(q[5])
}

/// World-frame axes of the three Euler rates.
pub fn euler_axes(q: &QVec) -> [Vec3; 3] {
    let rx = rot_x(q[3]);
    let rxy = rx * rot_y(q[4]);
    [Vec3::x(), rx * Vec3::y(), rxy * Vec3::z()]
}

/// Platform angular velocity in the platform frame.
pub fn body_angular_velocity(q: &QVec, qd: &QVec) -> Vec3 {
    let rz = rot_z(q[5]);
    let ry = rot_y(q[4]);
    let r = platform_rotation(q);
    r.transpose() * Vec3::new(qd[3], 0.0, 0.0)
        + rz.transpose() * ry.transpose() * Vec3::new(0.0, qd[4], 0.0)
        + rz.transpose() * Vec3::new(0.0, 0.0, qd[5])
}

/// Positions (world) and orientations of every body at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePose {
    pub rotation: Mat3,
    pub platform: Vec3,
    pub pendulum_joint: [Vec3; 2],
    pub pendulum_com: [Vec3; 2],
    pub pendulum_rotation: [Mat3; 2],
    /// Arm base, then the distal joint of each link; the last is the
    /// end effector.
    pub arm_joint: [Vec3; 4],
    pub arm_com: [Vec3; 3],
    pub arm_rotation: [Mat3; 3],
}

impl FramePose {
    pub fn end_effector(&self) -> Vec3 {
        self.arm_joint[3]
    }
}

pub fn forward_kinematics(p: &HcdrParams, q: &QVec) -> FramePose {
    let r = platform_rotation(q);
    let pm = Vec3::new(q[0], q[1], q[2]);
    let mut pendulum_joint = [Vec3::zeros(); 2];
    let mut pendulum_com = [Vec3::zeros(); 2];
    let mut pendulum_rotation = [Mat3::identity(); 2];
    for k in 0..2 {
        let pk = &p.pendulums[k];
        let rk = r * rot_x(q[6 + k]);
        pendulum_joint[k] = pm + r * pk.joint;
        pendulum_com[k] = pendulum_joint[k] + rk * pk.com;
        pendulum_rotation[k] = rk;
    }
    let r1 = r * rot_y(q[8]);
    let r2 = r1 * rot_z(q[9]);
    let r3 = r2 * rot_z(q[10]);
    let arm_rotation = [r1, r2, r3];
    let mut arm_joint = [pm + r * p.platform.arm_base; 4];
    let mut arm_com = [Vec3::zeros(); 3];
    for j in 0..3 {
        arm_com[j] = arm_joint[j] + arm_rotation[j] * p.arm[j].com;
        arm_joint[j + 1] = arm_joint[j] + arm_rotation[j] * p.arm[j].joint;
    }
    FramePose {
        rotation: r,
        platform: pm,
        pendulum_joint,
        pendulum_com,
        pendulum_rotation,
        arm_joint,
        arm_com,
        arm_rotation,
    }
}

/// Which kinematic subtree a point is rigidly attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attach {
    Platform,
    Pendulum(usize),
    /// Arm link 0..=2.
    Arm(usize),
}

/// Joint axes and origins of the whole tree at one configuration.
#[derive(Debug, Clone)]
pub struct Chain {
    pub pose: FramePose,
    pub euler: [Vec3; 3],
    pub pendulum_axis: Vec3,
    /// Arm joint axes in world coordinates.
    pub arm_axis: [Vec3; 3],
}

impl Chain {
    pub fn new(p: &HcdrParams, q: &QVec) -> Self {
        let pose = forward_kinematics(p, q);
        let euler = euler_axes(q);
        let pendulum_axis = pose.rotation * Vec3::x();
        let arm_axis = [
            pose.rotation * Vec3::y(),
            pose.arm_rotation[0] * Vec3::z(),
            pose.arm_rotation[1] * Vec3::z(),
        ];
        Chain {
            pose,
            euler,
            pendulum_axis,
            arm_axis,
        }
    }

    /// Linear velocity Jacobian of a world point carried by `attach`.
    pub fn point_jacobian(&self, point: &Vec3, attach: Attach) -> Jac {
        let mut j = Jac::zeros();
        for i in 0..3 {
            j[(i, i)] = 1.0;
        }
        let rel = point - self.pose.platform;
        for a in 0..3 {
            j.set_column(3 + a, &self.euler[a].cross(&rel));
        }
        match attach {
            Attach::Platform => {}
            Attach::Pendulum(k) => {
                let col = self.pendulum_axis.cross(&(point - self.pose.pendulum_joint[k]));
                j.set_column(6 + k, &col);
            }
            Attach::Arm(link) => {
                for a in 0..=link {
                    let col = self.arm_axis[a].cross(&(point - self.pose.arm_joint[a]));
                    j.set_column(8 + a, &col);
                }
            }
        }
        j
    }

    /// World angular velocity Jacobian of a body.
    pub fn angular_jacobian(&self, attach: Attach) -> Jac {
        let mut j = Jac::zeros();
        for a in 0..3 {
            j.set_column(3 + a, &self.euler[a]);
        }
        match attach {
            Attach::Platform => {}
            Attach::Pendulum(k) => j.set_column(6 + k, &self.pendulum_axis),
            Attach::Arm(link) => {
                for a in 0..=link {
                    j.set_column(8 + a, &self.arm_axis[a]);
                }
            }
        }
        j
    }
}

/// Mass properties and Jacobians of one rigid body.
#[derive(Debug, Clone)]
pub struct Body {
    pub mass: f64,
    /// Inertia tensor about the COM in the body frame.
    pub inertia: Mat3,
    pub rotation: Mat3,
    pub com: Vec3,
    pub jv: Jac,
    /// World angular velocity Jacobian.
    pub jw: Jac,
}

/// The six bodies: platform, pendulums 1 and 2, arm links 1..3.
pub fn bodies(p: &HcdrParams, chain: &Chain) -> [Body; 6] {
    let pose = &chain.pose;
    let make = |mass: f64, inertia: Mat3, rotation: Mat3, com: Vec3, attach: Attach| Body {
        mass,
        inertia,
        rotation,
        com,
        jv: chain.point_jacobian(&com, attach),
        jw: chain.angular_jacobian(attach),
    };
    let pend = |k: usize| {
        let pk = &p.pendulums[k];
        make(
            pk.mass,
            Mat3::from_diagonal(&Vec3::new(pk.inertia, 0.0, 0.0)),
            pose.pendulum_rotation[k],
            pose.pendulum_com[k],
            Attach::Pendulum(k),
        )
    };
    let link = |j: usize| {
        let l = &p.arm[j];
        make(
            l.mass,
            Mat3::from_diagonal(&l.inertia),
            pose.arm_rotation[j],
            pose.arm_com[j],
            Attach::Arm(j),
        )
    };
    [
        make(
            p.platform.mass,
            Mat3::from_diagonal(&p.platform.inertia),
            pose.rotation,
            pose.platform,
            Attach::Platform,
        ),
        pend(0),
        pend(1),
        link(0),
        link(1),
        link(2),
    ]
}

/// Body-frame angular velocities and world COM velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRates {
    pub platform_omega: Vec3,
    pub platform_velocity: Vec3,
    pub pendulum_omega: [Vec3; 2],
    pub pendulum_velocity: [Vec3; 2],
    pub arm_omega: [Vec3; 3],
    pub arm_velocity: [Vec3; 3],
    pub end_effector_velocity: Vec3,
}

pub fn frame_rates(p: &HcdrParams, q: &QVec, qd: &QVec) -> FrameRates {
    let chain = Chain::new(p, q);
    let b = bodies(p, &chain);
    let omega = |i: usize| b[i].rotation.transpose() * (b[i].jw * qd);
    let vel = |i: usize| b[i].jv * qd;
    let ee = chain.point_jacobian(&chain.pose.end_effector(), Attach::Arm(2)) * qd;
    FrameRates {
        platform_omega: omega(0),
        platform_velocity: vel(0),
        pendulum_omega: [omega(1), omega(2)],
        pendulum_velocity: [vel(1), vel(2)],
        arm_omega: [omega(3), omega(4), omega(5)],
        arm_velocity: [vel(3), vel(4), vel(5)],
        end_effector_velocity: ee,
    }
}

/// End-effector Jacobian over all coordinates.
pub fn end_effector_jacobian(p: &HcdrParams, q: &QVec) -> Jac {
    let chain = Chain::new(p, q);
    chain.point_jacobian(&chain.pose.end_effector(), Attach::Arm(2))
}

pub fn select_actuated(j: &Jac) -> TaskJac {
    let mut out = TaskJac::zeros();
    for (c, &i) in crate::ACTUATED.iter().enumerate() {
        out.set_column(c, &j.column(i));
    }
    out
}

/// `d p_e / d q_A`.
pub fn task_jacobian(p: &HcdrParams, q: &QVec) -> TaskJac {
    select_actuated(&end_effector_jacobian(p, q))
}

/// Time derivative of [`task_jacobian`] along the motion `(q, qd)`.
pub fn task_jacobian_dot(p: &HcdrParams, q: &QVec, qd: &QVec) -> TaskJac {
    let chain = Chain::new(p, q);
    let pe = chain.pose.end_effector();
    let ve = chain.point_jacobian(&pe, Attach::Arm(2)) * qd;
    let parent_omega = [
        chain.angular_jacobian(Attach::Platform) * qd,
        chain.angular_jacobian(Attach::Arm(0)) * qd,
        chain.angular_jacobian(Attach::Arm(1)) * qd,
    ];
    let origin_attach = [Attach::Platform, Attach::Arm(0), Attach::Arm(1)];
    let mut out = TaskJac::zeros();
    for a in 0..3 {
        let z = chain.arm_axis[a];
        let o = chain.pose.arm_joint[a];
        let zd = parent_omega[a].cross(&z);
        let vo = chain.point_jacobian(&o, origin_attach[a]) * qd;
        out.set_column(2 + a, &(zd.cross(&(pe - o)) + z.cross(&(ve - vo))));
    }
    out
}

/// Cable vectors, lengths and the 6x12 structure matrix.
#[derive(Debug, Clone)]
pub struct CableGeometry {
    pub lengths: SVector<f64, 12>,
    /// Unit vectors from the platform anchor towards the frame anchor.
    pub unit: [Vec3; 12],
    /// Platform anchors relative to the platform origin, world axes.
    pub arm: [Vec3; 12],
    /// Columns `[u_i; (R r_i) x u_i]`: force and moment about the
    /// platform origin per unit tension.
    pub structure: Structure,
    /// World axes of the platform Euler rates.
    pub euler: [Vec3; 3],
}

pub fn cable_geometry(p: &HcdrParams, q: &QVec) -> Result<CableGeometry> {
    let r = platform_rotation(q);
    let pm = Vec3::new(q[0], q[1], q[2]);
    let mut lengths = SVector::<f64, 12>::zeros();
    let mut unit = [Vec3::zeros(); 12];
    let mut arm = [Vec3::zeros(); 12];
    let mut structure = Structure::zeros();
    for (i, a) in p.cables.anchors.iter().enumerate() {
        let rr = r * a.platform;
        let v = a.frame - pm - rr;
        let len = sqrt(v.dot(&v));
        if !(len > MIN_CABLE_LENGTH) {
            return Err(Error::DegenerateCable {
                index: i + 1,
                length: len,
            });
        }
        let u = v / len;
        lengths[i] = len;
        unit[i] = u;
        arm[i] = rr;
        let m = rr.cross(&u);
        structure.fixed_view_mut::<3, 1>(0, i).copy_from(&u);
        structure.fixed_view_mut::<3, 1>(3, i).copy_from(&m);
    }
    Ok(CableGeometry {
        lengths,
        unit,
        arm,
        structure,
        euler: euler_axes(q),
    })
}

impl CableGeometry {
    /// Generalized forces on the platform coordinates produced by the
    /// given per-cable tensions.
    pub fn generalized_forces(&self, tensions: &SVector<f64, 12>) -> QVec {
        let w = self.structure * tensions;
        let f = Vec3::new(w[0], w[1], w[2]);
        let m = Vec3::new(w[3], w[4], w[5]);
        let mut out = QVec::zeros();
        out[0] = f[0];
        out[1] = f[1];
        out[2] = f[2];
        for a in 0..3 {
            out[3 + a] = self.euler[a].dot(&m);
        }
        out
    }

    /// `d L_i / d q` for the platform coordinates.
    pub fn length_gradient(&self, i: usize) -> QVec {
        let u = self.unit[i];
        let mut g = QVec::zeros();
        for a in 0..3 {
            g[a] = -u[a];
            g[3 + a] = -self.euler[a].dot(&self.arm[i].cross(&u));
        }
        g
    }
}
