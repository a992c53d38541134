//! Nominal pendulum angles that cancel the out-of-plane reaction moments
//! of the arm on the platform.

use crate::kinematics::{bodies, rot_x, Chain};
use crate::math::sqrt;
use crate::params::HcdrParams;
use crate::{Mat3, QVec, Vec3};

/// Reaction moments about the platform origin at fixed platform and arm
/// motion, as a function of the two pendulum angles.
#[derive(Debug, Clone)]
pub struct MomentModel {
    rotation: Mat3,
    platform: Vec3,
    /// Platform angular velocity and acceleration (world).
    omega: Vec3,
    alpha: Vec3,
    /// Platform origin acceleration plus gravity compensation.
    accel: Vec3,
    /// Arm contribution (world).
    arm: Vec3,
    pendulum: [(f64, f64, Vec3, Vec3); 2],
    /// Weight of the symmetric-split regularizer.
    pub split_weight: f64,
}

const FD_STEP: f64 = 1e-6;

fn arm_velocities(p: &HcdrParams, q: &QVec, qd: &QVec) -> [(Vec3, Vec3); 3] {
    let chain = Chain::new(p, q);
    let b = bodies(p, &chain);
    [3, 4, 5].map(|i| (b[i].jv * qd, b[i].jw * qd))
}

fn gyroscopic(r: &Mat3, inertia: &Mat3, omega_w: &Vec3, alpha_w: &Vec3) -> Vec3 {
    let w = r.transpose() * omega_w;
    let wd = r.transpose() * alpha_w;
    r * (inertia * wd + w.cross(&(inertia * w)))
}

impl MomentModel {
    /// Build from the full configuration, velocity and acceleration.
    /// Pendulum entries of `qd` and `qdd` are ignored.
    pub fn new(p: &HcdrParams, q: &QVec, qd: &QVec, qdd: &QVec) -> Self {
        let mut qd = *qd;
        let mut qdd = *qdd;
        for k in crate::PENDULUMS {
            qd[k] = 0.0;
            qdd[k] = 0.0;
        }
        let chain = Chain::new(p, q);
        let b = bodies(p, &chain);
        let rotation = chain.pose.rotation;
        let platform = chain.pose.platform;
        let g = Vec3::new(0.0, p.gravity, 0.0);

        let h = FD_STEP;
        let plus = arm_velocities(p, &(q + qd * h), &(qd + qdd * h));
        let minus = arm_velocities(p, &(q - qd * h), &(qd - qdd * h));
        let mut arm = Vec3::zeros();
        for j in 0..3 {
            let body = &b[3 + j];
            let a = (plus[j].0 - minus[j].0) / (2.0 * h);
            let alpha = (plus[j].1 - minus[j].1) / (2.0 * h);
            let omega = body.jw * qd;
            arm += (body.com - platform).cross(&((a + g) * body.mass));
            arm += gyroscopic(&body.rotation, &body.inertia, &omega, &alpha);
        }

        let jw = chain.angular_jacobian(crate::kinematics::Attach::Platform);
        let omega = jw * qd;
        let jw_plus = Chain::new(p, &(q + qd * h)).angular_jacobian(crate::kinematics::Attach::Platform);
        let jw_minus = Chain::new(p, &(q - qd * h)).angular_jacobian(crate::kinematics::Attach::Platform);
        let alpha = jw * qdd + (jw_plus - jw_minus) * qd / (2.0 * h);
        let accel = Vec3::new(qdd[0], qdd[1], qdd[2]) + g;

        let pendulum = [0, 1].map(|k| {
            let pk = &p.pendulums[k];
            (pk.mass, pk.inertia, pk.joint, pk.com)
        });
        let lever = p.pendulums[0].mass * p.gravity * p.pendulums[0].com.norm();
        MomentModel {
            rotation,
            platform,
            omega,
            alpha,
            accel,
            arm,
            pendulum,
            split_weight: lever * lever,
        }
    }

    /// Moment of pendulum `k` at angle `theta` about the platform origin
    /// (world).
    fn pendulum_moment(&self, k: usize, theta: f64) -> Vec3 {
        let (mass, inertia, joint, com) = self.pendulum[k];
        let rk = self.rotation * rot_x(theta);
        let r = self.rotation * joint + rk * com;
        let a = self.accel + self.alpha.cross(&r) + self.omega.cross(&self.omega.cross(&r));
        let i = Mat3::from_diagonal(&Vec3::new(inertia, 0.0, 0.0));
        r.cross(&(a * mass)) + gyroscopic(&rk, &i, &self.omega, &self.alpha)
    }

    /// Total moment resolved on the platform axes; returns `(M_x, M_y)`.
    pub fn moments(&self, theta: [f64; 2]) -> (f64, f64) {
        let total = self.arm + self.pendulum_moment(0, theta[0]) + self.pendulum_moment(1, theta[1]);
        let local = self.rotation.transpose() * total;
        (local.x, local.y)
    }

    /// Arm contribution alone, resolved on the platform axes.
    pub fn arm_moment(&self) -> Vec3 {
        self.rotation.transpose() * self.arm
    }

    pub fn platform(&self) -> Vec3 {
        self.platform
    }

    pub fn objective(&self, theta: [f64; 2]) -> f64 {
        let (mx, my) = self.moments(theta);
        let d = theta[0] - theta[1];
        mx * mx + my * my + self.split_weight * d * d
    }
}

/// Settings of the two-variable simplex search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub initial_step: f64,
    pub max_iterations: usize,
    /// Stop when the simplex diameter falls below this.
    pub x_tolerance: f64,
    /// Stop when every vertex value falls below this.
    pub f_tolerance: f64,
    /// Search box `[-bound, bound]` per coordinate; points outside are
    /// rejected.
    pub bound: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            initial_step: 0.05,
            max_iterations: 200,
            x_tolerance: 1e-10,
            f_tolerance: 1e-24,
            bound: core::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumSolution {
    pub angles: [f64; 2],
    /// Norm of the remaining `(M_x, M_y)` (N m).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

type P2 = [f64; 2];

fn lerp(a: P2, b: P2, t: f64) -> P2 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn dist(a: P2, b: P2) -> f64 {
    sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]))
}

/// Minimize `f` over two variables starting from `x0`. Returns the best
/// vertex, its value, the iteration count and whether a tolerance was met.
pub fn nelder_mead(f: impl Fn(P2) -> f64, x0: P2, s: &NelderMead) -> (P2, f64, usize, bool) {
    let b = s.bound;
    let clip = |x: P2| x.map(|c| c.clamp(-b, b));
    // outside the box counts as infinitely bad, so the simplex contracts
    // back in instead of collapsing onto a projected corner
    let f = |x: P2| {
        if x.iter().all(|c| c.abs() <= b) {
            f(x)
        } else {
            f64::INFINITY
        }
    };
    let x0 = clip(x0);
    let step = if x0[0] + s.initial_step > b {
        -s.initial_step
    } else {
        s.initial_step
    };
    let step1 = if x0[1] + s.initial_step > b {
        -s.initial_step
    } else {
        s.initial_step
    };
    let mut v = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step1]];
    let mut fv = v.map(&f);
    let mut it = 0;
    loop {
        // sort ascending, stable so ties keep the earlier vertex
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        v = idx.map(|i| v[i]);
        fv = idx.map(|i| fv[i]);
        let diameter = dist(v[0], v[1]).max(dist(v[0], v[2]));
        if fv[2] <= s.f_tolerance || diameter <= s.x_tolerance {
            return (v[0], fv[0], it, true);
        }
        if it >= s.max_iterations {
            return (v[0], fv[0], it, false);
        }
        it += 1;
        let c = lerp(v[0], v[1], 0.5);
        let xr = lerp(v[2], c, 2.0);
        let fr = f(xr);
        if fr < fv[0] {
            let xe = lerp(v[2], c, 3.0);
            let fe = f(xe);
            if fe < fr {
                v[2] = xe;
                fv[2] = fe;
            } else {
                v[2] = xr;
                fv[2] = fr;
            }
        } else if fr < fv[1] {
            v[2] = xr;
            fv[2] = fr;
        } else {
            let (xc, fc) = if fr < fv[2] {
                let x = lerp(v[2], c, 1.5);
                (x, f(x))
            } else {
                let x = lerp(v[2], c, 0.5);
                (x, f(x))
            };
            if fc < fv[2].min(fr) {
                v[2] = xc;
                fv[2] = fc;
            } else {
                for i in 1..3 {
                    v[i] = lerp(v[0], v[i], 0.5);
                    fv[i] = f(v[i]);
                }
            }
        }
    }
}

/// Pendulum angles minimizing the squared out-of-plane moments plus the
/// symmetric-split term, starting from `start`.
pub fn equilibrium(model: &MomentModel, start: [f64; 2], settings: &NelderMead) -> PendulumSolution {
    let (angles, _, iterations, converged) = nelder_mead(|t| model.objective(t), start, settings);
    let (mx, my) = model.moments(angles);
    PendulumSolution {
        angles,
        residual: sqrt(mx * mx + my * my),
        iterations,
        converged,
    }
}

/// Angles from the static balance in closed form when it is solvable:
/// both pendulums take `asin` of half the arm roll moment over the
/// pendulum lever. Only valid for a level, static platform.
pub fn static_symmetric(p: &HcdrParams, arm_roll: f64) -> Option<f64> {
    let pk = &p.pendulums[0];
    let lever = pk.mass * p.gravity * pk.com.norm();
    let s = -arm_roll / (2.0 * lever);
    (s.abs() <= 1.0).then(|| libm::asin(s))
}
