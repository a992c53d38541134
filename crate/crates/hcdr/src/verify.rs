//! Invariant battery run by `hcdr verify`.

use hcdr_core::cable_tension::{distribute, optimal_tensions, saturated_branch, weight_wrench};
use hcdr_core::dynamics::{coriolis_matrix, gravity_potential, gravity_vector, kinetic_energy, mass_matrix};
use hcdr_core::kinematics::{forward_kinematics, frame_rates, task_jacobian};
use hcdr_core::redundancy::pseudo_inverse;
use hcdr_core::{HcdrParams, QVec, Result as CoreResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst residual seen over the samples.
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Why the property failed, when it did.
    pub detail: Option<String>,
}

/// Sampling controls.
#[derive(Debug, Clone, Copy)]
pub struct Battery {
    pub seed: u64,
    pub states: usize,
    pub grid: usize,
}

impl Default for Battery {
    fn default() -> Self {
        Battery {
            seed: 7,
            states: 100,
            grid: 20,
        }
    }
}

pub const PROPERTIES: [&str; 7] = [
    "inertia_spd",
    "coriolis_skew_symmetry",
    "gravity_gradient",
    "kinetic_energy_form",
    "kinematic_rates",
    "projector_identities",
    "tension_feasibility",
];

/// Random configuration and velocity inside the working ranges.
pub fn random_state(rng: &mut impl Rng) -> (QVec, QVec) {
    let mut q = QVec::zeros();
    q[0] = rng.random_range(-0.5..0.5);
    q[1] = rng.random_range(-0.2..0.2);
    q[2] = rng.random_range(-0.05..0.05);
    q[3] = rng.random_range(-0.3..0.3);
    q[4] = rng.random_range(-0.3..0.3);
    for i in 6..11 {
        q[i] = rng.random_range(-1.5..1.5);
    }
    let mut qd = QVec::zeros();
    for i in 0..11 {
        if i != 5 {
            qd[i] = rng.random_range(-1.0..1.0);
        }
    }
    (q, qd)
}

struct Tally {
    worst: f64,
    samples: usize,
    failure: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            worst: 0.0,
            samples: 0,
            failure: None,
        }
    }

    fn see(&mut self, v: f64) {
        self.samples += 1;
        if v.is_nan() || v > self.worst {
            self.worst = if v.is_nan() { f64::INFINITY } else { v };
        }
    }

    fn fail(&mut self, why: String) {
        self.failure.get_or_insert(why);
    }

    fn finish(self, name: &'static str, tolerance: f64) -> PropertyResult {
        let passed = self.failure.is_none() && self.worst <= tolerance;
        let detail = self
            .failure
            .or_else(|| (!passed).then(|| format!("worst {:.3e} above {:.1e}", self.worst, tolerance)));
        PropertyResult {
            name,
            passed,
            worst: self.worst,
            tolerance,
            samples: self.samples,
            detail,
        }
    }
}

fn states(b: &Battery, salt: u64) -> Vec<(QVec, QVec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed ^ salt);
    (0..b.states).map(|_| random_state(&mut rng)).collect()
}

fn inertia_spd(p: &HcdrParams, b: &Battery) -> PropertyResult {
    let mut t = Tally::new();
    for (q, _) in states(b, 1) {
        let m = mass_matrix(p, &q);
        t.see((m - m.transpose()).amax());
        let min = m.symmetric_eigenvalues().min();
        if !(min > 0.0) {
            t.fail(format!("eigenvalue {min:e} at q = {:?}", q.as_slice()));
        }
    }
    t.finish("inertia_spd", 1e-12)
}

fn coriolis_skew(p: &HcdrParams, b: &Battery) -> PropertyResult {
    let mut t = Tally::new();
    let h = 1e-6;
    for (q, qd) in states(b, 2) {
        let mdot = (mass_matrix(p, &(q + qd * h)) - mass_matrix(p, &(q - qd * h))) / (2.0 * h);
        let c = coriolis_matrix(p, &q, &qd);
        t.see(qd.dot(&((mdot - c * 2.0) * qd)).abs());
    }
    t.finish("coriolis_skew_symmetry", 1e-6)
}

fn gravity_gradient(p: &HcdrParams, b: &Battery) -> PropertyResult {
    let mut t = Tally::new();
    let h = 1e-6;
    for (q, _) in states(b, 3) {
        let g = match gravity_vector(p, &q, None) {
            Ok(g) => g,
            Err(e) => {
                t.fail(e.to_string());
                continue;
            }
        };
        let scale = g.amax().max(1e-12);
        for k in 0..11 {
            let mut a = q;
            let mut c = q;
            a[k] += h;
            c[k] -= h;
            let fd = (gravity_potential(p, &a) - gravity_potential(p, &c)) / (2.0 * h);
            t.see((g[k] - fd).abs() / scale);
        }
    }
    t.finish("gravity_gradient", 1e-5)
}

fn kinetic_form(p: &HcdrParams, b: &Battery) -> PropertyResult {
    let mut t = Tally::new();
    for (q, qd) in states(b, 4) {
        let k = kinetic_energy(p, &q, &qd);
        let quad = 0.5 * qd.dot(&(mass_matrix(p, &q) * qd));
        t.see((k - quad).abs() / k.abs().max(1e-12));
    }
    t.finish("kinetic_energy_form", 1e-9)
}

fn kinematic_rates(p: &HcdrParams, b: &Battery) -> PropertyResult {
    let mut t = Tally::new();
    let h = 1e-7;
    for (q, qd) in states(b, 5) {
        let r = frame_rates(p, &q, &qd);
        let a = forward_kinematics(p, &(q + qd * h));
        let c = forward_kinematics(p, &(q - qd * h));
        let fd = |x: nalgebra::Vector3<f64>, y: nalgebra::Vector3<f64>| (x - y) / (2.0 * h);
        t.see((r.platform_velocity - fd(a.platform, c.platform)).amax());
        t.see((r.end_effector_velocity - fd(a.end_effector(), c.end_effector())).amax());
        for j in 0..3 {
            t.see((r.arm_velocity[j] - fd(a.arm_com[j], c.arm_com[j])).amax());
        }
        for k in 0..2 {
            t.see((r.pendulum_velocity[k] - fd(a.pendulum_com[k], c.pendulum_com[k])).amax());
        }
    }
    t.finish("kinematic_rates", 1e-5)
}

fn projector_identities(p: &HcdrParams, b: &Battery) -> PropertyResult {
    let mut t = Tally::new();
    for (q, _) in states(b, 6) {
        let j = task_jacobian(p, &q);
        let pi = pseudo_inverse(&j);
        let x = pi.pinv;
        let n = pi.null_projector(&j);
        t.see((j * x * j - j).amax());
        t.see((x * j * x - x).amax() / x.amax().max(1.0));
        t.see(((j * x).transpose() - j * x).amax());
        t.see(((x * j).transpose() - x * j).amax());
        t.see((n * n - n).amax());
        t.see((j * n).amax());
    }
    t.finish("projector_identities", 1e-10)
}

/// Both saturation branches solved directly; the admissible one keeps
/// every tension nonnegative and the other lower group at or below the
/// limit.
fn brute_force_branch(a: &hcdr_core::cable_tension::Reduced, w: &nalgebra::Vector3<f64>, t_max: f64) -> Option<usize> {
    (2..4).find(|&sat| {
        let free: Vec<usize> = (0..4).filter(|&i| i != sat).collect();
        let m = nalgebra::Matrix3::from_fn(|r, c| a[(r, free[c])]);
        let rhs = w - a.column(sat) * t_max;
        match m.lu().solve(&rhs) {
            Some(x) => x.min() >= -1e-9 && x[2] <= t_max + 1e-9,
            None => false,
        }
    })
}

/// Planar grid over x in [-0.4, 0.4], y in [-0.2, 0.2]; every pose must
/// have a feasible distribution.
fn tension_feasibility(p: &HcdrParams, b: &Battery) -> PropertyResult {
    let mut t = Tally::new();
    let w = weight_wrench(p);
    let t_max = p.cables.max_lower_tension;
    let n = b.grid.max(2);
    for ix in 0..n {
        for iy in 0..n {
            let mut q = QVec::zeros();
            q[0] = -0.4 + 0.8 * ix as f64 / (n - 1) as f64;
            q[1] = -0.2 + 0.4 * iy as f64 / (n - 1) as f64;
            let sol: CoreResult<_> = optimal_tensions(p, &q);
            let sol = match sol {
                Ok(s) => s,
                Err(e) => {
                    t.fail(format!("pose ({:.3}, {:.3}): {e}", q[0], q[1]));
                    continue;
                }
            };
            t.see((sol.reduced * sol.tensions - w).amax());
            if sol.tensions.min() < 0.0 {
                t.fail(format!("negative tension at ({:.3}, {:.3})", q[0], q[1]));
            }
            let at_max = (2..4).filter(|&g| sol.tensions[g] == t_max).count();
            // both groups at the limit only on a mirror-symmetric tie,
            // where the two branches must give the same tensions
            let tie = at_max == 2
                && match (
                    saturated_branch(&sol.reduced, &w, t_max, 2),
                    saturated_branch(&sol.reduced, &w, t_max, 3),
                ) {
                    (Ok(a), Ok(b)) => (a - b).amax() <= 1e-9,
                    _ => false,
                };
            if at_max != 1 && !tie {
                t.fail(format!(
                    "{at_max} lower groups at the limit at ({:.3}, {:.3})",
                    q[0], q[1]
                ));
            }
            if brute_force_branch(&sol.reduced, &w, t_max) != Some(sol.saturated) {
                t.fail(format!("branch differs from enumeration at ({:.3}, {:.3})", q[0], q[1]));
            }
            if distribute(&sol.reduced, &w, t_max).map(|d| d.0) != Ok(sol.tensions) {
                t.fail("distribution is not reproducible".into());
            }
        }
    }
    t.finish("tension_feasibility", 1e-9)
}

/// Run every property. `jobs > 1` spreads them over threads; results keep
/// the order of [`PROPERTIES`].
pub fn run_battery(p: &HcdrParams, b: &Battery, jobs: usize) -> Vec<PropertyResult> {
    type Prop = fn(&HcdrParams, &Battery) -> PropertyResult;
    let props: [Prop; 7] = [
        inertia_spd,
        coriolis_skew,
        gravity_gradient,
        kinetic_form,
        kinematic_rates,
        projector_identities,
        tension_feasibility,
    ];
    if jobs <= 1 {
        return props.iter().map(|f| f(p, b)).collect();
    }
    let mut out: Vec<Option<PropertyResult>> = vec![None; props.len()];
    std::thread::scope(|s| {
        for (chunk, slots) in props
            .chunks(props.len().div_ceil(jobs))
            .zip(out.chunks_mut(props.len().div_ceil(jobs)))
        {
            s.spawn(move || {
                for (f, slot) in chunk.iter().zip(slots.iter_mut()) {
                    *slot = Some(f(p, b));
                }
            });
        }
    });
    out.into_iter().map(|r| r.expect("every property ran")).collect()
}
