//! Four-actuator equivalent of the twelve-cable platform and its
//! closed-form tension distribution.
//!
//! Groups are ordered (upper-right, upper-left, lower-right, lower-left);
//! the two upper groups are length-controlled, the lower ones
//! tension-controlled. Every member of a group carries the group tension.

use nalgebra::{SMatrix, SVector, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::kinematics::{cable_geometry, CableGeometry};
use crate::params::HcdrParams;
use crate::{QVec, Vec3};

pub type Reduced = SMatrix<f64, 3, 4>;

/// Tension systems worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct CableSolution {
    /// Rows (F_x, F_y, M_z), one column per group.
    pub reduced: Reduced,
    pub tensions: Vector4<f64>,
    /// Unstretched lengths of the two upper groups (m).
    pub unstretched: [f64; 2],
    /// Mean member length of each group (m).
    pub group_lengths: [f64; 4],
    /// Index (2 or 3) of the lower group held at the maximum tension.
    pub saturated: usize,
}

/// Rows (F_x, F_y, M_z) of the structure matrix with member columns
/// summed per group.
pub fn reduced_structure_matrix(p: &HcdrParams, geom: &CableGeometry) -> Reduced {
    let mut a = Reduced::zeros();
    for (g, members) in p.cables.groups.iter().enumerate() {
        for &i in members {
            let col = geom.structure.column(i - 1);
            a[(0, g)] += col[0];
            a[(1, g)] += col[1];
            a[(2, g)] += col[5];
        }
    }
    a
}

pub fn group_lengths(p: &HcdrParams, geom: &CableGeometry) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (g, members) in p.cables.groups.iter().enumerate() {
        out[g] = members.iter().map(|&i| geom.lengths[i - 1]).sum::<f64>() / members.len() as f64;
    }
    out
}

/// In-plane wrench the cables must supply to hold the robot's weight.
pub fn weight_wrench(p: &HcdrParams) -> Vector3<f64> {
    Vector3::new(0.0, p.total_weight(), 0.0)
}

/// Solve for the three free tensions with lower group `saturated`
/// (2 or 3) fixed at `t_max`.
pub fn saturated_branch(a: &Reduced, wrench: &Vector3<f64>, t_max: f64, saturated: usize) -> Result<Vector4<f64>> {
    let free: [usize; 3] = if saturated == 2 { [0, 1, 3] } else { [0, 1, 2] };
    let abar = SMatrix::<f64, 3, 3>::from_fn(|i, j| a[(i, free[j])]);
    let sv = abar.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularTension { condition });
    }
    let rhs = wrench - a.column(saturated) * t_max;
    let gamma = abar.lu().solve(&rhs).ok_or(Error::SingularTension { condition })?;
    let mut t = Vector4::zeros();
    t[saturated] = t_max;
    for (j, &c) in free.iter().enumerate() {
        t[c] = gamma[j];
    }
    Ok(t)
}

/// Saturate the lower-left group first; if that asks the lower-right
/// group for at least the maximum, saturate the lower-right group
/// instead. Either way neither lower tension exceeds the maximum.
pub fn distribute(a: &Reduced, wrench: &Vector3<f64>, t_max: f64) -> Result<(Vector4<f64>, usize)> {
    let left = saturated_branch(a, wrench, t_max, 3)?;
    let (t, saturated) = if left[2] >= t_max {
        (saturated_branch(a, wrench, t_max, 2)?, 2)
    } else {
        (left, 3)
    };
    let min = t.min();
    if min < 0.0 {
        return Err(Error::NegativeTension { min });
    }
    Ok((t, saturated))
}

/// Unstretched length giving tension `t` at length `l`.
pub fn unstretched_length(ea: f64, l: f64, t: f64) -> f64 {
    ea * l / (ea + t)
}

pub fn optimal_tensions(p: &HcdrParams, q: &QVec) -> Result<CableSolution> {
    let geom = cable_geometry(p, q)?;
    solution_from_geometry(p, &geom)
}

pub fn solution_from_geometry(p: &HcdrParams, geom: &CableGeometry) -> Result<CableSolution> {
    let reduced = reduced_structure_matrix(p, geom);
    let (tensions, saturated) = distribute(&reduced, &weight_wrench(p), p.cables.max_lower_tension)?;
    let group_lengths = group_lengths(p, geom);
    let ea = p.cables.upper_stiffness;
    Ok(CableSolution {
        reduced,
        tensions,
        unstretched: [
            unstretched_length(ea[0], group_lengths[0], tensions[0]),
            unstretched_length(ea[1], group_lengths[1], tensions[1]),
        ],
        group_lengths,
        saturated,
    })
}

/// Per-cable tensions: upper members from the elastic law with their own
/// lengths (zero when slack), lower members at the given group tensions.
pub fn member_tensions(
    p: &HcdrParams,
    geom: &CableGeometry,
    unstretched: [f64; 2],
    lower: [f64; 2],
) -> Result<SVector<f64, 12>> {
    if lower[0] < 0.0 || lower[1] < 0.0 {
        return Err(Error::NegativeTension {
            min: lower[0].min(lower[1]),
        });
    }
    let mut t = SVector::<f64, 12>::zeros();
    for (g, members) in p.cables.groups.iter().enumerate() {
        for &i in members {
            t[i - 1] = match g {
                0 | 1 => {
                    let l0 = unstretched[g];
                    p.cables.upper_stiffness[g] / l0 * (geom.lengths[i - 1] - l0).max(0.0)
                }
                _ => lower[g - 2],
            };
        }
    }
    Ok(t)
}

/// Generalized platform forces of the cables for upper unstretched
/// lengths and lower group tensions.
pub fn cable_forces(p: &HcdrParams, q: &QVec, unstretched: [f64; 2], lower: [f64; 2]) -> Result<QVec> {
    let geom = cable_geometry(p, q)?;
    let t = member_tensions(p, &geom, unstretched, lower)?;
    Ok(geom.generalized_forces(&t))
}

/// Per-cable tensions with every member at its group tension.
pub fn expand(p: &HcdrParams, group: &Vector4<f64>) -> SVector<f64, 12> {
    let mut t = SVector::<f64, 12>::zeros();
    for (g, members) in p.cables.groups.iter().enumerate() {
        for &i in members {
            t[i - 1] = group[g];
        }
    }
    t
}

/// The 2x2 block mapping lower-group tension changes to (F_x, F_y).
pub fn lower_block(a: &Reduced) -> SMatrix<f64, 2, 2> {
    a.fixed_view::<2, 2>(0, 2).into_owned()
}

/// Force on the platform from planar tensions, as a world vector.
pub fn planar_force(a: &Reduced, t: &Vector4<f64>) -> Vec3 {
    let w = a * t;
    Vec3::new(w[0], w[1], 0.0)
}
