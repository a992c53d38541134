//! Physical constants and cable geometry of the robot.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Vec3;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Static frame the cables are anchored to.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FrameDims {
    /// Horizontal span `l_fl` (m).
    pub length: f64,
    /// Vertical span `l_fh` (m).
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PlatformParams {
    /// Size along x (m).
    pub length: f64,
    /// Size along z (m).
    pub width: f64,
    /// Size along y (m).
    pub height: f64,
    pub mass: f64,
    /// Principal moments about the body axes (kg m^2).
    pub inertia: Vec3,
    /// Arm base joint position in the platform frame (m).
    pub arm_base: Vec3,
}

/// One-DOF pendulum hinged on the platform, rotating about body x.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PendulumParams {
    pub mass: f64,
    /// Moment of inertia about the hinge axis (kg m^2).
    pub inertia: f64,
    /// Hinge position in the platform frame (m).
    pub joint: Vec3,
    /// COM offset from the hinge in the pendulum frame (m).
    pub com: Vec3,
}

/// Arm link `j`: `joint` is the offset from this link's joint to the next
/// joint, `com` the offset to the link COM, both in the link frame.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LinkParams {
    pub mass: f64,
    pub inertia: Vec3,
    pub joint: Vec3,
    pub com: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CableAnchor {
    /// Anchor on the static frame, world coordinates (m).
    pub frame: Vec3,
    /// Anchor on the platform, platform coordinates (m).
    pub platform: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CableParams {
    /// Axial stiffness EA of the two upper cable groups (N).
    pub upper_stiffness: [f64; 2],
    /// Axial stiffness EA assumed for the lower cables (N).
    pub lower_stiffness: f64,
    /// Maximum allowable lower cable tension (N).
    pub max_lower_tension: f64,
    /// Twelve cables, numbered 1..=12 in order.
    pub anchors: Vec<CableAnchor>,
    /// 1-based cable numbers driven by each actuator, ordered
    /// (upper-right, upper-left, lower-right, lower-left).
    pub groups: [Vec<usize>; 4],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HcdrParams {
    pub gravity: f64,
    pub frame: FrameDims,
    pub platform: PlatformParams,
    pub pendulums: [PendulumParams; 2],
    pub arm: [LinkParams; 3],
    pub cables: CableParams,
}

impl HcdrParams {
    /// The reference robot. Cable anchors are reconstructed from the frame
    /// and platform dimensions by [`corner_anchors`].
    pub fn reference() -> Self {
        let frame = FrameDims {
            length: 3.160,
            height: 1.000,
        };
        let platform = PlatformParams {
            length: 0.365,
            width: 0.130,
            height: 0.096,
            mass: 12.200,
            inertia: Vec3::new(0.1021, 0.167, 0.1251),
            arm_base: Vec3::new(0.0, 0.048, 0.0),
        };
        let pendulum = |x: f64| PendulumParams {
            mass: 0.640,
            inertia: 7.012e-4,
            joint: Vec3::new(x, -0.100, 0.0),
            com: Vec3::new(0.0, -0.050, 0.0),
        };
        let link = |inertia: f64, joint: f64| LinkParams {
            mass: 0.300,
            inertia: Vec3::repeat(inertia),
            joint: Vec3::new(0.0, joint, 0.0),
            com: Vec3::new(0.0, joint / 2.0, 0.0),
        };
        let anchors = corner_anchors(&frame, &platform);
        HcdrParams {
            gravity: 9.810,
            frame,
            platform,
            pendulums: [pendulum(-0.175), pendulum(0.175)],
            arm: [link(6.76e-5, 0.026), link(1.70e-3, 0.130), link(1.70e-3, 0.130)],
            cables: CableParams {
                upper_stiffness: [24900.0, 24900.0],
                lower_stiffness: 24900.0,
                max_lower_tension: 80.0,
                anchors,
                groups: [vec![5, 6, 11, 12], vec![1, 2, 7, 8], vec![4, 10], vec![3, 9]],
            },
        }
    }

    /// Sum of all body masses (kg).
    pub fn total_mass(&self) -> f64 {
        self.platform.mass
            + self.pendulums.iter().map(|p| p.mass).sum::<f64>()
            + self.arm.iter().map(|l| l.mass).sum::<f64>()
    }

    /// Total weight the cables must carry (N).
    pub fn total_weight(&self) -> f64 {
        self.total_mass() * self.gravity
    }

    /// Axial stiffness EA of cable `i` (0-based) from its group.
    pub fn cable_stiffness(&self, i: usize) -> f64 {
        let c = &self.cables;
        match c.groups.iter().position(|g| g.contains(&(i + 1))) {
            Some(0) => c.upper_stiffness[0],
            Some(1) => c.upper_stiffness[1],
            _ => c.lower_stiffness,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("gravity", self.gravity)?;
        positive("frame_length", self.frame.length)?;
        positive("frame_height", self.frame.height)?;
        positive("platform_length", self.platform.length)?;
        positive("platform_width", self.platform.width)?;
        positive("platform_height", self.platform.height)?;
        positive("platform_mass", self.platform.mass)?;
        finite_vec("platform_arm_base", &self.platform.arm_base)?;
        for (axis, v) in self.platform.inertia.iter().enumerate() {
            positive(&format!("platform_inertia[{axis}]"), *v)?;
        }
        for (k, p) in self.pendulums.iter().enumerate() {
            positive(&format!("pendulum{}_mass", k + 1), p.mass)?;
            positive(&format!("pendulum{}_inertia", k + 1), p.inertia)?;
            finite_vec(&format!("pendulum{}_joint", k + 1), &p.joint)?;
            finite_vec(&format!("pendulum{}_com", k + 1), &p.com)?;
        }
        for (j, l) in self.arm.iter().enumerate() {
            positive(&format!("arm{}_mass", j + 1), l.mass)?;
            for (axis, v) in l.inertia.iter().enumerate() {
                positive(&format!("arm{}_inertia[{axis}]", j + 1), *v)?;
            }
            finite_vec(&format!("arm{}_joint", j + 1), &l.joint)?;
            finite_vec(&format!("arm{}_com", j + 1), &l.com)?;
        }
        let c = &self.cables;
        positive("upper_stiffness[0]", c.upper_stiffness[0])?;
        positive("upper_stiffness[1]", c.upper_stiffness[1])?;
        positive("lower_stiffness", c.lower_stiffness)?;
        positive("max_lower_tension", c.max_lower_tension)?;
        if c.anchors.len() != 12 {
            return Err(Error::invalid(
                "cable_anchors",
                &format!("count is {}, expected 12", c.anchors.len()),
            ));
        }
        for (i, a) in c.anchors.iter().enumerate() {
            finite_vec(&format!("cable{}_frame_anchor", i + 1), &a.frame)?;
            finite_vec(&format!("cable{}_platform_anchor", i + 1), &a.platform)?;
        }
        let mut seen = [false; 12];
        for group in &c.groups {
            if group.is_empty() {
                return Err(Error::invalid("cable_groups", "empty group"));
            }
            for &i in group {
                if !(1..=12).contains(&i) {
                    return Err(Error::invalid(
                        "cable_groups",
                        &format!("cable number {i} outside 1..=12"),
                    ));
                }
                if seen[i - 1] {
                    return Err(Error::invalid("cable_groups", &format!("cable {i} appears twice")));
                }
                seen[i - 1] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(
                "cable_groups",
                &format!("cable {} not assigned to any group", i + 1),
            ));
        }
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, &format!("nonpositive ({v})")))
    }
}

fn finite_vec(field: &str, v: &Vec3) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(field, "not finite"))
    }
}

/// Anchor layout built from the frame and platform boxes.
///
/// Cables 1..=6 lie in the front plane (z = +w/2) and 7..=12 mirror them
/// in the back plane. Within a plane: 1, 2 run from the platform's left
/// face up to the frame's upper-left corner, 3 from the lower-left
/// platform corner down to the frame's lower-left corner, 4 the same on
/// the right, 5, 6 from the right face up to the upper-right corner. The
/// two cables of an upper pair are parallel and equally long when the
/// platform is level.
pub fn corner_anchors(frame: &FrameDims, platform: &PlatformParams) -> Vec<CableAnchor> {
    let (fx, fy) = (frame.length / 2.0, frame.height / 2.0);
    let (hx, hy, hz) = (platform.length / 2.0, platform.height / 2.0, platform.width / 2.0);
    let mut out = Vec::with_capacity(12);
    for z in [hz, -hz] {
        let upper = |s: f64, ry: f64| CableAnchor {
            frame: Vec3::new(s * fx, fy - hy + ry, z),
            platform: Vec3::new(s * hx, ry, z),
        };
        let lower = |s: f64| CableAnchor {
            frame: Vec3::new(s * fx, -fy, z),
            platform: Vec3::new(s * hx, -hy, z),
        };
        out.push(upper(-1.0, hy));
        out.push(upper(-1.0, -hy));
        out.push(lower(-1.0));
        out.push(lower(1.0));
        out.push(upper(1.0, hy));
        out.push(upper(1.0, -hy));
    }
    out
}
