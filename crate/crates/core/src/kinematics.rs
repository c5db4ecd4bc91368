//! Kinematics of a 7-DOF S-R-S arm.
//!
//! The chain is spherical shoulder (z-y-z), revolute elbow (y), spherical
//! wrist (z-y-z):
//!
//! ```text
//! base * Tz(d_bs) * Rz(q1) Ry(q2) Rz(q3) * Tz(d_se) * Ry(q4) * Rz(q5) * Tz(d_ew) * Ry(q6) Rz(q7) * Tz(d_wt)
//! ```
//!
//! With all joints at zero the arm points straight up along the base z-axis.
//! The inverse kinematics fixes the redundancy with the arm angle `phi`, the
//! rotation of the elbow about the shoulder-wrist axis measured from the
//! reference plane in which `q3 = 0`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};

use crate::{Error, Result, RigidTransform, Vec3};

/// Default number of elbow-angle samples used when counting IK solutions.
pub const DEFAULT_PHI_SAMPLES: usize = 64;

/// Angular distance from a singular joint value below which a branch is skipped.
pub const SINGULARITY_EPS: f64 = 1e-4;

/// Per-joint tolerance under which two solutions are the same configuration.
pub const DUPLICATE_TOL: f64 = 1e-6;

pub const NUM_JOINTS: usize = 7;

/// Segment lengths of the S-R-S chain, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkLengths {
    /// Base to shoulder center.
    pub shoulder_offset: f64,
    /// Shoulder center to elbow.
    pub upper_arm: f64,
    /// Elbow to wrist center.
    pub forearm: f64,
    /// Wrist center to tool center point.
    pub wrist_to_tool: f64,
}

impl LinkLengths {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.shoulder_offset,
            self.upper_arm,
            self.forearm,
            self.wrist_to_tool,
        ]
    }
}

/// A 7-DOF S-R-S arm with its collision geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub link_lengths: LinkLengths,
    pub joint_limits: [(f64, f64); NUM_JOINTS],
    /// World pose of the arm base.
    pub base_pose: RigidTransform,
    /// Capsule radii for base column, upper arm, forearm and hand.
    pub link_radii: [f64; 4],
    /// Distance from the tool center point back to the end of the hand capsule.
    pub palm_depth: f64,
    /// Resting configuration every task starts from and returns to.
    pub ready: JointConfig,
}

impl Default for ArmModel {
    fn default() -> Self {
        Self::generic_7dof()
    }
}

impl ArmModel {
    /// Generic tabletop 7-DOF arm: 0.35 m upper arm, 0.30 m forearm,
    /// +-2.96 rad joints except an elbow restricted to [0.1, 2.9] rad.
    pub fn generic_7dof() -> Self {
        let lim = 2.96;
        ArmModel {
            link_lengths: LinkLengths {
                shoulder_offset: 0.30,
                upper_arm: 0.35,
                forearm: 0.30,
                wrist_to_tool: 0.15,
            },
            joint_limits: [
                (-lim, lim),
                (-lim, lim),
                (-lim, lim),
                (0.1, 2.9),
                (-lim, lim),
                (-lim, lim),
                (-lim, lim),
            ],
            base_pose: RigidTransform::identity(),
            link_radii: [0.06, 0.05, 0.045, 0.04],
            palm_depth: 0.06,
            ready: JointConfig([0.0, 0.5, 0.0, 1.9, 0.0, 0.7, 0.0]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.link_lengths;
        if !(l.upper_arm > 0.0 && l.forearm > 0.0) {
            return Err(Error::InvalidArm(
                "upper-arm and forearm lengths must be positive".into(),
            ));
        }
        if l.shoulder_offset < 0.0 || l.wrist_to_tool < 0.0 {
            return Err(Error::InvalidArm("negative link length".into()));
        }
        for (i, (lo, hi)) in self.joint_limits.iter().enumerate() {
            if lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less) {
                return Err(Error::InvalidArm(format!(
                    "joint {} limits [{lo}, {hi}] are empty",
                    i + 1
                )));
            }
        }
        if self.link_radii.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::InvalidArm("link radii must be positive".into()));
        }
        if !self.ready.is_finite() {
            return Err(Error::InvalidArm(
                "ready configuration is not finite".into(),
            ));
        }
        Ok(())
    }

    /// Shoulder center in world coordinates.
    pub fn shoulder_point(&self) -> Vec3 {
        self.base_pose
            .transform_point(&nalgebra::Point3::new(
                0.0,
                0.0,
                self.link_lengths.shoulder_offset,
            ))
            .coords
    }

    /// Upper bound on the distance from the shoulder to any tool position.
    pub fn gross_reach(&self) -> f64 {
        let l = &self.link_lengths;
        l.upper_arm + l.forearm + l.wrist_to_tool
    }

    /// Tool pose with every joint at zero.
    pub fn home_pose(&self) -> RigidTransform {
        let l = &self.link_lengths;
        self.base_pose
            * Translation3::new(
                0.0,
                0.0,
                l.shoulder_offset + l.upper_arm + l.forearm + l.wrist_to_tool,
            )
    }
}

/// Joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig(pub [f64; NUM_JOINTS]);

impl JointConfig {
    pub fn zeros() -> Self {
        JointConfig([0.0; NUM_JOINTS])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn within_limits(&self, arm: &ArmModel) -> bool {
        self.0
            .iter()
            .zip(arm.joint_limits.iter())
            .all(|(q, (lo, hi))| *q >= *lo && *q <= *hi)
    }

    /// Euclidean distance in joint space.
    pub fn distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest per-joint difference.
    pub fn max_abs_diff(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn lerp(&self, other: &JointConfig, t: f64) -> JointConfig {
        let mut q = [0.0; NUM_JOINTS];
        for (i, v) in q.iter_mut().enumerate() {
            *v = self.0[i] + (other.0[i] - self.0[i]) * t;
        }
        JointConfig(q)
    }
}

/// Elbow self-motion angle in [-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ElbowParameter(f64);

impl ElbowParameter {
    pub fn new(phi: f64) -> Result<Self> {
        if (-PI..=PI).contains(&phi) {
            Ok(ElbowParameter(phi))
        } else {
            Err(Error::ElbowOutOfRange(phi))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `phi_k = -pi + 2 pi k / n` for `k = 0..n`.
    pub fn grid(n: usize) -> impl Iterator<Item = ElbowParameter> {
        (0..n).map(move |k| ElbowParameter(-PI + 2.0 * PI * k as f64 / n as f64))
    }
}

/// Sign choices of the three closed-form branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Branch {
    /// Sign of q2.
    pub shoulder: i8,
    /// Sign of q4.
    pub elbow: i8,
    /// Sign of q6.
    pub wrist: i8,
}

impl Branch {
    pub fn all() -> [Branch; 8] {
        let mut out = [Branch {
            shoulder: 1,
            elbow: 1,
            wrist: 1,
        }; 8];
        for (i, b) in out.iter_mut().enumerate() {
            b.shoulder = if i & 4 == 0 { 1 } else { -1 };
            b.elbow = if i & 2 == 0 { 1 } else { -1 };
            b.wrist = if i & 1 == 0 { 1 } else { -1 };
        }
        out
    }

    pub fn index(&self) -> usize {
        (usize::from(self.shoulder < 0) << 2)
            | (usize::from(self.elbow < 0) << 1)
            | usize::from(self.wrist < 0)
    }

    pub fn of(q: &JointConfig) -> Branch {
        let sgn = |v: f64| if v < 0.0 { -1 } else { 1 };
        Branch {
            shoulder: sgn(q.0[1]),
            elbow: sgn(q.0[3]),
            wrist: sgn(q.0[5]),
        }
    }
}

/// One closed-form IK solution and where it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: JointConfig,
    pub branch: Branch,
    pub phi: ElbowParameter,
}

/// Result of [`analytic_ik`] at a single elbow angle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IkSolutions {
    /// In-limit solutions, in branch order.
    pub solutions: Vec<IkSolution>,
    /// Set when at least one branch was skipped because the target sits
    /// within [`SINGULARITY_EPS`] of a kinematic singularity.
    pub degenerate: bool,
}

impl IkSolutions {
    pub fn configs(&self) -> Vec<JointConfig> {
        self.solutions.iter().map(|s| s.q).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Frames along the chain, all in world coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ChainPoints {
    pub base: Vec3,
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
    pub tool: RigidTransform,
}

/// Shoulder, elbow, wrist and tool frames for `q`.
pub fn chain_points(arm: &ArmModel, q: &JointConfig) -> ChainPoints {
    let l = &arm.link_lengths;
    let q = &q.0;
    let z = Vector3::z();
    let r03 = rot_z(q[0]) * rot_y(q[1]) * rot_z(q[2]);
    let r05 = r03 * rot_y(q[3]) * rot_z(q[4]);
    let r07 = r05 * rot_y(q[5]) * rot_z(q[6]);

    let shoulder = Vec3::new(0.0, 0.0, l.shoulder_offset);
    let elbow = shoulder + r03 * z * l.upper_arm;
    let wrist = elbow + r05 * z * l.forearm;
    let tool = wrist + r07 * z * l.wrist_to_tool;

    let base = &arm.base_pose;
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r07));
    ChainPoints {
        base: base.translation.vector,
        shoulder: base.transform_point(&shoulder.into()).coords,
        elbow: base.transform_point(&elbow.into()).coords,
        wrist: base.transform_point(&wrist.into()).coords,
        tool: base * RigidTransform::from_parts(Translation3::from(tool), rot),
    }
}

/// Tool pose in world coordinates.
pub fn forward_kinematics(arm: &ArmModel, q: &JointConfig) -> RigidTransform {
    chain_points(arm, q).tool
}

/// Decomposes `r = Rz(a) Ry(b) Rz(c)` for the branch where `sin b` has sign
/// `sign`. Returns `None` when `|sin b|` is below the singularity threshold.
fn zyz(r: &Matrix3<f64>, sign: f64) -> Option<(f64, f64, f64)> {
    let sb = sign * (r[(0, 2)].powi(2) + r[(1, 2)].powi(2)).sqrt();
    let b = sb.atan2(r[(2, 2)]);
    if sb.abs() < SINGULARITY_EPS.sin() {
        return None;
    }
    let a = (sign * r[(1, 2)]).atan2(sign * r[(0, 2)]);
    let c = (sign * r[(2, 1)]).atan2(-sign * r[(2, 0)]);
    Some((a, b, c))
}

/// All in-limit joint configurations reaching `target` with elbow angle `phi`.
///
/// Up to eight branches are enumerated (shoulder, elbow and wrist flips).
/// Targets beyond the arm's reach yield an empty set.
pub fn analytic_ik(arm: &ArmModel, target: &RigidTransform, phi: ElbowParameter) -> IkSolutions {
    let mut out = IkSolutions::default();
    solve_into(
        arm,
        arm.base_pose.inverse() * target,
        phi,
        &mut out,
        |_| true,
    );
    out
}

fn solve_into<F>(
    arm: &ArmModel,
    local: RigidTransform,
    phi: ElbowParameter,
    out: &mut IkSolutions,
    mut keep: F,
) where
    F: FnMut(&Branch) -> bool,
{
    let l = &arm.link_lengths;
    let rt = local.rotation.to_rotation_matrix().into_inner();
    let wrist = local.translation.vector - rt * Vector3::z() * l.wrist_to_tool;
    let shoulder = Vec3::new(0.0, 0.0, l.shoulder_offset);
    let sw = wrist - shoulder;
    let len = sw.norm();
    let slack = 1e-9;
    if len > l.upper_arm + l.forearm + slack
        || len < (l.upper_arm - l.forearm).abs() - slack
        || len < 1e-12
    {
        return;
    }
    let c4 = ((len * len - l.upper_arm.powi(2) - l.forearm.powi(2))
        / (2.0 * l.upper_arm * l.forearm))
        .clamp(-1.0, 1.0);
    let elbow_mag = c4.acos();
    if elbow_mag < SINGULARITY_EPS || PI - elbow_mag < SINGULARITY_EPS {
        out.degenerate = true;
        return;
    }

    let u = sw / len;
    let polar = u.z.clamp(-1.0, 1.0).acos();
    let azimuth = if u.x.hypot(u.y) < 1e-12 {
        0.0
    } else {
        u.y.atan2(u.x)
    };
    let swivel =
        Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(u), phi.value()).into_inner();

    for elbow_sign in [1.0, -1.0] {
        let q4 = elbow_sign * elbow_mag;
        let v = Vec3::new(
            l.forearm * q4.sin(),
            0.0,
            l.upper_arm + l.forearm * q4.cos(),
        );
        let alpha = v.x.atan2(v.z);
        let r03 = swivel * rot_z(azimuth) * rot_y(polar - alpha);
        let r47 = (r03 * rot_y(q4)).transpose() * rt;

        for shoulder_sign in [1.0, -1.0] {
            let Some((q1, q2, q3)) = zyz(&r03, shoulder_sign) else {
                out.degenerate = true;
                continue;
            };
            for wrist_sign in [1.0, -1.0] {
                let branch = Branch {
                    shoulder: shoulder_sign as i8,
                    elbow: elbow_sign as i8,
                    wrist: wrist_sign as i8,
                };
                if !keep(&branch) {
                    continue;
                }
                let Some((q5, q6, q7)) = zyz(&r47, wrist_sign) else {
                    out.degenerate = true;
                    continue;
                };
                let q = JointConfig([q1, q2, q3, q4, q5, q6, q7]);
                if q.within_limits(arm) {
                    out.solutions.push(IkSolution { q, branch, phi });
                }
            }
        }
    }
}

/// Solution on one specific branch, if it exists and is within limits.
pub fn ik_on_branch(
    arm: &ArmModel,
    target: &RigidTransform,
    phi: ElbowParameter,
    branch: Branch,
) -> Option<JointConfig> {
    let mut out = IkSolutions::default();
    solve_into(arm, arm.base_pose.inverse() * target, phi, &mut out, |b| {
        *b == branch
    });
    out.solutions.first().map(|s| s.q)
}

/// Union of [`analytic_ik`] over the uniform elbow-angle grid of
/// `phi_samples` points, with duplicates removed.
pub fn ik_solution_set(
    arm: &ArmModel,
    target: &RigidTransform,
    phi_samples: usize,
) -> Vec<IkSolution> {
    let local = arm.base_pose.inverse() * target;
    let mut scratch = IkSolutions::default();
    let mut out: Vec<IkSolution> = Vec::new();
    for phi in ElbowParameter::grid(phi_samples.max(1)) {
        scratch.solutions.clear();
        solve_into(arm, local, phi, &mut scratch, |_| true);
        for s in &scratch.solutions {
            let dup = out
                .iter()
                .any(|o| o.branch == s.branch && o.q.max_abs_diff(&s.q) <= DUPLICATE_TOL);
            if !dup {
                out.push(*s);
            }
        }
    }
    out
}

/// True if any solution on the elbow-angle grid satisfies `accept`.
/// Stops at the first accepted solution.
pub fn exists_ik_solution<F>(
    arm: &ArmModel,
    target: &RigidTransform,
    phi_samples: usize,
    mut accept: F,
) -> bool
where
    F: FnMut(&JointConfig) -> bool,
{
    let local = arm.base_pose.inverse() * target;
    let mut scratch = IkSolutions::default();
    for phi in ElbowParameter::grid(phi_samples.max(1)) {
        scratch.solutions.clear();
        solve_into(arm, local, phi, &mut scratch, |_| true);
        if scratch.solutions.iter().any(|s| accept(&s.q)) {
            return true;
        }
    }
    false
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Position and orientation error between two poses (meters, radians).
pub fn pose_error(a: &RigidTransform, b: &RigidTransform) -> (f64, f64) {
    let dp = (a.translation.vector - b.translation.vector).norm();
    let dr = a.rotation.angle_to(&b.rotation);
    (dp, dr)
}
