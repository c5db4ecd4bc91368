//! Task definitions and goal-pose guesses for pick-and-place and pouring.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Translation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::grasping::Grasp;
use crate::kinematics::{exists_ik_solution, forward_kinematics, ArmModel, JointConfig};
use crate::world::{object_pose_in_collision, CollisionQuery, Held, Scene, SqObject};
use crate::{RigidTransform, Vec3};

pub const DEFAULT_GAMMA_STEPS: usize = 8;
pub const DEFAULT_THETA_SAMPLES: usize = 16;
pub const DEFAULT_RIM_CLEARANCE: f64 = 0.05;
pub const DEFAULT_SUCCESS_TOLERANCE: f64 = 0.02;
/// Wrist-roll increment of the tilt sweep.
pub const TILT_STEP: f64 = PI / 180.0;

/// Move an upright object from its start pose to a goal position on the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PickPlaceTask {
    pub obj: SqObject,
    pub start_pose: RigidTransform,
    /// Goal position of the object frame origin (bottom center).
    pub goal_position: Vec3,
    pub upright_required: bool,
    pub success_tolerance: f64,
}

impl PickPlaceTask {
    pub fn new(obj: SqObject, start_pose: RigidTransform, goal_position: Vec3) -> Self {
        PickPlaceTask {
            obj,
            start_pose,
            goal_position,
            upright_required: true,
            success_tolerance: DEFAULT_SUCCESS_TOLERANCE,
        }
    }
}

/// Pour from one object into an upright receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct PouringTask {
    pub pourer: SqObject,
    pub pourer_start: RigidTransform,
    pub receiver: SqObject,
    /// Receiver pose; its translation is the receiver's bottom center.
    pub receiver_pose: RigidTransform,
    /// Accepted pourer-axis elevation interval, radians (order free).
    pub tilt_range: (f64, f64),
}

impl PouringTask {
    pub fn new(
        pourer: SqObject,
        pourer_start: RigidTransform,
        receiver: SqObject,
        receiver_pose: RigidTransform,
    ) -> Self {
        PouringTask {
            pourer,
            pourer_start,
            receiver,
            receiver_pose,
            tilt_range: (0.0, -PI / 6.0),
        }
    }

    fn tilt_bounds(&self) -> (f64, f64) {
        let (a, b) = self.tilt_range;
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    PickPlace(PickPlaceTask),
    Pour(PouringTask),
}

impl Task {
    /// The object the hand grasps.
    pub fn manipulated(&self) -> &SqObject {
        match self {
            Task::PickPlace(t) => &t.obj,
            Task::Pour(t) => &t.pourer,
        }
    }

    pub fn start_pose(&self) -> RigidTransform {
        match self {
            Task::PickPlace(t) => t.start_pose,
            Task::Pour(t) => t.pourer_start,
        }
    }
}

/// Signed table-plane yaw from the shoulder-to-start direction to the
/// shoulder-to-goal direction, in (-pi, pi].
pub fn referential_rotation(
    arm: &ArmModel,
    start: &RigidTransform,
    goal_pos: &Vec3,
) -> Result<f64> {
    let sh = arm.shoulder_point();
    let vs = start.translation.vector - sh;
    let vg = goal_pos - sh;
    let (sx, sy, gx, gy) = (vs.x, vs.y, vg.x, vg.y);
    if sx.hypot(sy) < 1e-9 || gx.hypot(gy) < 1e-9 {
        return Err(Error::Degenerate(
            "start or goal lies above the shoulder; yaw is undefined",
        ));
    }
    let a = (sx * gy - sy * gx).atan2(sx * gx + sy * gy);
    Ok(if a <= -PI { PI } else { a })
}

/// Candidate goal poses `Rot_z(gamma * i / n_steps) * start.rotation` at the
/// goal position, `i = 0..=n_steps`.
pub fn goal_pose_candidates(
    arm: &ArmModel,
    task: &PickPlaceTask,
    n_steps: usize,
) -> Vec<RigidTransform> {
    let n = n_steps.max(1);
    // Start or goal over the shoulder axis: only the unrotated candidate.
    let gamma = referential_rotation(arm, &task.start_pose, &task.goal_position).unwrap_or(0.0);
    let count = if gamma == 0.0 { 1 } else { n + 1 };
    (0..count)
        .map(|i| {
            let yaw = gamma / n as f64 * i as f64;
            let rot =
                UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw) * task.start_pose.rotation;
            RigidTransform::from_parts(Translation3::from(task.goal_position), rot)
        })
        .collect()
}

/// For each grasp, the first candidate index whose object pose is
/// collision-free and admits a collision-free IK solution with the object
/// held; `None` when no candidate works.
pub fn goal_guess_indices(
    scene: &Scene,
    task: &PickPlaceTask,
    grasps: &[Grasp],
    n_steps: usize,
    phi_samples: usize,
) -> Vec<Option<usize>> {
    let candidates = goal_pose_candidates(&scene.arm, task, n_steps);
    let placeable: Vec<bool> = candidates
        .iter()
        .map(|p| !object_pose_in_collision(scene, &task.obj, p))
        .collect();
    grasps
        .iter()
        .map(|g| {
            let query = CollisionQuery::new(scene).holding(Held::new(&task.obj, g));
            candidates.iter().enumerate().position(|(i, pose)| {
                placeable[i]
                    && exists_ik_solution(&scene.arm, &g.hand_pose(pose), phi_samples, |q| {
                        !query.arm_collides(q)
                    })
            })
        })
        .collect()
}

/// Goal object pose per grasp, found by the minimal-rotation scan.
pub fn goal_pose_guesses(
    scene: &Scene,
    task: &PickPlaceTask,
    grasps: &[Grasp],
    n_steps: usize,
    phi_samples: usize,
) -> Vec<Option<RigidTransform>> {
    let candidates = goal_pose_candidates(&scene.arm, task, n_steps);
    goal_guess_indices(scene, task, grasps, n_steps, phi_samples)
        .into_iter()
        .map(|i| i.map(|i| candidates[i]))
        .collect()
}

/// A hand pose tangent to the receiver's rim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RimPose {
    pub theta_index: usize,
    pub theta: f64,
    pub hand_pose: RigidTransform,
}

/// Hand pose on the rim circle at angle `theta`, before any reachability test.
pub fn rim_hand_pose(task: &PouringTask, theta: f64, clearance: f64) -> RigidTransform {
    let r_m = 0.5 * task.receiver.radius + task.pourer.radius;
    let (s, c) = theta.sin_cos();
    let center = task.receiver_pose.translation.vector;
    let p = center + Vec3::new(r_m * c, r_m * s, task.receiver.height + clearance);
    let x = Vec3::new(-c, -s, 0.0);
    let z = Vec3::new(s, -c, 0.0);
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    RigidTransform::from_parts(
        Translation3::from(p),
        UnitQuaternion::from_rotation_matrix(&rot),
    )
}

/// Rim hand poses at `theta_i = 2*pi*i/n_theta` that admit an IK solution.
pub fn pouring_goal_guesses(
    scene: &Scene,
    task: &PouringTask,
    n_theta: usize,
    clearance: f64,
    phi_samples: usize,
) -> Vec<RimPose> {
    let n = n_theta.max(1);
    (0..n)
        .filter_map(|i| {
            let theta = 2.0 * PI * i as f64 / n as f64;
            let hand_pose = rim_hand_pose(task, theta, clearance);
            exists_ik_solution(&scene.arm, &hand_pose, phi_samples, |_| true).then_some(RimPose {
                theta_index: i,
                theta,
                hand_pose,
            })
        })
        .collect()
}

/// Pourer pose when the hand sits at `rim` with grasp `g`.
pub fn pourer_pose_at(rim: &RimPose, g: &Grasp) -> RigidTransform {
    rim.hand_pose * g.hand_to_object
}

/// Per grasp, the rim pose with the largest arm metric (lowest index on
/// ties) and that metric, or `None` if every rim pose scores zero. `metric`
/// receives the grasp and the pourer pose at the rim.
pub fn assign_pour_guesses(
    rims: &[RimPose],
    grasps: &[Grasp],
    mut metric: impl FnMut(&Grasp, &RigidTransform) -> usize,
) -> Vec<Option<(usize, usize)>> {
    grasps
        .iter()
        .map(|g| {
            let mut best: Option<(usize, usize)> = None;
            for (i, rim) in rims.iter().enumerate() {
                let m = metric(g, &pourer_pose_at(rim, g));
                if m > 0 && best.is_none_or(|(_, bm)| m > bm) {
                    best = Some((i, m));
                }
            }
            best
        })
        .collect()
}

/// Elevation of the object's up axis above the horizontal, radians.
pub fn axis_elevation(pose: &RigidTransform) -> f64 {
    let a = pose.rotation * Vec3::z();
    a.z.clamp(-1.0, 1.0).asin()
}

/// Lowest point of the pourer's top rim, projected on the table plane.
pub fn pour_lip(pourer: &SqObject, pose: &RigidTransform) -> Vec3 {
    let a = pose.rotation * Vec3::z();
    let down = -Vec3::z();
    let perp = down - a * down.dot(&a);
    let offset = if perp.norm() < 1e-12 {
        Vec3::zeros()
    } else {
        perp.normalize() * pourer.radius
    };
    pourer.top_center(pose) + offset
}

fn lip_inside(task: &PouringTask, pose: &RigidTransform) -> bool {
    let lip = pour_lip(&task.pourer, pose);
    let c = task.receiver_pose.translation.vector;
    (lip.x - c.x).hypot(lip.y - c.y) <= task.receiver.radius
}

/// Roll direction of the last joint that lowers the pourer's top.
fn lowering_sign(arm: &ArmModel, q: &JointConfig, g: &Grasp, pourer: &SqObject) -> f64 {
    let top_z = |d: f64| {
        let mut r = *q;
        r.0[6] += d;
        pourer
            .top_center(&(forward_kinematics(arm, &r) * g.hand_to_object))
            .z
    };
    if top_z(-TILT_STEP) < top_z(TILT_STEP) {
        -1.0
    } else {
        1.0
    }
}

/// Wrist-roll sweeps from `q_goal`, in 1 degree steps and in the direction
/// that lowers the pourer top, up to the width of the tilt range. Feasible
/// when some step is reached through in-limit, collision-free steps and has
/// the pourer axis inside the tilt range with its lip over the receiver.
pub fn check_tilt_feasible(
    scene: &Scene,
    task: &PouringTask,
    q_goal: &JointConfig,
    grasp: &Grasp,
) -> bool {
    tilt_roll(scene, task, q_goal, grasp).is_some()
}

/// Roll angle (signed, radians) at which pouring happens, if feasible.
pub fn tilt_roll(
    scene: &Scene,
    task: &PouringTask,
    q_goal: &JointConfig,
    grasp: &Grasp,
) -> Option<f64> {
    let arm = &scene.arm;
    let (lo, hi) = task.tilt_bounds();
    let steps = ((hi - lo) / TILT_STEP).round() as usize;
    let sign = lowering_sign(arm, q_goal, grasp, &task.pourer);
    let query = CollisionQuery::new(scene).holding(Held::new(&task.pourer, grasp));
    let tol = 1e-9;
    for k in 0..=steps {
        let roll = sign * TILT_STEP * k as f64;
        let mut q = *q_goal;
        q.0[6] += roll;
        if !q.within_limits(arm) || query.arm_collides(&q) {
            return None;
        }
        let pose = forward_kinematics(arm, &q) * grasp.hand_to_object;
        let e = axis_elevation(&pose);
        if e >= lo - tol && e <= hi + tol && lip_inside(task, &pose) {
            return Some(roll);
        }
    }
    None
}
