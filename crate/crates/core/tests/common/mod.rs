//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use grasp_select::grasping::Grasp;
use grasp_select::harness::Fixture;
use grasp_select::kinematics::{ArmModel, JointConfig, NUM_JOINTS, SINGULARITY_EPS};
use grasp_select::tasks::{PickPlaceTask, PouringTask};
use grasp_select::world::{arm_in_collision, object_pose_in_collision, Held, Scene};
use grasp_select::{ik_solution_set, RigidTransform, Vec3};
use nalgebra::{
    DMatrix, DVector, Matrix3, Matrix4, Rotation3, Translation3, Unit, UnitQuaternion, Vector3,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_in_limits(arm: &ArmModel, rng: &mut impl Rng) -> JointConfig {
    let mut q = [0.0; NUM_JOINTS];
    for (v, (lo, hi)) in q.iter_mut().zip(arm.joint_limits) {
        *v = rng.gen_range(lo..hi);
    }
    JointConfig(q)
}

pub fn wrap(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

// ---------------------------------------------------------------- FK chain

fn hom_rot_z(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    Matrix4::new(
        c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    )
}

fn hom_rot_y(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    Matrix4::new(
        c, 0.0, s, 0.0, 0.0, 1.0, 0.0, 0.0, -s, 0.0, c, 0.0, 0.0, 0.0, 0.0, 1.0,
    )
}

fn hom_lift(d: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(2, 3)] = d;
    m
}

/// Tool pose as a product of 4x4 homogeneous matrices.
pub fn fk_matrix_chain(arm: &ArmModel, q: &JointConfig) -> Matrix4<f64> {
    let l = &arm.link_lengths;
    let q = &q.0;
    arm.base_pose.to_homogeneous()
        * hom_lift(l.shoulder_offset)
        * hom_rot_z(q[0])
        * hom_rot_y(q[1])
        * hom_rot_z(q[2])
        * hom_lift(l.upper_arm)
        * hom_rot_y(q[3])
        * hom_rot_z(q[4])
        * hom_lift(l.forearm)
        * hom_rot_y(q[5])
        * hom_rot_z(q[6])
        * hom_lift(l.wrist_to_tool)
}

fn chain_elbow_and_tool(arm: &ArmModel, q: &[f64]) -> (Vector3<f64>, Matrix4<f64>) {
    let l = &arm.link_lengths;
    let to_elbow = hom_lift(l.shoulder_offset)
        * hom_rot_z(q[0])
        * hom_rot_y(q[1])
        * hom_rot_z(q[2])
        * hom_lift(l.upper_arm);
    let tool = to_elbow
        * hom_rot_y(q[3])
        * hom_rot_z(q[4])
        * hom_lift(l.forearm)
        * hom_rot_y(q[5])
        * hom_rot_z(q[6])
        * hom_lift(l.wrist_to_tool);
    (to_elbow.fixed_view::<3, 1>(0, 3).into_owned(), tool)
}

// ------------------------------------------------------- numerical IK oracle

/// Elbow position (arm base frame) that the elbow angle `phi` selects for a
/// tool target given in the base frame, or `None` when the target is out of
/// reach or at a singular stretch.
fn desired_elbow(
    arm: &ArmModel,
    local: &Matrix4<f64>,
    phi: f64,
    elbow_sign: f64,
) -> Option<Vector3<f64>> {
    let l = &arm.link_lengths;
    let r = local.fixed_view::<3, 3>(0, 0).into_owned();
    let p = local.fixed_view::<3, 1>(0, 3).into_owned();
    let wrist = p - r * Vector3::z() * l.wrist_to_tool;
    let shoulder = Vector3::new(0.0, 0.0, l.shoulder_offset);
    let d = (wrist - shoulder).norm();
    if d > l.upper_arm + l.forearm || d < (l.upper_arm - l.forearm).abs() || d < 1e-12 {
        return None;
    }
    let interior = ((l.upper_arm.powi(2) + l.forearm.powi(2) - d * d)
        / (2.0 * l.upper_arm * l.forearm))
        .clamp(-1.0, 1.0)
        .acos();
    let bend = PI - interior;
    if bend < SINGULARITY_EPS || PI - bend < SINGULARITY_EPS {
        return None;
    }
    let u = (wrist - shoulder) / d;
    let cos_a = ((l.upper_arm.powi(2) + d * d - l.forearm.powi(2)) / (2.0 * l.upper_arm * d))
        .clamp(-1.0, 1.0);
    let alpha = elbow_sign * cos_a.acos();
    let side = Vector3::z().cross(&u);
    let tilt_axis = if side.norm() < 1e-12 {
        Vector3::y()
    } else {
        side.normalize()
    };
    let in_plane = Rotation3::from_axis_angle(&Unit::new_normalize(tilt_axis), -alpha) * u;
    let swung = Rotation3::from_axis_angle(&Unit::new_normalize(u), phi) * in_plane;
    Some(shoulder + swung * l.upper_arm)
}

fn residual(
    arm: &ArmModel,
    q: &[f64],
    target: &Matrix4<f64>,
    elbow: &Vector3<f64>,
) -> DVector<f64> {
    let (e, t) = chain_elbow_and_tool(arm, q);
    let dp = target.fixed_view::<3, 1>(0, 3) - t.fixed_view::<3, 1>(0, 3);
    let rt: Matrix3<f64> = target.fixed_view::<3, 3>(0, 0).into_owned();
    let rq: Matrix3<f64> = t.fixed_view::<3, 3>(0, 0).into_owned();
    let qt = UnitQuaternion::from_matrix(&rt);
    let qq = UnitQuaternion::from_matrix(&rq);
    let err = qt * qq.inverse();
    let sign = if err.w < 0.0 { -2.0 } else { 2.0 };
    let dr = err.imag() * sign;
    let de = elbow - e;
    DVector::from_iterator(9, dp.iter().chain(dr.iter()).chain(de.iter()).copied())
}

fn dls(
    arm: &ArmModel,
    seed: [f64; 7],
    target: &Matrix4<f64>,
    elbow: &Vector3<f64>,
) -> Option<[f64; 7]> {
    let mut q = seed;
    let mut r = residual(arm, &q, target, elbow);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..300 {
        if cost < 1e-22 {
            break;
        }
        let h = 1e-7;
        let mut j = DMatrix::<f64>::zeros(9, 7);
        for k in 0..7 {
            let mut a = q;
            let mut b = q;
            a[k] += h;
            b[k] -= h;
            // Residuals are target minus current, hence the reversed difference.
            let col =
                (residual(arm, &b, target, elbow) - residual(arm, &a, target, elbow)) / (2.0 * h);
            j.set_column(k, &col);
        }
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * &r;
        let mut improved = false;
        while lambda < 1e8 {
            let lhs = &jtj + DMatrix::<f64>::identity(7, 7) * lambda;
            let step = lhs.lu().solve(&g)?;
            let mut trial = q;
            for k in 0..7 {
                trial[k] += step[k];
            }
            let tr = residual(arm, &trial, target, elbow);
            let tc = tr.norm_squared();
            if tc < cost {
                q = trial;
                r = tr;
                cost = tc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (cost < 1e-20).then(|| q.map(wrap))
}

fn signs(branch: usize) -> [f64; 3] {
    let s = |bit: usize| if branch & bit == 0 { 1.0 } else { -1.0 };
    [s(4), s(2), s(1)]
}

fn on_branch(q: &[f64; 7], branch: usize) -> bool {
    let [s2, s4, s6] = signs(branch);
    let sgn = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    sgn(q[1]) == s2 && sgn(q[3]) == s4 && sgn(q[5]) == s6
}

fn in_limits(arm: &ArmModel, q: &[f64; 7]) -> bool {
    q.iter()
        .zip(arm.joint_limits)
        .all(|(v, (lo, hi))| *v >= lo && *v <= hi)
}

fn wrist_singular(q: &[f64; 7]) -> bool {
    q[1].sin().abs() < SINGULARITY_EPS.sin() || q[5].sin().abs() < SINGULARITY_EPS.sin()
}

/// Numerical IK for one elbow angle and one sign branch: damped least
/// squares on pose plus elbow-position residuals, restarted from random
/// seeds drawn inside the branch's sign pattern.
pub fn numerical_ik(
    arm: &ArmModel,
    target: &RigidTransform,
    phi: f64,
    branch: usize,
    rng: &mut impl Rng,
) -> Option<[f64; 7]> {
    numerical_ik_from(arm, target, phi, branch, None, rng)
}

/// As [`numerical_ik`], trying `warm` as the first seed.
pub fn numerical_ik_from(
    arm: &ArmModel,
    target: &RigidTransform,
    phi: f64,
    branch: usize,
    warm: Option<[f64; 7]>,
    rng: &mut impl Rng,
) -> Option<[f64; 7]> {
    let local = (arm.base_pose.inverse() * target).to_homogeneous();
    let [s2, s4, s6] = signs(branch);
    let elbow = desired_elbow(arm, &local, phi, s4)?;
    if let Some(q) = warm.and_then(|w| dls(arm, w, &local, &elbow)) {
        if on_branch(&q, branch) {
            return Some(q);
        }
    }
    for _ in 0..200 {
        let seed = [
            rng.gen_range(-PI..PI),
            s2 * rng.gen_range(0.05..PI - 0.05),
            rng.gen_range(-PI..PI),
            s4 * rng.gen_range(0.05..PI - 0.05),
            rng.gen_range(-PI..PI),
            s6 * rng.gen_range(0.05..PI - 0.05),
            rng.gen_range(-PI..PI),
        ];
        if let Some(q) = dls(arm, seed, &local, &elbow) {
            if on_branch(&q, branch) {
                return Some(q);
            }
        }
    }
    None
}

/// Per-branch count of distinct in-limit solutions over the elbow-angle
/// grid `-pi + 2 pi k / n`, computed with [`numerical_ik`].
pub fn oracle_branch_counts(
    arm: &ArmModel,
    target: &RigidTransform,
    phi_samples: usize,
) -> [usize; 8] {
    let mut rng = rng(0x5eed);
    let mut found: [Vec<[f64; 7]>; 8] = Default::default();
    let mut warm: [Option<[f64; 7]>; 8] = [None; 8];
    for k in 0..phi_samples {
        let phi = -PI + 2.0 * PI * k as f64 / phi_samples as f64;
        for (b, list) in found.iter_mut().enumerate() {
            let Some(q) = numerical_ik_from(arm, target, phi, b, warm[b], &mut rng) else {
                continue;
            };
            warm[b] = Some(q);
            if wrist_singular(&q) || !in_limits(arm, &q) {
                continue;
            }
            let dup = list
                .iter()
                .any(|o| o.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-6));
            if !dup {
                list.push(q);
            }
        }
    }
    found.map(|v| v.len())
}

pub fn library_branch_counts(
    arm: &ArmModel,
    target: &RigidTransform,
    phi_samples: usize,
) -> [usize; 8] {
    let mut out = [0; 8];
    for s in ik_solution_set(arm, target, phi_samples) {
        out[s.branch.index()] += 1;
    }
    out
}

/// Ten fixed configurations whose tool poses serve as IK fixture poses.
pub fn ik_fixture_configs() -> Vec<JointConfig> {
    [
        [0.0, 0.5, 0.0, 1.9, 0.0, 0.7, 0.0],
        [0.4, 0.8, -0.3, 1.2, 0.5, -0.9, 1.0],
        [-1.0, 1.1, 0.6, 1.6, -0.8, 1.2, -0.4],
        [1.7, -0.6, 1.1, 0.9, 2.0, 0.5, 2.5],
        [-2.2, 0.3, -1.4, 2.3, 0.1, -1.5, 0.3],
        [0.9, 1.4, 2.1, 0.6, -1.6, 1.9, -2.0],
        [2.6, -1.2, -0.7, 1.4, 1.1, -0.6, 0.8],
        [-0.5, 0.9, 0.2, 2.6, -2.4, 0.4, 1.7],
        [0.2, -1.7, 1.9, 1.0, 0.7, 2.2, -1.1],
        [-1.5, 0.6, -2.5, 1.8, 1.3, -2.1, 2.9],
    ]
    .into_iter()
    .map(JointConfig)
    .collect()
}

// ------------------------------------------------------ ranking oracle

/// Bin labels: 0 very good, 1 good, 2 fair, 3 bad.
pub fn oracle_groups(values: &[f64]) -> Vec<u8> {
    let n = values.len() as f64;
    let mut mean = 0.0;
    for (i, v) in values.iter().enumerate() {
        mean += (v - mean) / (i + 1) as f64;
    }
    let mut ss = 0.0;
    for v in values {
        ss += (v - mean) * (v - mean);
    }
    let sd = if values.is_empty() {
        0.0
    } else {
        (ss / n).sqrt()
    };
    let tol = 1e-9 * sd.max(mean.abs()).max(f64::MIN_POSITIVE);
    values
        .iter()
        .map(|&m| {
            if m > mean + sd + tol {
                0
            } else if m > mean + tol {
                1
            } else if (m - mean).abs() <= tol || m > mean - sd + tol {
                2
            } else {
                3
            }
        })
        .collect()
}

/// Indices ordered best first: bin, then ascending grasp metric, then input
/// position. Selection sort over explicit pairwise comparison.
pub fn oracle_order(values: &[f64], m_g: &[f64]) -> Vec<usize> {
    let groups = oracle_groups(values);
    let better = |a: usize, b: usize| {
        (groups[a], m_g[a], a)
            .partial_cmp(&(groups[b], m_g[b], b))
            .unwrap()
            .is_lt()
    };
    let mut left: Vec<usize> = (0..values.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for i in 1..left.len() {
            if better(left[i], left[best]) {
                best = i;
            }
        }
        out.push(left.remove(best));
    }
    out
}

/// Min-max scaling written out longhand.
pub fn oracle_scale(xs: &[f64]) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if hi <= lo {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

// ------------------------------------------------------- task oracles

/// Yaw from the shoulder-to-start to the shoulder-to-goal direction on the
/// table plane, via the unsigned angle and the sign of the cross product.
pub fn oracle_gamma(arm: &ArmModel, start: &Vec3, goal: &Vec3) -> Option<f64> {
    let sh = arm.shoulder_point();
    let a = Vec3::new(start.x - sh.x, start.y - sh.y, 0.0);
    let b = Vec3::new(goal.x - sh.x, goal.y - sh.y, 0.0);
    if a.norm() < 1e-9 || b.norm() < 1e-9 {
        return None;
    }
    let cos = (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0);
    let mag = cos.acos();
    let cross = a.x * b.y - a.y * b.x;
    Some(if cross < 0.0 && mag < PI { -mag } else { mag })
}

/// First index of the rotation scan at which the object can be placed and a
/// collision-free held IK solution exists; every candidate is evaluated.
pub fn oracle_gamma_index(
    scene: &Scene,
    task: &PickPlaceTask,
    grasp: &Grasp,
    n_steps: usize,
    phi_samples: usize,
) -> Option<usize> {
    let gamma = oracle_gamma(
        &scene.arm,
        &task.start_pose.translation.vector,
        &task.goal_position,
    )
    .unwrap_or(0.0);
    let count = if gamma.abs() < 1e-15 { 1 } else { n_steps + 1 };
    let feasible: Vec<bool> = (0..count)
        .map(|i| {
            let yaw = gamma * i as f64 / n_steps as f64;
            let pose = RigidTransform::from_parts(
                Translation3::from(task.goal_position),
                UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw) * task.start_pose.rotation,
            );
            let placeable = !object_pose_in_collision(scene, &task.obj, &pose);
            let hand = pose * grasp.hand_to_object.inverse();
            let reachable = ik_solution_set(&scene.arm, &hand, phi_samples)
                .iter()
                .any(|s| !arm_in_collision(scene, &s.q, Some(Held::new(&task.obj, grasp))));
            placeable && reachable
        })
        .collect();
    feasible.iter().position(|&f| f)
}

/// Rim hand pose built by rotating the angle-zero frame about the vertical.
pub fn oracle_rim_pose(task: &PouringTask, theta: f64, clearance: f64) -> RigidTransform {
    let r_m = task.receiver.radius / 2.0 + task.pourer.radius;
    let frame0 = Matrix3::from_columns(&[
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, -1.0),
        Vec3::new(0.0, -1.0, 0.0),
    ]);
    let spin = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), theta);
    let rot =
        spin * UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(frame0));
    let c = task.receiver_pose.translation.vector;
    let p =
        c + spin * Vec3::new(r_m, 0.0, 0.0) + Vec3::new(0.0, 0.0, task.receiver.height + clearance);
    RigidTransform::from_parts(Translation3::from(p), rot)
}

/// Indices of rim angles `2 pi i / n` whose hand pose has any IK solution.
pub fn oracle_retained_thetas(
    scene: &Scene,
    task: &PouringTask,
    n_theta: usize,
    clearance: f64,
    phi_samples: usize,
) -> Vec<usize> {
    (0..n_theta)
        .filter(|&i| {
            let pose = oracle_rim_pose(task, 2.0 * PI * i as f64 / n_theta as f64, clearance);
            !ik_solution_set(&scene.arm, &pose, phi_samples).is_empty()
        })
        .collect()
}

// ------------------------------------------------------- scene helpers

pub fn upright(x: f64, y: f64, z: f64, yaw: f64) -> RigidTransform {
    RigidTransform::from_parts(
        Translation3::new(x, y, z),
        UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw),
    )
}

/// The bundled fixture's arm, table and obstacles with no objects.
pub fn fixture_scene() -> Scene {
    let f = Fixture::default_fixture();
    let mut s = Scene::empty(f.arm.clone());
    s.table = f.table;
    s.obstacles = f.obstacles.clone();
    s
}

/// Random rigid motion with a uniformly random rotation.
pub fn random_rigid(rng: &mut impl Rng) -> RigidTransform {
    let axis = Unit::new_normalize(Vec3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0) + 1e-3,
    ));
    RigidTransform::from_parts(
        Translation3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ),
        UnitQuaternion::from_axis_angle(&axis, rng.gen_range(-PI..PI)),
    )
}

/// Distance from the object's center of mass to the grasp approach line,
/// evaluated in world coordinates for an object placed at `pose`.
pub fn world_grasp_metric(obj_com: &Vec3, g: &Grasp, pose: &RigidTransform) -> f64 {
    let hand = pose * g.hand_to_object.inverse();
    let p = hand.transform_point(&g.approach_point.into()).coords;
    let d = hand.rotation * g.approach_dir.into_inner();
    let c = pose.transform_point(&(*obj_com).into()).coords;
    let w = c - p;
    (w - d * w.dot(&d)).norm()
}
