//! Joint-space RRT-Connect and the staged task executor.

use std::fmt;
use std::time::Instant;

use nalgebra::Translation3;
use rand::Rng;

use crate::grasping::Grasp;
use crate::kinematics::{
    forward_kinematics, ik_on_branch, ik_solution_set, IkSolution, JointConfig, NUM_JOINTS,
};
use crate::metrics::{Group, RankedGraspSet};
use crate::tasks::{
    pouring_goal_guesses, tilt_roll, PickPlaceTask, PouringTask, Task, DEFAULT_RIM_CLEARANCE,
    DEFAULT_THETA_SAMPLES,
};
use crate::world::{CollisionQuery, Held, Scene};
use crate::RigidTransform;

pub const DEFAULT_BUDGET: usize = 50_000;
/// Joint-space spacing of collision checks along a segment (infinity norm).
pub const VALIDITY_RESOLUTION: f64 = 0.02;
pub const DEFAULT_STEP: f64 = 0.1;
pub const DEFAULT_GOAL_BIAS: f64 = 0.1;
/// Approach and retreat distance along the hand's approach axis.
pub const DEFAULT_STANDOFF: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtParams {
    /// Maximum tree edge length, radians (Euclidean).
    pub step: f64,
    pub goal_bias: f64,
    pub resolution: f64,
    /// Maximum number of tree nodes added per query.
    pub budget: usize,
    /// Randomized shortcutting of returned paths.
    pub shortcut: bool,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            step: DEFAULT_STEP,
            goal_bias: DEFAULT_GOAL_BIAS,
            resolution: VALIDITY_RESOLUTION,
            budget: DEFAULT_BUDGET,
            shortcut: false,
        }
    }
}

/// Piecewise-linear joint path.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPath {
    pub waypoints: Vec<JointConfig>,
    pub resolution: f64,
}

impl JointPath {
    pub fn single(q: JointConfig, resolution: f64) -> Self {
        JointPath {
            waypoints: vec![q],
            resolution,
        }
    }

    pub fn start(&self) -> &JointConfig {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &JointConfig {
        self.waypoints.last().expect("paths are non-empty")
    }

    /// Dense configurations along the path, one every `resolution` radians.
    pub fn densified(&self) -> Vec<JointConfig> {
        let mut out = vec![self.waypoints[0]];
        for w in self.waypoints.windows(2) {
            let n = segment_steps(&w[0], &w[1], self.resolution);
            for i in 1..=n {
                out.push(w[0].lerp(&w[1], i as f64 / n as f64));
            }
        }
        out
    }

    /// Summed tool-point chord length over the densified path, meters.
    pub fn hand_displacement(&self, arm: &crate::kinematics::ArmModel) -> f64 {
        let pts: Vec<_> = self
            .densified()
            .iter()
            .map(|q| forward_kinematics(arm, q).translation.vector)
            .collect();
        pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Every waypoint and every interpolated configuration is collision-free.
    pub fn is_valid(&self, query: &CollisionQuery<'_>) -> bool {
        self.densified().iter().all(|q| !query.arm_collides(q))
    }

    fn append(&mut self, other: &JointPath) {
        let skip = usize::from(self.end().max_abs_diff(other.start()) < 1e-12);
        self.waypoints.extend_from_slice(&other.waypoints[skip..]);
    }
}

fn segment_steps(a: &JointConfig, b: &JointConfig, resolution: f64) -> usize {
    ((a.max_abs_diff(b) / resolution).ceil() as usize).max(1)
}

/// Interior and end configurations of `a -> b` are collision-free; `a` is
/// assumed checked.
pub fn segment_valid(
    query: &CollisionQuery<'_>,
    a: &JointConfig,
    b: &JointConfig,
    resolution: f64,
) -> bool {
    let n = segment_steps(a, b, resolution);
    (1..=n).all(|i| !query.arm_collides(&a.lerp(b, i as f64 / n as f64)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub path: Option<JointPath>,
    /// Tree nodes added, both trees together.
    pub nodes: usize,
}

struct Tree {
    nodes: Vec<[f64; NUM_JOINTS]>,
    parent: Vec<usize>,
}

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

impl Tree {
    fn new(root: &JointConfig) -> Self {
        Tree {
            nodes: vec![root.0],
            parent: vec![usize::MAX],
        }
    }

    fn nearest(&self, q: &[f64; NUM_JOINTS]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let d: f64 = n.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn extend(
        &mut self,
        target: &[f64; NUM_JOINTS],
        query: &CollisionQuery<'_>,
        p: &RrtParams,
    ) -> Extend {
        let near = self.nearest(target);
        let from = JointConfig(self.nodes[near]);
        let to = JointConfig(*target);
        let d = from.distance(&to);
        let (new, reached) = if d <= p.step {
            (to, true)
        } else {
            (from.lerp(&to, p.step / d), false)
        };
        if !segment_valid(query, &from, &new, p.resolution) {
            return Extend::Trapped;
        }
        self.nodes.push(new.0);
        self.parent.push(near);
        let idx = self.nodes.len() - 1;
        if reached {
            Extend::Reached(idx)
        } else {
            Extend::Advanced(idx)
        }
    }

    fn branch_to_root(&self, mut i: usize) -> Vec<JointConfig> {
        let mut out = Vec::new();
        while i != usize::MAX {
            out.push(JointConfig(self.nodes[i]));
            i = self.parent[i];
        }
        out
    }
}

fn sample(arm: &crate::kinematics::ArmModel, rng: &mut impl Rng) -> [f64; NUM_JOINTS] {
    let mut q = [0.0; NUM_JOINTS];
    for (v, (lo, hi)) in q.iter_mut().zip(arm.joint_limits) {
        *v = rng.gen_range(lo..=hi);
    }
    q
}

/// Bidirectional RRT between two configurations.
///
/// Returns no path if an endpoint collides or the node budget runs out.
/// The direct segment is tried before any tree growth.
pub fn plan_rrt(
    query: &CollisionQuery<'_>,
    q_start: &JointConfig,
    q_goal: &JointConfig,
    params: &RrtParams,
    rng: &mut impl Rng,
) -> PlanResult {
    let res = params.resolution;
    let fail = |nodes| PlanResult { path: None, nodes };
    if query.arm_collides(q_start) || query.arm_collides(q_goal) {
        return fail(0);
    }
    if q_start.max_abs_diff(q_goal) < 1e-12 {
        return PlanResult {
            path: Some(JointPath::single(*q_start, res)),
            nodes: 0,
        };
    }
    if segment_valid(query, q_start, q_goal, res) {
        return PlanResult {
            path: Some(JointPath {
                waypoints: vec![*q_start, *q_goal],
                resolution: res,
            }),
            nodes: 0,
        };
    }

    let arm = &query.scene.arm;
    let mut a = Tree::new(q_start);
    let mut b = Tree::new(q_goal);
    let mut a_is_start = true;
    let mut added = 0usize;
    while added < params.budget {
        let target = if rng.gen::<f64>() < params.goal_bias {
            b.nodes[0]
        } else {
            sample(arm, rng)
        };
        let before = a.nodes.len() + b.nodes.len();
        let joined = match a.extend(&target, query, params) {
            Extend::Trapped => None,
            Extend::Advanced(i) | Extend::Reached(i) => {
                let goal = a.nodes[i];
                loop {
                    match b.extend(&goal, query, params) {
                        Extend::Advanced(_)
                            if a.nodes.len() + b.nodes.len() - before + added < params.budget =>
                        {
                            continue
                        }
                        Extend::Reached(j) => break Some((i, j)),
                        _ => break None,
                    }
                }
            }
        };
        added += a.nodes.len() + b.nodes.len() - before;
        if let Some((i, j)) = joined {
            let (si, gi, st, gt) = if a_is_start {
                (i, j, &a, &b)
            } else {
                (j, i, &b, &a)
            };
            let mut waypoints = st.branch_to_root(si);
            waypoints.reverse();
            let tail = gt.branch_to_root(gi);
            // Both branches end at the shared configuration.
            waypoints.extend_from_slice(&tail[1..]);
            let mut path = JointPath {
                waypoints,
                resolution: res,
            };
            if params.shortcut {
                shortcut(&mut path, query, rng, 100);
            }
            return PlanResult {
                path: Some(path),
                nodes: added,
            };
        }
        std::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    fail(added)
}

/// Randomized shortcutting: replace a sub-path by its chord when valid.
pub fn shortcut(
    path: &mut JointPath,
    query: &CollisionQuery<'_>,
    rng: &mut impl Rng,
    iterations: usize,
) {
    for _ in 0..iterations {
        let n = path.waypoints.len();
        if n < 3 {
            return;
        }
        let i = rng.gen_range(0..n - 2);
        let j = rng.gen_range(i + 2..n);
        if segment_valid(
            query,
            &path.waypoints[i],
            &path.waypoints[j],
            path.resolution,
        ) {
            path.waypoints.drain(i + 1..j);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Reach,
    Transport,
    Place,
    Tilt,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Reach => "reach",
            Stage::Transport => "transport",
            Stage::Place => "place",
            Stage::Tilt => "tilt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutionParams {
    pub rrt: RrtParams,
    pub phi_samples: usize,
    pub standoff: f64,
    pub theta_samples: usize,
    pub rim_clearance: f64,
    /// Candidate configurations tried per planned stage.
    pub attempts: usize,
}

impl Default for ExecutionParams {
    fn default() -> Self {
        ExecutionParams {
            rrt: RrtParams::default(),
            phi_samples: crate::kinematics::DEFAULT_PHI_SAMPLES,
            standoff: DEFAULT_STANDOFF,
            theta_samples: DEFAULT_THETA_SAMPLES,
            rim_clearance: DEFAULT_RIM_CLEARANCE,
            attempts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub success: bool,
    pub failed_stage: Option<Stage>,
    /// Tool-point path length, meters. Meaningful on success.
    pub hand_displacement: f64,
    pub plan_nodes: usize,
    pub wall_seconds: f64,
    pub grasp_id: Option<usize>,
    pub group: Option<Group>,
    /// Executed paths, one per completed motion.
    pub paths: Vec<JointPath>,
    /// Object position at the end of the run.
    pub final_object_position: Option<crate::Vec3>,
}

struct Run<'a> {
    scene: &'a Scene,
    params: &'a ExecutionParams,
    nodes: usize,
    paths: Vec<JointPath>,
}

impl<'a> Run<'a> {
    fn plan(
        &mut self,
        query: &CollisionQuery<'_>,
        a: &JointConfig,
        b: &JointConfig,
        rng: &mut impl Rng,
    ) -> Option<JointPath> {
        let r = plan_rrt(query, a, b, &self.params.rrt, rng);
        self.nodes += r.nodes;
        r.path
    }

    /// Reach: ready -> pregrasp (RRT) -> grasp (straight approach).
    fn reach(
        &mut self,
        grasp: &Grasp,
        obj_name: &str,
        start: &RigidTransform,
        held: Held<'_>,
        rng: &mut impl Rng,
    ) -> Option<JointConfig> {
        let scene = self.scene;
        let arm = &scene.arm;
        let p = self.params;
        let target = grasp.hand_pose(start);
        let pre_pose = target * Translation3::new(0.0, 0.0, -p.standoff);
        let holding = CollisionQuery::new(scene).holding(held);
        let full = CollisionQuery::new(scene);
        let touch = CollisionQuery::new(scene).hand_may_touch(obj_name);
        let candidates = sorted_by_distance(
            ik_solution_set(arm, &target, p.phi_samples)
                .into_iter()
                .filter(|s| !holding.arm_collides(&s.q))
                .collect(),
            &arm.ready,
        );
        let mut tried = 0;
        for s in candidates {
            if tried >= p.attempts {
                break;
            }
            let Some(q_pre) = ik_on_branch(arm, &pre_pose, s.phi, s.branch) else {
                continue;
            };
            if full.arm_collides(&q_pre) || !segment_valid(&touch, &q_pre, &s.q, p.rrt.resolution) {
                continue;
            }
            tried += 1;
            if let Some(mut path) = self.plan(&full, &arm.ready, &q_pre, rng) {
                path.append(&JointPath {
                    waypoints: vec![q_pre, s.q],
                    resolution: p.rrt.resolution,
                });
                self.paths.push(path);
                return Some(s.q);
            }
        }
        None
    }
}

fn sorted_by_distance(mut v: Vec<IkSolution>, from: &JointConfig) -> Vec<IkSolution> {
    v.sort_by(|a, b| a.q.distance(from).total_cmp(&b.q.distance(from)));
    v
}

impl TaskOutcome {
    fn failure(
        stage: Stage,
        run: Run<'_>,
        t0: Instant,
        grasp_id: Option<usize>,
        group: Option<Group>,
    ) -> Self {
        TaskOutcome {
            success: false,
            failed_stage: Some(stage),
            hand_displacement: 0.0,
            plan_nodes: run.nodes,
            wall_seconds: t0.elapsed().as_secs_f64(),
            grasp_id,
            group,
            paths: run.paths,
            final_object_position: None,
        }
    }
}

/// Executes the grasp at `pick_rank` of `ranked` and reports the outcome.
///
/// Pick-and-place: reach, transport to the grasp's goal guess, release and
/// return to the ready configuration. Pouring: reach, transport to a rim pose
/// from which the wrist-roll tilt is feasible, tilt.
pub fn execute_task(
    scene: &Scene,
    task: &Task,
    ranked: &RankedGraspSet,
    pick_rank: usize,
    params: &ExecutionParams,
    rng: &mut impl Rng,
) -> TaskOutcome {
    let t0 = Instant::now();
    let mut run = Run {
        scene,
        params,
        nodes: 0,
        paths: Vec::new(),
    };
    let Some(entry) = ranked.at_rank(pick_rank) else {
        return TaskOutcome::failure(Stage::Reach, run, t0, None, None);
    };
    let grasp = &entry.grasp;
    let (gid, group) = (Some(grasp.id), Some(entry.group));
    let obj = task.manipulated();
    let held = Held::new(obj, grasp);
    let start = task.start_pose();

    let Some(q_grasp) = run.reach(grasp, &obj.name, &start, held, rng) else {
        return TaskOutcome::failure(Stage::Reach, run, t0, gid, group);
    };

    let arm = &scene.arm;
    let res = params.rrt.resolution;
    let holding = CollisionQuery::new(scene).holding(held);
    match task {
        Task::PickPlace(t) => {
            let Some(goal_pose) = entry.goal_guess else {
                return TaskOutcome::failure(Stage::Transport, run, t0, gid, group);
            };
            let placed = scene.moving_object(&obj.name, goal_pose);
            let Some((q_goal, q_retreat)) = transport_pick_place(
                &mut run, t, grasp, &goal_pose, &holding, &placed, &q_grasp, rng,
            ) else {
                return TaskOutcome::failure(Stage::Transport, run, t0, gid, group);
            };
            let full = CollisionQuery::new(&placed);
            let Some(back) = run.plan(&full, &q_retreat, &arm.ready, rng) else {
                return TaskOutcome::failure(Stage::Place, run, t0, gid, group);
            };
            let mut place = JointPath {
                waypoints: vec![q_goal, q_retreat],
                resolution: res,
            };
            place.append(&back);
            run.paths.push(place);
            let final_pos = held
                .object_pose(&forward_kinematics(arm, &q_goal))
                .translation
                .vector;
            let ok = (final_pos - t.goal_position).norm() <= t.success_tolerance;
            finish(run, t0, gid, group, ok, Stage::Place, final_pos)
        }
        Task::Pour(t) => {
            let Some((q_goal, roll)) = transport_pour(
                &mut run,
                t,
                grasp,
                entry.goal_guess,
                &holding,
                &q_grasp,
                rng,
            ) else {
                return TaskOutcome::failure(Stage::Transport, run, t0, gid, group);
            };
            let mut q_tilt = q_goal;
            q_tilt.0[6] += roll;
            if !segment_valid(&holding, &q_goal, &q_tilt, res) {
                return TaskOutcome::failure(Stage::Tilt, run, t0, gid, group);
            }
            run.paths.push(JointPath {
                waypoints: vec![q_goal, q_tilt],
                resolution: res,
            });
            let final_pos = held
                .object_pose(&forward_kinematics(arm, &q_tilt))
                .translation
                .vector;
            finish(run, t0, gid, group, true, Stage::Tilt, final_pos)
        }
    }
}

fn finish(
    run: Run<'_>,
    t0: Instant,
    grasp_id: Option<usize>,
    group: Option<Group>,
    ok: bool,
    last: Stage,
    final_pos: crate::Vec3,
) -> TaskOutcome {
    let arm = &run.scene.arm;
    let disp = run.paths.iter().map(|p| p.hand_displacement(arm)).sum();
    TaskOutcome {
        success: ok,
        failed_stage: (!ok).then_some(last),
        hand_displacement: disp,
        plan_nodes: run.nodes,
        wall_seconds: t0.elapsed().as_secs_f64(),
        grasp_id,
        group,
        paths: run.paths,
        final_object_position: Some(final_pos),
    }
}

#[allow(clippy::too_many_arguments)]
fn transport_pick_place(
    run: &mut Run<'_>,
    _task: &PickPlaceTask,
    grasp: &Grasp,
    goal_pose: &RigidTransform,
    holding: &CollisionQuery<'_>,
    placed: &Scene,
    q_grasp: &JointConfig,
    rng: &mut impl Rng,
) -> Option<(JointConfig, JointConfig)> {
    let arm = &run.scene.arm;
    let p = run.params;
    let target = grasp.hand_pose(goal_pose);
    let retreat_pose = target * Translation3::new(0.0, 0.0, -p.standoff);
    let obj_name = holding.held.map(|h| h.object.name.as_str()).unwrap_or("");
    let after = CollisionQuery::new(placed);
    let touch = CollisionQuery::new(placed).hand_may_touch(obj_name);
    let candidates = sorted_by_distance(
        ik_solution_set(arm, &target, p.phi_samples)
            .into_iter()
            .filter(|s| !holding.arm_collides(&s.q))
            .collect(),
        q_grasp,
    );
    let mut tried = 0;
    for s in candidates {
        if tried >= p.attempts {
            break;
        }
        let Some(q_retreat) = ik_on_branch(arm, &retreat_pose, s.phi, s.branch) else {
            continue;
        };
        if after.arm_collides(&q_retreat)
            || !segment_valid(&touch, &s.q, &q_retreat, p.rrt.resolution)
        {
            continue;
        }
        tried += 1;
        if let Some(path) = run.plan(holding, q_grasp, &s.q, rng) {
            run.paths.push(path);
            return Some((s.q, q_retreat));
        }
    }
    None
}

fn transport_pour(
    run: &mut Run<'_>,
    task: &PouringTask,
    grasp: &Grasp,
    guess: Option<RigidTransform>,
    holding: &CollisionQuery<'_>,
    q_grasp: &JointConfig,
    rng: &mut impl Rng,
) -> Option<(JointConfig, f64)> {
    let scene = run.scene;
    let p = run.params;
    let mut targets: Vec<RigidTransform> = guess.iter().map(|g| grasp.hand_pose(g)).collect();
    targets.extend(
        pouring_goal_guesses(scene, task, p.theta_samples, p.rim_clearance, p.phi_samples)
            .into_iter()
            .map(|r| r.hand_pose),
    );
    let mut tried = 0;
    for target in targets {
        let candidates = sorted_by_distance(
            ik_solution_set(&scene.arm, &target, p.phi_samples)
                .into_iter()
                .filter(|s| !holding.arm_collides(&s.q))
                .collect(),
            q_grasp,
        );
        for s in candidates {
            if tried >= p.attempts {
                return None;
            }
            let Some(roll) = tilt_roll(scene, task, &s.q, grasp) else {
                continue;
            };
            tried += 1;
            if let Some(path) = run.plan(holding, q_grasp, &s.q, rng) {
                run.paths.push(path);
                return Some((s.q, roll));
            }
        }
    }
    None
}
