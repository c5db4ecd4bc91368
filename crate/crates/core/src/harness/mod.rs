//! Randomized scenarios, the Monte-Carlo suite, summaries and CSV output.

pub mod fixture;

use std::f64::consts::PI;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grasping::{generate_grasps, grasp_metric, Grasp};
use crate::metrics::{arm_metric, rank_mode, GraspEvaluation, Group, RankMode};
use crate::planner::{execute_task, ExecutionParams, Stage};
use crate::tasks::{
    assign_pour_guesses, goal_pose_guesses, pourer_pose_at, pouring_goal_guesses, PickPlaceTask,
    PouringTask, Task,
};
use crate::world::{object_pose_in_collision, Scene, SqObject};
use crate::{RigidTransform, Vec3};

pub use fixture::{Fixture, Region, Role, TaskKind, TaskSettings};

/// Sampling attempts per scenario before giving up.
pub const MAX_SAMPLING_ATTEMPTS: usize = 100;
pub const DEFAULT_TRIALS: usize = 100;

pub const CSV_HEADER: [&str; 9] = [
    "object",
    "mode",
    "trial",
    "success",
    "hand_disp_m",
    "plan_nodes",
    "plan_wall_s",
    "grasp_id",
    "group",
];

/// Which entry of a ranked set gets executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankChoice {
    Best,
    Worst,
    Index(usize),
}

impl RankChoice {
    pub fn resolve(self, len: usize) -> Option<usize> {
        match self {
            _ if len == 0 => None,
            RankChoice::Best => Some(0),
            RankChoice::Worst => Some(len - 1),
            RankChoice::Index(k) => (k < len).then_some(k),
        }
    }
}

impl FromStr for RankChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "best" => Ok(RankChoice::Best),
            "worst" => Ok(RankChoice::Worst),
            _ => s
                .strip_prefix("index:")
                .and_then(|k| k.parse().ok())
                .map(RankChoice::Index)
                .ok_or_else(|| format!("expected best, worst or index:<k>, found `{s}`")),
        }
    }
}

/// What a trial manipulates.
#[derive(Debug, Clone, PartialEq)]
pub enum Subject {
    Pick(SqObject),
    Pour {
        pourer: SqObject,
        receiver: SqObject,
    },
}

impl Subject {
    pub fn name(&self) -> String {
        match self {
            Subject::Pick(o) => o.name.clone(),
            Subject::Pour { pourer, receiver } => format!("{}+{}", pourer.name, receiver.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub trials: usize,
    pub task_kind: TaskKind,
    pub fixture: Fixture,
    pub subjects: Vec<Subject>,
    pub modes: Vec<RankMode>,
    pub rank: RankChoice,
    pub exec: ExecutionParams,
}

impl ScenarioConfig {
    /// Every fixture subject for `task_kind`, all three modes, best rank.
    pub fn new(fixture: Fixture, task_kind: TaskKind, seed: u64) -> Result<Self> {
        let settings = fixture
            .task(task_kind)
            .ok_or_else(|| Error::Config(format!("fixture has no `{}` task", task_kind.label())))?;
        let subjects = match task_kind {
            TaskKind::PickPlace => fixture
                .objects_with_role(Role::Pick)
                .cloned()
                .map(Subject::Pick)
                .collect(),
            TaskKind::Pour => settings
                .pairs
                .iter()
                .map(|(p, r)| Subject::Pour {
                    pourer: fixture.object(p).expect("validated").clone(),
                    receiver: fixture.object(r).expect("validated").clone(),
                })
                .collect(),
        };
        let config = ScenarioConfig {
            seed,
            trials: DEFAULT_TRIALS,
            task_kind,
            fixture,
            subjects,
            modes: RankMode::ALL.to_vec(),
            rank: RankChoice::Best,
            exec: ExecutionParams::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn settings(&self) -> &TaskSettings {
        self.fixture.task(self.task_kind).expect("validated")
    }

    /// Keeps only subjects whose name is in `names`.
    pub fn retain_subjects(&mut self, names: &[&str]) {
        self.subjects.retain(|s| names.contains(&s.name().as_str()));
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return cfg("trials must be at least 1");
        }
        if self.modes.is_empty() {
            return cfg("no ranking mode selected");
        }
        if self.subjects.is_empty() {
            return cfg("no objects to run");
        }
        if self.exec.phi_samples == 0 {
            return cfg("phi samples must be at least 1");
        }
        if self.exec.rrt.budget == 0 {
            return cfg("planner budget must be at least 1");
        }
        let Some(s) = self.fixture.task(self.task_kind) else {
            return cfg("fixture lacks the selected task");
        };
        if s.start_regions.is_empty() {
            return cfg("task has no start region");
        }
        let other = match self.task_kind {
            TaskKind::PickPlace => &s.goal_regions,
            TaskKind::Pour => &s.receiver_regions,
        };
        if other.is_empty() {
            return cfg("task has no goal or receiver region");
        }
        if s.gamma_steps == 0 || s.theta_samples == 0 {
            return cfg("gamma steps and theta samples must be at least 1");
        }
        if s.side_grasps + s.top_grasps == 0 {
            return cfg("no grasps requested");
        }
        let arm = &self.fixture.arm;
        let sh = arm.shoulder_point();
        let top = self.fixture.table.map(|t| t.top()).unwrap_or(0.0);
        for r in s.start_regions.iter().chain(other) {
            for (x, y) in [
                (r.x.0, r.y.0),
                (r.x.0, r.y.1),
                (r.x.1, r.y.0),
                (r.x.1, r.y.1),
            ] {
                if (Vec3::new(x, y, top) - sh).norm() > arm.gross_reach() {
                    return cfg("a sampling region extends beyond the arm's reach");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scene: Scene,
    pub task: Task,
}

fn subject_seed(seed: u64, subject: usize) -> u64 {
    seed ^ (subject as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn scenario_rng(seed: u64, subject: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(subject_seed(seed, subject));
    rng.set_stream(2 * trial);
    rng
}

/// Planner randomness for one trial; identical for every ranking mode.
pub fn execution_rng(seed: u64, subject: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(subject_seed(seed, subject));
    rng.set_stream(2 * trial + 1);
    rng
}

/// One region picked uniformly, then a uniform point inside it.
pub fn sample_in_regions(regions: &[Region], rng: &mut impl Rng) -> (f64, f64) {
    let r = regions[rng.gen_range(0..regions.len())];
    (rng.gen_range(r.x.0..=r.x.1), rng.gen_range(r.y.0..=r.y.1))
}

fn upright(x: f64, y: f64, z: f64, yaw: f64) -> RigidTransform {
    RigidTransform::from_parts(
        Translation3::new(x, y, z),
        UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw),
    )
}

fn base_scene(fixture: &Fixture) -> Scene {
    let mut scene = Scene::empty(fixture.arm.clone());
    scene.table = fixture.table;
    scene.obstacles = fixture.obstacles.clone();
    scene
}

/// Deterministic scenario for `(seed, subject, trial)`: upright objects at
/// uniformly sampled, collision-free positions with uniform yaw.
pub fn sample_scenario(config: &ScenarioConfig, subject: usize, trial: u64) -> Result<Scenario> {
    let mut rng = scenario_rng(config.seed, subject, trial);
    let s = config.settings();
    let base = base_scene(&config.fixture);
    let top = base.table_top();
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        match &config.subjects[subject] {
            Subject::Pick(obj) => {
                let (x, y) = sample_in_regions(&s.start_regions, &mut rng);
                let yaw = rng.gen_range(-PI..PI);
                let (gx, gy) = sample_in_regions(&s.goal_regions, &mut rng);
                let start = upright(x, y, top, yaw);
                let goal_check = upright(gx, gy, top, yaw);
                if object_pose_in_collision(&base, obj, &start)
                    || object_pose_in_collision(&base, obj, &goal_check)
                {
                    continue;
                }
                let mut task = PickPlaceTask::new(obj.clone(), start, Vec3::new(gx, gy, top));
                task.success_tolerance = s.success_tolerance;
                return Ok(Scenario {
                    scene: base.with_object(obj.clone(), start),
                    task: Task::PickPlace(task),
                });
            }
            Subject::Pour { pourer, receiver } => {
                let (rx, ry) = sample_in_regions(&s.receiver_regions, &mut rng);
                let ryaw = rng.gen_range(-PI..PI);
                let (x, y) = sample_in_regions(&s.start_regions, &mut rng);
                let yaw = rng.gen_range(-PI..PI);
                let rpose = upright(rx, ry, top, ryaw);
                let start = upright(x, y, top, yaw);
                if object_pose_in_collision(&base, receiver, &rpose) {
                    continue;
                }
                let with_receiver = base.clone().with_object(receiver.clone(), rpose);
                if object_pose_in_collision(&with_receiver, pourer, &start) {
                    continue;
                }
                let task = PouringTask::new(pourer.clone(), start, receiver.clone(), rpose);
                return Ok(Scenario {
                    scene: with_receiver.with_object(pourer.clone(), start),
                    task: Task::Pour(task),
                });
            }
        }
    }
    Err(Error::ScenarioInfeasible {
        trial,
        attempts: MAX_SAMPLING_ATTEMPTS,
    })
}

/// Candidate grasps (feasible at the start pose) with their metrics at the
/// start pose and at their goal guesses.
pub fn evaluate_candidates(config: &ScenarioConfig, scenario: &Scenario) -> Vec<GraspEvaluation> {
    let s = config.settings();
    let phi = config.exec.phi_samples;
    let scene = &scenario.scene;
    let obj = scenario.task.manipulated();
    let start = scenario.task.start_pose();
    let candidates: Vec<(Grasp, usize)> = generate_grasps(obj, s.side_grasps, s.top_grasps)
        .into_iter()
        .map(|g| {
            let m = arm_metric(scene, &start, obj, &g, phi);
            (g, m)
        })
        .filter(|(_, m)| *m > 0)
        .collect();
    let grasps: Vec<Grasp> = candidates.iter().map(|(g, _)| g.clone()).collect();

    let goals: Vec<(Option<RigidTransform>, Option<usize>)> = match &scenario.task {
        Task::PickPlace(t) => goal_pose_guesses(scene, t, &grasps, s.gamma_steps, phi)
            .into_iter()
            .zip(&grasps)
            .map(|(guess, g)| (guess, guess.map(|p| arm_metric(scene, &p, obj, g, phi))))
            .collect(),
        Task::Pour(t) => {
            let rims = pouring_goal_guesses(scene, t, s.theta_samples, s.rim_clearance, phi);
            assign_pour_guesses(&rims, &grasps, |g, pose| {
                arm_metric(scene, pose, obj, g, phi)
            })
            .into_iter()
            .zip(&grasps)
            .map(|(pick, g)| match pick {
                Some((i, m)) => (Some(pourer_pose_at(&rims[i], g)), Some(m)),
                None => (None, None),
            })
            .collect()
        }
    };

    candidates
        .into_iter()
        .zip(goals)
        .map(|((g, ma_start), (goal_guess, ma_goal))| GraspEvaluation {
            m_g: grasp_metric(obj, &g),
            grasp: g,
            ma_start,
            goal_guess,
            ma_goal,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub object: String,
    pub mode: RankMode,
    pub trial: u64,
    pub success: bool,
    /// Present only on success.
    pub hand_disp_m: Option<f64>,
    pub plan_nodes: usize,
    pub plan_wall_s: f64,
    pub grasp_id: Option<usize>,
    pub group: Option<Group>,
    pub failed_stage: Option<Stage>,
}

/// Results of one trial: a row per requested mode, plus whether the trial
/// had no usable scenario or no start-feasible grasp.
pub fn run_trial(config: &ScenarioConfig, subject: usize, trial: u64) -> (Vec<ResultRow>, bool) {
    let name = config.subjects[subject].name();
    let failed = |mode| ResultRow {
        object: name.clone(),
        mode,
        trial,
        success: false,
        hand_disp_m: None,
        plan_nodes: 0,
        plan_wall_s: 0.0,
        grasp_id: None,
        group: None,
        failed_stage: Some(Stage::Reach),
    };
    let Ok(scenario) = sample_scenario(config, subject, trial) else {
        return (config.modes.iter().map(|&m| failed(m)).collect(), true);
    };
    let evals = evaluate_candidates(config, &scenario);
    if evals.is_empty() {
        return (config.modes.iter().map(|&m| failed(m)).collect(), true);
    }
    let rows = config
        .modes
        .iter()
        .map(|&mode| {
            let ranked = rank_mode(&evals, mode);
            let Some(k) = config.rank.resolve(ranked.len()) else {
                return failed(mode);
            };
            let mut rng = execution_rng(config.seed, subject, trial);
            let out = execute_task(
                &scenario.scene,
                &scenario.task,
                &ranked,
                k,
                &config.exec,
                &mut rng,
            );
            ResultRow {
                object: name.clone(),
                mode,
                trial,
                success: out.success,
                hand_disp_m: out.success.then_some(out.hand_displacement),
                plan_nodes: out.plan_nodes,
                plan_wall_s: out.wall_seconds,
                grasp_id: out.grasp_id,
                group: out.group,
                failed_stage: out.failed_stage,
            }
        })
        .collect();
    (rows, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub object: String,
    pub mode: RankMode,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean over successful trials.
    pub mean_hand_disp_m: Option<f64>,
    pub mean_plan_nodes: f64,
    pub mean_plan_wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// Trials without a usable scenario or start-feasible grasp.
    pub infeasible_trials: usize,
    pub total_trials: usize,
}

impl SuiteReport {
    pub fn all_infeasible(&self) -> bool {
        self.total_trials > 0 && self.infeasible_trials == self.total_trials
    }

    pub fn summary_for(&self, object: &str, mode: RankMode) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.object == object && s.mode == mode)
    }
}

/// Runs every (subject, trial) pair and aggregates per object and mode.
pub fn run_suite(config: &ScenarioConfig) -> SuiteReport {
    let jobs: Vec<(usize, u64)> = (0..config.subjects.len())
        .flat_map(|s| (0..config.trials as u64).map(move |t| (s, t)))
        .collect();
    let results: Vec<(Vec<ResultRow>, bool)> = jobs
        .par_iter()
        .map(|&(s, t)| run_trial(config, s, t))
        .collect();
    let infeasible = results.iter().filter(|r| r.1).count();
    let rows: Vec<ResultRow> = results.into_iter().flat_map(|r| r.0).collect();
    SuiteReport {
        summary: summarize(&rows),
        rows,
        infeasible_trials: infeasible,
        total_trials: jobs.len(),
    }
}

/// Per (object, mode) aggregates, in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, RankMode)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(o, m)| *o == r.object && *m == r.mode) {
            keys.push((r.object.clone(), r.mode));
        }
    }
    keys.into_iter()
        .map(|(object, mode)| {
            let sel: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.object == object && r.mode == mode)
                .collect();
            let n = sel.len();
            let disps: Vec<f64> = sel.iter().filter_map(|r| r.hand_disp_m).collect();
            let successes = sel.iter().filter(|r| r.success).count();
            SummaryRow {
                object,
                mode,
                trials: n,
                successes,
                success_rate: successes as f64 / n as f64,
                mean_hand_disp_m: (!disps.is_empty())
                    .then(|| disps.iter().sum::<f64>() / disps.len() as f64),
                mean_plan_nodes: sel.iter().map(|r| r.plan_nodes as f64).sum::<f64>() / n as f64,
                mean_plan_wall_s: sel.iter().map(|r| r.plan_wall_s).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.object.clone(),
            r.mode.label().to_string(),
            r.trial.to_string(),
            r.success.to_string(),
            r.hand_disp_m.map(|d| format!("{d:.6}")).unwrap_or_default(),
            r.plan_nodes.to_string(),
            format!("{:.6}", r.plan_wall_s),
            r.grasp_id.map(|g| g.to_string()).unwrap_or_default(),
            r.group.map(|g| g.label().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ScenarioConfig {
        ScenarioConfig::new(Fixture::default_fixture(), TaskKind::PickPlace, 42).unwrap()
    }

    #[test]
    fn rank_choice_parsing() {
        assert_eq!("best".parse::<RankChoice>(), Ok(RankChoice::Best));
        assert_eq!("worst".parse::<RankChoice>(), Ok(RankChoice::Worst));
        assert_eq!("index:3".parse::<RankChoice>(), Ok(RankChoice::Index(3)));
        assert!("index:x".parse::<RankChoice>().is_err());
        assert_eq!(RankChoice::Worst.resolve(5), Some(4));
        assert_eq!(RankChoice::Index(5).resolve(5), None);
        assert_eq!(RankChoice::Best.resolve(0), None);
    }

    #[test]
    fn scenarios_are_deterministic() {
        let c = config();
        assert_eq!(
            sample_scenario(&c, 0, 7).unwrap(),
            sample_scenario(&c, 0, 7).unwrap()
        );
        assert_ne!(
            sample_scenario(&c, 0, 7).unwrap(),
            sample_scenario(&c, 0, 8).unwrap()
        );
    }

    #[test]
    fn zero_trials_is_a_config_error() {
        let mut c = config();
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![ResultRow {
            object: "can".into(),
            mode: RankMode::Average,
            trial: 3,
            success: false,
            hand_disp_m: None,
            plan_nodes: 12,
            plan_wall_s: 0.5,
            grasp_id: Some(4),
            group: Some(Group::Good),
            failed_stage: Some(Stage::Transport),
        }];
        let s = csv_string(&rows);
        assert_eq!(
            s,
            "object,mode,trial,success,hand_disp_m,plan_nodes,plan_wall_s,grasp_id,group\ncan,average,3,false,,12,0.500000,4,good\n"
        );
    }
}
