//! Arm metric, the grouped arm-and-grasp ordering, and its start/goal variants.

use std::fmt;

use crate::grasping::{grasp_metric, Grasp};
use crate::kinematics::ik_solution_set;
use crate::world::{CollisionQuery, Held, Scene, SqObject};
use crate::RigidTransform;

/// Arm-metric quality bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    VeryGood,
    Good,
    Fair,
    Bad,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::VeryGood => "very_good",
            Group::Good => "good",
            Group::Fair => "fair",
            Group::Bad => "bad",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where the arm metric is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankMode {
    Start,
    Goal,
    Average,
}

impl RankMode {
    pub const ALL: [RankMode; 3] = [RankMode::Start, RankMode::Goal, RankMode::Average];

    pub fn label(self) -> &'static str {
        match self {
            RankMode::Start => "start",
            RankMode::Goal => "goal",
            RankMode::Average => "average",
        }
    }
}

impl fmt::Display for RankMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub grasp: Grasp,
    /// Arm metric used for binning. A raw count for single-pose rankings,
    /// a sum of feature-scaled counts for the averaged ranking.
    pub m_a: f64,
    pub m_g: f64,
    pub group: Group,
    pub goal_guess: Option<RigidTransform>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedGraspSet {
    pub entries: Vec<RankedEntry>,
    /// Indices into `entries`, best first.
    pub order: Vec<usize>,
    pub mean: f64,
    /// Population standard deviation of `m_a`.
    pub std_dev: f64,
}

impl RankedGraspSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ordered(&self) -> impl Iterator<Item = &RankedEntry> + '_ {
        self.order.iter().map(move |&i| &self.entries[i])
    }

    pub fn at_rank(&self, rank: usize) -> Option<&RankedEntry> {
        self.order.get(rank).map(|&i| &self.entries[i])
    }

    /// Grasp ids, best first.
    pub fn ordered_ids(&self) -> Vec<usize> {
        self.ordered().map(|e| e.grasp.id).collect()
    }
}

/// Number of distinct collision-free IK solutions that execute `g` on `obj`
/// placed at `obj_pose`. The object is treated as held, so a scene copy of
/// it is ignored.
pub fn arm_metric(
    scene: &Scene,
    obj_pose: &RigidTransform,
    obj: &SqObject,
    g: &Grasp,
    phi_samples: usize,
) -> usize {
    let target = g.hand_pose(obj_pose);
    let query = CollisionQuery::new(scene).holding(Held::new(obj, g));
    ik_solution_set(&scene.arm, &target, phi_samples)
        .iter()
        .filter(|s| !query.arm_collides(&s.q))
        .count()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Bins `m_a` against `mean +- std`. Each bin is closed from above; a value
/// equal to the mean is always fair.
pub fn classify(m_a: f64, mean: f64, std_dev: f64) -> Group {
    let tol = 1e-9 * std_dev.max(mean.abs()).max(f64::MIN_POSITIVE);
    let gt = |a: f64, b: f64| a - b > tol;
    if gt(m_a, mean + std_dev) {
        Group::VeryGood
    } else if gt(m_a, mean) {
        Group::Good
    } else if !gt(mean, m_a) || gt(m_a, mean - std_dev) {
        Group::Fair
    } else {
        Group::Bad
    }
}

fn rank_entries(items: Vec<(Grasp, f64, f64, Option<RigidTransform>)>) -> RankedGraspSet {
    let values: Vec<f64> = items.iter().map(|i| i.1).collect();
    let (mean, std_dev) = mean_std(&values);
    let entries: Vec<RankedEntry> = items
        .into_iter()
        .map(|(grasp, m_a, m_g, goal_guess)| RankedEntry {
            group: classify(m_a, mean, std_dev),
            grasp,
            m_a,
            m_g,
            goal_guess,
        })
        .collect();
    let mut order: Vec<usize> = (0..entries.len()).collect();
    // Stable sort keeps the original index as the final tie-break.
    order.sort_by(|&a, &b| {
        let (x, y) = (&entries[a], &entries[b]);
        x.group.cmp(&y.group).then(x.m_g.total_cmp(&y.m_g))
    });
    RankedGraspSet {
        entries,
        order,
        mean,
        std_dev,
    }
}

/// Groups `(grasp, m_a, m_g)` triples into four `m_a` bins and sorts by
/// ascending `m_g` inside each bin.
pub fn rank_m_ag(entries: &[(Grasp, f64, f64)]) -> RankedGraspSet {
    rank_entries(
        entries
            .iter()
            .map(|(g, a, m)| (g.clone(), *a, *m, None))
            .collect(),
    )
}

/// Maps `xs` affinely onto [0, 1]; an all-equal vector maps to zeros.
pub fn feature_scale(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / span).collect()
}

/// Per-grasp inputs shared by the three ranking modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspEvaluation {
    pub grasp: Grasp,
    pub m_g: f64,
    pub ma_start: usize,
    pub goal_guess: Option<RigidTransform>,
    /// Arm metric at the goal guess; `None` when there is no guess.
    pub ma_goal: Option<usize>,
}

/// Computes `m_g`, `m_a` at the start pose and `m_a` at each goal guess.
pub fn evaluate_grasps(
    scene: &Scene,
    obj: &SqObject,
    grasps: &[Grasp],
    start_pose: &RigidTransform,
    goal_guesses: &[Option<RigidTransform>],
    phi_samples: usize,
) -> Vec<GraspEvaluation> {
    assert_eq!(grasps.len(), goal_guesses.len(), "one goal guess per grasp");
    grasps
        .iter()
        .zip(goal_guesses)
        .map(|(g, guess)| GraspEvaluation {
            grasp: g.clone(),
            m_g: grasp_metric(obj, g),
            ma_start: arm_metric(scene, start_pose, obj, g, phi_samples),
            goal_guess: *guess,
            ma_goal: guess.map(|p| arm_metric(scene, &p, obj, g, phi_samples)),
        })
        .collect()
}

/// Ranks pre-computed evaluations under `mode`.
///
/// Start mode keeps every grasp. Goal and average modes drop grasps without
/// a goal guess; average mode feature-scales the start and goal arm metrics
/// over the remaining grasps and sums them.
pub fn rank_mode(evals: &[GraspEvaluation], mode: RankMode) -> RankedGraspSet {
    match mode {
        RankMode::Start => rank_entries(
            evals
                .iter()
                .map(|e| (e.grasp.clone(), e.ma_start as f64, e.m_g, e.goal_guess))
                .collect(),
        ),
        RankMode::Goal => rank_entries(
            evals
                .iter()
                .filter_map(|e| {
                    e.ma_goal
                        .map(|ma| (e.grasp.clone(), ma as f64, e.m_g, e.goal_guess))
                })
                .collect(),
        ),
        RankMode::Average => {
            let kept: Vec<&GraspEvaluation> =
                evals.iter().filter(|e| e.goal_guess.is_some()).collect();
            let start: Vec<f64> = kept.iter().map(|e| e.ma_start as f64).collect();
            let goal: Vec<f64> = kept.iter().map(|e| e.ma_goal.unwrap_or(0) as f64).collect();
            let start = feature_scale(&start);
            let goal = feature_scale(&goal);
            rank_entries(
                kept.iter()
                    .enumerate()
                    .map(|(i, e)| (e.grasp.clone(), start[i] + goal[i], e.m_g, e.goal_guess))
                    .collect(),
            )
        }
    }
}

/// Start+goal averaged ranking: arm metrics at the start pose and at each
/// grasp's goal guess are feature-scaled, summed and binned; grasps without
/// a goal guess are left out. Empty when no grasp has a guess.
pub fn rank_average(
    scene: &Scene,
    obj: &SqObject,
    grasps: &[Grasp],
    start_pose: &RigidTransform,
    goal_guesses: &[Option<RigidTransform>],
    phi_samples: usize,
) -> RankedGraspSet {
    let evals = evaluate_grasps(scene, obj, grasps, start_pose, goal_guesses, phi_samples);
    rank_mode(&evals, RankMode::Average)
}
