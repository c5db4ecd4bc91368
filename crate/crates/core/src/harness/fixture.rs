//! Line-oriented fixture files.
//!
//! ```text
//! # comment
//! [arm]
//! upper_arm = 0.35
//! [object]
//! name = can
//! shape = cylinder
//! radius = 0.05
//! height = 0.14
//! ```
//!
//! The full grammar is in `docs/fixture-format.md`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Translation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, JointConfig, NUM_JOINTS};
use crate::tasks::{
    DEFAULT_GAMMA_STEPS, DEFAULT_RIM_CLEARANCE, DEFAULT_SUCCESS_TOLERANCE, DEFAULT_THETA_SAMPLES,
};
use crate::world::{Obstacle, ShapeClass, SqObject, Table};
use crate::{RigidTransform, Vec3};

/// The fixture shipped with the crate.
pub const DEFAULT_FIXTURE: &str = include_str!("../../../../fixtures/default.fix");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    PickPlace,
    Pour,
}

impl TaskKind {
    pub fn label(self) -> &'static str {
        match self {
            TaskKind::PickPlace => "pick-place",
            TaskKind::Pour => "pour",
        }
    }
}

impl FromStr for TaskKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pick-place" | "pick_place" => Ok(TaskKind::PickPlace),
            "pour" => Ok(TaskKind::Pour),
            _ => Err(format!("unknown task kind `{s}`")),
        }
    }
}

/// Axis-aligned rectangle on the table plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Region {
    pub fn contains(&self, p: &Vec3) -> bool {
        p.x >= self.x.0 && p.x <= self.x.1 && p.y >= self.y.0 && p.y <= self.y.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Pick,
    Pourer,
    Receiver,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureObject {
    pub object: SqObject,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSettings {
    pub kind: TaskKind,
    pub start_regions: Vec<Region>,
    pub goal_regions: Vec<Region>,
    pub receiver_regions: Vec<Region>,
    pub side_grasps: usize,
    pub top_grasps: usize,
    pub gamma_steps: usize,
    pub theta_samples: usize,
    pub rim_clearance: f64,
    pub success_tolerance: f64,
    /// Pourer/receiver name pairs.
    pub pairs: Vec<(String, String)>,
}

impl TaskSettings {
    fn new(kind: TaskKind) -> Self {
        TaskSettings {
            kind,
            start_regions: Vec::new(),
            goal_regions: Vec::new(),
            receiver_regions: Vec::new(),
            side_grasps: 8,
            top_grasps: if kind == TaskKind::Pour { 0 } else { 4 },
            gamma_steps: DEFAULT_GAMMA_STEPS,
            theta_samples: DEFAULT_THETA_SAMPLES,
            rim_clearance: DEFAULT_RIM_CLEARANCE,
            success_tolerance: DEFAULT_SUCCESS_TOLERANCE,
            pairs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub arm: ArmModel,
    pub table: Option<Table>,
    pub obstacles: Vec<Obstacle>,
    pub objects: Vec<FixtureObject>,
    pub tasks: Vec<TaskSettings>,
}

impl Fixture {
    pub fn default_fixture() -> Self {
        parse_fixture(DEFAULT_FIXTURE, Path::new("<default>")).expect("bundled fixture parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse_fixture(&text, path)
    }

    pub fn task(&self, kind: TaskKind) -> Option<&TaskSettings> {
        self.tasks.iter().find(|t| t.kind == kind)
    }

    pub fn object(&self, name: &str) -> Option<&SqObject> {
        self.objects
            .iter()
            .find(|o| o.object.name == name)
            .map(|o| &o.object)
    }

    pub fn objects_with_role(&self, role: Role) -> impl Iterator<Item = &SqObject> {
        self.objects
            .iter()
            .filter(move |o| o.role == role)
            .map(|o| &o.object)
    }
}

enum Section {
    None,
    Arm,
    Table,
    Obstacle,
    Object,
    Task,
}

#[derive(Default)]
struct ObstacleDraft {
    name: Option<String>,
    center: Option<Vec3>,
    half: Option<Vec3>,
    yaw: f64,
}

#[derive(Default)]
struct ObjectDraft {
    name: Option<String>,
    shape: Option<ShapeClass>,
    radius: Option<f64>,
    height: Option<f64>,
    com: Option<Vec3>,
    role: Option<Role>,
}

struct Parser<'a> {
    path: &'a Path,
    line: usize,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: PathBuf::from(self.path),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn floats(&self, v: &str, n: usize) -> Result<Vec<f64>> {
        let out: std::result::Result<Vec<f64>, _> =
            v.split_whitespace().map(f64::from_str).collect();
        let out = out.map_err(|e| self.err(format!("bad number in `{v}`: {e}")))?;
        if out.len() != n {
            return Err(self.err(format!("expected {n} numbers, found {}", out.len())));
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(self.err("non-finite number"));
        }
        Ok(out)
    }

    fn float(&self, v: &str) -> Result<f64> {
        Ok(self.floats(v, 1)?[0])
    }

    fn vec3(&self, v: &str) -> Result<Vec3> {
        let f = self.floats(v, 3)?;
        Ok(Vec3::new(f[0], f[1], f[2]))
    }

    fn count(&self, v: &str) -> Result<usize> {
        v.parse()
            .map_err(|_| self.err(format!("expected a count, found `{v}`")))
    }

    fn region(&self, v: &str) -> Result<Region> {
        let f = self.floats(v, 4)?;
        if !(f[0] <= f[1] && f[2] <= f[3]) {
            return Err(self.err("region bounds must be `xmin xmax ymin ymax`"));
        }
        Ok(Region {
            x: (f[0], f[1]),
            y: (f[2], f[3]),
        })
    }
}

/// Parses fixture text; `path` only labels errors.
pub fn parse_fixture(text: &str, path: &Path) -> Result<Fixture> {
    let mut p = Parser { path, line: 0 };
    let mut arm = ArmModel::generic_7dof();
    let mut table: Option<(Option<Vec3>, Option<Vec3>)> = None;
    let mut obstacles: Vec<ObstacleDraft> = Vec::new();
    let mut objects: Vec<(ObjectDraft, usize)> = Vec::new();
    let mut tasks: Vec<(Option<TaskSettings>, usize)> = Vec::new();
    let mut pending_task_lines: Vec<Vec<(String, String, usize)>> = Vec::new();
    let mut section = Section::None;

    for (i, raw) in text.lines().enumerate() {
        p.line = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name.trim() {
                "arm" => Section::Arm,
                "table" => {
                    table = Some((None, None));
                    Section::Table
                }
                "obstacle" => {
                    obstacles.push(ObstacleDraft::default());
                    Section::Obstacle
                }
                "object" => {
                    objects.push((ObjectDraft::default(), p.line));
                    Section::Object
                }
                "task" => {
                    tasks.push((None, p.line));
                    pending_task_lines.push(Vec::new());
                    Section::Task
                }
                other => return Err(p.err(format!("unknown section `[{other}]`"))),
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(p.err("expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        match section {
            Section::None => return Err(p.err("key outside of any section")),
            Section::Arm => {
                let l = &mut arm.link_lengths;
                match key {
                    "shoulder_offset" => l.shoulder_offset = p.float(value)?,
                    "upper_arm" => l.upper_arm = p.float(value)?,
                    "forearm" => l.forearm = p.float(value)?,
                    "wrist_to_tool" => l.wrist_to_tool = p.float(value)?,
                    "base" => {
                        let f = p.floats(value, 4)?;
                        arm.base_pose = RigidTransform::from_parts(
                            Translation3::new(f[0], f[1], f[2]),
                            UnitQuaternion::from_axis_angle(&Vec3::z_axis(), f[3]),
                        );
                    }
                    "limits" => {
                        let f = p.floats(value, 2 * NUM_JOINTS)?;
                        for j in 0..NUM_JOINTS {
                            arm.joint_limits[j] = (f[2 * j], f[2 * j + 1]);
                        }
                    }
                    "radii" => {
                        let f = p.floats(value, 4)?;
                        arm.link_radii.copy_from_slice(&f);
                    }
                    "palm_depth" => arm.palm_depth = p.float(value)?,
                    "ready" => {
                        let f = p.floats(value, NUM_JOINTS)?;
                        let mut q = [0.0; NUM_JOINTS];
                        q.copy_from_slice(&f);
                        arm.ready = JointConfig(q);
                    }
                    _ => return Err(p.err(format!("unknown arm key `{key}`"))),
                }
            }
            Section::Table => {
                let t = table.as_mut().expect("table section open");
                match key {
                    "min" => t.0 = Some(p.vec3(value)?),
                    "max" => t.1 = Some(p.vec3(value)?),
                    _ => return Err(p.err(format!("unknown table key `{key}`"))),
                }
            }
            Section::Obstacle => {
                let o = obstacles.last_mut().expect("obstacle section open");
                match key {
                    "name" => o.name = Some(value.to_string()),
                    "center" => o.center = Some(p.vec3(value)?),
                    "half_extents" => o.half = Some(p.vec3(value)?),
                    "yaw" => o.yaw = p.float(value)?,
                    _ => return Err(p.err(format!("unknown obstacle key `{key}`"))),
                }
            }
            Section::Object => {
                let o = &mut objects.last_mut().expect("object section open").0;
                match key {
                    "name" => o.name = Some(value.to_string()),
                    "shape" => {
                        o.shape = Some(value.parse().map_err(|e: Error| p.err(e.to_string()))?)
                    }
                    "radius" => o.radius = Some(p.float(value)?),
                    "height" => o.height = Some(p.float(value)?),
                    "com" => o.com = Some(p.vec3(value)?),
                    "role" => {
                        o.role = Some(match value {
                            "pick" => Role::Pick,
                            "pourer" => Role::Pourer,
                            "receiver" => Role::Receiver,
                            _ => return Err(p.err(format!("unknown role `{value}`"))),
                        })
                    }
                    _ => return Err(p.err(format!("unknown object key `{key}`"))),
                }
            }
            Section::Task => {
                pending_task_lines
                    .last_mut()
                    .expect("task section open")
                    .push((key.to_string(), value.to_string(), p.line));
            }
        }
    }

    // Task sections are resolved after the fact so `kind` may appear anywhere.
    for ((slot, start_line), lines) in tasks.iter_mut().zip(&pending_task_lines) {
        p.line = *start_line;
        let kind = lines
            .iter()
            .find(|(k, _, _)| k == "kind")
            .ok_or_else(|| p.err("task section without `kind`"))?;
        p.line = kind.2;
        let mut t = TaskSettings::new(kind.1.parse().map_err(|e: String| p.err(e))?);
        for (key, value, line) in lines {
            p.line = *line;
            match key.as_str() {
                "kind" => {}
                "start_region" => t.start_regions.push(p.region(value)?),
                "goal_region" => t.goal_regions.push(p.region(value)?),
                "receiver_region" => t.receiver_regions.push(p.region(value)?),
                "side_grasps" => t.side_grasps = p.count(value)?,
                "top_grasps" => t.top_grasps = p.count(value)?,
                "gamma_steps" => t.gamma_steps = p.count(value)?,
                "theta_samples" => t.theta_samples = p.count(value)?,
                "rim_clearance" => t.rim_clearance = p.float(value)?,
                "success_tolerance" => t.success_tolerance = p.float(value)?,
                "pair" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 2 {
                        return Err(p.err("pair expects `pourer receiver`"));
                    }
                    t.pairs.push((parts[0].to_string(), parts[1].to_string()));
                }
                _ => return Err(p.err(format!("unknown task key `{key}`"))),
            }
        }
        *slot = Some(t);
    }

    let table = match table {
        None => None,
        Some((Some(min), Some(max))) => {
            if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                return Err(Error::Config(
                    "table min must be below max on every axis".into(),
                ));
            }
            Some(Table { min, max })
        }
        Some(_) => return Err(Error::Config("table needs both `min` and `max`".into())),
    };

    let obstacles = obstacles
        .into_iter()
        .enumerate()
        .map(|(i, o)| {
            let center = o
                .center
                .ok_or_else(|| Error::Config(format!("obstacle {i} has no center")))?;
            let half = o
                .half
                .ok_or_else(|| Error::Config(format!("obstacle {i} has no half_extents")))?;
            if half.iter().any(|h| !h.is_finite() || *h <= 0.0) {
                return Err(Error::Config(format!(
                    "obstacle {i} half_extents must be positive"
                )));
            }
            let pose = RigidTransform::from_parts(
                Translation3::from(center),
                UnitQuaternion::from_axis_angle(&Vec3::z_axis(), o.yaw),
            );
            Ok(Obstacle::new(
                o.name.unwrap_or_else(|| format!("obstacle{i}")),
                pose,
                half,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let objects = objects
        .into_iter()
        .map(|(o, line)| {
            p.line = line;
            let name = o.name.ok_or_else(|| p.err("object without name"))?;
            let radius = o
                .radius
                .ok_or_else(|| p.err(format!("object `{name}` has no radius")))?;
            let height = o
                .height
                .ok_or_else(|| p.err(format!("object `{name}` has no height")))?;
            let mut obj = SqObject::new(
                name,
                o.shape.unwrap_or(ShapeClass::Cylinder),
                radius,
                height,
            )?;
            if let Some(com) = o.com {
                obj = obj.with_com(com)?;
            }
            Ok(FixtureObject {
                object: obj,
                role: o.role.unwrap_or(Role::Pick),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    arm.validate()?;
    let fixture = Fixture {
        arm,
        table,
        obstacles,
        objects,
        tasks: tasks
            .into_iter()
            .map(|(t, _)| t.expect("resolved"))
            .collect(),
    };
    for t in &fixture.tasks {
        for (a, b) in &t.pairs {
            for n in [a, b] {
                if fixture.object(n).is_none() {
                    return Err(Error::Config(format!("pair names unknown object `{n}`")));
                }
            }
        }
    }
    Ok(fixture)
}
