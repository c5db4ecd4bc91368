//! Tabletop scenes and collision queries.
//!
//! Every solid is a capsule or an oriented box. Arm links are capsules, the
//! table and static obstacles are boxes, objects are capsules (cylinders and
//! cones) or boxes. Modeled bodies (arm links, objects) are grown by
//! [`COLLISION_MARGIN`]; the table and obstacles are not.
//!
//! Objects may rest on the table: object-vs-table contact is judged on the
//! exact shape's lowest point instead of the inflated solid.

pub mod shapes;

use std::fmt;

use nalgebra::Point3;

use crate::grasping::Grasp;
use crate::kinematics::{chain_points, ArmModel, JointConfig};
use crate::{Error, Result, RigidTransform, Vec3};

pub use shapes::{Capsule, Obb, Solid};

/// Inflation applied to every arm link and object body.
pub const COLLISION_MARGIN: f64 = 0.002;

/// Penetration below the table top tolerated for resting objects.
pub const SUPPORT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeClass {
    Cylinder,
    Box,
    Cone,
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeClass::Cylinder => "cylinder",
            ShapeClass::Box => "box",
            ShapeClass::Cone => "cone",
        })
    }
}

impl std::str::FromStr for ShapeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cylinder" => Ok(ShapeClass::Cylinder),
            "box" => Ok(ShapeClass::Box),
            "cone" => Ok(ShapeClass::Cone),
            other => Err(Error::Config(format!("unknown shape class `{other}`"))),
        }
    }
}

/// Rotationally symmetric object described by superquadric-style radius and
/// height. The object frame sits at the center of the bottom face, +z up.
#[derive(Debug, Clone, PartialEq)]
pub struct SqObject {
    pub name: String,
    pub radius: f64,
    pub height: f64,
    /// Center of mass in the object frame.
    pub com: Vec3,
    pub shape: ShapeClass,
}

impl SqObject {
    /// Object with its center of mass at the solid's centroid.
    pub fn new(
        name: impl Into<String>,
        shape: ShapeClass,
        radius: f64,
        height: f64,
    ) -> Result<Self> {
        let obj = SqObject {
            name: name.into(),
            radius,
            height,
            com: Vec3::zeros(),
            shape,
        };
        let com = obj.centroid();
        obj.with_com(com)
    }

    pub fn cylinder(name: impl Into<String>, radius: f64, height: f64) -> Result<Self> {
        Self::new(name, ShapeClass::Cylinder, radius, height)
    }

    pub fn with_com(mut self, com: Vec3) -> Result<Self> {
        self.com = com;
        self.validate()?;
        Ok(self)
    }

    pub fn centroid(&self) -> Vec3 {
        match self.shape {
            ShapeClass::Cylinder | ShapeClass::Box => Vec3::new(0.0, 0.0, self.height * 0.5),
            // Solid cone standing on its base.
            ShapeClass::Cone => Vec3::new(0.0, 0.0, self.height * 0.25),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidObject {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if !self.radius.is_finite() || self.radius <= 0.0 {
            return bad("radius must be positive");
        }
        if !self.height.is_finite() || self.height <= 0.0 {
            return bad("height must be positive");
        }
        let c = &self.com;
        let radial_ok = match self.shape {
            ShapeClass::Box => c.x.abs() <= self.radius && c.y.abs() <= self.radius,
            _ => c.x.hypot(c.y) <= self.radius,
        };
        if !(radial_ok && c.z >= 0.0 && c.z <= self.height) {
            return bad("center of mass outside the bounding primitive");
        }
        Ok(())
    }

    fn bounding_box(&self) -> Obb {
        Obb {
            center: Vec3::new(0.0, 0.0, self.height * 0.5),
            axes: nalgebra::Matrix3::identity(),
            half_extents: Vec3::new(self.radius, self.radius, self.height * 0.5),
        }
    }

    /// Collision solid in the object frame.
    pub fn solid(&self) -> Solid {
        match self.shape {
            ShapeClass::Cylinder | ShapeClass::Cone => Solid::Clipped(
                Capsule::new(Vec3::zeros(), Vec3::new(0.0, 0.0, self.height), self.radius),
                self.bounding_box(),
            ),
            ShapeClass::Box => Solid::Box(self.bounding_box()),
        }
    }

    /// Lowest world z of the exact shape at `pose`.
    pub fn lowest_point(&self, pose: &RigidTransform) -> f64 {
        let axis = pose.rotation * Vec3::z();
        let bottom = pose.translation.vector;
        let top = pose
            .transform_point(&Point3::new(0.0, 0.0, self.height))
            .coords;
        let rim_drop = self.radius * (1.0 - axis.z * axis.z).max(0.0).sqrt();
        match self.shape {
            ShapeClass::Cylinder => (bottom.z - rim_drop).min(top.z - rim_drop),
            ShapeClass::Cone => (bottom.z - rim_drop).min(top.z),
            ShapeClass::Box => {
                let b = Obb::from_pose(
                    &(pose * nalgebra::Translation3::new(0.0, 0.0, self.height * 0.5)),
                    Vec3::new(self.radius, self.radius, self.height * 0.5),
                );
                b.corners()
                    .iter()
                    .map(|c| c.z)
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Center of the top face in world coordinates.
    pub fn top_center(&self, pose: &RigidTransform) -> Vec3 {
        pose.transform_point(&Point3::new(0.0, 0.0, self.height))
            .coords
    }
}

/// Axis-aligned table; its top face defines the support plane, +z up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table {
    pub min: Vec3,
    pub max: Vec3,
}

impl Table {
    pub fn top(&self) -> f64 {
        self.max.z
    }

    pub fn obb(&self) -> Obb {
        Obb::axis_aligned(self.min, self.max)
    }

    fn covers_xy(&self, p: &Vec3, pad: f64) -> bool {
        p.x >= self.min.x - pad
            && p.x <= self.max.x + pad
            && p.y >= self.min.y - pad
            && p.y <= self.max.y + pad
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub name: String,
    pub obb: Obb,
}

impl Obstacle {
    pub fn new(name: impl Into<String>, pose: RigidTransform, half_extents: Vec3) -> Self {
        Obstacle {
            name: name.into(),
            obb: Obb::from_pose(&pose, half_extents),
        }
    }

    pub fn pose(&self) -> RigidTransform {
        RigidTransform::from_parts(self.obb.center.into(), self.obb.rotation())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedObject {
    pub object: SqObject,
    /// World pose of the object frame.
    pub pose: RigidTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub table: Option<Table>,
    pub obstacles: Vec<Obstacle>,
    pub objects: Vec<PlacedObject>,
    pub arm: ArmModel,
}

impl Scene {
    /// No table, no obstacles, no objects.
    pub fn empty(arm: ArmModel) -> Self {
        Scene {
            table: None,
            obstacles: Vec::new(),
            objects: Vec::new(),
            arm,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacles.push(obstacle);
        self
    }

    pub fn with_object(mut self, object: SqObject, pose: RigidTransform) -> Self {
        self.objects.push(PlacedObject { object, pose });
        self
    }

    pub fn object(&self, name: &str) -> Option<&PlacedObject> {
        self.objects.iter().find(|o| o.object.name == name)
    }

    /// Copy of the scene with object `name` moved to `pose`.
    pub fn moving_object(&self, name: &str, pose: RigidTransform) -> Scene {
        let mut s = self.clone();
        for o in s.objects.iter_mut().filter(|o| o.object.name == name) {
            o.pose = pose;
        }
        s
    }

    pub fn table_top(&self) -> f64 {
        self.table.map(|t| t.top()).unwrap_or(0.0)
    }
}

/// An object carried by the hand with a fixed grasp.
#[derive(Debug, Clone, Copy)]
pub struct Held<'a> {
    pub object: &'a SqObject,
    pub grasp: &'a Grasp,
}

impl<'a> Held<'a> {
    pub fn new(object: &'a SqObject, grasp: &'a Grasp) -> Self {
        Held { object, grasp }
    }

    /// World pose of the held object for a given tool pose.
    pub fn object_pose(&self, tool: &RigidTransform) -> RigidTransform {
        tool * self.grasp.hand_to_object
    }
}

/// Arm link capsules in world coordinates: base column, upper arm, forearm, hand.
pub fn arm_capsules(arm: &ArmModel, q: &JointConfig) -> ([Capsule; 4], RigidTransform) {
    let p = chain_points(arm, q);
    let approach = p.tool.rotation * Vec3::z();
    let palm = p.tool.translation.vector - approach * arm.palm_depth;
    let r = arm.link_radii;
    (
        [
            Capsule::new(p.base, p.shoulder, r[0]),
            Capsule::new(p.shoulder, p.elbow, r[1]),
            Capsule::new(p.elbow, p.wrist, r[2]),
            Capsule::new(p.wrist, palm, r[3]),
        ],
        p.tool,
    )
}

const BASE: usize = 0;
const UPPER: usize = 1;
const FOREARM: usize = 2;
const HAND: usize = 3;
const SELF_PAIRS: [(usize, usize); 3] = [(BASE, FOREARM), (BASE, HAND), (UPPER, HAND)];

/// Collision context: the scene, an optional held object, and an optional
/// scene object the hand may touch (the one about to be grasped or just
/// released).
#[derive(Debug, Clone, Copy)]
pub struct CollisionQuery<'a> {
    pub scene: &'a Scene,
    pub held: Option<Held<'a>>,
    pub hand_exempt: Option<&'a str>,
}

impl<'a> CollisionQuery<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        CollisionQuery {
            scene,
            held: None,
            hand_exempt: None,
        }
    }

    pub fn holding(mut self, held: Held<'a>) -> Self {
        self.held = Some(held);
        self
    }

    pub fn hand_may_touch(mut self, name: &'a str) -> Self {
        self.hand_exempt = Some(name);
        self
    }

    fn skip_object(&self, name: &str) -> bool {
        self.held.is_some_and(|h| h.object.name == name)
    }

    pub fn arm_collides(&self, q: &JointConfig) -> bool {
        let scene = self.scene;
        let (links, tool) = arm_capsules(&scene.arm, q);
        let link_solids = links.map(Solid::Capsule);
        let m = COLLISION_MARGIN;

        for (i, j) in SELF_PAIRS {
            if shapes::solids_overlap(&link_solids[i], &link_solids[j], 2.0 * m) {
                return true;
            }
        }

        if let Some(table) = &scene.table {
            let t = Solid::Box(table.obb());
            // The base column is mounted on the table.
            if link_solids[UPPER..]
                .iter()
                .any(|l| shapes::solids_overlap(l, &t, m))
            {
                return true;
            }
        }

        for obs in &scene.obstacles {
            let o = Solid::Box(obs.obb);
            if link_solids.iter().any(|l| shapes::solids_overlap(l, &o, m)) {
                return true;
            }
        }

        for placed in &scene.objects {
            if self.skip_object(&placed.object.name) {
                continue;
            }
            let body = placed.object.solid().transformed(&placed.pose);
            let exempt = self.hand_exempt == Some(placed.object.name.as_str());
            for (i, l) in link_solids.iter().enumerate() {
                if exempt && i == HAND {
                    continue;
                }
                if shapes::solids_overlap(l, &body, 2.0 * m) {
                    return true;
                }
            }
        }

        if let Some(held) = self.held {
            let pose = held.object_pose(&tool);
            if object_body_collides(scene, held.object, &pose) {
                return true;
            }
            let body = held.object.solid().transformed(&pose);
            if link_solids[..HAND]
                .iter()
                .any(|l| shapes::solids_overlap(l, &body, 2.0 * m))
            {
                return true;
            }
        }
        false
    }
}

fn object_body_collides(scene: &Scene, obj: &SqObject, pose: &RigidTransform) -> bool {
    let m = COLLISION_MARGIN;
    if let Some(table) = &scene.table {
        if table.covers_xy(&pose.translation.vector, obj.radius + obj.height)
            && obj.lowest_point(pose) < table.top() - SUPPORT_TOLERANCE
        {
            return true;
        }
    }
    let body = obj.solid().transformed(pose);
    for obs in &scene.obstacles {
        if shapes::solids_overlap(&body, &Solid::Box(obs.obb), m) {
            return true;
        }
    }
    for placed in &scene.objects {
        if placed.object.name == obj.name {
            continue;
        }
        let other = placed.object.solid().transformed(&placed.pose);
        if shapes::solids_overlap(&body, &other, 2.0 * m) {
            return true;
        }
    }
    false
}

/// True if the arm at `q` (optionally holding an object) intersects the
/// table, an obstacle, a non-held object, or itself.
pub fn arm_in_collision(scene: &Scene, q: &JointConfig, held: Option<Held<'_>>) -> bool {
    let mut query = CollisionQuery::new(scene);
    query.held = held;
    query.arm_collides(q)
}

/// True if `obj` placed at `pose` intersects the table, an obstacle, or any
/// other scene object. A scene object with the same name is the object
/// itself and is ignored.
pub fn object_pose_in_collision(scene: &Scene, obj: &SqObject, pose: &RigidTransform) -> bool {
    object_body_collides(scene, obj, pose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;

    fn table() -> Table {
        Table {
            min: Vec3::new(-0.4, -0.9, -0.05),
            max: Vec3::new(1.0, 0.9, 0.0),
        }
    }

    #[test]
    fn empty_scene_home_is_free() {
        let scene = Scene::empty(ArmModel::generic_7dof());
        assert!(!arm_in_collision(&scene, &JointConfig::zeros(), None));
        assert!(!arm_in_collision(&scene, &scene.arm.ready, None));
    }

    #[test]
    fn tool_below_table_collides() {
        let arm = ArmModel::generic_7dof();
        let scene = Scene::empty(arm.clone()).with_table(table());
        // Pitch the shoulder forward until the tool is 5 cm under the table top.
        let mut lo = JointConfig([0.0, 1.6, 0.0, 1.4, 0.0, 0.2, 0.0]);
        for _ in 0..100 {
            if forward_kinematics(&arm, &lo).translation.vector.z < -0.05 {
                break;
            }
            lo.0[1] += 0.01;
        }
        assert!(forward_kinematics(&arm, &lo).translation.vector.z < -0.05);
        assert!(arm_in_collision(&scene, &lo, None));
        assert!(!arm_in_collision(&Scene::empty(arm), &lo, None));
    }

    #[test]
    fn floating_object_is_free() {
        let scene = Scene::empty(ArmModel::generic_7dof())
            .with_table(table())
            .with_obstacle(Obstacle::new(
                "block",
                RigidTransform::translation(0.5, 0.0, 0.1),
                Vec3::new(0.1, 0.1, 0.1),
            ));
        let obj = SqObject::cylinder("can", 0.04, 0.12).unwrap();
        assert!(!object_pose_in_collision(
            &scene,
            &obj,
            &RigidTransform::translation(0.5, 0.0, 1.3)
        ));
    }

    #[test]
    fn object_on_obstacle_pose_collides() {
        let pose = RigidTransform::new(Vec3::new(0.5, 0.2, 0.1), Vec3::new(0.0, 0.0, 0.7));
        let scene = Scene::empty(ArmModel::generic_7dof()).with_obstacle(Obstacle::new(
            "block",
            pose,
            Vec3::new(0.05, 0.05, 0.05),
        ));
        let obj = SqObject::cylinder("can", 0.04, 0.12).unwrap();
        assert!(object_pose_in_collision(&scene, &obj, &pose));
    }

    #[test]
    fn resting_object_is_free_sunken_object_is_not() {
        let scene = Scene::empty(ArmModel::generic_7dof()).with_table(table());
        let obj = SqObject::cylinder("can", 0.04, 0.12).unwrap();
        assert!(!object_pose_in_collision(
            &scene,
            &obj,
            &RigidTransform::translation(0.5, 0.0, 0.0)
        ));
        assert!(object_pose_in_collision(
            &scene,
            &obj,
            &RigidTransform::translation(0.5, 0.0, -0.01)
        ));
        // Tipped over onto its side and lifted by less than its radius.
        let tipped = RigidTransform::new(Vec3::new(0.5, 0.0, 0.03), Vec3::new(std::f64::consts::FRAC_PI_2, 0.0, 0.0));
        assert!(object_pose_in_collision(&scene, &obj, &tipped));
    }

    #[test]
    fn object_validation() {
        assert!(SqObject::cylinder("x", 0.0, 0.1).is_err());
        assert!(SqObject::cylinder("x", 0.1, -1.0).is_err());
        let o = SqObject::cylinder("x", 0.05, 0.2).unwrap();
        assert_eq!(o.com, Vec3::new(0.0, 0.0, 0.1));
        assert!(o.clone().with_com(Vec3::new(0.0, 0.0, 0.3)).is_err());
        let cone = SqObject::new("c", ShapeClass::Cone, 0.05, 0.2).unwrap();
        assert!((cone.com.z - 0.05).abs() < 1e-15);
    }

    #[test]
    fn extra_obstacle_never_frees_a_config() {
        let arm = ArmModel::generic_7dof();
        let base = Scene::empty(arm.clone()).with_table(table());
        let more = base.clone().with_obstacle(Obstacle::new(
            "wall",
            RigidTransform::translation(0.45, 0.0, 0.2),
            Vec3::new(0.02, 0.3, 0.2),
        ));
        let mut q = arm.ready;
        for k in 0..200 {
            q.0[0] = -1.5 + 3.0 * k as f64 / 200.0;
            q.0[1] = 0.2 + (k % 7) as f64 * 0.15;
            if arm_in_collision(&base, &q, None) {
                assert!(arm_in_collision(&more, &q, None));
            }
        }
    }
}
