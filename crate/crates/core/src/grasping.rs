//! Grasp candidates for upright symmetric objects and the grasp metric.
//!
//! A grasp is stored as `hand_to_object`, the object frame expressed in the
//! hand (tool) frame. The world pose of a grasped object is therefore
//! `tool * hand_to_object` and the hand pose reaching an object at `obj` is
//! `obj * hand_to_object.inverse()`.
//!
//! Hand frame convention: +z is the approach direction and the tool center
//! point sits at the origin, between the fingers.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Translation3, Unit, UnitQuaternion};

use crate::world::SqObject;
use crate::{RigidTransform, Vec3};

/// Widest object radius the hand accepts.
pub const MAX_APERTURE: f64 = 0.10;

/// Fractions of the object height at which side grasps are placed.
pub const SIDE_BANDS: [f64; 3] = [0.25, 0.5, 0.75];

/// How far below the top face a top grasp closes its fingers.
pub const TOP_GRASP_DEPTH: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraspKind {
    /// Horizontal approach toward the axis at `band` (fraction of height)
    /// from azimuth `azimuth` (object frame).
    Side { band: f64, azimuth: f64 },
    /// Vertical approach down the axis, hand rotated by `yaw`.
    Top { yaw: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grasp {
    pub id: usize,
    /// Object frame expressed in the hand frame.
    pub hand_to_object: RigidTransform,
    /// Point on the approach line, hand frame.
    pub approach_point: Vec3,
    /// Approach direction, hand frame.
    pub approach_dir: Unit<Vec3>,
    /// Finger preshape label. Carried along, never interpreted.
    pub preshape: String,
    pub kind: GraspKind,
}

impl Grasp {
    /// Builds a grasp from the hand pose expressed in the object frame.
    pub fn from_hand_in_object(
        id: usize,
        hand_in_object: RigidTransform,
        preshape: impl Into<String>,
        kind: GraspKind,
    ) -> Self {
        Grasp {
            id,
            hand_to_object: hand_in_object.inverse(),
            approach_point: Vec3::zeros(),
            approach_dir: Vec3::z_axis(),
            preshape: preshape.into(),
            kind,
        }
    }

    /// Hand pose that executes this grasp on an object at `object_pose`.
    pub fn hand_pose(&self, object_pose: &RigidTransform) -> RigidTransform {
        object_pose * self.hand_to_object.inverse()
    }

    /// Approach line (point, unit direction) in the object frame.
    pub fn approach_line_in_object(&self) -> (Vec3, Vec3) {
        let h_in_o = self.hand_to_object.inverse();
        let p = h_in_o.transform_point(&self.approach_point.into()).coords;
        let d = h_in_o.rotation * self.approach_dir.into_inner();
        (p, d)
    }

    pub fn is_side(&self) -> bool {
        matches!(self.kind, GraspKind::Side { .. })
    }
}

fn frame(x: Vec3, y: Vec3, z: Vec3, origin: Vec3) -> RigidTransform {
    let r = Matrix3::from_columns(&[x, y, z]);
    RigidTransform::from_parts(
        Translation3::from(origin),
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)),
    )
}

/// Side grasps at three height bands plus top grasps, all deterministic.
///
/// Side grasps are spread evenly in azimuth; their approach is horizontal and
/// aims at the object axis, with the hand x-axis along the object's up axis.
/// Top grasps are spread evenly in yaw and approach straight down the axis.
/// Objects wider than [`MAX_APERTURE`] get no grasps.
pub fn generate_grasps(obj: &SqObject, side_count: usize, top_count: usize) -> Vec<Grasp> {
    if obj.radius > MAX_APERTURE {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(side_count * SIDE_BANDS.len() + top_count);
    let up = Vec3::z();
    for band in SIDE_BANDS {
        for k in 0..side_count {
            let azimuth = 2.0 * PI * k as f64 / side_count as f64;
            let (s, c) = azimuth.sin_cos();
            let z = Vec3::new(-c, -s, 0.0);
            let x = up;
            let y = z.cross(&x);
            let hand = frame(x, y, z, Vec3::new(0.0, 0.0, band * obj.height));
            out.push(Grasp::from_hand_in_object(
                out.len(),
                hand,
                "wrap",
                GraspKind::Side { band, azimuth },
            ));
        }
    }
    let depth = TOP_GRASP_DEPTH.min(obj.height * 0.5);
    for k in 0..top_count {
        let yaw = 2.0 * PI * k as f64 / top_count as f64;
        let (s, c) = yaw.sin_cos();
        let z = -up;
        let x = Vec3::new(c, s, 0.0);
        let y = z.cross(&x);
        let hand = frame(x, y, z, Vec3::new(0.0, 0.0, obj.height - depth));
        out.push(Grasp::from_hand_in_object(
            out.len(),
            hand,
            "pinch",
            GraspKind::Top { yaw },
        ));
    }
    out
}

/// Distance from the object's center of mass to the hand's approach line,
/// in meters. Lower is better.
pub fn grasp_metric(obj: &SqObject, g: &Grasp) -> f64 {
    let (p, d) = g.approach_line_in_object();
    (obj.com - p).cross(&d).norm() / d.norm()
}
