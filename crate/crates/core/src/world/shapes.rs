//! Capsules, oriented boxes and their pairwise distance queries.

use nalgebra::{Matrix3, UnitQuaternion};

use crate::{RigidTransform, Vec3};

/// Segment swept by a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Self {
        Capsule { a, b, radius }
    }

    pub fn transformed(&self, pose: &RigidTransform) -> Capsule {
        Capsule {
            a: pose.transform_point(&self.a.into()).coords,
            b: pose.transform_point(&self.b.into()).coords,
            radius: self.radius,
        }
    }

    fn bounding_sphere(&self) -> (Vec3, f64) {
        (
            (self.a + self.b) * 0.5,
            (self.b - self.a).norm() * 0.5 + self.radius,
        )
    }
}

/// Oriented box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec3,
    /// Columns are the box axes in world coordinates.
    pub axes: Matrix3<f64>,
    pub half_extents: Vec3,
}

impl Obb {
    pub fn axis_aligned(min: Vec3, max: Vec3) -> Self {
        Obb {
            center: (min + max) * 0.5,
            axes: Matrix3::identity(),
            half_extents: (max - min) * 0.5,
        }
    }

    pub fn from_pose(pose: &RigidTransform, half_extents: Vec3) -> Self {
        Obb {
            center: pose.translation.vector,
            axes: pose.rotation.to_rotation_matrix().into_inner(),
            half_extents,
        }
    }

    pub fn transformed(&self, pose: &RigidTransform) -> Obb {
        Obb {
            center: pose.transform_point(&self.center.into()).coords,
            axes: pose.rotation.to_rotation_matrix().into_inner() * self.axes,
            half_extents: self.half_extents,
        }
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.axes)
    }

    fn local_point(&self, p: &Vec3) -> Vec3 {
        self.axes.transpose() * (p - self.center)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let l = self.local_point(p);
        (0..3).all(|i| l[i].abs() <= self.half_extents[i])
    }

    /// Euclidean distance from `p` to the box (zero inside).
    pub fn point_distance(&self, p: &Vec3) -> f64 {
        let l = self.local_point(p);
        let mut d2 = 0.0;
        for i in 0..3 {
            let e = l[i].abs() - self.half_extents[i];
            if e > 0.0 {
                d2 += e * e;
            }
        }
        d2.sqrt()
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let s = Vec3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            );
            *c = self.center + self.axes * s.component_mul(&self.half_extents);
        }
        out
    }

    fn bounding_radius(&self) -> f64 {
        self.half_extents.norm()
    }
}

/// Closest distance between point `p` and segment `[a, b]`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Closest distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_segment_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
    const EPS: f64 = 1e-15;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Closest distance between segment `[a, b]` and a box.
///
/// The distance from a moving point to a convex set is convex along the
/// segment, so a golden-section search converges to the global minimum.
pub fn segment_obb_distance(a: &Vec3, b: &Vec3, obb: &Obb) -> f64 {
    let la = obb.local_point(a);
    let lb = obb.local_point(b);
    let h = obb.half_extents;
    let dist = |t: f64| {
        let p = la + (lb - la) * t;
        let mut d2 = 0.0;
        for i in 0..3 {
            let e = p[i].abs() - h[i];
            if e > 0.0 {
                d2 += e * e;
            }
        }
        d2.sqrt()
    };

    // Clip against the slab planes first: if the segment passes through the
    // box the distance is exactly zero.
    if segment_hits_box(&la, &lb, &h) {
        return 0.0;
    }

    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = dist(x1);
    let mut f2 = dist(x2);
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = dist(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = dist(x2);
        }
    }
    dist(0.0).min(dist(1.0)).min(f1).min(f2)
}

fn segment_hits_box(a: &Vec3, b: &Vec3, h: &Vec3) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if a[i].abs() > h[i] {
                return false;
            }
        } else {
            let inv = 1.0 / d[i];
            let mut ta = (-h[i] - a[i]) * inv;
            let mut tb = (h[i] - a[i]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Separating-axis overlap test between two boxes, each grown by `margin`.
pub fn obb_obb_overlap(a: &Obb, b: &Obb, margin: f64) -> bool {
    let ea = a.half_extents.add_scalar(margin);
    let eb = b.half_extents.add_scalar(margin);
    let rot = a.axes.transpose() * b.axes;
    let t = a.axes.transpose() * (b.center - a.center);
    let abs_r = rot.abs().add_scalar(1e-12);

    for i in 0..3 {
        let ra = ea[i];
        let rb = eb[0] * abs_r[(i, 0)] + eb[1] * abs_r[(i, 1)] + eb[2] * abs_r[(i, 2)];
        if t[i].abs() > ra + rb {
            return false;
        }
    }
    for j in 0..3 {
        let ra = ea[0] * abs_r[(0, j)] + ea[1] * abs_r[(1, j)] + ea[2] * abs_r[(2, j)];
        let rb = eb[j];
        let proj = t[0] * rot[(0, j)] + t[1] * rot[(1, j)] + t[2] * rot[(2, j)];
        if proj.abs() > ra + rb {
            return false;
        }
    }
    for i in 0..3 {
        let i1 = (i + 1) % 3;
        let i2 = (i + 2) % 3;
        for j in 0..3 {
            let j1 = (j + 1) % 3;
            let j2 = (j + 2) % 3;
            let ra = ea[i1] * abs_r[(i2, j)] + ea[i2] * abs_r[(i1, j)];
            let rb = eb[j1] * abs_r[(i, j2)] + eb[j2] * abs_r[(i, j1)];
            let proj = t[i2] * rot[(i1, j)] - t[i1] * rot[(i2, j)];
            if proj.abs() > ra + rb {
                return false;
            }
        }
    }
    true
}

/// A collision solid: capsule, oriented box, or the intersection of the two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solid {
    Capsule(Capsule),
    Box(Obb),
    /// Capsule clipped by a box. Used for cylinders and cones so the capsule's
    /// rounded ends do not stick out past the flat faces.
    Clipped(Capsule, Obb),
}

impl Solid {
    pub fn transformed(&self, pose: &RigidTransform) -> Solid {
        match self {
            Solid::Capsule(c) => Solid::Capsule(c.transformed(pose)),
            Solid::Box(b) => Solid::Box(b.transformed(pose)),
            Solid::Clipped(c, b) => Solid::Clipped(c.transformed(pose), b.transformed(pose)),
        }
    }

    fn bounding_sphere(&self) -> (Vec3, f64) {
        match self {
            Solid::Capsule(c) => c.bounding_sphere(),
            Solid::Box(b) => (b.center, b.bounding_radius()),
            Solid::Clipped(_, b) => (b.center, b.bounding_radius()),
        }
    }
}

/// True if the two solids come closer than `margin`.
///
/// A clipped solid is tested part by part and reported as overlapping only
/// when every part does, which never misses a true contact.
pub fn solids_overlap(a: &Solid, b: &Solid, margin: f64) -> bool {
    let (ca, ra) = a.bounding_sphere();
    let (cb, rb) = b.bounding_sphere();
    if (ca - cb).norm() > ra + rb + margin {
        return false;
    }
    match (a, b) {
        (Solid::Clipped(c, o), other) | (other, Solid::Clipped(c, o)) => {
            solids_overlap(&Solid::Capsule(*c), other, margin)
                && solids_overlap(&Solid::Box(*o), other, margin)
        }
        (Solid::Capsule(x), Solid::Capsule(y)) => {
            segment_segment_distance(&x.a, &x.b, &y.a, &y.b) <= x.radius + y.radius + margin
        }
        (Solid::Capsule(c), Solid::Box(o)) | (Solid::Box(o), Solid::Capsule(c)) => {
            segment_obb_distance(&c.a, &c.b, o) <= c.radius + margin
        }
        (Solid::Box(x), Solid::Box(y)) => obb_obb_overlap(x, y, margin),
    }
}
