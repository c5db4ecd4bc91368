//! Grasp selection for two-step manipulation tasks.
//!
//! The crate ranks candidate grasps with the arm-and-grasp ordering: grasps
//! are binned by how many collision-free inverse kinematic solutions reach
//! them (the arm metric), then sorted inside each bin by the distance between
//! the object's center of mass and the hand's approach line (the grasp
//! metric). The ordering can be measured at the start pose, at a guessed goal
//! pose, or as a normalized sum of both.
//!
//! Module map:
//!
//! - [`kinematics`]: forward and analytic inverse kinematics of a 7-DOF
//!   S-R-S arm parameterized by the elbow self-motion angle.
//! - [`world`]: tabletop scene, capsule / oriented-box collision queries.
//! - [`grasping`]: grasp candidates for symmetric objects and the grasp metric.
//! - [`metrics`]: arm metric, grouped ordering and start+goal averaging.
//! - [`tasks`]: pick-and-place and pouring goal guesses, tilt feasibility.
//! - [`planner`]: joint-space RRT-Connect and task execution.
//! - [`harness`]: randomized scenarios, Monte-Carlo suite, CSV and fixtures.

pub mod error;
pub mod grasping;
pub mod harness;
pub mod kinematics;
pub mod metrics;
pub mod planner;
pub mod tasks;
pub mod world;

pub use error::{Error, Result};
pub use grasping::{generate_grasps, grasp_metric, Grasp};
pub use kinematics::{
    analytic_ik, forward_kinematics, ik_solution_set, ArmModel, ElbowParameter, JointConfig,
};
pub use metrics::{arm_metric, rank_average, rank_m_ag, Group, RankedGraspSet};
pub use world::{arm_in_collision, object_pose_in_collision, Scene, ShapeClass, SqObject};

/// SE(3) pose: rotation plus translation in meters.
pub type RigidTransform = nalgebra::Isometry3<f64>;

/// Cartesian point or direction in meters.
pub type Vec3 = nalgebra::Vector3<f64>;
