//! Stability-constrained regrasp planning for a simplified biped.
//!
//! The crate plans pick / place / handover sequences in which every robot
//! state keeps the ground projection of the robot-object centre of mass
//! inside the foot support polygon by a configurable margin, and estimates
//! how stable a task is for each choice of start and end hand.

pub mod cli;
pub mod estimator;
pub mod geometry;
pub mod kinematics;
pub mod planner;
pub mod scenario;
pub mod scene;
pub mod stability;
