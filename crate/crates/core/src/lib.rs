//! Desk-scale driving planner training stack: scenario simulator with
//! rasterized observations, dual-head Gaussian actor-critic, delayed A3C
//! trainer, rule-based experts for imitation pretraining and a learned
//! actuation-response model.

pub mod checkpoint;
pub mod episode;
pub mod error;
pub mod eval;
pub mod experts;
pub mod geometry;
pub mod map_env;
pub mod optim;
pub mod policy;
pub mod rewards;
pub mod trainer;
pub mod vehicle;

pub use error::{Error, Result};
pub use geometry::{Pose, Vec2};
