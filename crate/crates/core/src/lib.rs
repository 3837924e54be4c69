//! Planar bimanual rope rearrangement: a quasi-static rope simulator,
//! exploration-based data collection, a contrastive state encoder for
//! subgoal retrieval, leader-follower dual-arm control and an evaluation
//! harness with ablations and constraint sweeps.

pub mod config;
pub mod controller;
pub mod encoder;
pub mod error;
pub mod explore;
pub mod geometry;
pub mod harness;
pub mod nn;
pub mod planner;
pub mod policy;
pub mod sim;

pub use config::{Arm, PipelineConfig, TaskConfig};
pub use error::{Error, Result};
pub use geometry::Point;
pub use sim::{ActionPair, EnvState, PickPlace};
