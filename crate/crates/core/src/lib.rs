//! Cooperative multi-agent double deep Q-learning for UAV base stations.
//!
//! Each UAV is an independent learner that moves in 3D to serve static and
//! mobile ground users in an interference-limited downlink, trading
//! connected users against propulsion energy. The crate contains the radio,
//! energy and mobility models, the shared environment, a small dense
//! network trainer, the agents, and the training/evaluation harness.

pub mod agent;
pub mod baseline;
pub mod energy;
pub mod geometry;
pub mod harness;
pub mod mobility;
pub mod neural;
pub mod radio;
pub mod world;
