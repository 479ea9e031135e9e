//! Directed greybox fuzzing guided by enhanced target sequences: dominator
//! chains from program entry to each target point, weighted by how strongly
//! each node steers execution toward the target.

pub mod domtree;
pub mod ets;
pub mod graph;
pub mod icall;
pub mod pipeline;
pub mod proximity;
pub mod schedule;
pub mod sim;
pub mod weights;
