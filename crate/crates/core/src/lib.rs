//! Security-aware planning for multi-agent systems with affine dynamics.

pub mod geometry;
pub mod ltl;
pub mod qp;
pub mod abstraction;
pub mod feasibility;
pub mod oracle;
pub mod pipeline;
pub mod planner;
pub mod scenario;
