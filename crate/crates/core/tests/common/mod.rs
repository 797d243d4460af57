//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod feasibility;
pub mod instances;
pub mod ltl;
pub mod planner;
pub mod qp;
