//! Analog CAM simulation, compilation and design-space tooling for tree-based
//! classifiers.

pub mod device_model;
pub mod interval;
pub mod matchline;
pub mod arch_model;
pub mod forest_compiler;
pub mod inference;
pub mod cli;
