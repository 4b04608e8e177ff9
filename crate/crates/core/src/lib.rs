//! Workbench for QHC, the joint logic of problems and propositions.

pub mod calculus;
pub mod geometry;
pub mod model;
pub mod principles;
pub mod set_models;
pub mod sheaf;
pub mod soundness;
pub mod syntax;
pub mod topology;
pub mod transforms;
