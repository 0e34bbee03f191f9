//! Multi-period AC optimal power flow built on a pattern-based modeling layer
//! and a condensed-space interior-point solver.

pub mod linalg;
pub mod cli;
pub mod ipm;
pub mod model;
pub mod power;
