//! Configuration, presets and output for convergence studies of the
//! over-penalized weak Galerkin heat solver.

pub mod config;
pub mod output;
pub mod presets;
pub mod study;
pub mod verify;
