//! Solver for the z-invariant Calabi-Yau equation on the Kodaira-Thurston
//! manifold, reduced to a Monge-Ampère type equation on the 3-torus, plus a
//! harness that checks the ABP-style a priori estimates on computed solutions.

pub mod grid3;
pub mod geometry;
pub mod solver;
pub mod abp;
pub mod estimates;
pub mod runner;
