//! Distributed observers and output-tracking control for nonlinear
//! leader-following multi-agent systems.
//!
//! A leader in observable canonical form is estimated across a directed
//! communication graph by coupled local observers whose gain comes from a
//! Riccati design. Followers are affine nonlinear plants driven by
//! feedback-linearizing tracking laws that consume the local estimates in
//! place of the true leader state. The crate also ships the numerical
//! kernel (eigenvalues, Lyapunov and Riccati solves), differential-geometry
//! checks for the canonical-form construction, a deterministic simulation
//! engine, and a Monte-Carlo lab for two spectral inequalities used in the
//! convergence analysis.

pub mod control;
pub mod geometry;
pub mod graph;
pub mod lemma_lab;
pub mod linalg;
pub mod models;
pub mod observer;
pub mod sim;

mod util;
