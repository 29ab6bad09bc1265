//! Simulator and verification harness for sliding-mode control of the
//! type-III Caginalp phase-field system.
//!
//! The model couples a hyperbolic heat balance for the thermal displacement
//! `w` (whose time derivative is the relative temperature `theta`) with a
//! parabolic equation for the phase variable `phi` carrying a double-well
//! potential. Two feedback laws are supported: a nonlocal sign term in the
//! heat balance steering `theta + alpha phi` to a target (problem A), and
//! one in the phase equation steering `phi` to a prescribed distribution
//! (problem B). In both cases the feedback gain `rho` forces the state onto
//! the sliding manifold in finite time once it dominates the measured
//! disturbance.
//!
//! The discretization is constructive: a cosine spectral Galerkin basis in
//! space (which diagonalizes the Neumann Laplacian), Yosida-regularized
//! nonlinearities, and an IMEX Euler stepper in time. The [`sliding`] module
//! turns the reaching inequality into a per-run certificate, and [`verify`]
//! hosts convergence and stability studies.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod operators;
pub mod report;
pub mod sliding;
pub mod spectral;
pub mod verify;

pub use dynamics::{simulate, ProblemKind, SystemConfig, Trajectory};
pub use sliding::{certify, Certificate};
