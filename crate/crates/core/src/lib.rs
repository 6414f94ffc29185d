//! Spherically symmetric neutrino radiative transfer in the O(v/c) comoving
//! frame: a discrete-ordinates Boltzmann solver, the isotropic diffusion
//! source approximation (IDSA), and a verification harness that measures how
//! fast the kinetic solution approaches its diffusion, reaction, and
//! free-streaming limits.
//!
//! Phase space is (r, mu, omega): radius, direction cosine, neutrino energy.
//! All distribution values are occupation numbers in [0, 1] for physically
//! admissible data; rates are in 1/cm and velocities in cm/s.

pub mod asymptotics;
pub mod boltzmann;
pub mod cli;
pub mod error;
pub mod grid;
pub mod idsa;
pub mod kinetics;
pub mod matter;
pub mod scenario;

pub use error::{Error, Result};
