//! Simulation and verification of boundary-feedback stabilization for a
//! flexible Euler-Bernoulli beam carrying a tip mass.
//!
//! The beam is discretized with Hermite cubics ([`fem`]); the feedback law
//! and its certificate live in [`control`]; the Lyapunov functional and the
//! inequality checks in [`lyapunov`]; closed-loop integration in
//! [`simulator`].

pub mod beam;
pub mod control;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod lyapunov;
pub mod modal;
pub mod profile;
pub mod quadrature;
pub mod simulator;

pub use error::{Error, Result};
