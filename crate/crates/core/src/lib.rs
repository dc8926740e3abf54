//! Bounded distributed flocking for nonholonomic (unicycle) robots.
//!
//! The crate is organized bottom-up:
//!
//! * [`potential`]: the bump-function coordination potential and its radial force.
//! * [`graph`]: the hysteresis proximity graph and its switch log.
//! * [`dynamics`]: the unicycle double-integrator model and an RK4 stepper.
//! * [`control`]: saturated speed and heading consensus laws, plus the leader law.
//! * [`obstacles`]: circular obstacles and projection-point virtual agents.
//! * [`metrics`]: energy functions, sum identities and the runtime monitor.
//! * [`scenario`], [`sim`], [`trace`], [`plots`]: configuration, the simulation
//!   loop, trace I/O and plot-data emission.

pub mod angle;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod obstacles;
pub mod plots;
pub mod potential;
pub mod quadrature;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};

/// Planar vector used for positions and forces.
pub type Vec2 = nalgebra::Vector2<f64>;
