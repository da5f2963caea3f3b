//! Secure integrated sensing and communication over a fluid antenna surface.
//!
//! The library models a base station whose transmit antenna occupies a planar
//! grid of selectable ports: it synthesizes spatially correlated user
//! channels, computes secrecy and radar SINR metrics against both an external
//! sensing-target eavesdropper and internal (user) eavesdroppers, and
//! optimizes the transmit precoder jointly with the active-port subset via
//! fractional programming and successive convex approximation. Three
//! zero-forcing port-selection baselines and a seeded Monte Carlo experiment
//! harness round out the toolkit.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod fp;
pub mod geometry;
pub mod metrics;
pub mod solver;
pub mod zf;

pub use error::{Error, Result};
