//! Driven-dissipative XY spin models: mean-field phases, linear stability,
//! exact master-equation dynamics, quantum trajectories and
//! permutation-symmetric reduction.

pub mod error;
pub mod exact;
pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod permsym;
pub mod stability;
pub mod trajectories;

pub use error::{Error, Result};
pub use model::{Bloch, BlochField, CouplingSpec, ModelParams};
