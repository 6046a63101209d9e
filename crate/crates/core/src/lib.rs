//! Simulation and reinforcement-learning toolkit for a balance-robust
//! squatting controller on a lower-extremity exoskeleton.
//!
//! The crate is organized around the simulation stack (multibody dynamics,
//! foot contact with center-of-pressure sensing, PD actuation, reference
//! squat motion), the learning stack (a from-scratch MLP with reverse-mode
//! gradients and a PPO trainer), and the harness (run configuration,
//! telemetry, metrics, self-checks) that the service and CLI drive.

pub mod actuation;
pub mod check;
pub mod config;
pub mod contact;
pub mod env;
pub mod metrics;
pub mod model;
pub mod multibody;
pub mod nn;
pub mod ppo;
pub mod reference;
pub mod runner;
pub mod telemetry;

pub use config::RunConfig;
pub use model::{default_exoskeleton, ModelSpec};
pub use multibody::{DynWorkspace, DynamicsError, ExternalForceSet, GeneralizedState, ModelInstance};
