//! From-scratch function approximators: a dense ReLU MLP with exact
//! reverse-mode gradients, the Gaussian policy head, observation
//! normalization and checkpointing.

pub mod checkpoint;
pub mod mlp;
pub mod normalizer;
pub mod policy;

pub use checkpoint::{Checkpoint, CheckpointError, CheckpointMeta};
pub use mlp::{Mlp, Tape};
pub use normalizer::RunningNorm;
pub use policy::{GaussianDist, NetError, PolicyValueNet};
