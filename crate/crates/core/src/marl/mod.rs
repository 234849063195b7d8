//! Multi-agent actor-critic learners with hand-written backpropagation.
//!
//! Each region's agent owns up to three policy heads (one per representative
//! sample), centralised critics over (global state, joint action), their
//! target copies and Adam state. See [`agent::Algorithm`] for the three
//! supported variants.

pub mod agent;
pub mod mlp;
pub mod optim;
pub mod replay;
pub mod train;

pub use agent::{
    action_gradient, actor_objective_grad, critic_input, critic_loss_grad, td_target, Agent,
    AgentEnsemble, Algorithm, Checkpoint, LearnerConfig, UpdateStats,
};
pub use mlp::{soft_update, Mlp, OutputHead};
pub use optim::{Adam, NoiseSchedule};
pub use replay::{ReplayBuffer, Transition};
pub use train::{read_curve, train, write_curve, CurveRow, TrainConfig, TrainOutcome};

use crate::env::EnvError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MarlError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}
