//! Policy/value network: a reverse-mode tape, the hierarchical history
//! encoder and trunk built on it, the PPO loss and its optimiser.

pub mod agent;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod tape;

pub use agent::{AgentStep, NetAgent};
pub use loss::{default_loss_spec, grad_check, gradients, loss_stats, LossSpec, LossStats, Minibatch, SyntheticBatch};
pub use model::{
    action_input, card_input, context_from_summaries, encode_context, forward, hand_summary, policy_value, Forward,
    NetInput, Observation,
};
pub use optim::{clip_global_norm, AdamW};
pub use params::{NetConfig, Params};
